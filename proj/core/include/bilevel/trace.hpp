#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "bilevel/types.hpp"

namespace bilevel {

struct TracePoint {
  int t = 0;
  Vec x, y, m;
  double phi = 0.0;           // empirical upper objective at (x_t, y_t)
  double m_norm_sq = 0.0;
  double grad_norm_sq = 0.0;  // exact ||grad Phi(x_t)||^2 when recorded, else NaN
  double y_dist = 0.0;        // ||y_t - y*(x_t)|| when recorded, else NaN
  double elapsed_s = 0.0;
};

/// Per-iteration record of a solver run. Rows are strictly increasing in t;
/// the CSV schema is (t, phi, grad_norm_sq, m_norm_sq, y_dist_to_ystar,
/// elapsed_s) with floating values at 17 significant digits. elapsed_s is a
/// measured wall-clock and is the one column excluded from bit-level
/// reproducibility.
struct RunTrace {
  std::vector<TracePoint> points;
  bool aborted = false;
  std::string abort_reason;

  static const char* csv_header();
  void write_csv(std::ostream& os) const;
  void write_csv_file(const std::string& path) const;

  double min_grad_norm_sq() const;  // over recorded points; NaN if never recorded
  double final_phi() const;
};

}  // namespace bilevel
