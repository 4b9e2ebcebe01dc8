#include "bilevel/trace.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace bilevel {

const char* RunTrace::csv_header() {
  return "t,phi,grad_norm_sq,m_norm_sq,y_dist_to_ystar,elapsed_s";
}

namespace {
void put(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}
}  // namespace

void RunTrace::write_csv(std::ostream& os) const {
  os << csv_header() << '\n';
  for (const auto& p : points) {
    os << p.t << ',';
    put(os, p.phi);
    os << ',';
    put(os, p.grad_norm_sq);
    os << ',';
    put(os, p.m_norm_sq);
    os << ',';
    put(os, p.y_dist);
    os << ',';
    put(os, p.elapsed_s);
    os << '\n';
  }
}

void RunTrace::write_csv_file(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open trace file " + path);
  write_csv(f);
}

double RunTrace::min_grad_norm_sq() const {
  double best = std::numeric_limits<double>::quiet_NaN();
  for (const auto& p : points)
    if (std::isfinite(p.grad_norm_sq) && (!std::isfinite(best) || p.grad_norm_sq < best))
      best = p.grad_norm_sq;
  return best;
}

double RunTrace::final_phi() const {
  if (points.empty()) return std::numeric_limits<double>::quiet_NaN();
  return points.back().phi;
}

}  // namespace bilevel
