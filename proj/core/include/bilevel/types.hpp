#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace bilevel {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised when a solver iterate turns non-finite. `quantity` names the first
/// offending value (e.g. "z_t^k", "m_t") and `t` the outer iteration.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::string quantity, int t)
      : std::runtime_error("non-finite value in " + quantity + " at iteration " +
                           std::to_string(t)),
        quantity(std::move(quantity)),
        t(t) {}
  std::string quantity;
  int t;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline void require_finite(const Vec& v, const char* quantity, int t) {
  if (!v.allFinite()) throw NonFiniteError(quantity, t);
}

inline void require_dim(const Vec& v, Eigen::Index d, const char* what) {
  if (v.size() != d)
    throw DimensionError(std::string(what) + ": expected dimension " +
                         std::to_string(d) + ", got " + std::to_string(v.size()));
}

}  // namespace bilevel
