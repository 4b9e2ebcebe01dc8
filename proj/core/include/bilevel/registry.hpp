#pragma once

#include <map>
#include <string>

#include "bilevel/problem.hpp"

namespace bilevel {

/// Problem selection by name plus generator parameters, as they appear in
/// experiment configs. Unknown names and malformed parameters throw
/// std::invalid_argument.
struct ProblemSpec {
  std::string name;                          // quadratic | ridge_demo | ridge | mixture |
                                             // mixture_corrupted | toy_transfer | data_weighting
  std::map<std::string, std::string> params; // n, q, seed, rho1, rho2, d, corrupt_frac, ...
};

ProblemPtr make_problem(const ProblemSpec& spec);

/// Same instance family with the seed swapped out; n, q and the remaining
/// generator parameters stay fixed. Only meaningful for generated problems.
ProblemGen make_problem_gen(ProblemSpec spec);

}  // namespace bilevel
