#pragma once

#include <stdexcept>
#include <vector>

namespace bilevel {

/// Index-addressable validation (upper) and training (lower) samples. Order is
/// fixed after construction; coupled-run experiments rely on indices meaning
/// the same sample across runs.
template <class UpperSample, class LowerSample>
struct SampleSet {
  std::vector<UpperSample> upper;
  std::vector<LowerSample> lower;

  int n() const { return static_cast<int>(upper.size()); }
  int q() const { return static_cast<int>(lower.size()); }

  void validate() const {
    if (upper.empty() || lower.empty())
      throw std::invalid_argument("SampleSet: need at least one upper and one lower sample");
  }
};

}  // namespace bilevel
