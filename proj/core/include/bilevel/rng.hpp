#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "bilevel/types.hpp"

namespace bilevel {

/// Named sub-stream offsets. Every consumer of randomness in a run draws from
/// its own stream derived from the master seed, so that coupled runs sharing a
/// seed consume identical index sequences regardless of what else they compute.
enum class StreamId : uint64_t {
  kInner = 0,  // inner-loop samples (zeta^(1..K)) and the shared xi^(1)
  kYStep = 1,  // zeta^(K+1)
  kXStep = 2,  // zeta^(K+2); xi^(1) for the unrolled-differentiation solver
  kData = 3,   // dataset generation
  kInit = 4,   // iterate initialization
};

/// Mixes a master seed with a stream id into an independent sub-seed
/// (splitmix64 of seed xor golden-ratio multiple). Fixed mapping: the same
/// (seed, id) always yields the same sub-seed.
uint64_t mix_seed(uint64_t seed, uint64_t stream_id);

/// Deterministic random stream: identical seed implies an identical draw
/// sequence. Single-owner; move it, never share it mutably.
class RngStream {
 public:
  explicit RngStream(uint64_t seed, StreamId id = StreamId::kData);
  RngStream(uint64_t seed, uint64_t raw_stream_id);

  /// One uniform draw in [0, pool_size). Unbiased (rejection sampling).
  int draw_index(int pool_size);

  /// `count` i.i.d. draws with replacement in [0, pool_size).
  std::vector<int> draw_indices(int pool_size, int count);

  double uniform();  // [0, 1)
  double normal();   // standard normal, Box-Muller
  Vec normal_vec(int d);
  Mat normal_mat(int rows, int cols);  // filled row by row

  uint64_t seed() const { return seed_; }
  uint64_t stream_id() const { return stream_id_; }
  uint64_t counter() const { return counter_; }

 private:
  std::mt19937_64 gen_;
  uint64_t seed_ = 0;
  uint64_t stream_id_ = 0;
  uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bilevel
