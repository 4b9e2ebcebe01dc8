#include "bilevel/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bilevel {

namespace {
uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
}  // namespace

uint64_t mix_seed(uint64_t seed, uint64_t stream_id) {
  return splitmix64(seed ^ (0x9E3779B97F4A7C15ULL * (stream_id + 1)));
}

RngStream::RngStream(uint64_t seed, StreamId id)
    : RngStream(seed, static_cast<uint64_t>(id)) {}

RngStream::RngStream(uint64_t seed, uint64_t raw_stream_id)
    : gen_(mix_seed(seed, raw_stream_id)), seed_(seed), stream_id_(raw_stream_id) {}

int RngStream::draw_index(int pool_size) {
  if (pool_size < 1) throw std::invalid_argument("draw_index: pool_size must be >= 1");
  const uint64_t bound = static_cast<uint64_t>(pool_size);
  const uint64_t limit =
      std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % bound;
  uint64_t r;
  do {
    r = gen_();
  } while (r >= limit);
  ++counter_;
  return static_cast<int>(r % bound);
}

std::vector<int> RngStream::draw_indices(int pool_size, int count) {
  if (count < 1) throw std::invalid_argument("draw_indices: count must be >= 1");
  std::vector<int> out(static_cast<size_t>(count));
  for (auto& v : out) v = draw_index(pool_size);
  return out;
}

double RngStream::uniform() {
  ++counter_;
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    ++counter_;
    return spare_;
  }
  double u1, u2;
  do {
    u1 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  } while (u1 <= 0.0);
  u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  ++counter_;
  return r * std::cos(theta);
}

Vec RngStream::normal_vec(int d) {
  Vec v(d);
  for (int i = 0; i < d; ++i) v[i] = normal();
  return v;
}

Mat RngStream::normal_mat(int rows, int cols) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = normal();
  return m;
}

}  // namespace bilevel
