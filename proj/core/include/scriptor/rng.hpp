#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace scriptor {

// Deterministic seedable stream. All randomness in the project flows from one
// root seed, split per purpose via derive_seed so modules stay independent.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return unit_(eng_); }                  // [0,1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(eng_); }
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {  // inclusive
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_);
  }
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t next_u64() { return eng_(); }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

// Stable seed for a named sub-stream of a root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream_name);

inline RngStream derive_stream(std::uint64_t root, std::string_view stream_name) {
  return RngStream(derive_seed(root, stream_name));
}

}  // namespace scriptor
