#include "difflab/rng.hpp"

#include <cmath>

namespace difflab {

std::uint64_t derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  SplitMix64 mix(seed);
  std::uint64_t key = mix.next();
  for (std::uint64_t tag : tags) {
    SplitMix64 step(key ^ (tag + 0x9E3779B97F4A7C15ULL));
    key = step.next();
  }
  return key;
}

double GaussianStream::next() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = rng_.uniform01();
  const double u2 = rng_.uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 6.283185307179586476925286766559 * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

}  // namespace difflab
