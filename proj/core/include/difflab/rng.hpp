#pragma once

#include <cstdint>
#include <initializer_list>

namespace difflab {

/* Counter-based splittable random streams.
 *
 * All stochastic code in the library draws from SplitMix64 substreams keyed
 * by (seed, tags...).  Two properties the experiment contracts rely on:
 *   - bitwise reproducibility across runs and platforms (no std::
 *     distribution objects, whose output is implementation-defined);
 *   - substreams for distinct tag tuples are independent for practical
 *     purposes, so trajectories can run in parallel in any order.
 */
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in (0,1); never returns 0 so log() is safe
  double uniform01() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

// Mixes tag words into a seed to derive an independent substream key.
std::uint64_t derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

/* Standard-normal draws via Box-Muller on SplitMix64 uniforms.  Box-Muller
 * is used (rather than ziggurat or std::normal_distribution) because its
 * output is a fixed arithmetic function of the uniforms, which keeps the
 * bitwise-determinism contract. */
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

  double next();

 private:
  SplitMix64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace difflab
