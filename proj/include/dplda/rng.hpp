#pragma once

#include <cstdint>
#include <string_view>

namespace dplda {

// Deterministic random stream built on xoshiro256**. Streams are derived,
// not shared: every stochastic operation takes its own stream obtained from
// the run seed via derive("label") / derive(index), so adding or removing a
// consumer never shifts the randomness seen by another. All distributions
// are implemented here (no std::*_distribution) so that output is
// bit-identical across standard libraries and platforms.
class RngStream {
 public:
  explicit RngStream(uint64_t seed);

  // Child stream keyed by (this stream's key, label). Does not consume state.
  RngStream derive(std::string_view label) const;
  RngStream derive(uint64_t index) const;

  uint64_t next();

  // uniform on [0,1), 53-bit resolution
  double uniform01();
  // uniform on the open interval (0,1); safe as a log() argument
  double uniform_open();
  // uniform integer in [0, n), n >= 1
  uint64_t below(uint64_t n);

  // standard normal (Box-Muller, one value per call)
  double normal();
  // Gamma(shape, 1) via Marsaglia-Tsang; shape > 0
  double gamma(double shape);

  // The derivation key; RngStream(other.key()) reproduces a freshly derived
  // stream, which lets a derived stream be handed across a seed-taking API.
  uint64_t key() const { return key_; }

 private:
  RngStream() = default;
  void seed_state(uint64_t key);

  uint64_t key_ = 0;
  uint64_t s_[4] = {0, 0, 0, 0};
};

}  // namespace dplda
