#include "dplda/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace dplda {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

uint64_t splitmix64(uint64_t& x) {
  uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(uint64_t seed) { seed_state(seed); }

void RngStream::seed_state(uint64_t key) {
  key_ = key;
  uint64_t x = key;
  for (auto& si : s_) si = splitmix64(x);
  // xoshiro state must not be all zero; splitmix64 output makes this
  // practically impossible, but guard anyway
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[3] = 1;
}

RngStream RngStream::derive(std::string_view label) const {
  uint64_t x = key_ ^ fnv1a(label);
  RngStream child;
  child.seed_state(splitmix64(x));
  return child;
}

RngStream RngStream::derive(uint64_t index) const {
  uint64_t x = key_ ^ (0xD1B54A32D192ED03ULL + index);
  RngStream child;
  child.seed_state(splitmix64(x));
  return child;
}

uint64_t RngStream::next() {
  const uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double RngStream::uniform_open() {
  return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
}

uint64_t RngStream::below(uint64_t n) {
  if (n == 0) throw std::invalid_argument("RngStream::below: n must be >= 1");
  return static_cast<uint64_t>(
      (static_cast<unsigned __int128>(next()) * static_cast<unsigned __int128>(n)) >> 64);
}

double RngStream::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double RngStream::gamma(double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("RngStream::gamma: shape must be > 0");
  if (shape < 1.0) {
    // boost: Gamma(a) = Gamma(a+1) * U^(1/a)
    const double g = gamma(shape + 1.0);
    return g * std::pow(uniform_open(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace dplda
