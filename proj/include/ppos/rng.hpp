#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace ppos {

// Philox 4x32-10 counter-based generator. A generator is fully identified by
// (seed, stream): every draw is a pure function of (seed, stream, counter),
// so parallel replicates can each own an independent stream and the merged
// results do not depend on scheduling order.
class Philox {
 public:
  Philox() : Philox(0, 0) {}

  Philox(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        ctr_{0, 0, static_cast<std::uint32_t>(stream),
             static_cast<std::uint32_t>(stream >> 32)} {}

  // One keyed block; exposed for known-answer tests and seed derivation.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 2> key,
                                            std::array<std::uint32_t, 4> ctr) {
    constexpr std::uint32_t mul0 = 0xD2511F53u, mul1 = 0xCD9E8D57u;
    constexpr std::uint32_t weyl0 = 0x9E3779B9u, weyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(mul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(mul1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
      key[0] += weyl0;
      key[1] += weyl1;
    }
    return ctr;
  }

  std::uint32_t next_u32() {
    if (pos_ == 4) {
      buf_ = block(key_, ctr_);
      pos_ = 0;
      if (++ctr_[0] == 0) ++ctr_[1];
    }
    return buf_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return lo | (hi << 32);
  }

  // Uniform on the open interval (0,1), 53-bit resolution.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  int bernoulli(double p) { return uniform01() < p ? 1 : 0; }

  double exponential() { return -std::log(uniform01()); }

  double exponential(double rate) { return exponential() / rate; }

  // Box-Muller with cached second deviate: fixed two-uniform consumption.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Marsaglia-Tsang; shape < 1 handled by the boost identity.
  double gamma(double shape) {
    if (shape < 1.0) {
      return gamma(shape + 1.0) * std::pow(uniform01(), 1.0 / shape);
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
      const double u = uniform01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double gamma(double shape, double scale) { return scale * gamma(shape); }

  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
  }

  // Failures before the first success.
  long geometric(double p) {
    if (p >= 1.0) return 0;
    return static_cast<long>(std::floor(std::log(uniform01()) / std::log1p(-p)));
  }

  // Failures before the r-th success, success probability p.
  long negative_binomial(int r, double p) {
    long total = 0;
    for (int i = 0; i < r; ++i) total += geometric(p);
    return total;
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Deterministic 64-bit seed derivation for sub-streams (chains, scenarios).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  const auto out = Philox::block(
      {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      {static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32),
       0x5EED5EEDu, 0x1F123BB5u});
  return out[0] | (static_cast<std::uint64_t>(out[1]) << 32);
}

// Stream id layout: high byte tags the purpose, low bits carry an index.
namespace stream {
inline constexpr std::uint64_t kModelFit = 1;
inline constexpr std::uint64_t kDrawSelection = 2;
inline constexpr std::uint64_t kReplicate = 3;
inline constexpr std::uint64_t kScenario = 4;
inline constexpr std::uint64_t kFigure = 5;

inline std::uint64_t id(std::uint64_t purpose, std::uint64_t index) {
  return (purpose << 56) | (index & 0x00FFFFFFFFFFFFFFull);
}
}  // namespace stream

}  // namespace ppos
