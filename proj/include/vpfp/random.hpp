#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (seed, domain, stream, block), so results do not depend on call order,
// thread count or scheduling.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "vpfp/vec3.hpp"

namespace vpfp {

/// Philox4x32-10 block cipher (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter apply(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      ctr = single_round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// SplitMix64 finalizer; used to derive independent seeds from a base seed.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(mix64(base) ^ a) ^ (b * 0xD6E8FEB86659FD93ull));
}

/// Draw domains keep different consumers of one seed apart.
enum class Domain : std::uint32_t {
  brownian = 1,
  initial_state = 2,
  reference_initial = 3,
  sampling = 4,
  projection = 5,
  oracle = 6,
};

namespace detail {

/// Top 53 bits mapped to (0, 1]; never returns 0 so log() is safe.
constexpr double to_unit_open_left(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * (1.0 / 9007199254740992.0);
}

constexpr std::uint64_t join(std::uint32_t lo, std::uint32_t hi) {
  return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

}  // namespace detail

/// Sequential view of one counter-based stream. Cheap to copy; two copies
/// constructed from the same (seed, domain, stream) produce identical draws.
class CounterStream {
 public:
  using result_type = std::uint64_t;

  CounterStream(std::uint64_t seed, std::uint64_t stream, Domain domain = Domain::sampling)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream),
        domain_(static_cast<std::uint32_t>(domain)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (have_ == 0) refill();
    --have_;
    return buffer_[static_cast<std::size_t>(have_)];
  }

  /// Uniform on (0, 1].
  double uniform() { return detail::to_unit_open_left((*this)()); }

  double normal() {
    if (spare_valid_) {
      spare_valid_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    spare_valid_ = true;
    return radius * std::cos(angle);
  }

  Vec3 normal3() {
    const double a = normal();
    const double b = normal();
    const double c = normal();
    return {a, b, c};
  }

  /// Uniformly distributed unit vector.
  Vec3 direction() {
    for (;;) {
      const Vec3 g = normal3();
      const double r = norm(g);
      if (r > 1e-300) return g / r;
    }
  }

  std::uint64_t stream() const { return stream_; }

 private:
  void refill() {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                  domain_ ^ static_cast<std::uint32_t>(stream_ >> 32),
                                  static_cast<std::uint32_t>(stream_)};
    const auto out = Philox4x32::apply(ctr, key_);
    ++block_;
    buffer_[1] = detail::join(out[0], out[1]);
    buffer_[0] = detail::join(out[2], out[3]);
    have_ = 2;
  }

  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint32_t domain_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int have_ = 0;
  double spare_ = 0.0;
  bool spare_valid_ = false;
};

/// Brownian increments keyed by (particle, step). The increment for a key is
/// the same no matter which thread asks for it or in which order.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : seed_(seed) {}

  /// Standard normal vector for (particle, step); scale by sqrt(dt) for dB.
  Vec3 standard_normal(std::uint64_t particle, std::uint64_t step) const {
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
    const auto tag = static_cast<std::uint32_t>(Domain::brownian);
    const auto a = Philox4x32::apply({static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                                      static_cast<std::uint32_t>(particle), tag ^ static_cast<std::uint32_t>(particle >> 32) << 8},
                                     key);
    const double u1 = detail::to_unit_open_left(detail::join(a[0], a[1]));
    const double u2 = detail::to_unit_open_left(detail::join(a[2], a[3]));
    const auto b = Philox4x32::apply({static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                                      static_cast<std::uint32_t>(particle),
                                      (tag ^ static_cast<std::uint32_t>(particle >> 32) << 8) | 0x80000000u},
                                     key);
    const double u3 = detail::to_unit_open_left(detail::join(b[0], b[1]));
    const double u4 = detail::to_unit_open_left(detail::join(b[2], b[3]));
    const double r1 = std::sqrt(-2.0 * std::log(u1));
    const double r2 = std::sqrt(-2.0 * std::log(u3));
    const double two_pi = 2.0 * std::numbers::pi;
    return {r1 * std::cos(two_pi * u2), r1 * std::sin(two_pi * u2), r2 * std::cos(two_pi * u4)};
  }

  /// Increment dB over a step of length dt.
  Vec3 increment(std::uint64_t particle, std::uint64_t step, double dt) const {
    return standard_normal(particle, step) * std::sqrt(dt);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace vpfp
