#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace k2gof {

/// Counter-based random stream (Philox 2x64-10).
///
/// Each (seed, stream_id) pair addresses a disjoint counter range, so
/// replicate streams never overlap and a stream can be reconstructed from
/// its two keys alone. Identical (seed, stream_id) always replays the same
/// sequence regardless of what other streams were consumed.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : key_(seed), stream_(stream_id) {}

  std::uint64_t seed() const { return key_; }
  std::uint64_t stream_id() const { return stream_; }

  std::uint64_t next_u64() {
    if (have_ == 0) {
      std::uint64_t c0 = counter_++;
      std::uint64_t c1 = stream_;
      std::uint64_t k = key_;
      for (int round = 0; round < 10; ++round) {
        const unsigned __int128 prod =
            static_cast<unsigned __int128>(kMultiplier) * c0;
        const std::uint64_t hi = static_cast<std::uint64_t>(prod >> 64);
        const std::uint64_t lo = static_cast<std::uint64_t>(prod);
        c0 = hi ^ k ^ c1;
        c1 = lo;
        k += kWeyl;
      }
      buf_[0] = c0;
      buf_[1] = c1;
      have_ = 2;
    }
    return buf_[--have_];
  }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1); never returns an exact endpoint.
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller; the paired deviate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang squeeze; shape > 0.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be > 0");
    if (shape < 1.0) {
      const double u = uniform_open();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double z, v;
      do {
        z = normal();
        v = 1.0 + c * z;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open();
      if (u < 1.0 - 0.0331 * z * z * z * z) return d * v;
      if (std::log(u) < 0.5 * z * z + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

 private:
  static constexpr std::uint64_t kMultiplier = 0xD2B74407B1CE6E93ull;
  static constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ull;

  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::uint64_t buf_[2] = {0, 0};
  int have_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream-id namespaces used by the harness so that replicate streams,
// calibration draws and observed-data generation never collide.
namespace stream_ns {
constexpr std::uint64_t kReplicate = 0;                  // + replicate index
constexpr std::uint64_t kCalibration = 1ull << 40;       // harness draws
constexpr std::uint64_t kPowerReplicate = 1ull << 41;    // + replicate index
constexpr std::uint64_t kObserved = 1ull << 42;          // observed datasets
}  // namespace stream_ns

}  // namespace k2gof
