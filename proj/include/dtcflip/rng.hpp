#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace dtcflip {

/// Counter-based Gaussian noise stream.
///
/// Every draw is a pure function of (master_seed, trajectory_index, counter),
/// so trajectories can be scheduled in any order (or re-run in isolation)
/// without changing their noise. Streams with distinct trajectory_index are
/// statistically independent.
class NoiseStream {
 public:
  NoiseStream() = default;
  NoiseStream(std::uint64_t master_seed, std::uint64_t trajectory_index)
      : master_seed_(master_seed), trajectory_index_(trajectory_index) {
    key_ = mix64(master_seed_ + kGolden * (trajectory_index_ + 1));
  }

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t trajectory_index() const { return trajectory_index_; }

  void reset() {
    counter_ = 0;
    has_spare_ = false;
  }

  /// Uniform double in (0, 1].
  double uniform() {
    const std::uint64_t z = mix64(key_ + kGolden * (++counter_));
    return static_cast<double>((z >> 11) + 1) * 0x1.0p-53;
  }

  /// One standard normal sample (Box-Muller, cached pair).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  void normals(std::span<double> out) {
    for (double& x : out) x = normal();
  }

  std::vector<double> normals(std::size_t n) {
    std::vector<double> out(n);
    normals(std::span<double>(out));
    return out;
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

  // splitmix64 finalizer
  static std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t master_seed_ = 0;
  std::uint64_t trajectory_index_ = 0;
  std::uint64_t key_ = mix64(kGolden);
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Convenience free function matching the operation-style interface.
inline std::vector<double> gaussian_increments(NoiseStream& stream, std::size_t n) {
  return stream.normals(n);
}

}  // namespace dtcflip
