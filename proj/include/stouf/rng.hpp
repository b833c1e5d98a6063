#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace stouf {

// splitmix64 finalizer, used to derive independent substream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed derivation rule: every random stream in the project is obtained from
// the master seed plus a (stage, index, sub-index) triple through mix64.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stage,
                                 std::uint64_t index = 0, std::uint64_t sub = 0) {
  std::uint64_t s = mix64(master ^ mix64(stage));
  s = mix64(s ^ mix64(index + 0x632be59bd9b4e019ULL));
  return mix64(s ^ mix64(sub + 0x9e3779b97f4a7c15ULL));
}

// Stage tags for seed derivation.
namespace stage {
inline constexpr std::uint64_t sim = 0x51;
inline constexpr std::uint64_t train_path = 0x7241;
inline constexpr std::uint64_t train_log = 0x7242;
inline constexpr std::uint64_t mc_lip = 0x7243;
inline constexpr std::uint64_t bound = 0x7244;
inline constexpr std::uint64_t train_run = 0x7245;
inline constexpr std::uint64_t forecast = 0xF0;
inline constexpr std::uint64_t val_forecast = 0xF1;
inline constexpr std::uint64_t test_forecast = 0xF2;
inline constexpr std::uint64_t pit = 0x9174;
}  // namespace stage

// Deterministic random stream. Gaussian draws use Box-Muller on explicit
// 53-bit uniforms so results do not depend on the standard library's
// (implementation-defined) distribution code.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

  // Uniform in (0,1), never exactly 0 or 1.
  double uniform() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1p-53; }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace stouf
