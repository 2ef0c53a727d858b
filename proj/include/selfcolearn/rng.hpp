#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace scl {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr auto mix_seed(std::uint64_t seed, std::uint64_t stream) -> std::uint64_t
{
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// mt19937_64 is fully specified by the standard; the distributions below are
// written out so results do not depend on the standard library vendor.
class Rng
{
public:
  explicit Rng(std::uint64_t seed)
    : engine_{seed}
  {
  }

  auto bits() -> std::uint64_t { return engine_(); }

  /// Uniform in [0, 1).
  auto uniform() -> double { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  auto uniform(double lo, double hi) -> double { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  auto below(std::uint64_t n) -> std::uint64_t
  {
    std::uint64_t const limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) { x = engine_(); }
    return x % n;
  }

  /// Standard normal via Box-Muller.
  auto normal() -> double
  {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) { u1 = uniform(); }
    double const u2 = uniform();
    double const r = std::sqrt(-2.0 * std::log(u1));
    double const a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  template <typename T>
  void shuffle(std::vector<T> &v)
  {
    for (std::size_t i = v.size(); i > 1; --i) {
      auto const j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace scl
