#pragma once

#include "selfcolearn/ops.hpp"
#include "selfcolearn/rng.hpp"
#include "selfcolearn/tensor.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

namespace testing {

using scl::cx;
using scl::Shape;
using scl::Tensor;

inline auto random_values(std::size_t n, std::uint64_t seed) -> std::vector<cx>
{
  scl::Rng rng(seed);
  std::vector<cx> v(n);
  for (auto &e : v) {
    double const re = rng.normal();
    double const im = rng.normal();
    e = {re, im};
  }
  return v;
}

inline auto random_tensor(Shape shape, std::uint64_t seed) -> Tensor
{
  auto const n = scl::numel_of(shape);
  return Tensor(std::move(shape), random_values(n, seed));
}

inline auto random_param(Shape shape, std::uint64_t seed) -> Tensor
{
  auto const n = scl::numel_of(shape);
  return Tensor::parameter(std::move(shape), random_values(n, seed));
}

inline auto max_abs_diff(std::span<cx const> a, std::span<cx const> b) -> double
{
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) { m = std::max(m, std::abs(a[i] - b[i])); }
  return a.size() == b.size() ? m : INFINITY;
}

inline auto sum_sq(std::span<cx const> a) -> double
{
  double s = 0.0;
  for (auto const &v : a) { s += std::norm(v); }
  return s;
}

// Direct O(n^2) unitary DFT along the last two axes of a [.., H, W] array.
inline auto naive_dft2(std::vector<cx> const &x, std::size_t H, std::size_t W, bool inverse = false)
  -> std::vector<cx>
{
  std::vector<cx> out(x.size());
  double const sign = inverse ? 1.0 : -1.0;
  double const norm = 1.0 / std::sqrt(static_cast<double>(H * W));
  for (std::size_t b = 0; b < x.size() / (H * W); ++b) {
    for (std::size_t u = 0; u < H; ++u) {
      for (std::size_t v = 0; v < W; ++v) {
        cx acc{};
        for (std::size_t y = 0; y < H; ++y) {
          for (std::size_t z = 0; z < W; ++z) {
            double const ang = sign * 2.0 * std::numbers::pi
                             * (static_cast<double>(u * y) / H + static_cast<double>(v * z) / W);
            acc += x[b * H * W + y * W + z] * std::polar(1.0, ang);
          }
        }
        out[b * H * W + u * W + v] = acc * norm;
      }
    }
  }
  return out;
}

// Central finite differences of a real scalar function of one leaf, over the
// real and imaginary component of every entry.
inline auto numeric_grad(std::function<double()> const &f, Tensor &x, double h = 1e-5) -> std::vector<cx>
{
  std::vector<cx> g(x.numel());
  auto d = x.mutable_data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto const orig = d[i];
    d[i] = orig + cx{h, 0};
    double const rp = f();
    d[i] = orig - cx{h, 0};
    double const rm = f();
    d[i] = orig + cx{0, h};
    double const ip = f();
    d[i] = orig - cx{0, h};
    double const im = f();
    d[i] = orig;
    g[i] = {(rp - rm) / (2 * h), (ip - im) / (2 * h)};
  }
  return g;
}

inline auto rel_error(std::span<cx const> a, std::span<cx const> b) -> double
{
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += std::norm(a[i] - b[i]);
    na += std::norm(a[i]);
    nb += std::norm(b[i]);
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

} // namespace testing
