#include "selfcolearn/error.hpp"
#include "selfcolearn/ops.hpp"

#include <cmath>
#include <fmt/format.h>
#include <map>
#include <numbers>

namespace scl {

namespace detail {

auto is_power_of_two(std::size_t n) -> bool { return n > 0 && (n & (n - 1)) == 0; }

namespace {

struct Plan
{
  std::vector<std::size_t> reversed;
  std::vector<cx> twiddle; // exp(-2 pi i k / n); k < n / 2 for radix-2, k < n otherwise
};

auto plan_for(std::size_t n) -> Plan const &
{
  thread_local std::map<std::size_t, Plan> plans;
  auto it = plans.find(n);
  if (it != plans.end()) { return it->second; }
  Plan plan;
  if (!is_power_of_two(n)) {
    plan.twiddle.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      double const angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      plan.twiddle[k] = {std::cos(angle), std::sin(angle)};
    }
    return plans.emplace(n, std::move(plan)).first->second;
  }
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) { ++bits; }
  plan.reversed.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) {
      if (i & (std::size_t{1} << b)) { r |= std::size_t{1} << (bits - 1 - b); }
    }
    plan.reversed[i] = r;
  }
  plan.twiddle.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    double const angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    plan.twiddle[k] = {std::cos(angle), std::sin(angle)};
  }
  return plans.emplace(n, std::move(plan)).first->second;
}

} // namespace

void fft_line(cx *data, std::size_t n, std::size_t stride, bool inverse)
{
  if (n == 1) { return; }
  auto const &plan = plan_for(n);
  thread_local std::vector<cx> buf;
  buf.resize(n);
  double const norm = 1.0 / std::sqrt(static_cast<double>(n));
  if (plan.reversed.empty()) {
    // Direct DFT for lengths that are not powers of two.
    for (std::size_t k = 0; k < n; ++k) {
      cx acc{};
      for (std::size_t j = 0; j < n; ++j) {
        cx const w = plan.twiddle[(j * k) % n];
        acc += data[j * stride] * (inverse ? std::conj(w) : w);
      }
      buf[k] = acc;
    }
    for (std::size_t i = 0; i < n; ++i) { data[i * stride] = buf[i] * norm; }
    return;
  }
  for (std::size_t i = 0; i < n; ++i) { buf[plan.reversed[i]] = data[i * stride]; }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    std::size_t const half = len / 2;
    std::size_t const step = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        cx w = plan.twiddle[k * step];
        if (inverse) { w = std::conj(w); }
        cx const u = buf[start + k];
        cx const v = buf[start + k + half] * w;
        buf[start + k] = u + v;
        buf[start + k + half] = u - v;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) { data[i * stride] = buf[i] * norm; }
}

} // namespace detail

namespace {

void transform_axis(std::vector<cx> &values, Shape const &shape, std::size_t axis, bool inverse)
{
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < axis; ++i) { outer *= shape[i]; }
  for (std::size_t i = axis + 1; i < shape.size(); ++i) { inner *= shape[i]; }
  std::size_t const n = shape[axis];
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) { detail::fft_line(values.data() + o * n * inner + i, n, inner, inverse); }
  }
}

void check_axis(char const *op, Tensor const &a, std::size_t axis)
{
  if (axis >= a.rank()) {
    throw ShapeError(fmt::format("{}: axis {} out of range for shape {}", op, axis, shape_string(a.shape())));
  }
}

auto transform(char const *op, Tensor const &a, std::vector<std::size_t> axes, bool inverse) -> Tensor
{
  for (auto ax : axes) { check_axis(op, a, ax); }
  std::vector<cx> out(a.data().begin(), a.data().end());
  for (auto ax : axes) { transform_axis(out, a.shape(), ax, inverse); }
  // Unitary transform: the adjoint is the opposite-direction transform.
  return make_result(op, a.shape(), std::move(out), {a}, [axes, inverse](GradContext &ctx) {
    std::vector<cx> g(ctx.grad_out().begin(), ctx.grad_out().end());
    for (auto ax : axes) { transform_axis(g, ctx.input_shape(0), ax, !inverse); }
    auto ga = ctx.grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) { ga[i] += g[i]; }
  });
}

} // namespace

auto fft2(Tensor const &a, bool inverse) -> Tensor
{
  if (a.rank() < 2) { throw ShapeError(fmt::format("fft2: need at least 2 axes, got {}", shape_string(a.shape()))); }
  return transform(inverse ? "ifft2" : "fft2", a, {a.rank() - 1, a.rank() - 2}, inverse);
}

auto fft_axis(Tensor const &a, std::size_t axis, bool inverse) -> Tensor
{
  return transform(inverse ? "ifft_axis" : "fft_axis", a, {axis}, inverse);
}

} // namespace scl
