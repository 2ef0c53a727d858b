#include "selfcolearn/ops.hpp"

#include "selfcolearn/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

namespace scl {

namespace {

void require_same_shape(char const *op, Tensor const &a, Tensor const &b)
{
  if (a.shape() != b.shape()) {
    throw ShapeError(fmt::format("{}: shape mismatch {} vs {}", op, shape_string(a.shape()), shape_string(b.shape())));
  }
}

} // namespace

BinaryMask::BinaryMask(Shape s, std::uint8_t fill)
  : shape{std::move(s)}
  , bits(numel_of(shape), fill)
{
}

BinaryMask::BinaryMask(Shape s, std::vector<std::uint8_t> b)
  : shape{std::move(s)}
  , bits{std::move(b)}
{
  if (bits.size() != numel_of(shape)) {
    throw ShapeError(fmt::format("mask length {} does not match shape {}", bits.size(), shape_string(shape)));
  }
  for (auto v : bits) {
    if (v > 1) { throw ShapeError("mask entries must be 0 or 1"); }
  }
}

auto BinaryMask::count() const -> std::size_t
{
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

auto BinaryMask::complement() const -> BinaryMask
{
  BinaryMask out(shape);
  std::transform(bits.begin(), bits.end(), out.bits.begin(), [](std::uint8_t v) { return std::uint8_t(1 - v); });
  return out;
}

auto add(Tensor const &a, Tensor const &b) -> Tensor
{
  require_same_shape("add", a, b);
  auto const x = a.data();
  auto const y = b.data();
  std::vector<cx> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) { out[i] = x[i] + y[i]; }
  return make_result("add", a.shape(), std::move(out), {a, b}, [](GradContext &ctx) {
    auto const g = ctx.grad_out();
    for (std::size_t p = 0; p < 2; ++p) {
      if (!ctx.needs(p)) { continue; }
      auto gp = ctx.grad(p);
      for (std::size_t i = 0; i < g.size(); ++i) { gp[i] += g[i]; }
    }
  });
}

auto sub(Tensor const &a, Tensor const &b) -> Tensor
{
  require_same_shape("sub", a, b);
  auto const x = a.data();
  auto const y = b.data();
  std::vector<cx> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) { out[i] = x[i] - y[i]; }
  return make_result("sub", a.shape(), std::move(out), {a, b}, [](GradContext &ctx) {
    auto const g = ctx.grad_out();
    if (ctx.needs(0)) {
      auto ga = ctx.grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) { ga[i] += g[i]; }
    }
    if (ctx.needs(1)) {
      auto gb = ctx.grad(1);
      for (std::size_t i = 0; i < g.size(); ++i) { gb[i] -= g[i]; }
    }
  });
}

auto scale(Tensor const &a, double factor) -> Tensor
{
  auto const x = a.data();
  std::vector<cx> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) { out[i] = x[i] * factor; }
  return make_result("scale", a.shape(), std::move(out), {a}, [factor](GradContext &ctx) {
    auto const g = ctx.grad_out();
    auto ga = ctx.grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) { ga[i] += g[i] * factor; }
  });
}

auto scale_by(Tensor const &a, Tensor const &s) -> Tensor
{
  if (s.numel() != 1) { throw ShapeError("scale_by: factor must have exactly one entry"); }
  double const f = s.data()[0].real();
  auto const x = a.data();
  std::vector<cx> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) { out[i] = x[i] * f; }
  return make_result("scale_by", a.shape(), std::move(out), {a, s}, [f](GradContext &ctx) {
    auto const g = ctx.grad_out();
    if (ctx.needs(0)) {
      auto ga = ctx.grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) { ga[i] += g[i] * f; }
    }
    if (ctx.needs(1)) {
      auto const x = ctx.input(0);
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) { acc += x[i].real() * g[i].real() + x[i].imag() * g[i].imag(); }
      ctx.grad(1)[0] += cx{acc, 0.0};
    }
  });
}

auto reshape(Tensor const &a, Shape shape) -> Tensor
{
  if (numel_of(shape) != a.numel()) {
    throw ShapeError(fmt::format("reshape: cannot view {} as {}", shape_string(a.shape()), shape_string(shape)));
  }
  auto const x = a.data();
  return make_result("reshape", std::move(shape), std::vector<cx>(x.begin(), x.end()), {a}, [](GradContext &ctx) {
    auto const g = ctx.grad_out();
    auto ga = ctx.grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) { ga[i] += g[i]; }
  });
}

auto select(Tensor const &a, std::size_t index) -> Tensor
{
  if (a.rank() < 1 || index >= a.dim(0)) {
    throw ShapeError(fmt::format("select: index {} out of range for shape {}", index, shape_string(a.shape())));
  }
  Shape shape(a.shape().begin() + 1, a.shape().end());
  auto const block = numel_of(shape);
  auto const x = a.data().subspan(index * block, block);
  return make_result("select", std::move(shape), std::vector<cx>(x.begin(), x.end()), {a},
                     [index, block](GradContext &ctx) {
                       auto const g = ctx.grad_out();
                       auto ga = ctx.grad(0).subspan(index * block, block);
                       for (std::size_t i = 0; i < block; ++i) { ga[i] += g[i]; }
                     });
}

auto stack(std::vector<Tensor> const &parts) -> Tensor
{
  if (parts.empty()) { throw ShapeError("stack: no tensors"); }
  auto const &inner = parts.front().shape();
  auto const block = numel_of(inner);
  std::vector<cx> out;
  out.reserve(block * parts.size());
  for (auto const &p : parts) {
    if (p.shape() != inner) { throw ShapeError("stack: tensors must share a shape"); }
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  return make_result("stack", std::move(shape), std::move(out), parts, [block, n = parts.size()](GradContext &ctx) {
    auto const g = ctx.grad_out();
    for (std::size_t p = 0; p < n; ++p) {
      if (!ctx.needs(p)) { continue; }
      auto gp = ctx.grad(p);
      for (std::size_t i = 0; i < block; ++i) { gp[i] += g[p * block + i]; }
    }
  });
}

auto relu(Tensor const &a) -> Tensor
{
  auto const x = a.data();
  std::vector<cx> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = {std::max(x[i].real(), 0.0), std::max(x[i].imag(), 0.0)};
  }
  return make_result("relu", a.shape(), std::move(out), {a}, [](GradContext &ctx) {
    auto const g = ctx.grad_out();
    auto const x = ctx.input(0);
    auto ga = ctx.grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += cx{x[i].real() > 0.0 ? g[i].real() : 0.0, x[i].imag() > 0.0 ? g[i].imag() : 0.0};
    }
  });
}

auto mask_mul(Tensor const &a, BinaryMask const &mask) -> Tensor
{
  if (a.shape() != mask.shape) {
    throw ShapeError(
      fmt::format("mask_mul: tensor {} vs mask {}", shape_string(a.shape()), shape_string(mask.shape)));
  }
  auto const x = a.data();
  std::vector<cx> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) { out[i] = mask.bits[i] ? x[i] : cx{}; }
  return make_result("mask_mul", a.shape(), std::move(out), {a}, [bits = mask.bits](GradContext &ctx) {
    auto const g = ctx.grad_out();
    auto ga = ctx.grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (bits[i]) { ga[i] += g[i]; }
    }
  });
}

auto soft_threshold(Tensor const &a, Tensor const &threshold) -> Tensor
{
  if (threshold.numel() != 1) { throw ShapeError("soft_threshold: threshold must have exactly one entry"); }
  double const lambda = threshold.data()[0].real();
  auto const x = a.data();
  std::vector<cx> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double const r = std::abs(x[i]);
    out[i] = r > lambda ? x[i] * (1.0 - lambda / r) : cx{};
  }
  return make_result("soft_threshold", a.shape(), std::move(out), {a, threshold}, [lambda](GradContext &ctx) {
    auto const g = ctx.grad_out();
    auto const x = ctx.input(0);
    bool const need_x = ctx.needs(0);
    std::span<cx> gx = need_x ? ctx.grad(0) : std::span<cx>{};
    double glambda = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double const r = std::abs(x[i]);
      if (!(r > lambda)) { continue; }
      // d/dz of z(1 - lambda/r): (1 - lambda/r) g + lambda z Re(conj(z) g) / r^3
      double const proj = x[i].real() * g[i].real() + x[i].imag() * g[i].imag();
      if (need_x) { gx[i] += (1.0 - lambda / r) * g[i] + x[i] * (lambda * proj / (r * r * r)); }
      glambda -= proj / r;
    }
    if (ctx.needs(1)) { ctx.grad(1)[0] += cx{glambda, 0.0}; }
  });
}

auto mse_loss(Tensor const &a, Tensor const &b) -> Tensor
{
  require_same_shape("mse_loss", a, b);
  auto const x = a.data();
  auto const y = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) { acc += std::norm(x[i] - y[i]); }
  double const n = static_cast<double>(x.size());
  return make_result("mse_loss", Shape{}, {cx{acc / n, 0.0}}, {a, b}, [n](GradContext &ctx) {
    double const g = ctx.grad_out()[0].real();
    auto const x = ctx.input(0);
    auto const y = ctx.input(1);
    double const f = 2.0 * g / n;
    if (ctx.needs(0)) {
      auto ga = ctx.grad(0);
      for (std::size_t i = 0; i < x.size(); ++i) { ga[i] += f * (x[i] - y[i]); }
    }
    if (ctx.needs(1)) {
      auto gb = ctx.grad(1);
      for (std::size_t i = 0; i < x.size(); ++i) { gb[i] -= f * (x[i] - y[i]); }
    }
  });
}

} // namespace scl
