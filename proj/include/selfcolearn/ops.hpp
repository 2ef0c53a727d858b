#pragma once

#include "tensor.hpp"

#include <cstdint>
#include <vector>

namespace scl {

/// Binary indicator array (entries 0 or 1), row-major.
struct BinaryMask
{
  Shape shape;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(Shape s, std::uint8_t fill = 0);
  BinaryMask(Shape s, std::vector<std::uint8_t> b);

  auto numel() const -> std::size_t { return bits.size(); }
  auto count() const -> std::size_t;
  auto complement() const -> BinaryMask;
  auto operator==(BinaryMask const &) const -> bool = default;
};

auto add(Tensor const &a, Tensor const &b) -> Tensor;
auto sub(Tensor const &a, Tensor const &b) -> Tensor;
auto scale(Tensor const &a, double factor) -> Tensor;
/// a * Re(s) for a single-entry tensor s; the gradient w.r.t. s is real.
auto scale_by(Tensor const &a, Tensor const &s) -> Tensor;

auto reshape(Tensor const &a, Shape shape) -> Tensor;
/// Index along axis 0, dropping that axis.
auto select(Tensor const &a, std::size_t index) -> Tensor;
/// Stacks equally shaped tensors along a new leading axis.
auto stack(std::vector<Tensor> const &parts) -> Tensor;

/// ReLU applied independently to the real and imaginary planes.
auto relu(Tensor const &a) -> Tensor;

auto mask_mul(Tensor const &a, BinaryMask const &mask) -> Tensor;

/// Magnitude shrinkage z * max(0, 1 - lambda / |z|) with lambda = Re(threshold).
/// The phase of every surviving entry is preserved.
auto soft_threshold(Tensor const &a, Tensor const &threshold) -> Tensor;

/// Complex 2-D convolution (cross-correlation) with zero padding (k - 1) / 2
/// and stride 1. Input [C_in, H, W] or [B, C_in, H, W]; kernel
/// [C_out, C_in, k, k]; optional bias [C_out]. Each complex product is
/// carried out in real arithmetic over the real and imaginary planes.
auto conv2d(Tensor const &input, Tensor const &kernel, Tensor const &bias = {}) -> Tensor;

/// Unitary DFT over the trailing two axes. inverse = true applies the adjoint.
auto fft2(Tensor const &a, bool inverse = false) -> Tensor;
/// Unitary DFT along one axis.
auto fft_axis(Tensor const &a, std::size_t axis, bool inverse = false) -> Tensor;

/// Mean of |a_i - b_i|^2 over all entries, as a real scalar.
auto mse_loss(Tensor const &a, Tensor const &b) -> Tensor;

namespace detail {
// In-place unitary DFT of a strided line: radix-2 for powers of two, direct
// summation otherwise.
void fft_line(cx *data, std::size_t n, std::size_t stride, bool inverse);
auto is_power_of_two(std::size_t n) -> bool;
} // namespace detail

} // namespace scl
