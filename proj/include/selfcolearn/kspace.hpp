#pragma once

#include "binio.hpp"
#include "ops.hpp"
#include "tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace scl {

// K-space arrays are stored in unshifted FFT order: the DC sample sits at
// row 0 / column 0 and negative frequencies wrap to the end of each axis.
// Undersampling is Cartesian along phase-encode rows; a sampled row covers
// every column of that frame.

/// Binary [T, H, W] sampling pattern.
struct SamplingMask
{
  BinaryMask mask;
  double acceleration = 1.0; // requested
  std::size_t center_lines = 0;

  auto frames() const -> std::size_t { return mask.shape.at(0); }
  auto height() const -> std::size_t { return mask.shape.at(1); }
  auto width() const -> std::size_t { return mask.shape.at(2); }
  auto at(std::size_t t, std::size_t y, std::size_t x) const -> bool;
  auto row_sampled(std::size_t t, std::size_t y) const -> bool;
  auto sampled_rows(std::size_t t) const -> std::vector<std::size_t>;
  /// Total entries / sampled entries.
  auto achieved_acceleration() const -> double;
};

struct MaskTriplet
{
  SamplingMask P;
  SamplingMask P_theta;
  SamplingMask P_lambda;
};

struct AcquisitionConfig
{
  std::size_t frames = 8;
  std::size_t height = 32;
  std::size_t width = 32;
  double acceleration = 8.0;
  std::size_t center_lines = 2;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  /// Fraction of the non-centre sampled rows (lowest frequencies first)
  /// additionally given to P_lambda.
  double lowfreq_share = 0.5;
};

/// Signed frequency index of a row in unshifted order.
auto row_frequency(std::size_t row, std::size_t height) -> std::ptrdiff_t;
/// Rows forming the fully sampled centre block of `count` lines.
auto center_rows(std::size_t count, std::size_t height) -> std::vector<std::size_t>;

/// Variable-density random row mask. The total row budget round(T H / R)
/// is spread over the frames (the remainder going to randomly chosen frames);
/// every frame holds the centre block plus rows drawn without replacement with
/// Gaussian weights of standard deviation H / 4 in frequency.
auto gen_mask(AcquisitionConfig const &cfg) -> SamplingMask;

/// Reundersampling split. P_theta keeps the centre block plus a random half
/// (rounded down) of each frame's non-centre rows; P_lambda gets the
/// remaining rows, the centre block, and the floor(lowfreq_share * n) lowest
/// frequency non-centre rows.
auto split_mask(SamplingMask const &P, std::uint64_t seed, double lowfreq_share) -> MaskTriplet;

/// Throws Error describing the first violated invariant.
void validate_mask(SamplingMask const &m);
void validate_triplet(MaskTriplet const &t);

/// y = P * (fft2(x) + e), e circular complex Gaussian with per-component std.
auto forward_model(Tensor const &x, SamplingMask const &P, double noise_std, std::uint64_t seed = 0) -> Tensor;
auto zero_filled(Tensor const &y, SamplingMask const &P) -> Tensor;
/// ifft2((1 - P) * fft2(x) + y): measured samples replace predicted ones.
auto data_consistency(Tensor const &x, Tensor const &y, SamplingMask const &P) -> Tensor;

// MASK1: "MASK1", u32 T, H, W, then T*H*W bytes (0/1), row-major.
void encode_mask(io::ByteWriter &w, BinaryMask const &m);
auto decode_mask(io::ByteReader &r) -> BinaryMask;
/// Infers the centre block size: the largest symmetric block sampled in
/// every frame of both masks.
auto infer_center_lines(BinaryMask const &a, BinaryMask const &b) -> std::size_t;
void save_mask(std::filesystem::path const &path, SamplingMask const &m);
auto load_mask(std::filesystem::path const &path) -> SamplingMask;

} // namespace scl
