#pragma once

#include "kspace.hpp"
#include "tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace scl {

struct PhantomConfig
{
  std::size_t frames = 8;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t n_sequences = 240;
  std::uint64_t seed = 0;
  /// Peak excursion of the inner myocardial radius, in pixels.
  double motion_amplitude = 2.5;
  /// Contraction cycles over the sequence.
  double motion_cycles = 1.0;
  std::size_t background_features = 4;
};

/// Sliding-window crop parameters. Sizes of zero mean "full source extent".
struct AugmentConfig
{
  std::size_t crop_frames = 0;
  std::size_t crop_height = 0;
  std::size_t crop_width = 0;
  std::size_t stride_x = 1;
  std::size_t stride_y = 1;
  std::size_t stride_t = 1;
};

struct SplitFractions
{
  double train = 10.0 / 12.0;
  double val = 1.0 / 12.0;
  double test = 1.0 / 12.0;
};

struct CineSample
{
  std::string id;
  Tensor reference; // [T, H, W], evaluation and supervised baseline only
  Tensor y_omega;   // measured k-space, zero outside masks.P
  MaskTriplet masks;
};

using Dataset = std::vector<CineSample>;

void validate_phantom_config(PhantomConfig const &cfg);

/// Inner myocardial radius (pixels) of frame t for a sequence whose resting
/// inner radius is `base`.
auto inner_radius(PhantomConfig const &cfg, double base, std::size_t t) -> double;

/// Reference sequences [T, H, W] with magnitudes normalised to [0, 1].
auto gen_phantom(PhantomConfig const &cfg) -> std::vector<Tensor>;
auto gen_phantom_sequence(PhantomConfig const &cfg, std::size_t index) -> Tensor;

struct Crop
{
  Tensor data;
  std::size_t t0, y0, x0;
};

/// All sliding-window crops of `seq`, each re-normalised to a peak magnitude
/// of one. Crop sizes of zero keep the source extent.
auto augment_translate(Tensor const &seq, AugmentConfig const &aug) -> std::vector<Crop>;

/// floor(n * fraction) sequences for validation and test; the rest train.
auto partition_sizes(std::size_t n, SplitFractions const &split) -> std::array<std::size_t, 3>;

struct DatasetSplit
{
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Simulates the measurements of one reference sequence.
auto simulate_sample(std::string id, Tensor reference, AcquisitionConfig const &acq, std::uint64_t stream)
  -> CineSample;

/// Generates, augments, simulates and partitions a dataset in memory.
/// Partitioning happens per source phantom so that crops of one phantom never
/// straddle partitions.
auto build_dataset(PhantomConfig const &cfg, AugmentConfig const &aug, AcquisitionConfig const &acq,
                   SplitFractions const &split) -> DatasetSplit;

/// Writes train.cine, val.cine and test.cine into `dir` (created if needed).
void write_dataset(std::filesystem::path const &dir, DatasetSplit const &data);

// CINE1: "CINE1", u32 S, T, H, W, then per sample a 16-byte zero-padded id,
// reference and y_omega as interleaved f64, then P, P_theta, P_lambda in
// MASK1 layout.
auto encode_dataset(Dataset const &samples) -> std::vector<std::uint8_t>;
auto decode_dataset(std::span<std::uint8_t const> bytes, std::string const &source) -> Dataset;
void save_dataset(std::filesystem::path const &path, Dataset const &samples);
auto load_dataset(std::filesystem::path const &path) -> Dataset;

/// Checks every CineSample invariant; throws Error naming the sample id.
void validate_sample(CineSample const &s);

} // namespace scl
