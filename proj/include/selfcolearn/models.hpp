#pragma once

#include "kspace.hpp"
#include "tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace scl {

enum class BackboneKind
{
  crnn_lite,
  ista_unrolled,
};

auto to_string(BackboneKind kind) -> std::string;
auto parse_backbone_kind(std::string_view name) -> BackboneKind;

struct BackboneHyper
{
  std::size_t iterations = 3;
  std::size_t filters = 16;
  std::size_t kernel = 3;
  /// Channels of the learned sparsifying transform (ISTA only).
  std::size_t sparse_channels = 8;
  double init_lambda = 0.01;
  double init_eta = 1.0;
};

struct BackboneModel
{
  BackboneKind kind = BackboneKind::crnn_lite;
  BackboneHyper hyper;
  ParamSet params;

  auto param(std::string const &name) const -> Tensor const & { return find_param(params, name); }
};

void validate_hyper(BackboneHyper const &hyper);

/// Weights uniform in [-a, a] with a = sqrt(1 / fan_in), biases zero.
auto init_backbone(BackboneKind kind, BackboneHyper const &hyper, std::uint64_t seed) -> BackboneModel;

// Both backbones start from x0 = zero_filled(y, P) and end every iteration
// with hard data consistency against (y, P). y must vanish outside P.
auto crnn_forward(BackboneModel const &model, Tensor const &y, SamplingMask const &P) -> Tensor;
auto ista_forward(BackboneModel const &model, Tensor const &y, SamplingMask const &P) -> Tensor;
auto forward(BackboneModel const &model, Tensor const &y, SamplingMask const &P) -> Tensor;

/// Clamps ISTA thresholds to lambda >= 0 and steps to eta >= min_eta, and
/// drops their imaginary parts. No-op for CRNN-lite.
void project_constraints(BackboneModel &model, double min_eta = 1e-4);

/// Throws if a parameter is missing, misshapen or non-finite, or an ISTA
/// constraint is violated.
void validate_model(BackboneModel const &model);

// Checkpoints are SCLW1 files whose first record, "@model", holds the kind
// and hyperparameters; the parameters follow under their own names.
void save_model(std::filesystem::path const &path, BackboneModel const &model);
auto load_model(std::filesystem::path const &path) -> BackboneModel;

} // namespace scl
