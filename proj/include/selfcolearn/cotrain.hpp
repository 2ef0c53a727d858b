#pragma once

#include "adam.hpp"
#include "metrics.hpp"
#include "models.hpp"
#include "phantom.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scl {

enum class Strategy
{
  selfcolearn,
  b1_single_cross,
  b2_single_omega,
  supervised,
};

/// Domains of the (undersampled, contrastive) consistency terms.
enum class LossDomain
{
  kspace_kspace, // C-III
  xt_kspace,     // C-I
  xt_xt,         // C-II
};

auto to_string(Strategy s) -> std::string;
auto to_string(LossDomain d) -> std::string;
auto parse_strategy(std::string_view name) -> Strategy;
auto parse_loss_domain(std::string_view name) -> LossDomain;

struct TrainConfig
{
  Strategy strategy = Strategy::selfcolearn;
  LossDomain loss_domain = LossDomain::kspace_kspace;
  double gamma = 0.01;
  AdamConfig adam;
  std::size_t epochs = 60;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  /// A loss above this aborts training.
  double divergence_limit = 1e6;
  /// Record elapsed seconds in the history (otherwise 0, keeping CSVs stable).
  bool log_wall_time = false;
};

void validate_train_config(TrainConfig const &cfg);

struct EpochRecord
{
  std::size_t epoch = 0; // 1-based
  double l_uc = 0.0;
  double l_cc = 0.0;
  double l_co = 0.0;
  double val_psnr = 0.0; // 0 without a validation split
  double seconds = 0.0;
};

struct TrainHistory
{
  std::vector<EpochRecord> epochs;
};

auto history_csv(TrainHistory const &h) -> std::string;
void write_history_csv(std::filesystem::path const &path, TrainHistory const &h);

// Consistency losses over k-space predictions. All use the mean convention of
// mse_loss. y_omega must vanish outside P.
auto loss_uc(Tensor const &k_theta, Tensor const &k_lambda, Tensor const &y_omega, BinaryMask const &P) -> Tensor;
auto loss_cc(Tensor const &k_theta, Tensor const &k_lambda, BinaryMask const &P) -> Tensor;
auto co_loss(Tensor const &k_theta, Tensor const &k_lambda, Tensor const &y_omega, BinaryMask const &P,
             double gamma) -> Tensor;

struct CoLossTerms
{
  Tensor l_uc;
  Tensor l_cc;
  Tensor l_co;
};

/// Co-training loss with each term evaluated in k-space or, via the inverse
/// 2-D FFT of the masked k-space tensors, in the image (x-t) domain.
auto co_loss_terms(Tensor const &k_theta, Tensor const &k_lambda, Tensor const &y_omega, BinaryMask const &P,
                   double gamma, LossDomain domain) -> CoLossTerms;

/// Runs both networks on the reundersampled inputs of one sample, each with
/// its own mask for data consistency, and returns the co-training loss.
auto selfcolearn_loss(BackboneModel const &theta, BackboneModel const &lambda, CineSample const &s,
                      TrainConfig const &cfg) -> CoLossTerms;

/// Single-network loss of a baseline strategy.
auto baseline_loss(BackboneModel const &model, CineSample const &s, Strategy strategy) -> Tensor;

struct TrainResult
{
  BackboneModel model;                       // network-1 (or the single network)
  std::optional<BackboneModel> model_lambda; // network-2, selfcolearn only
  TrainHistory history;
};

/// Called after every epoch with the 1-based epoch index and current state.
using EpochCallback = std::function<void(std::size_t, TrainResult const &)>;

auto train_selfcolearn(Dataset const &train, Dataset const &val, TrainConfig const &cfg, BackboneKind kind,
                       BackboneHyper const &hyper, EpochCallback const &on_epoch = {}) -> TrainResult;
auto train_selfcolearn(Dataset const &train, Dataset const &val, TrainConfig const &cfg, BackboneModel theta,
                       BackboneModel lambda, EpochCallback const &on_epoch = {}) -> TrainResult;

auto train_baseline(Dataset const &train, Dataset const &val, TrainConfig const &cfg, BackboneKind kind,
                    BackboneHyper const &hyper, EpochCallback const &on_epoch = {}) -> TrainResult;
auto train_baseline(Dataset const &train, Dataset const &val, TrainConfig const &cfg, BackboneModel model,
                    EpochCallback const &on_epoch = {}) -> TrainResult;

/// Dispatches on cfg.strategy.
auto train(Dataset const &train, Dataset const &val, TrainConfig const &cfg, BackboneKind kind,
           BackboneHyper const &hyper, EpochCallback const &on_epoch = {}) -> TrainResult;

/// Test-time reconstruction: zero-filled y_omega through the network with P
/// for data consistency. No graph is recorded.
auto reconstruct(BackboneModel const &model, Tensor const &y_omega, SamplingMask const &P) -> Tensor;

/// Metrics of reconstruct() on every sample.
auto evaluate_model(BackboneModel const &model, Dataset const &data) -> std::vector<MetricsRecord>;
/// Metrics of the zero-filled reconstruction of every sample.
auto evaluate_zero_filled(Dataset const &data) -> std::vector<MetricsRecord>;

} // namespace scl
