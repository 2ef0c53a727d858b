#pragma once

#include "cotrain.hpp"

#include <string>
#include <vector>

namespace scl {

struct AblationRow
{
  std::string name;     // B-I, B-II, SelfCoLearn, supervised, C-I, C-II, C-III
  Strategy strategy;
  LossDomain loss_domain;
  std::vector<MetricsRecord> records; // per test sequence
  MetricsSummary summary;
};

struct AblationReport
{
  BackboneKind backbone = BackboneKind::crnn_lite;
  std::vector<MetricsRecord> zero_filled;
  MetricsSummary zero_filled_summary;
  std::vector<AblationRow> rows;

  auto row(std::string const &name) const -> AblationRow const &;
};

/// Training runs of the ablation, by name.
auto ablation_runs() -> std::vector<std::string>; // B-I, B-II, supervised, C-I, C-II, C-III

/// Trains the selected runs (all when `only` is empty) with the same data,
/// seeds and hyperparameters, and evaluates network-1 on the test split.
/// Runs are distributed over `threads` workers; results do not depend on the
/// thread count. The SelfCoLearn row reuses the C-III run.
auto run_ablation(DatasetSplit const &data, TrainConfig const &base, BackboneKind kind, BackboneHyper const &hyper,
                  std::size_t threads, std::vector<std::string> const &only = {}) -> AblationReport;

// ablation.csv: one summary row per strategy.
// ablation_metrics.csv: strategy,sequence_id,mse,psnr_db,ssim.
auto ablation_csv(AblationReport const &report) -> std::string;
auto ablation_metrics_csv(AblationReport const &report) -> std::string;

} // namespace scl
