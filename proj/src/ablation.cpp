#include "selfcolearn/ablation.hpp"

#include "selfcolearn/error.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fmt/format.h>
#include <mutex>
#include <thread>

namespace scl {

namespace {

struct RunSpec
{
  std::string name;
  Strategy strategy;
  LossDomain domain;
};

auto all_runs() -> std::vector<RunSpec>
{
  return {
    {"B-I", Strategy::b1_single_cross, LossDomain::kspace_kspace},
    {"B-II", Strategy::b2_single_omega, LossDomain::kspace_kspace},
    {"supervised", Strategy::supervised, LossDomain::kspace_kspace},
    {"C-I", Strategy::selfcolearn, LossDomain::xt_kspace},
    {"C-II", Strategy::selfcolearn, LossDomain::xt_xt},
    {"C-III", Strategy::selfcolearn, LossDomain::kspace_kspace},
  };
}

auto training_label(Strategy s) -> std::string
{
  switch (s) {
  case Strategy::selfcolearn: return "dual";
  case Strategy::supervised: return "supervised";
  default: return "single";
  }
}

} // namespace

auto AblationReport::row(std::string const &name) const -> AblationRow const &
{
  for (auto const &r : rows) {
    if (r.name == name) { return r; }
  }
  throw Error(fmt::format("ablation report has no row '{}'", name));
}

auto ablation_runs() -> std::vector<std::string>
{
  std::vector<std::string> out;
  for (auto const &r : all_runs()) { out.push_back(r.name); }
  return out;
}

auto run_ablation(DatasetSplit const &data, TrainConfig const &base, BackboneKind kind, BackboneHyper const &hyper,
                  std::size_t threads, std::vector<std::string> const &only) -> AblationReport
{
  if (data.test.empty()) { throw Error("ablation needs a non-empty test split"); }
  std::vector<RunSpec> runs;
  for (auto const &r : all_runs()) {
    if (only.empty() || std::find(only.begin(), only.end(), r.name) != only.end()) { runs.push_back(r); }
  }
  for (auto const &name : only) {
    auto const names = ablation_runs();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      throw ConfigError(fmt::format("unknown ablation run '{}'", name));
    }
  }

  std::vector<std::vector<MetricsRecord>> results(runs.size());
  std::vector<std::exception_ptr> errors(runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      try {
        auto cfg = base;
        cfg.strategy = runs[i].strategy;
        cfg.loss_domain = runs[i].domain;
        auto const trained = train(data.train, data.val, cfg, kind, hyper);
        results[i] = evaluate_model(trained.model, data.test);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t const n_workers = std::clamp<std::size_t>(threads, 1, runs.size());
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) { pool.emplace_back(worker); }
    for (auto &t : pool) { t.join(); }
  }
  for (auto const &e : errors) {
    if (e) { std::rethrow_exception(e); }
  }

  AblationReport report;
  report.backbone = kind;
  report.zero_filled = evaluate_zero_filled(data.test);
  report.zero_filled_summary = summarize(report.zero_filled);
  auto add_row = [&](std::string const &row_name, std::string const &run_name) {
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (runs[i].name != run_name) { continue; }
      report.rows.push_back({row_name, runs[i].strategy, runs[i].domain, results[i], summarize(results[i])});
    }
  };
  add_row("B-I", "B-I");
  add_row("B-II", "B-II");
  add_row("SelfCoLearn", "C-III");
  add_row("supervised", "supervised");
  add_row("C-I", "C-I");
  add_row("C-II", "C-II");
  add_row("C-III", "C-III");
  return report;
}

auto ablation_csv(AblationReport const &report) -> std::string
{
  std::string text = "strategy,training,loss_domain,backbone,psnr_mean,psnr_std,ssim_mean,ssim_std,mse_mean,mse_std,n,"
                     "zero_filled_psnr_mean\n";
  for (auto const &r : report.rows) {
    auto const &s = r.summary;
    text += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", r.name, training_label(r.strategy),
                        r.strategy == Strategy::selfcolearn ? to_string(r.loss_domain) : "kspace",
                        to_string(report.backbone), format_number(s.psnr_db.mean), format_number(s.psnr_db.std),
                        format_number(s.ssim.mean), format_number(s.ssim.std), format_number(s.mse.mean),
                        format_number(s.mse.std), s.psnr_db.n, format_number(report.zero_filled_summary.psnr_db.mean));
  }
  return text;
}

auto ablation_metrics_csv(AblationReport const &report) -> std::string
{
  std::string text = "strategy,sequence_id,mse,psnr_db,ssim\n";
  auto emit = [&](std::string const &name, std::vector<MetricsRecord> const &records) {
    for (auto const &m : records) {
      text += fmt::format("{},{},{},{},{}\n", name, m.sequence_id, format_number(m.mse), format_number(m.psnr_db),
                          format_number(m.ssim));
    }
  };
  emit("zero-filled", report.zero_filled);
  for (auto const &r : report.rows) { emit(r.name, r.records); }
  return text;
}

} // namespace scl
