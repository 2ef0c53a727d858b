#include "selfcolearn/commands.hpp"
#include "selfcolearn/config.hpp"
#include "selfcolearn/error.hpp"
#include "selfcolearn/metrics.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <iostream>
#include <optional>

namespace {

struct CommonOptions
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::uint64_t> threads;
  std::optional<double> accel;
  std::string strategy;
  std::string loss_domain;
  std::string backbone;
  std::string data;
  std::vector<std::string> sets;
};

void add_common(CLI::App *cmd, CommonOptions &o)
{
  cmd->add_option("--config", o.config, "key=value configuration file");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--threads", o.threads, "worker cap")->check(CLI::PositiveNumber);
  cmd->add_option("--accel", o.accel, "acceleration factor (> 1)");
  cmd->add_option("--strategy", o.strategy, "selfcolearn, b1_single_cross, b2_single_omega or supervised");
  cmd->add_option("--loss-domain", o.loss_domain, "kspace_kspace, xt_kspace or xt_xt");
  cmd->add_option("--backbone", o.backbone, "crnn_lite or ista_unrolled");
  cmd->add_option("--data", o.data, "dataset directory written by gen-data");
  cmd->add_option("--set", o.sets, "override key=value (repeatable)");
}

auto resolve(CommonOptions const &o) -> scl::RunConfig
{
  auto cfg = o.config.empty() ? scl::RunConfig{} : scl::RunConfig::load(o.config);
  if (o.seed) { cfg.set("seed", std::to_string(*o.seed)); }
  if (o.threads) { cfg.set("threads", std::to_string(*o.threads)); }
  if (o.accel) {
    if (!(*o.accel > 1.0)) { throw scl::ConfigError(fmt::format("--accel must exceed 1, got {}", *o.accel)); }
    cfg.set("acq.acceleration", scl::format_number(*o.accel));
  }
  if (!o.strategy.empty()) { cfg.set("train.strategy", o.strategy); }
  if (!o.loss_domain.empty()) { cfg.set("train.loss_domain", o.loss_domain); }
  if (!o.backbone.empty()) { cfg.set("model.backbone", o.backbone); }
  if (!o.data.empty()) { cfg.set("paths.data", o.data); }
  for (auto const &s : o.sets) { cfg.set_assignment(s); }
  return cfg;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Self-supervised collaborative dynamic MRI reconstruction"};
  app.require_subcommand(1);
  CommonOptions opts;
  std::string checkpoint;
  std::string split;
  std::size_t seeds = 5;

  auto *gen_data = app.add_subcommand("gen-data", "generate and partition the synthetic cine dataset");
  auto *gen_masks = app.add_subcommand("gen-masks", "generate one sampling mask triplet");
  auto *train = app.add_subcommand("train", "train a model (dual networks for selfcolearn)");
  auto *eval = app.add_subcommand("eval", "evaluate a checkpoint: metrics, summary and images");
  auto *recon = app.add_subcommand("reconstruct", "reconstruct a split with a checkpoint");
  auto *ablate = app.add_subcommand("ablate", "run the training-strategy and loss-domain ablation");
  auto *gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  for (auto *cmd : {gen_data, gen_masks, train, eval, recon, ablate}) { add_common(cmd, opts); }
  for (auto *cmd : {eval, recon}) {
    cmd->add_option("--checkpoint", checkpoint, "model checkpoint (.sclw)")->required();
    cmd->add_option("--split", split, "train, val or test");
  }
  gradcheck->add_option("--seeds", seeds, "random instances per case")->check(CLI::PositiveNumber);
  gradcheck->add_option("--out", opts.out, "report directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gradcheck->parsed()) { return scl::cmd_gradcheck(seeds, opts.out, std::cout) ? 0 : 1; }
    auto cfg = resolve(opts);
    if (!split.empty()) { cfg.set("eval.split", split); }
    if (gen_data->parsed()) { scl::cmd_gen_data(cfg, opts.out, std::cout); }
    if (gen_masks->parsed()) { scl::cmd_gen_masks(cfg, opts.out, std::cout); }
    if (train->parsed()) { scl::cmd_train(cfg, opts.out, std::cout); }
    if (eval->parsed()) { scl::cmd_eval(cfg, checkpoint, opts.out, std::cout); }
    if (recon->parsed()) { scl::cmd_reconstruct(cfg, checkpoint, opts.out, std::cout); }
    if (ablate->parsed()) { scl::cmd_ablate(cfg, opts.out, std::cout); }
  } catch (std::exception const &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
