#include "selfcolearn/cotrain.hpp"

#include "selfcolearn/error.hpp"
#include "selfcolearn/ops.hpp"
#include "selfcolearn/rng.hpp"

#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

namespace scl {

namespace {

constexpr std::uint64_t kOrderStream = 0x6f72646572;
constexpr std::uint64_t kThetaInitStream = 1;
constexpr std::uint64_t kLambdaInitStream = 2;

void check_same(char const *op, Tensor const &a, Tensor const &b, BinaryMask const &P)
{
  if (a.shape() != b.shape() || a.shape() != P.shape) {
    throw ShapeError(fmt::format("{}: shapes {}, {} and mask {} differ", op, shape_string(a.shape()),
                                 shape_string(b.shape()), shape_string(P.shape)));
  }
}

using LossFn = std::function<CoLossTerms(CineSample const &)>;

auto finite_loss_value(Tensor const &t) -> double { return t.item().real(); }

auto mean_val_psnr(BackboneModel const &model, Dataset const &val) -> double
{
  if (val.empty()) { return 0.0; }
  double total = 0.0;
  for (auto const &r : evaluate_model(model, val)) { total += r.psnr_db; }
  return total / static_cast<double>(val.size());
}

// Shared epoch loop: shuffled sample order per epoch, gradient accumulation
// over batch_size samples, one Adam step per network per batch.
void run_training(Dataset const &train, Dataset const &val, TrainConfig const &cfg, TrainResult &result,
                  LossFn const &loss_fn, EpochCallback const &on_epoch)
{
  validate_train_config(cfg);
  if (train.empty()) { throw TrainingError("training set is empty"); }
  std::vector<BackboneModel *> nets{&result.model};
  if (result.model_lambda) { nets.push_back(&*result.model_lambda); }
  for (auto *n : nets) { validate_model(*n); }
  std::vector<AdamState> states(nets.size(), AdamState(cfg.adam));

  auto const start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(mix_seed(cfg.seed, kOrderStream), epoch));
    rng.shuffle(order);

    EpochRecord rec;
    rec.epoch = epoch;
    double const inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      for (auto *n : nets) { zero_grads(n->params); }
      for (std::size_t i = b; i < std::min(b + cfg.batch_size, order.size()); ++i) {
        auto const &sample = train[order[i]];
        auto const context = [&] { return fmt::format("epoch {}, sample '{}'", epoch, sample.id); };
        CoLossTerms terms;
        try {
          terms = loss_fn(sample);
        } catch (NumericError const &e) {
          throw TrainingError(fmt::format("non-finite value at {}: {}", context(), e.what()));
        }
        double const co = finite_loss_value(terms.l_co);
        if (co > cfg.divergence_limit) {
          throw TrainingError(fmt::format("training diverged at {}: loss {} exceeds {}", context(), co,
                                          cfg.divergence_limit));
        }
        rec.l_uc += finite_loss_value(terms.l_uc);
        rec.l_cc += finite_loss_value(terms.l_cc);
        rec.l_co += co;
        try {
          backward(scale(terms.l_co, inv_batch));
        } catch (NumericError const &e) {
          throw TrainingError(fmt::format("non-finite gradient at {}: {}", context(), e.what()));
        }
      }
      for (std::size_t k = 0; k < nets.size(); ++k) {
        adam_step(nets[k]->params, states[k]);
        project_constraints(*nets[k]);
      }
    }
    auto const n = static_cast<double>(train.size());
    rec.l_uc /= n;
    rec.l_cc /= n;
    rec.l_co /= n;
    rec.val_psnr = mean_val_psnr(result.model, val);
    if (cfg.log_wall_time) {
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    result.history.epochs.push_back(rec);
    if (on_epoch) { on_epoch(epoch, result); }
  }
}

} // namespace

auto to_string(Strategy s) -> std::string
{
  switch (s) {
  case Strategy::selfcolearn: return "selfcolearn";
  case Strategy::b1_single_cross: return "b1_single_cross";
  case Strategy::b2_single_omega: return "b2_single_omega";
  case Strategy::supervised: return "supervised";
  }
  throw Error("unknown strategy");
}

auto to_string(LossDomain d) -> std::string
{
  switch (d) {
  case LossDomain::kspace_kspace: return "kspace_kspace";
  case LossDomain::xt_kspace: return "xt_kspace";
  case LossDomain::xt_xt: return "xt_xt";
  }
  throw Error("unknown loss domain");
}

auto parse_strategy(std::string_view name) -> Strategy
{
  for (auto s : {Strategy::selfcolearn, Strategy::b1_single_cross, Strategy::b2_single_omega, Strategy::supervised}) {
    if (name == to_string(s)) { return s; }
  }
  throw ConfigError(fmt::format(
    "unknown strategy '{}' (expected selfcolearn, b1_single_cross, b2_single_omega or supervised)", name));
}

auto parse_loss_domain(std::string_view name) -> LossDomain
{
  for (auto d : {LossDomain::kspace_kspace, LossDomain::xt_kspace, LossDomain::xt_xt}) {
    if (name == to_string(d)) { return d; }
  }
  throw ConfigError(fmt::format("unknown loss domain '{}' (expected kspace_kspace, xt_kspace or xt_xt)", name));
}

void validate_train_config(TrainConfig const &cfg)
{
  if (!(cfg.gamma >= 0.0)) { throw ConfigError(fmt::format("gamma must be >= 0, got {}", cfg.gamma)); }
  if (cfg.epochs < 1) { throw ConfigError("epochs must be >= 1"); }
  if (cfg.batch_size < 1) { throw ConfigError("batch_size must be >= 1"); }
  if (!(cfg.adam.lr > 0.0)) { throw ConfigError("learning rate must be > 0"); }
  if (!(cfg.adam.beta1 >= 0.0 && cfg.adam.beta1 < 1.0) || !(cfg.adam.beta2 >= 0.0 && cfg.adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
}

auto history_csv(TrainHistory const &h) -> std::string
{
  std::string text = "epoch,l_uc,l_cc,l_co,val_psnr,seconds\n";
  for (auto const &r : h.epochs) {
    text += fmt::format("{},{},{},{},{},{}\n", r.epoch, format_number(r.l_uc), format_number(r.l_cc),
                        format_number(r.l_co), format_number(r.val_psnr), format_number(r.seconds));
  }
  return text;
}

void write_history_csv(std::filesystem::path const &path, TrainHistory const &h) { write_text(path, history_csv(h)); }

auto loss_uc(Tensor const &k_theta, Tensor const &k_lambda, Tensor const &y_omega, BinaryMask const &P) -> Tensor
{
  check_same("loss_uc", k_theta, k_lambda, P);
  return add(mse_loss(mask_mul(k_theta, P), y_omega), mse_loss(mask_mul(k_lambda, P), y_omega));
}

auto loss_cc(Tensor const &k_theta, Tensor const &k_lambda, BinaryMask const &P) -> Tensor
{
  check_same("loss_cc", k_theta, k_lambda, P);
  auto const off = P.complement();
  return mse_loss(mask_mul(k_theta, off), mask_mul(k_lambda, off));
}

auto co_loss(Tensor const &k_theta, Tensor const &k_lambda, Tensor const &y_omega, BinaryMask const &P,
             double gamma) -> Tensor
{
  if (!(gamma >= 0.0)) { throw ConfigError(fmt::format("gamma must be >= 0, got {}", gamma)); }
  return add(loss_uc(k_theta, k_lambda, y_omega, P), scale(loss_cc(k_theta, k_lambda, P), gamma));
}

auto co_loss_terms(Tensor const &k_theta, Tensor const &k_lambda, Tensor const &y_omega, BinaryMask const &P,
                   double gamma, LossDomain domain) -> CoLossTerms
{
  if (!(gamma >= 0.0)) { throw ConfigError(fmt::format("gamma must be >= 0, got {}", gamma)); }
  bool const uc_image = domain != LossDomain::kspace_kspace;
  bool const cc_image = domain == LossDomain::xt_xt;
  CoLossTerms out;
  if (uc_image) {
    check_same("loss_uc", k_theta, k_lambda, P);
    auto const target = fft2(y_omega, true);
    out.l_uc = add(mse_loss(fft2(mask_mul(k_theta, P), true), target),
                   mse_loss(fft2(mask_mul(k_lambda, P), true), target));
  } else {
    out.l_uc = loss_uc(k_theta, k_lambda, y_omega, P);
  }
  if (cc_image) {
    check_same("loss_cc", k_theta, k_lambda, P);
    auto const off = P.complement();
    out.l_cc = mse_loss(fft2(mask_mul(k_theta, off), true), fft2(mask_mul(k_lambda, off), true));
  } else {
    out.l_cc = loss_cc(k_theta, k_lambda, P);
  }
  out.l_co = add(out.l_uc, scale(out.l_cc, gamma));
  return out;
}

auto selfcolearn_loss(BackboneModel const &theta, BackboneModel const &lambda, CineSample const &s,
                      TrainConfig const &cfg) -> CoLossTerms
{
  auto const &m = s.masks;
  auto const x_theta = forward(theta, mask_mul(s.y_omega, m.P_theta.mask), m.P_theta);
  auto const x_lambda = forward(lambda, mask_mul(s.y_omega, m.P_lambda.mask), m.P_lambda);
  return co_loss_terms(fft2(x_theta), fft2(x_lambda), s.y_omega, m.P.mask, cfg.gamma, cfg.loss_domain);
}

auto baseline_loss(BackboneModel const &model, CineSample const &s, Strategy strategy) -> Tensor
{
  auto const &m = s.masks;
  switch (strategy) {
  case Strategy::b1_single_cross: {
    auto const x = forward(model, mask_mul(s.y_omega, m.P_theta.mask), m.P_theta);
    return mse_loss(mask_mul(fft2(x), m.P_lambda.mask), mask_mul(s.y_omega, m.P_lambda.mask));
  }
  case Strategy::b2_single_omega: {
    auto const x = forward(model, mask_mul(s.y_omega, m.P_theta.mask), m.P_theta);
    return mse_loss(mask_mul(fft2(x), m.P.mask), s.y_omega);
  }
  case Strategy::supervised: {
    auto const x = forward(model, s.y_omega, m.P);
    return mse_loss(x, s.reference);
  }
  case Strategy::selfcolearn: break;
  }
  throw ConfigError("baseline_loss: selfcolearn is not a single-network strategy");
}

auto train_selfcolearn(Dataset const &train, Dataset const &val, TrainConfig const &cfg, BackboneKind kind,
                       BackboneHyper const &hyper, EpochCallback const &on_epoch) -> TrainResult
{
  return train_selfcolearn(train, val, cfg, init_backbone(kind, hyper, mix_seed(cfg.seed, kThetaInitStream)),
                           init_backbone(kind, hyper, mix_seed(cfg.seed, kLambdaInitStream)), on_epoch);
}

auto train_selfcolearn(Dataset const &train, Dataset const &val, TrainConfig const &cfg, BackboneModel theta,
                       BackboneModel lambda, EpochCallback const &on_epoch) -> TrainResult
{
  if (cfg.strategy != Strategy::selfcolearn) {
    throw ConfigError(fmt::format("train_selfcolearn: strategy is {}", to_string(cfg.strategy)));
  }
  TrainResult result{std::move(theta), std::move(lambda), {}};
  run_training(
    train, val, cfg, result,
    [&](CineSample const &s) { return selfcolearn_loss(result.model, *result.model_lambda, s, cfg); }, on_epoch);
  return result;
}

auto train_baseline(Dataset const &train, Dataset const &val, TrainConfig const &cfg, BackboneKind kind,
                    BackboneHyper const &hyper, EpochCallback const &on_epoch) -> TrainResult
{
  return train_baseline(train, val, cfg, init_backbone(kind, hyper, mix_seed(cfg.seed, kThetaInitStream)), on_epoch);
}

auto train_baseline(Dataset const &train, Dataset const &val, TrainConfig const &cfg, BackboneModel model,
                    EpochCallback const &on_epoch) -> TrainResult
{
  if (cfg.strategy == Strategy::selfcolearn) { throw ConfigError("train_baseline: strategy is selfcolearn"); }
  TrainResult result{std::move(model), std::nullopt, {}};
  run_training(
    train, val, cfg, result,
    [&](CineSample const &s) {
      auto const l = baseline_loss(result.model, s, cfg.strategy);
      return CoLossTerms{l, Tensor::scalar(0.0), l};
    },
    on_epoch);
  return result;
}

auto train(Dataset const &train_set, Dataset const &val, TrainConfig const &cfg, BackboneKind kind,
           BackboneHyper const &hyper, EpochCallback const &on_epoch) -> TrainResult
{
  if (cfg.strategy == Strategy::selfcolearn) { return train_selfcolearn(train_set, val, cfg, kind, hyper, on_epoch); }
  return train_baseline(train_set, val, cfg, kind, hyper, on_epoch);
}

auto reconstruct(BackboneModel const &model, Tensor const &y_omega, SamplingMask const &P) -> Tensor
{
  NoGradGuard guard;
  return forward(model, y_omega, P).detach();
}

auto evaluate_model(BackboneModel const &model, Dataset const &data) -> std::vector<MetricsRecord>
{
  std::vector<MetricsRecord> out;
  out.reserve(data.size());
  for (auto const &s : data) { out.push_back(evaluate_pair(reconstruct(model, s.y_omega, s.masks.P), s.reference, s.id)); }
  return out;
}

auto evaluate_zero_filled(Dataset const &data) -> std::vector<MetricsRecord>
{
  std::vector<MetricsRecord> out;
  out.reserve(data.size());
  for (auto const &s : data) {
    NoGradGuard guard;
    out.push_back(evaluate_pair(zero_filled(s.y_omega, s.masks.P), s.reference, s.id));
  }
  return out;
}

} // namespace scl
