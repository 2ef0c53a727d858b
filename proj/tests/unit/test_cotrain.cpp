#include "helpers.hpp"

#include "selfcolearn/cotrain.hpp"
#include "selfcolearn/error.hpp"
#include "selfcolearn/gradcheck.hpp"

#include <doctest.h>
#include <filesystem>

using namespace scl;
using namespace testing;

namespace {

auto lite_hyper() -> BackboneHyper
{
  BackboneHyper h;
  h.iterations = 2;
  h.filters = 4;
  h.sparse_channels = 4;
  return h;
}

auto toy_sample(std::uint64_t seed) -> CineSample
{
  AcquisitionConfig acq;
  acq.frames = 3;
  acq.height = 8;
  acq.width = 8;
  acq.acceleration = 2.0;
  acq.center_lines = 2;
  acq.seed = seed;
  auto ref = random_tensor({3, 8, 8}, seed + 500);
  double peak = 0.0;
  for (auto const &v : ref.data()) { peak = std::max(peak, std::abs(v)); }
  for (auto &v : ref.mutable_data()) { v /= peak; }
  return simulate_sample("toy" + std::to_string(seed), ref, acq, 0);
}

auto values_of(Tensor const &t) -> std::vector<cx> { return {t.data().begin(), t.data().end()}; }

auto mask_of(std::vector<std::uint8_t> bits, Shape shape) -> BinaryMask { return BinaryMask(std::move(shape), std::move(bits)); }

// Toy benchmark shared by the training smoke tests.
struct ToyData
{
  DatasetSplit data;
  ToyData()
  {
    PhantomConfig pc;
    pc.n_sequences = 60;
    pc.seed = 1;
    AcquisitionConfig acq;
    acq.acceleration = 4.0;
    acq.center_lines = 2;
    acq.seed = 2;
    data = build_dataset(pc, {}, acq, {50.0 / 60.0, 0.0, 10.0 / 60.0});
  }
};

auto toy_data() -> DatasetSplit const &
{
  static ToyData const d;
  return d.data;
}

auto toy_train_config(Strategy s) -> TrainConfig
{
  TrainConfig c;
  c.strategy = s;
  c.epochs = 30;
  c.adam.lr = 1e-3;
  c.seed = 4;
  return c;
}

auto mean_psnr(std::vector<MetricsRecord> const &r) -> double { return summarize(r).psnr_db.mean; }

} // namespace

TEST_CASE("strategy and loss domain names")
{
  CHECK(to_string(Strategy::b1_single_cross) == "b1_single_cross");
  CHECK(parse_strategy("supervised") == Strategy::supervised);
  CHECK(to_string(LossDomain::xt_kspace) == "xt_kspace");
  CHECK(parse_loss_domain("kspace_kspace") == LossDomain::kspace_kspace);
  CHECK_THROWS_AS(parse_strategy("b3"), ConfigError);
  CHECK_THROWS_AS(parse_loss_domain("xf"), ConfigError);
}

TEST_CASE("loss toy values")
{
  auto const P = mask_of({1, 0}, {2});
  Tensor const y({2}, {2.0, 0.0});
  Tensor const kt({2}, {1.0, 5.0});
  Tensor const kl({2}, {2.0, 7.0});
  CHECK(loss_uc(kt, kl, y, P).item() == cx{0.5, 0.0});
  CHECK(loss_cc(Tensor({2}, {9.0, 3.0}), Tensor({2}, {4.0, 1.0}), P).item() == cx{2.0, 0.0});
  CHECK(std::abs(co_loss(kt, kl, y, P, 0.01).item().real() - (0.5 + 0.01 * 2.0)) < 1e-15);
  CHECK(co_loss(kt, kl, y, P, 0.0).item() == loss_uc(kt, kl, y, P).item());
  CHECK_THROWS_AS(co_loss(kt, kl, y, P, -1.0), ConfigError);
  CHECK_THROWS_AS(loss_uc(kt, Tensor({3}, {0.0, 0.0, 0.0}), y, P), ShapeError);
}

TEST_CASE("loss masking invariances")
{
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    scl::Rng rng(seed);
    BinaryMask P({2, 4, 4});
    for (auto &b : P.bits) { b = rng.uniform() < 0.5 ? 1 : 0; }
    auto const y = mask_mul(random_tensor({2, 4, 4}, seed + 1), P);
    auto const kt = random_tensor({2, 4, 4}, seed + 2);
    auto const kl = random_tensor({2, 4, 4}, seed + 3);
    auto perturb = [&](Tensor const &k, bool on_sampled) {
      auto out = k.detach();
      auto const noise = random_values(out.numel(), seed + 4);
      for (std::size_t i = 0; i < out.numel(); ++i) {
        if ((P.bits[i] != 0) == on_sampled) { out.mutable_data()[i] += noise[i]; }
      }
      return out;
    };
    double const uc = loss_uc(kt, kl, y, P).item().real();
    double const cc = loss_cc(kt, kl, P).item().real();
    CHECK(std::abs(loss_uc(perturb(kt, false), perturb(kl, false), y, P).item().real() - uc) < 1e-12);
    CHECK(std::abs(loss_cc(perturb(kt, true), perturb(kl, true), P).item().real() - cc) < 1e-12);
    CHECK(std::abs(loss_uc(perturb(kt, true), kl, y, P).item().real() - uc) > 1e-6);
    CHECK(std::abs(loss_cc(perturb(kt, false), kl, P).item().real() - cc) > 1e-6);
  }
}

TEST_CASE("co_loss is non-negative and vanishes exactly on consistent predictions")
{
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    scl::Rng rng(seed);
    BinaryMask P({2, 4, 4});
    for (auto &b : P.bits) { b = rng.uniform() < 0.5 ? 1 : 0; }
    auto const y = mask_mul(random_tensor({2, 4, 4}, seed + 1), P);
    auto const kt = random_tensor({2, 4, 4}, seed + 2);
    auto const kl = random_tensor({2, 4, 4}, seed + 3);
    CHECK(co_loss(kt, kl, y, P, 0.3).item().real() >= 0.0);

    // Agree with y on P and with each other off P.
    auto const off = random_tensor({2, 4, 4}, seed + 4);
    auto consistent = add(y, mask_mul(off, P.complement())).detach();
    CHECK(co_loss(consistent, consistent, y, P, 0.3).item().real() == 0.0);

    auto broken = consistent.detach();
    broken.mutable_data()[0] += cx{1e-3, 0.0};
    CHECK(co_loss(broken, consistent, y, P, 0.3).item().real() > 0.0);
    auto other = consistent.detach();
    std::size_t i = 0;
    while (P.bits[i]) { ++i; }
    other.mutable_data()[i] += cx{0.0, 1e-3};
    CHECK(co_loss(consistent, other, y, P, 0.3).item().real() > 0.0);
  }
}

TEST_CASE("loss domains agree by Parseval")
{
  auto const s = toy_sample(3);
  auto const kt = random_tensor({3, 8, 8}, 1);
  auto const kl = random_tensor({3, 8, 8}, 2);
  auto const ref = co_loss_terms(kt, kl, s.y_omega, s.masks.P.mask, 0.2, LossDomain::kspace_kspace);
  for (auto d : {LossDomain::xt_kspace, LossDomain::xt_xt}) {
    auto const t = co_loss_terms(kt, kl, s.y_omega, s.masks.P.mask, 0.2, d);
    CHECK(std::abs(t.l_uc.item().real() - ref.l_uc.item().real()) < 1e-12);
    CHECK(std::abs(t.l_cc.item().real() - ref.l_cc.item().real()) < 1e-12);
    CHECK(std::abs(t.l_co.item().real() - ref.l_co.item().real()) < 1e-12);
  }
}

TEST_CASE("co_loss is symmetric in the two networks")
{
  auto const s = toy_sample(4);
  auto const kt = random_tensor({3, 8, 8}, 1);
  auto const kl = random_tensor({3, 8, 8}, 2);
  CHECK(std::abs(co_loss(kt, kl, s.y_omega, s.masks.P.mask, 0.7).item().real()
                 - co_loss(kl, kt, s.y_omega, s.masks.P.mask, 0.7).item().real())
        < 1e-12);

  auto const a = init_backbone(BackboneKind::crnn_lite, lite_hyper(), 1);
  auto const b = init_backbone(BackboneKind::crnn_lite, lite_hyper(), 2);
  auto swapped = s;
  std::swap(swapped.masks.P_theta, swapped.masks.P_lambda);
  TrainConfig cfg;
  cfg.gamma = 0.7;
  double const l1 = selfcolearn_loss(a, b, s, cfg).l_co.item().real();
  double const l2 = selfcolearn_loss(b, a, swapped, cfg).l_co.item().real();
  CHECK(std::abs(l1 - l2) < 1e-12);
}

TEST_CASE("co-training gradients through both networks match finite differences")
{
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    auto const s = toy_sample(seed);
    auto theta = init_backbone(BackboneKind::crnn_lite, lite_hyper(), seed + 10);
    auto lambda = init_backbone(BackboneKind::crnn_lite, lite_hyper(), seed + 20);
    TrainConfig cfg;
    cfg.gamma = 0.5;
    auto loss = [&] { return selfcolearn_loss(theta, lambda, s, cfg).l_co; };
    backward(loss());
    std::vector<Tensor *> leaves;
    for (auto &p : theta.params) { leaves.push_back(&p.tensor); }
    for (auto &p : lambda.params) { leaves.push_back(&p.tensor); }
    std::vector<std::vector<cx>> analytic;
    double largest = 0.0;
    for (auto *t : leaves) {
      analytic.emplace_back(t->grad().begin(), t->grad().end());
      largest = std::max(largest, std::sqrt(sum_sq(analytic.back())));
    }
    CHECK(largest > 0.0);
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      auto const num = numeric_grad([&] { return loss().item().real(); }, *leaves[i], 1e-6);
      double diff = 0.0;
      for (std::size_t j = 0; j < num.size(); ++j) { diff += std::norm(num[j] - analytic[i][j]); }
      CHECK(std::sqrt(diff) / std::max(std::sqrt(sum_sq(analytic[i])), 1e-2 * largest) < 1e-4);
    }
  }
}

TEST_CASE("baseline losses")
{
  auto const s = toy_sample(5);
  auto const m = init_backbone(BackboneKind::crnn_lite, lite_hyper(), 1);
  // B-II equals the single-network share of the undersampled consistency term.
  auto const x = forward(m, mask_mul(s.y_omega, s.masks.P_theta.mask), s.masks.P_theta);
  double const uc_one = mse_loss(mask_mul(fft2(x), s.masks.P.mask), s.y_omega).item().real();
  CHECK(baseline_loss(m, s, Strategy::b2_single_omega).item().real() == uc_one);
  CHECK(baseline_loss(m, s, Strategy::b1_single_cross).item().real() >= 0.0);
  CHECK_THROWS_AS(baseline_loss(m, s, Strategy::selfcolearn), ConfigError);

  // Supervised on fully sampled data with the zero-filled image as reference.
  auto full = s;
  full.masks.P.mask = BinaryMask(s.masks.P.mask.shape, 1);
  full.y_omega = fft2(s.reference).detach();
  full.reference = zero_filled(full.y_omega, full.masks.P).detach();
  CHECK(baseline_loss(m, full, Strategy::supervised).item().real() < 1e-24);
}

TEST_CASE("training config validation")
{
  Dataset const one{toy_sample(1)};
  TrainConfig c;
  c.epochs = 0;
  CHECK_THROWS_AS(train(one, {}, c, BackboneKind::crnn_lite, lite_hyper()), ConfigError);
  c = {};
  c.gamma = -0.1;
  CHECK_THROWS_AS(validate_train_config(c), ConfigError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(validate_train_config(c), ConfigError);
  c = {};
  CHECK_THROWS_AS(train({}, {}, c, BackboneKind::crnn_lite, lite_hyper()), TrainingError);
  c.strategy = Strategy::supervised;
  CHECK_THROWS_AS(train_selfcolearn(one, {}, c, BackboneKind::crnn_lite, lite_hyper()), ConfigError);
}

TEST_CASE("training is deterministic and records history")
{
  Dataset const data{toy_sample(1), toy_sample(2), toy_sample(3)};
  TrainConfig c;
  c.epochs = 2;
  c.adam.lr = 1e-3;
  c.seed = 7;
  std::size_t calls = 0;
  auto const a = train(data, {toy_sample(9)}, c, BackboneKind::crnn_lite, lite_hyper(),
                       [&](std::size_t epoch, TrainResult const &r) {
                         ++calls;
                         CHECK(r.history.epochs.size() == epoch);
                       });
  auto const b = train(data, {toy_sample(9)}, c, BackboneKind::crnn_lite, lite_hyper());
  CHECK(calls == 2);
  REQUIRE(a.model_lambda.has_value());
  for (std::size_t i = 0; i < a.model.params.size(); ++i) {
    CHECK(values_of(a.model.params[i].tensor) == values_of(b.model.params[i].tensor));
    CHECK(values_of(a.model_lambda->params[i].tensor) == values_of(b.model_lambda->params[i].tensor));
  }
  CHECK(history_csv(a.history) == history_csv(b.history));
  REQUIRE(a.history.epochs.size() == 2);
  for (auto const &e : a.history.epochs) {
    CHECK(std::isfinite(e.l_co));
    CHECK(std::abs(e.l_co - (e.l_uc + c.gamma * e.l_cc)) < 1e-12);
    CHECK(e.val_psnr > 0.0);
    CHECK(e.seconds == 0.0);
  }
  CHECK(history_csv(a.history).rfind("epoch,l_uc,l_cc,l_co,val_psnr,seconds\n1,", 0) == 0);

  Dataset const single{toy_sample(4)};
  c.epochs = 1;
  auto const s1 = train(single, {}, c, BackboneKind::ista_unrolled, lite_hyper());
  auto const s2 = train(single, {}, c, BackboneKind::ista_unrolled, lite_hyper());
  for (std::size_t i = 0; i < s1.model.params.size(); ++i) {
    CHECK(values_of(s1.model.params[i].tensor) == values_of(s2.model.params[i].tensor));
  }
  CHECK(s1.history.epochs[0].val_psnr == 0.0);
}

TEST_CASE("gamma 0 with identical masks and initialisation reduces to two B-II copies")
{
  Dataset data{toy_sample(1), toy_sample(2)};
  for (auto &s : data) { s.masks.P_lambda = s.masks.P_theta; }
  TrainConfig c;
  c.epochs = 3;
  c.gamma = 0.0;
  c.adam.lr = 1e-3;
  auto const dual = train_selfcolearn(data, {}, c, init_backbone(BackboneKind::crnn_lite, lite_hyper(), 5),
                                      init_backbone(BackboneKind::crnn_lite, lite_hyper(), 5));
  c.strategy = Strategy::b2_single_omega;
  auto const single = train_baseline(data, {}, c, init_backbone(BackboneKind::crnn_lite, lite_hyper(), 5));
  double worst = 0.0;
  for (std::size_t i = 0; i < single.model.params.size(); ++i) {
    worst = std::max(worst, max_abs_diff(dual.model.params[i].tensor.data(), single.model.params[i].tensor.data()));
    worst = std::max(worst,
                     max_abs_diff(dual.model_lambda->params[i].tensor.data(), single.model.params[i].tensor.data()));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("divergence aborts training with context")
{
  Dataset const data{toy_sample(1)};
  TrainConfig c;
  c.epochs = 1;
  c.divergence_limit = 1e-12;
  try {
    train(data, {}, c, BackboneKind::crnn_lite, lite_hyper());
    FAIL("divergence not detected");
  } catch (TrainingError const &e) {
    std::string const msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("toy1") != std::string::npos);
  }
}

TEST_CASE("reconstruct is deterministic and exact on fully sampled data")
{
  auto const s = toy_sample(6);
  auto const m = init_backbone(BackboneKind::crnn_lite, lite_hyper(), 3);
  auto const a = reconstruct(m, s.y_omega, s.masks.P);
  CHECK(values_of(a) == values_of(reconstruct(m, s.y_omega, s.masks.P)));
  CHECK_FALSE(a.requires_grad());
  SamplingMask full;
  full.mask = BinaryMask(s.masks.P.mask.shape, 1);
  auto const y = fft2(s.reference);
  CHECK(max_abs_diff(reconstruct(m, y, full).data(), s.reference.data()) < 1e-10);
  CHECK_THROWS_AS(reconstruct(m, random_tensor({2, 8, 8}, 1), s.masks.P), ShapeError);
}

TEST_CASE("toy supervised training beats zero filling by 3 dB")
{
  auto const &d = toy_data();
  REQUIRE(d.train.size() == 50);
  auto const r = train(d.train, d.test, toy_train_config(Strategy::supervised), BackboneKind::crnn_lite, lite_hyper());
  double const zf = mean_psnr(evaluate_zero_filled(d.test));
  double const model = mean_psnr(evaluate_model(r.model, d.test));
  MESSAGE("zero-filled " << zf << " dB, supervised " << model << " dB");
  CHECK(r.history.epochs.back().val_psnr >= zf + 3.0);
  CHECK(model > zf);
}

TEST_CASE("toy co-training lowers its loss and beats zero filling on held-out data")
{
  auto const &d = toy_data();
  auto const r = train(d.train, {}, toy_train_config(Strategy::selfcolearn), BackboneKind::crnn_lite, lite_hyper());
  auto const &h = r.history.epochs;
  MESSAGE("first L_co " << h.front().l_co << ", last L_co " << h.back().l_co);
  CHECK(h.back().l_co < h.front().l_co);
  CHECK(mean_psnr(evaluate_model(r.model, d.test)) > mean_psnr(evaluate_zero_filled(d.test)));
}

TEST_CASE("history csv file")
{
  TrainHistory h;
  h.epochs.push_back({1, 0.5, 0.25, 0.5025, 20.0, 0.0});
  auto const path = std::filesystem::temp_directory_path() / "scl_history.csv";
  write_history_csv(path, h);
  CHECK(history_csv(h) == "epoch,l_uc,l_cc,l_co,val_psnr,seconds\n1,0.5,0.25,0.5025,20,0\n");
  std::filesystem::remove(path);
}
