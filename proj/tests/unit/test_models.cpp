#include "helpers.hpp"

#include "selfcolearn/checkpoint.hpp"
#include "selfcolearn/error.hpp"
#include "selfcolearn/models.hpp"
#include "selfcolearn/phantom.hpp"

#include <doctest.h>
#include <filesystem>

using namespace scl;
using namespace testing;

namespace {

auto toy_hyper() -> BackboneHyper
{
  BackboneHyper h;
  h.iterations = 2;
  h.filters = 4;
  h.sparse_channels = 4;
  h.init_lambda = 0.05;
  return h;
}

auto toy_sample(std::uint64_t seed, std::size_t T = 3, std::size_t H = 8, std::size_t W = 8) -> CineSample
{
  AcquisitionConfig acq;
  acq.frames = T;
  acq.height = H;
  acq.width = W;
  acq.acceleration = 2.0;
  acq.center_lines = 2;
  acq.seed = seed;
  return simulate_sample("toy", random_tensor({T, H, W}, seed + 1000), acq, 0);
}

auto full_mask(std::size_t T, std::size_t H, std::size_t W) -> SamplingMask
{
  SamplingMask m;
  m.mask = BinaryMask({T, H, W}, 1);
  m.center_lines = H;
  return m;
}

auto values_of(Tensor const &t) -> std::vector<cx> { return {t.data().begin(), t.data().end()}; }

// Random parameters of moderate size so the networks are far from trivial.
void randomise(BackboneModel &m, std::uint64_t seed)
{
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    auto d = m.params[i].tensor.mutable_data();
    auto const v = random_values(d.size(), seed * 131 + i);
    for (std::size_t j = 0; j < d.size(); ++j) { d[j] = 0.3 * v[j]; }
  }
  project_constraints(m);
}

} // namespace

TEST_CASE("backbone kind names")
{
  CHECK(to_string(BackboneKind::crnn_lite) == "crnn_lite");
  CHECK(parse_backbone_kind("ista_unrolled") == BackboneKind::ista_unrolled);
  CHECK_THROWS_AS(parse_backbone_kind("unet"), ConfigError);
}

TEST_CASE("init_backbone parameters and determinism")
{
  auto const a = init_backbone(BackboneKind::crnn_lite, toy_hyper(), 3);
  auto const b = init_backbone(BackboneKind::crnn_lite, toy_hyper(), 3);
  REQUIRE(a.params.size() == b.params.size());
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    CHECK(a.params[i].name == b.params[i].name);
    CHECK(values_of(a.params[i].tensor) == values_of(b.params[i].tensor));
    CHECK(a.params[i].tensor.requires_grad());
  }
  auto const c = init_backbone(BackboneKind::crnn_lite, toy_hyper(), 4);
  CHECK_FALSE(values_of(a.param("x2h.w")) == values_of(c.param("x2h.w")));

  CHECK(a.param("x2h.w").shape() == Shape{4, 1, 3, 3});
  CHECK(a.param("h2h.w").shape() == Shape{4, 4, 3, 3});
  CHECK(a.param("proj.w").shape() == Shape{1, 4, 3, 3});
  for (auto const &v : a.param("x2h.w").data()) {
    CHECK(std::abs(v.real()) <= 1.0 / 3.0);
    CHECK(std::abs(v.imag()) <= 1.0 / 3.0);
  }
  for (auto const *bias : {"x2h.b", "conv.b", "proj.b"}) {
    for (auto const &v : a.param(bias).data()) { CHECK(v == cx{}); }
  }

  BackboneHyper h;
  auto const ista = init_backbone(BackboneKind::ista_unrolled, h, 1);
  CHECK(ista.param("it0.lambda").item() == cx{0.01, 0.0});
  CHECK(ista.param("it2.eta").item() == cx{1.0, 0.0});
  CHECK(ista.param("it1.D.w").shape() == Shape{8, 1, 3, 3});
  CHECK(ista.param("it1.Dt.w").shape() == Shape{1, 8, 3, 3});
}

TEST_CASE("hyper validation")
{
  auto h = toy_hyper();
  h.kernel = 4;
  CHECK_THROWS_AS(init_backbone(BackboneKind::crnn_lite, h, 0), ConfigError);
  h = toy_hyper();
  h.iterations = 0;
  CHECK_THROWS_AS(init_backbone(BackboneKind::ista_unrolled, h, 0), ConfigError);
  h = toy_hyper();
  h.filters = 0;
  CHECK_THROWS_AS(validate_hyper(h), ConfigError);
  h = toy_hyper();
  h.init_eta = 0.0;
  CHECK_THROWS_AS(validate_hyper(h), ConfigError);
}

TEST_CASE("DC dominance on fully sampled data for any parameters")
{
  auto const x = random_tensor({3, 8, 8}, 2);
  auto const full = full_mask(3, 8, 8);
  auto const y = fft2(x);
  for (auto kind : {BackboneKind::crnn_lite, BackboneKind::ista_unrolled}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      auto m = init_backbone(kind, toy_hyper(), seed);
      randomise(m, seed);
      CHECK(max_abs_diff(forward(m, y, full).data(), x.data()) < 1e-10);
    }
  }
  auto const crnn = forward(init_backbone(BackboneKind::crnn_lite, toy_hyper(), 1), y, full);
  auto const ista = forward(init_backbone(BackboneKind::ista_unrolled, toy_hyper(), 1), y, full);
  CHECK(max_abs_diff(crnn.data(), ista.data()) < 1e-10);
}

TEST_CASE("zero measurements give a zero reconstruction")
{
  auto const s = toy_sample(1);
  auto m = init_backbone(BackboneKind::crnn_lite, toy_hyper(), 2);
  for (auto &v : Tensor(m.param("proj.w")).mutable_data()) { v = 0.0; }
  auto const out = crnn_forward(m, Tensor::zeros({3, 8, 8}), s.masks.P);
  for (auto const &v : out.data()) { CHECK(v == cx{}); }
}

TEST_CASE("forward dispatches and keeps sampled k-space")
{
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto const s = toy_sample(seed, 4, 16, 8);
    auto crnn = init_backbone(BackboneKind::crnn_lite, toy_hyper(), seed);
    auto ista = init_backbone(BackboneKind::ista_unrolled, toy_hyper(), seed);
    randomise(crnn, seed + 7);
    randomise(ista, seed + 8);
    auto const a = forward(crnn, s.y_omega, s.masks.P);
    auto const b = forward(ista, s.y_omega, s.masks.P);
    CHECK(values_of(a) == values_of(crnn_forward(crnn, s.y_omega, s.masks.P)));
    CHECK(values_of(b) == values_of(ista_forward(ista, s.y_omega, s.masks.P)));
    for (auto const *out : {&a, &b}) {
      auto const k = fft2(*out);
      double err = 0.0;
      for (std::size_t i = 0; i < k.numel(); ++i) {
        if (s.masks.P.mask.bits[i]) { err = std::max(err, std::abs(k.data()[i] - s.y_omega.data()[i])); }
      }
      CHECK(err < 1e-10);
    }
  }
  auto const s = toy_sample(0);
  auto const m = init_backbone(BackboneKind::crnn_lite, toy_hyper(), 0);
  CHECK_THROWS_AS(crnn_forward(m, random_tensor({2, 8, 8}, 0), s.masks.P), ShapeError);
  CHECK_THROWS_AS(ista_forward(m, s.y_omega, s.masks.P), Error);
}

TEST_CASE("ISTA with zero threshold and identity transform keeps the zero-filled fit")
{
  auto const s = toy_sample(3);
  BackboneHyper h = toy_hyper();
  h.iterations = 1;
  h.sparse_channels = 1;
  auto m = init_backbone(BackboneKind::ista_unrolled, h, 0);
  for (auto &p : m.params) {
    auto d = p.tensor.mutable_data();
    std::fill(d.begin(), d.end(), cx{});
  }
  Tensor(m.param("it0.eta")).mutable_data()[0] = 0.5;
  Tensor(m.param("it0.D.w")).mutable_data()[4] = 1.0;
  Tensor(m.param("it0.Dt.w")).mutable_data()[4] = 1.0;

  auto const residual = [&](Tensor const &x) {
    return sum_sq(sub(mask_mul(fft2(x), s.masks.P.mask), s.y_omega).data());
  };
  auto const x0 = zero_filled(s.y_omega, s.masks.P);
  auto const x1 = ista_forward(m, s.y_omega, s.masks.P);
  CHECK(residual(x1) <= residual(x0) + 1e-24);
  CHECK(max_abs_diff(x1.data(), x0.data()) < 1e-12);

  // The same gradient step from an inconsistent start contracts the residual by (1 - eta)^2.
  auto const start = random_tensor({3, 8, 8}, 4);
  auto const step = sub(start, scale(fft2(sub(mask_mul(fft2(start), s.masks.P.mask), s.y_omega), true), 0.5));
  CHECK(std::abs(residual(step) - 0.25 * residual(start)) < 1e-10 * residual(start));
}

TEST_CASE("end-to-end backbone gradients match finite differences")
{
  for (auto kind : {BackboneKind::crnn_lite, BackboneKind::ista_unrolled}) {
    auto const s = toy_sample(5);
    auto m = init_backbone(kind, toy_hyper(), 11);
    auto const y = mask_mul(s.y_omega, s.masks.P_theta.mask);
    auto const target = random_tensor({3, 8, 8}, 12);
    auto loss = [&] { return mse_loss(forward(m, y, s.masks.P_theta), target); };
    backward(loss());
    std::vector<std::vector<cx>> analytic;
    double largest = 0.0;
    for (auto &p : m.params) {
      analytic.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
      largest = std::max(largest, std::sqrt(sum_sq(analytic.back())));
    }
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      auto const num = numeric_grad([&] { return loss().item().real(); }, m.params[i].tensor, 1e-6);
      double diff = 0.0;
      for (std::size_t j = 0; j < num.size(); ++j) { diff += std::norm(num[j] - analytic[i][j]); }
      double const norm = std::max(std::sqrt(sum_sq(analytic[i])), 1e-2 * largest);
      INFO(to_string(kind) << " " << m.params[i].name);
      CHECK(std::sqrt(diff) / norm < 1e-4);
    }
  }
}

TEST_CASE("project_constraints clamps ISTA scalars")
{
  auto m = init_backbone(BackboneKind::ista_unrolled, toy_hyper(), 0);
  Tensor(m.param("it0.lambda")).mutable_data()[0] = cx{-0.2, 0.3};
  Tensor(m.param("it1.eta")).mutable_data()[0] = cx{-1.0, 0.1};
  CHECK_THROWS_AS(validate_model(m), Error);
  project_constraints(m);
  CHECK(m.param("it0.lambda").item() == cx{0.0, 0.0});
  CHECK(m.param("it1.eta").item() == cx{1e-4, 0.0});
  CHECK_NOTHROW(validate_model(m));
}

TEST_CASE("model checkpoints round trip")
{
  for (auto kind : {BackboneKind::crnn_lite, BackboneKind::ista_unrolled}) {
    auto m = init_backbone(kind, toy_hyper(), 9);
    randomise(m, 3);
    auto const path = std::filesystem::temp_directory_path() / "scl_model.sclw";
    save_model(path, m);
    auto const back = load_model(path);
    CHECK(back.kind == kind);
    CHECK(back.hyper.iterations == 2);
    CHECK(back.hyper.filters == 4);
    CHECK(back.hyper.init_lambda == 0.05);
    REQUIRE(back.params.size() == m.params.size());
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      CHECK(values_of(back.params[i].tensor) == values_of(m.params[i].tensor));
    }
    auto const s = toy_sample(2);
    CHECK(values_of(forward(back, s.y_omega, s.masks.P)) == values_of(forward(m, s.y_omega, s.masks.P)));

    auto tensors = load_tensors(path);
    tensors.pop_back();
    save_tensors(path, tensors);
    CHECK_THROWS_AS(load_model(path), Error);
    std::filesystem::remove(path);
  }
}
