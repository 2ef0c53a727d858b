#include "selfcolearn/gradcheck.hpp"

#include "selfcolearn/cotrain.hpp"
#include "selfcolearn/error.hpp"
#include "selfcolearn/kspace.hpp"
#include "selfcolearn/models.hpp"
#include "selfcolearn/ops.hpp"
#include "selfcolearn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace scl {

namespace {

auto random_values(std::size_t n, Rng &rng) -> std::vector<cx>
{
  std::vector<cx> v(n);
  for (auto &e : v) {
    double const re = rng.normal();
    double const im = rng.normal();
    e = {re, im};
  }
  return v;
}

auto leaf(Shape shape, Rng &rng) -> Tensor
{
  auto const n = numel_of(shape);
  return Tensor::parameter(std::move(shape), random_values(n, rng));
}

auto constant(Shape shape, Rng &rng) -> Tensor
{
  auto const n = numel_of(shape);
  return Tensor(std::move(shape), random_values(n, rng));
}

// Pushes every real and imaginary component at least `gap` away from `kink`.
auto away_from(Tensor t, double kink, double gap) -> Tensor
{
  auto push = [&](double v) {
    if (std::abs(v - kink) >= gap) { return v; }
    return v >= kink ? kink + gap : kink - gap;
  };
  for (auto &e : t.mutable_data()) { e = {push(e.real()), push(e.imag())}; }
  return t;
}

auto random_mask(Shape shape, Rng &rng) -> BinaryMask
{
  BinaryMask m(shape);
  for (auto &b : m.bits) { b = rng.uniform() < 0.5 ? 1 : 0; }
  return m;
}

// Reduces any output to a real scalar with a non-trivial gradient.
auto against_target(Tensor const &out, std::uint64_t seed) -> Tensor
{
  Rng rng(mix_seed(seed, 77));
  return mse_loss(out, constant(out.shape(), rng));
}

auto unary_case(std::string name, Shape shape, std::function<Tensor(Tensor const &)> op) -> GradcheckCase
{
  return {std::move(name), [shape, op](std::uint64_t seed) {
            Rng rng(seed);
            auto const x = leaf(shape, rng);
            return gradcheck([&](auto const &in) { return against_target(op(in[0]), seed); }, {x});
          }};
}

// A small 8x8x3 acquisition with a valid split.
auto toy_sample(std::uint64_t seed) -> CineSample
{
  AcquisitionConfig acq;
  acq.frames = 3;
  acq.height = 8;
  acq.width = 8;
  acq.acceleration = 2.0;
  acq.center_lines = 2;
  acq.seed = seed;
  Rng rng(mix_seed(seed, 5));
  auto const ref = constant({3, 8, 8}, rng);
  return simulate_sample("toy", ref, acq, 0);
}

auto toy_hyper() -> BackboneHyper
{
  BackboneHyper h;
  h.iterations = 2;
  h.filters = 4;
  h.kernel = 3;
  h.sparse_channels = 4;
  h.init_lambda = 0.05;
  return h;
}

auto with_params(BackboneModel model, std::vector<Tensor> const &tensors, std::size_t offset = 0) -> BackboneModel
{
  for (std::size_t i = 0; i < model.params.size(); ++i) { model.params[i].tensor = tensors[offset + i]; }
  return model;
}

auto param_tensors(BackboneModel const &m) -> std::vector<Tensor>
{
  std::vector<Tensor> out;
  for (auto const &p : m.params) { out.push_back(p.tensor); }
  return out;
}

auto backbone_case(std::string name, BackboneKind kind) -> GradcheckCase
{
  return {std::move(name), [kind](std::uint64_t seed) {
            auto const s = toy_sample(seed);
            auto const model = init_backbone(kind, toy_hyper(), mix_seed(seed, 9));
            auto const y = mask_mul(s.y_omega, s.masks.P_theta.mask);
            return gradcheck(
              [&](auto const &in) {
                return against_target(forward(with_params(model, in), y, s.masks.P_theta), seed);
              },
              param_tensors(model), 1e-6);
          }};
}

} // namespace

auto gradcheck(ScalarFn const &fn, std::vector<Tensor> const &inputs, double step) -> double
{
  for (auto const &t : inputs) {
    if (!t.is_leaf() || !t.requires_grad()) { throw GraphError("gradcheck: inputs must be leaves requiring grad"); }
  }
  auto inputs_copy = inputs;
  for (auto &t : inputs_copy) { t.zero_grad(); }
  backward(fn(inputs_copy));

  auto eval = [&] {
    NoGradGuard guard;
    return fn(inputs_copy).item().real();
  };
  std::vector<double> diffs;
  std::vector<double> norms;
  for (auto &t : inputs_copy) {
    std::vector<cx> analytic(t.numel());
    if (t.has_grad()) { std::copy(t.grad().begin(), t.grad().end(), analytic.begin()); }
    std::vector<cx> numeric(t.numel());
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      auto const orig = data[i];
      double parts[2];
      for (int c = 0; c < 2; ++c) {
        cx const delta = c == 0 ? cx{step, 0.0} : cx{0.0, step};
        data[i] = orig + delta;
        double const plus = eval();
        data[i] = orig - delta;
        double const minus = eval();
        data[i] = orig;
        parts[c] = (plus - minus) / (2.0 * step);
      }
      numeric[i] = {parts[0], parts[1]};
    }
    double diff = 0.0;
    double na = 0.0;
    double nn = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      diff += std::norm(analytic[i] - numeric[i]);
      na += std::norm(analytic[i]);
      nn += std::norm(numeric[i]);
    }
    diffs.push_back(std::sqrt(diff));
    norms.push_back(std::max(std::sqrt(na), std::sqrt(nn)));
  }
  // Inputs with a vanishing gradient are measured against the largest one.
  double const floor = std::max(1e-2 * *std::max_element(norms.begin(), norms.end()), 1e-8);
  double worst = 0.0;
  for (std::size_t i = 0; i < diffs.size(); ++i) { worst = std::max(worst, diffs[i] / std::max(norms[i], floor)); }
  return worst;
}

auto default_gradcheck_cases() -> std::vector<GradcheckCase>
{
  std::vector<GradcheckCase> cases;
  cases.push_back({"add", [](std::uint64_t seed) {
                     Rng rng(seed);
                     auto a = leaf({3, 4}, rng);
                     auto b = leaf({3, 4}, rng);
                     return gradcheck([&](auto const &in) { return against_target(add(in[0], in[1]), seed); }, {a, b});
                   }});
  cases.push_back({"sub", [](std::uint64_t seed) {
                     Rng rng(seed);
                     auto a = leaf({3, 4}, rng);
                     auto b = leaf({3, 4}, rng);
                     return gradcheck([&](auto const &in) { return against_target(sub(in[0], in[1]), seed); }, {a, b});
                   }});
  cases.push_back(unary_case("scale", {3, 4}, [](Tensor const &x) { return scale(x, -1.7); }));
  cases.push_back({"scale_by", [](std::uint64_t seed) {
                     Rng rng(seed);
                     auto a = leaf({3, 4}, rng);
                     auto s = leaf({1}, rng);
                     return gradcheck([&](auto const &in) { return against_target(scale_by(in[0], in[1]), seed); },
                                      {a, s});
                   }});
  cases.push_back(unary_case("reshape", {3, 4}, [](Tensor const &x) { return reshape(x, {2, 6}); }));
  cases.push_back(unary_case("select", {3, 2, 4}, [](Tensor const &x) { return select(x, 1); }));
  cases.push_back({"stack", [](std::uint64_t seed) {
                     Rng rng(seed);
                     auto a = leaf({2, 3}, rng);
                     auto b = leaf({2, 3}, rng);
                     return gradcheck([&](auto const &in) { return against_target(stack({in[0], in[1]}), seed); },
                                      {a, b});
                   }});
  cases.push_back({"relu", [](std::uint64_t seed) {
                     Rng rng(seed);
                     auto a = away_from(leaf({4, 5}, rng), 0.0, 1e-3);
                     return gradcheck([&](auto const &in) { return against_target(relu(in[0]), seed); }, {a});
                   }});
  cases.push_back({"mask_mul", [](std::uint64_t seed) {
                     Rng rng(seed);
                     auto a = leaf({4, 5}, rng);
                     auto const m = random_mask({4, 5}, rng);
                     return gradcheck([&](auto const &in) { return against_target(mask_mul(in[0], m), seed); }, {a});
                   }});
  cases.push_back({"soft_threshold", [](std::uint64_t seed) {
                     Rng rng(seed);
                     auto a = leaf({4, 5}, rng);
                     auto lambda = Tensor::parameter({1}, {cx{0.4, 0.0}});
                     // Keep magnitudes clear of the kink at |z| = lambda.
                     for (auto &e : a.mutable_data()) {
                       if (std::abs(std::abs(e) - 0.4) < 1e-2) { e *= 1.1; }
                     }
                     return gradcheck(
                       [&](auto const &in) { return against_target(soft_threshold(in[0], in[1]), seed); },
                       {a, lambda});
                   }});
  cases.push_back({"conv2d", [](std::uint64_t seed) {
                     Rng rng(seed);
                     auto x = leaf({2, 5, 5}, rng);
                     auto k = leaf({3, 2, 3, 3}, rng);
                     auto b = leaf({3}, rng);
                     return gradcheck(
                       [&](auto const &in) { return against_target(conv2d(in[0], in[1], in[2]), seed); }, {x, k, b});
                   }});
  cases.push_back({"conv2d_batched", [](std::uint64_t seed) {
                     Rng rng(seed);
                     auto x = leaf({2, 2, 4, 4}, rng);
                     auto k = leaf({3, 2, 3, 3}, rng);
                     return gradcheck([&](auto const &in) { return against_target(conv2d(in[0], in[1]), seed); },
                                      {x, k});
                   }});
  cases.push_back(unary_case("fft2", {2, 8, 4}, [](Tensor const &x) { return fft2(x); }));
  cases.push_back(unary_case("ifft2", {2, 8, 4}, [](Tensor const &x) { return fft2(x, true); }));
  cases.push_back(unary_case("fft_axis", {3, 4, 2}, [](Tensor const &x) { return fft_axis(x, 0); }));
  cases.push_back({"mse_loss", [](std::uint64_t seed) {
                     Rng rng(seed);
                     auto a = leaf({3, 4}, rng);
                     auto b = leaf({3, 4}, rng);
                     return gradcheck([&](auto const &in) { return mse_loss(in[0], in[1]); }, {a, b});
                   }});
  cases.push_back({"data_consistency", [](std::uint64_t seed) {
                     auto const s = toy_sample(seed);
                     Rng rng(mix_seed(seed, 3));
                     auto x = leaf({3, 8, 8}, rng);
                     return gradcheck(
                       [&](auto const &in) { return against_target(data_consistency(in[0], s.y_omega, s.masks.P), seed); },
                       {x});
                   }});
  cases.push_back({"co_loss", [](std::uint64_t seed) {
                     Rng rng(seed);
                     auto kt = leaf({2, 4, 4}, rng);
                     auto kl = leaf({2, 4, 4}, rng);
                     auto const P = random_mask({2, 4, 4}, rng);
                     auto const y = mask_mul(constant({2, 4, 4}, rng), P);
                     return gradcheck([&](auto const &in) { return co_loss(in[0], in[1], y, P, 0.3); }, {kt, kl});
                   }});
  cases.push_back(backbone_case("crnn_lite", BackboneKind::crnn_lite));
  cases.push_back(backbone_case("ista_unrolled", BackboneKind::ista_unrolled));
  cases.push_back({"selfcolearn_dual", [](std::uint64_t seed) {
                     auto const s = toy_sample(seed);
                     auto const theta = init_backbone(BackboneKind::crnn_lite, toy_hyper(), mix_seed(seed, 21));
                     auto const lambda = init_backbone(BackboneKind::crnn_lite, toy_hyper(), mix_seed(seed, 22));
                     TrainConfig cfg;
                     cfg.gamma = 0.5;
                     auto inputs = param_tensors(theta);
                     auto const more = param_tensors(lambda);
                     inputs.insert(inputs.end(), more.begin(), more.end());
                     return gradcheck(
                       [&](auto const &in) {
                         return selfcolearn_loss(with_params(theta, in), with_params(lambda, in, theta.params.size()),
                                                 s, cfg)
                           .l_co;
                       },
                       inputs, 1e-6);
                   }});
  return cases;
}

auto faulty_gradcheck_case() -> GradcheckCase
{
  return unary_case("faulty_identity", {3, 3}, [](Tensor const &x) {
    std::vector<cx> out(x.data().begin(), x.data().end());
    return make_result("faulty_identity", x.shape(), std::move(out), {x}, [](GradContext &ctx) {
      auto g = ctx.grad(0);
      auto const go = ctx.grad_out();
      for (std::size_t i = 0; i < g.size(); ++i) { g[i] += 3.0 * go[i]; }
    });
  });
}

auto run_gradcheck(std::vector<GradcheckCase> const &cases, std::size_t seeds, double tolerance)
  -> std::vector<GradcheckReport>
{
  std::vector<GradcheckReport> out;
  for (auto const &c : cases) {
    GradcheckReport r{c.name, 0.0, seeds, true};
    for (std::size_t s = 0; s < seeds; ++s) {
      double const err = c.run(mix_seed(0x67726164, s));
      r.max_rel_error = std::max(r.max_rel_error, std::isnan(err) ? INFINITY : err);
    }
    r.passed = r.max_rel_error < tolerance;
    out.push_back(r);
  }
  return out;
}

auto format_gradcheck_report(std::vector<GradcheckReport> const &reports) -> std::string
{
  std::string text;
  for (auto const &r : reports) {
    text += fmt::format("{} {} max_rel_error={:.3e} seeds={}\n", r.passed ? "PASS" : "FAIL", r.name, r.max_rel_error,
                        r.seeds);
  }
  return text;
}

} // namespace scl
