#include "selfcolearn/models.hpp"

#include "selfcolearn/checkpoint.hpp"
#include "selfcolearn/error.hpp"
#include "selfcolearn/ops.hpp"
#include "selfcolearn/rng.hpp"

#include <cmath>
#include <fmt/format.h>

namespace scl {

namespace {

constexpr char const *kHeaderName = "@model";

auto uniform_weights(Shape shape, std::size_t fan_in, Rng &rng) -> Tensor
{
  double const a = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::vector<cx> values(numel_of(shape));
  for (auto &v : values) {
    double const re = rng.uniform(-a, a);
    double const im = rng.uniform(-a, a);
    v = {re, im};
  }
  return Tensor::parameter(std::move(shape), std::move(values));
}

auto zero_param(Shape shape) -> Tensor
{
  auto const n = numel_of(shape);
  return Tensor::parameter(std::move(shape), std::vector<cx>(n));
}

auto filled_param(double value) -> Tensor { return Tensor::parameter({1}, {cx{value, 0.0}}); }

auto ista_name(std::size_t i, char const *what) -> std::string { return fmt::format("it{}.{}", i, what); }

// Shapes every parameter of a model must have, in canonical order.
auto expected_shapes(BackboneKind kind, BackboneHyper const &h) -> std::vector<std::pair<std::string, Shape>>
{
  auto const k = h.kernel;
  if (kind == BackboneKind::crnn_lite) {
    auto const f = h.filters;
    return {{"x2h.w", {f, 1, k, k}},  {"x2h.b", {f}},     {"i2h.w", {f, f, k, k}}, {"h2h.w", {f, f, k, k}},
            {"conv.w", {f, f, k, k}}, {"conv.b", {f}},    {"proj.w", {1, f, k, k}}, {"proj.b", {1}}};
  }
  std::vector<std::pair<std::string, Shape>> out;
  auto const s = h.sparse_channels;
  for (std::size_t i = 0; i < h.iterations; ++i) {
    out.push_back({ista_name(i, "eta"), {1}});
    out.push_back({ista_name(i, "lambda"), {1}});
    out.push_back({ista_name(i, "D.w"), {s, 1, k, k}});
    out.push_back({ista_name(i, "Dt.w"), {1, s, k, k}});
  }
  return out;
}

// [T, H, W] <-> [T, 1, H, W] for batched per-frame convolution.
auto as_batch(Tensor const &x) -> Tensor { return reshape(x, {x.dim(0), 1, x.dim(1), x.dim(2)}); }
auto from_batch(Tensor const &x) -> Tensor { return reshape(x, {x.dim(0), x.dim(2), x.dim(3)}); }

void check_inputs(char const *op, Tensor const &y, SamplingMask const &P)
{
  if (y.rank() != 3 || y.shape() != P.mask.shape) {
    throw ShapeError(fmt::format("{}: k-space {} does not match mask {}", op, shape_string(y.shape()),
                                 shape_string(P.mask.shape)));
  }
}

} // namespace

auto to_string(BackboneKind kind) -> std::string
{
  switch (kind) {
  case BackboneKind::crnn_lite: return "crnn_lite";
  case BackboneKind::ista_unrolled: return "ista_unrolled";
  }
  throw Error("unknown backbone kind");
}

auto parse_backbone_kind(std::string_view name) -> BackboneKind
{
  if (name == "crnn_lite") { return BackboneKind::crnn_lite; }
  if (name == "ista_unrolled") { return BackboneKind::ista_unrolled; }
  throw ConfigError(fmt::format("unknown backbone '{}' (expected crnn_lite or ista_unrolled)", name));
}

void validate_hyper(BackboneHyper const &h)
{
  if (h.iterations < 1) { throw ConfigError("backbone: iterations must be >= 1"); }
  if (h.filters < 1) { throw ConfigError("backbone: filters must be >= 1"); }
  if (h.sparse_channels < 1) { throw ConfigError("backbone: sparse_channels must be >= 1"); }
  if (h.kernel % 2 == 0) { throw ConfigError(fmt::format("backbone: kernel size {} must be odd", h.kernel)); }
  if (!(h.init_lambda >= 0.0) || !(h.init_eta > 0.0)) {
    throw ConfigError("backbone: initial lambda must be >= 0 and eta > 0");
  }
}

auto init_backbone(BackboneKind kind, BackboneHyper const &hyper, std::uint64_t seed) -> BackboneModel
{
  validate_hyper(hyper);
  BackboneModel model{kind, hyper, {}};
  Rng rng(seed);
  for (auto const &[name, shape] : expected_shapes(kind, hyper)) {
    Tensor t;
    if (name.ends_with(".b")) {
      t = zero_param(shape);
    } else if (name.ends_with(".eta")) {
      t = filled_param(hyper.init_eta);
    } else if (name.ends_with(".lambda")) {
      t = filled_param(hyper.init_lambda);
    } else {
      t = uniform_weights(shape, shape[1] * shape[2] * shape[3], rng);
    }
    model.params.push_back({name, std::move(t)});
  }
  return model;
}

auto crnn_forward(BackboneModel const &model, Tensor const &y, SamplingMask const &P) -> Tensor
{
  if (model.kind != BackboneKind::crnn_lite) { throw Error("crnn_forward: model is not crnn_lite"); }
  check_inputs("crnn_forward", y, P);
  auto const T = y.dim(0);
  auto const &x2h_w = model.param("x2h.w");
  auto const &x2h_b = model.param("x2h.b");
  auto const &i2h_w = model.param("i2h.w");
  auto const &h2h_w = model.param("h2h.w");
  auto const &conv_w = model.param("conv.w");
  auto const &conv_b = model.param("conv.b");
  auto const &proj_w = model.param("proj.w");
  auto const &proj_b = model.param("proj.b");

  auto x = zero_filled(y, P);
  Tensor hidden; // [T, nf, H, W] from the previous iteration
  for (std::size_t n = 0; n < model.hyper.iterations; ++n) {
    auto drive = conv2d(as_batch(x), x2h_w, x2h_b);
    if (hidden.defined()) { drive = add(drive, conv2d(hidden, i2h_w)); }

    std::vector<Tensor> fwd(T);
    std::vector<Tensor> bwd(T);
    for (std::size_t t = 0; t < T; ++t) {
      auto pre = select(drive, t);
      if (t > 0) { pre = add(pre, conv2d(fwd[t - 1], h2h_w)); }
      fwd[t] = relu(pre);
    }
    for (std::size_t t = T; t-- > 0;) {
      auto pre = select(drive, t);
      if (t + 1 < T) { pre = add(pre, conv2d(bwd[t + 1], h2h_w)); }
      bwd[t] = relu(pre);
    }
    std::vector<Tensor> merged(T);
    for (std::size_t t = 0; t < T; ++t) { merged[t] = add(fwd[t], bwd[t]); }
    hidden = stack(merged);

    auto const features = relu(conv2d(hidden, conv_w, conv_b));
    auto const residual = from_batch(conv2d(features, proj_w, proj_b));
    x = data_consistency(add(x, residual), y, P);
  }
  return x;
}

auto ista_forward(BackboneModel const &model, Tensor const &y, SamplingMask const &P) -> Tensor
{
  if (model.kind != BackboneKind::ista_unrolled) { throw Error("ista_forward: model is not ista_unrolled"); }
  check_inputs("ista_forward", y, P);
  auto x = zero_filled(y, P);
  for (std::size_t i = 0; i < model.hyper.iterations; ++i) {
    // A^H (A x - y) with A = P fft2; y already vanishes off P.
    auto const residual = fft2(sub(mask_mul(fft2(x), P.mask), y), true);
    x = sub(x, scale_by(residual, model.param(ista_name(i, "eta"))));

    auto const xf = fft_axis(x, 0);
    auto const coeffs = conv2d(as_batch(xf), model.param(ista_name(i, "D.w")));
    auto const shrunk = soft_threshold(coeffs, model.param(ista_name(i, "lambda")));
    x = fft_axis(from_batch(conv2d(shrunk, model.param(ista_name(i, "Dt.w")))), 0, true);

    x = data_consistency(x, y, P);
  }
  return x;
}

auto forward(BackboneModel const &model, Tensor const &y, SamplingMask const &P) -> Tensor
{
  switch (model.kind) {
  case BackboneKind::crnn_lite: return crnn_forward(model, y, P);
  case BackboneKind::ista_unrolled: return ista_forward(model, y, P);
  }
  throw Error("forward: unknown backbone kind");
}

void project_constraints(BackboneModel &model, double min_eta)
{
  if (model.kind != BackboneKind::ista_unrolled) { return; }
  for (auto &[name, t] : model.params) {
    bool const eta = name.ends_with(".eta");
    if (!eta && !name.ends_with(".lambda")) { continue; }
    auto v = t.mutable_data();
    for (auto &e : v) { e = {std::max(e.real(), eta ? min_eta : 0.0), 0.0}; }
  }
}

void validate_model(BackboneModel const &model)
{
  validate_hyper(model.hyper);
  auto const expected = expected_shapes(model.kind, model.hyper);
  if (expected.size() != model.params.size()) {
    throw Error(fmt::format("model: expected {} parameters, found {}", expected.size(), model.params.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    auto const &[name, t] = model.params[i];
    if (name != expected[i].first || t.shape() != expected[i].second) {
      throw Error(fmt::format("model: parameter {} is '{}' {}, expected '{}' {}", i, name, shape_string(t.shape()),
                              expected[i].first, shape_string(expected[i].second)));
    }
    for (auto const &v : t.data()) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
        throw NumericError(fmt::format("model: parameter '{}' is not finite", name));
      }
    }
    if (name.ends_with(".eta") && !(t.data()[0].real() > 0.0)) {
      throw Error(fmt::format("model: step '{}' must be positive", name));
    }
    if (name.ends_with(".lambda") && !(t.data()[0].real() >= 0.0)) {
      throw Error(fmt::format("model: threshold '{}' must be non-negative", name));
    }
  }
}

void save_model(std::filesystem::path const &path, BackboneModel const &model)
{
  auto const &h = model.hyper;
  std::vector<cx> header{static_cast<double>(model.kind),
                         static_cast<double>(h.iterations),
                         static_cast<double>(h.filters),
                         static_cast<double>(h.kernel),
                         static_cast<double>(h.sparse_channels),
                         {h.init_lambda, h.init_eta}};
  ParamSet records;
  auto const n = header.size();
  records.push_back({kHeaderName, Tensor({n}, std::move(header))});
  for (auto const &p : model.params) { records.push_back({p.name, p.tensor.detach()}); }
  save_tensors(path, records);
}

auto load_model(std::filesystem::path const &path) -> BackboneModel
{
  auto records = load_tensors(path);
  if (records.empty() || records.front().name != kHeaderName || records.front().tensor.numel() != 6) {
    throw FormatError(fmt::format("{}: missing '{}' header record", path.string(), kHeaderName));
  }
  auto const hv = records.front().tensor.data();
  auto const as_size = [&](std::size_t i) {
    double const v = hv[i].real();
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e9) {
      throw FormatError(fmt::format("{}: malformed '{}' header", path.string(), kHeaderName));
    }
    return static_cast<std::size_t>(v);
  };
  auto const kind_id = as_size(0);
  if (kind_id > 1) { throw FormatError(fmt::format("{}: unknown backbone kind {}", path.string(), kind_id)); }
  BackboneModel model;
  model.kind = static_cast<BackboneKind>(kind_id);
  model.hyper = {as_size(1), as_size(2), as_size(3), as_size(4), hv[5].real(), hv[5].imag()};
  for (std::size_t i = 1; i < records.size(); ++i) {
    auto t = records[i].tensor;
    t.set_requires_grad(true);
    model.params.push_back({records[i].name, std::move(t)});
  }
  try {
    validate_model(model);
  } catch (Error const &e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return model;
}

} // namespace scl
