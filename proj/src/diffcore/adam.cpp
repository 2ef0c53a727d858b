#include "selfcolearn/adam.hpp"

#include "selfcolearn/error.hpp"

#include <cmath>
#include <fmt/format.h>

namespace scl {

AdamState::AdamState(AdamConfig cfg)
  : config{cfg}
{
  if (!(config.lr > 0.0)) { throw NumericError(fmt::format("adam: learning rate must be positive, got {}", config.lr)); }
}

void adam_step(ParamSet &params, AdamState &state)
{
  if (state.m.empty()) {
    for (auto const &p : params) {
      state.m.emplace_back(p.tensor.numel());
      state.v.emplace_back(p.tensor.numel());
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError(fmt::format("adam: state tracks {} parameters, got {}", state.m.size(), params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto const &t = params[i].tensor;
    if (state.m[i].size() != t.numel()) {
      throw ShapeError(fmt::format("adam: parameter '{}' changed size", params[i].name));
    }
    for (auto const &g : t.grad()) {
      if (!std::isfinite(g.real()) || !std::isfinite(g.imag())) {
        throw NumericError(fmt::format("adam: non-finite gradient for parameter '{}'", params[i].name));
      }
    }
  }

  auto const &c = state.config;
  state.step_count += 1;
  double const t = static_cast<double>(state.step_count);
  double const bc1 = 1.0 - std::pow(c.beta1, t);
  double const bc2 = 1.0 - std::pow(c.beta2, t);
  auto update = [&](double &p, double &m, double &v, double g) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    p -= c.lr * (m / bc1) / (std::sqrt(v / bc2) + c.epsilon);
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto &t = params[i].tensor;
    auto data = t.mutable_data();
    auto const grad = t.grad();
    auto &m = state.m[i];
    auto &v = state.v[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      cx const g = grad.empty() ? cx{} : grad[j];
      double pr = data[j].real(), pi = data[j].imag();
      double mr = m[j].real(), mi = m[j].imag();
      double vr = v[j].real(), vi = v[j].imag();
      update(pr, mr, vr, g.real());
      update(pi, mi, vi, g.imag());
      data[j] = {pr, pi};
      m[j] = {mr, mi};
      v[j] = {vr, vi};
    }
  }
}

} // namespace scl
