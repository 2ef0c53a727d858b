#pragma once

#include "tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace scl {

using ScalarFn = std::function<Tensor(std::vector<Tensor> const &)>;

/// Compares backward() against central finite differences on the real and
/// imaginary component of every entry of every input. Returns the largest
/// per-input relative error ||g_analytic - g_numeric|| / max(norms), where the
/// denominator is floored at 1% of the largest input gradient norm.
/// Inputs must be leaves; their data is restored afterwards.
auto gradcheck(ScalarFn const &fn, std::vector<Tensor> const &inputs, double step = 1e-5) -> double;

struct GradcheckCase
{
  std::string name;
  /// Builds a random instance from the seed and returns its relative error.
  std::function<double(std::uint64_t)> run;
};

struct GradcheckReport
{
  std::string name;
  double max_rel_error = 0.0;
  std::size_t seeds = 0;
  bool passed = false;
};

/// Every differentiable operation plus both backbones (2 iterations, 4
/// filters, 8x8x3) and the co-training loss through two networks.
auto default_gradcheck_cases() -> std::vector<GradcheckCase>;

/// An identity op whose backward is deliberately wrong; used to check that
/// the harness reports failures.
auto faulty_gradcheck_case() -> GradcheckCase;

auto run_gradcheck(std::vector<GradcheckCase> const &cases, std::size_t seeds = 5, double tolerance = 1e-4)
  -> std::vector<GradcheckReport>;

/// One line per case: "PASS|FAIL name max_rel_error=... seeds=N".
auto format_gradcheck_report(std::vector<GradcheckReport> const &reports) -> std::string;

} // namespace scl
