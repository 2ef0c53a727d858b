#pragma once

#include "tensor.hpp"

#include <cstdint>
#include <vector>

namespace scl {

struct AdamConfig
{
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam, applied independently to the real and imaginary
/// component of every entry. The second-moment buffers store the real-part
/// and imaginary-part moments in the corresponding components.
struct AdamState
{
  AdamConfig config;
  std::vector<std::vector<cx>> m;
  std::vector<std::vector<cx>> v;
  std::uint64_t step_count = 0;

  explicit AdamState(AdamConfig cfg = {});
};

/// One update over every parameter. Parameters without a gradient are treated
/// as having a zero gradient. Throws NumericError naming the parameter if a
/// gradient is non-finite; nothing is modified in that case.
void adam_step(ParamSet &params, AdamState &state);

} // namespace scl
