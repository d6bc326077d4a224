#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "freqdoc/encoder.hpp"

namespace freqdoc {

struct GradCheckOptions {
  int side = 32;
  int trials = 3;
  int coords_per_tensor = 20;
  double eps = 1e-3;
  // Standard deviation of the noise added to every parameter per trial, so
  // that norm gains and biases are not at their degenerate init values.
  double jitter = 0.1;
  std::uint64_t seed = 0;
  // Test hook: lets a fixture tamper with the analytic gradients.
  std::function<void(ParamSet<double>& param_grads, Matrix<double>& input_grad)> backward_override;
};

struct GradCheckEntry {
  std::string name;  // parameter name, or "input"
  double max_rel_error = 0.0;
  int checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  int trials = 0;
};

/// Compares analytic gradients of sum(project_tokens(encoder_forward(x)))
/// against central differences at a random subset of coordinates of every
/// tensor. Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport grad_check(const EncoderConfig& cfg, const GradCheckOptions& opts = {});

}  // namespace freqdoc
