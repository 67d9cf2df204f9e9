#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sslreg/rng.hpp"
#include "sslreg/tensor.hpp"

namespace sslreg {

struct GradCheckOptions {
  double step = 1e-4;       // central-difference half-width
  double tolerance = 1e-5;  // pass iff max relative error < tolerance
  std::size_t samples = 100;
  /// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-6;
};

struct GradCheckEntry {
  std::size_t tensor = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  bool passed = false;
};

/// Builds the loss on a fresh tape. Called once with recording enabled for the
/// analytic gradient and twice per sampled entry without recording.
using LossFn = std::function<Tensor<double>(Tape<double>&)>;

/// Compares reverse-mode gradients against central finite differences on
/// `samples` entries drawn uniformly (with replacement) from `params`.
/// 64-bit only: differences at h = 1e-4 are meaningless in single precision.
GradCheckReport grad_check(const LossFn& loss, std::span<Tensor<double>> params,
                           const GradCheckOptions& options, Rng& rng);

double relative_error(double analytic, double numeric, double floor);

}  // namespace sslreg
