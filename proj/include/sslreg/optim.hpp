#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sslreg/model.hpp"

namespace sslreg {

/// Linear warmup from 0 to lr_max over the first warmup_proportion * total
/// steps, then linear decay to 0 at total_steps.
double lr_at(double step, double total_steps, double warmup_proportion, double lr_max);

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-6;
  double weight_decay = 0.1;
};

/// One bias-corrected Adam step on a single tensor with decoupled weight
/// decay (p <- p - lr*wd*p, applied separately from the moment update).
/// `step` is 1-based.
template <class T>
void adamw_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v, std::size_t step,
                  double lr, const AdamWOptions& options, bool apply_decay);

/// Moment buffers for every model parameter; biases and layer-norm parameters
/// are exempt from weight decay.
template <class T>
class AdamW {
 public:
  AdamW(const ModelParams<T>& params, AdamWOptions options);

  /// Consumes the accumulated gradients; does not clear them.
  void step(double lr);
  std::size_t steps() const noexcept { return step_; }
  const AdamWOptions& options() const noexcept { return options_; }

 private:
  struct Slot {
    Tensor<T> param;
    bool decay;
    std::vector<T> m, v;
  };
  std::vector<Slot> slots_;
  AdamWOptions options_;
  std::size_t step_ = 0;
};

}  // namespace sslreg
