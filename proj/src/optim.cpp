#include "sslreg/optim.hpp"

#include <cmath>

#include "sslreg/error.hpp"

namespace sslreg {

double lr_at(double step, double total_steps, double warmup_proportion, double lr_max) {
  if (total_steps <= 0) throw Error("lr_at: total_steps must be positive");
  if (!(warmup_proportion >= 0.0 && warmup_proportion < 1.0))
    throw Error("lr_at: warmup_proportion must be in [0, 1)");
  if (step <= 0 && warmup_proportion > 0) return 0.0;
  if (step >= total_steps) return 0.0;
  const double warmup = warmup_proportion * total_steps;
  if (step < warmup) return lr_max * step / warmup;
  return lr_max * (total_steps - step) / (total_steps - warmup);
}

template <class T>
void adamw_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v, std::size_t step,
                  double lr, const AdamWOptions& o, bool apply_decay) {
  if (step == 0) throw Error("adamw_update: step is 1-based");
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size())
    throw Error("adamw_update: buffer sizes differ");
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
  const double decay = apply_decay ? lr * o.weight_decay : 0.0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double mi = o.beta1 * static_cast<double>(m[i]) + (1.0 - o.beta1) * g;
    const double vi = o.beta2 * static_cast<double>(v[i]) + (1.0 - o.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    double p = static_cast<double>(param[i]);
    p -= decay * p;
    p -= lr * (mi / bc1) / (std::sqrt(vi / bc2) + o.eps);
    param[i] = static_cast<T>(p);
  }
}

template <class T>
AdamW<T>::AdamW(const ModelParams<T>& params, AdamWOptions options) : options_(options) {
  for (auto& np : params.named())
    slots_.push_back({np.tensor, np.decay, std::vector<T>(np.tensor.size(), T(0)),
                      std::vector<T>(np.tensor.size(), T(0))});
}

template <class T>
void AdamW<T>::step(double lr) {
  ++step_;
  for (auto& s : slots_) {
    if (!s.param.has_grad()) s.param.grad();
    adamw_update<T>(s.param.data(), s.param.grad_view(), s.m, s.v, step_, lr, options_, s.decay);
  }
}

template void adamw_update<float>(std::span<float>, std::span<const float>, std::span<float>, std::span<float>,
                                  std::size_t, double, const AdamWOptions&, bool);
template void adamw_update<double>(std::span<double>, std::span<const double>, std::span<double>,
                                   std::span<double>, std::size_t, double, const AdamWOptions&, bool);
template class AdamW<float>;
template class AdamW<double>;

}  // namespace sslreg
