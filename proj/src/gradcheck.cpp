#include "sslreg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "sslreg/error.hpp"

namespace sslreg {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const LossFn& loss, std::span<Tensor<double>> params,
                           const GradCheckOptions& options, Rng& rng) {
  if (params.empty()) throw Error("grad_check: no parameters");
  std::size_t total = 0;
  for (auto& p : params) {
    p.zero_grad();
    total += p.size();
  }
  {
    Tape<double> tape;
    auto value = loss(tape);
    tape.backward(value);
  }

  auto evaluate = [&] {
    Tape<double> tape(false);
    return loss(tape).item();
  };

  GradCheckReport report;
  double sum = 0.0;
  for (std::size_t s = 0; s < options.samples; ++s) {
    std::size_t flat = uniform_index(rng, total);
    std::size_t t = 0;
    while (flat >= params[t].size()) flat -= params[t++].size();
    auto& p = params[t];
    const double analytic = p.has_grad() ? p.grad_view()[flat] : 0.0;

    const double original = p[flat];
    p[flat] = original + options.step;
    const double plus = evaluate();
    p[flat] = original - options.step;
    const double minus = evaluate();
    p[flat] = original;
    const double numeric = (plus - minus) / (2.0 * options.step);

    GradCheckEntry e{t, flat, analytic, numeric, relative_error(analytic, numeric, options.floor)};
    report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
    sum += e.rel_error;
    report.entries.push_back(e);
  }
  report.mean_rel_error = report.entries.empty() ? 0.0 : sum / static_cast<double>(report.entries.size());
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace sslreg
