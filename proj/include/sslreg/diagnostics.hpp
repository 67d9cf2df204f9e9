#pragma once

// Finite-difference checks of every model loss on a small random model.

#include <cstdint>
#include <string>
#include <vector>

#include "sslreg/gradcheck.hpp"
#include "sslreg/model.hpp"

namespace sslreg {

/// 2 layers, d_model 16, no dropout.
ModelShape gradcheck_shape();

struct LossGradCheck {
  std::string loss;  // classification, mtp, satp, joint_mtp, joint_satp
  GradCheckReport report;
};

/// Random parameters and a random 3-example batch drawn from `seed`; each
/// loss is checked against all parameters in 64-bit.
std::vector<LossGradCheck> check_model_gradients(std::uint64_t seed, const GradCheckOptions& options,
                                                 const ModelShape& shape = gradcheck_shape(), double lambda = 0.5);

}  // namespace sslreg
