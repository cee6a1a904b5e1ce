#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cstalign/encoder.hpp"
#include "cstalign/matrix.hpp"

namespace cstalign {

/// Linear warmup from 0 to `peak_lr` over the first max(1, round(warmup_fraction *
/// total_steps)) steps, then half-cosine decay to 0 at `total_steps`.
double lr_at(std::uint64_t step, std::uint64_t total_steps, double peak_lr, double warmup_fraction);

struct AdamWHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.2;
};

struct OptimizerState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t step = 0;

  bool operator==(const OptimizerState&) const = default;
};

OptimizerState init_optimizer_state(std::span<const Matrix* const> params);
OptimizerState init_optimizer_state(const EncoderParams& params);

/// Decoupled weight decay with bias-corrected moments:
///   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
/// Throws NonFiniteGradient, leaving params and state untouched, if any
/// gradient entry is NaN or infinite.
void adamw_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
                OptimizerState& state, double lr, const AdamWHyper& hyper);
void adamw_step(EncoderParams& params, const EncoderParams& grads, OptimizerState& state, double lr,
                const AdamWHyper& hyper);

}  // namespace cstalign
