#include "cstalign/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cstalign/error.hpp"
#include "cstalign/simd/kernels.hpp"

namespace cstalign {

double lr_at(std::uint64_t step, std::uint64_t total_steps, double peak_lr, double warmup_fraction) {
  constexpr const char* kOp = "train-engine/lr_at";
  if (total_steps == 0) throw Error(ErrorKind::InvalidConfig, kOp, "total_steps must be > 0");
  if (step > total_steps) throw Error(ErrorKind::InvalidConfig, kOp, "step beyond total_steps");
  const auto warmup = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(std::llround(warmup_fraction * static_cast<double>(total_steps))));
  if (step < warmup) return peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
  if (warmup == total_steps) return peak_lr;
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

OptimizerState init_optimizer_state(std::span<const Matrix* const> params) {
  OptimizerState s;
  for (const Matrix* p : params) {
    s.m.emplace_back(p->rows(), p->cols());
    s.v.emplace_back(p->rows(), p->cols());
  }
  return s;
}

OptimizerState init_optimizer_state(const EncoderParams& params) {
  std::vector<const Matrix*> ptrs;
  for (const auto& t : params.tensors()) ptrs.push_back(t.tensor);
  return init_optimizer_state(ptrs);
}

void adamw_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
                OptimizerState& state, double lr, const AdamWHyper& hyper) {
  constexpr const char* kOp = "train-engine/adamw_step";
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw Error(ErrorKind::ShapeError, kOp, "parameter, gradient and state counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!same_shape(*params[i], *grads[i]) || !same_shape(*params[i], state.m[i]))
      throw Error(ErrorKind::ShapeError, kOp, "tensor " + std::to_string(i) + " shape mismatch");
    if (!grads[i]->all_finite())
      throw Error(ErrorKind::NonFiniteGradient, kOp, "tensor " + std::to_string(i));
  }
  const std::uint64_t t = state.step + 1;
  const simd::AdamWCoefficients c{
      lr,
      hyper.beta1,
      hyper.beta2,
      hyper.epsilon,
      hyper.weight_decay,
      1.0 - std::pow(hyper.beta1, static_cast<double>(t)),
      1.0 - std::pow(hyper.beta2, static_cast<double>(t)),
  };
  const auto& k = simd::active();
  for (std::size_t i = 0; i < params.size(); ++i)
    k.adamw(params[i]->data(), grads[i]->data(), state.m[i].data(), state.v[i].data(),
            params[i]->size(), c);
  state.step = t;
}

void adamw_step(EncoderParams& params, const EncoderParams& grads, OptimizerState& state, double lr,
                const AdamWHyper& hyper) {
  std::vector<Matrix*> p;
  std::vector<const Matrix*> g;
  for (auto& t : params.tensors()) p.push_back(t.tensor);
  for (const auto& t : grads.tensors()) g.push_back(t.tensor);
  adamw_step(p, g, state, lr, hyper);
}

}  // namespace cstalign
