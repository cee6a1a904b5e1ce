#include <cmath>

#include "cstalign/simd/kernels.hpp"

namespace cstalign::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void adamw_scalar(double* param, const double* grad, double* m, double* v, std::size_t n,
                  const AdamWCoefficients& c) {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + one_minus_b1 * g;
    v[i] = c.beta2 * v[i] + one_minus_b2 * (g * g);
    const double m_hat = m[i] / c.bias_correction1;
    const double v_hat = v[i] / c.bias_correction2;
    const double update = m_hat / (std::sqrt(v_hat) + c.epsilon) + c.weight_decay * param[i];
    param[i] = param[i] - c.lr * update;
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Level::scalar,  dot_scalar,   squared_distance_scalar,
                                 axpy_scalar,    scale_scalar, adamw_scalar};
  return table;
}

}  // namespace cstalign::simd
