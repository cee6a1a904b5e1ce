#include "cstalign/loss.hpp"

#include <algorithm>
#include <cmath>

#include "cstalign/error.hpp"

namespace cstalign {

SimilarityLogits similarity_matrix(const Matrix& V, const Matrix& T, double tau) {
  constexpr const char* kOp = "contrastive-loss/similarity_matrix";
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw Error(ErrorKind::InvalidTemperature, kOp, "tau must be positive, got " + std::to_string(tau));
  if (!same_shape(V, T)) throw Error(ErrorKind::ShapeError, kOp, "V and T shapes differ");
  SimilarityLogits out{matmul_nt(V, T), tau};
  scale(1.0 / tau, out.Z.values());
  return out;
}

Matrix log_softmax_rows(const Matrix& Z) {
  Matrix out(Z.rows(), Z.cols());
  for (std::size_t i = 0; i < Z.rows(); ++i) {
    const auto row = Z.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double z : row) sum += std::exp(z - mx);
    const double lse = mx + std::log(sum);
    auto dst = out.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) dst[j] = row[j] - lse;
  }
  return out;
}

void validate_targets(const Matrix& P, std::size_t n, const char* operation) {
  if (P.rows() != n || P.cols() != n)
    throw Error(ErrorKind::ShapeError, operation, "target matrix shape does not match logits");
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (double p : P.row(i)) {
      if (!(p >= 0.0)) throw Error(ErrorKind::InvalidTargets, operation, "negative or NaN target");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw Error(ErrorKind::InvalidTargets, operation,
                  "row " + std::to_string(i) + " sums to " + std::to_string(sum));
  }
}

namespace {

Matrix oriented(const SimilarityLogits& logits, Direction direction) {
  return direction == Direction::image_to_text ? logits.Z : logits.Z.transposed();
}

}  // namespace

double soft_infonce(const SimilarityLogits& logits, const SoftLabelMatrix& targets, Direction direction) {
  constexpr const char* kOp = "contrastive-loss/soft_infonce";
  const std::size_t n = logits.Z.rows();
  if (logits.Z.cols() != n) throw Error(ErrorKind::ShapeError, kOp, "logits must be square");
  validate_targets(targets.P, n, kOp);
  const Matrix log_probs = log_softmax_rows(oriented(logits, direction));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double p = targets.P(i, j);
      if (p != 0.0) total -= p * log_probs(i, j);
    }
  return total / static_cast<double>(n);
}

LossReport symmetric_loss(const Matrix& V, const Matrix& T, const SoftLabelMatrix& targets, double tau) {
  const auto logits = similarity_matrix(V, T, tau);
  LossReport r;
  r.loss_i2t = soft_infonce(logits, targets, Direction::image_to_text);
  r.loss_t2i = soft_infonce(logits, targets, Direction::text_to_image);
  r.loss_total = (r.loss_i2t + r.loss_t2i) / 2.0;
  return r;
}

Matrix direction_logit_gradient(const SimilarityLogits& logits, const SoftLabelMatrix& targets,
                                Direction direction) {
  constexpr const char* kOp = "contrastive-loss/loss_gradients";
  const std::size_t n = logits.Z.rows();
  if (logits.Z.cols() != n) throw Error(ErrorKind::ShapeError, kOp, "logits must be square");
  validate_targets(targets.P, n, kOp);
  Matrix g = log_softmax_rows(oriented(logits, direction));
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g(i, j) = (std::exp(g(i, j)) - targets.P(i, j)) * inv_n;
  return g;
}

Matrix logit_gradient(const SimilarityLogits& logits, const SoftLabelMatrix& targets) {
  const Matrix g_i2t = direction_logit_gradient(logits, targets, Direction::image_to_text);
  const Matrix g_t2i = direction_logit_gradient(logits, targets, Direction::text_to_image);
  const std::size_t n = g_i2t.rows();
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g(i, j) = 0.5 * (g_i2t(i, j) + g_t2i(j, i));
  return g;
}

EmbeddingGradients loss_gradients(const Matrix& V, const Matrix& T, const SimilarityLogits& logits,
                                  const SoftLabelMatrix& targets) {
  if (!same_shape(V, T) || logits.Z.rows() != V.rows())
    throw Error(ErrorKind::ShapeError, "contrastive-loss/loss_gradients", "embedding shapes disagree");
  Matrix dZ = logit_gradient(logits, targets);
  scale(1.0 / logits.tau, dZ.values());
  return {matmul_nn(dZ, T), matmul_tn(dZ, V)};
}

}  // namespace cstalign
