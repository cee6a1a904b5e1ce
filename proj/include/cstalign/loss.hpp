#pragma once

#include "cstalign/matrix.hpp"
#include "cstalign/soft_target.hpp"

namespace cstalign {

inline constexpr double kDefaultTemperature = 0.07;

enum class Direction { image_to_text, text_to_image };

/// Z[i][j] = (v_i . t_j) / tau.
struct SimilarityLogits {
  Matrix Z;
  double tau = kDefaultTemperature;
};

struct LossReport {
  double loss_i2t = 0.0;
  double loss_t2i = 0.0;
  double loss_total = 0.0;
};

SimilarityLogits similarity_matrix(const Matrix& V, const Matrix& T, double tau);

// Row-wise log-softmax.
Matrix log_softmax_rows(const Matrix& Z);

/// Soft-target cross-entropy: -(1/N) sum_i sum_j P[i][j] log softmax_row(Z')[i][j]
/// with Z' = Z for image-to-text and Z^T for text-to-image.
double soft_infonce(const SimilarityLogits& logits, const SoftLabelMatrix& targets, Direction direction);

LossReport symmetric_loss(const Matrix& V, const Matrix& T, const SoftLabelMatrix& targets, double tau);

/// dL_dir / dZ' = (softmax_row(Z') - P) / N for one direction, in Z' coordinates.
Matrix direction_logit_gradient(const SimilarityLogits& logits, const SoftLabelMatrix& targets,
                                Direction direction);

/// Gradient of loss_total = (L_i2t + L_t2i) / 2 with respect to Z.
Matrix logit_gradient(const SimilarityLogits& logits, const SoftLabelMatrix& targets);

struct EmbeddingGradients {
  Matrix dV;
  Matrix dT;
};

/// Chains logit_gradient through Z = V T^T / tau.
EmbeddingGradients loss_gradients(const Matrix& V, const Matrix& T, const SimilarityLogits& logits,
                                  const SoftLabelMatrix& targets);

// Throws InvalidTargets unless P is square, non-negative, and row-stochastic to 1e-9.
void validate_targets(const Matrix& P, std::size_t n, const char* operation);

}  // namespace cstalign
