#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cstalign/matrix.hpp"
#include "cstalign/synth.hpp"
#include "cstalign/vocab.hpp"

namespace cstalign {

inline constexpr double kDefaultAlpha = 0.1;  // same-crop smoothing mass
inline constexpr double kDefaultBeta = 0.05;  // same-condition smoothing mass

/// Batch-level target matrix. Row i puts 1 - a - b on the diagonal, a / N_crop
/// on every other member with the same crop and a different condition, and
/// b / N_condition on every member with the same condition and a different
/// crop, where N_* counts such partners in the batch. When a row has no
/// partner of a kind, that mass stays on the diagonal.
struct SoftLabelMatrix {
  Matrix P;
  double alpha = 0.0;
  double beta = 0.0;
};

SoftLabelMatrix build_soft_label_matrix(std::span<const Concept> concepts, double alpha, double beta);

// One-hot targets (plain contrastive pairing).
SoftLabelMatrix hard_label_matrix(std::size_t n);

void validate_smoothing(double alpha, double beta, const char* operation);

struct BatchPlan {
  std::vector<std::vector<std::size_t>> batches;  // indices into Dataset::samples
  std::vector<std::size_t> deferred;              // carried into the next epoch

  std::size_t sample_count() const;
  bool operator==(const BatchPlan&) const = default;
};

/// Class-distinct batching over the training split. Each epoch shuffles the
/// training samples (deferred ones first) and places each into the first open
/// batch that lacks its class, closing batches when they reach `batch_size`.
/// Leftovers become a final short batch when pairwise class-distinct, and are
/// otherwise deferred to the next epoch.
class BatchSampler {
 public:
  BatchSampler(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed);

  BatchPlan next_epoch();
  std::size_t batch_size() const noexcept { return batch_size_; }

 private:
  const Dataset* dataset_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::vector<std::size_t> train_;
  std::vector<std::size_t> deferred_;
};

// First-epoch plan of a fresh sampler.
BatchPlan sample_batches(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed);

}  // namespace cstalign
