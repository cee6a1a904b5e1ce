#include "cstalign/soft_target.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "cstalign/error.hpp"
#include "cstalign/rng.hpp"

namespace cstalign {

void validate_smoothing(double alpha, double beta, const char* operation) {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(alpha + beta < 1.0) || !std::isfinite(alpha) ||
      !std::isfinite(beta))
    throw Error(ErrorKind::InvalidConfig, operation,
                "need alpha >= 0, beta >= 0 and alpha + beta < 1 (alpha=" + std::to_string(alpha) +
                    ", beta=" + std::to_string(beta) + ")");
}

SoftLabelMatrix build_soft_label_matrix(std::span<const Concept> concepts, double alpha, double beta) {
  constexpr const char* kOp = "soft-target/build_soft_label_matrix";
  validate_smoothing(alpha, beta, kOp);
  const std::size_t n = concepts.size();
  if (n == 0) throw Error(ErrorKind::EmptySet, kOp, "empty batch");
  std::set<std::pair<std::string_view, std::string_view>> seen;
  for (const auto& c : concepts)
    if (!seen.emplace(c.crop, c.condition).second)
      throw Error(ErrorKind::DuplicateClassInBatch, kOp, "(" + c.crop + ", " + c.condition + ")");

  SoftLabelMatrix out{Matrix(n, n), alpha, beta};
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t n_crop = 0, n_condition = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      const bool same_crop = concepts[k].crop == concepts[i].crop;
      const bool same_condition = concepts[k].condition == concepts[i].condition;
      if (same_crop && !same_condition) ++n_crop;
      if (!same_crop && same_condition) ++n_condition;
    }
    const double a = n_crop > 0 ? alpha : 0.0;
    const double b = n_condition > 0 ? beta : 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const bool same_crop = concepts[k].crop == concepts[i].crop;
      const bool same_condition = concepts[k].condition == concepts[i].condition;
      double w = 0.0;
      if (k == i)
        w = 1.0 - a - b;
      else if (same_crop && !same_condition)
        w = a / static_cast<double>(n_crop);
      else if (!same_crop && same_condition)
        w = b / static_cast<double>(n_condition);
      out.P(i, k) = w;
    }
  }
  return out;
}

SoftLabelMatrix hard_label_matrix(std::size_t n) { return {Matrix::identity(n), 0.0, 0.0}; }

std::size_t BatchPlan::sample_count() const {
  std::size_t n = 0;
  for (const auto& b : batches) n += b.size();
  return n;
}

BatchSampler::BatchSampler(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed)
    : dataset_(&dataset), batch_size_(batch_size), seed_(seed), train_(dataset.indices(Split::train)) {
  constexpr const char* kOp = "soft-target/sample_batches";
  const auto classes = dataset.classes_in(Split::train);
  if (classes.empty()) throw Error(ErrorKind::EmptySet, kOp, "no training samples");
  if (batch_size == 0) throw Error(ErrorKind::InvalidConfig, kOp, "batch_size must be >= 1");
  if (batch_size > classes.size())
    throw Error(ErrorKind::BatchTooLarge, kOp,
                "batch_size " + std::to_string(batch_size) + " exceeds " +
                    std::to_string(classes.size()) + " training classes");
}

BatchPlan BatchSampler::next_epoch() {
  Rng rng(derive_seed(seed_, epoch_++));
  std::vector<std::size_t> fresh = train_;
  rng.shuffle(std::span(fresh));

  // Deferred samples lead; each sample still appears at most once per epoch.
  std::vector<std::size_t> order = deferred_;
  std::set<std::size_t> leading(deferred_.begin(), deferred_.end());
  for (auto idx : fresh)
    if (!leading.contains(idx)) order.push_back(idx);

  struct Open {
    std::vector<std::size_t> members;
    std::set<int> classes;
  };
  std::vector<Open> open;
  BatchPlan plan;
  for (auto idx : order) {
    const int cls = dataset_->samples[idx].concept_id;
    auto it = std::find_if(open.begin(), open.end(),
                           [&](const Open& b) { return !b.classes.contains(cls); });
    if (it == open.end()) it = open.insert(open.end(), Open{});
    it->members.push_back(idx);
    it->classes.insert(cls);
    if (it->members.size() == batch_size_) {
      plan.batches.push_back(std::move(it->members));
      open.erase(it);
    }
  }

  std::vector<std::size_t> leftover;
  std::set<int> leftover_classes;
  bool distinct = true;
  for (auto& b : open)
    for (auto idx : b.members) {
      leftover.push_back(idx);
      distinct &= leftover_classes.insert(dataset_->samples[idx].concept_id).second;
    }
  deferred_.clear();
  if (!leftover.empty()) {
    if (distinct && leftover.size() <= batch_size_)
      plan.batches.push_back(std::move(leftover));
    else
      deferred_ = std::move(leftover);
  }
  plan.deferred = deferred_;
  return plan;
}

BatchPlan sample_batches(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed) {
  return BatchSampler(dataset, batch_size, seed).next_epoch();
}

}  // namespace cstalign
