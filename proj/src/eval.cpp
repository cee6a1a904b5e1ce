#include "cstalign/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cstalign/error.hpp"
#include "cstalign/optim.hpp"
#include "cstalign/rng.hpp"

namespace cstalign {

std::string_view to_string(Grouping grouping) {
  switch (grouping) {
    case Grouping::by_class: return "class";
    case Grouping::by_crop: return "crop";
    case Grouping::by_condition: return "condition";
  }
  return "class";
}

std::vector<int> nearest_class(const Matrix& image_embeddings, const Matrix& class_embeddings) {
  if (class_embeddings.rows() == 0)
    throw Error(ErrorKind::EmptyClassSet, "eval-suite/zero_shot_classify", "no class prompts");
  const Matrix scores = matmul_nt(image_embeddings, class_embeddings);
  std::vector<int> pred(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto row = scores.row(i);
    pred[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return pred;
}

double zero_shot_classify(const Matrix& image_embeddings, const Matrix& class_embeddings,
                          std::span<const int> true_labels) {
  if (true_labels.size() != image_embeddings.rows())
    throw Error(ErrorKind::ShapeError, "eval-suite/zero_shot_classify", "label count mismatch");
  const auto pred = nearest_class(image_embeddings, class_embeddings);
  if (pred.empty()) throw Error(ErrorKind::EmptySet, "eval-suite/zero_shot_classify", "no images");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == true_labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

std::map<int, double> labeled_recall(const Matrix& queries, std::span<const int> query_labels,
                                     const Matrix& candidates, std::span<const int> candidate_labels,
                                     std::span<const int> ks) {
  constexpr const char* kOp = "eval-suite/recall_at_k";
  if (queries.rows() == 0 || candidates.rows() == 0) throw Error(ErrorKind::EmptySet, kOp, "no rows");
  if (query_labels.size() != queries.rows() || candidate_labels.size() != candidates.rows())
    throw Error(ErrorKind::ShapeError, kOp, "label count mismatch");
  const Matrix scores = matmul_nt(queries, candidates);
  std::map<int, std::size_t> hits;
  for (int k : ks) hits[k] = 0;
  for (std::size_t q = 0; q < scores.rows(); ++q) {
    const auto row = scores.row(q);
    // Best-ranked relevant candidate; its rank is the number of candidates ahead of it.
    std::size_t best = row.size();
    for (std::size_t c = 0; c < row.size(); ++c)
      if (candidate_labels[c] == query_labels[q] && (best == row.size() || row[c] > row[best]))
        best = c;
    if (best == row.size()) continue;
    std::size_t rank = 0;
    for (std::size_t c = 0; c < row.size(); ++c)
      rank += row[c] > row[best] || (row[c] == row[best] && c < best);
    for (int k : ks)
      if (k > 0 && rank < static_cast<std::size_t>(k)) ++hits[k];
  }
  std::map<int, double> out;
  for (auto [k, h] : hits) out[k] = static_cast<double>(h) / static_cast<double>(scores.rows());
  return out;
}

RetrievalResult recall_at_k(const Matrix& V, const Matrix& T, std::span<const int> ks) {
  if (V.rows() == 0) throw Error(ErrorKind::EmptySet, "eval-suite/recall_at_k", "no rows");
  if (!same_shape(V, T)) throw Error(ErrorKind::ShapeError, "eval-suite/recall_at_k", "V/T shape mismatch");
  std::vector<int> ids(V.rows());
  std::iota(ids.begin(), ids.end(), 0);
  return {labeled_recall(V, ids, T, ids, ks), labeled_recall(T, ids, V, ids, ks)};
}

RetrievalResult class_recall_at_k(const Matrix& image_embeddings, std::span<const int> image_labels,
                                  const Matrix& caption_embeddings,
                                  std::span<const int> caption_labels, std::span<const int> ks) {
  // Caption queries only for classes that have at least one image.
  std::set<int> present(image_labels.begin(), image_labels.end());
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < caption_labels.size(); ++i)
    if (present.contains(caption_labels[i])) rows.push_back(i);
  Matrix captions(rows.size(), caption_embeddings.cols());
  std::vector<int> labels;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = caption_embeddings.row(rows[r]);
    std::copy(src.begin(), src.end(), captions.row(r).begin());
    labels.push_back(caption_labels[rows[r]]);
  }
  return {labeled_recall(image_embeddings, image_labels, caption_embeddings, caption_labels, ks),
          labeled_recall(captions, labels, image_embeddings, image_labels, ks)};
}

ProbeResult linear_probe(const Matrix& train_embeddings, std::span<const int> train_labels,
                         const Matrix& test_embeddings, std::span<const int> test_labels,
                         std::size_t shots, std::size_t runs, std::uint64_t seed,
                         const ProbeOptions& options) {
  constexpr const char* kOp = "eval-suite/linear_probe";
  if (train_labels.size() != train_embeddings.rows() || test_labels.size() != test_embeddings.rows() ||
      train_embeddings.cols() != test_embeddings.cols())
    throw Error(ErrorKind::ShapeError, kOp, "embedding/label shapes disagree");
  if (test_labels.empty()) throw Error(ErrorKind::EmptySet, kOp, "no test samples");
  if (shots == 0 || runs == 0) throw Error(ErrorKind::InvalidConfig, kOp, "shots and runs must be >= 1");

  std::map<int, std::vector<std::size_t>> pool;
  for (std::size_t i = 0; i < train_labels.size(); ++i) pool[train_labels[i]].push_back(i);
  int max_label = 0;
  for (int l : train_labels) max_label = std::max(max_label, l);
  for (int l : test_labels) {
    if (!pool.contains(l))
      throw Error(ErrorKind::MissingClass, kOp, "class " + std::to_string(l) + " has no training samples");
    max_label = std::max(max_label, l);
  }
  for (const auto& [label, members] : pool)
    if (members.size() < shots)
      throw Error(ErrorKind::InsufficientSamples, kOp,
                  "class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                      " samples for " + std::to_string(shots) + " shots");

  const std::size_t k = static_cast<std::size_t>(max_label) + 1;
  const std::size_t dim = train_embeddings.cols();
  ProbeResult result;
  result.shots = shots;
  for (std::size_t run = 0; run < runs; ++run) {
    Rng rng(derive_seed(seed, run));
    std::vector<std::size_t> chosen;
    for (auto& [label, members] : pool) {
      std::vector<std::size_t> order = members;
      rng.shuffle(std::span(order));
      chosen.insert(chosen.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(shots));
    }
    Matrix x(chosen.size(), dim);
    for (std::size_t r = 0; r < chosen.size(); ++r) {
      const auto src = train_embeddings.row(chosen[r]);
      std::copy(src.begin(), src.end(), x.row(r).begin());
    }

    Matrix weight(k, dim), bias(1, k);
    Matrix d_weight(k, dim), d_bias(1, k);
    std::vector<Matrix*> params{&weight, &bias};
    std::vector<const Matrix*> grads{&d_weight, &d_bias};
    auto state = init_optimizer_state(std::vector<const Matrix*>{&weight, &bias});
    const AdamWHyper hyper{0.9, 0.999, 1e-8, 0.0};
    const double inv_n = 1.0 / static_cast<double>(chosen.size());
    for (std::size_t it = 0; it < options.iterations; ++it) {
      Matrix logits = matmul_nt(x, weight);
      for (std::size_t r = 0; r < logits.rows(); ++r) axpy(1.0, bias.row(0), logits.row(r));
      // softmax - onehot, scaled by 1/n
      for (std::size_t r = 0; r < logits.rows(); ++r) {
        auto row = logits.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (auto& z : row) sum += (z = std::exp(z - mx));
        for (auto& z : row) z = z / sum * inv_n;
        row[static_cast<std::size_t>(train_labels[chosen[r]])] -= inv_n;
      }
      d_weight = matmul_tn(logits, x);
      d_bias.fill(0.0);
      for (std::size_t r = 0; r < logits.rows(); ++r) axpy(1.0, logits.row(r), d_bias.row(0));
      adamw_step(params, grads, state, options.lr, hyper);
    }

    Matrix test_logits = matmul_nt(test_embeddings, weight);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < test_logits.rows(); ++r) {
      auto row = test_logits.row(r);
      axpy(1.0, bias.row(0), row);
      const auto pred = std::max_element(row.begin(), row.end()) - row.begin();
      correct += pred == test_labels[r];
    }
    result.accuracies.push_back(static_cast<double>(correct) / static_cast<double>(test_labels.size()));
  }
  const double n = static_cast<double>(runs);
  result.mean = std::accumulate(result.accuracies.begin(), result.accuracies.end(), 0.0) / n;
  if (runs > 1) {
    double ss = 0.0;
    for (double a : result.accuracies) ss += (a - result.mean) * (a - result.mean);
    result.sd = std::sqrt(ss / (n - 1.0));
  }
  return result;
}

ClusterScore silhouette(const Matrix& embeddings, std::span<const int> labels, Grouping grouping) {
  constexpr const char* kOp = "eval-suite/silhouette";
  const std::size_t n = embeddings.rows();
  if (labels.size() != n) throw Error(ErrorKind::ShapeError, kOp, "label count mismatch");
  std::map<int, std::size_t> compact;
  for (int l : labels) compact.emplace(l, compact.size());
  if (compact.size() < 2)
    throw Error(ErrorKind::UndefinedSilhouette, kOp, "need at least two groups");
  std::vector<std::size_t> group(n), group_size(compact.size(), 0);
  for (std::size_t i = 0; i < n; ++i) ++group_size[group[i] = compact[labels[i]]];

  double total = 0.0;
  std::vector<double> dist_sum(compact.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (group_size[group[i]] == 1) continue;
    std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) dist_sum[group[j]] += std::sqrt(squared_distance(embeddings.row(i), embeddings.row(j)));
    const double a = dist_sum[group[i]] / static_cast<double>(group_size[group[i]] - 1);
    double b = INFINITY;
    for (std::size_t g = 0; g < dist_sum.size(); ++g)
      if (g != group[i]) b = std::min(b, dist_sum[g] / static_cast<double>(group_size[g]));
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return {total / static_cast<double>(n), grouping};
}

std::vector<int> group_labels(const ConceptVocabulary& vocab, std::span<const int> concept_ids,
                              Grouping grouping) {
  std::map<std::string, int> ids;
  std::vector<int> out;
  out.reserve(concept_ids.size());
  for (int id : concept_ids) {
    const auto& c = vocab.at(id);
    if (grouping == Grouping::by_class) {
      out.push_back(id);
      continue;
    }
    const std::string& key = grouping == Grouping::by_crop ? c.crop : c.condition;
    out.push_back(ids.emplace(key, static_cast<int>(ids.size())).first->second);
  }
  return out;
}

std::vector<RankedConcept> ranking_report(std::span<const double> query, const Matrix& candidates,
                                          std::span<const Concept> candidate_concepts,
                                          std::size_t top_k) {
  if (candidate_concepts.size() != candidates.rows() || query.size() != candidates.cols())
    throw Error(ErrorKind::ShapeError, "eval-suite/ranking_report", "candidate shapes disagree");
  std::vector<double> scores(candidates.rows());
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = dot(query, candidates.row(i));
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(std::min(top_k, order.size()));
  std::vector<RankedConcept> out;
  for (auto i : order) out.push_back({i, candidate_concepts[i], scores[i]});
  return out;
}

std::size_t same_crop_count(std::span<const RankedConcept> ranking, std::string_view crop) {
  return static_cast<std::size_t>(std::count_if(ranking.begin(), ranking.end(),
                                                [&](const RankedConcept& r) { return r.concept_.crop == crop; }));
}

SignTestResult paired_sign_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorKind::ShapeError, "eval-suite/paired_sign_test", "paired samples differ in length");
  SignTestResult r;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) ++r.wins;
    else if (a[i] < b[i]) ++r.losses;
    else ++r.ties;
  }
  const std::size_t n = r.wins + r.losses;
  if (n == 0) return r;
  // Upper binomial tail in log space.
  double tail = 0.0;
  const double log_half_n = static_cast<double>(n) * std::log(0.5);
  for (std::size_t k = r.wins; k <= n; ++k) {
    const double log_choose = std::lgamma(static_cast<double>(n) + 1.0) -
                              std::lgamma(static_cast<double>(k) + 1.0) -
                              std::lgamma(static_cast<double>(n - k) + 1.0);
    tail += std::exp(log_choose + log_half_n);
  }
  r.p_value = std::min(1.0, tail);
  return r;
}

}  // namespace cstalign
