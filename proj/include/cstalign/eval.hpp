#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "cstalign/matrix.hpp"
#include "cstalign/vocab.hpp"

namespace cstalign {

enum class Grouping { by_class, by_crop, by_condition };

std::string_view to_string(Grouping grouping);

// Recall per K for each retrieval direction.
struct RetrievalResult {
  std::map<int, double> i2t;
  std::map<int, double> t2i;
};

/// Argmax of cosine similarity per image row; ties go to the lowest class id.
std::vector<int> nearest_class(const Matrix& image_embeddings, const Matrix& class_embeddings);

double zero_shot_classify(const Matrix& image_embeddings, const Matrix& class_embeddings,
                          std::span<const int> true_labels);

/// One retrieval direction with label-defined relevance: for each query,
/// candidates are ranked by dot product (descending, ties by index) and the
/// query hits at K when a candidate with the query's label is in the top K.
std::map<int, double> labeled_recall(const Matrix& queries, std::span<const int> query_labels,
                                     const Matrix& candidates, std::span<const int> candidate_labels,
                                     std::span<const int> ks);

/// Instance-level pairing: row i of V belongs with row i of T.
RetrievalResult recall_at_k(const Matrix& V, const Matrix& T, std::span<const int> ks);

/// Class-level pairing used for class captions: an image query hits when its
/// class caption is in the top K; a caption query hits when any image of its
/// class is in the top K.
RetrievalResult class_recall_at_k(const Matrix& image_embeddings, std::span<const int> image_labels,
                                  const Matrix& caption_embeddings,
                                  std::span<const int> caption_labels, std::span<const int> ks);

struct ProbeOptions {
  std::size_t iterations = 500;
  double lr = 0.1;
};

struct ProbeResult {
  std::size_t shots = 0;
  std::vector<double> accuracies;
  double mean = 0.0;
  double sd = 0.0;
};

/// Few-shot linear probe on frozen embeddings: per run, draw `shots` training
/// examples per class, fit multinomial logistic regression with full-batch
/// AdamW (no weight decay) and score the test set.
ProbeResult linear_probe(const Matrix& train_embeddings, std::span<const int> train_labels,
                         const Matrix& test_embeddings, std::span<const int> test_labels,
                         std::size_t shots, std::size_t runs, std::uint64_t seed,
                         const ProbeOptions& options = {});

struct ClusterScore {
  double silhouette = 0.0;
  Grouping grouping = Grouping::by_class;
};

/// Mean silhouette with Euclidean distance; members of singleton groups score 0.
ClusterScore silhouette(const Matrix& embeddings, std::span<const int> labels, Grouping grouping);

// Maps concept ids to class, crop or condition group ids.
std::vector<int> group_labels(const ConceptVocabulary& vocab, std::span<const int> concept_ids,
                              Grouping grouping);

struct RankedConcept {
  std::size_t index = 0;
  Concept concept_;
  double score = 0.0;
};

/// Candidates sorted by cosine score, descending, ties by index; truncated to
/// min(top_k, candidates).
std::vector<RankedConcept> ranking_report(std::span<const double> query, const Matrix& candidates,
                                          std::span<const Concept> candidate_concepts,
                                          std::size_t top_k);

std::size_t same_crop_count(std::span<const RankedConcept> ranking, std::string_view crop);

struct SignTestResult {
  std::size_t wins = 0;    // a > b
  std::size_t losses = 0;  // a < b
  std::size_t ties = 0;
  double p_value = 1.0;    // one-sided: P(Binomial(wins + losses, 1/2) >= wins)
};

SignTestResult paired_sign_test(std::span<const double> a, std::span<const double> b);

}  // namespace cstalign
