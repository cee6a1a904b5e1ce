#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cstalign/matrix.hpp"
#include "cstalign/vocab.hpp"

namespace cstalign {

/// Parameters of a synthetic crop x condition dataset. Each populated class
/// (crop c, condition k) has mean
///   crop_signal * u[c] + disease_signal * w[k] + class_signal * z[class]
/// with u, w, z unit vectors drawn from the seed; samples add isotropic
/// Gaussian noise of scale noise_sigma.
struct SynthSpec {
  std::size_t n_crops = 0;
  std::size_t n_conditions = 0;
  std::vector<std::pair<int, int>> classes;  // (crop index, condition index)
  std::size_t samples_per_class = 10;
  std::size_t feature_dim = 16;
  double crop_signal = 1.0;
  double disease_signal = 1.0;
  double class_signal = 1.0;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
  // Optional display names; defaults are used when empty. Condition 0 is
  // "healthy" in the default naming.
  std::vector<std::string> crop_names;
  std::vector<std::string> condition_names;
  // Optional per-class descriptions, parallel to `classes`.
  std::vector<std::string> descriptions;
};

enum class Split { train, val, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct Sample {
  std::size_t sample_id = 0;
  std::vector<double> features;
  int concept_id = 0;
  Split split = Split::train;

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  ConceptVocabulary vocabulary;
  std::size_t feature_dim = 0;
  std::vector<Sample> samples;

  std::vector<std::size_t> indices(Split split) const;
  Matrix features(const std::vector<std::size_t>& indices) const;
  std::vector<int> labels(const std::vector<std::size_t>& indices) const;
  // Distinct concept ids present in `split`, ascending.
  std::vector<int> classes_in(Split split) const;

  bool operator==(const Dataset&) const = default;
};

// Default crop/condition display names used by the generator.
std::string default_crop_name(std::size_t index);
std::string default_condition_name(std::size_t index);
std::string synthetic_description(std::string_view crop, std::string_view condition,
                                  std::size_t crop_index, std::size_t condition_index);

/// Picks `n_classes` distinct (crop, condition) pairs: every crop's healthy
/// class first, the remainder drawn from the seeded shuffle of diseased pairs.
/// Returned in (crop, condition) order.
std::vector<std::pair<int, int>> populate_classes(std::size_t n_crops, std::size_t n_conditions,
                                                  std::size_t n_classes, std::uint64_t seed);

/// Takes crops, conditions, classes and descriptions from vocabulary records:
/// crops and conditions are indexed in order of first appearance. Other
/// fields of `base` are kept.
SynthSpec spec_from_records(const std::vector<ConceptRecord>& records, SynthSpec base);

// 12 crops x 5 conditions, 40 classes, 100 samples each. The class layout is
// fixed; `seed` drives the directions and noise.
// separable: feature_dim 64, noise 0.2. correlated: feature_dim 32, noise 0.6,
// where crop and condition directions dominate the class-specific part.
SynthSpec separable_preset(std::uint64_t seed);
SynthSpec correlated_preset(std::uint64_t seed);

// Vocabulary the generator attaches to a spec (names + synthetic descriptions).
ConceptVocabulary synthetic_vocabulary(const SynthSpec& spec);

// Noise-free class means, one row per populated class.
Matrix class_means(const SynthSpec& spec);

Dataset generate_dataset(const SynthSpec& spec);

/// Per-class stratified split. Each class gets round(n * ratio) samples per
/// split (within one sample of the ratio) and every split with a positive
/// ratio receives at least one sample of every class.
Dataset split_dataset(const Dataset& dataset, std::array<double, 3> ratios, std::uint64_t seed);

// Text manifest; see README for the layout. Doubles are written in shortest
// round-trip form so load(save(d)) == d.
void save_manifest(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_manifest(const std::filesystem::path& path);

}  // namespace cstalign
