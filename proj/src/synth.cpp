#include "cstalign/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cstalign/error.hpp"
#include "cstalign/rng.hpp"

namespace cstalign {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw Error(ErrorKind::ParseError, "synth-data/parse_split",
              "unknown split '" + std::string(text) + "'");
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].split == split) out.push_back(i);
  return out;
}

Matrix Dataset::features(const std::vector<std::size_t>& idx) const {
  Matrix m(idx.size(), feature_dim);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& f = samples.at(idx[r]).features;
    std::copy(f.begin(), f.end(), m.row(r).begin());
  }
  return m;
}

std::vector<int> Dataset::labels(const std::vector<std::size_t>& idx) const {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(samples.at(i).concept_id);
  return out;
}

std::vector<int> Dataset::classes_in(Split split) const {
  std::set<int> seen;
  for (const auto& s : samples)
    if (s.split == split) seen.insert(s.concept_id);
  return {seen.begin(), seen.end()};
}

namespace {

constexpr std::array<std::string_view, 14> kCrops = {
    "apple", "tomato", "potato",  "corn",   "grape",  "pepper", "cherry",
    "peach", "strawberry", "coffee", "rice", "wheat", "soybean", "cassava"};

constexpr std::array<std::string_view, 10> kConditions = {
    "healthy", "scab",      "rust",   "blight",      "powdery mildew",
    "mosaic",  "leaf spot", "canker", "downy mildew", "black rot"};

constexpr std::array<std::string_view, 10> kSymptoms = {
    "",
    "olive green velvety spots that turn dark and corky",
    "bright orange pustules with yellow halos",
    "brown concentric lesions that spread rapidly",
    "white powdery fungal coating",
    "yellow and green mottled patterns with distortion",
    "small round necrotic spots with dark borders",
    "sunken cracked bark lesions",
    "pale angular patches with gray sporulation beneath",
    "black shriveled lesions with tan centers"};

constexpr std::array<std::string_view, 7> kTissues = {
    "upper leaf surface", "lower leaf veins", "leaf margins", "older leaves",
    "young shoots",       "petioles",         "leaf tips"};

std::vector<double> unit_gaussian(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

void validate(const SynthSpec& spec) {
  constexpr const char* kOp = "synth-data/generate_dataset";
  if (spec.classes.empty()) throw Error(ErrorKind::EmptySpec, kOp, "no populated classes");
  if (spec.feature_dim < 2) throw Error(ErrorKind::InvalidConfig, kOp, "feature_dim must be >= 2");
  for (double s : {spec.crop_signal, spec.disease_signal, spec.class_signal})
    if (!std::isfinite(s) || s < 0.0)
      throw Error(ErrorKind::InvalidConfig, kOp, "signal magnitudes must be finite and >= 0");
  if (!std::isfinite(spec.noise_sigma) || spec.noise_sigma < 0.0)
    throw Error(ErrorKind::InvalidConfig, kOp, "noise_sigma must be finite and >= 0");
  std::set<std::pair<int, int>> seen;
  for (auto [crop, cond] : spec.classes) {
    if (crop < 0 || static_cast<std::size_t>(crop) >= spec.n_crops || cond < 0 ||
        static_cast<std::size_t>(cond) >= spec.n_conditions)
      throw Error(ErrorKind::InvalidConfig, kOp, "class index outside the crop/condition grid");
    if (!seen.insert({crop, cond}).second)
      throw Error(ErrorKind::InvalidConfig, kOp, "populated classes must be unique");
  }
  if (!spec.descriptions.empty() && spec.descriptions.size() != spec.classes.size())
    throw Error(ErrorKind::InvalidConfig, kOp, "descriptions must parallel classes");
}

// Draws u, w, z in a fixed order and returns the class means. `rng` is left
// positioned for the sample noise draws.
Matrix draw_means(const SynthSpec& spec, Rng& rng) {
  std::vector<std::vector<double>> crop_dirs, cond_dirs;
  for (std::size_t c = 0; c < spec.n_crops; ++c) crop_dirs.push_back(unit_gaussian(rng, spec.feature_dim));
  for (std::size_t k = 0; k < spec.n_conditions; ++k) cond_dirs.push_back(unit_gaussian(rng, spec.feature_dim));
  Matrix means(spec.classes.size(), spec.feature_dim);
  for (std::size_t i = 0; i < spec.classes.size(); ++i) {
    const auto z = unit_gaussian(rng, spec.feature_dim);
    const auto& u = crop_dirs[static_cast<std::size_t>(spec.classes[i].first)];
    const auto& w = cond_dirs[static_cast<std::size_t>(spec.classes[i].second)];
    for (std::size_t j = 0; j < spec.feature_dim; ++j)
      means(i, j) = spec.crop_signal * u[j] + spec.disease_signal * w[j] + spec.class_signal * z[j];
  }
  return means;
}

}  // namespace

std::string default_crop_name(std::size_t index) {
  if (index < kCrops.size()) return std::string(kCrops[index]);
  return "crop" + std::to_string(index);
}

std::string default_condition_name(std::size_t index) {
  if (index < kConditions.size()) return std::string(kConditions[index]);
  return "disease" + std::to_string(index);
}

std::string synthetic_description(std::string_view crop, std::string_view condition,
                                  std::size_t crop_index, std::size_t condition_index) {
  if (condition == kHealthy) return "";
  std::string symptom = condition_index < kSymptoms.size() && !kSymptoms[condition_index].empty()
                            ? std::string(kSymptoms[condition_index])
                            : std::string(condition) + " lesions";
  return symptom + " on " + std::string(crop) + " " +
         std::string(kTissues[(crop_index * 3 + condition_index) % kTissues.size()]);
}

std::vector<std::pair<int, int>> populate_classes(std::size_t n_crops, std::size_t n_conditions,
                                                  std::size_t n_classes, std::uint64_t seed) {
  if (n_classes > n_crops * n_conditions || n_classes == 0)
    throw Error(ErrorKind::InvalidConfig, "synth-data/populate_classes",
                "requested class count does not fit the crop x condition grid");
  std::vector<std::pair<int, int>> chosen;
  for (std::size_t c = 0; c < n_crops && chosen.size() < n_classes; ++c)
    chosen.emplace_back(static_cast<int>(c), 0);
  std::vector<std::pair<int, int>> diseased;
  for (std::size_t c = 0; c < n_crops; ++c)
    for (std::size_t k = 1; k < n_conditions; ++k)
      diseased.emplace_back(static_cast<int>(c), static_cast<int>(k));
  Rng rng(derive_seed(seed, 0x706f70));
  rng.shuffle(std::span(diseased));
  for (std::size_t i = 0; chosen.size() < n_classes; ++i) chosen.push_back(diseased[i]);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

namespace {

SynthSpec preset_base(std::uint64_t seed) {
  SynthSpec s;
  s.n_crops = 12;
  s.n_conditions = 5;
  s.classes = populate_classes(12, 5, 40, 7);
  s.samples_per_class = 100;
  s.seed = seed;
  return s;
}

}  // namespace

SynthSpec separable_preset(std::uint64_t seed) {
  auto s = preset_base(seed);
  s.feature_dim = 64;
  s.noise_sigma = 0.2;
  return s;
}

SynthSpec correlated_preset(std::uint64_t seed) {
  auto s = preset_base(seed);
  s.feature_dim = 32;
  s.noise_sigma = 0.6;
  return s;
}

SynthSpec spec_from_records(const std::vector<ConceptRecord>& records, SynthSpec base) {
  if (records.empty()) throw Error(ErrorKind::EmptySpec, "synth-data/generate", "no concepts");
  // Normalize and reject duplicates the same way the vocabulary does.
  const auto vocab = ConceptVocabulary::build(records);
  base.crop_names.clear();
  base.condition_names.clear();
  base.classes.clear();
  base.descriptions.clear();
  auto index_of = [](std::vector<std::string>& names, const std::string& name) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it != names.end()) return static_cast<int>(it - names.begin());
    names.push_back(name);
    return static_cast<int>(names.size() - 1);
  };
  for (const auto& c : vocab.concepts()) {
    const int crop = index_of(base.crop_names, c.crop);
    const int cond = index_of(base.condition_names, c.condition);
    base.classes.emplace_back(crop, cond);
    base.descriptions.push_back(c.description);
  }
  base.n_crops = base.crop_names.size();
  base.n_conditions = base.condition_names.size();
  return base;
}

ConceptVocabulary synthetic_vocabulary(const SynthSpec& spec) {
  std::vector<ConceptRecord> records;
  for (std::size_t i = 0; i < spec.classes.size(); ++i) {
    const auto crop_index = static_cast<std::size_t>(spec.classes[i].first);
    const auto cond_index = static_cast<std::size_t>(spec.classes[i].second);
    ConceptRecord r;
    r.crop = crop_index < spec.crop_names.size() ? spec.crop_names[crop_index]
                                                 : default_crop_name(crop_index);
    r.condition = cond_index < spec.condition_names.size() ? spec.condition_names[cond_index]
                                                           : default_condition_name(cond_index);
    r.description = !spec.descriptions.empty()
                        ? spec.descriptions[i]
                        : synthetic_description(normalize_text(r.crop), normalize_text(r.condition),
                                                crop_index, cond_index);
    records.push_back(std::move(r));
  }
  return ConceptVocabulary::build(records);
}

Matrix class_means(const SynthSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  return draw_means(spec, rng);
}

Dataset generate_dataset(const SynthSpec& spec) {
  validate(spec);
  Dataset ds;
  ds.vocabulary = synthetic_vocabulary(spec);
  ds.feature_dim = spec.feature_dim;
  Rng rng(spec.seed);
  const Matrix means = draw_means(spec, rng);
  ds.samples.reserve(spec.classes.size() * spec.samples_per_class);
  for (std::size_t cls = 0; cls < spec.classes.size(); ++cls) {
    for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
      Sample sample;
      sample.sample_id = ds.samples.size();
      sample.concept_id = static_cast<int>(cls);
      sample.features.resize(spec.feature_dim);
      for (std::size_t j = 0; j < spec.feature_dim; ++j)
        sample.features[j] = means(cls, j) + spec.noise_sigma * rng.normal();
      ds.samples.push_back(std::move(sample));
    }
  }
  return ds;
}

Dataset split_dataset(const Dataset& dataset, std::array<double, 3> ratios, std::uint64_t seed) {
  constexpr const char* kOp = "synth-data/split_dataset";
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw Error(ErrorKind::InvalidConfig, kOp, "ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::InvalidConfig, kOp, "ratios must sum to 1");
  const std::size_t required = static_cast<std::size_t>(std::count_if(
      ratios.begin(), ratios.end(), [](double r) { return r > 0.0; }));

  Dataset out = dataset;
  std::vector<std::vector<std::size_t>> by_class(dataset.vocabulary.size());
  for (std::size_t i = 0; i < out.samples.size(); ++i)
    by_class.at(static_cast<std::size_t>(out.samples[i].concept_id)).push_back(i);

  Rng rng(seed);
  for (std::size_t cls = 0; cls < by_class.size(); ++cls) {
    auto& members = by_class[cls];
    const std::size_t n = members.size();
    if (n == 0) continue;
    if (n < required)
      throw Error(ErrorKind::InsufficientSamples, kOp,
                  "class " + std::to_string(cls) + " has " + std::to_string(n) +
                      " samples for " + std::to_string(required) + " splits");
    rng.shuffle(std::span(members));

    std::array<std::size_t, 3> counts{};
    for (std::size_t s = 0; s < 2; ++s)
      counts[s] = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[s]));
    counts[0] = std::min(counts[0], n);
    counts[1] = std::min(counts[1], n - counts[0]);
    counts[2] = n - counts[0] - counts[1];
    if (ratios[2] == 0.0 && counts[2] > 0) {
      counts[ratios[1] > 0.0 ? 1 : 0] += counts[2];
      counts[2] = 0;
    }
    // Every split with positive ratio keeps the class; borrow from the largest.
    for (std::size_t s = 0; s < 3; ++s) {
      if (ratios[s] > 0.0 && counts[s] == 0) {
        const auto largest = static_cast<std::size_t>(
            std::max_element(counts.begin(), counts.end()) - counts.begin());
        --counts[largest];
        ++counts[s];
      }
    }
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t c = 0; c < counts[s]; ++c)
        out.samples[members[pos++]].split = static_cast<Split>(s);
  }
  return out;
}

namespace {

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::vector<std::string_view> split_on(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                      : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

constexpr std::string_view kManifestMagic = "cstalign-manifest";

}  // namespace

void save_manifest(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "synth-data/save_manifest", "cannot open " + path.string());
  out << kManifestMagic << " v1 feature_dim=" << dataset.feature_dim
      << " K=" << dataset.vocabulary.size() << " N=" << dataset.samples.size() << '\n';
  for (const auto& c : dataset.vocabulary.concepts())
    out << c.crop << '\t' << c.condition << '\t' << c.description << '\n';
  for (const auto& s : dataset.samples) {
    out << s.sample_id << '\t' << to_string(s.split) << '\t' << s.concept_id << '\t';
    for (std::size_t j = 0; j < s.features.size(); ++j) {
      if (j) out << ' ';
      out << format_double(s.features[j]);
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "synth-data/save_manifest", "write failed");
}

Dataset load_manifest(const std::filesystem::path& path) {
  constexpr const char* kOp = "synth-data/load_manifest";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, kOp, "cannot open " + path.string());
  auto fail = [&](std::size_t line_no, const std::string& why) -> Error {
    return Error(ErrorKind::ParseError, kOp, "line " + std::to_string(line_no) + ": " + why);
  };

  std::string line;
  std::size_t line_no = 0;
  Dataset ds;
  if (!std::getline(in, line)) return ds;  // empty file: empty dataset
  ++line_no;
  std::size_t k = 0, n = 0;
  {
    const auto fields = split_on(line, ' ');
    if (fields.size() != 5 || fields[0] != kManifestMagic || fields[1] != "v1")
      throw fail(line_no, "bad header");
    auto keyed = [&](std::string_view field, std::string_view key, std::size_t& value) {
      if (!field.starts_with(key) || !parse_number(field.substr(key.size()), value))
        throw fail(line_no, "bad header field '" + std::string(field) + "'");
    };
    keyed(fields[2], "feature_dim=", ds.feature_dim);
    keyed(fields[3], "K=", k);
    keyed(fields[4], "N=", n);
  }

  std::vector<ConceptRecord> records;
  for (std::size_t i = 0; i < k; ++i) {
    if (!std::getline(in, line)) throw fail(line_no + 1, "truncated vocabulary block");
    ++line_no;
    const auto fields = split_on(line, '\t');
    if (fields.size() != 3) throw fail(line_no, "vocabulary line needs 3 tab-separated fields");
    records.push_back({std::string(fields[0]), std::string(fields[1]), std::string(fields[2])});
  }
  if (!records.empty()) ds.vocabulary = ConceptVocabulary::build(records);

  std::set<std::size_t> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_on(line, '\t');
    if (fields.size() != 4) throw fail(line_no, "sample line needs 4 tab-separated fields");
    Sample s;
    if (!parse_number(fields[0], s.sample_id)) throw fail(line_no, "bad sample_id");
    if (!ids.insert(s.sample_id).second) throw fail(line_no, "duplicate sample_id");
    if (fields[1] == "train") s.split = Split::train;
    else if (fields[1] == "val") s.split = Split::val;
    else if (fields[1] == "test") s.split = Split::test;
    else throw fail(line_no, "bad split");
    if (!parse_number(fields[2], s.concept_id)) throw fail(line_no, "bad concept_id");
    if (s.concept_id < 0 || static_cast<std::size_t>(s.concept_id) >= k)
      throw Error(ErrorKind::DanglingReference, kOp,
                  "line " + std::to_string(line_no) + ": concept_id " +
                      std::to_string(s.concept_id) + " with K=" + std::to_string(k));
    const auto values = split_on(fields[3], ' ');
    if (values.size() != ds.feature_dim) throw fail(line_no, "feature count != feature_dim");
    s.features.resize(ds.feature_dim);
    for (std::size_t j = 0; j < values.size(); ++j)
      if (!parse_number(values[j], s.features[j]) || !std::isfinite(s.features[j]))
        throw fail(line_no, "bad feature value");
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.size() != n)
    throw fail(line_no, "header declares N=" + std::to_string(n) + " but found " +
                            std::to_string(ds.samples.size()));
  return ds;
}

}  // namespace cstalign
