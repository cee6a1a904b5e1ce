#include "cstalign/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "cstalign/checkpoint.hpp"
#include "cstalign/config.hpp"
#include "cstalign/error.hpp"

namespace cstalign {

EvalReport evaluate(const EncoderParams& params, const Dataset& dataset, const TrainConfig& config,
                    const EvalOptions& options) {
  constexpr const char* kOp = "eval-suite/evaluate";
  const auto idx = dataset.indices(options.split);
  if (idx.empty()) throw Error(ErrorKind::EmptySet, kOp, "no samples in the evaluation split");
  const auto labels = dataset.labels(idx);
  const Matrix images = embed_samples(params, dataset, idx);
  const Matrix captions = embed_classes(params, dataset.vocabulary, config);
  std::vector<int> class_ids(dataset.vocabulary.size());
  std::iota(class_ids.begin(), class_ids.end(), 0);

  EvalReport r;
  r.retrieval = class_recall_at_k(images, labels, captions, class_ids, options.ks);
  r.zero_shot_accuracy = zero_shot_classify(images, captions, labels);
  r.silhouette_class = silhouette(images, labels, Grouping::by_class);
  r.silhouette_crop = silhouette(images, group_labels(dataset.vocabulary, labels, Grouping::by_crop),
                                 Grouping::by_crop);
  r.silhouette_condition =
      silhouette(images, group_labels(dataset.vocabulary, labels, Grouping::by_condition),
                 Grouping::by_condition);

  const auto& concepts = dataset.vocabulary.concepts();
  for (std::size_t q = 0; q < idx.size(); ++q) {
    const auto ranking = ranking_report(images.row(q), captions, concepts, options.ranking_top_k);
    const auto& crop = dataset.vocabulary.at(labels[q]).crop;
    r.same_crop_counts.push_back(static_cast<double>(same_crop_count(ranking, crop)));
  }
  r.same_crop_mean = std::accumulate(r.same_crop_counts.begin(), r.same_crop_counts.end(), 0.0) /
                     static_cast<double>(r.same_crop_counts.size());

  if (!options.probe_shots.empty()) {
    const auto train_idx = dataset.indices(Split::train);
    const Matrix train_images = embed_samples(params, dataset, train_idx);
    const auto train_labels = dataset.labels(train_idx);
    for (auto shots : options.probe_shots)
      r.probes.push_back(linear_probe(train_images, train_labels, images, labels, shots,
                                      options.probe_runs, options.probe_seed));
  }
  return r;
}

const MetricRecord* MetricsFile::find(std::string_view metric, std::string_view direction,
                                      std::string_view grouping) const {
  for (const auto& r : records)
    if (r.metric == metric && r.direction == direction && r.grouping == grouping) return &r;
  return nullptr;
}

void write_metrics(const EvalReport& report, const TrainConfig& config, const EvalOptions& options,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "eval-suite/write_metrics", "cannot open " + path.string());
  const std::string hash = config_hash(config);
  out << nlohmann::json{{"type", "header"},
                        {"format", "cstalign-metrics"},
                        {"version", kMetricsVersion},
                        {"config_hash", hash},
                        {"context_mode", std::string(to_string(config.context_mode))},
                        {"cst_enabled", config.cst_enabled},
                        {"split", std::string(to_string(options.split))},
                        {"retrieval_convention", std::string(kRetrievalConvention)}}
             .dump()
      << '\n';
  auto emit = [&](const std::string& metric, const std::string& direction, const std::string& grouping,
                  double value) {
    out << nlohmann::json{{"type", "metric"},       {"metric", metric}, {"direction", direction},
                          {"grouping", grouping},   {"value", value},   {"config_hash", hash}}
               .dump()
        << '\n';
  };
  for (auto [k, v] : report.retrieval.i2t) emit("recall@" + std::to_string(k), "i2t", "class", v);
  for (auto [k, v] : report.retrieval.t2i) emit("recall@" + std::to_string(k), "t2i", "class", v);
  emit("zero_shot_accuracy", "", "class", report.zero_shot_accuracy);
  for (const auto* s : {&report.silhouette_class, &report.silhouette_crop, &report.silhouette_condition})
    emit("silhouette", "", std::string(to_string(s->grouping)), s->silhouette);
  emit("same_crop_top" + std::to_string(options.ranking_top_k) + "_mean", "i2t", "crop",
       report.same_crop_mean);
  for (const auto& p : report.probes) {
    emit("probe_accuracy_mean", "", "shots=" + std::to_string(p.shots), p.mean);
    emit("probe_accuracy_sd", "", "shots=" + std::to_string(p.shots), p.sd);
  }
  if (!out) throw Error(ErrorKind::IoError, "eval-suite/write_metrics", "write failed");
}

MetricsFile read_metrics(const std::filesystem::path& path) {
  constexpr const char* kOp = "eval-suite/read_metrics";
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, kOp, "cannot open " + path.string());
  MetricsFile file;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        if (j.at("format") != "cstalign-metrics" || j.at("version") != kMetricsVersion)
          throw Error(ErrorKind::ParseError, kOp, "unsupported metrics format");
        file.config_hash = j.at("config_hash").get<std::string>();
        file.context_mode = parse_context_mode(j.at("context_mode").get<std::string>());
        file.cst_enabled = j.at("cst_enabled").get<bool>();
        file.split = j.at("split").get<std::string>();
        have_header = true;
      } else if (type == "metric") {
        file.records.push_back({j.at("metric").get<std::string>(), j.at("direction").get<std::string>(),
                                j.at("grouping").get<std::string>(), j.at("value").get<double>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ParseError, kOp, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw Error(ErrorKind::ParseError, kOp, "missing header record");
  return file;
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void write_run_manifest(const RunManifest& m, const TrainConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cli/write_run_manifest", "cannot open " + path.string());
  nlohmann::json j = {{"label", m.label},
                      {"config_hash", m.config_hash},
                      {"seed", m.seed},
                      {"data_path", m.data_path.string()},
                      {"checkpoint_path", m.checkpoint_path.string()},
                      {"metrics_path", m.metrics_path.string()},
                      {"train_log_path", m.train_log_path.string()},
                      {"started_at", m.started_at},
                      {"finished_at", m.finished_at},
                      {"config", canonical_config(config)}};
  out << j.dump(2) << '\n';
}

RunManifest run_training(const TrainConfig& config, const Dataset& dataset,
                         const std::filesystem::path& data_path, const std::filesystem::path& out_dir,
                         const EvalOptions& options, std::string label) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "train-engine/train", "cannot create " + out_dir.string());
  RunManifest m;
  m.label = std::move(label);
  m.config_hash = config_hash(config);
  m.seed = config.seed;
  m.data_path = data_path;
  m.checkpoint_path = out_dir / "checkpoint.bin";
  m.metrics_path = out_dir / "metrics.jsonl";
  m.train_log_path = out_dir / "train_log.jsonl";
  m.started_at = utc_now();
  {
    // Resolved config, reusable as `--config` for a later eval with the same hash.
    std::ofstream cfg(out_dir / "config.txt");
    if (!cfg) throw Error(ErrorKind::IoError, "train-engine/train", "cannot write config.txt");
    cfg << canonical_config(config);
  }

  const auto result = train(config, dataset);
  save_checkpoint(result.params, m.checkpoint_path);
  write_train_log(result.log, m.train_log_path);
  // Score exactly what the checkpoint holds.
  const auto report = evaluate(round_to_float(result.params), dataset, config, options);
  write_metrics(report, config, options, m.metrics_path);

  m.finished_at = utc_now();
  write_run_manifest(m, config, out_dir / "run_manifest.json");
  return m;
}

std::vector<AblationCell> ablation_grid() {
  return {{ContextMode::short_context, false, "short-hard"},
          {ContextMode::short_context, true, "short-cst"},
          {ContextMode::long_context, false, "long-hard"},
          {ContextMode::long_context, true, "long-cst"}};
}

TrainConfig ablation_config(const TrainConfig& base, const AblationCell& cell) {
  TrainConfig c = base;
  c.context_mode = cell.context_mode;
  c.cst_enabled = cell.cst_enabled;
  return c;
}

std::vector<RunManifest> run_ablate(const TrainConfig& base, const Dataset& dataset,
                                    const std::filesystem::path& data_path,
                                    const std::filesystem::path& out_dir, const EvalOptions& options) {
  std::vector<RunManifest> runs;
  std::vector<MetricsFile> metrics;
  for (const auto& cell : ablation_grid()) {
    runs.push_back(run_training(ablation_config(base, cell), dataset, data_path, out_dir / cell.label,
                                options, cell.label));
    metrics.push_back(read_metrics(runs.back().metrics_path));
  }
  std::ofstream out(out_dir / "ablation_report.txt");
  if (!out) throw Error(ErrorKind::IoError, "cli/run_ablate", "cannot write ablation_report.txt");
  out << render_report(metrics);
  return runs;
}

namespace {

std::string cell(double v, int width = 9) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%*.2f", width, 100.0 * v);
  return buf;
}

std::string cell_raw(double v, int width = 11) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%*.4f", width, v);
  return buf;
}

double value_or_nan(const MetricsFile& f, std::string_view metric, std::string_view direction,
                    std::string_view grouping) {
  const auto* r = f.find(metric, direction, grouping);
  return r ? r->value : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

std::string render_report(const std::vector<MetricsFile>& runs) {
  std::ostringstream out;
  out << "Image-to-text retrieval (%)\n"
      << "run               R@1      R@5     R@10\n";
  for (const auto& f : runs) {
    char name[32];
    std::snprintf(name, sizeof name, "%-16s", f.config_hash.c_str());
    out << name << cell(value_or_nan(f, "recall@1", "i2t", "class"))
        << cell(value_or_nan(f, "recall@5", "i2t", "class"))
        << cell(value_or_nan(f, "recall@10", "i2t", "class")) << '\n';
  }
  out << "\nText-to-image retrieval (%)\n"
      << "run               R@1      R@5     R@10\n";
  for (const auto& f : runs) {
    char name[32];
    std::snprintf(name, sizeof name, "%-16s", f.config_hash.c_str());
    out << name << cell(value_or_nan(f, "recall@1", "t2i", "class"))
        << cell(value_or_nan(f, "recall@5", "t2i", "class"))
        << cell(value_or_nan(f, "recall@10", "t2i", "class")) << '\n';
  }

  out << "\nTemplate / soft-target ablation, mean of both directions (%)\n"
      << "T template  CST       R@1      R@5     R@10\n";
  for (const auto& f : runs) {
    const bool long_ctx = f.context_mode == ContextMode::long_context;
    out << (long_ctx ? "    x      " : "           ") << (f.cst_enabled ? " x   " : "     ");
    for (int k : {1, 5, 10}) {
      const auto metric = "recall@" + std::to_string(k);
      out << cell(0.5 * (value_or_nan(f, metric, "i2t", "class") + value_or_nan(f, metric, "t2i", "class")));
    }
    out << '\n';
  }

  out << "\nSilhouette score\n"
      << "targets  context      class        crop   condition\n";
  for (const auto& f : runs) {
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "%-8s %-7s", f.cst_enabled ? "CST" : "hard",
                  std::string(to_string(f.context_mode)).c_str());
    out << prefix << cell_raw(value_or_nan(f, "silhouette", "", "class"))
        << cell_raw(value_or_nan(f, "silhouette", "", "crop"))
        << cell_raw(value_or_nan(f, "silhouette", "", "condition")) << '\n';
  }
  return out.str();
}

}  // namespace cstalign
