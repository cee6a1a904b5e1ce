#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cstalign/eval.hpp"
#include "cstalign/synth.hpp"
#include "cstalign/train.hpp"

namespace cstalign {

inline constexpr int kMetricsVersion = 1;
inline constexpr std::string_view kRetrievalConvention =
    "class-level: i2t hit = query image's class caption in top K; "
    "t2i hit = any image of the caption's class in top K";

struct EvalOptions {
  Split split = Split::test;
  std::vector<int> ks = {1, 5, 10};
  std::vector<std::size_t> probe_shots;  // empty: no probing
  std::size_t probe_runs = 10;
  std::uint64_t probe_seed = 0;
  std::size_t ranking_top_k = 5;
};

struct EvalReport {
  RetrievalResult retrieval;
  double zero_shot_accuracy = 0.0;
  ClusterScore silhouette_class;
  ClusterScore silhouette_crop;
  ClusterScore silhouette_condition;
  // Per image query: same-crop concepts among its top-k class captions.
  std::vector<double> same_crop_counts;
  double same_crop_mean = 0.0;
  std::vector<ProbeResult> probes;
};

/// Embeds the evaluation split and the class captions, then computes every
/// metric. Probes draw their training pool from the train split.
EvalReport evaluate(const EncoderParams& params, const Dataset& dataset, const TrainConfig& config,
                    const EvalOptions& options = {});

struct MetricRecord {
  std::string metric;
  std::string direction;  // "i2t", "t2i" or ""
  std::string grouping;
  double value = 0.0;
};

struct MetricsFile {
  std::string config_hash;
  ContextMode context_mode = ContextMode::long_context;
  bool cst_enabled = true;
  std::string split;
  std::vector<MetricRecord> records;

  const MetricRecord* find(std::string_view metric, std::string_view direction = "",
                           std::string_view grouping = "") const;
};

// Line-delimited JSON: a header record then one record per metric value.
void write_metrics(const EvalReport& report, const TrainConfig& config, const EvalOptions& options,
                   const std::filesystem::path& path);
MetricsFile read_metrics(const std::filesystem::path& path);

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string label;
  std::filesystem::path data_path;
  std::filesystem::path checkpoint_path;
  std::filesystem::path metrics_path;
  std::filesystem::path train_log_path;
  std::string started_at;
  std::string finished_at;
};

void write_run_manifest(const RunManifest& manifest, const TrainConfig& config,
                        const std::filesystem::path& path);

/// Train, write checkpoint + train log, evaluate the checkpointed (float)
/// weights, write metrics and run_manifest.json into `out_dir`.
RunManifest run_training(const TrainConfig& config, const Dataset& dataset,
                         const std::filesystem::path& data_path, const std::filesystem::path& out_dir,
                         const EvalOptions& options = {}, std::string label = "run");

struct AblationCell {
  ContextMode context_mode;
  bool cst_enabled;
  std::string label;
};

// Grid rows in reporting order: short/hard, short/CST, long/hard, long/CST.
std::vector<AblationCell> ablation_grid();
TrainConfig ablation_config(const TrainConfig& base, const AblationCell& cell);

/// Runs the four context x CST cells with a shared seed, each in its own
/// subdirectory, and writes `ablation_report.txt`.
std::vector<RunManifest> run_ablate(const TrainConfig& base, const Dataset& dataset,
                                    const std::filesystem::path& data_path,
                                    const std::filesystem::path& out_dir, const EvalOptions& options = {});

/// Plain-text tables: retrieval in both directions per run, the
/// template/CST ablation layout, and silhouette by class/crop/condition.
std::string render_report(const std::vector<MetricsFile>& runs);

}  // namespace cstalign
