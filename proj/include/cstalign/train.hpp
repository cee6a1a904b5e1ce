#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cstalign/encoder.hpp"
#include "cstalign/loss.hpp"
#include "cstalign/optim.hpp"
#include "cstalign/soft_target.hpp"
#include "cstalign/synth.hpp"
#include "cstalign/vocab.hpp"

namespace cstalign {

inline constexpr std::string_view kDefaultPrompt = "a photo of";

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double peak_lr = 3e-4;
  double weight_decay = 0.2;
  double warmup_fraction = 0.1;
  double tau = kDefaultTemperature;
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  ContextMode context_mode = ContextMode::long_context;
  bool cst_enabled = true;
  std::string prompt = std::string(kDefaultPrompt);
  // Model shape.
  std::size_t context_length = kDefaultContextLength;
  std::size_t vocab_size = 4096;
  std::size_t text_embed_dim = 64;
  std::vector<std::size_t> image_hidden = {128};
  std::vector<std::size_t> text_hidden = {128};
  std::size_t embed_dim = 64;
  Activation activation = Activation::tanh;

  bool operator==(const TrainConfig&) const = default;
};

// Throws ConfigError naming the offending field.
void validate(const TrainConfig& config);

EncoderConfig encoder_config(const TrainConfig& config, std::size_t feature_dim);
AdamWHyper adamw_hyper(const TrainConfig& config);

struct StepRecord {
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  std::size_t batch_size = 0;
  double lr = 0.0;
  LossReport loss;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double val_r1_i2t = 0.0;
  double val_r1_t2i = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::vector<std::uint64_t> skipped_steps;  // aborted on non-finite gradients
};

struct TrainResult {
  EncoderParams params;
  TrainLog log;
};

// Token sequences for every class caption, indexed by class id.
std::vector<TokenSequence> class_tokens(const ConceptVocabulary& vocab, const TrainConfig& config);

Matrix embed_classes(const EncoderParams& params, const ConceptVocabulary& vocab,
                     const TrainConfig& config);
Matrix embed_samples(const EncoderParams& params, const Dataset& dataset,
                     const std::vector<std::size_t>& indices);

/// Class-distinct batches -> both towers -> soft (or one-hot) targets ->
/// symmetric loss -> analytic gradients -> AdamW on the warmup/cosine
/// schedule. Validation R@1 is logged after every epoch. Deterministic in
/// (config, dataset).
TrainResult train(const TrainConfig& config, const Dataset& dataset);

// Line-delimited JSON: one {"type":"step",...} per step, {"type":"epoch",...}
// per epoch and {"type":"skipped",...} per aborted step.
void write_train_log(const TrainLog& log, const std::filesystem::path& path);

}  // namespace cstalign
