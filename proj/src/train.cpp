#include "cstalign/train.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

#include "cstalign/error.hpp"
#include "cstalign/eval.hpp"
#include "cstalign/rng.hpp"

namespace cstalign {

void validate(const TrainConfig& c) {
  constexpr const char* kOp = "cli/parse_config";
  auto bad = [&](const char* key, const std::string& why) {
    throw Error(ErrorKind::ConfigError, kOp, std::string(key) + ": " + why);
  };
  if (c.epochs < 1) bad("epochs", "must be >= 1");
  if (c.batch_size < 1) bad("batch_size", "must be >= 1");
  if (!(c.peak_lr > 0.0) || !std::isfinite(c.peak_lr)) bad("peak_lr", "must be positive");
  if (!(c.weight_decay >= 0.0) || !std::isfinite(c.weight_decay)) bad("weight_decay", "must be >= 0");
  if (!(c.warmup_fraction > 0.0 && c.warmup_fraction < 1.0)) bad("warmup_fraction", "must be in (0, 1)");
  if (!(c.tau > 0.0) || !std::isfinite(c.tau)) bad("tau", "must be positive");
  if (!(c.alpha >= 0.0)) bad("alpha", "must be >= 0");
  if (!(c.beta >= 0.0)) bad("beta", "must be >= 0");
  if (!(c.alpha + c.beta < 1.0)) bad("alpha", "alpha + beta must be < 1");
  if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0)) bad("adam_beta1", "must be in [0, 1)");
  if (!(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0)) bad("adam_beta2", "must be in [0, 1)");
  if (!(c.adam_epsilon > 0.0)) bad("adam_epsilon", "must be positive");
  if (c.context_length < 1) bad("context_length", "must be >= 1");
  if (c.vocab_size < 2) bad("vocab_size", "must be >= 2");
  if (c.text_embed_dim < 1) bad("text_embed_dim", "must be >= 1");
  if (c.embed_dim < 1 || c.embed_dim > 512) bad("embed_dim", "must be in [1, 512]");
  for (auto w : c.image_hidden)
    if (w < 1) bad("image_hidden", "layer widths must be >= 1");
  for (auto w : c.text_hidden)
    if (w < 1) bad("text_hidden", "layer widths must be >= 1");
}

EncoderConfig encoder_config(const TrainConfig& config, std::size_t feature_dim) {
  return {feature_dim,        config.image_hidden, config.vocab_size, config.text_embed_dim,
          config.text_hidden, config.embed_dim,    config.activation};
}

AdamWHyper adamw_hyper(const TrainConfig& config) {
  return {config.adam_beta1, config.adam_beta2, config.adam_epsilon, config.weight_decay};
}

std::vector<TokenSequence> class_tokens(const ConceptVocabulary& vocab, const TrainConfig& config) {
  std::vector<TokenSequence> out;
  out.reserve(vocab.size());
  for (const auto& c : vocab.concepts())
    out.push_back(tokenize(render_caption(c, config.context_mode, config.prompt),
                           config.context_length, config.vocab_size));
  return out;
}

Matrix embed_classes(const EncoderParams& params, const ConceptVocabulary& vocab,
                     const TrainConfig& config) {
  const auto tokens = class_tokens(vocab, config);
  return forward_text(params, tokens).embeddings;
}

Matrix embed_samples(const EncoderParams& params, const Dataset& dataset,
                     const std::vector<std::size_t>& indices) {
  if (indices.empty()) return Matrix(0, params.embed_dim());
  return forward_image(params, dataset.features(indices)).embeddings;
}

TrainResult train(const TrainConfig& config, const Dataset& dataset) {
  constexpr const char* kOp = "train-engine/train";
  validate(config);
  if (dataset.vocabulary.empty() || dataset.samples.empty())
    throw Error(ErrorKind::EmptySpec, kOp, "dataset has no concepts or samples");
  if (config.cst_enabled) validate_smoothing(config.alpha, config.beta, kOp);

  const auto tokens = class_tokens(dataset.vocabulary, config);
  TrainResult result;
  result.params = init_params(encoder_config(config, dataset.feature_dim), derive_seed(config.seed, 10));
  auto state = init_optimizer_state(result.params);
  const auto hyper = adamw_hyper(config);

  // The schedule needs the total step count, so plan every epoch up front.
  BatchSampler sampler(dataset, config.batch_size, derive_seed(config.seed, 11));
  std::vector<BatchPlan> plans;
  std::uint64_t total_steps = 0;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    plans.push_back(sampler.next_epoch());
    total_steps += plans.back().batches.size();
  }

  const auto val = dataset.indices(Split::val);
  const auto val_labels = dataset.labels(val);
  std::vector<int> class_ids(dataset.vocabulary.size());
  for (std::size_t i = 0; i < class_ids.size(); ++i) class_ids[i] = static_cast<int>(i);
  const std::vector<int> r1{1};

  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& batch : plans[epoch].batches) {
      std::vector<Concept> concepts;
      std::vector<TokenSequence> batch_tokens;
      for (auto idx : batch) {
        const int cid = dataset.samples[idx].concept_id;
        concepts.push_back(dataset.vocabulary.at(cid));
        batch_tokens.push_back(tokens[static_cast<std::size_t>(cid)]);
      }
      const auto image = forward_image(result.params, dataset.features(batch));
      const auto text = forward_text(result.params, batch_tokens);
      const SoftLabelMatrix targets = config.cst_enabled
                                          ? build_soft_label_matrix(concepts, config.alpha, config.beta)
                                          : hard_label_matrix(batch.size());
      const auto logits = similarity_matrix(image.embeddings, text.embeddings, config.tau);

      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.batch_size = batch.size();
      rec.lr = lr_at(step, total_steps, config.peak_lr, config.warmup_fraction);
      rec.loss.loss_i2t = soft_infonce(logits, targets, Direction::image_to_text);
      rec.loss.loss_t2i = soft_infonce(logits, targets, Direction::text_to_image);
      rec.loss.loss_total = (rec.loss.loss_i2t + rec.loss.loss_t2i) / 2.0;

      const auto d_emb = loss_gradients(image.embeddings, text.embeddings, logits, targets);
      const auto grads = backward(result.params, image.cache, text.cache, d_emb.dV, d_emb.dT);
      try {
        adamw_step(result.params, grads, state, rec.lr, hyper);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonFiniteGradient) throw;
        result.log.skipped_steps.push_back(step);
      }
      result.log.steps.push_back(rec);
      ++step;
    }

    if (!val.empty()) {
      const Matrix images = embed_samples(result.params, dataset, val);
      const Matrix captions = forward_text(result.params, tokens).embeddings;
      const auto r = class_recall_at_k(images, val_labels, captions, class_ids, r1);
      result.log.epochs.push_back({epoch, r.i2t.at(1), r.t2i.at(1)});
    }
  }
  return result;
}

void write_train_log(const TrainLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "train-engine/write_train_log", "cannot open " + path.string());
  for (const auto& s : log.steps) {
    nlohmann::json j = {{"type", "step"},
                        {"step", s.step},
                        {"epoch", s.epoch},
                        {"batch_size", s.batch_size},
                        {"lr", s.lr},
                        {"loss_i2t", s.loss.loss_i2t},
                        {"loss_t2i", s.loss.loss_t2i},
                        {"loss_total", s.loss.loss_total}};
    out << j.dump() << '\n';
  }
  for (const auto& e : log.epochs) {
    nlohmann::json j = {{"type", "epoch"},
                        {"epoch", e.epoch},
                        {"val_r1_i2t", e.val_r1_i2t},
                        {"val_r1_t2i", e.val_r1_t2i}};
    out << j.dump() << '\n';
  }
  for (auto s : log.skipped_steps) out << nlohmann::json{{"type", "skipped"}, {"step", s}}.dump() << '\n';
  if (!out) throw Error(ErrorKind::IoError, "train-engine/write_train_log", "write failed");
}

}  // namespace cstalign
