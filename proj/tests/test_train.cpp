#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "cstalign/error.hpp"
#include "cstalign/synth.hpp"
#include "cstalign/train.hpp"

using namespace cstalign;
namespace fs = std::filesystem;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::IoError;
}

// Small, well separated, fast to train.
Dataset small_data(std::uint64_t seed, std::size_t classes = 6, std::size_t per_class = 30) {
  SynthSpec s;
  s.n_crops = 3;
  s.n_conditions = 3;
  s.classes = populate_classes(3, 3, classes, seed);
  s.samples_per_class = per_class;
  s.feature_dim = 8;
  s.noise_sigma = 0.2;
  s.seed = seed;
  return split_dataset(generate_dataset(s), {0.6, 0.2, 0.2}, seed);
}

TrainConfig small_config(std::uint64_t seed = 0) {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 4;
  c.peak_lr = 3e-3;
  c.seed = seed;
  c.vocab_size = 256;
  c.text_embed_dim = 16;
  c.image_hidden = {16};
  c.text_hidden = {16};
  c.embed_dim = 8;
  c.context_length = 32;
  return c;
}

}  // namespace

TEST_CASE("one epoch on two separable classes lowers the loss") {
  SynthSpec s;
  s.n_crops = 2;
  s.n_conditions = 1;
  s.classes = {{0, 0}, {1, 0}};
  s.samples_per_class = 40;
  s.feature_dim = 4;
  s.noise_sigma = 0.05;
  s.crop_signal = 3.0;
  const auto d = generate_dataset(s);  // all train
  auto c = small_config();
  c.epochs = 1;
  c.batch_size = 2;
  c.peak_lr = 1e-2;
  const auto r = train(c, d);
  REQUIRE(r.log.steps.size() == 40);
  CHECK(r.log.steps.back().loss.loss_total < r.log.steps.front().loss.loss_total);
  CHECK(r.log.epochs.empty());  // no val split, nothing to log
}

TEST_CASE("training is bit-for-bit deterministic") {
  const auto d = small_data(1);
  const auto a = train(small_config(4), d), b = train(small_config(4), d);
  CHECK(a.params == b.params);
  REQUIRE(a.log.steps.size() == b.log.steps.size());
  for (std::size_t i = 0; i < a.log.steps.size(); ++i) {
    CHECK(a.log.steps[i].loss.loss_total == b.log.steps[i].loss.loss_total);
    CHECK(a.log.steps[i].lr == b.log.steps[i].lr);
  }
  const auto c = train(small_config(5), d);
  CHECK_FALSE(a.params == c.params);
}

TEST_CASE("disabled soft targets ignore alpha and beta") {
  const auto d = small_data(2);
  auto off = small_config(1);
  off.cst_enabled = false;
  off.alpha = 0.3;
  off.beta = 0.2;
  auto zero = small_config(1);
  zero.alpha = 0.0;
  zero.beta = 0.0;
  const auto a = train(off, d), b = train(zero, d);
  CHECK(a.params == b.params);
  for (std::size_t i = 0; i < a.log.steps.size(); ++i)
    CHECK(a.log.steps[i].loss.loss_total == b.log.steps[i].loss.loss_total);
  // And soft targets do change the trajectory.
  CHECK_FALSE(train(small_config(1), d).params == a.params);
}

TEST_CASE("log structure") {
  const auto d = small_data(3);
  const auto c = small_config();
  const auto r = train(c, d);
  CHECK(r.log.epochs.size() == c.epochs);
  CHECK(r.log.skipped_steps.empty());
  for (std::size_t i = 0; i < r.log.steps.size(); ++i) {
    const auto& s = r.log.steps[i];
    CHECK(s.step == i);
    CHECK(s.batch_size <= c.batch_size);
    CHECK(s.loss.loss_total == (s.loss.loss_i2t + s.loss.loss_t2i) / 2);
    CHECK(std::isfinite(s.loss.loss_total));
  }
  CHECK(r.log.steps.front().lr == 0.0);
  CHECK(std::abs(r.log.steps.back().lr) < c.peak_lr);
  for (const auto& e : r.log.epochs) {
    CHECK(e.val_r1_i2t >= 0.0);
    CHECK(e.val_r1_i2t <= 1.0);
  }

  const auto path = fs::temp_directory_path() / "cst_train_log.jsonl";
  write_train_log(r.log, path);
  std::ifstream in(path);
  std::string line;
  std::size_t steps = 0, epochs = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.at("type") == "step") {
      ++steps;
      CHECK(j.contains("lr"));
      CHECK(j.contains("loss_i2t"));
      CHECK(j.contains("loss_t2i"));
      CHECK(j.contains("loss_total"));
    } else if (j.at("type") == "epoch") {
      ++epochs;
      CHECK(j.contains("val_r1_i2t"));
    }
  }
  CHECK(steps == r.log.steps.size());
  CHECK(epochs == r.log.epochs.size());
  fs::remove(path);
}

TEST_CASE("validation R@1 improves over the run on separable data") {
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = small_data(100 + seed);
    auto c = small_config(seed);
    c.epochs = 6;
    const auto r = train(c, d);
    const auto& first = r.log.epochs.front();
    const auto& last = r.log.epochs.back();
    const double f = (first.val_r1_i2t + first.val_r1_t2i) / 2, l = (last.val_r1_i2t + last.val_r1_t2i) / 2;
    improved += l >= f;
  }
  CHECK(improved >= 9);
}

TEST_CASE("bad inputs propagate") {
  const auto d = small_data(4);
  auto c = small_config();
  c.batch_size = 7;  // only 6 classes
  CHECK(kind_of([&] { train(c, d); }) == ErrorKind::BatchTooLarge);
  c = small_config();
  c.tau = 0.0;
  CHECK(kind_of([&] { train(c, d); }) == ErrorKind::ConfigError);
}

TEST_CASE("config validation names the key") {
  auto expect_key = [](TrainConfig c, const std::string& key) {
    try {
      validate(c);
      FAIL("expected ConfigError for " << key);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ConfigError);
      CHECK(std::string(e.what()).find(key) != std::string::npos);
    }
  };
  TrainConfig c;
  CHECK_NOTHROW(validate(c));
  c.alpha = 1.5;
  expect_key(c, "alpha");
  c = {};
  c.warmup_fraction = 1.0;
  expect_key(c, "warmup_fraction");
  c = {};
  c.epochs = 0;
  expect_key(c, "epochs");
  c = {};
  c.embed_dim = 513;
  expect_key(c, "embed_dim");
  c = {};
  c.adam_beta2 = 1.0;
  expect_key(c, "adam_beta2");
}

TEST_CASE("class captions follow the context mode") {
  const auto d = small_data(5);
  auto c = small_config();
  const auto long_tokens = class_tokens(d.vocabulary, c);
  c.context_mode = ContextMode::short_context;
  const auto short_tokens = class_tokens(d.vocabulary, c);
  REQUIRE(long_tokens.size() == d.vocabulary.size());
  for (std::size_t i = 0; i < long_tokens.size(); ++i) {
    CHECK(long_tokens[i].ids.size() == c.context_length);
    CHECK(short_tokens[i].pad_count > long_tokens[i].pad_count);
  }
  const auto params = init_params(encoder_config(c, d.feature_dim), 0);
  const auto e = embed_classes(params, d.vocabulary, c);
  CHECK(e.rows() == d.vocabulary.size());
  CHECK(e.cols() == c.embed_dim);
}
