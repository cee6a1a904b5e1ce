#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cstalign/checkpoint.hpp"
#include "cstalign/config.hpp"
#include "cstalign/error.hpp"
#include "cstalign/pipeline.hpp"
#include "cstalign/simd/kernels.hpp"
#include "cstalign/synth.hpp"

namespace fs = std::filesystem;
using namespace cstalign;

namespace {

// Flags shared by train / eval / ablate. Later sources win: file, then
// --set in order, then the named flags.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::string alpha, beta, prompt, context, seed, epochs;
  bool prompt_given = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key = value config file");
    app->add_option("--set", sets, "override one key, key=value (repeatable)");
    app->add_option("--alpha", alpha, "same-crop smoothing mass");
    app->add_option("--beta", beta, "same-condition smoothing mass");
    app->add_option("--prompt", prompt, "caption prompt prefix");
    app->add_option("--context", context, "long | short");
    app->add_option("--seed", seed, "training seed");
    app->add_option("--epochs", epochs, "training epochs");
  }

  TrainConfig resolve() const {
    ConfigOverrides ov;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos)
        throw Error(ErrorKind::ConfigError, "cli/parse_config", "--set expects key=value, got '" + s + "'");
      ov.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    auto add = [&](const char* key, const std::string& v) {
      if (!v.empty()) ov.emplace_back(key, v);
    };
    add("alpha", alpha);
    add("beta", beta);
    add("context_mode", context);
    add("seed", seed);
    add("epochs", epochs);
    // An explicitly empty prompt is legal, so test the option, not the string.
    if (prompt_given) ov.emplace_back("prompt", prompt);
    return parse_config(config_path, ov);
  }
};

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto piece = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    double v = 0.0;
    auto [p, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), v);
    if (ec != std::errc() || p != piece.data() + piece.size() || piece.empty())
      throw Error(ErrorKind::ConfigError, "cli", std::string(what) + ": cannot parse '" + piece + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

EvalOptions eval_options(const std::string& split, const std::string& shots, std::size_t runs,
                         std::uint64_t seed) {
  EvalOptions o;
  o.split = parse_split(split);
  if (!shots.empty())
    for (double s : parse_list(shots, "--probe-shots")) {
      if (s < 1 || s != static_cast<double>(static_cast<std::size_t>(s)))
        throw Error(ErrorKind::ConfigError, "cli", "--probe-shots must be positive integers");
      o.probe_shots.push_back(static_cast<std::size_t>(s));
    }
  o.probe_runs = runs;
  o.probe_seed = seed;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive dual-encoder training with context-aware soft targets"};
  app.require_subcommand(1);
  std::string simd;
  app.add_option("--simd", simd, "force kernel level: scalar | avx2 | neon");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset manifest");
  std::string gen_out, gen_vocab, gen_preset = "separable", gen_split = "0.7,0.1,0.2", gen_vocab_out;
  std::uint64_t gen_seed = 0;
  std::size_t n_crops = 0, n_conds = 0, n_classes = 0, per_class = 0, feat_dim = 0;
  double crop_sig = -1, dis_sig = -1, cls_sig = -1, noise = -1;
  gen->add_option("--out", gen_out, "manifest path")->required();
  gen->add_option("--preset", gen_preset, "separable | correlated")->capture_default_str();
  gen->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
  gen->add_option("--vocab", gen_vocab, "TSV vocabulary (crop, condition, description) to use as classes");
  gen->add_option("--write-vocab", gen_vocab_out, "also write the dataset vocabulary as TSV");
  gen->add_option("--crops", n_crops);
  gen->add_option("--conditions", n_conds);
  gen->add_option("--classes", n_classes);
  gen->add_option("--samples-per-class", per_class);
  gen->add_option("--feature-dim", feat_dim);
  gen->add_option("--crop-signal", crop_sig);
  gen->add_option("--disease-signal", dis_sig);
  gen->add_option("--class-signal", cls_sig);
  gen->add_option("--noise", noise);
  gen->add_option("--split", gen_split, "train,val,test ratios")->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "train one model and evaluate it");
  ConfigFlags tr_flags;
  tr_flags.attach(tr);
  std::string tr_data, tr_out;
  tr->add_option("--data", tr_data, "dataset manifest")->required();
  tr->add_option("--out", tr_out, "run directory")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint into a metrics file");
  ConfigFlags ev_flags;
  ev_flags.attach(ev);
  std::string ev_data, ev_ckpt, ev_out, ev_split = "test", ev_shots;
  std::size_t ev_runs = 10;
  ev->add_option("--data", ev_data, "dataset manifest")->required();
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--out", ev_out, "metrics file (JSONL)")->required();
  ev->add_option("--split", ev_split, "train | val | test")->capture_default_str();
  ev->add_option("--probe-shots", ev_shots, "comma list of shots per class, e.g. 1,4,16");
  ev->add_option("--probe-runs", ev_runs, "probe repetitions per shot count")->capture_default_str();

  // ablate
  auto* ab = app.add_subcommand("ablate", "run the context x soft-target grid");
  ConfigFlags ab_flags;
  ab_flags.attach(ab);
  std::string ab_data, ab_out;
  ab->add_option("--data", ab_data, "dataset manifest")->required();
  ab->add_option("--out", ab_out, "output directory")->required();

  // report
  auto* rp = app.add_subcommand("report", "render tables from metrics files");
  std::vector<std::string> rp_metrics;
  std::string rp_out;
  rp->add_option("metrics", rp_metrics, "metrics files or run directories")->required();
  rp->add_option("--out", rp_out, "write the report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  tr_flags.prompt_given = tr->count("--prompt") > 0;
  ev_flags.prompt_given = ev->count("--prompt") > 0;
  ab_flags.prompt_given = ab->count("--prompt") > 0;

  try {
    if (!simd.empty()) {
      if (simd == "scalar") simd::set_active_level(simd::Level::scalar);
      else if (simd == "avx2") simd::set_active_level(simd::Level::avx2);
      else if (simd == "neon") simd::set_active_level(simd::Level::neon);
      else throw Error(ErrorKind::ConfigError, "cli", "--simd must be scalar, avx2 or neon");
    }

    if (*gen) {
      SynthSpec spec;
      if (gen_preset == "separable") spec = separable_preset(gen_seed);
      else if (gen_preset == "correlated") spec = correlated_preset(gen_seed);
      else throw Error(ErrorKind::ConfigError, "cli/gen-data", "unknown preset '" + gen_preset + "'");
      if (n_crops || n_conds || n_classes) {
        if (n_crops) spec.n_crops = n_crops;
        if (n_conds) spec.n_conditions = n_conds;
        spec.classes = populate_classes(spec.n_crops, spec.n_conditions,
                                        n_classes ? n_classes : spec.classes.size(), gen_seed);
      }
      if (per_class) spec.samples_per_class = per_class;
      if (feat_dim) spec.feature_dim = feat_dim;
      if (crop_sig >= 0) spec.crop_signal = crop_sig;
      if (dis_sig >= 0) spec.disease_signal = dis_sig;
      if (cls_sig >= 0) spec.class_signal = cls_sig;
      if (noise >= 0) spec.noise_sigma = noise;
      if (!gen_vocab.empty()) spec = spec_from_records(read_vocabulary_file(gen_vocab), spec);
      const auto r = parse_list(gen_split, "--split");
      if (r.size() != 3) throw Error(ErrorKind::ConfigError, "cli/gen-data", "--split needs three ratios");
      const auto ds = split_dataset(generate_dataset(spec), {r[0], r[1], r[2]}, gen_seed);
      save_manifest(ds, gen_out);
      if (!gen_vocab_out.empty()) write_vocabulary_file(ds.vocabulary, gen_vocab_out);
      std::printf("wrote %zu samples, %zu classes to %s\n", ds.samples.size(), ds.vocabulary.size(),
                  gen_out.c_str());
    } else if (*tr) {
      const auto config = tr_flags.resolve();
      const auto ds = load_manifest(tr_data);
      const auto m = run_training(config, ds, tr_data, tr_out);
      std::printf("config %s\ncheckpoint %s\nmetrics %s\n", m.config_hash.c_str(),
                  m.checkpoint_path.string().c_str(), m.metrics_path.string().c_str());
    } else if (*ev) {
      const auto config = ev_flags.resolve();
      const auto ds = load_manifest(ev_data);
      const auto params = load_checkpoint(ev_ckpt);
      const auto opts = eval_options(ev_split, ev_shots, ev_runs, config.seed);
      const auto report = evaluate(params, ds, config, opts);
      write_metrics(report, config, opts, ev_out);
      std::printf("config %s\nmetrics %s\n", config_hash(config).c_str(), ev_out.c_str());
    } else if (*ab) {
      const auto config = ab_flags.resolve();
      const auto ds = load_manifest(ab_data);
      const auto runs = run_ablate(config, ds, ab_data, ab_out);
      for (const auto& m : runs) std::printf("%-10s %s\n", m.label.c_str(), m.config_hash.c_str());
      std::printf("report %s\n", (fs::path(ab_out) / "ablation_report.txt").string().c_str());
    } else if (*rp) {
      std::vector<MetricsFile> files;
      for (const auto& p : rp_metrics)
        files.push_back(read_metrics(fs::is_directory(p) ? fs::path(p) / "metrics.jsonl" : fs::path(p)));
      const auto text = render_report(files);
      if (rp_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(rp_out);
        if (!out) throw Error(ErrorKind::IoError, "cli/report", "cannot write " + rp_out);
        out << text;
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitOk;
}
