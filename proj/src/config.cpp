#include "cstalign/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cstalign/error.hpp"

namespace cstalign {
namespace {

constexpr const char* kOp = "cli/parse_config";

[[noreturn]] void config_error(std::string_view key, const std::string& why) {
  throw Error(ErrorKind::ConfigError, kOp, std::string(key) + ": " + why);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double to_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    config_error(key, "expected a number, got '" + std::string(value) + "'");
  return out;
}

template <typename T>
T to_unsigned(std::string_view key, std::string_view value) {
  T out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    config_error(key, "expected a non-negative integer, got '" + std::string(value) + "'");
  return out;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  config_error(key, "expected true/false, got '" + std::string(value) + "'");
}

std::vector<std::size_t> to_widths(std::string_view key, std::string_view value) {
  std::vector<std::size_t> out;
  if (value.empty() || value == "none") return out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const auto comma = value.find(',', start);
    const auto part = trim(value.substr(start, comma == std::string_view::npos ? value.npos : comma - start));
    out.push_back(to_unsigned<std::size_t>(key, part));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string format(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::string join(const std::vector<std::size_t>& widths) {
  if (widths.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < widths.size(); ++i) out += (i ? "," : "") + std::to_string(widths[i]);
  return out;
}

}  // namespace

void apply_setting(TrainConfig& c, std::string_view key, std::string_view raw) {
  const auto value = trim(raw);
  try {
    if (key == "epochs") c.epochs = to_unsigned<std::size_t>(key, value);
    else if (key == "batch_size") c.batch_size = to_unsigned<std::size_t>(key, value);
    else if (key == "peak_lr") c.peak_lr = to_double(key, value);
    else if (key == "weight_decay") c.weight_decay = to_double(key, value);
    else if (key == "warmup_fraction") c.warmup_fraction = to_double(key, value);
    else if (key == "tau") c.tau = to_double(key, value);
    else if (key == "alpha") c.alpha = to_double(key, value);
    else if (key == "beta") c.beta = to_double(key, value);
    else if (key == "adam_beta1") c.adam_beta1 = to_double(key, value);
    else if (key == "adam_beta2") c.adam_beta2 = to_double(key, value);
    else if (key == "adam_epsilon") c.adam_epsilon = to_double(key, value);
    else if (key == "seed") c.seed = to_unsigned<std::uint64_t>(key, value);
    else if (key == "context_mode") c.context_mode = parse_context_mode(value);
    else if (key == "cst_enabled") c.cst_enabled = to_bool(key, value);
    else if (key == "prompt") c.prompt = std::string(value);
    else if (key == "context_length") c.context_length = to_unsigned<std::size_t>(key, value);
    else if (key == "vocab_size") c.vocab_size = to_unsigned<std::size_t>(key, value);
    else if (key == "text_embed_dim") c.text_embed_dim = to_unsigned<std::size_t>(key, value);
    else if (key == "image_hidden") c.image_hidden = to_widths(key, value);
    else if (key == "text_hidden") c.text_hidden = to_widths(key, value);
    else if (key == "embed_dim") c.embed_dim = to_unsigned<std::size_t>(key, value);
    else if (key == "activation") c.activation = parse_activation(value);
    else config_error(key, "unknown key");
  } catch (const Error& e) {
    if (e.operation() == kOp) throw;
    config_error(key, e.what());
  }
}

TrainConfig parse_config_text(std::string_view text) {
  TrainConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != view.npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == view.npos)
      throw Error(ErrorKind::ConfigError, kOp, "line " + std::to_string(line_no) + ": expected key = value");
    apply_setting(config, trim(view.substr(0, eq)), view.substr(eq + 1));
  }
  return config;
}

TrainConfig parse_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  TrainConfig config;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigError, kOp, "cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    config = parse_config_text(buf.str());
  }
  for (const auto& [key, value] : overrides) apply_setting(config, key, value);
  validate(config);
  return config;
}

std::string canonical_config(const TrainConfig& c) {
  std::ostringstream out;
  out << "epochs = " << c.epochs << '\n'
      << "batch_size = " << c.batch_size << '\n'
      << "peak_lr = " << format(c.peak_lr) << '\n'
      << "weight_decay = " << format(c.weight_decay) << '\n'
      << "warmup_fraction = " << format(c.warmup_fraction) << '\n'
      << "tau = " << format(c.tau) << '\n'
      << "alpha = " << format(c.alpha) << '\n'
      << "beta = " << format(c.beta) << '\n'
      << "adam_beta1 = " << format(c.adam_beta1) << '\n'
      << "adam_beta2 = " << format(c.adam_beta2) << '\n'
      << "adam_epsilon = " << format(c.adam_epsilon) << '\n'
      << "seed = " << c.seed << '\n'
      << "context_mode = " << to_string(c.context_mode) << '\n'
      << "cst_enabled = " << (c.cst_enabled ? "true" : "false") << '\n'
      << "prompt = " << c.prompt << '\n'
      << "context_length = " << c.context_length << '\n'
      << "vocab_size = " << c.vocab_size << '\n'
      << "text_embed_dim = " << c.text_embed_dim << '\n'
      << "image_hidden = " << join(c.image_hidden) << '\n'
      << "text_hidden = " << join(c.text_hidden) << '\n'
      << "embed_dim = " << c.embed_dim << '\n'
      << "activation = " << to_string(c.activation) << '\n';
  return out.str();
}

std::string config_hash(const TrainConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cstalign
