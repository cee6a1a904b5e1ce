#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cstalign/train.hpp"

namespace cstalign {

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Applies one `key = value` setting. Throws ConfigError naming the key when
/// the key is unknown or the value does not parse.
void apply_setting(TrainConfig& config, std::string_view key, std::string_view value);

/// Flat `key = value` text, '#' starts a comment. Unset keys keep defaults.
TrainConfig parse_config_text(std::string_view text);

/// Reads `path` (when non-empty), then applies `overrides` in order, then
/// validates the result.
TrainConfig parse_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

// Every key in a fixed order, one "key = value" per line; parses back to the same config.
std::string canonical_config(const TrainConfig& config);

// 16 hex digits of FNV-1a 64 over canonical_config().
std::string config_hash(const TrainConfig& config);

}  // namespace cstalign
