#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "swd/corpus.hpp"
#include "swd/model.hpp"
#include "swd/rouge.hpp"
#include "swd/trainer.hpp"

namespace swd {

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// `key = value` lines; `#` starts a comment, blank lines are skipped.
/// Throws ConfigError naming `source` and the line on malformed input.
std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& source = "config");
std::vector<KeyValue> read_key_values(const std::filesystem::path& path);

bool parse_bool(std::string_view key, std::string_view value);
std::size_t parse_size(std::string_view key, std::string_view value);
std::uint64_t parse_u64(std::string_view key, std::string_view value);
double parse_double(std::string_view key, std::string_view value);

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  CorpusOptions corpus;
  rouge::Selector rouge;
};

/// Accepted keys with a one-line description each.
const std::vector<std::pair<std::string, std::string>>& run_config_schema();

/// Throws ConfigError on an unknown key or a malformed value.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);
/// `key=value` as given on the command line.
void apply_override(RunConfig& config, std::string_view assignment);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace swd
