#pragma once

// Run configuration shared by every subcommand: loaded from a JSON file,
// then overridden by flags, and echoed (with its hash) into every output.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stereoind/judge.hpp"
#include "stereoind/prompt.hpp"
#include "stereoind/scoring.hpp"

namespace stereoind {

struct BackendConfig {
  std::string kind = "replay";  // "replay" or "http"
  std::string replay_fixtures;  // may contain "{k}" for per-shot fixtures
  judge::HttpBackendConfig http;
};

struct CorpusConfig {
  std::vector<std::string> bias_types;
  std::string direction = "stereo";  // "stereo", "antistereo" or "" for both
  std::string exclusions;
  std::string match = "normalized-text";
  std::string text_column = "text";
  std::string score_column = "score";
};

struct PathConfig {
  std::string input;
  std::string output;
  std::string raw_dir;
  std::string gold;
  std::string reference;
  std::string model;
};

struct RunConfig {
  BackendConfig backend;
  prompt::PromptConfig prompt;
  judge::JudgeParams judge;
  scoring::FitOptions fit;
  bool include_signal_word = false;
  CorpusConfig corpus;
  PathConfig paths;
  bool deterministic = false;  // forces temperature 0
  std::string run_id;

  // Throws ConfigError on an invalid combination.
  void validate() const;
  // Explicit run id, or one derived from the config hash.
  std::string effective_run_id() const;
};

RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const json& doc);
ordered_json run_config_to_json(const RunConfig& config);

// FNV-1a 64 over the compact JSON echo, as 16 hex digits.
std::string config_hash(const RunConfig& config);

// {"config_hash", "config"} block embedded in output metadata.
ordered_json config_meta(const RunConfig& config);

}  // namespace stereoind
