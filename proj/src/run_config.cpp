#include "stereoind/run_config.hpp"

#include <cstdio>

#include "stereoind/jsonl.hpp"

namespace stereoind {

namespace {

template <typename T>
void read_opt(const json& obj, const char* key, T& target) {
  if (obj.contains(key) && !obj[key].is_null()) target = obj[key].get<T>();
}

std::chrono::milliseconds read_ms(const json& obj, const char* key, std::chrono::milliseconds def) {
  if (obj.contains(key) && !obj[key].is_null()) return std::chrono::milliseconds(obj[key].get<long long>());
  return def;
}

}  // namespace

void RunConfig::validate() const {
  if (backend.kind != "replay" && backend.kind != "http") {
    throw ConfigError("backend kind must be 'replay' or 'http', got '" + backend.kind + "'");
  }
  if (corpus.direction != "stereo" && corpus.direction != "antistereo" && !corpus.direction.empty()) {
    throw ConfigError("direction must be 'stereo', 'antistereo' or empty");
  }
  if (corpus.match != "normalized-text" && corpus.match != "exact-text") {
    throw ConfigError("match must be 'normalized-text' or 'exact-text'");
  }
  prompt.validate();
  judge.validate();
  fit.validate();
}

std::string RunConfig::effective_run_id() const {
  return run_id.empty() ? "run-" + config_hash(*this).substr(0, 12) : run_id;
}

RunConfig run_config_from_json(const json& doc) {
  RunConfig c;
  if (!doc.is_object()) throw ConfigError("run config must be a JSON object");
  try {
    if (doc.contains("backend")) {
      const auto& b = doc["backend"];
      read_opt(b, "kind", c.backend.kind);
      read_opt(b, "replay_fixtures", c.backend.replay_fixtures);
      read_opt(b, "base_url", c.backend.http.base_url);
      read_opt(b, "chat_path", c.backend.http.chat_path);
      read_opt(b, "credential_env", c.backend.http.credential_env);
      read_opt(b, "require_credential", c.backend.http.require_credential);
    }
    if (doc.contains("prompt")) {
      const auto& p = doc["prompt"];
      read_opt(p, "shots", c.prompt.shots);
      read_opt(p, "attributes", c.prompt.attributes);
      if (p.contains("mode")) c.prompt.mode = prompt::mode_from_string(p["mode"].get<std::string>());
    }
    if (doc.contains("judge")) {
      const auto& j = doc["judge"];
      read_opt(j, "model", c.judge.model);
      read_opt(j, "temperature", c.judge.temperature);
      read_opt(j, "max_tokens", c.judge.max_tokens);
      read_opt(j, "max_retries", c.judge.max_retries);
      read_opt(j, "parallelism", c.judge.parallelism);
      c.judge.timeout = read_ms(j, "timeout_ms", c.judge.timeout);
      c.judge.backoff_base = read_ms(j, "backoff_base_ms", c.judge.backoff_base);
      c.judge.backoff_cap = read_ms(j, "backoff_cap_ms", c.judge.backoff_cap);
    }
    if (doc.contains("fit")) {
      const auto& f = doc["fit"];
      read_opt(f, "folds", c.fit.folds);
      read_opt(f, "test_fraction", c.fit.test_fraction);
      read_opt(f, "seed", c.fit.seed);
      read_opt(f, "include_signal_word", c.include_signal_word);
    }
    if (doc.contains("corpus")) {
      const auto& k = doc["corpus"];
      read_opt(k, "bias_types", c.corpus.bias_types);
      read_opt(k, "direction", c.corpus.direction);
      read_opt(k, "exclusions", c.corpus.exclusions);
      read_opt(k, "match", c.corpus.match);
      read_opt(k, "text_column", c.corpus.text_column);
      read_opt(k, "score_column", c.corpus.score_column);
    }
    if (doc.contains("paths")) {
      const auto& p = doc["paths"];
      read_opt(p, "input", c.paths.input);
      read_opt(p, "output", c.paths.output);
      read_opt(p, "raw_dir", c.paths.raw_dir);
      read_opt(p, "gold", c.paths.gold);
      read_opt(p, "reference", c.paths.reference);
      read_opt(p, "model", c.paths.model);
    }
    read_opt(doc, "deterministic", c.deterministic);
    read_opt(doc, "run_id", c.run_id);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(doc);
}

ordered_json run_config_to_json(const RunConfig& c) {
  ordered_json j;
  j["backend"] = {{"kind", c.backend.kind},
                  {"replay_fixtures", c.backend.replay_fixtures},
                  {"base_url", c.backend.http.base_url},
                  {"chat_path", c.backend.http.chat_path},
                  {"credential_env", c.backend.http.credential_env},
                  {"require_credential", c.backend.http.require_credential}};
  j["prompt"] = {{"shots", c.prompt.shots},
                 {"attributes", c.prompt.attributes},
                 {"mode", prompt::to_string(c.prompt.mode)}};
  j["judge"] = {{"model", c.judge.model},
                {"temperature", c.judge.temperature},
                {"max_tokens", c.judge.max_tokens},
                {"timeout_ms", c.judge.timeout.count()},
                {"max_retries", c.judge.max_retries},
                {"parallelism", c.judge.parallelism},
                {"backoff_base_ms", c.judge.backoff_base.count()},
                {"backoff_cap_ms", c.judge.backoff_cap.count()}};
  j["fit"] = {{"folds", c.fit.folds},
              {"test_fraction", c.fit.test_fraction},
              {"seed", c.fit.seed},
              {"include_signal_word", c.include_signal_word}};
  j["corpus"] = {{"bias_types", c.corpus.bias_types},
                 {"direction", c.corpus.direction},
                 {"exclusions", c.corpus.exclusions},
                 {"match", c.corpus.match},
                 {"text_column", c.corpus.text_column},
                 {"score_column", c.corpus.score_column}};
  j["paths"] = {{"input", c.paths.input},   {"output", c.paths.output},
                {"raw_dir", c.paths.raw_dir}, {"gold", c.paths.gold},
                {"reference", c.paths.reference}, {"model", c.paths.model}};
  j["deterministic"] = c.deterministic;
  j["run_id"] = c.run_id;
  return j;
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : run_config_to_json(config).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ordered_json config_meta(const RunConfig& config) {
  return {{"config_hash", config_hash(config)}, {"config", run_config_to_json(config)}};
}

}  // namespace stereoind
