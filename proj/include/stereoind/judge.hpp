#pragma once

// Model backends that turn a prompt bundle plus a sentence into raw
// completion text: an OpenAI-compatible chat-completions client with retry
// and backoff, and a replay backend serving canned completions.

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stereoind/errors.hpp"
#include "stereoind/prompt.hpp"

namespace stereoind::judge {

struct JudgeParams {
  std::string model = "gpt-4";
  double temperature = 0.7;
  int max_tokens = 1024;
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 3;  // retries after the first attempt
  int parallelism = 4;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds backoff_cap{8'000};

  void validate() const;
};

enum class FailureKind { transport, credential, timeout, replay_miss, protocol };

std::string_view to_string(FailureKind kind) noexcept;

class JudgeError : public Error {
 public:
  JudgeError(FailureKind kind, const std::string& what, int attempts = 1)
      : Error(what), kind_(kind), attempts_(attempts) {}

  FailureKind kind() const noexcept { return kind_; }
  int attempts() const noexcept { return attempts_; }

 private:
  FailureKind kind_;
  int attempts_;
};

class CredentialError : public JudgeError {
 public:
  explicit CredentialError(const std::string& what, int attempts = 0)
      : JudgeError(FailureKind::credential, what, attempts) {}
};

class TransportError : public JudgeError {
 public:
  explicit TransportError(const std::string& what, int attempts = 1)
      : JudgeError(FailureKind::transport, what, attempts) {}
};

class TimeoutError : public JudgeError {
 public:
  explicit TimeoutError(const std::string& what, int attempts = 1)
      : JudgeError(FailureKind::timeout, what, attempts) {}
};

struct Failure {
  FailureKind kind = FailureKind::transport;
  std::string message;
};

struct RawCompletion {
  std::string sentence_id;
  std::string text;  // verbatim, malformed output included
  std::chrono::milliseconds latency{0};
  std::string backend;
  int attempts = 0;
  std::optional<Failure> failure;

  bool ok() const noexcept { return !failure.has_value(); }
};

// Implementations must be safe to call from several threads at once.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string identity() const = 0;

  // Throws JudgeError (or a subclass) when no completion could be obtained.
  virtual RawCompletion complete(const prompt::PromptBundle& bundle, std::string_view sentence,
                                 const JudgeParams& params) = 0;
};

// Canned completions keyed by sentence text. An entry either applies to
// every prompt stage or is split per stage ("single", "label", "content").
class ReplayBackend : public Backend {
 public:
  struct Entry {
    std::optional<std::string> any_stage;
    std::map<std::string, std::string> by_stage;
  };

  ReplayBackend() = default;
  explicit ReplayBackend(std::map<std::string, Entry> fixtures) : fixtures_(std::move(fixtures)) {}

  // JSON object: sentence -> completion string, or sentence -> {stage: completion}.
  static ReplayBackend from_file(const std::filesystem::path& path);
  static ReplayBackend from_json(const nlohmann::json& doc);

  void add(std::string sentence, std::string completion);
  void add(std::string sentence, prompt::Stage stage, std::string completion);
  std::size_t size() const noexcept { return fixtures_.size(); }

  std::string identity() const override { return "replay"; }
  RawCompletion complete(const prompt::PromptBundle& bundle, std::string_view sentence,
                         const JudgeParams& params) override;

 private:
  std::map<std::string, Entry> fixtures_;
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;

struct HttpBackendConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string chat_path = "/chat/completions";
  std::string credential_env = "OPENAI_API_KEY";
  // Local OpenAI-compatible servers often run without a key.
  bool require_credential = true;
};

class HttpBackend : public Backend {
 public:
  // Reads the credential from the environment; throws CredentialError when
  // it is required and missing, before any request is made.
  explicit HttpBackend(HttpBackendConfig config, SleepFn sleep = {});

  std::string identity() const override;
  RawCompletion complete(const prompt::PromptBundle& bundle, std::string_view sentence,
                         const JudgeParams& params) override;

  // Request body for one sentence; exposed for inspection in tests.
  static nlohmann::ordered_json request_body(const prompt::PromptBundle& bundle,
                                             std::string_view sentence, const JudgeParams& params);

 private:
  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  std::string credential_;
  SleepFn sleep_;
};

// Delay before retry number `retry` (1-based): base * 2^(retry-1), capped.
std::chrono::milliseconds backoff_delay(int retry, const JudgeParams& params);

struct BatchItem {
  std::string sentence_id;
  std::string sentence;
  prompt::PromptBundle bundle;
};

// Runs at most params.parallelism requests at once. Results come back in
// input order; failures are recorded per item and never abort the batch.
std::vector<RawCompletion> complete_batch(Backend& backend, const std::vector<BatchItem>& items,
                                          const JudgeParams& params);

// Single call with errors folded into RawCompletion::failure.
RawCompletion complete_captured(Backend& backend, const BatchItem& item, const JudgeParams& params);

}  // namespace stereoind::judge
