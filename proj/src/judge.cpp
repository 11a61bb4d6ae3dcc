#include "stereoind/judge.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "stereoind/jsonl.hpp"

namespace stereoind::judge {

namespace {

using Clock = std::chrono::steady_clock;

std::chrono::milliseconds since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
}

std::pair<std::string, std::string> split_base_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base URL needs a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  auto path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

std::optional<std::chrono::milliseconds> retry_after(const httplib::Result& res) {
  if (!res || !res->has_header("Retry-After")) return std::nullopt;
  try {
    return std::chrono::milliseconds(
        static_cast<long long>(std::stod(res->get_header_value("Retry-After")) * 1000.0));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

std::string_view to_string(FailureKind kind) noexcept {
  switch (kind) {
    case FailureKind::transport: return "transport";
    case FailureKind::credential: return "credential";
    case FailureKind::timeout: return "timeout";
    case FailureKind::replay_miss: return "replay-miss";
    case FailureKind::protocol: return "protocol";
  }
  return "";
}

void JudgeParams::validate() const {
  if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  if (timeout.count() <= 0) throw ConfigError("timeout must be positive");
}

std::chrono::milliseconds backoff_delay(int retry, const JudgeParams& params) {
  auto delay = params.backoff_base;
  for (int i = 1; i < retry && delay < params.backoff_cap; ++i) delay *= 2;
  return std::min(delay, params.backoff_cap);
}

ReplayBackend ReplayBackend::from_file(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

ReplayBackend ReplayBackend::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw FormatError("replay fixtures must be a JSON object");
  ReplayBackend backend;
  for (const auto& [sentence, value] : doc.items()) {
    Entry entry;
    if (value.is_string()) {
      entry.any_stage = value.get<std::string>();
    } else if (value.is_object()) {
      for (const auto& [stage, text] : value.items()) {
        entry.by_stage[stage] = text.get<std::string>();
      }
    } else {
      throw FormatError("replay fixture for '" + sentence + "' must be a string or object");
    }
    backend.fixtures_[sentence] = std::move(entry);
  }
  return backend;
}

void ReplayBackend::add(std::string sentence, std::string completion) {
  fixtures_[std::move(sentence)].any_stage = std::move(completion);
}

void ReplayBackend::add(std::string sentence, prompt::Stage stage, std::string completion) {
  fixtures_[std::move(sentence)].by_stage[std::string(prompt::to_string(stage))] =
      std::move(completion);
}

RawCompletion ReplayBackend::complete(const prompt::PromptBundle& bundle,
                                      std::string_view sentence, const JudgeParams&) {
  auto it = fixtures_.find(std::string(sentence));
  if (it != fixtures_.end()) {
    auto stage = it->second.by_stage.find(std::string(prompt::to_string(bundle.stage)));
    const std::string* text = nullptr;
    if (stage != it->second.by_stage.end()) {
      text = &stage->second;
    } else if (it->second.any_stage) {
      text = &*it->second.any_stage;
    }
    if (text) {
      RawCompletion out;
      out.text = *text;
      out.backend = identity();
      out.attempts = 1;
      return out;
    }
  }
  throw JudgeError(FailureKind::replay_miss,
                   "no replay fixture for sentence '" + std::string(sentence) + "'");
}

HttpBackend::HttpBackend(HttpBackendConfig config, SleepFn sleep)
    : config_(std::move(config)), sleep_(std::move(sleep)) {
  std::tie(scheme_host_port_, path_) = split_base_url(config_.base_url);
  path_ += config_.chat_path;
  if (!config_.credential_env.empty()) {
    if (const char* value = std::getenv(config_.credential_env.c_str())) credential_ = value;
  }
  if (config_.require_credential && credential_.empty()) {
    throw CredentialError("environment variable " + config_.credential_env +
                          " is not set; no request was sent");
  }
  if (!sleep_) {
    sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

std::string HttpBackend::identity() const { return "http:" + config_.base_url; }

nlohmann::ordered_json HttpBackend::request_body(const prompt::PromptBundle& bundle,
                                                 std::string_view sentence,
                                                 const JudgeParams& params) {
  nlohmann::ordered_json body;
  body["model"] = params.model;
  body["messages"] = bundle.with_sentence(sentence).to_json();
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_tokens;
  return body;
}

RawCompletion HttpBackend::complete(const prompt::PromptBundle& bundle, std::string_view sentence,
                                    const JudgeParams& params) {
  const auto body = request_body(bundle, sentence, params).dump();
  httplib::Headers headers;
  if (!credential_.empty()) headers.emplace("Authorization", "Bearer " + credential_);

  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(params.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(params.timeout - seconds);

  const auto start = Clock::now();
  FailureKind last_kind = FailureKind::transport;
  std::string last_message;
  const int max_attempts = params.max_retries + 1;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());

    const auto attempt_start = Clock::now();
    auto res = client.Post(path_, headers, body, "application/json");
    std::optional<std::chrono::milliseconds> hinted;
    if (!res) {
      auto err = res.error();
      bool timed_out = err == httplib::Error::ConnectionTimeout ||
                       (err == httplib::Error::Read && since(attempt_start) >= params.timeout);
      last_kind = timed_out ? FailureKind::timeout : FailureKind::transport;
      last_message = "request failed: " + httplib::to_string(err);
    } else if (res->status == 200) {
      try {
        auto doc = nlohmann::json::parse(res->body);
        RawCompletion out;
        out.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
        out.latency = since(start);
        out.backend = identity();
        out.attempts = attempt;
        return out;
      } catch (const nlohmann::json::exception& e) {
        throw JudgeError(FailureKind::protocol,
                         std::string("unexpected chat-completion response: ") + e.what(), attempt);
      }
    } else if (res->status == 401 || res->status == 403) {
      throw CredentialError("backend rejected the credential (HTTP " +
                                std::to_string(res->status) + ")",
                            attempt);
    } else if (res->status == 408 || res->status == 429 || res->status >= 500) {
      last_kind = FailureKind::transport;
      last_message = "HTTP " + std::to_string(res->status);
      hinted = retry_after(res);
    } else {
      throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body, attempt);
    }

    if (attempt < max_attempts) {
      auto delay = backoff_delay(attempt, params);
      if (hinted) delay = std::min(std::max(delay, *hinted), params.backoff_cap);
      spdlog::debug("{} (attempt {}), retrying in {} ms", last_message, attempt, delay.count());
      sleep_(delay);
    }
  }
  auto message = last_message + " after " + std::to_string(max_attempts) + " attempt(s)";
  if (last_kind == FailureKind::timeout) throw TimeoutError(message, max_attempts);
  throw TransportError(message, max_attempts);
}

RawCompletion complete_captured(Backend& backend, const BatchItem& item, const JudgeParams& params) {
  const auto start = Clock::now();
  RawCompletion out;
  try {
    out = backend.complete(item.bundle, item.sentence, params);
  } catch (const JudgeError& e) {
    out.failure = Failure{e.kind(), e.what()};
    out.attempts = e.attempts();
  } catch (const std::exception& e) {
    out.failure = Failure{FailureKind::transport, e.what()};
  }
  out.sentence_id = item.sentence_id;
  if (out.backend.empty()) out.backend = backend.identity();
  if (out.latency.count() == 0) out.latency = since(start);
  return out;
}

std::vector<RawCompletion> complete_batch(Backend& backend, const std::vector<BatchItem>& items,
                                          const JudgeParams& params) {
  params.validate();
  std::vector<RawCompletion> results(items.size());
  if (items.empty()) return results;

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      results[i] = complete_captured(backend, items[i], params);
    }
  };
  const auto workers =
      std::min<std::size_t>(static_cast<std::size_t>(params.parallelism), items.size());
  if (workers == 1) {
    worker();
    return results;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  pool.clear();
  return results;
}

}  // namespace stereoind::judge
