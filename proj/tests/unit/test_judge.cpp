#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "stereoind/judge.hpp"

using namespace stereoind;
using namespace stereoind::judge;
using namespace std::chrono_literals;

namespace {

const char* kOk = R"({"choices":[{"message":{"role":"assistant","content":"{\"has_category_label\": \"no\"}"}}]})";

// Local chat-completions stub on a free port.
class StubServer {
 public:
  explicit StubServer(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

HttpBackendConfig config_for(const StubServer& s) {
  HttpBackendConfig c;
  c.base_url = s.base_url();
  c.credential_env = "STEREOIND_TEST_KEY";
  return c;
}

JudgeParams fast_params() {
  JudgeParams p;
  p.timeout = 2000ms;
  p.backoff_base = 1ms;
  p.backoff_cap = 5ms;
  return p;
}

struct KeyEnv {
  KeyEnv() { ::setenv("STEREOIND_TEST_KEY", "test-secret", 1); }
  ~KeyEnv() { ::unsetenv("STEREOIND_TEST_KEY"); }
};

prompt::PromptBundle small_bundle() {
  prompt::PromptConfig c;
  c.shots = 1;
  return prompt::build_prompt(c);
}

}  // namespace

TEST(Judge, BackoffDoublesAndCaps) {
  JudgeParams p;
  p.backoff_base = 100ms;
  p.backoff_cap = 500ms;
  EXPECT_EQ(backoff_delay(1, p), 100ms);
  EXPECT_EQ(backoff_delay(2, p), 200ms);
  EXPECT_EQ(backoff_delay(3, p), 400ms);
  EXPECT_EQ(backoff_delay(4, p), 500ms);
  EXPECT_EQ(backoff_delay(30, p), 500ms);
}

TEST(Judge, ParamsValidate) {
  JudgeParams p;
  p.parallelism = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.temperature = -0.1;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Judge, ReplayLookupByStage) {
  ReplayBackend r;
  r.add("s", "any");
  r.add("t", prompt::Stage::label, "label-only");
  auto bundle = small_bundle();
  EXPECT_EQ(r.complete(bundle, "s", {}).text, "any");
  auto label = bundle;
  label.stage = prompt::Stage::label;
  EXPECT_EQ(r.complete(label, "t", {}).text, "label-only");
  try {
    r.complete(bundle, "t", {});
    FAIL() << "expected replay miss";
  } catch (const JudgeError& e) {
    EXPECT_EQ(e.kind(), FailureKind::replay_miss);
  }
}

TEST(Judge, ReplayFromJson) {
  auto r = ReplayBackend::from_json(json{{"a", "x"}, {"b", {{"label", "y"}, {"content", "z"}}}});
  EXPECT_EQ(r.size(), 2u);
  EXPECT_THROW(ReplayBackend::from_json(json{{"a", 3}}), FormatError);
}

TEST(Judge, MissingCredentialFailsBeforeRequest) {
  std::atomic<int> hits{0};
  StubServer s([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.set_content(kOk, "application/json");
  });
  ::unsetenv("STEREOIND_TEST_KEY");
  EXPECT_THROW(HttpBackend backend(config_for(s)), CredentialError);
  EXPECT_EQ(hits.load(), 0);
}

TEST(Judge, SuccessSendsBearerAndBody) {
  KeyEnv env;
  std::string auth, model;
  std::size_t messages = 0;
  StubServer s([&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    auto body = json::parse(req.body);
    model = body["model"];
    messages = body["messages"].size();
    res.set_content(kOk, "application/json");
  });
  HttpBackend backend(config_for(s));
  auto out = backend.complete(small_bundle(), "Men get hungry.", fast_params());
  EXPECT_EQ(out.text, "{\"has_category_label\": \"no\"}");
  EXPECT_EQ(out.attempts, 1);
  EXPECT_EQ(auth, "Bearer test-secret");
  EXPECT_EQ(model, "gpt-4");
  EXPECT_EQ(messages, 5u);  // system, task, instructions, one example, query
}

TEST(Judge, RateLimitThenSuccessTakesTwoAttempts) {
  KeyEnv env;
  std::atomic<int> hits{0};
  StubServer s([&](const httplib::Request&, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 429;
      res.set_header("Retry-After", "0.001");
      return;
    }
    res.set_content(kOk, "application/json");
  });
  std::vector<std::chrono::milliseconds> sleeps;
  HttpBackend backend(config_for(s), [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
  auto out = backend.complete(small_bundle(), "x", fast_params());
  EXPECT_EQ(out.attempts, 2);
  EXPECT_EQ(sleeps.size(), 1u);
}

TEST(Judge, UnauthorizedIsCredentialErrorWithoutRetry) {
  KeyEnv env;
  std::atomic<int> hits{0};
  StubServer s([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 401;
  });
  HttpBackend backend(config_for(s), [](auto) {});
  EXPECT_THROW(backend.complete(small_bundle(), "x", fast_params()), CredentialError);
  EXPECT_EQ(hits.load(), 1);
}

TEST(Judge, ServerErrorsExhaustRetries) {
  KeyEnv env;
  std::atomic<int> hits{0};
  StubServer s([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  HttpBackend backend(config_for(s), [](auto) {});
  auto p = fast_params();
  p.max_retries = 2;
  try {
    backend.complete(small_bundle(), "x", p);
    FAIL() << "expected transport error";
  } catch (const TransportError& e) {
    EXPECT_EQ(e.attempts(), 3);
  }
  EXPECT_EQ(hits.load(), 3);
}

TEST(Judge, ClientErrorIsNotRetried) {
  KeyEnv env;
  std::atomic<int> hits{0};
  StubServer s([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
  });
  HttpBackend backend(config_for(s), [](auto) {});
  EXPECT_THROW(backend.complete(small_bundle(), "x", fast_params()), TransportError);
  EXPECT_EQ(hits.load(), 1);
}

TEST(Judge, MalformedResponseIsProtocolError) {
  KeyEnv env;
  StubServer s([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices": []})", "application/json");
  });
  HttpBackend backend(config_for(s), [](auto) {});
  try {
    backend.complete(small_bundle(), "x", fast_params());
    FAIL();
  } catch (const JudgeError& e) {
    EXPECT_EQ(e.kind(), FailureKind::protocol);
  }
}

TEST(Judge, SlowServerTimesOut) {
  KeyEnv env;
  StubServer s([&](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(400ms);
    res.set_content(kOk, "application/json");
  });
  HttpBackend backend(config_for(s), [](auto) {});
  auto p = fast_params();
  p.timeout = 100ms;
  p.max_retries = 0;
  EXPECT_THROW(backend.complete(small_bundle(), "x", p), TimeoutError);
}

TEST(Judge, ConnectionRefusedIsTransport) {
  KeyEnv env;
  HttpBackendConfig c;
  c.base_url = "http://127.0.0.1:1/v1";
  c.credential_env = "STEREOIND_TEST_KEY";
  HttpBackend backend(c, [](auto) {});
  auto p = fast_params();
  p.max_retries = 1;
  EXPECT_THROW(backend.complete(small_bundle(), "x", p), JudgeError);
}

TEST(Judge, BatchRespectsParallelismAndOrder) {
  KeyEnv env;
  std::atomic<int> in_flight{0}, peak{0};
  StubServer s([&](const httplib::Request& req, httplib::Response& res) {
    int now = ++in_flight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(30ms);
    --in_flight;
    auto body = json::parse(req.body);
    std::string query = body["messages"].back()["content"];
    json reply = {{"choices", {{{"message", {{"content", query}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  HttpBackend backend(config_for(s));
  auto p = fast_params();
  p.parallelism = 3;
  std::vector<BatchItem> items;
  auto bundle = small_bundle();
  for (int i = 0; i < 12; ++i) items.push_back({"id" + std::to_string(i), "s" + std::to_string(i), bundle});
  auto out = complete_batch(backend, items, p);
  ASSERT_EQ(out.size(), items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    EXPECT_EQ(out[i].sentence_id, items[i].sentence_id);
    EXPECT_EQ(out[i].text, "Sentence: " + items[i].sentence);
  }
  EXPECT_LE(peak.load(), 3);
  EXPECT_GE(peak.load(), 2);
}

TEST(Judge, BatchRecordsFailuresPerItem) {
  ReplayBackend r;
  r.add("known", "{}");
  std::vector<BatchItem> items{{"1", "known", small_bundle()}, {"2", "unknown", small_bundle()}};
  auto out = complete_batch(r, items, {});
  EXPECT_TRUE(out[0].ok());
  ASSERT_FALSE(out[1].ok());
  EXPECT_EQ(out[1].failure->kind, FailureKind::replay_miss);
}
