#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "stereoind/commands.hpp"

using namespace stereoind;
using namespace stereoind::commands;
namespace fs = std::filesystem;

namespace {

const fs::path kData = STEREOIND_REPO_DATA;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workdir {
  fs::path path;
  Workdir() {
    path = fs::temp_directory_path() /
           (std::string("stereoind-cmd-") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Workdir() { fs::remove_all(path); }
};

RunConfig canonical_config(const fs::path& out) {
  RunConfig c;
  c.backend.replay_fixtures = (kData / "fixtures/canonical_replay.json").string();
  c.prompt.shots = 9;
  c.paths.input = (kData / "golden/canonical_sentences.jsonl").string();
  c.paths.gold = (kData / "golden/canonical_gold.jsonl").string();
  c.paths.output = out.string();
  c.deterministic = true;
  return c;
}

RunConfig table4(const fs::path& dir) {
  RunConfig c;
  c.paths.input = (kData / "golden/table4.jsonl").string();
  c.paths.reference = (kData / "golden/table4_scores.tsv").string();
  c.paths.model = (dir / "model.json").string();
  return c;
}

}  // namespace

TEST(Commands, ConfigHashTracksContent) {
  RunConfig a, b;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.prompt.shots = 3;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(a.effective_run_id(), "run-" + config_hash(a).substr(0, 12));
  auto back = run_config_from_json(json::parse(run_config_to_json(b).dump()));
  EXPECT_EQ(config_hash(back), config_hash(b));
}

TEST(Commands, ConfigValidation) {
  RunConfig c;
  c.prompt.shots = 12;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.backend.kind = "carrier-pigeon";
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(run_config_from_json(json{{"judge", {{"temperature", "hot"}}}}), ConfigError);
}

TEST(Commands, DeterministicForcesZeroTemperature) {
  RunConfig c;
  c.judge.temperature = 0.7;
  c.deterministic = true;
  EXPECT_EQ(effective_params(c).temperature, 0.0);
}

TEST(Commands, ExtractTwiceIsByteIdentical) {
  Workdir w;
  auto c = canonical_config(w.path / "records.jsonl");
  c.run_id = "fixed";
  auto s1 = cmd_extract(c);
  const auto first = slurp(c.paths.output);
  const auto first_raw = slurp(w.path / "raw" / "fixed" / "example-1.json");
  auto s2 = cmd_extract(c);
  EXPECT_EQ(s1.sentences, 9u);
  EXPECT_EQ(s1.clean, 9u);
  EXPECT_EQ(s1.backend_failures, 0u);
  EXPECT_EQ(s2.run_id, "fixed");
  EXPECT_EQ(slurp(c.paths.output), first);
  EXPECT_EQ(slurp(w.path / "raw" / "fixed" / "example-1.json"), first_raw);
  auto meta = json::parse(slurp(companion(c.paths.output, ".meta.json")));
  EXPECT_EQ(meta["config_hash"], config_hash(c));
  EXPECT_EQ(meta["run_id"], "fixed");
}

TEST(Commands, ExtractedRecordsMatchGold) {
  Workdir w;
  auto c = canonical_config(w.path / "records.jsonl");
  cmd_extract(c);
  c.paths.input = c.paths.output;
  c.paths.output = (w.path / "eval.json").string();
  auto report = cmd_eval_extraction(c);
  for (const auto& e : report.indicators) EXPECT_DOUBLE_EQ(e.accuracy, 1.0) << e.key;
  EXPECT_TRUE(fs::exists(companion(c.paths.output, ".csv")));
  EXPECT_EQ(slurp(companion(c.paths.output, ".csv")).rfind("# config_hash: ", 0), 0u);
}

TEST(Commands, ExtractWithoutFixturesFailsAsJudgeError) {
  Workdir w;
  auto c = canonical_config(w.path / "records.jsonl");
  judge::ReplayBackend empty;
  EXPECT_THROW(cmd_extract(c, &empty), judge::JudgeError);
}

TEST(Commands, HttpBackendNeedsCredential) {
  RunConfig c;
  c.backend.kind = "http";
  c.backend.http.credential_env = "STEREOIND_TEST_UNSET_KEY_NEVER_SET";
  ::unsetenv("STEREOIND_TEST_UNSET_KEY_NEVER_SET");
  EXPECT_THROW(make_backend(c, 9), judge::CredentialError);
}

TEST(Commands, ReplayFixturePerShotCount) {
  Workdir w;
  std::ofstream(w.path / "fx-3.json") << R"({"s": "{}"})";
  RunConfig c;
  c.backend.replay_fixtures = (w.path / "fx-{k}.json").string();
  EXPECT_NO_THROW(make_backend(c, 3));
  EXPECT_THROW(make_backend(c, 4), Error);
}

TEST(Commands, LoadSentencesFromCsvAppliesFilters) {
  RunConfig c;
  c.corpus.bias_types = {"gender"};
  auto items = load_sentences(c, kData / "samples/crows_pairs_sample.csv");
  ASSERT_EQ(items.size(), 2u);
  c.corpus.exclusions = (kData / "samples/exclusions.txt").string();
  items = load_sentences(c, kData / "samples/crows_pairs_sample.csv");
  ASSERT_EQ(items.size(), 1u);
  EXPECT_EQ(items[0].id, "1");
}

TEST(Commands, TrainScoreEvalAreReproducible) {
  Workdir w;
  auto c = table4(w.path);
  auto t1 = cmd_train(c);
  EXPECT_EQ(t1.rows, 26u);
  EXPECT_EQ(t1.used, 26u);
  EXPECT_TRUE(t1.skipped.empty());
  const auto model_a = slurp(c.paths.model);
  cmd_train(c);
  EXPECT_EQ(slurp(c.paths.model), model_a);
  EXPECT_TRUE(fs::exists(companion(c.paths.model, ".cv.json")));
  EXPECT_TRUE(fs::exists(companion(c.paths.model, ".importance.json")));

  c.paths.output = (w.path / "scored.jsonl").string();
  auto s = cmd_score(c);
  EXPECT_EQ(s.rows, 26u);
  EXPECT_EQ(s.unlabeled, 0u);

  c.paths.input = c.paths.output;
  c.paths.output = (w.path / "mae.json").string();
  double m = cmd_eval_score(c);
  EXPECT_GE(m, 0.0);
  EXPECT_LT(m, 0.2);
}

TEST(Commands, ScoreWithoutModelIsDataError) {
  Workdir w;
  auto c = table4(w.path);
  c.paths.output = (w.path / "scored.jsonl").string();
  EXPECT_THROW(cmd_score(c), DataError);
}

TEST(Commands, EvalAgainstMisalignedGold) {
  Workdir w;
  auto c = canonical_config(w.path / "records.jsonl");
  cmd_extract(c);
  c.paths.input = c.paths.output;
  c.paths.gold = (kData / "golden/table4.jsonl").string();
  c.paths.output = (w.path / "eval.json").string();
  EXPECT_THROW(cmd_eval_extraction(c), AlignmentError);
}

TEST(Commands, ReportGroupsByBiasType) {
  Workdir w;
  RunConfig c;
  c.paths.input = (kData / "golden/table4.jsonl").string();
  c.paths.output = (w.path / "dist.csv").string();
  auto rows = cmd_report(c);
  bool gender = false, race = false;
  for (const auto& r : rows) {
    gender |= r.group == "gender";
    race |= r.group == "race-color";
  }
  EXPECT_TRUE(gender);
  EXPECT_TRUE(race);
  EXPECT_EQ(slurp(c.paths.output).rfind("# config_hash: ", 0), 0u);
}

TEST(Commands, AblationOverShotCounts) {
  Workdir w;
  auto c = canonical_config(w.path / "curve.json");
  auto curve = cmd_ablate(c, {1, 9});
  EXPECT_EQ(curve.points.size() + curve.omitted.size(), 2u);
  EXPECT_TRUE(fs::exists(c.paths.output));
}

TEST(Commands, ServeStartsListsAndStops) {
  Workdir w;
  std::atomic<bool> stop{false};
  std::atomic<int> port{0};
  ServeOptions opt;
  opt.port = 0;
  opt.directory = w.path / "store";
  opt.on_ready = [&](int p) { port = p; };
  std::thread t([&] { cmd_serve(opt, stop); });
  for (int i = 0; i < 400 && port == 0; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  ASSERT_NE(port.load(), 0);

  httplib::Client client("127.0.0.1", port);
  auto r = client.Get("/projects");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->body, "[]");
  r = client.Post("/projects",
                  R"({"id": "p", "annotators": ["a", "b"], "sentences": [{"id": "1", "text": "t"}]})",
                  "application/json");
  EXPECT_EQ(r->status, 201);

  ServeOptions busy = opt;
  busy.port = port;
  busy.on_ready = nullptr;
  std::atomic<bool> never{false};
  EXPECT_THROW(cmd_serve(busy, never), Error);

  stop = true;
  t.join();
  EXPECT_TRUE(fs::exists(w.path / "store" / "p.project.json"));
}
