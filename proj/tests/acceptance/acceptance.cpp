// Acceptance run: one PASS/FAIL line per primary criterion, nonzero exit
// when any criterion fails. Diagnostics go to the --archive directory.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oracles/oracles.hpp"
#include "stereoind/commands.hpp"
#include "stereoind/evalkit.hpp"
#include "stereoind/extraction.hpp"
#include "stereoind/linear_fit.hpp"
#include "stereoind/prompt.hpp"
#include "stereoind/scoring.hpp"

using namespace stereoind;
namespace fs = std::filesystem;

namespace {

const fs::path kRepoData = STEREOIND_REPO_DATA;
const fs::path kTestData = STEREOIND_TEST_DATA;

struct Verdict {
  enum class Kind { pass, fail, skipped, report } kind = Kind::pass;
  std::string detail;
};

Verdict pass(std::string d) { return {Verdict::Kind::pass, std::move(d)}; }
Verdict fail(std::string d) { return {Verdict::Kind::fail, std::move(d)}; }
Verdict check(bool ok, std::string d) { return ok ? pass(std::move(d)) : fail(std::move(d)); }

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

// ---------------------------------------------------------------- OLS

Verdict ols_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.01);
  double worst_coef = 0.0, worst_oracle = 0.0, worst_mae = 0.0;

  for (int trial = 0; trial < 50; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 15);
    const int n = k + 10 + static_cast<int>(rng() % 150);
    Eigen::MatrixXd x(n, k);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) x(i, j) = gauss(rng);
    }
    Eigen::VectorXd beta(k);
    for (int j = 0; j < k; ++j) beta(j) = gauss(rng);
    const double b0 = gauss(rng);
    Eigen::VectorXd y = (x * beta).array() + b0;

    auto fit = linalg::fit_ols(x, y);
    if (fit.rank_deficient) return fail("synthetic design unexpectedly rank deficient");
    worst_coef = std::max(worst_coef, std::abs(fit.intercept - b0));
    worst_coef = std::max(worst_coef, (fit.coefficients - beta).cwiseAbs().maxCoeff());

    std::vector<std::vector<double>> xs(n, std::vector<double>(k));
    std::vector<double> ys(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) xs[i][j] = x(i, j);
      ys[i] = y(i);
    }
    auto o = oracle::normal_equations(xs, ys);
    worst_oracle = std::max(worst_oracle, std::abs(o[0] - fit.intercept));
    for (int j = 0; j < k; ++j) worst_oracle = std::max(worst_oracle, std::abs(o[j + 1] - fit.coefficients(j)));

    Eigen::VectorXd noisy = y;
    for (int i = 0; i < n; ++i) noisy(i) += noise(rng);
    auto nf = linalg::fit_ols(x, noisy);
    Eigen::VectorXd pred = (x * nf.coefficients).array() + nf.intercept;
    worst_mae = std::max(worst_mae, (pred - noisy).cwiseAbs().mean());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool ok = worst_coef <= 1e-9 && worst_oracle <= 1e-9 && worst_mae <= 0.02 && secs < 5.0;
  return check(ok, "max |coef error| " + fmt(worst_coef) + ", max |oracle diff| " + fmt(worst_oracle) +
                       ", worst noisy train MAE " + fmt(worst_mae) + ", " + fmt(secs, 3) + " s");
}

// ---------------------------------------------------------------- golden fit

struct GoldenFit {
  scoring::ScoringModel model;
  commands::TrainSummary summary;
  std::string error;
};

GoldenFit fit_golden(const fs::path& archive) {
  GoldenFit g;
  RunConfig c;
  c.paths.input = (kRepoData / "golden/table4.jsonl").string();
  c.paths.reference = (kRepoData / "golden/table4_scores.tsv").string();
  c.paths.model = (archive / "golden_fit/model.json").string();
  c.fit.test_fraction = 0.0;  // every shipped row enters the fit
  try {
    fs::create_directories(archive / "golden_fit");
    g.summary = commands::cmd_train(c);
    g.model = scoring::model_from_json(json::parse(slurp(c.paths.model)));
  } catch (const std::exception& e) {
    g.error = e.what();
  }
  return g;
}

Verdict golden_fit_sanity(const GoldenFit& g, const fs::path& archive) {
  if (!g.error.empty()) return fail(g.error);
  const auto importance = scoring::feature_importance(g.model, default_schema());
  std::size_t match = 0, mismatch = 0;
  std::ostringstream report;
  report << "level\tcoefficient\tverdict\n";
  for (const auto& l : importance) {
    report << l.level << '\t' << l.coefficient << '\t' << l.annotation << '\n';
    if (l.annotation.rfind("match", 0) == 0) ++match;
    if (l.annotation.rfind("mismatch", 0) == 0) ++mismatch;
  }
  write_file(archive / "golden_fit/sign_report.tsv", report.str());
  const double mae = g.summary.cv.train_mae;
  return check(g.summary.used == 26 && mae <= 0.08,
               std::to_string(g.summary.used) + " rows, training MAE " + fmt(mae) + " (<= 0.08); sign report " +
                   std::to_string(match) + " match / " + std::to_string(mismatch) +
                   " mismatch archived to golden_fit/sign_report.tsv");
}

// ---------------------------------------------------------------- gate and equality

Verdict gate_and_equality(const GoldenFit& g) {
  if (!g.error.empty()) return fail("no golden model: " + g.error);
  const auto schema = default_schema();
  std::vector<commands::RecordRow> rows = commands::load_record_rows(kRepoData / "golden/table4.jsonl");
  for (auto& r : commands::load_record_rows(kRepoData / "golden/table3_extra.jsonl")) rows.push_back(std::move(r));

  // Closed indicator tuple -> scores seen.
  std::map<std::vector<std::string>, std::vector<std::pair<std::string, double>>> groups;
  for (const auto& r : rows) {
    std::vector<std::string> key;
    for (Indicator ind : kAllIndicators) {
      if (schema.at(ind).open_text) continue;
      key.push_back(r.record[ind].eval_class());
    }
    groups[key].push_back({r.id, scoring::score(r.record, g.model).score});
  }
  std::size_t shared = 0, unequal = 0;
  for (const auto& [key, members] : groups) {
    if (members.size() < 2) continue;
    ++shared;
    for (const auto& m : members) {
      if (m.second != members.front().second) ++unequal;
    }
  }

  std::mt19937_64 rng(7);
  std::size_t nonzero = 0;
  const int synthetic = 1000;
  for (int i = 0; i < synthetic; ++i) {
    auto rec = make_unlabeled_record("u" + std::to_string(i));
    // Leftover content must not leak through the gate.
    if (rng() % 2) rec[Indicator::connotation] = FieldStatus::of("negative");
    if (scoring::score(rec, g.model).score != 0.0) ++nonzero;
  }
  return check(shared >= 1 && unequal == 0 && nonzero == 0,
               std::to_string(rows.size()) + " golden rows, " + std::to_string(shared) +
                   " groups with identical closed indicators, " + std::to_string(unequal) +
                   " unequal scores; " + std::to_string(nonzero) + "/" + std::to_string(synthetic) +
                   " unlabeled records scored above 0");
}

// ---------------------------------------------------------------- replay determinism

Verdict replay_determinism(const fs::path& archive) {
  RunConfig c;
  c.backend.replay_fixtures = (kRepoData / "fixtures/canonical_replay.json").string();
  c.prompt.shots = 9;
  c.paths.input = (kRepoData / "golden/canonical_sentences.jsonl").string();
  c.paths.gold = (kRepoData / "golden/canonical_gold.jsonl").string();
  c.paths.output = (archive / "replay/records.jsonl").string();
  c.deterministic = true;
  c.run_id = "acceptance";
  try {
    auto first = commands::cmd_extract(c);
    const auto first_bytes = slurp(c.paths.output);
    commands::cmd_extract(c);
    const bool identical = slurp(c.paths.output) == first_bytes;

    auto gold = commands::load_record_rows(c.paths.gold);
    auto got = commands::load_record_rows(c.paths.output);
    std::size_t exact = 0;
    for (std::size_t i = 0; i < got.size() && i < gold.size(); ++i) {
      if (got[i].id == gold[i].id && got[i].record.same_fields(gold[i].record)) ++exact;
    }
    auto e = c;
    e.paths.input = c.paths.output;
    e.paths.output = (archive / "replay/eval.json").string();
    auto report = commands::cmd_eval_extraction(e);
    double worst = 1.0;
    for (const auto& ind : report.indicators) worst = std::min(worst, ind.accuracy);

    return check(first.sentences == 9 && exact == 9 && worst == 1.0 && identical,
                 std::to_string(exact) + "/9 records equal gold, min per-indicator accuracy " + fmt(worst) +
                     ", two runs " + (identical ? "byte-identical" : "DIFFER"));
  } catch (const std::exception& ex) {
    return fail(ex.what());
  }
}

// ---------------------------------------------------------------- metric oracles

Verdict metric_oracles() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::vector<std::string> pool{"a", "b", "c", "d", "e"};
  double worst = 0.0;
  std::size_t nan_mismatch = 0;

  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng() % 50;
    const std::size_t used = 1 + rng() % pool.size();
    std::vector<std::string> p, g;
    std::vector<double> pv, gv;
    for (std::size_t i = 0; i < n; ++i) {
      p.push_back(pool[rng() % used]);
      g.push_back(pool[rng() % used]);
      pv.push_back(unit(rng));
      gv.push_back(unit(rng));
    }
    auto e = eval::multiclass_eval(p, g, pool);
    worst = std::max(worst, std::abs(e.accuracy - oracle::accuracy(p, g)));
    for (const auto& c : e.classes) {
      auto o = oracle::f1(p, g, c.label);
      if (o.has_value() != c.f1.has_value()) {
        ++nan_mismatch;
      } else if (o) {
        worst = std::max(worst, std::abs(*o - *c.f1));
      }
    }
    worst = std::max(worst, std::abs(eval::cohens_kappa(p, g).kappa - oracle::kappa(p, g).kappa));
    worst = std::max(worst, std::abs(eval::mae(pv, gv) - oracle::mae(pv, gv)));
  }

  const double k = eval::cohens_kappa({"x", "x", "y", "y"}, {"x", "y", "y", "y"}).kappa;
  const double m = eval::mae({0.5, 0.7}, {0.4, 0.9});
  const bool worked = std::abs(k - 0.5) <= 1e-12 && std::abs(m - 0.15) <= 1e-12;
  return check(worst <= 1e-12 && nan_mismatch == 0 && worked,
               "1000 instances, max deviation " + fmt(worst) + ", undefined-F1 mismatches " +
                   std::to_string(nan_mismatch) + "; kappa example " + fmt(k, 12) + ", MAE example " +
                   fmt(m, 12));
}

// ---------------------------------------------------------------- parser robustness

class RecordGenerator {
 public:
  explicit RecordGenerator(std::uint64_t seed) : rng_(seed), schema_(default_schema()) {}

  IndicatorRecord next(const std::string& id) {
    if (rng_() % 5 == 0) return make_unlabeled_record(id);
    std::array<std::string, kIndicatorCount> v;
    for (Indicator ind : kAllIndicators) {
      const auto& def = schema_.at(ind);
      auto& slot = v[index_of(ind)];
      if (ind == Indicator::has_category_label) {
        slot = "yes";
      } else if (ind == Indicator::full_label) {
        slot = pick(kLabels);
      } else if (def.open_text) {
        slot = pick(kContents);
      } else {
        slot = pick(def.values);
      }
    }
    if (v[index_of(Indicator::situation)] == "other") {
      const std::string na(kNotApplicable);
      v[index_of(Indicator::generalization)] = na;
      v[index_of(Indicator::explanation)] = na;
      v[index_of(Indicator::signal_word)] = na;
    }
    return make_record(id, v);
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  template <typename C>
  const std::string& pick(const C& c) {
    return c[rng_() % c.size()];
  }

  inline static const std::vector<std::string> kLabels{
      "Women", "the black man", "my grandmother", "These English gentlemen", "Jamal", "she",
      "Asian students", "a Muslim neighbour", "Men", "old people"};
  inline static const std::vector<std::string> kContents{
      "don't know how to drive",
      "are always late, e.g. to meetings",
      "couldn't get coffee at the shoppe",
      "is very heavy: lots of potatoes",
      "were always in time.",
      "spent the whole day at the salon; she wanted to go on a date",
      "can finally make their voices heard!",
      "get hungry when they work hard",
      "is 100% sure about it",
      "said it's over/done"};

  std::mt19937_64 rng_;
  IndicatorSchema schema_;
};

std::string smart_quotes(const std::string& s) {
  std::string out;
  bool open = true;
  for (char c : s) {
    if (c == '"') {
      out += open ? "\xE2\x80\x9C" : "\xE2\x80\x9D";
      open = !open;
    } else {
      out += c;
    }
  }
  return out;
}

std::string latex_underscores(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '_') out += '\\';
    out += c;
  }
  return out + (s.back() == '}' ? " \\\\" : "");
}

std::string with_prose(const std::string& s, std::mt19937_64& rng) {
  static const std::vector<std::string> leads{
      "Sure! Here is the analysis in JSON:\n", "Answer:\n", "```json\n",
      "Let me think step by step. The sentence mentions a group.\n\n"};
  static const std::vector<std::string> tails{"", "\n```", "\nI hope this helps.", "\n\nNote: values follow the scheme."};
  return leads[rng() % leads.size()] + s + tails[rng() % tails.size()];
}

Verdict parser_robustness(const fs::path& archive) {
  const auto schema = default_schema();
  RecordGenerator gen(123);
  auto& rng = gen.rng();

  std::size_t round_trip_ok = 0;
  const std::size_t round_trips = 10000;
  for (std::size_t i = 0; i < round_trips; ++i) {
    auto rec = gen.next("r" + std::to_string(i));
    if (!validate_record(rec, schema).ok()) continue;
    const int indent = static_cast<int>(rng() % 3) * 2 - 1;  // -1 (compact), 1 or 3
    auto text = record_to_json(rec).dump(indent);
    auto parsed = extraction::process_completion(text, schema);
    auto strict = record_from_json(json::parse(text), rec.sentence_id);
    if (parsed.failures.empty() && parsed.record.same_fields(rec) && strict.same_fields(rec)) ++round_trip_ok;
  }

  std::size_t recovered = 0, explicit_fail = 0, silent = 0;
  const std::size_t defects = 3000;
  std::ostringstream log;
  for (std::size_t i = 0; i < defects; ++i) {
    auto rec = gen.next("d" + std::to_string(i));
    std::string text = record_to_json(rec).dump(static_cast<int>(rng() % 2) * 2);
    const unsigned mask = 1 + static_cast<unsigned>(rng() % 7);  // non-empty subset of the three defects
    if (mask & 1u) text = latex_underscores(text);
    if (mask & 2u) text = smart_quotes(text);
    if (mask & 4u) text = with_prose(text, rng);
    auto out = extraction::process_completion(text, schema);
    if (out.record.same_fields(rec)) {
      ++recovered;
    } else if (!out.failures.empty()) {
      ++explicit_fail;
      log << "explicit\t" << mask << '\t' << json(text).dump() << '\n';
    } else {
      ++silent;
      log << "SILENT\t" << mask << '\t' << json(text).dump() << '\n';
    }
  }
  write_file(archive / "parser_defects.tsv", log.str());
  const double rate = static_cast<double>(recovered) / static_cast<double>(defects);
  return check(round_trip_ok == round_trips && rate >= 0.95 && silent == 0,
               std::to_string(round_trip_ok) + "/" + std::to_string(round_trips) + " round trips; defect corpus " +
                   std::to_string(recovered) + "/" + std::to_string(defects) + " recovered (" + fmt(rate * 100, 4) +
                   "%), " + std::to_string(explicit_fail) + " explicit failures, " + std::to_string(silent) +
                   " silently wrong");
}

// ---------------------------------------------------------------- prompt assembly

std::string squash(const std::string& s) {
  std::string out;
  bool space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += static_cast<char>(c);
  }
  return out;
}

struct Section {
  std::string name;
  std::string body;
};

std::vector<Section> read_sections(const fs::path& p) {
  std::vector<Section> out;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("### ", 0) == 0) {
      out.push_back({line.substr(4), ""});
    } else if (!out.empty()) {
      out.back().body += line + "\n";
    }
  }
  return out;
}

Verdict prompt_assembly() {
  const auto schema = default_schema();
  std::string counts;
  bool counts_ok = true;
  for (int k = 0; k <= 9; ++k) {
    prompt::PromptConfig c;
    c.shots = k;
    c.attributes = {"race", "gender"};
    auto b = prompt::build_prompt(c);
    std::size_t blocks = 0;
    for (const auto& m : b.messages) blocks += m.content.rfind("Sentence: ", 0) == 0;
    if (b.example_count != static_cast<std::size_t>(k) || blocks != static_cast<std::size_t>(k)) {
      counts_ok = false;
      counts += " k=" + std::to_string(k) + ":" + std::to_string(blocks);
    }
  }

  prompt::PromptConfig c;
  c.attributes = {"race", "gender"};
  auto bundle = prompt::build_prompt(c);
  auto sections = read_sections(kTestData / "appendix_a_prompt.txt");
  std::vector<std::string> mismatches;
  std::vector<const Section*> examples;
  std::map<std::string, const Section*> fixed;
  for (const auto& s : sections) {
    if (s.name == "example") {
      examples.push_back(&s);
    } else {
      fixed[s.name] = &s;
    }
  }
  if (bundle.messages.size() < 3 || !fixed.count("role") || !fixed.count("task") || !fixed.count("instructions")) {
    return fail("fixture or bundle missing preamble sections");
  }
  if (squash(bundle.messages[0].content) != squash(fixed["role"]->body)) mismatches.push_back("role");
  if (squash(bundle.messages[1].content) != squash(fixed["task"]->body)) mismatches.push_back("task");
  if (squash(bundle.messages[2].content) != squash(fixed["instructions"]->body)) mismatches.push_back("instructions");
  if (examples.size() != 9 || bundle.messages.size() != 12) {
    mismatches.push_back("example count");
  } else {
    for (std::size_t i = 0; i < 9; ++i) {
      const auto& body = examples[i]->body;
      const auto& msg = bundle.messages[3 + i].content;
      auto first_line = [](const std::string& s) { return s.substr(0, s.find('\n')); };
      auto rest = [](const std::string& s) { return s.substr(s.find('\n') + 1); };
      if (squash(first_line(body)) != squash(first_line(msg))) {
        mismatches.push_back("example " + std::to_string(i + 1) + " sentence");
        continue;
      }
      auto want = extraction::process_completion(rest(body), schema);
      auto have = extraction::process_completion(rest(msg), schema);
      if (!want.record.same_fields(have.record) || !have.failures.empty()) {
        mismatches.push_back("example " + std::to_string(i + 1) + " answer");
      }
    }
  }
  std::string mm;
  for (const auto& m : mismatches) mm += (mm.empty() ? "" : ", ") + m;
  return check(counts_ok && mismatches.empty(),
               std::string("k=0..9 example blocks ") + (counts_ok ? "exact" : "wrong:" + counts) +
                   "; k=9 template " + (mismatches.empty() ? "matches fixture" : "differs in " + mm));
}

// ---------------------------------------------------------------- live harness

Verdict live_harness(const fs::path& archive) {
  const char* key = std::getenv("OPENAI_API_KEY");
  if (!key || !*key) return {Verdict::Kind::skipped, "OPENAI_API_KEY not set"};
  try {
    RunConfig c;
    c.backend.kind = "http";
    c.backend.http.credential_env = "OPENAI_API_KEY";
    c.prompt.shots = 9;
    c.deterministic = true;
    c.paths.input = (kRepoData / "golden/table4.jsonl").string();
    c.paths.output = (archive / "live/records.jsonl").string();
    commands::cmd_extract(c);
    c.paths.gold = c.paths.input;
    c.paths.input = c.paths.output;
    c.paths.output = (archive / "live/eval.json").string();
    auto report = commands::cmd_eval_extraction(c);
    auto ref = json::parse(slurp(kRepoData / "golden/reference_accuracy.json"))["accuracy"];
    std::string detail;
    for (const auto& e : report.indicators) {
      detail += " " + e.key + "=" + fmt(e.accuracy, 3);
      if (ref.contains(e.key)) detail += "(ref " + fmt(ref[e.key].get<double>(), 3) + ")";
    }
    return {Verdict::Kind::report, "trend only:" + detail};
  } catch (const std::exception& e) {
    return {Verdict::Kind::report, std::string("live run failed, not asserted: ") + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stereoind acceptance run"};
  std::string archive_dir = "acceptance_artifacts";
  app.add_option("--archive", archive_dir, "Directory for diagnostic artifacts");
  CLI11_PARSE(app, argc, argv);

  const fs::path archive(archive_dir);
  fs::remove_all(archive);
  fs::create_directories(archive);

  const auto golden = fit_golden(archive);
  std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"ols-oracle", [] { return ols_oracle(); }},
      {"gate-and-equality", [&] { return gate_and_equality(golden); }},
      {"golden-fit", [&] { return golden_fit_sanity(golden, archive); }},
      {"replay-determinism", [&] { return replay_determinism(archive); }},
      {"metric-oracles", [] { return metric_oracles(); }},
      {"parser-robustness", [&] { return parser_robustness(archive); }},
      {"prompt-assembly", [] { return prompt_assembly(); }},
      {"live-harness", [&] { return live_harness(archive); }},
  };

  int failures = 0;
  std::ostringstream summary;
  for (const auto& [name, run] : criteria) {
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = fail(std::string("uncaught: ") + e.what());
    }
    const char* tag = "PASS";
    switch (v.kind) {
      case Verdict::Kind::pass: tag = "PASS"; break;
      case Verdict::Kind::fail: tag = "FAIL"; ++failures; break;
      case Verdict::Kind::skipped: tag = "SKIPPED"; break;
      case Verdict::Kind::report: tag = "REPORT"; break;
    }
    summary << tag << "  " << name << ": " << v.detail << '\n';
  }
  std::cout << summary.str();
  write_file(archive / "acceptance.txt", summary.str());
  return failures == 0 ? 0 : 1;
}
