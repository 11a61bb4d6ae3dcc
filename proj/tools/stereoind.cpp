// stereoind: extract indicators, fit and apply the scoring function,
// evaluate, run few-shot ablations, serve the annotation API.
//
// Exit codes: 0 success, 1 usage or configuration, 2 data error,
// 3 backend error.

#include <atomic>
#include <csignal>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "stereoind/commands.hpp"

namespace {

using namespace stereoind;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

struct Overrides {
  std::string config;
  std::optional<std::string> input, output, gold, reference, model, raw_dir, fixtures, exclusions;
  std::optional<std::string> backend, base_url, credential_env, model_name, mode, run_id, direction;
  std::optional<std::vector<std::string>> attributes, bias_types;
  std::optional<int> shots, retries, parallelism, folds, timeout_ms;
  std::optional<double> temperature, test_fraction;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  bool signal_word = false;
  bool verbose = false;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "Run configuration JSON")->check(CLI::ExistingFile);
  app->add_option("-i,--input", o.input, "Input file");
  app->add_option("-o,--output", o.output, "Output file");
  app->add_option("--run-id", o.run_id, "Run id (default: derived from the config hash)");
  app->add_flag("-v,--verbose", o.verbose, "Debug logging");
}

void add_backend(CLI::App* app, Overrides& o) {
  app->add_option("--backend", o.backend, "replay or http")->check(CLI::IsMember({"replay", "http"}));
  app->add_option("--fixtures", o.fixtures, "Replay fixtures JSON ({k} expands to the shot count)");
  app->add_option("--base-url", o.base_url, "Chat-completions base URL");
  app->add_option("--credential-env", o.credential_env,
                  "Name of the environment variable holding the API key");
  app->add_option("--model", o.model_name, "Model name sent to the backend");
  app->add_option("--temperature", o.temperature);
  app->add_option("--retries", o.retries);
  app->add_option("--timeout-ms", o.timeout_ms);
  app->add_option("--parallelism", o.parallelism);
  app->add_option("--attributes", o.attributes, "Sensitive attributes named in the prompt");
  app->add_option("--mode", o.mode, "single-stage or multi-stage");
  app->add_option("--bias-types", o.bias_types, "Keep only these bias types");
  app->add_option("--direction", o.direction, "stereo, antistereo or empty for both");
  app->add_option("--exclusions", o.exclusions, "File of sentence ids or texts to drop");
  app->add_option("--raw-dir", o.raw_dir, "Directory for raw completion sidecars");
  app->add_flag("--deterministic", o.deterministic, "Force temperature 0");
}

void add_fit(CLI::App* app, Overrides& o) {
  app->add_option("--folds", o.folds);
  app->add_option("--test-fraction", o.test_fraction);
  app->add_option("--seed", o.seed);
  app->add_flag("--signal-word", o.signal_word, "Add signal_word levels to the encoding");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  auto set = [](auto& target, const auto& value) {
    if (value) target = *value;
  };
  set(c.paths.input, o.input);
  set(c.paths.output, o.output);
  set(c.paths.gold, o.gold);
  set(c.paths.reference, o.reference);
  set(c.paths.model, o.model);
  set(c.paths.raw_dir, o.raw_dir);
  set(c.backend.kind, o.backend);
  set(c.backend.replay_fixtures, o.fixtures);
  set(c.backend.http.base_url, o.base_url);
  set(c.backend.http.credential_env, o.credential_env);
  set(c.judge.model, o.model_name);
  set(c.judge.temperature, o.temperature);
  set(c.judge.max_retries, o.retries);
  set(c.judge.parallelism, o.parallelism);
  if (o.timeout_ms) c.judge.timeout = std::chrono::milliseconds(*o.timeout_ms);
  set(c.prompt.shots, o.shots);
  set(c.prompt.attributes, o.attributes);
  if (o.mode) c.prompt.mode = prompt::mode_from_string(*o.mode);
  set(c.corpus.bias_types, o.bias_types);
  set(c.corpus.direction, o.direction);
  set(c.corpus.exclusions, o.exclusions);
  set(c.fit.folds, o.folds);
  set(c.fit.test_fraction, o.test_fraction);
  set(c.fit.seed, o.seed);
  set(c.run_id, o.run_id);
  if (o.deterministic) c.deterministic = true;
  if (o.signal_word) c.include_signal_word = true;
  c.validate();
  return c;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const judge::JudgeError*>(&e)) return 3;
  if (dynamic_cast<const ConfigError*>(&e)) return 1;
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("stereoind"));
  spdlog::set_pattern("%^%l%$: %v");

  CLI::App app{"Linguistic stereotype indicators: extraction, scoring and annotation"};
  app.require_subcommand(1);
  Overrides o;

  auto* extract = app.add_subcommand("extract", "Extract indicator records from sentences");
  add_common(extract, o);
  add_backend(extract, o);
  extract->add_option("--shots", o.shots, "Worked examples in the prompt (0-9)");

  auto* train = app.add_subcommand("train", "Fit the scoring function against reference scores");
  add_common(train, o);
  add_fit(train, o);
  train->add_option("--reference", o.reference, "Reference scores (text, score in [-1, 1])");
  train->add_option("--model", o.model, "Model file to write");

  auto* score = app.add_subcommand("score", "Score indicator records with a fitted model");
  add_common(score, o);
  score->add_option("--model", o.model, "Model file");
  score->add_option("--reference", o.reference, "Optional reference scores to attach");

  auto* eval_x = app.add_subcommand("eval-extraction", "Per-indicator accuracy and F1 against gold");
  add_common(eval_x, o);
  eval_x->add_option("--gold", o.gold, "Gold records");

  auto* eval_s = app.add_subcommand("eval-score", "MAE of scores against reference scores");
  add_common(eval_s, o);
  eval_s->add_option("--reference", o.reference, "Reference scores");

  std::vector<int> ablate_shots{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto* ablate = app.add_subcommand("ablate", "Few-shot ablation curve");
  add_common(ablate, o);
  add_backend(ablate, o);
  ablate->add_option("--gold", o.gold, "Gold records");
  ablate->add_option("--k", ablate_shots, "Shot counts to run")->capture_default_str();

  commands::ServeOptions serve_opts;
  std::string serve_dir;
  auto* serve = app.add_subcommand("serve", "Run the annotation HTTP service");
  serve->add_option("--host", serve_opts.host)->capture_default_str();
  serve->add_option("--port", serve_opts.port)->capture_default_str();
  serve->add_option("--data-dir", serve_dir, "Project directory (default: in memory)");
  serve->add_flag("-v,--verbose", o.verbose);

  auto* report = app.add_subcommand("report", "Per-group indicator value distributions (CSV)");
  add_common(report, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  if (o.verbose) spdlog::set_level(spdlog::level::debug);

  try {
    if (serve->parsed()) {
      serve_opts.directory = serve_dir;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      commands::cmd_serve(serve_opts, g_stop);
      return 0;
    }

    const RunConfig config = resolve(o);
    if (extract->parsed()) {
      if (config.deterministic) spdlog::warn("--deterministic: temperature forced to 0");
      auto s = commands::cmd_extract(config);
      std::cout << "extracted " << s.sentences << " sentence(s), " << s.clean << " clean, "
                << s.backend_failures << " backend failure(s), run " << s.run_id << "\n";
    } else if (train->parsed()) {
      auto s = commands::cmd_train(config);
      std::cout << "trained on " << s.used << "/" << s.rows << " row(s): train MAE "
                << s.cv.train_mae << ", CV MAE " << s.cv.cv_mae;
      if (s.cv.test_mae) std::cout << ", test MAE " << *s.cv.test_mae;
      std::cout << "\n";
    } else if (score->parsed()) {
      auto s = commands::cmd_score(config);
      std::cout << "scored " << s.rows << " row(s), " << s.unlabeled << " without label, "
                << s.clamped << " clamped\n";
    } else if (eval_x->parsed()) {
      auto r = commands::cmd_eval_extraction(config);
      std::cout << "label-side accuracy " << r.label_side_accuracy << ", content-side accuracy "
                << r.content_side_accuracy << "\n";
    } else if (eval_s->parsed()) {
      std::cout << "MAE " << commands::cmd_eval_score(config) << "\n";
    } else if (ablate->parsed()) {
      auto curve = commands::cmd_ablate(config, ablate_shots);
      for (const auto& p : curve.points) {
        std::cout << "k=" << p.shots << " label " << p.label_accuracy << " content "
                  << p.content_accuracy << "\n";
      }
      for (const auto& p : curve.omitted) std::cout << "k=" << p.shots << " omitted: " << p.reason << "\n";
    } else if (report->parsed()) {
      auto rows = commands::cmd_report(config);
      std::cout << rows.size() << " distribution row(s)\n";
    }
    return 0;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e);
  }
}
