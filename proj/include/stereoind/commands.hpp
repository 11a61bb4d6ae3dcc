#pragma once

// The pipeline steps behind each CLI subcommand. Commands talk to each
// other only through files; every file written embeds the config hash.

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "stereoind/corpus.hpp"
#include "stereoind/evalkit.hpp"
#include "stereoind/extraction.hpp"
#include "stereoind/judge.hpp"
#include "stereoind/run_config.hpp"
#include "stereoind/scoring.hpp"

namespace stereoind::commands {

// Judge parameters after --deterministic is applied.
judge::JudgeParams effective_params(const RunConfig& config);

// Replay fixtures (with "{k}" substituted) or the HTTP client. The HTTP
// client checks its credential here, before any request.
std::unique_ptr<judge::Backend> make_backend(const RunConfig& config, int shots);

// Sentences from a CrowS-Pairs style CSV (filtered, exclusions applied) or
// from JSON Lines rows with id/text/bias_type.
std::vector<corpus::SentenceItem> load_sentences(const RunConfig& config,
                                                 const std::filesystem::path& path);

struct RecordRow {
  std::string id;
  std::string text;
  std::string bias_type;
  IndicatorRecord record;
};

// Extraction output or gold JSON Lines.
std::vector<RecordRow> load_record_rows(const std::filesystem::path& path);

// Companion file next to an output, e.g. out.jsonl -> out.meta.json.
std::filesystem::path companion(const std::filesystem::path& output, std::string_view suffix);

struct ExtractSummary {
  std::size_t sentences = 0;
  std::size_t clean = 0;            // no failed field
  std::size_t backend_failures = 0;  // items with a failed completion
  std::string run_id;
};

// Writes the records file, <output>.meta.json and one raw sidecar per
// sentence under <raw_dir>/<run_id>/. Throws JudgeError only when every
// item failed at the backend. `backend` overrides the configured one.
ExtractSummary cmd_extract(const RunConfig& config, judge::Backend* backend = nullptr);

struct TrainSummary {
  std::size_t rows = 0;
  std::size_t used = 0;
  std::vector<std::string> skipped;  // "id: reason"
  scoring::CvReport cv;
};

// Records (paths.input) joined with reference scores (paths.reference) by
// text; writes the model (paths.model) plus .cv.json and .importance.json.
TrainSummary cmd_train(const RunConfig& config);

struct ScoreSummary {
  std::size_t rows = 0;
  std::size_t clamped = 0;
  std::size_t unlabeled = 0;
};

// Scores paths.input with paths.model; attaches score_bws when
// paths.reference is set.
ScoreSummary cmd_score(const RunConfig& config);

// Predictions (paths.input) against gold (paths.gold); JSON report at
// paths.output plus a CSV companion.
eval::EvalReport cmd_eval_extraction(const RunConfig& config);

// MAE of scored rows (paths.input) against paths.reference, aligned by
// text. Throws AlignmentError when a scored row has no reference.
double cmd_eval_score(const RunConfig& config);

// Few-shot ablation over `shots` on paths.input sentences vs paths.gold.
eval::AblationCurve cmd_ablate(const RunConfig& config, const std::vector<int>& shots);

// Per-bias-type value distributions of paths.input as CSV at paths.output.
std::vector<eval::DistributionRow> cmd_report(const RunConfig& config);

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path directory;  // empty: in-memory store
  std::function<void(int port)> on_ready;
};

// Runs until `stop` becomes true, then flushes every project.
void cmd_serve(const ServeOptions& options, const std::atomic<bool>& stop);

}  // namespace stereoind::commands
