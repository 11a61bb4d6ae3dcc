#include "stereoind/commands.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "stereoind/annotation.hpp"
#include "stereoind/annotation_server.hpp"
#include "stereoind/jsonl.hpp"

namespace stereoind::commands {

namespace fs = std::filesystem;

namespace {

const std::string& require_path(const std::string& value, const char* name) {
  if (value.empty()) throw ConfigError(std::string("missing path: ") + name);
  return value;
}

corpus::MatchMode match_mode(const RunConfig& config) {
  return config.corpus.match == "exact-text" ? corpus::MatchMode::exact_text
                                             : corpus::MatchMode::normalized_text;
}

bool has_extension(const fs::path& path, std::string_view ext) {
  auto e = path.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ext;
}

std::vector<corpus::ReferenceScore> load_reference(const RunConfig& config) {
  corpus::ScoreColumns columns;
  columns.text = config.corpus.text_column;
  columns.score = config.corpus.score_column;
  return corpus::load_reference_scores(require_path(config.paths.reference, "reference"), columns).items;
}

std::vector<corpus::SentenceItem> as_items(const std::vector<RecordRow>& rows) {
  std::vector<corpus::SentenceItem> items;
  items.reserve(rows.size());
  for (const auto& r : rows) {
    corpus::SentenceItem item;
    item.id = r.id;
    item.text = r.text;
    item.bias_type = r.bias_type;
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<IndicatorRecord> records_of(const std::vector<RecordRow>& rows) {
  std::vector<IndicatorRecord> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.record);
  return out;
}

std::string csv_with_hash(const RunConfig& config, const std::string& csv) {
  return "# config_hash: " + config_hash(config) + "\n" + csv;
}

}  // namespace

judge::JudgeParams effective_params(const RunConfig& config) {
  auto params = config.judge;
  if (config.deterministic) params.temperature = 0.0;
  return params;
}

std::unique_ptr<judge::Backend> make_backend(const RunConfig& config, int shots) {
  if (config.backend.kind == "http") {
    return std::make_unique<judge::HttpBackend>(config.backend.http);
  }
  auto path = require_path(config.backend.replay_fixtures, "backend.replay_fixtures");
  if (auto pos = path.find("{k}"); pos != std::string::npos) {
    path.replace(pos, 3, std::to_string(shots));
  }
  return std::make_unique<judge::ReplayBackend>(judge::ReplayBackend::from_file(path));
}

std::vector<corpus::SentenceItem> load_sentences(const RunConfig& config, const fs::path& path) {
  std::vector<corpus::SentenceItem> items;
  corpus::SentenceFilter filter;
  filter.bias_types = config.corpus.bias_types;
  if (!config.corpus.direction.empty()) {
    filter.direction = corpus::direction_from_string(config.corpus.direction);
  }
  if (has_extension(path, ".csv")) {
    items = corpus::load_crows_pairs(path, filter).items;
  } else {
    std::vector<corpus::SentenceItem> all;
    for (const auto& row : io::read_jsonl(path)) all.push_back(corpus::sentence_from_json(row));
    // Sentence lists given as JSON Lines are taken as is unless a bias-type
    // filter was asked for.
    corpus::SentenceFilter jsonl_filter;
    jsonl_filter.bias_types = config.corpus.bias_types;
    items = corpus::filter_items(all, jsonl_filter);
  }
  if (!config.corpus.exclusions.empty()) {
    items = corpus::apply_exclusions(std::move(items), corpus::Exclusions::load(config.corpus.exclusions));
    auto before = items.size();
    items = corpus::active_items(items);
    spdlog::info("exclusions removed {} sentence(s)", before - items.size());
  }
  std::set<std::string> seen;
  for (const auto& item : items) {
    if (!seen.insert(item.id).second) throw DataError("duplicate sentence id '" + item.id + "'");
  }
  return items;
}

std::vector<RecordRow> load_record_rows(const fs::path& path) {
  std::vector<RecordRow> rows;
  std::set<std::string> seen;
  for (const auto& row : io::read_jsonl(path)) {
    RecordRow r;
    r.record = extraction::record_from_row(row);
    r.id = r.record.sentence_id;
    r.text = row.value("text", std::string());
    r.bias_type = row.value("bias_type", std::string());
    if (r.id.empty()) throw FormatError(path.string() + ": row without id");
    if (!seen.insert(r.id).second) throw AlignmentError(path.string() + ": duplicate id '" + r.id + "'");
    rows.push_back(std::move(r));
  }
  return rows;
}

fs::path companion(const fs::path& output, std::string_view suffix) {
  auto p = output;
  p.replace_extension();
  p += std::string(suffix);
  return p;
}

ExtractSummary cmd_extract(const RunConfig& config, judge::Backend* backend) {
  config.validate();
  const fs::path output = require_path(config.paths.output, "output");
  auto items = load_sentences(config, require_path(config.paths.input, "input"));
  if (items.empty()) throw DataError("no sentences to extract");

  std::unique_ptr<judge::Backend> owned;
  if (!backend) {
    owned = make_backend(config, config.prompt.shots);
    backend = owned.get();
  }

  extraction::ExtractionOptions options;
  options.prompt = config.prompt;
  options.params = effective_params(config);
  options.run_id = config.effective_run_id();
  const auto schema = default_schema();
  auto results = extraction::run_extraction(items, options, *backend, schema);

  ExtractSummary summary;
  summary.sentences = results.size();
  summary.run_id = options.run_id;
  const auto hash = config_hash(config);
  const fs::path raw_root =
      (config.paths.raw_dir.empty() ? output.parent_path() / "raw" : fs::path(config.paths.raw_dir)) /
      options.run_id;

  std::vector<ordered_json> rows;
  std::string first_failure;
  for (const auto& r : results) {
    auto row = extraction::to_json(r);
    row["config_hash"] = hash;
    rows.push_back(std::move(row));
    if (r.outcome.failures.empty()) ++summary.clean;

    auto raw = ordered_json::array();
    bool failed = false;
    for (const auto& c : r.completions) {
      raw.push_back(extraction::raw_to_json(r.sentence_id, c));
      if (!c.completion.ok()) {
        failed = true;
        if (first_failure.empty()) first_failure = c.completion.failure->message;
      }
    }
    if (failed) ++summary.backend_failures;
    ordered_json sidecar = {{"config_hash", hash}, {"completions", std::move(raw)}};
    io::write_file(raw_root / extraction::raw_file_name(r.sentence_id), sidecar.dump(2) + "\n");
  }
  io::write_file(output, io::to_jsonl(rows));

  auto meta = config_meta(config);
  meta["run_id"] = options.run_id;
  meta["backend"] = backend->identity();
  meta["sentences"] = summary.sentences;
  meta["clean"] = summary.clean;
  meta["backend_failures"] = summary.backend_failures;
  meta["deterministic"] = config.deterministic;
  io::write_file(companion(output, ".meta.json"), meta.dump(2) + "\n");

  spdlog::info("extracted {} sentence(s): {} clean, {} backend failure(s)", summary.sentences,
               summary.clean, summary.backend_failures);
  if (summary.backend_failures == summary.sentences) {
    throw judge::JudgeError(judge::FailureKind::transport,
                            "every completion failed at the backend: " + first_failure);
  }
  return summary;
}

TrainSummary cmd_train(const RunConfig& config) {
  config.validate();
  const fs::path model_path = require_path(config.paths.model, "model");
  auto rows = load_record_rows(require_path(config.paths.input, "input"));
  auto reference = load_reference(config);
  auto joined = corpus::join_scores(as_items(rows), reference, match_mode(config));

  std::map<std::string, const IndicatorRecord*> by_id;
  for (const auto& r : rows) by_id[r.id] = &r.record;

  TrainSummary summary;
  summary.rows = rows.size();
  for (const auto& u : joined.unmatched) summary.skipped.push_back(u.id + ": no reference score");

  scoring::FeatureRecipe recipe{config.include_signal_word};
  std::vector<scoring::TrainingSample> samples;
  for (const auto& [item, ref] : joined.matched) {
    const auto& rec = *by_id.at(item.id);
    if (!rec.has_label()) {
      summary.skipped.push_back(item.id + ": no category label (scored 0 by the gate)");
      continue;
    }
    try {
      samples.push_back({scoring::encode(rec, recipe), ref.normalized});
    } catch (const EncodingError& e) {
      summary.skipped.push_back(item.id + ": " + e.what());
    }
  }
  for (const auto& s : summary.skipped) spdlog::warn("train: skipped {}", s);
  summary.used = samples.size();

  auto model = scoring::fit(samples, recipe, config.fit);
  summary.cv = model.training;

  auto doc = scoring::model_to_json(model);
  doc["meta"] = config_meta(config);
  io::write_file(model_path, doc.dump(2) + "\n");

  ordered_json cv = {{"config_hash", config_hash(config)},
                     {"rows", summary.rows},
                     {"used", summary.used},
                     {"skipped", summary.skipped},
                     {"report", scoring::cv_report_to_json(model.training)}};
  io::write_file(companion(model_path, ".cv.json"), cv.dump(2) + "\n");

  ordered_json importance = {{"config_hash", config_hash(config)},
                             {"levels", scoring::importance_to_json(
                                            scoring::feature_importance(model, default_schema()))}};
  io::write_file(companion(model_path, ".importance.json"), importance.dump(2) + "\n");
  return summary;
}

ScoreSummary cmd_score(const RunConfig& config) {
  config.validate();
  const fs::path model_path = require_path(config.paths.model, "model");
  if (!fs::exists(model_path)) throw DataError("model file not found: " + model_path.string());
  json model_doc;
  try {
    model_doc = json::parse(io::read_file(model_path));
  } catch (const json::exception& e) {
    throw FormatError(model_path.string() + ": " + e.what());
  }
  auto model = scoring::model_from_json(model_doc);
  auto rows = load_record_rows(require_path(config.paths.input, "input"));

  std::map<std::string, double> ref_by_id;
  if (!config.paths.reference.empty()) {
    auto joined = corpus::join_scores(as_items(rows), load_reference(config), match_mode(config));
    for (const auto& [item, ref] : joined.matched) ref_by_id[item.id] = ref.normalized;
  }

  ScoreSummary summary;
  const auto hash = config_hash(config);
  std::vector<ordered_json> out;
  for (const auto& r : rows) {
    auto s = scoring::score(r.record, model);
    s.text = r.text;
    if (auto it = ref_by_id.find(r.id); it != ref_by_id.end()) s.reference = it->second;
    ++summary.rows;
    if (s.clamped) ++summary.clamped;
    if (!r.record.has_label()) ++summary.unlabeled;
    auto row = scoring::scored_to_json(s);
    row["config_hash"] = hash;
    out.push_back(std::move(row));
  }
  io::write_file(require_path(config.paths.output, "output"), io::to_jsonl(out));
  if (summary.clamped) spdlog::info("{} prediction(s) clamped to [0, 1]", summary.clamped);
  return summary;
}

eval::EvalReport cmd_eval_extraction(const RunConfig& config) {
  config.validate();
  auto pred = load_record_rows(require_path(config.paths.input, "input"));
  auto gold = load_record_rows(require_path(config.paths.gold, "gold"));
  const auto schema = default_schema();
  auto report = eval::evaluate_extraction(records_of(pred), records_of(gold), schema);

  const fs::path output = require_path(config.paths.output, "output");
  auto doc = eval::report_to_json(report);
  doc["f1_averaging"] = eval::kF1Averaging;
  doc["meta"] = config_meta(config);
  io::write_file(output, doc.dump(2) + "\n");
  io::write_file(companion(output, ".csv"), csv_with_hash(config, eval::report_to_csv(report)));
  return report;
}

double cmd_eval_score(const RunConfig& config) {
  config.validate();
  auto reference = load_reference(config);
  auto rows = io::read_jsonl(require_path(config.paths.input, "input"));
  std::vector<corpus::SentenceItem> items;
  std::vector<double> pred;
  for (const auto& row : rows) {
    corpus::SentenceItem item;
    item.id = row.value("id", std::string());
    item.text = row.value("text", std::string());
    if (item.text.empty()) throw FormatError("scored row '" + item.id + "' has no text");
    if (!row.contains("score_scsc")) throw FormatError("scored row '" + item.id + "' has no score_scsc");
    items.push_back(std::move(item));
    pred.push_back(row["score_scsc"].get<double>());
  }
  auto joined = corpus::join_scores(items, reference, match_mode(config));
  if (!joined.unmatched.empty()) {
    throw AlignmentError(std::to_string(joined.unmatched.size()) +
                         " scored row(s) without a reference score, first: '" +
                         joined.unmatched.front().id + "'");
  }
  std::vector<double> ref;
  for (const auto& [item, score] : joined.matched) ref.push_back(score.normalized);
  const double value = eval::mae(pred, ref);

  if (!config.paths.output.empty()) {
    ordered_json doc = {{"n", pred.size()}, {"mae", value}, {"meta", config_meta(config)}};
    io::write_file(config.paths.output, doc.dump(2) + "\n");
  }
  return value;
}

eval::AblationCurve cmd_ablate(const RunConfig& config, const std::vector<int>& shots) {
  config.validate();
  if (shots.empty()) throw ConfigError("no shot counts given");
  for (int k : shots) {
    if (k < 0 || k > static_cast<int>(prompt::kCanonicalExampleCount)) {
      throw ConfigError("shot count out of range: " + std::to_string(k));
    }
  }
  auto items = load_sentences(config, require_path(config.paths.input, "input"));
  auto gold_rows = load_record_rows(require_path(config.paths.gold, "gold"));
  std::map<std::string, IndicatorRecord> gold_by_id;
  for (auto& g : gold_rows) gold_by_id[g.id] = g.record;
  std::vector<IndicatorRecord> gold;
  for (const auto& item : items) {
    auto it = gold_by_id.find(item.id);
    if (it == gold_by_id.end()) throw AlignmentError("no gold record for sentence '" + item.id + "'");
    gold.push_back(it->second);
  }

  extraction::ExtractionOptions base;
  base.prompt = config.prompt;
  base.params = effective_params(config);
  base.run_id = config.effective_run_id();

  std::map<int, std::unique_ptr<judge::Backend>> backends;
  auto backend_for = [&](int k) -> judge::Backend& {
    auto& slot = backends[k];
    if (!slot) slot = make_backend(config, k);
    return *slot;
  };
  auto curve = eval::ablation_fewshot(shots, items, gold, base, backend_for, default_schema());

  const fs::path output = require_path(config.paths.output, "output");
  auto doc = eval::curve_to_json(curve);
  doc["meta"] = config_meta(config);
  io::write_file(output, doc.dump(2) + "\n");
  io::write_file(companion(output, ".csv"), csv_with_hash(config, eval::curve_to_csv(curve)));
  return curve;
}

std::vector<eval::DistributionRow> cmd_report(const RunConfig& config) {
  config.validate();
  auto rows = load_record_rows(require_path(config.paths.input, "input"));
  std::vector<eval::GroupedRecord> grouped;
  for (auto& r : rows) grouped.push_back({r.bias_type.empty() ? "all" : r.bias_type, r.record});
  auto dist = eval::distribution_report(grouped, default_schema());
  io::write_file(require_path(config.paths.output, "output"),
                 csv_with_hash(config, eval::distribution_to_csv(dist)));
  return dist;
}

void cmd_serve(const ServeOptions& options, const std::atomic<bool>& stop) {
  std::optional<fs::path> dir;
  if (!options.directory.empty()) dir = options.directory;
  annotation::ProjectStore store(dir);
  annotation::AnnotationServer server(store);
  const int port = server.bind(options.host, options.port);
  spdlog::info("annotation service listening on {}:{}", options.host, port);
  if (options.on_ready) options.on_ready(port);

  std::atomic<bool> done{false};
  std::jthread watcher([&] {
    while (!done.load()) {
      // Repeated stop() calls are harmless and cover a stop request that
      // arrives before the listen loop has started.
      if (stop.load()) server.stop();
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  });
  server.serve();
  done = true;
  store.flush();
  spdlog::info("annotation service stopped, projects flushed");
}

}  // namespace stereoind::commands
