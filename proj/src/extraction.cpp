#include "stereoind/extraction.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include <spdlog/spdlog.h>

namespace stereoind::extraction {

namespace {

using nlohmann::json;

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Trims and collapses internal whitespace runs to one space.
std::string squeeze(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

void add_repair(std::vector<std::string>& repairs, std::string_view tag) {
  if (std::find(repairs.begin(), repairs.end(), tag) == repairs.end()) repairs.emplace_back(tag);
}

// ---- textual repairs -------------------------------------------------------

constexpr std::string_view kLeftDouble = "\xE2\x80\x9C";   // U+201C
constexpr std::string_view kRightDouble = "\xE2\x80\x9D";  // U+201D
constexpr std::string_view kLowDouble = "\xE2\x80\x9E";    // U+201E

std::size_t smart_quote_at(std::string_view s, std::size_t i) {
  for (auto q : {kLeftDouble, kRightDouble, kLowDouble}) {
    if (s.substr(i, q.size()) == q) return q.size();
  }
  return 0;
}

// Smart quotes used as string delimiters become plain quotes. Smart quotes
// inside ordinary strings are content and stay.
std::string fix_smart_quotes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  enum { outside, plain, smart } state = outside;
  for (std::size_t i = 0; i < s.size();) {
    char c = s[i];
    std::size_t q = smart_quote_at(s, i);
    if (state == plain) {
      out.push_back(c);
      if (c == '\\' && i + 1 < s.size()) {
        out.push_back(s[i + 1]);
        i += 2;
        continue;
      }
      if (c == '"') state = outside;
      ++i;
    } else if (state == smart) {
      if (q || c == '"') {
        out.push_back('"');
        state = outside;
        i += q ? q : 1;
      } else {
        out.push_back(c);
        ++i;
      }
    } else if (q) {
      out.push_back('"');
      state = smart;
      i += q;
    } else {
      if (c == '"') state = plain;
      out.push_back(c);
      ++i;
    }
  }
  return out;
}

bool valid_escape(char c) {
  return c == '"' || c == '\\' || c == '/' || c == 'b' || c == 'f' || c == 'n' || c == 'r' ||
         c == 't' || c == 'u';
}

// Drops backslashes outside strings and those starting an invalid escape
// inside strings (e.g. "has\_category\_label").
std::string strip_backslashes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '\\') {
      if (in_string && i + 1 < s.size() && valid_escape(s[i + 1])) {
        out.push_back(c);
        out.push_back(s[++i]);
      }
      continue;
    }
    if (c == '"') in_string = !in_string;
    out.push_back(c);
  }
  return out;
}

struct StructuralFix {
  std::string text;
  bool inserted_commas = false;
  bool removed_trailing = false;
  bool collapsed_keys = false;
};

// Token-level pass over the object: inserts missing separators between
// members, drops commas directly before a closing bracket and collapses
// whitespace runs inside keys.
StructuralFix fix_structure(std::string_view s) {
  enum class State { key_or_end, colon, value, comma_or_end };
  struct Frame {
    bool object;
    State state;
    std::optional<std::size_t> pending_comma;  // output index of a comma awaiting a member
  };

  StructuralFix fix;
  std::string& out = fix.text;
  std::vector<Frame> stack{{false, State::value, std::nullopt}};
  std::size_t last_value_end = 0;

  auto begin_value = [&](Frame& f) {
    // A value (or key) arrives where a separator was expected.
    if (f.state == State::comma_or_end) {
      out.insert(last_value_end, ",");
      fix.inserted_commas = true;
      f.state = f.object ? State::key_or_end : State::value;
    }
    f.pending_comma.reset();
  };
  auto end_value = [&](Frame& f) {
    f.state = State::comma_or_end;
    last_value_end = out.size();
  };

  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    Frame& f = stack.back();
    if (is_space(c)) {
      out.push_back(c);
    } else if (c == '{' || c == '[') {
      begin_value(f);
      out.push_back(c);
      stack.push_back({c == '{', c == '{' ? State::key_or_end : State::value, std::nullopt});
    } else if (c == '}' || c == ']') {
      if (f.pending_comma) {
        out.erase(*f.pending_comma, 1);
        fix.removed_trailing = true;
      }
      out.push_back(c);
      if (stack.size() > 1) stack.pop_back();
      end_value(stack.back());
    } else if (c == ',') {
      if (f.state == State::comma_or_end) {
        f.pending_comma = out.size();
        f.state = f.object ? State::key_or_end : State::value;
      }
      out.push_back(c);
    } else if (c == ':') {
      if (f.state == State::colon) f.state = State::value;
      out.push_back(c);
    } else if (c == '"') {
      std::size_t j = i + 1;
      std::string body;
      while (j < s.size() && s[j] != '"') {
        if (s[j] == '\\' && j + 1 < s.size()) body.push_back(s[j++]);
        body.push_back(s[j++]);
      }
      bool is_key = f.object && (f.state == State::key_or_end || f.state == State::comma_or_end);
      begin_value(f);
      if (is_key) {
        auto squeezed = squeeze(body);
        if (squeezed != body) fix.collapsed_keys = true;
        body = std::move(squeezed);
      }
      out.push_back('"');
      out += body;
      if (j < s.size()) out.push_back('"');
      i = j;
      if (is_key) {
        f.state = State::colon;
      } else {
        end_value(f);
      }
    } else {
      begin_value(f);
      std::size_t j = i;
      while (j < s.size() && !is_space(s[j]) && std::string_view(",:{}[]\"").find(s[j]) ==
                                                    std::string_view::npos) {
        out.push_back(s[j++]);
      }
      i = j - 1;
      end_value(f);
    }
  }
  return fix;
}

bool parses(std::string_view text) { return json::accept(text); }

// ---- key and value canonicalization ---------------------------------------

std::string normalize_key(std::string_view key) {
  std::string out;
  for (char c : lower(key)) {
    if (is_space(c) || c == '-' || c == '.' || c == '_') {
      if (!out.empty() && out.back() != '_') out.push_back('_');
    } else {
      out.push_back(c);
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

// Observed model misspellings and the column names of annotation tables.
const std::map<std::string, Indicator>& extra_key_aliases() {
  static const std::map<std::string, Indicator> aliases = {
      {"has_category_label_and_content", Indicator::has_category_label},
      {"label", Indicator::full_label},
      {"target", Indicator::target_type},
      {"gram_form", Indicator::grammatical_form},
      {"ling_form", Indicator::linguistic_form},
  };
  return aliases;
}

struct KeyMatch {
  Indicator indicator;
  int rank;  // 0 exact, 1 normalized, 2 alias
};

std::optional<KeyMatch> match_key(std::string_view key, const IndicatorSchema& schema) {
  if (auto ind = indicator_from_key(key)) return KeyMatch{*ind, 0};
  auto norm = normalize_key(key);
  if (auto ind = indicator_from_key(norm)) return KeyMatch{*ind, 1};
  for (const auto& def : schema.indicators) {
    if (normalize_key(def.display_name) == norm) return KeyMatch{def.id, 2};
  }
  auto it = extra_key_aliases().find(norm);
  if (it != extra_key_aliases().end()) return KeyMatch{it->second, 2};
  return std::nullopt;
}

bool is_na_spelling(std::string_view folded) {
  return folded == "not-applicable" || folded == "not applicable" || folded == "not_applicable" ||
         folded == "n/a" || folded == "na";
}

const std::map<std::string, std::string>& value_aliases() {
  static const std::map<std::string, std::string> aliases = {
      {"situational behavior", "situational behaviour"},
      {"enduring characteristic", "enduring characteristics"},
  };
  return aliases;
}

FieldStatus canonical_value(const IndicatorDef& def, const json& v,
                            std::vector<std::string>& repairs, std::vector<std::string>& warnings) {
  if (v.is_boolean()) {
    if (def.allows("yes") && def.allows("no")) {
      add_repair(repairs, kBooleanCoerced);
      return FieldStatus::of(v.get<bool>() ? "yes" : "no");
    }
    return FieldStatus::fail(v.dump());
  }
  if (!v.is_string()) return FieldStatus::fail(v.dump());
  const auto& s = v.get_ref<const std::string&>();
  if (s == kNotApplicable) return FieldStatus::not_applicable();
  if (s == kFail) return FieldStatus::fail(std::string(kFail));

  if (def.open_text) {
    auto folded = lower(squeeze(s));
    if (folded == "not-applicable" || folded == "not applicable") {
      add_repair(repairs, kValueAlias);
      return FieldStatus::not_applicable();
    }
    return FieldStatus::of(s);
  }

  auto trimmed = squeeze(s);
  if (trimmed != s) add_repair(repairs, kTrimmedWhitespace);
  auto folded = lower(trimmed);
  if (folded != trimmed) add_repair(repairs, kCaseFolded);
  if (def.allows(folded)) return FieldStatus::of(folded);
  if (is_na_spelling(folded)) {
    add_repair(repairs, kValueAlias);
    return FieldStatus::not_applicable();
  }
  auto spaced = folded;
  std::replace(spaced.begin(), spaced.end(), '_', ' ');
  std::replace(spaced.begin(), spaced.end(), '-', ' ');
  spaced = squeeze(spaced);
  if (auto it = value_aliases().find(spaced); it != value_aliases().end()) spaced = it->second;
  if (spaced != folded && def.allows(spaced)) {
    add_repair(repairs, kValueAlias);
    return FieldStatus::of(spaced);
  }
  if (def.is_legacy(folded)) {
    warnings.push_back(def.key + ": legacy value '" + folded + "'");
    return FieldStatus::of(folded);
  }
  return FieldStatus::fail(s);
}

std::vector<FieldFailure> collect_failures(const IndicatorRecord& record) {
  std::vector<FieldFailure> out;
  for (Indicator ind : kAllIndicators) {
    const auto& f = record[ind];
    if (f.is_fail()) out.push_back({std::string(key_name(ind)), f.reason()});
    if (f.is_absent()) out.push_back({std::string(key_name(ind)), "missing"});
  }
  return out;
}

// extract -> repair -> parse, without gating.
ParseOutcome parse_raw(std::string_view raw, const IndicatorSchema& schema) {
  auto candidate = extract_json(raw);
  if (!candidate) return failed_outcome("no JSON object found");
  auto fixed = repair(*candidate);
  auto out = parse_record(fixed.text, schema);
  out.repairs.insert(out.repairs.begin(), fixed.repairs.begin(), fixed.repairs.end());
  return out;
}

void finalize(ParseOutcome& out) {
  auto enforced = enforce_conditionals(std::move(out.record));
  out.record = std::move(enforced.record);
  out.violations.insert(out.violations.end(), enforced.violations.begin(),
                        enforced.violations.end());
  out.failures = collect_failures(out.record);
}

std::string failure_reason(const judge::RawCompletion& c) {
  return std::string(judge::to_string(c.failure->kind)) + ": " + c.failure->message;
}

}  // namespace

std::string raw_file_name(std::string_view id) {
  std::string out;
  for (char c : id) {
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  if (out.empty() || out.front() == '.') out.insert(out.begin(), '_');
  return out + ".json";
}

namespace {

bool is_label_side(Indicator ind) { return index_of(ind) <= index_of(Indicator::linguistic_form); }

}  // namespace

std::optional<std::string> extract_json(std::string_view raw) {
  auto start = raw.find('{');
  if (start == std::string_view::npos) return std::nullopt;
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < raw.size(); ++i) {
    char c = raw[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}' && --depth == 0) {
      return std::string(raw.substr(start, i - start + 1));
    }
  }
  return std::nullopt;
}

RepairResult repair(std::string_view candidate) {
  RepairResult result{std::string(candidate), {}};
  if (parses(candidate)) return result;

  auto step = [&](std::string next, std::string_view tag) {
    if (next != result.text) {
      result.text = std::move(next);
      add_repair(result.repairs, tag);
    }
  };
  step(fix_smart_quotes(result.text), kSmartQuotes);
  step(strip_backslashes(result.text), kStrippedBackslashes);

  auto structural = fix_structure(result.text);
  result.text = std::move(structural.text);
  if (structural.inserted_commas) add_repair(result.repairs, kInsertedCommas);
  if (structural.removed_trailing) add_repair(result.repairs, kTrailingCommas);
  if (structural.collapsed_keys) add_repair(result.repairs, kKeyWhitespace);
  return result;
}

bool ParseOutcome::all_failed() const {
  return std::all_of(record.fields.begin(), record.fields.end(),
                     [](const FieldStatus& f) { return f.is_fail(); });
}

ParseOutcome failed_outcome(std::string reason) {
  ParseOutcome out;
  for (auto& f : out.record.fields) f = FieldStatus::fail(reason);
  out.failures = collect_failures(out.record);
  return out;
}

ParseOutcome parse_record(std::string_view candidate, const IndicatorSchema& schema) {
  auto doc = json::parse(candidate, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) return failed_outcome("unparseable JSON");
  if (!doc.is_object()) return failed_outcome("completion is not a JSON object");

  ParseOutcome out;
  std::array<std::optional<std::pair<int, std::string>>, kIndicatorCount> chosen;
  for (const auto& [key, value] : doc.items()) {
    auto match = match_key(key, schema);
    if (!match) {
      out.warnings.push_back("unknown key '" + key + "' ignored");
      continue;
    }
    auto& slot = chosen[index_of(match->indicator)];
    if (slot && slot->first <= match->rank) {
      out.warnings.push_back("key '" + key + "' duplicates '" + slot->second + "', ignored");
      continue;
    }
    if (slot) out.warnings.push_back("key '" + slot->second + "' superseded by '" + key + "'");
    slot = std::make_pair(match->rank, key);
  }

  for (Indicator ind : kAllIndicators) {
    const auto& slot = chosen[index_of(ind)];
    if (!slot) {
      out.record[ind] = FieldStatus::fail("missing");
      continue;
    }
    if (slot->first == 1) add_repair(out.repairs, kKeyNormalized);
    if (slot->first == 2) add_repair(out.repairs, kKeyAlias);
    out.record[ind] = canonical_value(schema.at(ind), doc.at(slot->second), out.repairs,
                                      out.warnings);
  }
  out.failures = collect_failures(out.record);
  return out;
}

EnforceResult enforce_conditionals(IndicatorRecord record) {
  const bool no_label = record.lacks_label();
  auto gated = apply_gating(std::move(record));
  EnforceResult out{std::move(gated.record), {}};
  for (const auto& change : gated.changes) {
    out.violations.push_back(
        {std::string(key_name(change.indicator)), ViolationKind::conditional,
         "value '" + change.original.value() + "' overwritten with not-applicable (" +
             (no_label ? "has_category_label is no" : "situation is other") + ")"});
  }
  return out;
}

ParseOutcome process_completion(std::string_view raw, const IndicatorSchema& schema) {
  auto out = parse_raw(raw, schema);
  finalize(out);
  return out;
}

std::vector<ExtractionResult> run_extraction(const std::vector<corpus::SentenceItem>& items,
                                             const ExtractionOptions& options,
                                             judge::Backend& backend,
                                             const IndicatorSchema& schema) {
  options.prompt.validate();
  options.params.validate();
  std::vector<ExtractionResult> results(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    results[i].sentence_id = items[i].id;
    results[i].text = items[i].text;
    results[i].bias_type = items[i].bias_type;
  }

  if (options.prompt.mode == prompt::Mode::single_stage) {
    auto bundle = prompt::build_prompt(options.prompt);
    std::vector<judge::BatchItem> batch;
    batch.reserve(items.size());
    for (const auto& item : items) batch.push_back({item.id, item.text, bundle});
    auto raw = judge::complete_batch(backend, batch, options.params);
    for (std::size_t i = 0; i < items.size(); ++i) {
      auto& r = results[i];
      r.outcome = raw[i].ok() ? parse_raw(raw[i].text, schema) : failed_outcome(failure_reason(raw[i]));
      r.completions.push_back({prompt::Stage::single, std::move(raw[i])});
    }
  } else {
    auto stages = prompt::build_multistage(options.prompt);
    std::vector<judge::BatchItem> first;
    first.reserve(items.size());
    for (const auto& item : items) first.push_back({item.id, item.text, stages.label_stage});
    auto raw1 = judge::complete_batch(backend, first, options.params);

    std::vector<judge::BatchItem> second;
    std::vector<std::size_t> second_index;
    for (std::size_t i = 0; i < items.size(); ++i) {
      auto& r = results[i];
      r.outcome = raw1[i].ok() ? parse_raw(raw1[i].text, schema) : failed_outcome(failure_reason(raw1[i]));
      r.completions.push_back({prompt::Stage::label, std::move(raw1[i])});
      const auto& rec = r.outcome.record;
      if (!rec.has_label()) continue;
      const auto& label = rec[Indicator::full_label];
      if (!label.is_value()) {
        for (Indicator ind : kAllIndicators) {
          if (!is_label_side(ind)) {
            r.outcome.record[ind] = FieldStatus::fail("label stage produced no category label");
          }
        }
        continue;
      }
      second.push_back({items[i].id, items[i].text, stages.content_stage.render(label.value())});
      second_index.push_back(i);
    }

    auto raw2 = judge::complete_batch(backend, second, options.params);
    for (std::size_t k = 0; k < second.size(); ++k) {
      auto& r = results[second_index[k]];
      auto content = raw2[k].ok() ? parse_raw(raw2[k].text, schema)
                                  : failed_outcome(failure_reason(raw2[k]));
      for (Indicator ind : kAllIndicators) {
        if (!is_label_side(ind)) r.outcome.record[ind] = content.record[ind];
      }
      for (auto& tag : content.repairs) add_repair(r.outcome.repairs, tag);
      for (auto& w : content.warnings) r.outcome.warnings.push_back("content stage: " + w);
      r.completions.push_back({prompt::Stage::content, std::move(raw2[k])});
    }
  }

  for (auto& r : results) {
    r.outcome.record.sentence_id = r.sentence_id;
    r.outcome.record.provenance = {Provenance::Source::model, options.params.model, options.run_id};
    finalize(r.outcome);
    if (r.outcome.all_failed()) {
      spdlog::warn("sentence {}: every indicator failed ({})", r.sentence_id,
                   r.outcome.failures.empty() ? "" : r.outcome.failures.front().reason);
    }
  }
  return results;
}

nlohmann::ordered_json to_json(const ExtractionResult& result) {
  nlohmann::ordered_json j;
  j["id"] = result.sentence_id;
  j["text"] = result.text;
  j["bias_type"] = result.bias_type;
  j["record"] = record_to_json(result.outcome.record);
  j["repairs"] = result.outcome.repairs;
  auto failures = nlohmann::ordered_json::array();
  for (const auto& f : result.outcome.failures) failures.push_back({{"key", f.key}, {"reason", f.reason}});
  j["failures"] = std::move(failures);
  j["warnings"] = result.outcome.warnings;
  auto violations = nlohmann::ordered_json::array();
  for (const auto& v : result.outcome.violations) {
    violations.push_back({{"key", v.key}, {"kind", to_string(v.kind)}, {"message", v.message}});
  }
  j["violations"] = std::move(violations);
  j["raw_ref"] = result.outcome.record.provenance.run_id + "/" + raw_file_name(result.sentence_id);
  return j;
}

nlohmann::ordered_json raw_to_json(const std::string& sentence_id, const StageCompletion& raw) {
  nlohmann::ordered_json j;
  j["id"] = sentence_id;
  j["stage"] = prompt::to_string(raw.stage);
  j["backend"] = raw.completion.backend;
  j["attempts"] = raw.completion.attempts;
  j["text"] = raw.completion.text;
  if (raw.completion.failure) {
    j["failure"] = {{"kind", judge::to_string(raw.completion.failure->kind)},
                    {"message", raw.completion.failure->message}};
  }
  return j;
}

IndicatorRecord record_from_row(const nlohmann::json& row) {
  if (!row.is_object()) throw FormatError("record row must be a JSON object");
  std::string id;
  if (row.contains("id")) id = row["id"].is_string() ? row["id"].get<std::string>() : row["id"].dump();
  const auto& fields = row.contains("record") ? row["record"] : row;
  return record_from_json(fields, std::move(id));
}

}  // namespace stereoind::extraction
