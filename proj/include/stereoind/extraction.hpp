#pragma once

// From raw completion text to a gated IndicatorRecord: locate the JSON
// object, repair known formatting defects, parse leniently against the
// schema, then force conditional fields to not-applicable.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stereoind/corpus.hpp"
#include "stereoind/judge.hpp"
#include "stereoind/prompt.hpp"
#include "stereoind/schema.hpp"

namespace stereoind::extraction {

// Repair tags, as recorded in ParseOutcome::repairs.
inline constexpr std::string_view kSmartQuotes = "smart-quotes";
inline constexpr std::string_view kStrippedBackslashes = "stripped-backslashes";
inline constexpr std::string_view kInsertedCommas = "inserted-commas";
inline constexpr std::string_view kTrailingCommas = "removed-trailing-commas";
inline constexpr std::string_view kKeyWhitespace = "collapsed-key-whitespace";
inline constexpr std::string_view kKeyNormalized = "key-normalized";
inline constexpr std::string_view kKeyAlias = "key-alias";
inline constexpr std::string_view kCaseFolded = "case-folded";
inline constexpr std::string_view kTrimmedWhitespace = "trimmed-whitespace";
inline constexpr std::string_view kValueAlias = "value-alias";
inline constexpr std::string_view kBooleanCoerced = "boolean-coerced";

// First balanced top-level {...} block, string-aware. nullopt when none.
std::optional<std::string> extract_json(std::string_view raw);

struct RepairResult {
  std::string text;
  std::vector<std::string> repairs;  // one tag per pass that changed the text
};

// Best-effort textual repair. Text that already parses is returned as is
// with no repairs.
RepairResult repair(std::string_view candidate);

struct FieldFailure {
  std::string key;
  std::string reason;

  bool operator==(const FieldFailure&) const = default;
};

struct ParseOutcome {
  IndicatorRecord record;
  std::vector<std::string> repairs;
  std::vector<FieldFailure> failures;
  std::vector<std::string> warnings;
  // Values overwritten by gating.
  std::vector<Violation> violations;

  bool all_failed() const;
};

// Lenient parse of a candidate object. Missing keys and invalid closed
// values become fail; unknown keys produce warnings. Unparseable text fails
// every key. No gating is applied.
ParseOutcome parse_record(std::string_view candidate, const IndicatorSchema& schema);

struct EnforceResult {
  IndicatorRecord record;
  std::vector<Violation> violations;
};

EnforceResult enforce_conditionals(IndicatorRecord record);

// extract_json -> repair -> parse_record -> enforce_conditionals. The
// failure list reflects the final, gated record.
ParseOutcome process_completion(std::string_view raw, const IndicatorSchema& schema);

// Every key failed with the same reason (backend error, no JSON found).
ParseOutcome failed_outcome(std::string reason);

struct StageCompletion {
  prompt::Stage stage = prompt::Stage::single;
  judge::RawCompletion completion;
};

struct ExtractionResult {
  std::string sentence_id;
  std::string text;
  std::string bias_type;
  ParseOutcome outcome;
  std::vector<StageCompletion> completions;  // one per stage that ran
};

struct ExtractionOptions {
  prompt::PromptConfig prompt;
  judge::JudgeParams params;
  std::string run_id;
};

// Output order equals input order. Per-item failures never abort the run.
std::vector<ExtractionResult> run_extraction(const std::vector<corpus::SentenceItem>& items,
                                             const ExtractionOptions& options,
                                             judge::Backend& backend,
                                             const IndicatorSchema& schema);

// {"id", "text", "bias_type", "record", "repairs", "failures", "warnings", "violations", "raw_ref"}
nlohmann::ordered_json to_json(const ExtractionResult& result);
// Sidecar entry: {"id", "stage", "backend", "attempts", "text"} plus "failure".
nlohmann::ordered_json raw_to_json(const std::string& sentence_id, const StageCompletion& raw);

// Sidecar file name for one sentence's raw completions.
std::string raw_file_name(std::string_view sentence_id);

// Reads the "record" object of an extraction output row (or a bare record
// row carrying an "id").
IndicatorRecord record_from_row(const nlohmann::json& row);

}  // namespace stereoind::extraction
