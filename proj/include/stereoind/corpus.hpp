#pragma once

// Sentence corpora (CrowS-Pairs style CSV), external reference scores and
// exclusion lists, plus the join between sentences and scores.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace stereoind::corpus {

enum class Direction { stereo, antistereo };

std::string_view to_string(Direction direction) noexcept;
std::optional<Direction> direction_from_string(std::string_view text) noexcept;

struct SentenceItem {
  std::string id;
  std::string text;
  std::string bias_type;
  Direction direction = Direction::stereo;
  bool excluded = false;
  std::string exclusion_reason;
  std::size_t source_row = 0;

  bool operator==(const SentenceItem&) const = default;
};

template <typename T>
struct Loaded {
  std::vector<T> items;
  std::vector<std::string> warnings;
};

struct CrowsPairsColumns {
  std::string id;  // empty: the unnamed leading index column, else the row index
  std::string text = "sent_more";
  std::string bias_type = "bias_type";
  std::string direction = "stereo_antistereo";
};

struct SentenceFilter {
  std::vector<std::string> bias_types;  // empty keeps every bias type
  std::optional<Direction> direction;

  bool accepts(const SentenceItem& item) const;
};

// RFC-4180 style parser: quoted fields may contain delimiters, doubled
// quotes and line breaks. Each row carries the 1-based line it starts on.
struct DelimitedRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};
std::vector<DelimitedRow> parse_delimited(std::string_view text, char delimiter);

Loaded<SentenceItem> load_crows_pairs(const std::filesystem::path& path,
                                      const SentenceFilter& filter,
                                      const CrowsPairsColumns& columns = {});

// Same predicate as the loader, for already-loaded items.
std::vector<SentenceItem> filter_items(const std::vector<SentenceItem>& items,
                                       const SentenceFilter& filter);

struct ReferenceScore {
  std::string text;
  double raw = 0.0;         // [-1, 1]
  double normalized = 0.5;  // (raw + 1) / 2

  bool operator==(const ReferenceScore&) const = default;
};

// Affine map [-1, 1] -> [0, 1]. Throws DataError outside the range.
double normalize_score(double raw);
ReferenceScore make_reference_score(std::string text, double raw);

struct ScoreColumns {
  std::string text = "text";
  std::string score = "score";
  std::optional<char> delimiter;  // default: tab if the header has one, else comma
};

// Duplicate texts: the last row wins and a warning is recorded.
Loaded<ReferenceScore> load_reference_scores(const std::filesystem::path& path,
                                             const ScoreColumns& columns = {});

enum class MatchMode { exact_text, normalized_text };

// Lowercase, trim, collapse internal whitespace.
std::string normalize_text(std::string_view text);

struct JoinResult {
  std::vector<std::pair<SentenceItem, ReferenceScore>> matched;
  std::vector<SentenceItem> unmatched;
};

JoinResult join_scores(const std::vector<SentenceItem>& items,
                       const std::vector<ReferenceScore>& scores,
                       MatchMode mode = MatchMode::normalized_text);

struct Exclusions {
  std::set<std::string> entries;  // sentence ids or exact sentence texts

  // One entry per line; blank lines and lines starting with '#' are skipped.
  static Exclusions load(const std::filesystem::path& path);
};

std::vector<SentenceItem> apply_exclusions(std::vector<SentenceItem> items,
                                           const Exclusions& exclusions);
// Items not flagged as excluded.
std::vector<SentenceItem> active_items(const std::vector<SentenceItem>& items);

nlohmann::ordered_json to_json(const SentenceItem& item);
SentenceItem sentence_from_json(const nlohmann::json& row);
nlohmann::ordered_json to_json(const SentenceItem& item, const ReferenceScore& score);

}  // namespace stereoind::corpus
