#include "stereoind/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "stereoind/errors.hpp"
#include "stereoind/jsonl.hpp"

namespace stereoind::corpus {

namespace {

std::optional<std::size_t> column_index(const std::vector<std::string>& header,
                                        std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t require_column(const std::vector<std::string>& header, std::string_view name,
                           const std::filesystem::path& path) {
  auto idx = column_index(header, name);
  if (!idx) {
    throw FormatError(path.string() + ": missing column '" + std::string(name) + "'");
  }
  return *idx;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string strip_bom(std::string text) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    text.erase(0, 3);
  }
  return text;
}

}  // namespace

std::string_view to_string(Direction direction) noexcept {
  return direction == Direction::stereo ? "stereo" : "antistereo";
}

std::optional<Direction> direction_from_string(std::string_view text) noexcept {
  if (text == "stereo") return Direction::stereo;
  if (text == "antistereo") return Direction::antistereo;
  return std::nullopt;
}

bool SentenceFilter::accepts(const SentenceItem& item) const {
  if (direction && item.direction != *direction) return false;
  if (bias_types.empty()) return true;
  return std::find(bias_types.begin(), bias_types.end(), item.bias_type) != bias_types.end();
}

std::vector<DelimitedRow> parse_delimited(std::string_view text, char delimiter) {
  std::vector<DelimitedRow> rows;
  DelimitedRow row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  row.line = 1;

  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    bool blank = row.fields.size() == 1 && row.fields[0].empty();
    if (!blank) rows.push_back(std::move(row));
    row = DelimitedRow{};
    row.line = line;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == delimiter) {
      end_field();
    } else if (c == '\r') {
      // CRLF line endings
    } else if (c == '\n') {
      ++line;
      end_row();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw FormatError("unterminated quoted field starting on line " + std::to_string(row.line));
  if (!field.empty() || field_started || !row.fields.empty()) end_row();
  return rows;
}

Loaded<SentenceItem> load_crows_pairs(const std::filesystem::path& path,
                                      const SentenceFilter& filter,
                                      const CrowsPairsColumns& columns) {
  auto rows = parse_delimited(strip_bom(io::read_file(path)), ',');
  if (rows.empty()) throw FormatError(path.string() + ": empty file");
  const auto& header = rows.front().fields;
  std::size_t text_col = require_column(header, columns.text, path);
  std::size_t bias_col = require_column(header, columns.bias_type, path);
  std::size_t dir_col = require_column(header, columns.direction, path);
  std::optional<std::size_t> id_col = column_index(header, columns.id);
  if (!columns.id.empty() && !id_col) {
    throw FormatError(path.string() + ": missing column '" + columns.id + "'");
  }

  Loaded<SentenceItem> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    auto cell = [&](std::size_t c) -> std::string {
      if (c >= f.size()) {
        throw FormatError(path.string() + ":" + std::to_string(rows[r].line) +
                          ": row has " + std::to_string(f.size()) + " fields");
      }
      return f[c];
    };
    SentenceItem item;
    item.source_row = r - 1;
    item.id = id_col ? trim(cell(*id_col)) : std::to_string(r - 1);
    if (item.id.empty()) item.id = std::to_string(r - 1);
    item.text = trim(cell(text_col));
    item.bias_type = trim(cell(bias_col));
    auto dir = direction_from_string(trim(cell(dir_col)));
    if (!dir) {
      throw FormatError(path.string() + ":" + std::to_string(rows[r].line) +
                        ": unknown direction '" + cell(dir_col) + "'");
    }
    item.direction = *dir;
    if (item.text.empty()) {
      throw FormatError(path.string() + ":" + std::to_string(rows[r].line) + ": empty sentence");
    }
    if (filter.accepts(item)) out.items.push_back(std::move(item));
  }
  if (out.items.empty()) {
    out.warnings.push_back(path.string() + ": filter matched no rows");
    spdlog::warn("{}", out.warnings.back());
  }
  return out;
}

std::vector<SentenceItem> filter_items(const std::vector<SentenceItem>& items,
                                       const SentenceFilter& filter) {
  std::vector<SentenceItem> out;
  std::copy_if(items.begin(), items.end(), std::back_inserter(out),
               [&](const SentenceItem& item) { return filter.accepts(item); });
  return out;
}

double normalize_score(double raw) {
  if (!std::isfinite(raw) || raw < -1.0 || raw > 1.0) {
    throw DataError("reference score " + std::to_string(raw) + " outside [-1, 1]");
  }
  return (raw + 1.0) / 2.0;
}

ReferenceScore make_reference_score(std::string text, double raw) {
  return {std::move(text), raw, normalize_score(raw)};
}

Loaded<ReferenceScore> load_reference_scores(const std::filesystem::path& path,
                                             const ScoreColumns& columns) {
  auto text = strip_bom(io::read_file(path));
  char delimiter = ',';
  if (columns.delimiter) {
    delimiter = *columns.delimiter;
  } else {
    auto first_line = text.substr(0, text.find('\n'));
    if (first_line.find('\t') != std::string::npos) delimiter = '\t';
  }
  auto rows = parse_delimited(text, delimiter);
  if (rows.empty()) throw FormatError(path.string() + ": empty file");
  const auto& header = rows.front().fields;
  std::size_t text_col = require_column(header, columns.text, path);
  std::size_t score_col = require_column(header, columns.score, path);

  Loaded<ReferenceScore> out;
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    auto where = path.string() + ":" + std::to_string(rows[r].line);
    if (std::max(text_col, score_col) >= f.size()) {
      throw FormatError(where + ": row has " + std::to_string(f.size()) + " fields");
    }
    auto sentence = trim(f[text_col]);
    auto number = trim(f[score_col]);
    double raw = 0.0;
    auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), raw);
    if (ec != std::errc{} || ptr != number.data() + number.size() || number.empty()) {
      throw FormatError(where + ": cannot parse score '" + number + "'");
    }
    ReferenceScore score;
    try {
      score = make_reference_score(sentence, raw);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    auto [it, inserted] = position.try_emplace(sentence, out.items.size());
    if (inserted) {
      out.items.push_back(std::move(score));
    } else {
      out.warnings.push_back(where + ": duplicate text, later row replaces earlier");
      spdlog::warn("{}", out.warnings.back());
      out.items[it->second] = std::move(score);
    }
  }
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

JoinResult join_scores(const std::vector<SentenceItem>& items,
                       const std::vector<ReferenceScore>& scores, MatchMode mode) {
  auto key_of = [mode](std::string_view text) {
    return mode == MatchMode::exact_text ? std::string(text) : normalize_text(text);
  };
  std::unordered_map<std::string, const ReferenceScore*> index;
  for (const auto& s : scores) index[key_of(s.text)] = &s;

  JoinResult out;
  for (const auto& item : items) {
    auto it = index.find(key_of(item.text));
    if (it == index.end()) {
      out.unmatched.push_back(item);
    } else {
      out.matched.emplace_back(item, *it->second);
    }
  }
  return out;
}

Exclusions Exclusions::load(const std::filesystem::path& path) {
  Exclusions ex;
  auto text = strip_bom(io::read_file(path));
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    auto line = trim(std::string_view(text).substr(pos, end - pos));
    if (!line.empty() && line.front() != '#') ex.entries.insert(line);
    pos = end + 1;
  }
  return ex;
}

std::vector<SentenceItem> apply_exclusions(std::vector<SentenceItem> items,
                                           const Exclusions& exclusions) {
  for (auto& item : items) {
    if (item.excluded) continue;
    if (exclusions.entries.count(item.id)) {
      item.excluded = true;
      item.exclusion_reason = "excluded by id";
    } else if (exclusions.entries.count(item.text)) {
      item.excluded = true;
      item.exclusion_reason = "excluded by text";
    }
  }
  return items;
}

std::vector<SentenceItem> active_items(const std::vector<SentenceItem>& items) {
  std::vector<SentenceItem> out;
  std::copy_if(items.begin(), items.end(), std::back_inserter(out),
               [](const SentenceItem& item) { return !item.excluded; });
  return out;
}

nlohmann::ordered_json to_json(const SentenceItem& item) {
  nlohmann::ordered_json j;
  j["id"] = item.id;
  j["text"] = item.text;
  j["bias_type"] = item.bias_type;
  j["direction"] = to_string(item.direction);
  if (item.excluded) j["excluded"] = item.exclusion_reason;
  return j;
}

SentenceItem sentence_from_json(const nlohmann::json& row) {
  SentenceItem item;
  try {
    const auto& id = row.at("id");
    item.id = id.is_string() ? id.get<std::string>() : id.dump();
    item.text = row.at("text").get<std::string>();
    item.bias_type = row.value("bias_type", std::string());
    auto dir = direction_from_string(row.value("direction", std::string("stereo")));
    if (!dir) throw FormatError("unknown direction in sentence row");
    item.direction = *dir;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("sentence row: ") + e.what());
  }
  if (item.text.empty()) throw FormatError("sentence row " + item.id + ": empty text");
  return item;
}

nlohmann::ordered_json to_json(const SentenceItem& item, const ReferenceScore& score) {
  auto j = to_json(item);
  j["score_bws_raw"] = score.raw;
  j["score_bws"] = score.normalized;
  return j;
}

}  // namespace stereoind::corpus
