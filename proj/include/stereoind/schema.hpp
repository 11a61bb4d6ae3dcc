#pragma once

// Categorization scheme for linguistic stereotype indicators.
//
// Eleven indicators are extracted per sentence, in a fixed order that
// matches the numbered questions of the extraction prompt. Closed indicators
// carry an enumeration of allowed values and, per value, the direction in
// which it moves category entitativity, category essentialism or stereotype
// content. Two indicators (full_label, information) are free text.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace stereoind {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

enum class Indicator : std::size_t {
  has_category_label = 0,
  full_label,
  target_type,
  connotation,
  grammatical_form,
  linguistic_form,
  information,
  situation,
  generalization,
  explanation,
  signal_word,
};

inline constexpr std::size_t kIndicatorCount = 11;

inline constexpr std::array<Indicator, kIndicatorCount> kAllIndicators = {
    Indicator::has_category_label, Indicator::full_label,
    Indicator::target_type,        Indicator::connotation,
    Indicator::grammatical_form,   Indicator::linguistic_form,
    Indicator::information,        Indicator::situation,
    Indicator::generalization,     Indicator::explanation,
    Indicator::signal_word,
};

std::string_view key_name(Indicator indicator) noexcept;
std::optional<Indicator> indicator_from_key(std::string_view key) noexcept;

constexpr std::size_t index_of(Indicator indicator) noexcept {
  return static_cast<std::size_t>(indicator);
}

inline constexpr std::string_view kNotApplicable = "not-applicable";
inline constexpr std::string_view kFail = "fail";

enum class Level { language_meaning, linguistic_form };
enum class Side { category_label, associated_content };
enum class Dimension { entitativity, essentialism, stereotype_content };
enum class Sign { strengthen, weaken, neutral };

std::string_view to_string(Level level) noexcept;
std::string_view to_string(Side side) noexcept;
std::string_view to_string(Dimension dimension) noexcept;
std::string_view to_string(Sign sign) noexcept;

struct EffectDirection {
  Dimension dimension = Dimension::entitativity;
  Sign sign = Sign::neutral;

  bool operator==(const EffectDirection&) const = default;
};

// Arrow notation, e.g. "↑ essentialism".
std::string describe(const EffectDirection& effect);

struct ValueEffect {
  std::string value;
  EffectDirection effect;

  bool operator==(const ValueEffect&) const = default;
};

struct IndicatorDef {
  Indicator id = Indicator::has_category_label;
  std::string key;
  std::string display_name;  // row name in the categorization table
  Level level = Level::language_meaning;
  Side side = Side::category_label;
  std::vector<std::string> values;
  // Parseable but invalid values kept only so evaluation can count them.
  std::vector<std::string> legacy_values;
  bool open_text = false;
  std::vector<ValueEffect> effects;

  bool allows(std::string_view value) const;
  bool is_legacy(std::string_view value) const;
  std::vector<EffectDirection> effects_of(std::string_view value) const;

  bool operator==(const IndicatorDef&) const = default;
};

struct IndicatorSchema {
  std::vector<IndicatorDef> indicators;
  std::vector<std::string> sensitive_attributes;

  const IndicatorDef& at(Indicator indicator) const;
  const IndicatorDef* find(std::string_view key) const;
  // Display name -> output key, in question order.
  std::vector<std::pair<std::string, std::string>> key_aliases() const;

  bool operator==(const IndicatorSchema&) const = default;
};

IndicatorSchema default_schema();

ordered_json schema_to_json(const IndicatorSchema& schema);
IndicatorSchema schema_from_json(const json& doc);

// Value, "not-applicable", or "fail" for one indicator of one record.
// `absent` marks a key that was never supplied (e.g. a truncated JSON
// document); validation reports it as a structural violation.
class FieldStatus {
 public:
  enum class Kind { value, not_applicable, fail, absent };

  FieldStatus() = default;

  static FieldStatus of(std::string value);
  static FieldStatus not_applicable();
  static FieldStatus fail(std::string reason);
  static FieldStatus absent();

  Kind kind() const noexcept { return kind_; }
  bool is_value() const noexcept { return kind_ == Kind::value; }
  bool is_not_applicable() const noexcept { return kind_ == Kind::not_applicable; }
  bool is_fail() const noexcept { return kind_ == Kind::fail; }
  bool is_absent() const noexcept { return kind_ == Kind::absent; }

  // Throws std::logic_error unless is_value().
  const std::string& value() const;
  // Failure reason; empty for other kinds.
  const std::string& reason() const noexcept { return kind_ == Kind::fail ? text_ : empty_; }

  bool has_value(std::string_view v) const noexcept { return is_value() && text_ == v; }

  // Class label used in evaluation: the value itself, "not-applicable" or
  // "fail" (absent fields count as fail).
  std::string eval_class() const;

  bool operator==(const FieldStatus&) const = default;

 private:
  FieldStatus(Kind kind, std::string text) : kind_(kind), text_(std::move(text)) {}

  Kind kind_ = Kind::absent;
  std::string text_;
  inline static const std::string empty_;
};

struct Provenance {
  enum class Source { human_annotation, model, adjudicated };

  Source source = Source::human_annotation;
  std::string model;
  std::string run_id;

  bool operator==(const Provenance&) const = default;
};

std::string_view to_string(Provenance::Source source) noexcept;

struct IndicatorRecord {
  std::string sentence_id;
  std::array<FieldStatus, kIndicatorCount> fields{};
  Provenance provenance;

  FieldStatus& operator[](Indicator indicator) { return fields[index_of(indicator)]; }
  const FieldStatus& operator[](Indicator indicator) const {
    return fields[index_of(indicator)];
  }

  bool has_label() const noexcept {
    return fields[index_of(Indicator::has_category_label)].has_value("yes");
  }
  bool lacks_label() const noexcept {
    return fields[index_of(Indicator::has_category_label)].has_value("no");
  }

  // Same field statuses; ignores id and provenance.
  bool same_fields(const IndicatorRecord& other) const { return fields == other.fields; }

  bool operator==(const IndicatorRecord&) const = default;
};

// Builds a record from eleven strings in question order; the literal
// "not-applicable" becomes FieldStatus::not_applicable().
IndicatorRecord make_record(std::string sentence_id,
                            const std::array<std::string, kIndicatorCount>& values);
// has_category_label = no, everything else not-applicable.
IndicatorRecord make_unlabeled_record(std::string sentence_id);

// The eleven-key object used on every wire and file format. Absent fields
// are omitted; failures serialize as "fail".
ordered_json record_to_json(const IndicatorRecord& record);
// Strict inverse of record_to_json: values are taken verbatim, unknown keys
// are ignored, missing keys stay absent. Non-string values throw FormatError.
IndicatorRecord record_from_json(const json& fields, std::string sentence_id = {});

enum class ViolationKind { structural, value, conditional, failed };

std::string_view to_string(ViolationKind kind) noexcept;

struct Violation {
  std::string key;
  ViolationKind kind = ViolationKind::value;
  std::string message;

  bool operator==(const Violation&) const = default;
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  std::vector<std::string> messages() const;
};

ValidationResult validate_record(const IndicatorRecord& record, const IndicatorSchema& schema);

// Conditional applicability: without a category label every other field is
// not-applicable; with situation = other the content-form fields are.
struct GatingChange {
  Indicator indicator;
  FieldStatus original;
};

struct GatingResult {
  IndicatorRecord record;
  std::vector<GatingChange> changes;  // only fields that carried a value
};

GatingResult apply_gating(IndicatorRecord record);

struct KeyEffect {
  std::string key;
  std::string value;
  EffectDirection effect;

  bool operator==(const KeyEffect&) const = default;
};

// One entry per effect of every closed field holding a value. Records
// without a category label have an empty profile. Throws ValidationError
// for invalid records.
std::vector<KeyEffect> effect_profile(const IndicatorRecord& record,
                                      const IndicatorSchema& schema);

}  // namespace stereoind
