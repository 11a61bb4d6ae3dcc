#include "stereoind/schema.hpp"

#include <algorithm>
#include <stdexcept>

#include "stereoind/errors.hpp"

namespace stereoind {

namespace {

constexpr std::array<std::string_view, kIndicatorCount> kKeys = {
    "has_category_label", "full_label",   "target_type", "connotation",
    "grammatical_form",   "linguistic_form", "information", "situation",
    "generalization",     "explanation",  "signal_word",
};

EffectDirection up(Dimension d) { return {d, Sign::strengthen}; }
EffectDirection down(Dimension d) { return {d, Sign::weaken}; }
EffectDirection flat(Dimension d) { return {d, Sign::neutral}; }

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view text, const std::array<Enum, N>& all, const char* what) {
  for (Enum e : all) {
    if (to_string(e) == text) return e;
  }
  throw FormatError(std::string("unknown ") + what + " '" + std::string(text) + "'");
}

bool applicable_closed(const IndicatorRecord& record, Indicator indicator) {
  if (!record.has_label()) return false;
  switch (indicator) {
    case Indicator::generalization:
    case Indicator::explanation:
    case Indicator::signal_word:
      return record[Indicator::situation].is_value() &&
             !record[Indicator::situation].has_value("other");
    default:
      return true;
  }
}

bool gated_by_situation(Indicator indicator) {
  return indicator == Indicator::generalization || indicator == Indicator::explanation ||
         indicator == Indicator::signal_word;
}

}  // namespace

std::string_view key_name(Indicator indicator) noexcept { return kKeys[index_of(indicator)]; }

std::optional<Indicator> indicator_from_key(std::string_view key) noexcept {
  for (std::size_t i = 0; i < kKeys.size(); ++i) {
    if (kKeys[i] == key) return static_cast<Indicator>(i);
  }
  return std::nullopt;
}

std::string_view to_string(Level level) noexcept {
  return level == Level::language_meaning ? "language-meaning" : "linguistic-form";
}

std::string_view to_string(Side side) noexcept {
  return side == Side::category_label ? "category-label" : "associated-content";
}

std::string_view to_string(Dimension dimension) noexcept {
  switch (dimension) {
    case Dimension::entitativity: return "entitativity";
    case Dimension::essentialism: return "essentialism";
    case Dimension::stereotype_content: return "stereotype-content";
  }
  return "";
}

std::string_view to_string(Sign sign) noexcept {
  switch (sign) {
    case Sign::strengthen: return "strengthen";
    case Sign::weaken: return "weaken";
    case Sign::neutral: return "neutral";
  }
  return "";
}

std::string_view to_string(Provenance::Source source) noexcept {
  switch (source) {
    case Provenance::Source::human_annotation: return "human-annotation";
    case Provenance::Source::model: return "model";
    case Provenance::Source::adjudicated: return "adjudicated";
  }
  return "";
}

std::string_view to_string(ViolationKind kind) noexcept {
  switch (kind) {
    case ViolationKind::structural: return "structural";
    case ViolationKind::value: return "value";
    case ViolationKind::conditional: return "conditional";
    case ViolationKind::failed: return "failed";
  }
  return "";
}

std::string describe(const EffectDirection& effect) {
  std::string arrow;
  switch (effect.sign) {
    case Sign::strengthen: arrow = "↑ "; break;
    case Sign::weaken: arrow = "↓ "; break;
    case Sign::neutral: arrow = "– "; break;
  }
  std::string dim(to_string(effect.dimension));
  std::replace(dim.begin(), dim.end(), '-', ' ');
  return arrow + dim;
}

bool IndicatorDef::allows(std::string_view value) const {
  return std::find(values.begin(), values.end(), value) != values.end();
}

bool IndicatorDef::is_legacy(std::string_view value) const {
  return std::find(legacy_values.begin(), legacy_values.end(), value) != legacy_values.end();
}

std::vector<EffectDirection> IndicatorDef::effects_of(std::string_view value) const {
  std::vector<EffectDirection> out;
  for (const auto& e : effects) {
    if (e.value == value) out.push_back(e.effect);
  }
  return out;
}

const IndicatorDef& IndicatorSchema::at(Indicator indicator) const {
  for (const auto& def : indicators) {
    if (def.id == indicator) return def;
  }
  throw std::out_of_range("indicator missing from schema: " + std::string(key_name(indicator)));
}

const IndicatorDef* IndicatorSchema::find(std::string_view key) const {
  for (const auto& def : indicators) {
    if (def.key == key) return &def;
  }
  return nullptr;
}

std::vector<std::pair<std::string, std::string>> IndicatorSchema::key_aliases() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(indicators.size());
  for (const auto& def : indicators) out.emplace_back(def.display_name, def.key);
  return out;
}

IndicatorSchema default_schema() {
  using D = Dimension;
  IndicatorSchema s;
  s.sensitive_attributes = {"race", "gender"};

  auto add = [&s](Indicator id, std::string name, Level level, Side side,
                  std::vector<std::string> values, std::vector<ValueEffect> effects) {
    IndicatorDef def;
    def.id = id;
    def.key = std::string(key_name(id));
    def.display_name = std::move(name);
    def.level = level;
    def.side = side;
    def.open_text = values.empty();
    def.values = std::move(values);
    def.effects = std::move(effects);
    s.indicators.push_back(std::move(def));
  };

  const auto meaning = Level::language_meaning;
  const auto form = Level::linguistic_form;
  const auto label = Side::category_label;
  const auto content = Side::associated_content;

  add(Indicator::has_category_label, "Has category label", meaning, label, {"yes", "no"},
      {{"yes", up(D::entitativity)}, {"no", down(D::entitativity)}});
  add(Indicator::full_label, "Category label", meaning, label, {}, {});
  add(Indicator::target_type, "Information level (target)", meaning, label,
      {"specified target", "generic target"},
      {{"specified target", down(D::entitativity)}, {"generic target", up(D::entitativity)}});
  add(Indicator::connotation, "Connotation", meaning, label, {"negative", "neutral", "positive"},
      {{"negative", up(D::stereotype_content)},
       {"neutral", flat(D::stereotype_content)},
       {"positive", up(D::stereotype_content)}});
  add(Indicator::grammatical_form, "Grammatical form", form, label, {"noun", "other"},
      {{"noun", up(D::entitativity)},
       {"noun", up(D::essentialism)},
       {"other", down(D::entitativity)},
       {"other", down(D::essentialism)}});
  add(Indicator::linguistic_form, "Generalization (category label)", form, label,
      {"generic", "subset", "individual"},
      {{"generic", up(D::entitativity)},
       {"generic", down(D::essentialism)},
       {"subset", flat(D::entitativity)},
       {"individual", down(D::entitativity)},
       {"individual", down(D::essentialism)}});
  add(Indicator::information, "Assoc. content", meaning, content, {}, {});
  add(Indicator::situation, "Information level (situation)", meaning, content,
      {"situational behaviour", "enduring characteristics", "other"},
      {{"situational behaviour", up(D::essentialism)},
       {"enduring characteristics", down(D::essentialism)},
       {"other", flat(D::essentialism)}});
  add(Indicator::generalization, "Generalization (content)", form, content,
      {"abstract", "concrete"},
      {{"abstract", up(D::essentialism)}, {"concrete", down(D::essentialism)}});
  add(Indicator::explanation, "Explanation for behaviors, characteristics", form, content,
      {"yes", "no"}, {{"yes", down(D::essentialism)}, {"no", up(D::essentialism)}});
  add(Indicator::signal_word, "Signal words", form, content, {"typical", "exceptional", "none"},
      {{"typical", up(D::essentialism)},
       {"exceptional", down(D::essentialism)},
       {"none", flat(D::essentialism)}});

  s.indicators[index_of(Indicator::target_type)].legacy_values = {"none"};
  return s;
}

ordered_json schema_to_json(const IndicatorSchema& schema) {
  ordered_json doc;
  doc["sensitive_attributes"] = schema.sensitive_attributes;
  ordered_json list = ordered_json::array();
  for (const auto& def : schema.indicators) {
    ordered_json item;
    item["key"] = def.key;
    item["name"] = def.display_name;
    item["level"] = to_string(def.level);
    item["side"] = to_string(def.side);
    item["open_text"] = def.open_text;
    item["values"] = def.values;
    if (!def.legacy_values.empty()) item["legacy_values"] = def.legacy_values;
    ordered_json effects = ordered_json::array();
    for (const auto& e : def.effects) {
      effects.push_back({{"value", e.value},
                         {"dimension", to_string(e.effect.dimension)},
                         {"sign", to_string(e.effect.sign)}});
    }
    item["effects"] = std::move(effects);
    list.push_back(std::move(item));
  }
  doc["indicators"] = std::move(list);
  return doc;
}

IndicatorSchema schema_from_json(const json& doc) {
  static constexpr std::array kLevels{Level::language_meaning, Level::linguistic_form};
  static constexpr std::array kSides{Side::category_label, Side::associated_content};
  static constexpr std::array kDims{Dimension::entitativity, Dimension::essentialism,
                                    Dimension::stereotype_content};
  static constexpr std::array kSigns{Sign::strengthen, Sign::weaken, Sign::neutral};

  IndicatorSchema s;
  try {
    s.sensitive_attributes = doc.at("sensitive_attributes").get<std::vector<std::string>>();
    for (const auto& item : doc.at("indicators")) {
      IndicatorDef def;
      def.key = item.at("key").get<std::string>();
      auto id = indicator_from_key(def.key);
      if (!id) throw FormatError("unknown indicator key '" + def.key + "'");
      def.id = *id;
      def.display_name = item.at("name").get<std::string>();
      def.level = parse_enum(item.at("level").get<std::string>(), kLevels, "level");
      def.side = parse_enum(item.at("side").get<std::string>(), kSides, "side");
      def.open_text = item.at("open_text").get<bool>();
      def.values = item.at("values").get<std::vector<std::string>>();
      if (item.contains("legacy_values")) {
        def.legacy_values = item["legacy_values"].get<std::vector<std::string>>();
      }
      for (const auto& e : item.at("effects")) {
        ValueEffect ve;
        ve.value = e.at("value").get<std::string>();
        ve.effect.dimension =
            parse_enum(e.at("dimension").get<std::string>(), kDims, "dimension");
        ve.effect.sign = parse_enum(e.at("sign").get<std::string>(), kSigns, "sign");
        if (!def.allows(ve.value)) {
          throw FormatError("effect for '" + ve.value + "' outside the values of " + def.key);
        }
        def.effects.push_back(std::move(ve));
      }
      s.indicators.push_back(std::move(def));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("schema document: ") + e.what());
  }
  if (s.indicators.size() != kIndicatorCount) {
    throw FormatError("schema document must define " + std::to_string(kIndicatorCount) +
                      " indicators");
  }
  return s;
}

FieldStatus FieldStatus::of(std::string value) { return {Kind::value, std::move(value)}; }
FieldStatus FieldStatus::not_applicable() { return {Kind::not_applicable, {}}; }
FieldStatus FieldStatus::fail(std::string reason) { return {Kind::fail, std::move(reason)}; }
FieldStatus FieldStatus::absent() { return {Kind::absent, {}}; }

const std::string& FieldStatus::value() const {
  if (kind_ != Kind::value) throw std::logic_error("field status holds no value");
  return text_;
}

std::string FieldStatus::eval_class() const {
  switch (kind_) {
    case Kind::value: return text_;
    case Kind::not_applicable: return std::string(kNotApplicable);
    case Kind::fail:
    case Kind::absent: return std::string(kFail);
  }
  return std::string(kFail);
}

IndicatorRecord make_record(std::string sentence_id,
                            const std::array<std::string, kIndicatorCount>& values) {
  IndicatorRecord r;
  r.sentence_id = std::move(sentence_id);
  for (std::size_t i = 0; i < kIndicatorCount; ++i) {
    r.fields[i] = values[i] == kNotApplicable ? FieldStatus::not_applicable()
                                              : FieldStatus::of(values[i]);
  }
  return r;
}

IndicatorRecord make_unlabeled_record(std::string sentence_id) {
  IndicatorRecord r;
  r.sentence_id = std::move(sentence_id);
  for (auto& f : r.fields) f = FieldStatus::not_applicable();
  r[Indicator::has_category_label] = FieldStatus::of("no");
  return r;
}

ordered_json record_to_json(const IndicatorRecord& record) {
  ordered_json out = ordered_json::object();
  for (Indicator ind : kAllIndicators) {
    const auto& f = record[ind];
    if (f.is_absent()) continue;
    out[std::string(key_name(ind))] = f.eval_class();
  }
  return out;
}

IndicatorRecord record_from_json(const json& fields, std::string sentence_id) {
  if (!fields.is_object()) throw FormatError("record must be a JSON object");
  IndicatorRecord r;
  r.sentence_id = std::move(sentence_id);
  for (Indicator ind : kAllIndicators) {
    auto it = fields.find(std::string(key_name(ind)));
    if (it == fields.end()) continue;
    if (!it->is_string()) {
      throw FormatError("record field '" + std::string(key_name(ind)) + "' must be a string");
    }
    const auto& text = it->get_ref<const std::string&>();
    if (text == kNotApplicable) {
      r[ind] = FieldStatus::not_applicable();
    } else if (text == kFail) {
      r[ind] = FieldStatus::fail("fail");
    } else {
      r[ind] = FieldStatus::of(text);
    }
  }
  return r;
}

std::vector<std::string> ValidationResult::messages() const {
  std::vector<std::string> out;
  out.reserve(violations.size());
  for (const auto& v : violations) {
    out.push_back(std::string(to_string(v.kind)) + ": " + v.key + ": " + v.message);
  }
  return out;
}

ValidationResult validate_record(const IndicatorRecord& record, const IndicatorSchema& schema) {
  ValidationResult result;
  auto report = [&](const IndicatorDef& def, ViolationKind kind, std::string message) {
    result.violations.push_back({def.key, kind, std::move(message)});
  };

  for (const auto& def : schema.indicators) {
    const auto& f = record[def.id];
    switch (f.kind()) {
      case FieldStatus::Kind::absent:
        report(def, ViolationKind::structural, "missing key");
        continue;
      case FieldStatus::Kind::fail:
        report(def, ViolationKind::failed, "field failed: " + f.reason());
        continue;
      case FieldStatus::Kind::value:
        if (!def.open_text && !def.allows(f.value())) {
          std::string allowed;
          for (const auto& v : def.values) allowed += (allowed.empty() ? "" : ", ") + v;
          report(def, ViolationKind::value,
                 "value '" + f.value() + "' not in {" + allowed + "}");
        }
        break;
      case FieldStatus::Kind::not_applicable:
        break;
    }
  }

  const auto& head = record[Indicator::has_category_label];
  const auto& head_def = schema.at(Indicator::has_category_label);
  if (head.is_not_applicable()) {
    report(head_def, ViolationKind::conditional, "has_category_label cannot be not-applicable");
  }
  if (!head.is_value() || !head_def.allows(head.value())) return result;

  for (const auto& def : schema.indicators) {
    if (def.id == Indicator::has_category_label) continue;
    const auto& f = record[def.id];
    if (!f.is_value() && !f.is_not_applicable()) continue;
    if (record.lacks_label()) {
      if (f.is_value()) {
        report(def, ViolationKind::conditional,
               "must be not-applicable when has_category_label is no");
      }
      continue;
    }
    if (gated_by_situation(def.id) && record[Indicator::situation].has_value("other")) {
      if (f.is_value()) {
        report(def, ViolationKind::conditional, "must be not-applicable when situation is other");
      }
      continue;
    }
    if (!def.open_text && f.is_not_applicable() && applicable_closed(record, def.id) &&
        (!gated_by_situation(def.id) || record[Indicator::situation].is_value())) {
      report(def, ViolationKind::conditional, "applicable field must carry a value");
    }
  }
  return result;
}

GatingResult apply_gating(IndicatorRecord record) {
  GatingResult out;
  auto overwrite = [&](Indicator ind) {
    auto& f = record[ind];
    if (f.is_not_applicable()) return;
    if (f.is_value()) out.changes.push_back({ind, f});
    f = FieldStatus::not_applicable();
  };
  if (record.lacks_label()) {
    for (Indicator ind : kAllIndicators) {
      if (ind != Indicator::has_category_label) overwrite(ind);
    }
  } else if (record[Indicator::situation].has_value("other")) {
    overwrite(Indicator::generalization);
    overwrite(Indicator::explanation);
    overwrite(Indicator::signal_word);
  }
  out.record = std::move(record);
  return out;
}

std::vector<KeyEffect> effect_profile(const IndicatorRecord& record,
                                      const IndicatorSchema& schema) {
  auto validation = validate_record(record, schema);
  if (!validation.ok()) {
    throw ValidationError("effect_profile requires a valid record", validation.messages());
  }
  std::vector<KeyEffect> out;
  if (!record.has_label()) return out;
  for (const auto& def : schema.indicators) {
    if (def.open_text) continue;
    const auto& f = record[def.id];
    if (!f.is_value()) continue;
    for (const auto& effect : def.effects_of(f.value())) {
      out.push_back({def.key, f.value(), effect});
    }
  }
  return out;
}

}  // namespace stereoind
