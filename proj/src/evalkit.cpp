#include "stereoind/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include <spdlog/spdlog.h>

namespace stereoind::eval {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fmt_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::vector<std::string> classes_for(const IndicatorDef& def) {
  std::vector<std::string> out = def.values;
  out.insert(out.end(), def.legacy_values.begin(), def.legacy_values.end());
  out.emplace_back(kNotApplicable);
  out.emplace_back(kFail);
  return out;
}

std::vector<std::pair<const IndicatorRecord*, const IndicatorRecord*>> align(
    const std::vector<IndicatorRecord>& pred, const std::vector<IndicatorRecord>& gold) {
  std::unordered_map<std::string, const IndicatorRecord*> by_id;
  for (const auto& p : pred) {
    if (!by_id.emplace(p.sentence_id, &p).second) {
      throw AlignmentError("duplicate predicted sentence id '" + p.sentence_id + "'");
    }
  }
  std::set<std::string> seen;
  std::vector<std::pair<const IndicatorRecord*, const IndicatorRecord*>> out;
  for (const auto& g : gold) {
    if (!seen.insert(g.sentence_id).second) {
      throw AlignmentError("duplicate gold sentence id '" + g.sentence_id + "'");
    }
    auto it = by_id.find(g.sentence_id);
    if (it == by_id.end()) throw AlignmentError("no prediction for sentence id '" + g.sentence_id + "'");
    out.emplace_back(it->second, &g);
  }
  if (pred.size() != gold.size()) {
    for (const auto& p : pred) {
      if (!seen.count(p.sentence_id)) {
        throw AlignmentError("prediction for unknown sentence id '" + p.sentence_id + "'");
      }
    }
  }
  return out;
}

double side_mean(const std::vector<IndicatorEval>& evals, const std::vector<Indicator>& side) {
  double sum = 0.0;
  std::size_t n = 0;
  for (auto ind : side) {
    for (const auto& e : evals) {
      if (e.key == key_name(ind)) {
        sum += e.accuracy;
        ++n;
      }
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

std::string bracketed(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out + "]";
}

}  // namespace

IndicatorEval multiclass_eval(const std::vector<std::string>& pred,
                              const std::vector<std::string>& gold,
                              std::vector<std::string> classes, std::string key) {
  if (pred.size() != gold.size()) {
    throw AlignmentError("prediction and gold lengths differ (" + std::to_string(pred.size()) +
                         " vs " + std::to_string(gold.size()) + ")");
  }
  if (gold.empty()) throw DataError("cannot evaluate an empty series");

  std::set<std::string> extra;
  for (const auto* series : {&pred, &gold}) {
    for (const auto& l : *series) {
      if (std::find(classes.begin(), classes.end(), l) == classes.end()) extra.insert(l);
    }
  }
  classes.insert(classes.end(), extra.begin(), extra.end());

  IndicatorEval out;
  out.key = std::move(key);
  out.n = gold.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += pred[i] == gold[i];
  out.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());

  double f1_sum = 0.0;
  std::size_t defined = 0;
  for (const auto& c : classes) {
    ClassScore s;
    s.label = c;
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const bool p = pred[i] == c;
      const bool g = gold[i] == c;
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
    s.gold_support = tp + fn;
    s.pred_support = tp + fp;
    if (tp + fp + fn > 0) {
      s.f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
      f1_sum += *s.f1;
      ++defined;
    }
    out.classes.push_back(std::move(s));
  }
  if (defined) out.macro_f1 = f1_sum / static_cast<double>(defined);
  return out;
}

IndicatorEval multiclass_eval(const std::vector<IndicatorRecord>& pred,
                              const std::vector<IndicatorRecord>& gold, Indicator key,
                              const IndicatorSchema& schema) {
  const auto& def = schema.at(key);
  if (def.open_text) throw ConfigError(def.key + " is open text and has no classes");
  std::vector<std::string> p, g;
  for (const auto& [pr, go] : align(pred, gold)) {
    p.push_back((*pr)[key].eval_class());
    g.push_back((*go)[key].eval_class());
  }
  return multiclass_eval(p, g, classes_for(def), def.key);
}

Kappa cohens_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.size() != b.size()) {
    throw AlignmentError("kappa needs equal-length label sequences (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw DataError("kappa needs at least one item");
  const auto n = static_cast<double>(a.size());
  std::map<std::string, std::pair<std::size_t, std::size_t>> marginals;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i];
    ++marginals[a[i]].first;
    ++marginals[b[i]].second;
  }
  Kappa k;
  k.n = a.size();
  k.observed = static_cast<double>(agree) / n;
  for (const auto& [label, counts] : marginals) {
    k.expected += (static_cast<double>(counts.first) / n) * (static_cast<double>(counts.second) / n);
  }
  if (marginals.size() == 1) {
    // Both raters used one label for every item: p_e = 1.
    k.expected = 1.0;
    k.degenerate = true;
    k.kappa = 1.0;
    return k;
  }
  k.kappa = (k.observed - k.expected) / (1.0 - k.expected);
  return k;
}

double mae(const std::vector<double>& pred, const std::vector<double>& ref) {
  if (pred.size() != ref.size()) {
    throw AlignmentError("MAE needs equal-length series (" + std::to_string(pred.size()) + " vs " +
                         std::to_string(ref.size()) + ")");
  }
  if (pred.empty()) throw DataError("MAE needs at least one value");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - ref[i]);
  return sum / static_cast<double>(pred.size());
}

const std::vector<Indicator>& label_side_indicators() {
  static const std::vector<Indicator> side = {Indicator::has_category_label, Indicator::target_type,
                                              Indicator::connotation, Indicator::grammatical_form,
                                              Indicator::linguistic_form};
  return side;
}

const std::vector<Indicator>& content_side_indicators() {
  static const std::vector<Indicator> side = {Indicator::situation, Indicator::generalization,
                                              Indicator::explanation, Indicator::signal_word};
  return side;
}

EvalReport evaluate_extraction(const std::vector<IndicatorRecord>& pred,
                               const std::vector<IndicatorRecord>& gold,
                               const IndicatorSchema& schema) {
  EvalReport report;
  for (const auto& def : schema.indicators) {
    if (def.open_text) continue;
    report.indicators.push_back(multiclass_eval(pred, gold, def.id, schema));
  }
  report.label_side_accuracy = side_mean(report.indicators, label_side_indicators());
  report.content_side_accuracy = side_mean(report.indicators, content_side_indicators());
  return report;
}

AblationCurve ablation_fewshot(const std::vector<int>& ks,
                               const std::vector<corpus::SentenceItem>& items,
                               const std::vector<IndicatorRecord>& gold,
                               const extraction::ExtractionOptions& base,
                               const BackendForShots& backend, const IndicatorSchema& schema) {
  AblationCurve curve;
  for (int k : ks) {
    try {
      auto options = base;
      options.prompt.shots = k;
      options.run_id = base.run_id + "-k" + std::to_string(k);
      auto results = extraction::run_extraction(items, options, backend(k), schema);
      const bool all_backend_failures =
          !results.empty() && std::all_of(results.begin(), results.end(), [](const auto& r) {
            return std::any_of(r.completions.begin(), r.completions.end(),
                               [](const auto& c) { return !c.completion.ok(); });
          });
      if (all_backend_failures) {
        curve.omitted.push_back({k, "every completion failed at the backend"});
        continue;
      }
      std::vector<IndicatorRecord> pred;
      for (auto& r : results) pred.push_back(std::move(r.outcome.record));
      auto report = evaluate_extraction(pred, gold, schema);
      curve.points.push_back({k, report.label_side_accuracy, report.content_side_accuracy});
    } catch (const std::exception& e) {
      spdlog::warn("ablation point k={} omitted: {}", k, e.what());
      curve.omitted.push_back({k, e.what()});
    }
  }
  return curve;
}

std::vector<DistributionRow> distribution_report(const std::vector<GroupedRecord>& records,
                                                 const IndicatorSchema& schema) {
  std::map<std::string, std::vector<const IndicatorRecord*>> groups;
  for (const auto& r : records) groups[r.group].push_back(&r.record);

  std::vector<DistributionRow> out;
  for (const auto& [group, members] : groups) {
    for (const auto& def : schema.indicators) {
      if (def.open_text) continue;
      std::map<std::string, std::size_t> counts;
      for (const auto* rec : members) ++counts[(*rec)[def.id].eval_class()];
      auto order = classes_for(def);
      for (const auto& [label, _] : counts) {
        if (std::find(order.begin(), order.end(), label) == order.end()) order.push_back(label);
      }
      for (const auto& label : order) {
        auto it = counts.find(label);
        if (it == counts.end()) continue;
        out.push_back({group, def.key, label, it->second,
                       static_cast<double>(it->second) / static_cast<double>(members.size())});
      }
    }
  }
  return out;
}

ordered_json indicator_eval_to_json(const IndicatorEval& e) {
  ordered_json j;
  j["key"] = e.key;
  j["n"] = e.n;
  j["accuracy"] = e.accuracy;
  auto classes = ordered_json::array();
  for (const auto& c : e.classes) {
    classes.push_back({{"class", c.label},
                       {"f1", c.f1 ? ordered_json(*c.f1) : ordered_json("undefined")},
                       {"gold_support", c.gold_support},
                       {"pred_support", c.pred_support}});
  }
  j["classes"] = std::move(classes);
  j["macro_f1"] = e.macro_f1 ? ordered_json(*e.macro_f1) : ordered_json("undefined");
  return j;
}

ordered_json kappa_to_json(const Kappa& k) {
  return {{"kappa", k.kappa}, {"observed", k.observed}, {"expected", k.expected},
          {"degenerate", k.degenerate}, {"n", k.n}};
}

ordered_json curve_to_json(const AblationCurve& c) {
  ordered_json j;
  auto points = ordered_json::array();
  for (const auto& p : c.points) {
    points.push_back({{"shots", p.shots},
                      {"label_accuracy", p.label_accuracy},
                      {"content_accuracy", p.content_accuracy}});
  }
  auto omitted = ordered_json::array();
  for (const auto& o : c.omitted) omitted.push_back({{"shots", o.shots}, {"reason", o.reason}});
  j["points"] = std::move(points);
  j["omitted"] = std::move(omitted);
  return j;
}

ordered_json report_to_json(const EvalReport& report) {
  ordered_json j;
  j["f1_averaging"] = kF1Averaging;
  auto list = ordered_json::array();
  for (const auto& e : report.indicators) list.push_back(indicator_eval_to_json(e));
  j["indicators"] = std::move(list);
  j["mean_accuracy"] = {{"label_side", report.label_side_accuracy},
                        {"content_side", report.content_side_accuracy}};
  if (!report.kappa.empty()) {
    ordered_json kappa;
    for (const auto& [k, v] : report.kappa) kappa[k] = kappa_to_json(v);
    j["kappa"] = std::move(kappa);
  }
  if (!report.mae.empty()) {
    ordered_json m;
    for (const auto& [k, v] : report.mae) m[k] = v;
    j["mae"] = std::move(m);
  }
  if (!report.ablation.points.empty() || !report.ablation.omitted.empty()) {
    j["ablation"] = curve_to_json(report.ablation);
  }
  return j;
}

std::string report_to_csv(const EvalReport& report) {
  std::string out = "indicator,classes,accuracy,f1\n";
  for (const auto& e : report.indicators) {
    std::vector<std::string> labels, f1s;
    for (const auto& c : e.classes) {
      labels.push_back(c.label);
      f1s.push_back(c.f1 ? fmt_number(*c.f1) : "nan");
    }
    out += csv_field(e.key) + "," + csv_field(bracketed(labels)) + "," + fmt_number(e.accuracy) +
           "," + csv_field(bracketed(f1s)) + "\n";
  }
  return out;
}

std::string curve_to_csv(const AblationCurve& curve) {
  std::string out = "shots,label_accuracy,content_accuracy\n";
  for (const auto& p : curve.points) {
    out += std::to_string(p.shots) + "," + fmt_number(p.label_accuracy) + "," +
           fmt_number(p.content_accuracy) + "\n";
  }
  return out;
}

std::string distribution_to_csv(const std::vector<DistributionRow>& rows) {
  std::string out = "group,indicator,value,count,proportion\n";
  for (const auto& r : rows) {
    out += csv_field(r.group) + "," + csv_field(r.key) + "," + csv_field(r.value) + "," +
           std::to_string(r.count) + "," + fmt_number(r.proportion) + "\n";
  }
  return out;
}

}  // namespace stereoind::eval
