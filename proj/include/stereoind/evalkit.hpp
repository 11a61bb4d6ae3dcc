#pragma once

// Accuracy and per-class F1 per indicator, Cohen's kappa, MAE, few-shot
// ablation curves and per-group value distributions.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stereoind/extraction.hpp"
#include "stereoind/schema.hpp"

namespace stereoind::eval {

inline constexpr std::string_view kF1Averaging = "macro over defined classes";

struct ClassScore {
  std::string label;
  std::optional<double> f1;  // undefined when the class occurs in neither series
  std::size_t gold_support = 0;
  std::size_t pred_support = 0;
};

struct IndicatorEval {
  std::string key;
  std::size_t n = 0;
  double accuracy = 0.0;
  std::vector<ClassScore> classes;
  std::optional<double> macro_f1;
};

// Label-level evaluation. `classes` fixes the reported order; labels seen in
// the data but missing from it are appended in sorted order.
IndicatorEval multiclass_eval(const std::vector<std::string>& pred,
                              const std::vector<std::string>& gold,
                              std::vector<std::string> classes = {}, std::string key = {});

// Record-level evaluation of one key. Records are aligned by sentence_id;
// a missing, extra or duplicated id throws AlignmentError. Classes are the
// schema values, legacy values, not-applicable and fail.
IndicatorEval multiclass_eval(const std::vector<IndicatorRecord>& pred,
                              const std::vector<IndicatorRecord>& gold, Indicator key,
                              const IndicatorSchema& schema);

struct Kappa {
  double kappa = 0.0;
  double observed = 0.0;  // p_o
  double expected = 0.0;  // p_e
  bool degenerate = false;  // p_e = 1: both raters used one shared label throughout
  std::size_t n = 0;
};

// Throws DataError on empty input, AlignmentError on a length mismatch.
Kappa cohens_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b);

double mae(const std::vector<double>& pred, const std::vector<double>& ref);

// The closed indicators averaged on each side.
const std::vector<Indicator>& label_side_indicators();
const std::vector<Indicator>& content_side_indicators();

struct AblationPoint {
  int shots = 0;
  double label_accuracy = 0.0;
  double content_accuracy = 0.0;
};

struct OmittedPoint {
  int shots = 0;
  std::string reason;
};

struct AblationCurve {
  std::vector<AblationPoint> points;
  std::vector<OmittedPoint> omitted;
};

struct EvalReport {
  std::vector<IndicatorEval> indicators;
  double label_side_accuracy = 0.0;
  double content_side_accuracy = 0.0;
  std::map<std::string, Kappa> kappa;
  std::map<std::string, double> mae;
  AblationCurve ablation;
};

// All closed indicators plus the two side means.
EvalReport evaluate_extraction(const std::vector<IndicatorRecord>& pred,
                               const std::vector<IndicatorRecord>& gold,
                               const IndicatorSchema& schema);

// Supplies the backend for a given shot count (replay fixtures may differ per k).
using BackendForShots = std::function<judge::Backend&(int shots)>;

// One extraction run per k. A run that throws, or whose completions all
// failed at the backend, is listed as omitted instead of plotted.
AblationCurve ablation_fewshot(const std::vector<int>& ks,
                               const std::vector<corpus::SentenceItem>& items,
                               const std::vector<IndicatorRecord>& gold,
                               const extraction::ExtractionOptions& base,
                               const BackendForShots& backend, const IndicatorSchema& schema);

struct DistributionRow {
  std::string group;
  std::string key;
  std::string value;
  std::size_t count = 0;
  double proportion = 0.0;
};

struct GroupedRecord {
  std::string group;
  IndicatorRecord record;
};

// Counts per (group, closed indicator, class), ordered by group, schema
// order of indicators and values; proportions are within the group.
std::vector<DistributionRow> distribution_report(const std::vector<GroupedRecord>& records,
                                                 const IndicatorSchema& schema);

ordered_json indicator_eval_to_json(const IndicatorEval& e);
ordered_json kappa_to_json(const Kappa& k);
ordered_json curve_to_json(const AblationCurve& c);
ordered_json report_to_json(const EvalReport& report);

// indicator,classes,accuracy,f1 with bracketed lists and "nan" for
// undefined F1.
std::string report_to_csv(const EvalReport& report);
// shots,label_accuracy,content_accuracy
std::string curve_to_csv(const AblationCurve& curve);
// group,indicator,value,count,proportion
std::string distribution_to_csv(const std::vector<DistributionRow>& rows);

}  // namespace stereoind::eval
