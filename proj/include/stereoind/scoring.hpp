#pragma once

// One-hot encoding of indicator records, least-squares fitting of the
// linear scoring function with cross-validation, and gated scoring.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stereoind/errors.hpp"
#include "stereoind/schema.hpp"

namespace stereoind::scoring {

// Separator between the values of a combined feature level.
inline constexpr std::string_view kCross = "\xC3\x97";  // U+00D7

struct FeatureDef {
  std::string name;
  std::vector<Indicator> sources;   // one, or two for combined features
  std::vector<std::string> levels;  // value, or "a×b" for combined features

  bool operator==(const FeatureDef&) const = default;
};

struct FeatureRecipe {
  bool include_signal_word = false;

  // connotation, generalization_label (target_type × linguistic_form),
  // grammatical_form, generalization_content (situation × generalization),
  // explanation, and optionally signal_word.
  std::vector<FeatureDef> features() const;
  // "feature.level" in encoding order.
  std::vector<std::string> level_names() const;
  std::size_t level_count() const;

  bool operator==(const FeatureRecipe&) const = default;
};

ordered_json recipe_to_json(const FeatureRecipe& recipe);
FeatureRecipe recipe_from_json(const json& doc);

struct FeatureVector {
  std::string sentence_id;
  std::vector<double> values;

  bool operator==(const FeatureVector&) const = default;
};

// Throws EncodingError naming the key (or value pair) that has no level.
// Records without a category label are never encoded.
FeatureVector encode(const IndicatorRecord& record, const FeatureRecipe& recipe);

// Level names whose entry is 1.
std::vector<std::string> active_levels(const FeatureVector& vector, const FeatureRecipe& recipe);

struct FitOptions {
  int folds = 5;
  double test_fraction = 0.2;
  std::uint64_t seed = 42;

  void validate() const;
};

struct CvReport {
  int folds = 0;
  double test_fraction = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> fold_mae;
  double cv_mae = 0.0;
  double train_mae = 0.0;
  std::optional<double> test_mae;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  long rank = 0;
  bool rank_deficient = false;
};

ordered_json cv_report_to_json(const CvReport& report);

struct ScoringModel {
  FeatureRecipe recipe;
  double intercept = 0.0;
  std::vector<double> coefficients;  // aligned with recipe.level_names()
  CvReport training;

  // Unclamped β0 + β·x.
  double linear(const FeatureVector& vector) const;
};

ordered_json model_to_json(const ScoringModel& model);
ScoringModel model_from_json(const json& doc);

struct TrainingSample {
  FeatureVector features;
  double target = 0.0;
};

// Seeded shuffle, hold out test_fraction, k-fold CV on the remainder, final
// fit on the whole training part. Fold and split MAEs use clamped
// predictions. Throws FitError with fewer than two distinct targets or too
// few rows for the folds.
ScoringModel fit(const std::vector<TrainingSample>& samples, const FeatureRecipe& recipe,
                 const FitOptions& options);

struct ScoredSentence {
  std::string sentence_id;
  std::string text;
  IndicatorRecord record;
  double score = 0.0;
  double linear = 0.0;
  bool clamped = false;
  std::optional<double> reference;
};

// 0 without a category label; otherwise the linear prediction clamped to [0, 1].
ScoredSentence score(const IndicatorRecord& record, const ScoringModel& model);

ordered_json scored_to_json(const ScoredSentence& scored);

struct LevelImportance {
  std::string level;
  double coefficient = 0.0;
  // "match", "mismatch", "zero" or "no expectation", followed by the
  // schema effects of the constituent values in parentheses.
  std::string annotation;
};

// Sorted by coefficient, largest first; ties keep recipe order.
std::vector<LevelImportance> feature_importance(const ScoringModel& model,
                                                const IndicatorSchema& schema);

ordered_json importance_to_json(const std::vector<LevelImportance>& ranking);

}  // namespace stereoind::scoring
