#include "stereoind/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "stereoind/linear_fit.hpp"

namespace stereoind::scoring {

namespace {

std::string cross(std::string_view a, std::string_view b) {
  return std::string(a) + std::string(kCross) + std::string(b);
}

// Class of a field as used for encoding: the value or "not-applicable".
std::optional<std::string> encodable(const FieldStatus& f) {
  if (f.is_value()) return f.value();
  if (f.is_not_applicable()) return std::string(kNotApplicable);
  return std::nullopt;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Unbiased enough for shuffling small datasets, and identical on every
// standard library (std::uniform_int_distribution is not).
void seeded_shuffle(std::vector<std::size_t>& idx, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

Eigen::MatrixXd design(const std::vector<TrainingSample>& samples,
                       const std::vector<std::size_t>& rows, std::size_t cols) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& v = samples[rows[r]].features.values;
    for (std::size_t c = 0; c < cols; ++c) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[c];
  }
  return x;
}

Eigen::VectorXd targets(const std::vector<TrainingSample>& samples,
                        const std::vector<std::size_t>& rows) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) y(static_cast<Eigen::Index>(r)) = samples[rows[r]].target;
  return y;
}

ScoringModel solve(const std::vector<TrainingSample>& samples, const std::vector<std::size_t>& rows,
                   const FeatureRecipe& recipe) {
  auto ls = linalg::fit_ols(design(samples, rows, recipe.level_count()), targets(samples, rows));
  ScoringModel m;
  m.recipe = recipe;
  m.intercept = ls.intercept;
  m.coefficients.assign(ls.coefficients.data(), ls.coefficients.data() + ls.coefficients.size());
  m.training.rank = static_cast<long>(ls.rank);
  m.training.rank_deficient = ls.rank_deficient;
  return m;
}

double split_mae(const ScoringModel& m, const std::vector<TrainingSample>& samples,
                 const std::vector<std::size_t>& rows) {
  double sum = 0.0;
  for (auto r : rows) sum += std::abs(clamp01(m.linear(samples[r].features)) - samples[r].target);
  return sum / static_cast<double>(rows.size());
}

int sign_weight(Sign s) {
  switch (s) {
    case Sign::strengthen: return 1;
    case Sign::weaken: return -1;
    case Sign::neutral: return 0;
  }
  return 0;
}

}  // namespace

std::vector<FeatureDef> FeatureRecipe::features() const {
  const auto s = default_schema();
  const std::string na(kNotApplicable);
  std::vector<FeatureDef> out;

  out.push_back({"connotation", {Indicator::connotation}, s.at(Indicator::connotation).values});

  FeatureDef label{"generalization_label", {Indicator::target_type, Indicator::linguistic_form}, {}};
  for (const auto& t : s.at(Indicator::target_type).values) {
    for (const auto& f : s.at(Indicator::linguistic_form).values) label.levels.push_back(cross(t, f));
  }
  out.push_back(std::move(label));

  out.push_back({"grammatical_form", {Indicator::grammatical_form},
                 s.at(Indicator::grammatical_form).values});

  FeatureDef content{"generalization_content", {Indicator::situation, Indicator::generalization}, {}};
  for (const auto& sit : s.at(Indicator::situation).values) {
    if (sit == "other") {
      content.levels.push_back(cross(sit, na));
      continue;
    }
    for (const auto& g : s.at(Indicator::generalization).values) content.levels.push_back(cross(sit, g));
  }
  out.push_back(std::move(content));

  auto explanation = s.at(Indicator::explanation).values;
  explanation.push_back(na);
  out.push_back({"explanation", {Indicator::explanation}, std::move(explanation)});

  if (include_signal_word) {
    auto signal = s.at(Indicator::signal_word).values;
    signal.push_back(na);
    out.push_back({"signal_word", {Indicator::signal_word}, std::move(signal)});
  }
  return out;
}

std::vector<std::string> FeatureRecipe::level_names() const {
  std::vector<std::string> out;
  for (const auto& f : features()) {
    for (const auto& l : f.levels) out.push_back(f.name + "." + l);
  }
  return out;
}

std::size_t FeatureRecipe::level_count() const {
  std::size_t n = 0;
  for (const auto& f : features()) n += f.levels.size();
  return n;
}

ordered_json recipe_to_json(const FeatureRecipe& recipe) {
  ordered_json j;
  j["include_signal_word"] = recipe.include_signal_word;
  auto list = ordered_json::array();
  for (const auto& f : recipe.features()) {
    std::vector<std::string> sources;
    for (auto ind : f.sources) sources.emplace_back(key_name(ind));
    list.push_back({{"name", f.name}, {"sources", sources}, {"levels", f.levels}});
  }
  j["features"] = std::move(list);
  return j;
}

FeatureRecipe recipe_from_json(const json& doc) {
  FeatureRecipe r;
  try {
    r.include_signal_word = doc.at("include_signal_word").get<bool>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("recipe: ") + e.what());
  }
  if (doc.contains("features")) {
    // Level lists are derived; a stored list that disagrees means the file
    // was written by an incompatible recipe.
    auto expected = recipe_to_json(r)["features"];
    if (json(expected) != doc["features"]) {
      throw FormatError("recipe feature levels do not match this version's encoding");
    }
  }
  return r;
}

FeatureVector encode(const IndicatorRecord& record, const FeatureRecipe& recipe) {
  if (!record.has_label()) {
    throw EncodingError("sentence " + record.sentence_id +
                        ": only records with has_category_label = yes are encoded");
  }
  FeatureVector out;
  out.sentence_id = record.sentence_id;
  out.values.assign(recipe.level_count(), 0.0);
  std::size_t offset = 0;
  for (const auto& f : recipe.features()) {
    std::string level;
    for (std::size_t k = 0; k < f.sources.size(); ++k) {
      auto v = encodable(record[f.sources[k]]);
      if (!v) {
        throw EncodingError("sentence " + record.sentence_id + ": " +
                            std::string(key_name(f.sources[k])) + " has no value (" +
                            record[f.sources[k]].eval_class() + ")");
      }
      level += (k ? std::string(kCross) : std::string()) + *v;
    }
    auto it = std::find(f.levels.begin(), f.levels.end(), level);
    if (it == f.levels.end()) {
      throw EncodingError("sentence " + record.sentence_id + ": " + f.name + " has no level '" +
                          level + "'");
    }
    out.values[offset + static_cast<std::size_t>(it - f.levels.begin())] = 1.0;
    offset += f.levels.size();
  }
  return out;
}

std::vector<std::string> active_levels(const FeatureVector& vector, const FeatureRecipe& recipe) {
  auto names = recipe.level_names();
  if (names.size() != vector.values.size()) throw EncodingError("vector length does not match recipe");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (vector.values[i] != 0.0) out.push_back(names[i]);
  }
  return out;
}

void FitOptions::validate() const {
  if (folds < 2) throw ConfigError("folds must be >= 2, got " + std::to_string(folds));
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test fraction must be in [0, 1)");
  }
}

ordered_json cv_report_to_json(const CvReport& r) {
  ordered_json j;
  j["folds"] = r.folds;
  j["test_fraction"] = r.test_fraction;
  j["seed"] = r.seed;
  j["fold_mae"] = r.fold_mae;
  j["cv_mae"] = r.cv_mae;
  j["train_mae"] = r.train_mae;
  j["test_mae"] = r.test_mae ? ordered_json(*r.test_mae) : ordered_json(nullptr);
  j["n_train"] = r.train_ids.size();
  j["n_test"] = r.test_ids.size();
  j["rank"] = r.rank;
  j["rank_deficient"] = r.rank_deficient;
  j["train_ids"] = r.train_ids;
  j["test_ids"] = r.test_ids;
  return j;
}

double ScoringModel::linear(const FeatureVector& vector) const {
  if (vector.values.size() != coefficients.size()) {
    throw EncodingError("feature vector has " + std::to_string(vector.values.size()) +
                        " entries, model has " + std::to_string(coefficients.size()));
  }
  double v = intercept;
  for (std::size_t i = 0; i < coefficients.size(); ++i) v += coefficients[i] * vector.values[i];
  return v;
}

ordered_json model_to_json(const ScoringModel& model) {
  ordered_json j;
  j["recipe"] = recipe_to_json(model.recipe);
  j["intercept"] = model.intercept;
  ordered_json coef = ordered_json::object();
  auto names = model.recipe.level_names();
  for (std::size_t i = 0; i < names.size(); ++i) coef[names[i]] = model.coefficients.at(i);
  j["coefficients"] = std::move(coef);
  j["training"] = cv_report_to_json(model.training);
  return j;
}

ScoringModel model_from_json(const json& doc) {
  ScoringModel m;
  try {
    m.recipe = recipe_from_json(doc.at("recipe"));
    m.intercept = doc.at("intercept").get<double>();
    const auto& coef = doc.at("coefficients");
    auto names = m.recipe.level_names();
    if (coef.size() != names.size()) {
      throw FormatError("model has " + std::to_string(coef.size()) + " coefficients, recipe has " +
                        std::to_string(names.size()) + " levels");
    }
    for (const auto& n : names) {
      if (!coef.contains(n)) throw FormatError("model lacks coefficient for level '" + n + "'");
      m.coefficients.push_back(coef[n].get<double>());
    }
    if (doc.contains("training")) {
      const auto& t = doc["training"];
      m.training.folds = t.value("folds", 0);
      m.training.test_fraction = t.value("test_fraction", 0.0);
      m.training.seed = t.value("seed", std::uint64_t{0});
      m.training.fold_mae = t.value("fold_mae", std::vector<double>{});
      m.training.cv_mae = t.value("cv_mae", 0.0);
      m.training.train_mae = t.value("train_mae", 0.0);
      if (t.contains("test_mae") && t["test_mae"].is_number()) m.training.test_mae = t["test_mae"].get<double>();
      m.training.train_ids = t.value("train_ids", std::vector<std::string>{});
      m.training.test_ids = t.value("test_ids", std::vector<std::string>{});
      m.training.rank = t.value("rank", 0L);
      m.training.rank_deficient = t.value("rank_deficient", false);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("model document: ") + e.what());
  }
  return m;
}

ScoringModel fit(const std::vector<TrainingSample>& samples, const FeatureRecipe& recipe,
                 const FitOptions& options) {
  options.validate();
  const std::size_t width = recipe.level_count();
  std::set<double> distinct;
  for (const auto& s : samples) {
    if (s.features.values.size() != width) throw FitError("sample width does not match recipe");
    if (!std::isfinite(s.target)) throw FitError("non-finite target for " + s.features.sentence_id);
    distinct.insert(s.target);
  }
  if (distinct.size() < 2) throw FitError("fitting needs at least two distinct target values");

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  seeded_shuffle(order, options.seed);

  const auto n_test = static_cast<std::size_t>(
      std::floor(static_cast<double>(samples.size()) * options.test_fraction));
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  const auto k = static_cast<std::size_t>(options.folds);
  if (train.size() < k) {
    throw FitError("training split has " + std::to_string(train.size()) + " rows, fewer than " +
                   std::to_string(k) + " folds");
  }

  CvReport report;
  report.folds = options.folds;
  report.test_fraction = options.test_fraction;
  report.seed = options.seed;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t lo = f * train.size() / k;
    const std::size_t hi = (f + 1) * train.size() / k;
    std::vector<std::size_t> inner, held;
    for (std::size_t i = 0; i < train.size(); ++i) (i >= lo && i < hi ? held : inner).push_back(train[i]);
    auto m = solve(samples, inner, recipe);
    report.fold_mae.push_back(split_mae(m, samples, held));
  }
  report.cv_mae = std::accumulate(report.fold_mae.begin(), report.fold_mae.end(), 0.0) /
                  static_cast<double>(k);

  auto model = solve(samples, train, recipe);
  report.rank = model.training.rank;
  report.rank_deficient = model.training.rank_deficient;
  report.train_mae = split_mae(model, samples, train);
  if (!test.empty()) report.test_mae = split_mae(model, samples, test);
  for (auto i : train) report.train_ids.push_back(samples[i].features.sentence_id);
  for (auto i : test) report.test_ids.push_back(samples[i].features.sentence_id);
  model.training = std::move(report);
  return model;
}

ScoredSentence score(const IndicatorRecord& record, const ScoringModel& model) {
  ScoredSentence out;
  out.sentence_id = record.sentence_id;
  out.record = record;
  if (record.lacks_label()) return out;
  out.linear = model.linear(encode(record, model.recipe));
  out.score = clamp01(out.linear);
  out.clamped = out.score != out.linear;
  return out;
}

ordered_json scored_to_json(const ScoredSentence& s) {
  ordered_json j;
  j["id"] = s.sentence_id;
  if (!s.text.empty()) j["text"] = s.text;
  j["record"] = record_to_json(s.record);
  j["score_scsc"] = s.score;
  j["linear"] = s.linear;
  j["clamped"] = s.clamped;
  if (s.reference) j["score_bws"] = *s.reference;
  return j;
}

std::vector<LevelImportance> feature_importance(const ScoringModel& model,
                                                const IndicatorSchema& schema) {
  std::vector<LevelImportance> out;
  std::size_t i = 0;
  for (const auto& f : model.recipe.features()) {
    for (const auto& level : f.levels) {
      // Split combined levels back into constituent values.
      std::vector<std::string> values;
      std::size_t pos = 0;
      for (std::size_t next; (next = level.find(kCross, pos)) != std::string::npos; pos = next + kCross.size()) {
        values.push_back(level.substr(pos, next - pos));
      }
      values.push_back(level.substr(pos));

      int net = 0;
      std::string effects;
      for (std::size_t k = 0; k < f.sources.size() && k < values.size(); ++k) {
        for (const auto& e : schema.at(f.sources[k]).effects_of(values[k])) {
          net += sign_weight(e.sign);
          if (!effects.empty()) effects += ", ";
          effects += describe(e);
        }
      }
      const double c = model.coefficients.at(i);
      std::string verdict;
      if (net == 0) {
        verdict = "no expectation";
      } else if (c == 0.0) {
        verdict = "zero";
      } else {
        verdict = (c > 0) == (net > 0) ? "match" : "mismatch";
      }
      out.push_back({f.name + "." + level, c, effects.empty() ? verdict : verdict + " (" + effects + ")"});
      ++i;
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const LevelImportance& a, const LevelImportance& b) {
    return a.coefficient > b.coefficient;
  });
  return out;
}

ordered_json importance_to_json(const std::vector<LevelImportance>& ranking) {
  auto list = ordered_json::array();
  for (const auto& r : ranking) {
    list.push_back({{"level", r.level}, {"coefficient", r.coefficient}, {"annotation", r.annotation}});
  }
  return list;
}

}  // namespace stereoind::scoring
