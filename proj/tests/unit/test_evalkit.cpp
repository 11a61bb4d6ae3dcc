#include <random>

#include <gtest/gtest.h>

#include "oracles/oracles.hpp"
#include "stereoind/evalkit.hpp"

using namespace stereoind;
using namespace stereoind::eval;

TEST(Metrics, HandComputedKappa) {
  // 2x2 table [[20, 5], [10, 15]]: p_o = 0.7, p_e = 0.5 * 0.6 + 0.5 * 0.4 = 0.5.
  std::vector<std::string> a, b;
  auto push = [&](int n, const char* x, const char* y) {
    for (int i = 0; i < n; ++i) {
      a.push_back(x);
      b.push_back(y);
    }
  };
  push(20, "yes", "yes");
  push(5, "yes", "no");
  push(10, "no", "yes");
  push(15, "no", "no");
  auto k = cohens_kappa(a, b);
  EXPECT_NEAR(k.observed, 0.7, 1e-12);
  EXPECT_NEAR(k.expected, 0.5, 1e-12);
  EXPECT_NEAR(k.kappa, 0.4, 1e-12);
}

TEST(Metrics, KappaHalf) {
  // p_o = 0.75, p_e = 0.5.
  std::vector<std::string> a{"x", "x", "y", "y"};
  std::vector<std::string> b{"x", "y", "y", "y"};
  EXPECT_NEAR(cohens_kappa(a, b).kappa, 0.5, 1e-12);
}

TEST(Metrics, KappaDegenerateAndErrors) {
  auto k = cohens_kappa({"a", "a"}, {"a", "a"});
  EXPECT_TRUE(k.degenerate);
  EXPECT_EQ(k.kappa, 1.0);
  EXPECT_THROW(cohens_kappa({"a"}, {"a", "b"}), AlignmentError);
  EXPECT_THROW(cohens_kappa({}, {}), DataError);
}

TEST(Metrics, MaeExample) {
  EXPECT_NEAR(mae({0.5, 0.7}, {0.4, 0.9}), 0.15, 1e-12);
}

TEST(Metrics, F1UndefinedClassesAreNan) {
  auto e = multiclass_eval({"a", "a", "b"}, {"a", "b", "b"}, {"a", "b", "c"});
  ASSERT_EQ(e.classes.size(), 3u);
  EXPECT_FALSE(e.classes[2].f1.has_value());
  EXPECT_NEAR(*e.classes[0].f1, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(*e.macro_f1, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(e.accuracy, 2.0 / 3.0, 1e-12);
}

TEST(Metrics, MatchOraclesOnRandomInstances) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> labels{"p", "q", "r", "s"};
  for (int t = 0; t < 200; ++t) {
    std::size_t n = 1 + rng() % 50;
    std::size_t used = 1 + rng() % labels.size();
    std::vector<std::string> a, b;
    for (std::size_t i = 0; i < n; ++i) {
      a.push_back(labels[rng() % used]);
      b.push_back(labels[rng() % used]);
    }
    auto e = multiclass_eval(a, b, labels);
    EXPECT_NEAR(e.accuracy, oracle::accuracy(a, b), 1e-12);
    for (const auto& c : e.classes) {
      auto o = oracle::f1(a, b, c.label);
      ASSERT_EQ(o.has_value(), c.f1.has_value());
      if (o) EXPECT_NEAR(*c.f1, *o, 1e-12);
    }
    auto k = cohens_kappa(a, b);
    auto ok = oracle::kappa(a, b);
    EXPECT_NEAR(k.kappa, ok.kappa, 1e-12);
  }
}

TEST(RecordEval, AlignmentByIdAndErrors) {
  auto g1 = make_unlabeled_record("1");
  auto g2 = make_record("2", {"yes", "Women", "generic target", "neutral", "noun", "generic", "x",
                              "enduring characteristics", "abstract", "no", "none"});
  auto schema = default_schema();
  auto e = multiclass_eval({g2, g1}, {g1, g2}, Indicator::has_category_label, schema);
  EXPECT_DOUBLE_EQ(e.accuracy, 1.0);
  EXPECT_THROW(multiclass_eval({g1}, {g1, g2}, Indicator::connotation, schema), AlignmentError);
  EXPECT_THROW(multiclass_eval({g1, g1}, {g1, g2}, Indicator::connotation, schema), AlignmentError);

  auto report = evaluate_extraction({g1, g2}, {g1, g2}, schema);
  EXPECT_DOUBLE_EQ(report.label_side_accuracy, 1.0);
  EXPECT_DOUBLE_EQ(report.content_side_accuracy, 1.0);
  EXPECT_EQ(report.indicators.size(), 9u);
  auto csv = report_to_csv(report);
  EXPECT_EQ(csv.rfind("indicator,classes,accuracy,f1", 0), 0u);
  EXPECT_NE(csv.find("nan"), std::string::npos);
}

TEST(Distribution, ProportionsWithinGroup) {
  auto a = make_unlabeled_record("1");
  auto b = make_record("2", {"yes", "Women", "generic target", "neutral", "noun", "generic", "x",
                             "enduring characteristics", "abstract", "no", "none"});
  auto rows = distribution_report({{"gender", a}, {"gender", b}, {"race-color", b}}, default_schema());
  double sum = 0;
  for (const auto& r : rows) {
    if (r.group == "gender" && r.key == "has_category_label") sum += r.proportion;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_EQ(distribution_to_csv(rows).rfind("group,indicator,value,count,proportion", 0), 0u);
}

TEST(Ablation, OmitsFailedRuns) {
  judge::ReplayBackend empty;
  judge::ReplayBackend full;
  full.add("It always rains in London.", "{\"has_category_label\": \"no\"}");
  std::vector<corpus::SentenceItem> items{{"1", "It always rains in London.", ""}};
  std::vector<IndicatorRecord> gold{make_unlabeled_record("1")};
  extraction::ExtractionOptions base;
  auto curve = ablation_fewshot({0, 1}, items, gold, base,
                                [&](int k) -> judge::Backend& { return k == 0 ? empty : full; },
                                default_schema());
  ASSERT_EQ(curve.points.size(), 1u);
  EXPECT_EQ(curve.points[0].shots, 1);
  EXPECT_DOUBLE_EQ(curve.points[0].label_accuracy, 1.0);
  ASSERT_EQ(curve.omitted.size(), 1u);
  EXPECT_EQ(curve.omitted[0].shots, 0);
}
