// Thin Python surface over the C++ core. Structured values cross the
// boundary as JSON text; the package __init__ decodes them.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stereoind/commands.hpp"
#include "stereoind/evalkit.hpp"
#include "stereoind/extraction.hpp"
#include "stereoind/linear_fit.hpp"
#include "stereoind/prompt.hpp"
#include "stereoind/run_config.hpp"
#include "stereoind/schema.hpp"
#include "stereoind/scoring.hpp"

namespace py = pybind11;
using namespace stereoind;

namespace {

prompt::PromptConfig prompt_config(int shots, std::vector<std::string> attributes, const std::string& mode) {
  prompt::PromptConfig c;
  c.shots = shots;
  c.attributes = std::move(attributes);
  c.mode = prompt::mode_from_string(mode);
  c.validate();
  return c;
}

IndicatorRecord parse_record_json(const std::string& text) {
  return record_from_json(json::parse(text));
}

ordered_json outcome_json(const extraction::ParseOutcome& o) {
  ordered_json j;
  j["record"] = record_to_json(o.record);
  j["repairs"] = o.repairs;
  auto failures = ordered_json::array();
  for (const auto& f : o.failures) failures.push_back({{"key", f.key}, {"reason", f.reason}});
  j["failures"] = std::move(failures);
  j["warnings"] = o.warnings;
  auto violations = ordered_json::array();
  for (const auto& v : o.violations) {
    violations.push_back({{"key", v.key}, {"kind", to_string(v.kind)}, {"message", v.message}});
  }
  j["violations"] = std::move(violations);
  return j;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Stereotype indicator extraction and scoring core";

  static py::exception<Error> base_exc(m, "StereoindError");
  py::register_exception<ConfigError>(m, "ConfigError", base_exc.ptr());
  py::register_exception<DataError>(m, "DataError", base_exc.ptr());
  py::register_exception<EncodingError>(m, "EncodingError", base_exc.ptr());
  py::register_exception<FitError>(m, "FitError", base_exc.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base_exc.ptr());

  m.def("schema_json", [] { return schema_to_json(default_schema()).dump(); });

  m.def(
      "prompt_messages",
      [](int shots, std::vector<std::string> attributes, const std::string& sentence) {
        auto bundle = prompt::build_prompt(prompt_config(shots, std::move(attributes), "single-stage"));
        if (!sentence.empty()) bundle = bundle.with_sentence(sentence);
        return bundle.to_json().dump();
      },
      py::arg("shots") = 9, py::arg("attributes") = std::vector<std::string>{"race", "gender"},
      py::arg("sentence") = "");

  m.def(
      "prompt_text",
      [](int shots, std::vector<std::string> attributes) {
        return prompt::build_prompt(prompt_config(shots, std::move(attributes), "single-stage")).to_text();
      },
      py::arg("shots") = 9, py::arg("attributes") = std::vector<std::string>{"race", "gender"});

  m.def("process_completion", [](const std::string& raw) {
    return outcome_json(extraction::process_completion(raw, default_schema())).dump();
  });

  m.def("validate_record", [](const std::string& record) {
    return validate_record(parse_record_json(record), default_schema()).messages();
  });

  m.def(
      "level_names",
      [](bool include_signal_word) { return scoring::FeatureRecipe{include_signal_word}.level_names(); },
      py::arg("include_signal_word") = false);

  m.def(
      "encode",
      [](const std::string& record, bool include_signal_word) {
        return scoring::encode(parse_record_json(record), scoring::FeatureRecipe{include_signal_word}).values;
      },
      py::arg("record"), py::arg("include_signal_word") = false);

  m.def("fit_ols", [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    auto r = linalg::fit_ols(x, y);
    return py::make_tuple(r.intercept, r.coefficients, static_cast<long>(r.rank));
  });

  m.def(
      "fit_model",
      [](const std::vector<std::string>& records, const std::vector<double>& targets, int folds,
         double test_fraction, std::uint64_t seed, bool include_signal_word) {
        if (records.size() != targets.size()) throw DataError("records and targets differ in length");
        scoring::FeatureRecipe recipe{include_signal_word};
        std::vector<scoring::TrainingSample> samples;
        for (std::size_t i = 0; i < records.size(); ++i) {
          auto rec = parse_record_json(records[i]);
          auto fv = scoring::encode(rec, recipe);
          fv.sentence_id = std::to_string(i);
          samples.push_back({std::move(fv), targets[i]});
        }
        scoring::FitOptions options{folds, test_fraction, seed};
        options.validate();
        return scoring::model_to_json(scoring::fit(samples, recipe, options)).dump();
      },
      py::arg("records"), py::arg("targets"), py::arg("folds") = 5, py::arg("test_fraction") = 0.2,
      py::arg("seed") = 42, py::arg("include_signal_word") = false);

  m.def("score", [](const std::string& record, const std::string& model) {
    auto s = scoring::score(parse_record_json(record), scoring::model_from_json(json::parse(model)));
    return py::make_tuple(s.score, s.linear, s.clamped);
  });

  m.def("cohens_kappa", [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
    auto k = eval::cohens_kappa(a, b);
    return py::make_tuple(k.kappa, k.observed, k.expected, k.degenerate);
  });

  m.def("mae", &eval::mae);

  m.def(
      "multiclass_eval",
      [](const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
        return eval::indicator_eval_to_json(eval::multiclass_eval(pred, gold)).dump();
      });

  m.def("config_hash", [](const std::string& config) {
    return config_hash(run_config_from_json(json::parse(config)));
  });

  m.def("run_extract", [](const std::string& config) {
    py::gil_scoped_release release;
    auto s = commands::cmd_extract(run_config_from_json(json::parse(config)));
    return std::make_tuple(s.sentences, s.clean, s.backend_failures, s.run_id);
  });
}
