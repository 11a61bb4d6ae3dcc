#pragma once

// Ground-truth annotation workflow: projects with two or more annotators,
// blinded per-annotator submissions, agreement, adjudication and gold
// export. Persisted as one JSON snapshot per project plus an append-only
// log of submissions and adjudications made since the snapshot.

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "stereoind/errors.hpp"
#include "stereoind/evalkit.hpp"
#include "stereoind/schema.hpp"

namespace stereoind::annotation {

// An annotator asked for records before submitting their own.
class AccessError : public Error {
 public:
  using Error::Error;
};

enum class Status { unannotated, partial, agreed, disagreed, adjudicated };

std::string_view to_string(Status status) noexcept;

struct ProjectSentence {
  std::string id;
  std::string text;
  std::string bias_type;
};

struct Adjudication {
  IndicatorRecord record;
  std::string adjudicator;
};

struct Project {
  std::string id;
  std::vector<ProjectSentence> sentences;
  std::vector<std::string> annotators;
  // sentence id -> annotator -> record
  std::map<std::string, std::map<std::string, IndicatorRecord>> submissions;
  std::map<std::string, Adjudication> adjudications;

  const ProjectSentence* find_sentence(std::string_view id) const;
  bool has_annotator(std::string_view annotator) const;
  Status status(const std::string& sentence_id) const;
  // Every annotator has submitted.
  bool complete(const std::string& sentence_id) const;
};

ordered_json project_to_json(const Project& project);
Project project_from_json(const json& doc);

struct Disagreement {
  std::string sentence_id;
  std::string key;
  std::vector<std::pair<std::string, std::string>> values;  // (annotator, class) in annotator order
};

struct PairAgreement {
  std::string annotator_a;
  std::string annotator_b;
  std::map<std::string, eval::Kappa> per_indicator;
  eval::Kappa pooled;
};

struct AgreementSummary {
  std::size_t sentences = 0;  // fully annotated sentences used
  // Closed indicators; averaged over annotator pairs when there are more than two.
  std::map<std::string, double> per_indicator;
  double mean_per_indicator = 0.0;
  // All eleven keys pooled into one sequence of key-prefixed labels.
  double pooled = 0.0;
  std::vector<PairAgreement> pairs;
  std::vector<Disagreement> disagreements;
};

ordered_json agreement_to_json(const AgreementSummary& summary, const IndicatorSchema& schema);
ordered_json disagreement_to_json(const Disagreement& d);

// Raw annotator agreement over fully annotated sentences. Adjudications
// never enter it. Throws StateError when no sentence is fully annotated.
AgreementSummary agreement(const Project& project, const IndicatorSchema& schema);

// Disagreements of sentences whose status is disagreed (adjudicated ones
// are settled).
std::vector<Disagreement> open_disagreements(const Project& project);

struct CreateRequest {
  std::string id;
  std::vector<ProjectSentence> sentences;
  std::vector<std::string> annotators;
};

CreateRequest create_request_from_json(const json& doc);

class ProjectStore {
 public:
  // Without a directory the store lives in memory only.
  explicit ProjectStore(std::optional<std::filesystem::path> directory = std::nullopt,
                        IndicatorSchema schema = default_schema());

  const IndicatorSchema& schema() const noexcept { return schema_; }

  // Returns the project id (generated when the request has none).
  std::string create_project(CreateRequest request);
  std::vector<std::string> project_ids() const;
  Project snapshot(const std::string& project_id) const;

  Status submit(const std::string& project_id, const std::string& annotator,
                const std::string& sentence_id, IndicatorRecord record);
  Status adjudicate(const std::string& project_id, const std::string& sentence_id,
                    IndicatorRecord record, const std::string& adjudicator);

  // First sentence the annotator still has to label, in project order.
  std::optional<ProjectSentence> next_for(const std::string& project_id,
                                          const std::string& annotator) const;
  // All annotators' records for one sentence; AccessError until the
  // requesting annotator has submitted their own.
  std::map<std::string, IndicatorRecord> annotations_for(const std::string& project_id,
                                                         const std::string& sentence_id,
                                                         const std::string& requester) const;

  AgreementSummary agreement(const std::string& project_id) const;
  std::vector<Disagreement> disagreements(const std::string& project_id) const;

  // JSON Lines, one gold record per sentence in project order. Throws
  // StateError naming pending sentence ids unless every sentence is agreed
  // or adjudicated.
  std::string export_gold(const std::string& project_id) const;

  // Writes every project snapshot and removes the logs it supersedes.
  void flush();

 private:
  Project& require(const std::string& project_id);
  const Project& require(const std::string& project_id) const;
  void append_log(const std::string& project_id, const ordered_json& entry);
  void write_snapshot(const Project& project);
  void load();
  static void apply_entry(Project& project, const json& entry);

  std::optional<std::filesystem::path> directory_;
  IndicatorSchema schema_;
  std::map<std::string, Project> projects_;
  std::map<std::string, std::size_t> log_lengths_;
  mutable std::shared_mutex mutex_;
};

}  // namespace stereoind::annotation
