#include "stereoind/annotation.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>

#include <spdlog/spdlog.h>

#include "stereoind/jsonl.hpp"

namespace stereoind::annotation {

namespace {

namespace fs = std::filesystem;

constexpr std::size_t kCompactAfter = 64;

bool valid_project_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
}

fs::path snapshot_path(const fs::path& dir, const std::string& id) {
  return dir / (id + ".project.json");
}

fs::path log_path(const fs::path& dir, const std::string& id) { return dir / (id + ".log.jsonl"); }

void check_record(const IndicatorRecord& record, const IndicatorSchema& schema) {
  auto result = validate_record(record, schema);
  if (!result.ok()) throw ValidationError("record rejected", result.messages());
}

std::vector<std::string> labels(const Project& p, const std::vector<std::string>& sentences,
                                const std::string& annotator, std::optional<Indicator> key) {
  std::vector<std::string> out;
  for (const auto& sid : sentences) {
    const auto& rec = p.submissions.at(sid).at(annotator);
    if (key) {
      out.push_back(rec[*key].eval_class());
    } else {
      for (Indicator ind : kAllIndicators) {
        out.push_back(std::string(key_name(ind)) + "=" + rec[ind].eval_class());
      }
    }
  }
  return out;
}

std::vector<Disagreement> diff_sentence(const Project& p, const std::string& sid) {
  std::vector<Disagreement> out;
  const auto& subs = p.submissions.at(sid);
  for (Indicator ind : kAllIndicators) {
    Disagreement d{sid, std::string(key_name(ind)), {}};
    std::set<std::string> distinct;
    for (const auto& a : p.annotators) {
      auto v = subs.at(a)[ind].eval_class();
      distinct.insert(v);
      d.values.emplace_back(a, std::move(v));
    }
    if (distinct.size() > 1) out.push_back(std::move(d));
  }
  return out;
}

}  // namespace

std::string_view to_string(Status status) noexcept {
  switch (status) {
    case Status::unannotated: return "unannotated";
    case Status::partial: return "partial";
    case Status::agreed: return "agreed";
    case Status::disagreed: return "disagreed";
    case Status::adjudicated: return "adjudicated";
  }
  return "";
}

const ProjectSentence* Project::find_sentence(std::string_view id) const {
  for (const auto& s : sentences) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

bool Project::has_annotator(std::string_view annotator) const {
  return std::find(annotators.begin(), annotators.end(), annotator) != annotators.end();
}

bool Project::complete(const std::string& sentence_id) const {
  auto it = submissions.find(sentence_id);
  return it != submissions.end() && it->second.size() == annotators.size();
}

Status Project::status(const std::string& sentence_id) const {
  if (adjudications.count(sentence_id)) return Status::adjudicated;
  auto it = submissions.find(sentence_id);
  if (it == submissions.end() || it->second.empty()) return Status::unannotated;
  if (it->second.size() < annotators.size()) return Status::partial;
  const auto& first = it->second.begin()->second;
  bool same = std::all_of(it->second.begin(), it->second.end(),
                          [&](const auto& kv) { return kv.second.same_fields(first); });
  return same ? Status::agreed : Status::disagreed;
}

ordered_json project_to_json(const Project& p) {
  ordered_json j;
  j["id"] = p.id;
  j["annotators"] = p.annotators;
  auto sentences = ordered_json::array();
  for (const auto& s : p.sentences) {
    sentences.push_back({{"id", s.id}, {"text", s.text}, {"bias_type", s.bias_type}});
  }
  j["sentences"] = std::move(sentences);
  ordered_json subs = ordered_json::object();
  for (const auto& [sid, by_annotator] : p.submissions) {
    ordered_json entry = ordered_json::object();
    for (const auto& [a, rec] : by_annotator) entry[a] = record_to_json(rec);
    subs[sid] = std::move(entry);
  }
  j["submissions"] = std::move(subs);
  ordered_json adj = ordered_json::object();
  for (const auto& [sid, a] : p.adjudications) {
    adj[sid] = {{"adjudicator", a.adjudicator}, {"record", record_to_json(a.record)}};
  }
  j["adjudications"] = std::move(adj);
  return j;
}

Project project_from_json(const json& doc) {
  Project p;
  try {
    p.id = doc.at("id").get<std::string>();
    p.annotators = doc.at("annotators").get<std::vector<std::string>>();
    for (const auto& s : doc.at("sentences")) {
      p.sentences.push_back({s.at("id").get<std::string>(), s.at("text").get<std::string>(),
                             s.value("bias_type", std::string())});
    }
    const json submissions = doc.value("submissions", json::object());
    for (const auto& [sid, by_annotator] : submissions.items()) {
      for (const auto& [a, rec] : by_annotator.items()) {
        auto r = record_from_json(rec, sid);
        r.provenance.source = Provenance::Source::human_annotation;
        p.submissions[sid][a] = std::move(r);
      }
    }
    const json adjudications = doc.value("adjudications", json::object());
    for (const auto& [sid, adj] : adjudications.items()) {
      auto r = record_from_json(adj.at("record"), sid);
      r.provenance.source = Provenance::Source::adjudicated;
      p.adjudications[sid] = {std::move(r), adj.value("adjudicator", std::string())};
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("project document: ") + e.what());
  }
  return p;
}

ordered_json disagreement_to_json(const Disagreement& d) {
  ordered_json values = ordered_json::object();
  for (const auto& [a, v] : d.values) values[a] = v;
  return {{"sentence_id", d.sentence_id}, {"key", d.key}, {"values", std::move(values)}};
}

ordered_json agreement_to_json(const AgreementSummary& s, const IndicatorSchema& schema) {
  ordered_json j;
  j["sentences"] = s.sentences;
  ordered_json per = ordered_json::object();
  for (const auto& def : schema.indicators) {
    auto it = s.per_indicator.find(def.key);
    if (it != s.per_indicator.end()) per[def.key] = it->second;
  }
  j["per_indicator"] = std::move(per);
  j["mean_per_indicator"] = s.mean_per_indicator;
  j["pooled"] = s.pooled;
  auto pairs = ordered_json::array();
  for (const auto& p : s.pairs) {
    ordered_json kappas = ordered_json::object();
    for (const auto& def : schema.indicators) {
      auto it = p.per_indicator.find(def.key);
      if (it != p.per_indicator.end()) kappas[def.key] = eval::kappa_to_json(it->second);
    }
    pairs.push_back({{"annotators", {p.annotator_a, p.annotator_b}},
                     {"per_indicator", std::move(kappas)},
                     {"pooled", eval::kappa_to_json(p.pooled)}});
  }
  j["pairs"] = std::move(pairs);
  auto dis = ordered_json::array();
  for (const auto& d : s.disagreements) dis.push_back(disagreement_to_json(d));
  j["disagreements"] = std::move(dis);
  return j;
}

AgreementSummary agreement(const Project& project, const IndicatorSchema& schema) {
  std::vector<std::string> done;
  for (const auto& s : project.sentences) {
    if (project.complete(s.id)) done.push_back(s.id);
  }
  if (done.empty()) throw StateError("project " + project.id + " has no fully annotated sentence");

  AgreementSummary out;
  out.sentences = done.size();
  const auto& ann = project.annotators;
  for (std::size_t i = 0; i < ann.size(); ++i) {
    for (std::size_t k = i + 1; k < ann.size(); ++k) {
      PairAgreement pair{ann[i], ann[k], {}, {}};
      for (const auto& def : schema.indicators) {
        if (def.open_text) continue;
        pair.per_indicator[def.key] = eval::cohens_kappa(labels(project, done, ann[i], def.id),
                                                         labels(project, done, ann[k], def.id));
      }
      pair.pooled = eval::cohens_kappa(labels(project, done, ann[i], std::nullopt),
                                       labels(project, done, ann[k], std::nullopt));
      out.pairs.push_back(std::move(pair));
    }
  }
  const auto n_pairs = static_cast<double>(out.pairs.size());
  for (const auto& pair : out.pairs) {
    for (const auto& [key, kappa] : pair.per_indicator) out.per_indicator[key] += kappa.kappa / n_pairs;
    out.pooled += pair.pooled.kappa / n_pairs;
  }
  for (const auto& [key, value] : out.per_indicator) {
    out.mean_per_indicator += value / static_cast<double>(out.per_indicator.size());
  }
  for (const auto& sid : done) {
    auto d = diff_sentence(project, sid);
    out.disagreements.insert(out.disagreements.end(), d.begin(), d.end());
  }
  return out;
}

std::vector<Disagreement> open_disagreements(const Project& project) {
  std::vector<Disagreement> out;
  for (const auto& s : project.sentences) {
    if (project.status(s.id) != Status::disagreed) continue;
    auto d = diff_sentence(project, s.id);
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

CreateRequest create_request_from_json(const json& doc) {
  CreateRequest req;
  try {
    req.id = doc.value("id", std::string());
    for (const auto& s : doc.at("sentences")) {
      ProjectSentence ps;
      ps.id = s.at("id").is_string() ? s.at("id").get<std::string>() : s.at("id").dump();
      ps.text = s.at("text").get<std::string>();
      ps.bias_type = s.value("bias_type", std::string());
      req.sentences.push_back(std::move(ps));
    }
    req.annotators = doc.at("annotators").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ValidationError("malformed project request", {e.what()});
  }
  return req;
}

ProjectStore::ProjectStore(std::optional<fs::path> directory, IndicatorSchema schema)
    : directory_(std::move(directory)), schema_(std::move(schema)) {
  if (directory_) {
    fs::create_directories(*directory_);
    load();
  }
}

void ProjectStore::load() {
  for (const auto& entry : fs::directory_iterator(*directory_)) {
    auto name = entry.path().filename().string();
    const std::string suffix = ".project.json";
    if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
      continue;
    }
    auto project = project_from_json(json::parse(io::read_file(entry.path())));
    std::size_t replayed = 0;
    auto log = log_path(*directory_, project.id);
    if (fs::exists(log)) {
      for (const auto& row : io::read_jsonl(log)) {
        apply_entry(project, row);
        ++replayed;
      }
    }
    log_lengths_[project.id] = replayed;
    spdlog::info("loaded project {} ({} logged changes replayed)", project.id, replayed);
    projects_[project.id] = std::move(project);
  }
}

void ProjectStore::apply_entry(Project& project, const json& entry) {
  const auto op = entry.at("op").get<std::string>();
  const auto sid = entry.at("sentence").get<std::string>();
  auto record = record_from_json(entry.at("record"), sid);
  if (op == "submit") {
    record.provenance.source = Provenance::Source::human_annotation;
    project.submissions[sid][entry.at("annotator").get<std::string>()] = std::move(record);
  } else if (op == "adjudicate") {
    record.provenance.source = Provenance::Source::adjudicated;
    project.adjudications[sid] = {std::move(record), entry.at("adjudicator").get<std::string>()};
  } else {
    throw FormatError("unknown log operation '" + op + "'");
  }
}

void ProjectStore::write_snapshot(const Project& project) {
  if (!directory_) return;
  io::write_file(snapshot_path(*directory_, project.id), project_to_json(project).dump(2) + "\n");
  std::error_code ec;
  fs::remove(log_path(*directory_, project.id), ec);
  log_lengths_[project.id] = 0;
}

void ProjectStore::append_log(const std::string& project_id, const ordered_json& entry) {
  if (!directory_) return;
  {
    std::ofstream out(log_path(*directory_, project_id), std::ios::app | std::ios::binary);
    out << entry.dump() << '\n';
    out.flush();
    if (!out) throw Error("cannot append to log of project " + project_id);
  }
  if (++log_lengths_[project_id] >= kCompactAfter) write_snapshot(projects_.at(project_id));
}

Project& ProjectStore::require(const std::string& project_id) {
  auto it = projects_.find(project_id);
  if (it == projects_.end()) throw NotFoundError("no project '" + project_id + "'");
  return it->second;
}

const Project& ProjectStore::require(const std::string& project_id) const {
  auto it = projects_.find(project_id);
  if (it == projects_.end()) throw NotFoundError("no project '" + project_id + "'");
  return it->second;
}

std::string ProjectStore::create_project(CreateRequest request) {
  std::vector<std::string> problems;
  if (request.sentences.empty()) problems.push_back("at least one sentence is required");
  if (request.annotators.size() < 2) problems.push_back("at least two annotators are required");
  std::set<std::string> ids;
  for (const auto& s : request.sentences) {
    if (s.id.empty()) problems.push_back("sentence with empty id");
    if (s.text.empty()) problems.push_back("sentence " + s.id + " has empty text");
    if (!ids.insert(s.id).second) problems.push_back("duplicate sentence id " + s.id);
  }
  std::set<std::string> names;
  for (const auto& a : request.annotators) {
    if (a.empty()) problems.push_back("annotator with empty id");
    if (!names.insert(a).second) problems.push_back("duplicate annotator " + a);
  }
  if (!request.id.empty() && !valid_project_id(request.id)) {
    problems.push_back("project id may contain only letters, digits, '-' and '_'");
  }
  if (!problems.empty()) throw ValidationError("project rejected", problems);

  std::unique_lock lock(mutex_);
  if (request.id.empty()) {
    std::size_t n = projects_.size() + 1;
    while (projects_.count("project-" + std::to_string(n))) ++n;
    request.id = "project-" + std::to_string(n);
  } else if (projects_.count(request.id)) {
    throw StateError("project '" + request.id + "' already exists");
  }
  Project p;
  p.id = request.id;
  p.sentences = std::move(request.sentences);
  p.annotators = std::move(request.annotators);
  write_snapshot(p);
  projects_[p.id] = std::move(p);
  return request.id;
}

std::vector<std::string> ProjectStore::project_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : projects_) out.push_back(id);
  return out;
}

Project ProjectStore::snapshot(const std::string& project_id) const {
  std::shared_lock lock(mutex_);
  return require(project_id);
}

Status ProjectStore::submit(const std::string& project_id, const std::string& annotator,
                            const std::string& sentence_id, IndicatorRecord record) {
  std::unique_lock lock(mutex_);
  auto& p = require(project_id);
  if (!p.has_annotator(annotator)) {
    throw NotFoundError("annotator '" + annotator + "' is not part of project " + project_id);
  }
  if (!p.find_sentence(sentence_id)) {
    throw NotFoundError("no sentence '" + sentence_id + "' in project " + project_id);
  }
  if (p.complete(sentence_id) || p.adjudications.count(sentence_id)) {
    throw StateError("sentence " + sentence_id + " is " + std::string(to_string(p.status(sentence_id))) +
                     "; submissions are closed");
  }
  record.sentence_id = sentence_id;
  record.provenance = {Provenance::Source::human_annotation, {}, {}};
  check_record(record, schema_);
  append_log(project_id, {{"op", "submit"},
                          {"sentence", sentence_id},
                          {"annotator", annotator},
                          {"record", record_to_json(record)}});
  p.submissions[sentence_id][annotator] = std::move(record);
  return p.status(sentence_id);
}

Status ProjectStore::adjudicate(const std::string& project_id, const std::string& sentence_id,
                                IndicatorRecord record, const std::string& adjudicator) {
  std::unique_lock lock(mutex_);
  auto& p = require(project_id);
  if (!p.find_sentence(sentence_id)) {
    throw NotFoundError("no sentence '" + sentence_id + "' in project " + project_id);
  }
  if (adjudicator.empty()) throw ValidationError("adjudication rejected", {"adjudicator is required"});
  const auto status = p.status(sentence_id);
  if (status != Status::disagreed) {
    throw StateError("sentence " + sentence_id + " is " + std::string(to_string(status)) +
                     "; only disagreed sentences can be adjudicated");
  }
  record.sentence_id = sentence_id;
  record.provenance = {Provenance::Source::adjudicated, {}, {}};
  check_record(record, schema_);
  append_log(project_id, {{"op", "adjudicate"},
                          {"sentence", sentence_id},
                          {"adjudicator", adjudicator},
                          {"record", record_to_json(record)}});
  p.adjudications[sentence_id] = {std::move(record), adjudicator};
  return Status::adjudicated;
}

std::optional<ProjectSentence> ProjectStore::next_for(const std::string& project_id,
                                                      const std::string& annotator) const {
  std::shared_lock lock(mutex_);
  const auto& p = require(project_id);
  if (!p.has_annotator(annotator)) {
    throw NotFoundError("annotator '" + annotator + "' is not part of project " + project_id);
  }
  for (const auto& s : p.sentences) {
    auto it = p.submissions.find(s.id);
    if (it == p.submissions.end() || !it->second.count(annotator)) return s;
  }
  return std::nullopt;
}

std::map<std::string, IndicatorRecord> ProjectStore::annotations_for(
    const std::string& project_id, const std::string& sentence_id,
    const std::string& requester) const {
  std::shared_lock lock(mutex_);
  const auto& p = require(project_id);
  if (!p.find_sentence(sentence_id)) {
    throw NotFoundError("no sentence '" + sentence_id + "' in project " + project_id);
  }
  auto it = p.submissions.find(sentence_id);
  if (it == p.submissions.end() || !it->second.count(requester)) {
    throw AccessError("annotator '" + requester + "' has not submitted sentence " + sentence_id);
  }
  return it->second;
}

AgreementSummary ProjectStore::agreement(const std::string& project_id) const {
  std::shared_lock lock(mutex_);
  return annotation::agreement(require(project_id), schema_);
}

std::vector<Disagreement> ProjectStore::disagreements(const std::string& project_id) const {
  std::shared_lock lock(mutex_);
  return open_disagreements(require(project_id));
}

std::string ProjectStore::export_gold(const std::string& project_id) const {
  std::shared_lock lock(mutex_);
  const auto& p = require(project_id);
  std::vector<std::string> pending;
  for (const auto& s : p.sentences) {
    auto st = p.status(s.id);
    if (st != Status::agreed && st != Status::adjudicated) pending.push_back(s.id);
  }
  if (!pending.empty()) {
    std::string list;
    for (const auto& id : pending) list += (list.empty() ? "" : ", ") + id;
    throw StateError("project " + project_id + " has pending sentences: " + list);
  }
  std::string out;
  for (const auto& s : p.sentences) {
    const bool adjudicated = p.adjudications.count(s.id) > 0;
    const auto& rec = adjudicated ? p.adjudications.at(s.id).record
                                  : p.submissions.at(s.id).begin()->second;
    ordered_json row;
    row["id"] = s.id;
    row["text"] = s.text;
    row["bias_type"] = s.bias_type;
    row["record"] = record_to_json(rec);
    row["resolution"] = adjudicated ? "adjudicated" : "agreed";
    out += row.dump() + "\n";
  }
  return out;
}

void ProjectStore::flush() {
  std::unique_lock lock(mutex_);
  for (const auto& [id, p] : projects_) write_snapshot(p);
}

}  // namespace stereoind::annotation
