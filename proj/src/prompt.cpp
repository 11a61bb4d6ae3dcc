#include "stereoind/prompt.hpp"

#include <algorithm>

#include "stereoind/errors.hpp"

namespace stereoind::prompt {

namespace {

constexpr std::string_view kRole = "You are a helpful assistant answering only in JSON-Output.";

// {attributes_or} is filled with the configured attributes joined by "or".
constexpr std::string_view kTask =
    "A category label in a sentence is a linguistic label used to identify a given group of "
    "persons that refers to a demographic group or a specific or unspecific person that exist in "
    "reality. Your task is to identify (if possible) in a given sentence a category label "
    "referring to {attributes_or} and the information that is shared about this category label.";

constexpr std::string_view kAnswerLead =
    "Given a sentence, answer the following questions step by step only in JSON-Format:";

// {attributes_and} is filled with the attributes in alphabetical order joined by "and".
constexpr std::array<std::string_view, 11> kQuestions = {
    "(1) Evaluate whether the sentence has a category label that refers to a demographic group "
    "of people or an individual using only 'yes' or 'no'. Consider {attributes_and} as a "
    "demographic group. Be aware that also pronouns and names can give indication on "
    "{attributes_and}. If 'yes', the sentence has a category label, answer the following "
    "questions with respect to the category label. If the sentence has no category label answer "
    "for all following questions using 'not-applicable'",

    "(2) Name the full category label (including article) used in the sentence to identify the "
    "group of people or the person. If more than one category labels are given, name only the "
    "most important one.",

    "(3) Name if, the category label refers to a 'specified target' (it addresses a specified "
    "individual or specific individual(s), e.g.Mary, a black man) or to a 'generic target' (it "
    "addresses a generic social category, e.g. Asians).",

    "(4) Name the connotation of the category label without considering the other content, "
    "using 'negative' (negative or derogatory expression for a group, e.g. those bitches), "
    "'positive' (positive or glorifying expression to describe a category, e.g. the female "
    "heros), or 'neutral' (neural and objective expression to describe a category, e.g. the "
    "women).",

    "(5) Name the grammatical from of the label itself, using ‘noun’ (category "
    "transported by a common noun potentially extended by adjectives e.g. Asians, a black girl ), "
    "or ‘other’ (category transported by a proper noun, by a pronoun and an adjective "
    "e.g. Carlo, he, the person is black).",

    "(6) Name the linguistic form of the label itself using 'generic' (referring to a demographic "
    "group or an unspecific respresentative of this group, e.g. men. a black girl), 'subset' "
    "(referring to a specific subset or type of a demographic group e.g. these Germans) or "
    "'individual' (referring to one or several specific individual(s) who may be assumed to be a "
    "member of a demographic group, e.g. the black girl, Lotta).",

    "(7) Extract the exact information shared about the category label. Answer all following "
    "questions with respect to the extracted information.",

    "(8) Evaluate whether this information describes a 'situational behaviour' (a specified "
    "situational behaviour is described, e.g. the girl helped her mother yesterday), an "
    "'enduring characteristics' (a generalized behavioral or characteristics such as traits and "
    "qualities across situations are described e.g. this girl is helpful, girls are helpful) or "
    "‘other’ (neither a behaviour nor a characteristics of the category label is "
    "described but for example an event or treatments that occurs to the category label is "
    "described without influence of the category label itself e.g. he was injured by the bomb). "
    "If situational behaviour and enduring charactersitics are mentioned, name only enduring "
    "characteristics. If 'situational behaviour' or ‘enduring characteristics’, answer "
    "the following questions using only the shared information about the category label, "
    "otherwise answer with 'not-applicable':",

    "(9) Evaluate the linguistic generalization of the exact shared information about the "
    "category label using 'abstract' (abstract terms such as state verbs or adjectives are used, "
    "e.g. she hates him, they are not able to do something) or 'concrete' (descriptive action "
    "verbs are used and refer to specific situations, e.g. she kicks him).",

    "(10) Answer if the shared information about the category label contains an explanation "
    "using 'yes' (an explanation is provided why someone behaves in a certain way e.g.the girl is "
    "aggressive as it was a hard day for her, he cannot drive as he did not have driving lessons) "
    "or 'no' (no explanation is given for the characteristic/behaviour, or the "
    "characteristic/behaviour itself is used as an explanation eg. the girl is emotional, he is "
    "aggressive as he is male) only.",

    "(11) Answer whether the exactly shared information contains signal words for the regularity "
    "of the described behaviour, trait, or characteristic using 'typical' (signal words are used "
    "that indicate typicality, e.g. always, or indeed), 'exceptional' (signal words are used to "
    "indicate exceptionality, e.g. only this time, unexpectedly, today), or 'none' (no signal "
    "words are used).",
};

constexpr std::string_view kContentLead =
    "The category label of the sentence is \"{category_label}\". Using this category label as "
    "context, answer the following questions step by step only in JSON-Format:";

constexpr std::size_t kLabelQuestionCount = 6;

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

std::string task_text(const PromptConfig& config) {
  return replace_all(std::string(kTask), "{attributes_or}", join_attributes(config.attributes, " or "));
}

std::string question_text(std::size_t index, const PromptConfig& config) {
  auto sorted = config.attributes;
  std::sort(sorted.begin(), sorted.end());
  return replace_all(std::string(kQuestions[index]), "{attributes_and}",
                     join_attributes(sorted, " and "));
}

bool is_label_side(Indicator ind) { return index_of(ind) < kLabelQuestionCount; }

std::string render_answer(const IndicatorRecord& record, Stage stage) {
  ordered_json out = ordered_json::object();
  for (Indicator ind : kAllIndicators) {
    if (stage == Stage::label && !is_label_side(ind)) continue;
    if (stage == Stage::content && is_label_side(ind)) continue;
    if (!record.has_label() && ind != Indicator::has_category_label) continue;
    out[std::string(key_name(ind))] = record[ind].eval_class();
  }
  return out.dump(2);
}

std::vector<CanonicalExample> make_canonical_examples() {
  const std::string na(kNotApplicable);
  std::vector<CanonicalExample> ex;
  auto labeled = [&](std::string id, std::string sentence,
                     std::array<std::string, kIndicatorCount> values) {
    CanonicalExample e{std::move(sentence), make_record(std::move(id), values), {}};
    e.completion = render_answer(e.expected, Stage::single);
    ex.push_back(std::move(e));
  };
  auto unlabeled = [&](std::string id, std::string sentence) {
    CanonicalExample e{std::move(sentence), make_unlabeled_record(std::move(id)), {}};
    e.completion = render_answer(e.expected, Stage::single);
    ex.push_back(std::move(e));
  };

  unlabeled("example-1", "It always rains in London.");
  labeled("example-2", "Young women are usually too emotional to make a decision!",
          {"yes", "young women", "generic target", "neutral", "noun", "generic",
           "are usually too emotional to make a decision.", "enduring characteristics",
           "abstract", "no", "typical"});
  labeled("example-3",
          "A black man came to the park and saw the girl, it was dangerous for her to be there.",
          {"yes", "a black man", "specified target", "neutral", "noun", "generic",
           "came to the park and saw the girl", "situational behaviour", "concrete", "no",
           "none"});
  labeled("example-4",
          "Shaniqua spent the whole day at the salon getting her weave put in. She wanted to go "
          "on a date tonight.",
          {"yes", "Shaniqua", "specified target", "neutral", "other", "individual",
           "spent the whole day at the salon getting her weave put in. She wanted to go on a "
           "date.",
           "situational behaviour", "concrete", "yes", "exceptional"});
  labeled("example-5", "She freaked out and was mad upon finding out that he betrayed her.",
          {"yes", "she", "specified target", "neutral", "other", "individual",
           "freaked out and was mad upon finding out that he betrayed her",
           "situational behaviour", "abstract", "yes", "none"});
  labeled("example-6", "These English gentlemen were always in time.",
          {"yes", "these english gentlemen", "specified target", "positive", "noun", "subset",
           "were always in time.", "enduring characteristics", "abstract", "no", "typical"});
  labeled("example-7", "Women can finally make their voices heard.",
          {"yes", "women", "generic target", "neutral", "noun", "generic",
           "can finally make their voices heard.", "other", na, na, na});
  labeled("example-8", "The black man couldn't get coffee at the shoppe.",
          {"yes", "the black man", "specified target", "neutral", "noun", "individual",
           "couldn't get coffee at the shoppe", "other", na, na, na});
  unlabeled("example-9", "A German meal is very heavy.");
  return ex;
}

std::vector<ChatMessage> preamble(const PromptConfig& config, std::size_t first_question,
                                  std::size_t last_question, std::string_view lead) {
  auto task = task_text(config);
  std::string instructions = task + "\n" + std::string(lead);
  for (std::size_t q = first_question; q < last_question; ++q) {
    instructions += "\n" + question_text(q, config);
  }
  return {{"system", std::string(kRole)}, {"user", task}, {"user", std::move(instructions)}};
}

}  // namespace

std::string_view to_string(Mode mode) noexcept {
  return mode == Mode::single_stage ? "single-stage" : "multi-stage";
}

Mode mode_from_string(std::string_view text) {
  if (text == "single-stage" || text == "single") return Mode::single_stage;
  if (text == "multi-stage" || text == "multi") return Mode::multi_stage;
  throw ConfigError("unknown prompt mode '" + std::string(text) + "'");
}

std::string_view to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::single: return "single";
    case Stage::label: return "label";
    case Stage::content: return "content";
  }
  return "";
}

void PromptConfig::validate() const {
  if (shots < 0 || shots > static_cast<int>(kCanonicalExampleCount)) {
    throw ConfigError("shots must be in 0.." + std::to_string(kCanonicalExampleCount) +
                      ", got " + std::to_string(shots));
  }
  if (attributes.empty()) throw ConfigError("at least one sensitive attribute is required");
  for (const auto& a : attributes) {
    if (a.empty()) throw ConfigError("sensitive attribute names must be non-empty");
  }
}

const std::vector<CanonicalExample>& canonical_examples() {
  static const std::vector<CanonicalExample> examples = make_canonical_examples();
  return examples;
}

std::string join_attributes(const std::vector<std::string>& attributes, std::string_view last_sep) {
  std::string out;
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    if (i > 0) out += (i + 1 == attributes.size()) ? std::string(last_sep) : std::string(", ");
    out += attributes[i];
  }
  return out;
}

PromptBundle PromptBundle::with_sentence(std::string_view sentence) const {
  PromptBundle out = *this;
  out.messages.push_back({"user", "Sentence: " + std::string(sentence)});
  return out;
}

nlohmann::ordered_json PromptBundle::to_json() const {
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const auto& m : messages) list.push_back({{"role", m.role}, {"content", m.content}});
  return list;
}

std::string PromptBundle::to_text() const {
  std::string out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += messages[i].content;
  }
  return out;
}

PromptBundle build_prompt(const PromptConfig& config) {
  config.validate();
  PromptBundle bundle;
  bundle.stage = Stage::single;
  bundle.messages = preamble(config, 0, kQuestions.size(), kAnswerLead);
  const auto& examples = canonical_examples();
  for (int i = 0; i < config.shots; ++i) {
    const auto& e = examples[static_cast<std::size_t>(i)];
    bundle.messages.push_back({"user", "Sentence: " + e.sentence + "\n" + e.completion});
  }
  bundle.example_count = static_cast<std::size_t>(config.shots);
  return bundle;
}

PromptBundle ContentStageTemplate::render(std::string_view category_label) const {
  PromptBundle out = bundle_;
  for (auto& m : out.messages) {
    m.content = replace_all(std::move(m.content), kLabelPlaceholder, category_label);
  }
  return out;
}

MultiStagePrompt build_multistage(const PromptConfig& config) {
  config.validate();
  if (config.mode != Mode::multi_stage) {
    throw ConfigError("build_multistage requires multi-stage mode; use build_prompt");
  }
  const auto& examples = canonical_examples();

  PromptBundle label;
  label.stage = Stage::label;
  label.messages = preamble(config, 0, kLabelQuestionCount, kAnswerLead);
  for (int i = 0; i < config.shots; ++i) {
    const auto& e = examples[static_cast<std::size_t>(i)];
    label.messages.push_back(
        {"user", "Sentence: " + e.sentence + "\n" + render_answer(e.expected, Stage::label)});
  }
  label.example_count = static_cast<std::size_t>(config.shots);

  // Content-stage examples only exist for sentences that have a label.
  PromptBundle content;
  content.stage = Stage::content;
  content.messages = preamble(config, kLabelQuestionCount, kQuestions.size(), kContentLead);
  for (int i = 0; i < config.shots; ++i) {
    const auto& e = examples[static_cast<std::size_t>(i)];
    if (!e.expected.has_label()) continue;
    content.messages.push_back({"user", "Sentence: " + e.sentence + "\nCategory label: " +
                                            e.expected[Indicator::full_label].value() + "\n" +
                                            render_answer(e.expected, Stage::content)});
    ++content.example_count;
  }
  return {std::move(label), ContentStageTemplate(std::move(content))};
}

}  // namespace stereoind::prompt
