#pragma once

// Deterministic assembly of the indicator-extraction prompt: a role
// description, the task description with interchangeable sensitive
// attributes, eleven numbered questions and up to nine worked examples.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stereoind/schema.hpp"

namespace stereoind::prompt {

enum class Mode { single_stage, multi_stage };

std::string_view to_string(Mode mode) noexcept;
Mode mode_from_string(std::string_view text);

inline constexpr std::size_t kCanonicalExampleCount = 9;

struct PromptConfig {
  int shots = 9;
  std::vector<std::string> attributes = {"race", "gender"};
  Mode mode = Mode::single_stage;

  // Throws ConfigError on out-of-range shots or an empty attribute list.
  void validate() const;
};

struct CanonicalExample {
  std::string sentence;
  IndicatorRecord expected;
  std::string completion;  // the example's answer exactly as the prompt prints it
};

// The nine worked examples in prompt order, bracketed by the two sentences
// without a category label.
const std::vector<CanonicalExample>& canonical_examples();

enum class Stage { single, label, content };

std::string_view to_string(Stage stage) noexcept;

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct PromptBundle {
  Stage stage = Stage::single;
  std::vector<ChatMessage> messages;
  std::size_t example_count = 0;

  // Appends the query message for one sentence.
  PromptBundle with_sentence(std::string_view sentence) const;

  // [{"role": ..., "content": ...}, ...] as sent to chat-completion APIs.
  nlohmann::ordered_json to_json() const;
  // Message contents separated by blank lines.
  std::string to_text() const;

  bool operator==(const PromptBundle&) const = default;
};

PromptBundle build_prompt(const PromptConfig& config);

inline constexpr std::string_view kLabelPlaceholder = "{category_label}";

// Second stage of the two-prompt variant. The template text contains
// kLabelPlaceholder, replaced verbatim by the label found in stage one.
class ContentStageTemplate {
 public:
  explicit ContentStageTemplate(PromptBundle bundle) : bundle_(std::move(bundle)) {}

  const PromptBundle& raw() const noexcept { return bundle_; }
  PromptBundle render(std::string_view category_label) const;

 private:
  PromptBundle bundle_;
};

struct MultiStagePrompt {
  PromptBundle label_stage;  // questions (1)-(6)
  ContentStageTemplate content_stage;  // questions (7)-(11)
};

// Requires config.mode == multi_stage; throws ConfigError otherwise.
MultiStagePrompt build_multistage(const PromptConfig& config);

// "race or gender", "race, gender or age".
std::string join_attributes(const std::vector<std::string>& attributes, std::string_view last_sep);

}  // namespace stereoind::prompt
