#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "marginsel/labels.hpp"

namespace marginsel {

enum class PromptKind { kCandidateAssignment, kFinalPrediction };

// System and user templates for one step. The user template carries a
// `{text}` slot; `{labels}` (bulleted list) and `{label_list}`
// (comma-separated) slots are expanded from the label space when present.
struct PromptTemplate {
  PromptKind kind = PromptKind::kCandidateAssignment;
  std::string system;
  std::string user;
};

struct TemplateSet {
  PromptTemplate candidate;
  PromptTemplate final_prediction;
};

struct Demo {
  std::string text;
  std::string label;

  bool operator==(const Demo&) const = default;
};
using DemoBlock = std::vector<Demo>;

struct RenderedPrompt {
  std::string system;
  std::string user;
};

// Built-in prompts for "sst5", "cogdist" and "medabs".
std::vector<std::string> builtin_presets();
TemplateSet builtin_templates(std::string_view preset);
LabelSpace builtin_label_space(std::string_view preset);

// Reads one system file and one user file (UTF-8 text).
PromptTemplate load_template(PromptKind kind, const std::filesystem::path& system_path,
                             const std::filesystem::path& user_path);

// Labels named by "- label" / "- label: ..." bullet lines of `text`, in order
// of first appearance, restricted to members of `space`.
std::vector<std::string> enumerated_labels(std::string_view text, const LabelSpace& space);

// Throws Errc::kMissingSlot without `{text}`; Errc::kInvalidArgument when the
// rendered user prompt does not enumerate the space in declaration order.
void validate_template(const PromptTemplate& tmpl, const LabelSpace& space);

// System message with label slots expanded.
std::string render_system_prompt(const PromptTemplate& tmpl, const LabelSpace& space);

RenderedPrompt render_candidate_prompt(const PromptTemplate& tmpl, std::string_view example_text,
                                       const LabelSpace& space);

// Demonstrations are rendered ahead of the filled user template, each as its
// escaped text followed by its label in tags.
RenderedPrompt render_final_prompt(const PromptTemplate& tmpl, const DemoBlock& demos,
                                   std::string_view test_text, const LabelSpace& space);

// Angle brackets and ampersands become &lt; &gt; &amp;.
std::string escape_demo_text(std::string_view text);
std::string unescape_demo_text(std::string_view text);

// Recovers the `{text}` payload from a rendered candidate user prompt.
std::optional<std::string> extract_candidate_text(const PromptTemplate& tmpl, std::string_view user,
                                                  const LabelSpace& space);

struct DecodedFinalPrompt {
  DemoBlock demos;
  std::string test_text;
};

// Inverse of render_final_prompt's user message.
std::optional<DecodedFinalPrompt> decode_final_prompt(const PromptTemplate& tmpl, std::string_view user,
                                                      const LabelSpace& space);

// Extracts the first <label>...</label> span. Multi mode splits on commas and
// drops unknown tokens (Errc::kEmptySet if none survive). Single mode needs
// exactly one known label (Errc::kAmbiguous for several). Errc::kNoTag when no
// complete span exists.
CandidateSet parse_label_tags(std::string_view reply, const LabelSpace& space, bool multi);
std::size_t parse_single_label(std::string_view reply, const LabelSpace& space);

}  // namespace marginsel
