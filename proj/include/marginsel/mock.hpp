#pragma once

#include <string>
#include <utility>
#include <vector>

#include "marginsel/chat.hpp"
#include "marginsel/labels.hpp"
#include "marginsel/prompting.hpp"

namespace marginsel {

// Keyword table standing in for a zero-shot multi-label model.
struct MockRule {
  // keyword (lowercase) -> labels, in declaration order
  std::vector<std::pair<std::string, std::vector<std::string>>> keywords;
  std::string default_label;
};

// Throws Errc::kConfig for non-lowercase keywords and Errc::kUnknownLabel for
// labels outside `space`.
void validate_mock_rule(const MockRule& rule, const LabelSpace& space);

// Union of the label sets of every keyword found in lowercase(text); the
// default label alone when nothing matches.
CandidateSet mock_multilabel(const MockRule& rule, std::string_view text, const LabelSpace& space);

// How the mock answers final-prediction prompts.
enum class MockFinalMode {
  // Lowest-index label of mock_multilabel(test text).
  kKeyword,
  // Most frequent demo label, ties to the earliest; keyword mode without demos.
  kMajority,
  // Demos whose mock candidate set equals the test's are "matching". With at
  // least half of the demos matching, answers the majority label among them;
  // otherwise answers the highest-index label of the test's candidate set.
  kPlanted,
};

// Deterministic, stateless backend. Candidate prompts (recognized by the
// candidate system message) get "<label>a,b</label>" built from
// mock_multilabel over the recovered text; final prompts are decoded and
// answered per MockFinalMode; anything else is treated as a candidate request
// over the whole user message.
class MockBackend : public ChatBackend {
 public:
  MockBackend(MockRule rule, LabelSpace space, TemplateSet templates, MockFinalMode mode = MockFinalMode::kMajority);

  ChatExchange chat(ChatExchange request) override;
  std::string model_name() const override { return "mock"; }

  std::string reply_for(std::string_view system, std::string_view user) const;

 private:
  std::size_t final_answer(const DecodedFinalPrompt& prompt) const;

  MockRule rule_;
  LabelSpace space_;
  TemplateSet templates_;
  MockFinalMode mode_;
  std::string candidate_system_;
  std::string final_system_;
};

}  // namespace marginsel
