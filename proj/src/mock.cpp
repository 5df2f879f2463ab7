#include "marginsel/mock.hpp"

#include <algorithm>
#include <cctype>

#include "marginsel/error.hpp"

namespace marginsel {
namespace {

std::string to_lower(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string tag_reply(const CandidateSet& cs, const LabelSpace& space) {
  std::string reply = "<label>";
  bool first = true;
  for (std::size_t i : cs.indices()) {
    if (!first) reply += ',';
    reply += space.label(i);
    first = false;
  }
  return reply + "</label>";
}

// Most frequent label among `labels`, ties broken by first appearance.
std::optional<std::size_t> majority(const std::vector<std::size_t>& labels) {
  std::optional<std::size_t> best;
  std::size_t best_count = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto count = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), labels[i]));
    if (count > best_count) {
      best = labels[i];
      best_count = count;
    }
  }
  return best;
}

}  // namespace

void validate_mock_rule(const MockRule& rule, const LabelSpace& space) {
  for (const auto& [keyword, labels] : rule.keywords) {
    if (keyword.empty() || keyword != to_lower(keyword)) {
      throw Error(Errc::kConfig, "mock keyword '" + keyword + "' must be non-empty lowercase");
    }
    for (const auto& label : labels) space.require_index(label);
  }
  space.require_index(rule.default_label);
}

CandidateSet mock_multilabel(const MockRule& rule, std::string_view text, const LabelSpace& space) {
  const std::string lowered = to_lower(text);
  CandidateSet cs(space.size());
  for (const auto& [keyword, labels] : rule.keywords) {
    if (lowered.find(keyword) == std::string::npos) continue;
    for (const auto& label : labels) cs.set(space.require_index(label));
  }
  if (cs.is_empty()) cs.set(space.require_index(rule.default_label));
  return cs;
}

MockBackend::MockBackend(MockRule rule, LabelSpace space, TemplateSet templates, MockFinalMode mode)
    : rule_(std::move(rule)),
      space_(std::move(space)),
      templates_(std::move(templates)),
      mode_(mode),
      candidate_system_(render_system_prompt(templates_.candidate, space_)),
      final_system_(render_system_prompt(templates_.final_prediction, space_)) {
  validate_mock_rule(rule_, space_);
}

std::string MockBackend::reply_for(std::string_view system, std::string_view user) const {
  if (system == final_system_) {
    if (auto decoded = decode_final_prompt(templates_.final_prediction, user, space_)) {
      return "<label>" + space_.label(final_answer(*decoded)) + "</label>";
    }
  }
  if (system == candidate_system_) {
    if (auto text = extract_candidate_text(templates_.candidate, user, space_)) {
      return tag_reply(mock_multilabel(rule_, *text, space_), space_);
    }
  }
  return tag_reply(mock_multilabel(rule_, user, space_), space_);
}

std::size_t MockBackend::final_answer(const DecodedFinalPrompt& prompt) const {
  const CandidateSet test_set = mock_multilabel(rule_, prompt.test_text, space_);
  const std::size_t keyword_answer = test_set.indices().front();

  std::vector<std::size_t> demo_labels;
  std::vector<std::size_t> matching_labels;
  for (const auto& demo : prompt.demos) {
    const auto idx = space_.index_of(demo.label);
    if (!idx) continue;
    demo_labels.push_back(*idx);
    if (mock_multilabel(rule_, demo.text, space_) == test_set) matching_labels.push_back(*idx);
  }

  switch (mode_) {
    case MockFinalMode::kKeyword:
      return keyword_answer;
    case MockFinalMode::kMajority:
      return majority(demo_labels).value_or(keyword_answer);
    case MockFinalMode::kPlanted:
      if (!matching_labels.empty() && 2 * matching_labels.size() >= prompt.demos.size()) {
        return *majority(matching_labels);
      }
      return test_set.indices().back();
  }
  return keyword_answer;
}

ChatExchange MockBackend::chat(ChatExchange request) {
  request.reply = reply_for(request.system, request.user);
  request.attempt_count = 1;
  request.latency = std::chrono::milliseconds{0};
  return request;
}

}  // namespace marginsel
