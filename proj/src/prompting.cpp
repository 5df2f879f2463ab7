#include "marginsel/prompting.hpp"

#include <algorithm>
#include <cctype>

#include <spdlog/spdlog.h>

#include "marginsel/error.hpp"
#include "marginsel/jsonl.hpp"

namespace marginsel {
namespace {

constexpr std::string_view kTextSlot = "{text}";
constexpr std::string_view kLabelsSlot = "{labels}";
constexpr std::string_view kLabelListSlot = "{label_list}";

constexpr std::string_view kDemoHeader = "Here are some labeled examples:\n\n";
constexpr std::string_view kDemoTextOpen = "Text: '";
constexpr std::string_view kDemoTextClose = "'\n<label>";
constexpr std::string_view kDemoLabelClose = "</label>\n\n";

std::string bullet_labels(const LabelSpace& space) {
  std::string out;
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (i) out += '\n';
    out += "- " + space.label(i);
  }
  return out;
}

std::string csv_labels(const LabelSpace& space) {
  std::string out;
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (i) out += ',';
    out += space.label(i);
  }
  return out;
}

std::size_t count_text_slots(std::string_view tmpl) {
  std::size_t n = 0;
  for (auto pos = tmpl.find(kTextSlot); pos != std::string_view::npos; pos = tmpl.find(kTextSlot, pos + 1)) ++n;
  return n;
}

// Expands the label slots of `tmpl` and splits it around its single `{text}`
// slot.
std::pair<std::string, std::string> expand_around_text(std::string_view tmpl, const LabelSpace& space) {
  const std::size_t slots = count_text_slots(tmpl);
  if (slots == 0) throw Error(Errc::kMissingSlot, "user template has no {text} slot");
  if (slots > 1) throw Error(Errc::kInvalidArgument, "user template has more than one {text} slot");

  std::string prefix;
  std::string suffix;
  std::string* out = &prefix;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const std::string_view rest = tmpl.substr(i);
    if (rest.starts_with(kTextSlot)) {
      out = &suffix;
      i += kTextSlot.size();
    } else if (rest.starts_with(kLabelsSlot)) {
      *out += bullet_labels(space);
      i += kLabelsSlot.size();
    } else if (rest.starts_with(kLabelListSlot)) {
      *out += csv_labels(space);
      i += kLabelListSlot.size();
    } else {
      out->push_back(tmpl[i++]);
    }
  }
  return {std::move(prefix), std::move(suffix)};
}

std::string expand_labels_only(std::string_view tmpl, const LabelSpace& space) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const std::string_view rest = tmpl.substr(i);
    if (rest.starts_with(kLabelsSlot)) {
      out += bullet_labels(space);
      i += kLabelsSlot.size();
    } else if (rest.starts_with(kLabelListSlot)) {
      out += csv_labels(space);
      i += kLabelListSlot.size();
    } else {
      out.push_back(tmpl[i++]);
    }
  }
  return out;
}

void require_kind(const PromptTemplate& tmpl, PromptKind kind) {
  if (tmpl.kind != kind) {
    throw Error(Errc::kInvalidArgument, kind == PromptKind::kCandidateAssignment
                                            ? "expected a candidate-assignment template"
                                            : "expected a final-prediction template");
  }
}

std::size_t ifind(std::string_view haystack, std::string_view needle, std::size_t from) {
  if (needle.empty() || haystack.size() < needle.size()) return std::string_view::npos;
  for (std::size_t i = from; i + needle.size() <= haystack.size(); ++i) {
    bool match = true;
    for (std::size_t j = 0; j < needle.size(); ++j) {
      if (std::tolower(static_cast<unsigned char>(haystack[i + j])) != needle[j]) {
        match = false;
        break;
      }
    }
    if (match) return i;
  }
  return std::string_view::npos;
}

std::string_view tag_content(std::string_view reply) {
  constexpr std::string_view kOpen = "<label>";
  constexpr std::string_view kClose = "</label>";
  const auto open = ifind(reply, kOpen, 0);
  if (open == std::string_view::npos) throw Error(Errc::kNoTag, "reply has no <label> tag");
  const auto start = open + kOpen.size();
  const auto close = ifind(reply, kClose, start);
  if (close == std::string_view::npos) throw Error(Errc::kNoTag, "reply has an unterminated <label> tag");
  return reply.substr(start, close - start);
}

std::string clean_token(std::string_view token) {
  constexpr std::string_view kStrip = " \t\r\n'\".`";
  const auto first = token.find_first_not_of(kStrip);
  if (first == std::string_view::npos) return {};
  const auto last = token.find_last_not_of(kStrip);
  return canonicalize_label(token.substr(first, last - first + 1));
}

std::vector<std::size_t> known_tokens(std::string_view content, const LabelSpace& space) {
  std::vector<std::size_t> found;
  std::size_t start = 0;
  while (start <= content.size()) {
    auto comma = content.find(',', start);
    if (comma == std::string_view::npos) comma = content.size();
    const std::string token = clean_token(content.substr(start, comma - start));
    if (!token.empty()) {
      if (auto idx = space.index_of(token); idx && std::find(found.begin(), found.end(), *idx) == found.end()) {
        found.push_back(*idx);
      }
    }
    start = comma + 1;
  }
  return found;
}

}  // namespace

PromptTemplate load_template(PromptKind kind, const std::filesystem::path& system_path,
                             const std::filesystem::path& user_path) {
  return PromptTemplate{kind, jsonl::read_file(system_path), jsonl::read_file(user_path)};
}

std::vector<std::string> enumerated_labels(std::string_view text, const LabelSpace& space) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    const auto lead = line.find_first_not_of(" \t");
    if (lead == std::string_view::npos || !line.substr(lead).starts_with("- ")) continue;
    line = line.substr(lead + 2);
    if (auto colon = line.find(':'); colon != std::string_view::npos) line = line.substr(0, colon);
    const std::string name = canonicalize_label(line);
    if (space.contains(name) && std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  return out;
}

void validate_template(const PromptTemplate& tmpl, const LabelSpace& space) {
  auto [prefix, suffix] = expand_around_text(tmpl.user, space);
  const auto listed = enumerated_labels(prefix + suffix, space);
  if (listed != space.labels()) {
    throw Error(Errc::kInvalidArgument,
                "user template must enumerate every label in label-space order (found " +
                    std::to_string(listed.size()) + " of " + std::to_string(space.size()) + ")");
  }
}

std::string render_system_prompt(const PromptTemplate& tmpl, const LabelSpace& space) {
  return expand_labels_only(tmpl.system, space);
}

RenderedPrompt render_candidate_prompt(const PromptTemplate& tmpl, std::string_view example_text,
                                       const LabelSpace& space) {
  require_kind(tmpl, PromptKind::kCandidateAssignment);
  auto [prefix, suffix] = expand_around_text(tmpl.user, space);
  if (example_text.empty()) spdlog::warn("rendering a candidate prompt for an empty text");
  return RenderedPrompt{expand_labels_only(tmpl.system, space), prefix + std::string(example_text) + suffix};
}

RenderedPrompt render_final_prompt(const PromptTemplate& tmpl, const DemoBlock& demos, std::string_view test_text,
                                   const LabelSpace& space) {
  require_kind(tmpl, PromptKind::kFinalPrediction);
  auto [prefix, suffix] = expand_around_text(tmpl.user, space);
  std::string user;
  if (!demos.empty()) {
    user += kDemoHeader;
    for (const auto& demo : demos) {
      user += kDemoTextOpen;
      user += escape_demo_text(demo.text);
      user += kDemoTextClose;
      user += demo.label;
      user += kDemoLabelClose;
    }
  }
  user += prefix;
  user += test_text;
  user += suffix;
  return RenderedPrompt{expand_labels_only(tmpl.system, space), std::move(user)};
}

std::string escape_demo_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_demo_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    const std::string_view rest = text.substr(i);
    if (rest.starts_with("&lt;")) {
      out.push_back('<');
      i += 4;
    } else if (rest.starts_with("&gt;")) {
      out.push_back('>');
      i += 4;
    } else if (rest.starts_with("&amp;")) {
      out.push_back('&');
      i += 5;
    } else {
      out.push_back(text[i++]);
    }
  }
  return out;
}

std::optional<std::string> extract_candidate_text(const PromptTemplate& tmpl, std::string_view user,
                                                  const LabelSpace& space) {
  auto [prefix, suffix] = expand_around_text(tmpl.user, space);
  if (user.size() < prefix.size() + suffix.size() || !user.starts_with(prefix) || !user.ends_with(suffix)) {
    return std::nullopt;
  }
  return std::string(user.substr(prefix.size(), user.size() - prefix.size() - suffix.size()));
}

std::optional<DecodedFinalPrompt> decode_final_prompt(const PromptTemplate& tmpl, std::string_view user,
                                                      const LabelSpace& space) {
  auto [prefix, suffix] = expand_around_text(tmpl.user, space);
  DecodedFinalPrompt decoded;
  std::string_view rest = user;
  if (rest.starts_with(kDemoHeader)) {
    rest.remove_prefix(kDemoHeader.size());
    // Escaped demo text holds no '<', so the first "'\n<label>" closes it.
    while (rest.starts_with(kDemoTextOpen)) {
      rest.remove_prefix(kDemoTextOpen.size());
      const auto text_end = rest.find(kDemoTextClose);
      if (text_end == std::string_view::npos) return std::nullopt;
      const std::string_view escaped = rest.substr(0, text_end);
      if (escaped.find('<') != std::string_view::npos) return std::nullopt;
      rest.remove_prefix(text_end + kDemoTextClose.size());
      const auto label_end = rest.find(kDemoLabelClose);
      if (label_end == std::string_view::npos) return std::nullopt;
      decoded.demos.push_back(Demo{unescape_demo_text(escaped), std::string(rest.substr(0, label_end))});
      rest.remove_prefix(label_end + kDemoLabelClose.size());
    }
  }
  if (rest.size() < prefix.size() + suffix.size() || !rest.starts_with(prefix) || !rest.ends_with(suffix)) {
    return std::nullopt;
  }
  decoded.test_text = std::string(rest.substr(prefix.size(), rest.size() - prefix.size() - suffix.size()));
  return decoded;
}

CandidateSet parse_label_tags(std::string_view reply, const LabelSpace& space, bool multi) {
  if (!multi) return CandidateSet::singleton(space.size(), parse_single_label(reply, space));
  const std::string_view content = tag_content(reply);
  CandidateSet cs(space.size());
  for (std::size_t idx : known_tokens(content, space)) cs.set(idx);
  if (cs.is_empty()) {
    throw Error(Errc::kEmptySet, "no known label inside <label> tags: '" + std::string(content.substr(0, 80)) + "'");
  }
  return cs;
}

std::size_t parse_single_label(std::string_view reply, const LabelSpace& space) {
  const std::string_view content = tag_content(reply);
  if (auto whole = space.index_of(clean_token(content))) return *whole;
  const auto found = known_tokens(content, space);
  if (found.empty()) {
    throw Error(Errc::kEmptySet, "no known label inside <label> tags: '" + std::string(content.substr(0, 80)) + "'");
  }
  if (found.size() > 1) throw Error(Errc::kAmbiguous, "more than one label inside <label> tags");
  return found.front();
}

}  // namespace marginsel
