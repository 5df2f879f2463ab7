#include "marginsel/labels.hpp"

#include <bit>
#include <cctype>

#include "marginsel/error.hpp"

namespace marginsel {

std::string canonicalize_label(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  bool pending_space = false;
  for (char raw : name) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

LabelSpace::LabelSpace(std::span<const std::string> names) {
  if (names.size() < 2) {
    throw Error(Errc::kInvalidArgument, "a label space needs at least two labels");
  }
  if (names.size() > kMaxLabels) {
    throw Error(Errc::kInvalidArgument,
                "a label space holds at most " + std::to_string(kMaxLabels) + " labels");
  }
  labels_.reserve(names.size());
  for (const auto& name : names) {
    std::string canonical = canonicalize_label(name);
    if (canonical.empty()) {
      throw Error(Errc::kInvalidArgument, "empty label name");
    }
    if (index_of(canonical)) {
      throw Error(Errc::kInvalidArgument, "duplicate label '" + canonical + "'");
    }
    labels_.push_back(std::move(canonical));
  }
}

LabelSpace::LabelSpace(std::initializer_list<std::string> names)
    : LabelSpace(std::span<const std::string>(names.begin(), names.size())) {}

std::optional<std::size_t> LabelSpace::index_of(std::string_view name) const {
  const std::string canonical = canonicalize_label(name);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == canonical) return i;
  }
  return std::nullopt;
}

std::size_t LabelSpace::require_index(std::string_view name) const {
  if (auto idx = index_of(name)) return *idx;
  throw Error(Errc::kUnknownLabel, "'" + std::string(name) + "' is not in the label space");
}

CandidateSet::CandidateSet(std::size_t width, std::uint64_t bits) : width_(width), bits_(bits) {
  if (width > LabelSpace::kMaxLabels) {
    throw Error(Errc::kInvalidArgument, "candidate set wider than 64 labels");
  }
  if (width < 64 && (bits >> width) != 0) {
    throw Error(Errc::kInvalidArgument, "candidate bits exceed the set width");
  }
}

CandidateSet CandidateSet::singleton(std::size_t width, std::size_t index) {
  CandidateSet cs(width);
  cs.set(index);
  return cs;
}

bool CandidateSet::test(std::size_t index) const {
  if (index >= width_) throw Error(Errc::kInvalidArgument, "label index out of range");
  return (bits_ >> index) & 1U;
}

void CandidateSet::set(std::size_t index) {
  if (index >= width_) throw Error(Errc::kInvalidArgument, "label index out of range");
  bits_ |= std::uint64_t{1} << index;
}

std::size_t CandidateSet::count() const noexcept { return static_cast<std::size_t>(std::popcount(bits_)); }

std::vector<std::size_t> CandidateSet::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < width_; ++i) {
    if ((bits_ >> i) & 1U) out.push_back(i);
  }
  return out;
}

CandidateSet candidate_set_from_labels(std::span<const std::string> names, const LabelSpace& space) {
  CandidateSet cs(space.size());
  for (const auto& name : names) cs.set(space.require_index(name));
  return cs;
}

std::string candidate_key(const CandidateSet& cs) {
  std::string key(cs.width(), '0');
  for (std::size_t i = 0; i < cs.width(); ++i) {
    if (cs.test(i)) key[i] = '1';
  }
  return key;
}

CandidateSet candidate_set_from_key(std::string_view key) {
  if (key.empty() || key.size() > LabelSpace::kMaxLabels) {
    throw Error(Errc::kParseError, "candidate key width must be in [1, 64]");
  }
  CandidateSet cs(key.size());
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (key[i] == '1') {
      cs.set(i);
    } else if (key[i] != '0') {
      throw Error(Errc::kParseError, "candidate key '" + std::string(key) + "' is not a bit string");
    }
  }
  return cs;
}

std::vector<std::string> candidate_labels(const CandidateSet& cs, const LabelSpace& space) {
  if (cs.width() != space.size()) {
    throw Error(Errc::kInvalidArgument, "candidate set width does not match the label space");
  }
  std::vector<std::string> out;
  for (std::size_t i : cs.indices()) out.push_back(space.label(i));
  return out;
}

}  // namespace marginsel
