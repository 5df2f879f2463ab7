#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace marginsel {

// Lowercase, trim, and collapse internal whitespace runs to a single space.
std::string canonicalize_label(std::string_view name);

// Ordered, immutable set of class labels. Bit i of every CandidateSet built
// over this space refers to labels()[i].
class LabelSpace {
 public:
  static constexpr std::size_t kMaxLabels = 64;

  LabelSpace() = default;
  explicit LabelSpace(std::span<const std::string> names);
  LabelSpace(std::initializer_list<std::string> names);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(std::size_t index) const { return labels_.at(index); }

  // Canonicalizes `name` before lookup.
  std::optional<std::size_t> index_of(std::string_view name) const;
  bool contains(std::string_view name) const { return index_of(name).has_value(); }

  // Throws Errc::kUnknownLabel.
  std::size_t require_index(std::string_view name) const;

  bool operator==(const LabelSpace&) const = default;

 private:
  std::vector<std::string> labels_;
};

// Bitmask subset of a LabelSpace of width C. The empty mask is only produced
// as the parse-failure sentinel.
class CandidateSet {
 public:
  CandidateSet() = default;
  explicit CandidateSet(std::size_t width, std::uint64_t bits = 0);

  static CandidateSet empty(std::size_t width) { return CandidateSet(width); }
  static CandidateSet singleton(std::size_t width, std::size_t index);

  std::size_t width() const noexcept { return width_; }
  std::uint64_t bits() const noexcept { return bits_; }
  bool test(std::size_t index) const;
  void set(std::size_t index);
  std::size_t count() const noexcept;
  bool is_empty() const noexcept { return bits_ == 0; }

  // Indices of set bits in ascending order.
  std::vector<std::size_t> indices() const;

  bool operator==(const CandidateSet&) const = default;

 private:
  std::size_t width_ = 0;
  std::uint64_t bits_ = 0;
};

// Throws Errc::kUnknownLabel naming the first label outside `space`.
CandidateSet candidate_set_from_labels(std::span<const std::string> names, const LabelSpace& space);

// Fixed-width '0'/'1' key, leftmost character is label index 0.
std::string candidate_key(const CandidateSet& cs);

// Inverse of candidate_key. Throws Errc::kParseError on characters other than
// '0'/'1' or on widths outside [1, 64].
CandidateSet candidate_set_from_key(std::string_view key);

std::vector<std::string> candidate_labels(const CandidateSet& cs, const LabelSpace& space);

struct Example {
  std::string id;
  std::string text;
  std::string gold;

  bool operator==(const Example&) const = default;
};

}  // namespace marginsel
