#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "marginsel/labels.hpp"

namespace marginsel {

// Labeled examples over a fixed label space. Gold labels are stored in
// canonical form; ids are unique.
class Dataset {
 public:
  Dataset() = default;
  Dataset(LabelSpace space, std::vector<Example> examples);

  const LabelSpace& space() const noexcept { return space_; }
  const std::vector<Example>& examples() const noexcept { return examples_; }
  std::size_t size() const noexcept { return examples_.size(); }
  bool empty() const noexcept { return examples_.empty(); }
  const Example& operator[](std::size_t i) const { return examples_.at(i); }

  // nullptr when absent.
  const Example* find(std::string_view id) const;

  // Examples at `indices`, in the order given.
  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  LabelSpace space_;
  std::vector<Example> examples_;
};

// JSON-lines with string fields id, text, label. Extra fields are ignored.
Dataset load_dataset(const std::filesystem::path& path, const LabelSpace& space);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

struct Split {
  Dataset train;
  Dataset test;
};

// Per class: test count = round-half-up(fraction * class size) clamped to
// [1, size - 1], then adjusted by at most one per class toward the global
// target round-half-up(fraction * |ds|). Both halves keep dataset order.
Split stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed);

// Class proportions over a dataset, indexed like its label space.
class LabelFrequency {
 public:
  LabelFrequency(LabelSpace space, std::vector<double> proportions);

  const LabelSpace& space() const noexcept { return space_; }
  double proportion(std::string_view label) const;
  const std::vector<double>& proportions() const noexcept { return proportions_; }

  // Inverse-frequency sampling weight 1 / rho(label). Throws
  // Errc::kMissingFrequency when the label has no examples.
  double weight(std::string_view label) const;

 private:
  LabelSpace space_;
  std::vector<double> proportions_;
};

LabelFrequency label_frequency(const Dataset& ds);

}  // namespace marginsel
