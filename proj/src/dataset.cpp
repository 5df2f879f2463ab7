#include "marginsel/dataset.hpp"

#include <algorithm>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "marginsel/error.hpp"
#include "marginsel/jsonl.hpp"
#include "marginsel/random.hpp"

namespace marginsel {

Dataset::Dataset(LabelSpace space, std::vector<Example> examples)
    : space_(std::move(space)), examples_(std::move(examples)) {
  std::unordered_set<std::string> seen;
  for (auto& ex : examples_) {
    if (ex.id.empty()) throw Error(Errc::kInvalidArgument, "example with empty id");
    if (!seen.insert(ex.id).second) throw Error(Errc::kDuplicateId, "duplicate id '" + ex.id + "'");
    ex.gold = space_.label(space_.require_index(ex.gold));
  }
}

const Example* Dataset::find(std::string_view id) const {
  for (const auto& ex : examples_) {
    if (ex.id == id) return &ex;
  }
  return nullptr;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Example> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) picked.push_back(examples_.at(i));
  return Dataset(space_, std::move(picked));
}

Dataset load_dataset(const std::filesystem::path& path, const LabelSpace& space) {
  std::vector<Example> examples;
  std::unordered_set<std::string> seen;
  jsonl::for_each_record(path, [&](std::size_t line_no, const nlohmann::json& record) {
    Example ex{jsonl::string_field(record, "id", line_no), jsonl::string_field(record, "text", line_no),
               jsonl::string_field(record, "label", line_no)};
    if (ex.id.empty()) {
      throw Error(Errc::kParseError, "line " + std::to_string(line_no) + ": empty id");
    }
    if (!space.contains(ex.gold)) {
      throw Error(Errc::kUnknownLabel,
                  "line " + std::to_string(line_no) + ": label '" + ex.gold + "' is not in the label space");
    }
    if (!seen.insert(ex.id).second) throw Error(Errc::kDuplicateId, "duplicate id '" + ex.id + "'");
    examples.push_back(std::move(ex));
  });
  return Dataset(space, std::move(examples));
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::string out;
  for (const auto& ex : ds.examples()) {
    nlohmann::ordered_json rec;
    rec["id"] = ex.id;
    rec["text"] = ex.text;
    rec["label"] = ex.gold;
    out += rec.dump();
    out += '\n';
  }
  jsonl::write_file_atomic(path, out);
}

Split stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(Errc::kInvalidArgument, "test_fraction must lie in (0, 1)");
  }
  const LabelSpace& space = ds.space();
  const std::size_t num_classes = space.size();

  std::vector<std::vector<std::size_t>> members(num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) members[space.require_index(ds[i].gold)].push_back(i);

  std::vector<double> exact(num_classes, 0.0);
  std::vector<std::size_t> take(num_classes, 0);
  std::size_t present = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::size_t n = members[c].size();
    if (n == 0) continue;
    if (n < 2) throw Error(Errc::kClassTooSmall, "class '" + space.label(c) + "' has fewer than 2 examples");
    ++present;
    exact[c] = test_fraction * static_cast<double>(n);
    take[c] = std::clamp<std::size_t>(round_half_up(exact[c]), 1, n - 1);
  }
  if (present == 0) throw Error(Errc::kEmptyDataset, "cannot split an empty dataset");

  const std::size_t target = std::clamp<std::size_t>(
      round_half_up(test_fraction * static_cast<double>(ds.size())), present, ds.size() - present);
  auto total = [&] {
    std::size_t s = 0;
    for (auto t : take) s += t;
    return s;
  };

  // Nudge the classes furthest from their exact share, never leaving the
  // +-1 band around it.
  while (total() < target) {
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < num_classes; ++c) {
      const double n = static_cast<double>(members[c].size());
      if (members[c].empty() || static_cast<double>(take[c]) + 1 >= n) continue;
      if (static_cast<double>(take[c]) + 1 > exact[c] + 1) continue;
      if (!best || exact[c] - static_cast<double>(take[c]) > exact[*best] - static_cast<double>(take[*best])) best = c;
    }
    if (!best) break;
    ++take[*best];
  }
  while (total() > target) {
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < num_classes; ++c) {
      if (members[c].empty() || take[c] <= 1) continue;
      if (static_cast<double>(take[c]) - 1 < exact[c] - 1) continue;
      if (!best || static_cast<double>(take[c]) - exact[c] > static_cast<double>(take[*best]) - exact[*best]) best = c;
    }
    if (!best) break;
    --take[*best];
  }

  Rng rng(seed);
  std::vector<bool> in_test(ds.size(), false);
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& idx = members[c];
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
    for (std::size_t j = 0; j < take[c]; ++j) in_test[idx[j]] = true;
  }

  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (std::size_t i = 0; i < ds.size(); ++i) (in_test[i] ? test_idx : train_idx).push_back(i);
  return Split{ds.subset(train_idx), ds.subset(test_idx)};
}

LabelFrequency::LabelFrequency(LabelSpace space, std::vector<double> proportions)
    : space_(std::move(space)), proportions_(std::move(proportions)) {
  if (proportions_.size() != space_.size()) {
    throw Error(Errc::kInvalidArgument, "one proportion per label is required");
  }
}

double LabelFrequency::proportion(std::string_view label) const {
  return proportions_[space_.require_index(label)];
}

double LabelFrequency::weight(std::string_view label) const {
  const auto idx = space_.index_of(label);
  if (!idx || proportions_[*idx] <= 0.0) {
    throw Error(Errc::kMissingFrequency, "no frequency for label '" + std::string(label) + "'");
  }
  return 1.0 / proportions_[*idx];
}

LabelFrequency label_frequency(const Dataset& ds) {
  if (ds.empty()) throw Error(Errc::kEmptyDataset, "label frequency of an empty dataset");
  std::vector<double> counts(ds.space().size(), 0.0);
  for (const auto& ex : ds.examples()) counts[ds.space().require_index(ex.gold)] += 1.0;
  for (auto& c : counts) c /= static_cast<double>(ds.size());
  return LabelFrequency(ds.space(), std::move(counts));
}

}  // namespace marginsel
