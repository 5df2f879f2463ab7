#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "marginsel/dataset.hpp"
#include "marginsel/eval.hpp"
#include "marginsel/knn.hpp"
#include "marginsel/labels.hpp"
#include "marginsel/mock.hpp"
#include "marginsel/prompting.hpp"
#include "marginsel/random.hpp"
#include "marginsel/selection.hpp"
#include "marginsel/theory.hpp"

namespace marginsel::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& text);

// "a", "b", "c", ...
LabelSpace letters(std::size_t count);

// Prompts with {labels}/{text} slots that work for any label space.
TemplateSet generic_templates();

// Classes c0..c{C-1} plus an unused label "other". Every text of class k
// carries keyword "kw<k>", which the mock maps to {c<k>, next label}; the
// gold label is the lower index of the two, so a planted-mode mock that sees
// too few matching demonstrations answers the wrong one. Embeddings are
// random and carry no class signal.
struct PlantedWorld {
  LabelSpace space;
  MockRule rule;
  TemplateSet templates;
  Dataset train;
  Dataset test;
  EmbeddingStore embeddings;
};

PlantedWorld planted_world(std::size_t classes, std::size_t train_per_class, std::size_t test_per_class,
                           std::uint64_t seed);

// Writes datasets, embeddings, template files and a mock-backend config for
// the CLI into `dir`; returns the config path.
std::filesystem::path write_planted_files(const PlantedWorld& world, const std::filesystem::path& dir);

// Random lookup table over `space`: n entries, candidate sets drawn from a
// small pool of masks so that matches are common.
std::vector<LookupEntry> random_lookup(Rng& rng, const LabelSpace& space, std::size_t n, std::size_t distinct_sets);

// Class proportions of a lookup table's gold labels.
LabelFrequency lookup_frequency(const std::vector<LookupEntry>& lookup, const LabelSpace& space);

// Exact distribution of k sequential draws without replacement, each
// proportional to the remaining weights, enumerated over every ordered
// sequence of indices.
std::map<std::vector<std::size_t>, double> exact_draw_distribution(const std::vector<double>& weights, std::size_t k);

// Folds ordered sequences into sorted index sets.
std::map<std::vector<std::size_t>, double> unordered(const std::map<std::vector<std::size_t>, double>& ordered);

// Per-class F1 from an explicit confusion matrix with an extra column for
// predictions outside the space; unweighted or support-weighted mean.
double confusion_f1(const std::vector<LabelPair>& pairs, const LabelSpace& space, bool weighted);

// Linear attention by explicit summation over key/value tokens:
// sum_h (W_V h) ((W_K h) . (W_Q q)).
Eigen::VectorXd linear_by_loop(const theory::AttentionParams& p, const theory::PromptTensors& t);

}  // namespace marginsel::testing
