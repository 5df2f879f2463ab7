#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "marginsel/chat.hpp"
#include "marginsel/dataset.hpp"
#include "marginsel/knn.hpp"
#include "marginsel/labels.hpp"
#include "marginsel/prompting.hpp"

namespace marginsel {

// A training example with its zero-shot candidate set. An empty set marks a
// reply that could not be parsed.
struct LookupEntry {
  Example example;
  CandidateSet candidates;

  bool operator==(const LookupEntry&) const = default;
};

struct SelectionConfig {
  double alpha = 1.0;
  std::size_t n = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class DemoSource { kHard, kKnn, kRandom };
std::string_view demo_source_name(DemoSource source);

struct DemoEntry {
  Example example;
  DemoSource source = DemoSource::kHard;
};

// Hard entries first (in sampled order), then kNN entries (by similarity).
struct DemoSet {
  std::vector<DemoEntry> entries;

  std::vector<std::string> ids() const;
  std::size_t count(DemoSource source) const;
  DemoBlock block() const;
};

// Where the kNN share looks up the test example: by id in the store, or by an
// explicit vector when query_vector is non-empty.
struct KnnQuery {
  const EmbeddingStore* store = nullptr;
  std::string query_id;
  std::vector<double> query_vector;
};

// Runs the candidate prompt for one text. Unparseable replies yield the empty
// set (logged); backend errors propagate.
CandidateSet assign_candidates(ChatBackend& backend, const PromptTemplate& tmpl, std::string_view text,
                               const LabelSpace& space);

// One entry per training example, in dataset order.
std::vector<LookupEntry> build_lookup(const Dataset& train, ChatBackend& backend, const PromptTemplate& tmpl,
                                      std::size_t max_in_flight = 4);

// JSON-lines with id, text, gold, candidates (array of label names).
void save_lookup(std::span<const LookupEntry> lookup, const LabelSpace& space, const std::filesystem::path& path);
std::vector<LookupEntry> load_lookup(const std::filesystem::path& path, const LabelSpace& space);
std::string lookup_to_jsonl(std::span<const LookupEntry> lookup, const LabelSpace& space);

// Entries whose candidate set equals `test_candidates` bit for bit, in lookup
// order. The empty set matches nothing.
std::vector<LookupEntry> match_hard(std::span<const LookupEntry> lookup, const CandidateSet& test_candidates);

// Returns `matched` unchanged when it holds at most k entries; otherwise k
// sequential draws without replacement, each proportional to the remaining
// inverse-frequency weights 1 / rho(gold).
std::vector<LookupEntry> weighted_sample(std::span<const LookupEntry> matched, std::size_t k,
                                         const LabelFrequency& rho, std::uint64_t seed);

// round-half-up(alpha * n)
std::size_t hard_quota(double alpha, std::size_t n);

// Hard examples up to the quota, then kNN over the remaining training ids to
// fill n (alpha < 1). At alpha == 1 nothing is backfilled and an empty match
// raises Errc::kEmptySelection.
DemoSet select_demos(std::span<const LookupEntry> lookup, const CandidateSet& test_candidates, const KnnQuery* knn,
                     const LabelFrequency& rho, const SelectionConfig& cfg);

}  // namespace marginsel
