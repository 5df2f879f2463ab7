#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "marginsel/eval.hpp"
#include "marginsel/knn.hpp"
#include "marginsel/labels.hpp"
#include "marginsel/selection.hpp"

namespace marginsel {

enum class DistanceMetric { kEuclidean, kCosineDistance };

std::string_view distance_metric_name(DistanceMetric metric);
// "euclidean" or "cosine_distance"; Errc::kConfig otherwise.
DistanceMetric parse_distance_metric(std::string_view name);

struct CentroidMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> distances;  // symmetric, zero diagonal
  DistanceMetric metric = DistanceMetric::kEuclidean;

  double at(std::size_t i, std::size_t j) const { return distances.at(i).at(j); }
};

// Mean vector per class over `labeled` (id and gold of each example), then
// pairwise centroid distances. Throws Errc::kMissingClass for a class without
// vectors and Errc::kUnknownId for an id missing from `vectors`.
CentroidMatrix centroid_distances(const EmbeddingStore& vectors, std::span<const Example> labeled,
                                  const LabelSpace& space, DistanceMetric metric = DistanceMetric::kEuclidean);

struct CandidateHistogram {
  std::map<std::size_t, std::size_t> counts;    // popcount -> entries
  std::map<std::size_t, double> frequencies;    // popcount -> share
  std::size_t total = 0;
};

// Empty (unparseable) sets land in bucket 0. Throws Errc::kEmptyLookup.
CandidateHistogram candidate_histogram(std::span<const LookupEntry> lookup);

struct Step1Record {
  CandidateSet step1;
  std::string gold;
  std::string predicted;
};

// Records that carry a Step-1 set, in order.
std::vector<Step1Record> step1_records(std::span<const PredictionRecord> records);

struct RecallCell {
  std::size_t records = 0;  // stratum records with this gold label
  std::size_t hits = 0;     // ... whose Step-1 set contains it
  std::optional<double> recall;  // absent when records == 0
};

struct Step1Recall {
  std::vector<std::string> labels;
  std::vector<RecallCell> when_correct;
  std::vector<RecallCell> when_incorrect;
  std::vector<RecallCell> overall;
};

// Per gold class, the fraction of records whose Step-1 set contains the gold
// label, split by whether the final prediction was correct.
Step1Recall step1_recall(std::span<const Step1Record> records, const LabelSpace& space);

// Header comment line, then one {id, label, vector} object per example.
// The id sets of `vectors` and `labeled` must coincide; otherwise
// Errc::kUnknownId is thrown before anything is written.
void dump_projection_input(const EmbeddingStore& vectors, std::span<const Example> labeled,
                           const std::filesystem::path& path);

nlohmann::ordered_json centroid_to_json(const CentroidMatrix& m);
std::string centroid_to_csv(const CentroidMatrix& m);
nlohmann::ordered_json histogram_to_json(const CandidateHistogram& h);
std::string histogram_to_csv(const CandidateHistogram& h);
nlohmann::ordered_json recall_to_json(const Step1Recall& r);
std::string recall_to_csv(const Step1Recall& r);

}  // namespace marginsel
