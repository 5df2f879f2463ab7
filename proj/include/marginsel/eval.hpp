#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "marginsel/chat.hpp"
#include "marginsel/dataset.hpp"
#include "marginsel/knn.hpp"
#include "marginsel/labels.hpp"
#include "marginsel/prompting.hpp"
#include "marginsel/selection.hpp"

namespace marginsel {

// Prediction that could not be parsed into a single known label. Counts as
// wrong for every class.
inline constexpr std::string_view kInvalidLabel = "INVALID";

enum class Averaging { kMacro, kWeighted };

struct LabelPair {
  std::string gold;
  std::string predicted;
};

// Unweighted (or support-weighted) mean of per-class F1 over every label of
// `space`. A class with no gold and no predicted instances scores 0.
// Throws Errc::kEmptyInput and Errc::kUnknownLabel.
double macro_f1(std::span<const LabelPair> pairs, const LabelSpace& space, Averaging averaging = Averaging::kMacro);

enum class MethodKind { kRandom, kKnn, kMarginSel };
enum class FallbackPolicy { kKnn, kRandom };

struct MethodSpec {
  MethodKind kind = MethodKind::kRandom;
  double alpha = 1.0;  // marginsel only

  // "random", "knn", "marginsel(alpha=0.9)"
  std::string name() const;
  // Accepts "random", "knn", "marginsel" (alpha 1) and "marginsel:<alpha>".
  static MethodSpec parse(std::string_view text);

  bool operator==(const MethodSpec&) const = default;
};

std::string format_alpha(double alpha);

// Everything a prediction reads. `lookup` is required for marginsel and
// `embeddings` (covering train and test ids) for knn, marginsel with
// alpha < 1, and the knn fallback.
struct PredictionContext {
  const Dataset& train;
  std::span<const LookupEntry> lookup;
  const EmbeddingStore* embeddings = nullptr;
  const LabelFrequency& rho;
  const TemplateSet& templates;
  ChatBackend& backend;
  FallbackPolicy fallback = FallbackPolicy::kKnn;
};

struct PredictionRecord {
  std::string method;
  std::size_t shots = 0;
  std::uint64_t seed = 0;
  std::string id;
  std::string gold;
  std::string predicted;
  std::vector<std::string> demo_ids;
  std::vector<std::string> demo_sources;
  std::optional<CandidateSet> step1;  // marginsel only
  bool fallback = false;
  bool retried = false;

  bool correct() const { return predicted == gold; }
};

nlohmann::ordered_json record_to_json(const PredictionRecord& record, const LabelSpace& space);
PredictionRecord record_from_json(const nlohmann::json& json, const LabelSpace& space);

// Demo selection for one test example under `method`. For marginsel,
// `step1` is the test's candidate set; `fell_back` reports whether the
// fallback policy replaced an empty selection.
DemoSet select_for_method(const Example& test, const MethodSpec& method, std::size_t shots, std::uint64_t seed,
                          const PredictionContext& ctx, const CandidateSet* step1, bool* fell_back);

// Step 1 (marginsel), demo selection, final prompt, single-label parse with
// one corrective retry; INVALID after that. `step1`, when given, skips the
// candidate prompt for the test example.
PredictionRecord predict_one(const Example& test, const MethodSpec& method, std::size_t shots, std::uint64_t seed,
                             const PredictionContext& ctx, const std::optional<CandidateSet>& step1 = std::nullopt);

struct RunConfig {
  std::vector<MethodSpec> methods;
  std::vector<std::size_t> shots{2, 4, 6, 8, 10};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  FallbackPolicy fallback = FallbackPolicy::kKnn;
  Averaging averaging = Averaging::kMacro;
  std::size_t max_in_flight = 4;
  // Append-only per-example log; existing records are reused on rerun.
  std::optional<std::filesystem::path> records_path;

  void validate() const;
};

struct ExperimentInputs {
  const Dataset& train;
  const Dataset& test;
  std::span<const LookupEntry> lookup;
  const EmbeddingStore* embeddings = nullptr;
  const TemplateSet& templates;
  ChatBackend& backend;
};

struct CellResult {
  MethodSpec method;
  std::size_t shots = 0;
  std::uint64_t seed = 0;
  double macro_f1 = 0.0;
  std::size_t invalid = 0;
  std::size_t fallbacks = 0;
  std::optional<std::string> error;
  std::vector<PredictionRecord> records;
};

struct PairedTest {
  double mean_difference = 0.0;
  std::optional<double> t_statistic;  // absent when the differences have zero spread
  double p_value = 1.0;
  bool significant = false;
};

// Two-sided paired t-test; needs at least two pairs.
std::optional<PairedTest> paired_t_test(std::span<const double> a, std::span<const double> b, double level = 0.05);

struct CellSummary {
  std::string method;
  std::size_t shots = 0;
  std::size_t seeds = 0;
  double mean = 0.0;
  double stdev = 0.0;  // sample standard deviation, 0 for one seed
  std::optional<PairedTest> vs_random;
};

struct RunReport {
  std::vector<CellResult> cells;
  std::vector<CellSummary> summary;

  bool has_errors() const;
  const CellResult* find(std::string_view method, std::size_t shots, std::uint64_t seed) const;
};

RunReport run_experiment(const RunConfig& cfg, const ExperimentInputs& inputs);

nlohmann::ordered_json report_to_json(const RunReport& report, const LabelSpace& space);
RunReport report_from_json(const nlohmann::json& json, const LabelSpace& space);
// method,shots,seed,macro_f1
std::string report_to_csv(const RunReport& report);

struct SweepRow {
  double alpha = 0.0;
  double mean_f1 = 0.0;  // over every shot and seed
  std::vector<std::pair<std::size_t, double>> per_shot;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<RunReport> reports;
};

// One marginsel run per alpha; `base.methods` is ignored.
SweepResult alpha_sweep(const RunConfig& base, std::span<const double> alphas, const ExperimentInputs& inputs);

nlohmann::ordered_json sweep_to_json(const SweepResult& sweep);
std::string sweep_to_csv(const SweepResult& sweep);

}  // namespace marginsel
