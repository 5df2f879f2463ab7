#include "marginsel/analysis.hpp"

#include <cmath>
#include <unordered_set>

#include "marginsel/error.hpp"
#include "marginsel/jsonl.hpp"

namespace marginsel {
namespace {

std::string num(double v) { return nlohmann::json(v).dump(); }

nlohmann::ordered_json optional_num(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json cells_to_json(const std::vector<std::string>& labels, const std::vector<RecallCell>& cells) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    nlohmann::ordered_json c;
    c["recall"] = optional_num(cells[i].recall);
    c["records"] = cells[i].records;
    c["hits"] = cells[i].hits;
    out[labels[i]] = std::move(c);
  }
  return out;
}

void finish(std::vector<RecallCell>& cells) {
  for (auto& c : cells) {
    if (c.records > 0) c.recall = static_cast<double>(c.hits) / static_cast<double>(c.records);
  }
}

}  // namespace

std::string_view distance_metric_name(DistanceMetric metric) {
  return metric == DistanceMetric::kEuclidean ? "euclidean" : "cosine_distance";
}

DistanceMetric parse_distance_metric(std::string_view name) {
  if (name == "euclidean") return DistanceMetric::kEuclidean;
  if (name == "cosine_distance" || name == "cosine") return DistanceMetric::kCosineDistance;
  throw Error(Errc::kConfig, "unknown distance metric '" + std::string(name) + "'");
}

CentroidMatrix centroid_distances(const EmbeddingStore& vectors, std::span<const Example> labeled,
                                  const LabelSpace& space, DistanceMetric metric) {
  const std::size_t c = space.size();
  const std::size_t d = vectors.dimension();
  std::vector<std::vector<double>> sums(c, std::vector<double>(d, 0.0));
  std::vector<std::size_t> counts(c, 0);
  for (const auto& ex : labeled) {
    const std::size_t k = space.require_index(ex.gold);
    const auto v = vectors.at(ex.id);
    for (std::size_t i = 0; i < d; ++i) sums[k][i] += v[i];
    ++counts[k];
  }
  for (std::size_t k = 0; k < c; ++k) {
    if (counts[k] == 0) throw Error(Errc::kMissingClass, "no vectors for class '" + space.label(k) + "'");
    for (double& x : sums[k]) x /= static_cast<double>(counts[k]);
  }

  CentroidMatrix m;
  m.labels = space.labels();
  m.metric = metric;
  m.distances.assign(c, std::vector<double>(c, 0.0));
  for (std::size_t a = 0; a < c; ++a) {
    for (std::size_t b = a + 1; b < c; ++b) {
      double dist = 0.0;
      if (metric == DistanceMetric::kEuclidean) {
        double ss = 0.0;
        for (std::size_t i = 0; i < d; ++i) ss += (sums[a][i] - sums[b][i]) * (sums[a][i] - sums[b][i]);
        dist = std::sqrt(ss);
      } else {
        dist = 1.0 - cosine(sums[a], sums[b]);
      }
      m.distances[a][b] = dist;
      m.distances[b][a] = dist;
    }
  }
  return m;
}

CandidateHistogram candidate_histogram(std::span<const LookupEntry> lookup) {
  if (lookup.empty()) throw Error(Errc::kEmptyLookup, "candidate histogram of an empty lookup table");
  CandidateHistogram h;
  for (const auto& e : lookup) ++h.counts[e.candidates.count()];
  h.total = lookup.size();
  for (const auto& [k, n] : h.counts) h.frequencies[k] = static_cast<double>(n) / static_cast<double>(h.total);
  return h;
}

std::vector<Step1Record> step1_records(std::span<const PredictionRecord> records) {
  std::vector<Step1Record> out;
  for (const auto& r : records) {
    if (r.step1) out.push_back(Step1Record{*r.step1, r.gold, r.predicted});
  }
  return out;
}

Step1Recall step1_recall(std::span<const Step1Record> records, const LabelSpace& space) {
  Step1Recall out;
  out.labels = space.labels();
  out.when_correct.assign(space.size(), {});
  out.when_incorrect.assign(space.size(), {});
  out.overall.assign(space.size(), {});
  for (const auto& r : records) {
    const std::size_t g = space.require_index(r.gold);
    const bool hit = r.step1.width() == space.size() && r.step1.test(g);
    auto& stratum = r.predicted == r.gold ? out.when_correct : out.when_incorrect;
    for (auto* cells : {&stratum, &out.overall}) {
      ++(*cells)[g].records;
      (*cells)[g].hits += hit;
    }
  }
  finish(out.when_correct);
  finish(out.when_incorrect);
  finish(out.overall);
  return out;
}

void dump_projection_input(const EmbeddingStore& vectors, std::span<const Example> labeled,
                           const std::filesystem::path& path) {
  std::unordered_set<std::string_view> labeled_ids;
  for (const auto& ex : labeled) {
    if (!vectors.contains(ex.id)) throw Error(Errc::kUnknownId, "no vector for id '" + ex.id + "'");
    labeled_ids.insert(ex.id);
  }
  for (const auto& id : vectors.ids()) {
    if (!labeled_ids.contains(id)) throw Error(Errc::kUnknownId, "no label for vector id '" + id + "'");
  }

  std::string out = "# id, label, vector per line; input for an external 2-D projection\n";
  for (const auto& ex : labeled) {
    nlohmann::ordered_json rec;
    rec["id"] = ex.id;
    rec["label"] = ex.gold;
    const auto v = vectors.at(ex.id);
    rec["vector"] = std::vector<double>(v.begin(), v.end());
    out += rec.dump();
    out += '\n';
  }
  jsonl::write_file_atomic(path, out);
}

nlohmann::ordered_json centroid_to_json(const CentroidMatrix& m) {
  nlohmann::ordered_json j;
  j["metric"] = distance_metric_name(m.metric);
  j["labels"] = m.labels;
  j["distances"] = m.distances;
  return j;
}

std::string centroid_to_csv(const CentroidMatrix& m) {
  std::string out = "label";
  for (const auto& l : m.labels) out += "," + l;
  out += "\n";
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    out += m.labels[i];
    for (double v : m.distances[i]) out += "," + num(v);
    out += "\n";
  }
  return out;
}

nlohmann::ordered_json histogram_to_json(const CandidateHistogram& h) {
  nlohmann::ordered_json j;
  j["total"] = h.total;
  nlohmann::ordered_json buckets = nlohmann::ordered_json::array();
  for (const auto& [k, n] : h.counts) {
    nlohmann::ordered_json b;
    b["candidates"] = k;
    b["count"] = n;
    b["frequency"] = h.frequencies.at(k);
    buckets.push_back(std::move(b));
  }
  j["buckets"] = std::move(buckets);
  return j;
}

std::string histogram_to_csv(const CandidateHistogram& h) {
  std::string out = "candidates,count,frequency\n";
  for (const auto& [k, n] : h.counts) {
    out += std::to_string(k) + "," + std::to_string(n) + "," + num(h.frequencies.at(k)) + "\n";
  }
  return out;
}

nlohmann::ordered_json recall_to_json(const Step1Recall& r) {
  nlohmann::ordered_json j;
  j["labels"] = r.labels;
  j["when_correct"] = cells_to_json(r.labels, r.when_correct);
  j["when_incorrect"] = cells_to_json(r.labels, r.when_incorrect);
  j["overall"] = cells_to_json(r.labels, r.overall);
  return j;
}

std::string recall_to_csv(const Step1Recall& r) {
  std::string out = "label,stratum,records,hits,recall\n";
  const std::pair<const char*, const std::vector<RecallCell>*> strata[] = {
      {"correct", &r.when_correct}, {"incorrect", &r.when_incorrect}, {"overall", &r.overall}};
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    for (const auto& [name, cells] : strata) {
      const RecallCell& c = (*cells)[i];
      out += r.labels[i] + "," + name + "," + std::to_string(c.records) + "," + std::to_string(c.hits) + ",";
      out += c.recall ? num(*c.recall) : std::string();
      out += "\n";
    }
  }
  return out;
}

}  // namespace marginsel
