#include "marginsel/knn.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "marginsel/error.hpp"
#include "marginsel/jsonl.hpp"

namespace marginsel {
namespace {

struct Scored {
  double score;
  const std::string* id;
};

std::vector<std::string> top_k(const EmbeddingStore& store, std::span<const double> query, double query_norm,
                               std::string_view self_id, std::size_t k, std::span<const std::string> candidate_ids,
                               std::span<const std::string> exclude_ids) {
  if (k == 0) return {};
  if (query.size() != store.dimension()) {
    throw Error(Errc::kDimensionMismatch, "query dimension differs from the store");
  }
  if (query_norm == 0.0) throw Error(Errc::kZeroNorm, "query vector has zero norm");

  const std::unordered_set<std::string_view> excluded(exclude_ids.begin(), exclude_ids.end());
  std::unordered_set<std::string_view> seen;
  std::vector<Scored> scored;
  scored.reserve(candidate_ids.size());
  for (const auto& id : candidate_ids) {
    const auto vec = store.at(id);
    if (id == self_id || excluded.contains(id) || !seen.insert(id).second) continue;
    const double n = store.norm(id);
    if (n == 0.0) throw Error(Errc::kZeroNorm, "embedding '" + id + "' has zero norm");
    scored.push_back({dot(query, vec) / (query_norm * n), &id});
  }

  auto better = [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return *a.id < *b.id;
  };
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);

  std::vector<std::string> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(*scored[i].id);
  return out;
}

}  // namespace

void EmbeddingStore::add(std::string id, std::vector<double> vector) {
  if (vector.empty()) throw Error(Errc::kParseError, "embedding '" + id + "' is empty");
  for (double v : vector) {
    if (!std::isfinite(v)) throw Error(Errc::kParseError, "embedding '" + id + "' has a non-finite component");
  }
  if (ids_.empty()) {
    dimension_ = vector.size();
  } else if (vector.size() != dimension_) {
    throw Error(Errc::kDimensionMismatch, "embedding '" + id + "' has dimension " + std::to_string(vector.size()) +
                                              ", expected " + std::to_string(dimension_));
  }
  if (entries_.contains(id)) throw Error(Errc::kDuplicateId, "duplicate embedding id '" + id + "'");
  const double n = l2_norm(vector);
  ids_.push_back(id);
  entries_.emplace(std::move(id), Entry{std::move(vector), n});
}

bool EmbeddingStore::contains(std::string_view id) const { return entries_.contains(std::string(id)); }

const EmbeddingStore::Entry& EmbeddingStore::entry(std::string_view id) const {
  auto it = entries_.find(std::string(id));
  if (it == entries_.end()) throw Error(Errc::kUnknownId, "no embedding for id '" + std::string(id) + "'");
  return it->second;
}

std::span<const double> EmbeddingStore::at(std::string_view id) const { return entry(id).vector; }

double EmbeddingStore::norm(std::string_view id) const { return entry(id).norm; }

EmbeddingStore load_embeddings(const std::filesystem::path& path) {
  EmbeddingStore store;
  jsonl::for_each_record(path, [&](std::size_t line_no, const nlohmann::json& record) {
    std::string id = jsonl::string_field(record, "id", line_no);
    auto it = record.find("vector");
    if (it == record.end() || !it->is_array()) {
      throw Error(Errc::kParseError, "line " + std::to_string(line_no) + ": missing array field 'vector'");
    }
    std::vector<double> vector;
    vector.reserve(it->size());
    for (const auto& v : *it) {
      if (!v.is_number()) {
        throw Error(Errc::kParseError, "line " + std::to_string(line_no) + ": non-numeric vector component");
      }
      vector.push_back(v.get<double>());
    }
    store.add(std::move(id), std::move(vector));
  });
  return store;
}

void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
  std::string out;
  for (const auto& id : store.ids()) {
    nlohmann::ordered_json rec;
    rec["id"] = id;
    const auto v = store.at(id);
    rec["vector"] = std::vector<double>(v.begin(), v.end());
    out += rec.dump();
    out += '\n';
  }
  jsonl::write_file_atomic(path, out);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::kDimensionMismatch, "vectors differ in dimension");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::kDimensionMismatch, "vectors differ in dimension");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw Error(Errc::kZeroNorm, "cosine of a zero vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

std::vector<std::string> knn_retrieve(const EmbeddingStore& store, std::string_view query_id, std::size_t k,
                                      std::span<const std::string> candidate_ids,
                                      std::span<const std::string> exclude_ids) {
  const auto query = store.at(query_id);
  return top_k(store, query, store.norm(query_id), query_id, k, candidate_ids, exclude_ids);
}

std::vector<std::string> knn_retrieve(const EmbeddingStore& store, std::span<const double> query, std::size_t k,
                                      std::span<const std::string> candidate_ids,
                                      std::span<const std::string> exclude_ids) {
  return top_k(store, query, l2_norm(query), {}, k, candidate_ids, exclude_ids);
}

}  // namespace marginsel
