#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace marginsel {

// Dense embeddings keyed by example id. All vectors share one dimension and
// hold only finite values.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;

  // Throws Errc::kDimensionMismatch, Errc::kParseError (non-finite or empty
  // vector) or Errc::kDuplicateId.
  void add(std::string id, std::vector<double> vector);

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool contains(std::string_view id) const;
  // Throws Errc::kUnknownId.
  std::span<const double> at(std::string_view id) const;
  double norm(std::string_view id) const;
  // Insertion order.
  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  struct Entry {
    std::vector<double> vector;
    double norm = 0.0;
  };
  const Entry& entry(std::string_view id) const;

  std::size_t dimension_ = 0;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, Entry> entries_;
};

// JSON-lines with `id` and `vector` (array of numbers).
EmbeddingStore load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

// dot(a, b) / (|a| |b|). Throws Errc::kDimensionMismatch or Errc::kZeroNorm.
double cosine(std::span<const double> a, std::span<const double> b);

// The k candidates most cosine-similar to the query, descending, ties broken
// by ascending id. The query id and `exclude_ids` are never returned. Throws
// Errc::kUnknownId for a query or candidate missing from the store.
std::vector<std::string> knn_retrieve(const EmbeddingStore& store, std::string_view query_id, std::size_t k,
                                      std::span<const std::string> candidate_ids,
                                      std::span<const std::string> exclude_ids = {});

// Same, for a query vector that is not in the store.
std::vector<std::string> knn_retrieve(const EmbeddingStore& store, std::span<const double> query, std::size_t k,
                                      std::span<const std::string> candidate_ids,
                                      std::span<const std::string> exclude_ids = {});

}  // namespace marginsel
