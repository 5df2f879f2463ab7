#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "marginsel/error.hpp"
#include "marginsel/knn.hpp"
#include "marginsel/random.hpp"
#include "support.hpp"

using namespace marginsel;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no marginsel::Error thrown");
  return Errc::kInvalidArgument;
}

// Sort every candidate by (similarity desc, id asc) and keep the first k.
std::vector<std::string> brute_force(const EmbeddingStore& store, const std::vector<double>& q, std::size_t k,
                                     const std::vector<std::string>& ids, const std::vector<std::string>& exclude) {
  std::vector<std::pair<double, std::string>> scored;
  for (const auto& id : ids) {
    if (std::find(exclude.begin(), exclude.end(), id) != exclude.end()) continue;
    const auto v = store.at(id);
    double d = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      d += q[i] * v[i];
      na += q[i] * q[i];
      nb += v[i] * v[i];
    }
    scored.push_back({d / std::sqrt(na * nb), id});
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) out.push_back(scored[i].second);
  return out;
}

}  // namespace

TEST_CASE("embedding store validation") {
  EmbeddingStore store;
  store.add("a", {1, 2, 3});
  store.add("b", {0, 1, 0});
  CHECK(store.dimension() == 3);
  CHECK(store.size() == 2);
  CHECK(code_of([&] { store.add("c", {1, 2, 3, 4}); }) == Errc::kDimensionMismatch);
  CHECK(code_of([&] { store.add("d", {1, std::numeric_limits<double>::quiet_NaN(), 3}); }) == Errc::kParseError);
  CHECK(code_of([&] { store.add("a", {1, 1, 1}); }) == Errc::kDuplicateId);
  CHECK(code_of([&] { store.at("zzz"); }) == Errc::kUnknownId);
  CHECK(store.norm("b") == 1.0);
}

TEST_CASE("load_embeddings round trip and errors") {
  marginsel::testing::TempDir dir;
  marginsel::testing::write_text(dir / "e.jsonl",
                                 "{\"id\":\"x\",\"vector\":[1,0,0]}\n{\"id\":\"y\",\"vector\":[0.5,0.25,-1]}\n");
  const auto store = load_embeddings(dir / "e.jsonl");
  CHECK(store.dimension() == 3);
  CHECK(store.ids() == std::vector<std::string>{"x", "y"});
  save_embeddings(store, dir / "copy.jsonl");
  const auto copy = load_embeddings(dir / "copy.jsonl");
  CHECK(std::equal(copy.at("y").begin(), copy.at("y").end(), store.at("y").begin()));

  marginsel::testing::write_text(dir / "bad.jsonl",
                                 "{\"id\":\"x\",\"vector\":[1,0,0]}\n{\"id\":\"y\",\"vector\":[0,1,0,0]}\n");
  CHECK(code_of([&] { load_embeddings(dir / "bad.jsonl"); }) == Errc::kDimensionMismatch);
  marginsel::testing::write_text(dir / "str.jsonl", "{\"id\":\"x\",\"vector\":[1,\"a\"]}\n");
  CHECK(code_of([&] { load_embeddings(dir / "str.jsonl"); }) == Errc::kParseError);
}

TEST_CASE("cosine examples") {
  const std::vector<double> a{1, 0}, b{0, 1}, c{1, 2}, d{2, 4}, z{0, 0}, three{1, 2, 3};
  CHECK(cosine(a, a) == 1.0);
  CHECK(cosine(a, b) == 0.0);
  CHECK(cosine(c, d) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(code_of([&] { cosine(a, z); }) == Errc::kZeroNorm);
  CHECK(code_of([&] { cosine(a, three); }) == Errc::kDimensionMismatch);
}

TEST_CASE("knn_retrieve examples") {
  EmbeddingStore store;
  store.add("q", {1, 0});
  store.add("a", {1, 0.1});
  store.add("b", {0, 1});
  store.add("twin2", {0.5, 0.5});
  store.add("twin1", {0.5, 0.5});
  const std::vector<std::string> ab{"a", "b"};
  CHECK(knn_retrieve(store, "q", 1, ab) == std::vector<std::string>{"a"});
  CHECK(knn_retrieve(store, "q", 0, ab).empty());
  const std::vector<std::string> twins{"twin2", "twin1"};
  CHECK(knn_retrieve(store, "q", 1, twins) == std::vector<std::string>{"twin1"});

  const std::vector<std::string> with_self{"q", "a", "b"};
  CHECK(knn_retrieve(store, "q", 3, with_self) == std::vector<std::string>{"a", "b"});
  const std::vector<std::string> excl{"a"};
  CHECK(knn_retrieve(store, "q", 1, with_self, excl) == std::vector<std::string>{"b"});
  const std::vector<std::string> missing{"a", "nope"};
  CHECK(code_of([&] { knn_retrieve(store, "q", 1, missing); }) == Errc::kUnknownId);
  CHECK(code_of([&] { knn_retrieve(store, "nope", 1, ab); }) == Errc::kUnknownId);

  const std::vector<double> qv{0, 1};
  CHECK(knn_retrieve(store, qv, 1, ab) == std::vector<std::string>{"b"});
}

TEST_CASE("property: knn_retrieve equals a brute-force sort") {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t dim = 1 + rng.uniform_index(6);
    const std::size_t n = 1 + rng.uniform_index(40);
    EmbeddingStore store;
    std::vector<std::string> ids;
    std::vector<std::vector<double>> pool;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v(dim);
      // Coarse grid so that exact ties occur.
      for (double& x : v) x = static_cast<double>(rng.uniform_index(5)) - 2.0;
      if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;
      if (rng.uniform01() < 0.2 && !pool.empty()) v = pool[rng.uniform_index(pool.size())];
      pool.push_back(v);
      ids.push_back("id" + std::to_string(rng.uniform_index(1000)) + "-" + std::to_string(i));
      store.add(ids.back(), v);
    }
    std::vector<double> q(dim);
    for (double& x : q) x = 2.0 * rng.uniform01() - 1.0;
    std::vector<std::string> exclude;
    for (const auto& id : ids) {
      if (rng.uniform01() < 0.1) exclude.push_back(id);
    }
    const std::size_t k = rng.uniform_index(n + 2);
    CHECK(knn_retrieve(store, q, k, ids, exclude) == brute_force(store, q, k, ids, exclude));
  }
}
