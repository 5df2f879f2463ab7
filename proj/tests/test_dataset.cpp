#include <doctest.h>

#include <map>
#include <set>

#include "marginsel/dataset.hpp"
#include "marginsel/error.hpp"
#include "marginsel/jsonl.hpp"
#include "support.hpp"

using namespace marginsel;
using marginsel::testing::letters;
using marginsel::testing::TempDir;
using marginsel::testing::write_text;

namespace {

Dataset make_dataset(const LabelSpace& space, const std::vector<std::pair<std::string, std::size_t>>& counts) {
  std::vector<Example> out;
  for (const auto& [label, n] : counts) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = label + std::to_string(i);
      out.push_back(Example{id, "text " + id, label});
    }
  }
  return Dataset(space, out);
}

std::map<std::string, std::size_t> class_counts(const Dataset& ds) {
  std::map<std::string, std::size_t> m;
  for (const auto& ex : ds.examples()) ++m[ex.gold];
  return m;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no marginsel::Error thrown");
  return Errc::kInvalidArgument;
}

}  // namespace

TEST_CASE("load_dataset reads records in order and ignores extra fields") {
  TempDir dir;
  const auto space = letters(3);
  write_text(dir / "d.jsonl",
             "{\"id\":\"1\",\"text\":\"one\",\"label\":\"a\"}\n"
             "{\"id\":\"2\",\"text\":\"two\",\"label\":\"A\",\"extra\":5}\n"
             "{\"id\":\"3\",\"text\":\"three\",\"label\":\"b\"}\n"
             "{\"id\":\"4\",\"text\":\"four\",\"label\":\"c\"}\n");
  const auto ds = load_dataset(dir / "d.jsonl", space);
  REQUIRE(ds.size() == 4);
  CHECK(ds[1].gold == "a");
  CHECK(ds[3].text == "four");
  CHECK(ds.find("3")->gold == "b");
  CHECK(ds.find("nope") == nullptr);

  save_dataset(ds, dir / "copy.jsonl");
  CHECK(load_dataset(dir / "copy.jsonl", space).examples() == ds.examples());
}

TEST_CASE("load_dataset errors") {
  TempDir dir;
  const auto space = letters(3);
  write_text(dir / "unknown.jsonl", "{\"id\":\"1\",\"text\":\"x\",\"label\":\"cardio\"}\n");
  CHECK(code_of([&] { load_dataset(dir / "unknown.jsonl", space); }) == Errc::kUnknownLabel);

  write_text(dir / "dup.jsonl",
             "{\"id\":\"1\",\"text\":\"x\",\"label\":\"a\"}\n{\"id\":\"1\",\"text\":\"y\",\"label\":\"b\"}\n");
  CHECK(code_of([&] { load_dataset(dir / "dup.jsonl", space); }) == Errc::kDuplicateId);

  write_text(dir / "broken.jsonl", "{\"id\":\"1\",\"text\":\"x\",\"label\":\"a\"}\nnot json\n");
  try {
    load_dataset(dir / "broken.jsonl", space);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kParseError);
    CHECK(std::string(e.what()).find("broken.jsonl:2:") != std::string::npos);
  }

  write_text(dir / "nolabel.jsonl", "{\"id\":\"1\",\"text\":\"x\"}\n");
  CHECK(code_of([&] { load_dataset(dir / "nolabel.jsonl", space); }) == Errc::kParseError);

  write_text(dir / "empty.jsonl", "");
  CHECK(load_dataset(dir / "empty.jsonl", space).empty());
}

TEST_CASE("stratified_split exact per-class arithmetic") {
  const auto space = letters(5);
  const auto ds = make_dataset(space, {{"a", 20}, {"b", 20}, {"c", 20}, {"d", 20}, {"e", 20}});
  const auto split = stratified_split(ds, 0.5, 7);
  CHECK(split.train.size() == 50);
  CHECK(split.test.size() == 50);
  for (const auto& [label, n] : class_counts(split.test)) CHECK(n == 10);
  for (const auto& [label, n] : class_counts(split.train)) CHECK(n == 10);
}

TEST_CASE("stratified_split rounding rule") {
  const auto space = letters(2);
  const auto split = stratified_split(make_dataset(space, {{"a", 8}, {"b", 2}}), 0.5, 1);
  const auto counts = class_counts(split.test);
  CHECK(counts.at("a") == 4);
  CHECK(counts.at("b") == 1);
}

TEST_CASE("stratified_split errors") {
  const auto space = letters(2);
  CHECK(code_of([&] { stratified_split(make_dataset(space, {{"a", 5}, {"b", 1}}), 0.5, 1); }) ==
        Errc::kClassTooSmall);
  CHECK(code_of([&] { stratified_split(make_dataset(space, {{"a", 5}}), 1.0, 1); }) == Errc::kInvalidArgument);
}

TEST_CASE("property: splits are deterministic, disjoint, covering and stratified") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 2 + rng.uniform_index(5);
    const auto space = letters(c);
    std::vector<std::pair<std::string, std::size_t>> counts;
    for (std::size_t k = 0; k < c; ++k) counts.push_back({space.label(k), 2 + rng.uniform_index(30)});
    const auto ds = make_dataset(space, counts);
    const double fraction = 0.05 + 0.9 * rng.uniform01();
    const std::uint64_t seed = rng.uniform_index(1000);

    const auto s1 = stratified_split(ds, fraction, seed);
    const auto s2 = stratified_split(ds, fraction, seed);
    CHECK(s1.train.examples() == s2.train.examples());
    CHECK(s1.test.examples() == s2.test.examples());

    std::set<std::string> ids;
    for (const auto& ex : s1.train.examples()) ids.insert(ex.id);
    for (const auto& ex : s1.test.examples()) CHECK(ids.insert(ex.id).second);
    CHECK(ids.size() == ds.size());

    const auto test_counts = class_counts(s1.test);
    const auto train_counts = class_counts(s1.train);
    for (const auto& [label, n] : counts) {
      const double exact = fraction * static_cast<double>(n);
      const auto it = test_counts.find(label);
      REQUIRE(it != test_counts.end());
      CHECK(train_counts.count(label) == 1);
      CHECK(std::abs(static_cast<double>(it->second) - exact) <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("label_frequency counts proportions") {
  const auto space = letters(3);
  const auto rho = label_frequency(make_dataset(space, {{"a", 2}, {"b", 1}, {"c", 1}}));
  CHECK(rho.proportion("a") == 0.5);
  CHECK(rho.proportion("b") == 0.25);
  CHECK(rho.proportion("c") == 0.25);

  const auto same = label_frequency(make_dataset(space, {{"a", 3}}));
  CHECK(same.proportion("a") == 1.0);
  CHECK(same.proportion("b") == 0.0);
  CHECK(code_of([&] { same.weight("b"); }) == Errc::kMissingFrequency);

  const auto skew = label_frequency(make_dataset(letters(2), {{"a", 3}, {"b", 1}}));
  CHECK(skew.weight("a") == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(skew.weight("b") == 4.0);

  CHECK(code_of([&] { label_frequency(Dataset(space, {})); }) == Errc::kEmptyDataset);
}

TEST_CASE("property: proportions sum to one") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 2 + rng.uniform_index(8);
    const auto space = letters(c);
    std::vector<std::pair<std::string, std::size_t>> counts;
    for (std::size_t k = 0; k < c; ++k) counts.push_back({space.label(k), rng.uniform_index(40)});
    counts[0].second += 1;
    const auto rho = label_frequency(make_dataset(space, counts));
    double sum = 0.0;
    for (double p : rho.proportions()) sum += p;
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    for (const auto& [label, n] : counts) CHECK((n > 0) == (rho.proportion(label) > 0.0));
  }
}
