#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <random>
#include <stdexcept>
#include <vector>

#include "marginsel/error.hpp"
#include "marginsel/jsonl.hpp"
#include "marginsel/labels.hpp"
#include "marginsel/parallel.hpp"
#include "marginsel/random.hpp"
#include "support.hpp"

using namespace marginsel;

namespace {

LabelSpace sst5() {
  return LabelSpace{"very negative", "negative", "neutral", "positive", "very positive"};
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

TEST_CASE("canonicalize_label lowercases, trims and collapses whitespace") {
  CHECK(canonicalize_label("  Mental   Filter\t") == "mental filter");
  CHECK(canonicalize_label("POSITIVE") == "positive");
  CHECK(canonicalize_label(" \n ") == "");
}

TEST_CASE("label space rejects duplicates after canonicalization and tiny spaces") {
  CHECK(code_of([] { LabelSpace{"Positive", "positive "}; }) == Errc::kInvalidArgument);
  CHECK(code_of([] { LabelSpace{"only"}; }) == Errc::kInvalidArgument);
  const auto space = sst5();
  CHECK(space.index_of("Very  Positive") == 4u);
  CHECK_FALSE(space.contains("joyful"));
  CHECK(code_of([&] { space.require_index("joyful"); }) == Errc::kUnknownLabel);
}

TEST_CASE("candidate_set_from_labels maps names onto bits") {
  const auto space = sst5();
  std::vector<std::string> names{"negative", "positive"};
  CHECK(candidate_key(candidate_set_from_labels(names, space)) == "01010");

  std::vector<std::string> fig{"very negative", "positive"};
  CHECK(candidate_key(candidate_set_from_labels(fig, space)) == "10010");

  std::vector<std::string> dup{"Positive", "positive "};
  CHECK(candidate_key(candidate_set_from_labels(dup, space)) == "00010");

  std::vector<std::string> bad{"positive", "cardio"};
  CHECK(code_of([&] { candidate_set_from_labels(bad, space); }) == Errc::kUnknownLabel);
}

TEST_CASE("candidate_key fixed width, index 0 leftmost") {
  CandidateSet cs(5);
  cs.set(0);
  cs.set(3);
  CHECK(candidate_key(cs) == "10010");
  CHECK(candidate_key(CandidateSet(3, 0b111)) == "111");
  CHECK(candidate_key(CandidateSet::singleton(5, 2)) == "00100");
  CHECK(candidate_labels(cs, sst5()) == std::vector<std::string>{"very negative", "positive"});
}

TEST_CASE("candidate_set_from_key rejects malformed keys") {
  CHECK(code_of([] { candidate_set_from_key("10a"); }) == Errc::kParseError);
  CHECK(code_of([] { candidate_set_from_key(""); }) == Errc::kParseError);
  CHECK(code_of([] { candidate_set_from_key(std::string(65, '1')); }) == Errc::kParseError);
}

TEST_CASE("property: key round trip and order-insensitive construction") {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t c = 2 + rng.uniform_index(20);
    const auto space = testing::letters(c);
    std::vector<std::string> names;
    std::uint64_t expected = 0;
    const std::size_t picks = 1 + rng.uniform_index(2 * c);
    for (std::size_t i = 0; i < picks; ++i) {
      const std::size_t k = rng.uniform_index(c);
      expected |= std::uint64_t{1} << k;
      std::string name = space.label(k);
      if (rng.uniform01() < 0.5) name = " " + std::string(1, static_cast<char>(std::toupper(name[0]))) + "  ";
      names.push_back(name);
    }
    const auto cs = candidate_set_from_labels(names, space);
    REQUIRE(cs.bits() == expected);
    CHECK(cs.count() == static_cast<std::size_t>(std::popcount(expected)));
    CHECK(candidate_set_from_key(candidate_key(cs)) == cs);

    auto shuffled = names;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.uniform_index(i)]);
    shuffled.push_back(names.front());
    CHECK(candidate_set_from_labels(shuffled, space) == cs);
  }
}

TEST_CASE("Rng draws follow the engine bit-exactly") {
  std::mt19937_64 ref(5489);
  CHECK(ref() == 14514284786278117030ull);

  Rng rng(5489);
  CHECK(rng.uniform01() == static_cast<double>(14514284786278117030ull >> 11) * 0x1.0p-53);

  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform_index(7) == b.uniform_index(7));
  CHECK(code_of([&] { a.uniform_index(0); }) == Errc::kInvalidArgument);
}

TEST_CASE("uniform_index is unbiased over a small range") {
  Rng rng(3);
  std::vector<int> counts(6, 0);
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) ++counts[rng.uniform_index(6)];
  for (int c : counts) CHECK(std::abs(c - draws / 6) < 400);
}

TEST_CASE("derive_seed and round_half_up") {
  CHECK(fnv1a64("") == 14695981039346656037ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(derive_seed(1, "x") == derive_seed(1, "x"));
  CHECK(derive_seed(1, "x") != derive_seed(2, "x"));
  CHECK(derive_seed(1, "x") != derive_seed(1, "y"));
  CHECK(round_half_up(0.9 * 10) == 9u);
  CHECK(round_half_up(0.5 * 5) == 3u);
  CHECK(round_half_up(0.3 * 5) == 2u);
  CHECK(round_half_up(0.0) == 0u);
  CHECK(code_of([] { round_half_up(-1.0); }) == Errc::kInvalidArgument);
}

TEST_CASE("errors carry codes and backend classification") {
  const Error e(Errc::kTimeout, "slow");
  CHECK(e.code() == Errc::kTimeout);
  CHECK(std::string(e.what()).find("slow") != std::string::npos);
  CHECK(errc_name(Errc::kEmptySelection) != errc_name(Errc::kEmptySet));
  CHECK(is_backend_error(Errc::kTransport));
  CHECK(is_backend_error(Errc::kAuthMissing));
  CHECK_FALSE(is_backend_error(Errc::kConfig));
}

TEST_CASE("jsonl reader skips comments and reports line numbers") {
  testing::TempDir dir;
  const auto path = dir / "x.jsonl";
  testing::write_text(path, "# header\n{\"a\": 1}\n\n{\"a\": 2}\n[1]\n");
  std::vector<std::size_t> lines;
  try {
    jsonl::for_each_record(path, [&](std::size_t line, const nlohmann::json&) { lines.push_back(line); });
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kParseError);
    CHECK(std::string(e.what()).find("x.jsonl:5:") != std::string::npos);
  }
  CHECK(lines == std::vector<std::size_t>{2, 4});
  CHECK(code_of([&] { jsonl::read_file(dir / "missing"); }) == Errc::kIo);

  jsonl::write_file_atomic(dir / "out.txt", "hello");
  CHECK(jsonl::read_file(dir / "out.txt") == "hello");
}

TEST_CASE("parallel_for visits every index and rethrows the lowest failure") {
  std::vector<std::atomic<int>> hits(200);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](const auto& h) { return h.load() == 1; }));

  try {
    parallel_for(50, 3, [](std::size_t i) {
      if (i == 17 || i == 31) throw std::runtime_error("fail " + std::to_string(i));
    });
    FAIL("expected a rethrow");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "fail 17");
  }
}
