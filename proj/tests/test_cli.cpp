#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <map>

#include <nlohmann/json.hpp>

#include "marginsel/jsonl.hpp"
#include "support.hpp"

using marginsel::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(MARGINSEL_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = marginsel::jsonl::read_file(e.path());
  }
  return files;
}

std::string planted(const fs::path& dir) {
  const auto world = marginsel::testing::planted_world(3, 6, 3, 21);
  return "-c " + marginsel::testing::write_planted_files(world, dir).string();
}

// Sum of the "N new calls" counts a command reports.
long new_calls(const std::string& output) {
  long total = 0;
  for (auto pos = output.find(" new calls"); pos != std::string::npos; pos = output.find(" new calls", pos + 1)) {
    auto start = output.rfind('\n', pos);
    start = start == std::string::npos ? 0 : start + 1;
    total += std::stol(output.substr(start, pos - start));
  }
  return total;
}

nlohmann::json parse_json_output(const std::string& output) {
  const auto start = output.find('{');
  const auto end = output.rfind('}');
  REQUIRE(start != std::string::npos);
  return nlohmann::json::parse(output.substr(start, end - start + 1));
}

}  // namespace

TEST_CASE("assign writes a deterministic lookup and reuses the cache") {
  TempDir dir;
  const auto cfg = planted(dir.path());
  const auto first = run("assign " + cfg);
  CHECK(first.exit_code == 0);
  CHECK(first.output.find("18 new calls") != std::string::npos);
  const auto lookup = marginsel::jsonl::read_file(dir / "lookup.jsonl");

  const auto second = run("assign " + cfg);
  CHECK(second.exit_code == 0);
  CHECK(second.output.find("0 new calls") != std::string::npos);
  CHECK(marginsel::jsonl::read_file(dir / "lookup.jsonl") == lookup);

  fs::remove_all(dir / "cache");
  fs::remove(dir / "lookup.jsonl");
  CHECK(run("assign " + cfg).exit_code == 0);
  CHECK(marginsel::jsonl::read_file(dir / "lookup.jsonl") == lookup);
}

TEST_CASE("configuration errors exit with code 2") {
  TempDir dir;
  const auto cfg = planted(dir.path());
  const auto missing = run("assign " + cfg + " --set dataset.train=nope.jsonl");
  CHECK(missing.exit_code == 2);
  CHECK(missing.output.find("nope.jsonl") != std::string::npos);

  const auto unknown = run("assign " + cfg + " --set bogus.key=1");
  CHECK(unknown.exit_code == 2);
  CHECK(unknown.output.find("selection.alpha") != std::string::npos);

  CHECK(run("assign -c " + (dir / "absent.json").string()).exit_code == 2);
  CHECK(run("eval " + cfg + " --set eval.shots=\"[0]\"").exit_code == 2);
}

TEST_CASE("select composes demonstrations by alpha") {
  TempDir dir;
  const auto cfg = planted(dir.path());
  REQUIRE(run("assign " + cfg).exit_code == 0);

  const auto hard = run("select " + cfg + " --test-id te1-0");
  REQUIRE(hard.exit_code == 0);
  const auto h = parse_json_output(hard.output);
  CHECK(h["step1_key"] == "0110");
  CHECK(h["hard"] == 4);
  for (const auto& d : h["demos"]) CHECK(d["source"] == "hard");

  const auto knn = parse_json_output(run("select " + cfg + " --test-id te1-0 --set selection.alpha=0").output);
  CHECK(knn["knn"] == 4);

  const auto half = parse_json_output(run("select " + cfg + " --test-id te1-0 --set selection.alpha=0.5").output);
  CHECK(half["hard"] == 2);
  CHECK(half["knn"] == 2);

  const auto empty = run("select " + cfg + " --text \"nothing relevant\"");
  CHECK(empty.exit_code == 4);
  CHECK(empty.output.find("fallback") != std::string::npos);

  CHECK(run("select " + cfg + " --test-id te1-0 --seed 5").output ==
        run("select " + cfg + " --test-id te1-0 --seed 5").output);
}

TEST_CASE("eval, sweep, analyze and theory-check write their artifacts") {
  TempDir dir;
  const auto cfg = planted(dir.path());
  REQUIRE(run("assign " + cfg).exit_code == 0);
  const auto eval = run("eval " + cfg);
  REQUIRE(eval.exit_code == 0);
  const auto report = nlohmann::json::parse(marginsel::jsonl::read_file(dir / "runs/eval/report.json"));
  CHECK(report["cells"].size() == 2 * 1 * 3);
  CHECK(fs::exists(dir / "runs/eval/report.csv"));

  CHECK(run("sweep " + cfg).exit_code == 0);
  const auto sweep = nlohmann::json::parse(marginsel::jsonl::read_file(dir / "runs/sweep/sweep.json"));
  CHECK(sweep["rows"].size() == 3);

  CHECK(run("analyze " + cfg).exit_code == 0);
  for (const char* name : {"candidate_histogram.json", "step1_recall.json", "centroid_distances.json",
                           "projection_input.jsonl"}) {
    CHECK(fs::exists(dir / "runs/analysis" / name));
  }

  const auto theory = run("theory-check " + cfg);
  CHECK(theory.exit_code == 0);
  const auto t = nlohmann::json::parse(marginsel::jsonl::read_file(dir / "runs/theory.json"));
  CHECK(t["passed"] == true);

  const auto predict = run("predict " + cfg + " --test-id te2-1 --method marginsel");
  CHECK(predict.exit_code == 0);
  CHECK(parse_json_output(predict.output)["predicted"] == "c2");
}

TEST_CASE("the pipeline is byte-identical across runs and directories") {
  const std::string steps[] = {"assign", "select --test-id te0-1", "eval", "analyze"};
  TempDir a;
  TempDir b;
  const auto cfg_a = planted(a.path());
  const auto cfg_b = planted(b.path());
  std::string out_a;
  for (const auto& step : steps) {
    const auto r = run(step + " " + cfg_a + " --seed 9");
    REQUIRE(r.exit_code == 0);
    out_a += r.output;
  }
  const auto files_a = snapshot(a.path());

  std::string rerun;
  for (const auto& step : steps) {
    const auto r = run(step + " " + cfg_a + " --seed 9");
    REQUIRE(r.exit_code == 0);
    CHECK(new_calls(r.output) == 0);
    rerun += r.output;
  }
  CHECK(snapshot(a.path()) == files_a);

  for (const auto& step : steps) REQUIRE(run(step + " " + cfg_b + " --seed 9").exit_code == 0);
  CHECK(snapshot(b.path()) == files_a);
}
