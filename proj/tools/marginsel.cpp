#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "marginsel/app.hpp"

namespace {

std::string key_reference() {
  std::string out = "Config keys:\n";
  for (const auto& k : marginsel::app::config_keys()) {
    out += "  " + k.name + " (default " + k.default_value.dump() + "): " + k.help + "\n";
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Demonstration selection for in-context classification", "marginsel"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer(key_reference());

  std::string config_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  std::string log_level = "warn";
  app.add_option("-c,--config", config_path, "JSON config file");
  app.add_option("--set", overrides, "override a config key (key=value), repeatable");
  app.add_option("--seed", seed, "base seed (overrides the config's seed)");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  marginsel::app::SelectRequest req;
  auto add_query = [&req](CLI::App* sub) {
    sub->add_option("--test-id", req.test_id, "example id from the test (or training) set");
    sub->add_option("--text", req.test_text, "free text to classify");
  };

  auto* assign = app.add_subcommand("assign", "run the candidate prompt over the training set");
  auto* select = app.add_subcommand("select", "print the demonstrations chosen for one example");
  add_query(select);
  auto* predict = app.add_subcommand("predict", "predict one example");
  add_query(predict);
  predict->add_option("--method", req.method, "random, knn, marginsel or marginsel:<alpha>");
  auto* eval = app.add_subcommand("eval", "run the method x shots x seeds grid");
  auto* sweep = app.add_subcommand("sweep", "evaluate marginsel over sweep.alphas");
  auto* analyze = app.add_subcommand("analyze", "candidate histogram, step-1 recall and centroid distances");
  auto* theory = app.add_subcommand("theory-check", "numerical checks of the attention and margin identities");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_mt("marginsel"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  namespace a = marginsel::app;
  try {
    a::Config cfg = config_path.empty() ? a::Config() : a::Config::load(config_path);
    for (const auto& o : overrides) cfg.apply_override(o);
    if (seed >= 0) cfg.set("seed", seed);

    if (assign->parsed()) return a::cmd_assign(cfg, std::cout);
    if (select->parsed()) return a::cmd_select(cfg, req, std::cout);
    if (predict->parsed()) return a::cmd_predict(cfg, req, std::cout);
    if (eval->parsed()) return a::cmd_eval(cfg, std::cout);
    if (sweep->parsed()) return a::cmd_sweep(cfg, std::cout);
    if (analyze->parsed()) return a::cmd_analyze(cfg, std::cout);
    if (theory->parsed()) return a::cmd_theory_check(cfg, std::cout);
  } catch (const marginsel::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return a::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return a::kExitFailure;
  }
  return a::kExitFailure;
}
