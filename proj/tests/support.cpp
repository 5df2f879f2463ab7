#include "support.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <stdlib.h>

#include <nlohmann/json.hpp>

namespace marginsel::testing {
namespace {

constexpr const char* kFiller[] = {"river", "lamp", "quiet", "orange", "table", "storm", "paper", "glass"};

Example make_example(const std::string& id, std::size_t cls, Rng& rng) {
  std::string text = "note " + id + " mentions kw" + std::to_string(cls) + " and " + kFiller[rng.uniform_index(8)];
  return Example{id, text, "c" + std::to_string(cls)};
}

}  // namespace

TempDir::TempDir() {
  std::string tmpl = (std::filesystem::temp_directory_path() / "marginsel-test-XXXXXX").string();
  if (mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

LabelSpace letters(std::size_t count) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < count; ++i) names.push_back(std::string(1, static_cast<char>('a' + i)));
  return LabelSpace(names);
}

TemplateSet generic_templates() {
  return TemplateSet{
      PromptTemplate{PromptKind::kCandidateAssignment, "You assign every plausible label to a text.",
                     "Labels:\n{labels}\n\nText: '{text}'\nList all plausible labels as <label>l1,l2</label>."},
      PromptTemplate{PromptKind::kFinalPrediction, "You classify texts into exactly one label.",
                     "Labels:\n{labels}\n\nText: '{text}'\nAnswer with one label as <label>name</label>."},
  };
}

PlantedWorld planted_world(std::size_t classes, std::size_t train_per_class, std::size_t test_per_class,
                           std::uint64_t seed) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < classes; ++k) names.push_back("c" + std::to_string(k));
  names.push_back("other");
  LabelSpace space(names);

  MockRule rule;
  for (std::size_t k = 0; k < classes; ++k) rule.keywords.push_back({"kw" + std::to_string(k), {names[k], names[k + 1]}});
  rule.default_label = "other";

  Rng rng(seed);
  std::vector<Example> train;
  std::vector<Example> test;
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t i = 0; i < train_per_class; ++i) {
      train.push_back(make_example("tr" + std::to_string(k) + "-" + std::to_string(i), k, rng));
    }
    for (std::size_t i = 0; i < test_per_class; ++i) {
      test.push_back(make_example("te" + std::to_string(k) + "-" + std::to_string(i), k, rng));
    }
  }

  EmbeddingStore store;
  for (const auto* set : {&train, &test}) {
    for (const auto& ex : *set) {
      std::vector<double> v(8);
      for (double& x : v) x = 2.0 * rng.uniform01() - 1.0;
      store.add(ex.id, v);
    }
  }
  return PlantedWorld{space, rule, generic_templates(), Dataset(space, train), Dataset(space, test), std::move(store)};
}

std::filesystem::path write_planted_files(const PlantedWorld& world, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_dataset(world.train, dir / "train.jsonl");
  save_dataset(world.test, dir / "test.jsonl");
  save_embeddings(world.embeddings, dir / "embeddings.jsonl");
  write_text(dir / "prompts/candidate_system.txt", world.templates.candidate.system);
  write_text(dir / "prompts/candidate_user.txt", world.templates.candidate.user);
  write_text(dir / "prompts/final_system.txt", world.templates.final_prediction.system);
  write_text(dir / "prompts/final_user.txt", world.templates.final_prediction.user);

  nlohmann::json keywords = nlohmann::json::object();
  for (const auto& [kw, labels] : world.rule.keywords) keywords[kw] = labels;
  nlohmann::json cfg = {
      {"dataset", {{"labels", world.space.labels()}, {"train", "train.jsonl"}, {"test", "test.jsonl"}}},
      {"templates",
       {{"candidate_system", "prompts/candidate_system.txt"},
        {"candidate_user", "prompts/candidate_user.txt"},
        {"final_system", "prompts/final_system.txt"},
        {"final_user", "prompts/final_user.txt"}}},
      {"backend", {{"kind", "mock"}, {"cache_dir", "cache"}}},
      {"mock", {{"keywords", keywords}, {"default_label", world.rule.default_label}, {"final_mode", "planted"}}},
      {"embeddings", {{"path", "embeddings.jsonl"}}},
      {"lookup", {{"path", "lookup.jsonl"}}},
      {"selection", {{"alpha", 1.0}, {"n", 4}}},
      {"eval", {{"methods", {"random", "marginsel"}}, {"shots", {4}}, {"output_dir", "runs/eval"}}},
      {"sweep", {{"alphas", {0.0, 0.5, 1.0}}, {"output_dir", "runs/sweep"}}},
      {"analyze", {{"output_dir", "runs/analysis"}}},
      {"theory", {{"identity_instances", 50}, {"kkt_instances", 20}, {"output", "runs/theory.json"}}},
  };
  const auto path = dir / "config.json";
  write_text(path, cfg.dump(2) + "\n");
  return path;
}

std::vector<LookupEntry> random_lookup(Rng& rng, const LabelSpace& space, std::size_t n, std::size_t distinct_sets) {
  const std::size_t c = space.size();
  std::vector<CandidateSet> pool;
  for (std::size_t i = 0; i < distinct_sets; ++i) {
    CandidateSet cs(c);
    while (cs.is_empty()) {
      for (std::size_t k = 0; k < c; ++k) {
        if (rng.uniform01() < 0.4) cs.set(k);
      }
    }
    pool.push_back(cs);
  }
  std::vector<LookupEntry> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(LookupEntry{Example{"e" + std::to_string(i), "text " + std::to_string(i),
                                      space.label(rng.uniform_index(c))},
                              pool[rng.uniform_index(pool.size())]});
  }
  return out;
}

LabelFrequency lookup_frequency(const std::vector<LookupEntry>& lookup, const LabelSpace& space) {
  std::vector<double> p(space.size(), 0.0);
  for (const auto& e : lookup) p[space.require_index(e.example.gold)] += 1.0;
  for (double& x : p) x /= static_cast<double>(lookup.size());
  return LabelFrequency(space, p);
}

namespace {

void enumerate_draws(const std::vector<double>& weights, std::size_t k, std::vector<bool>& used,
                     std::vector<std::size_t>& prefix, double prob,
                     std::map<std::vector<std::size_t>, double>& out) {
  if (prefix.size() == k) {
    out[prefix] += prob;
    return;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!used[i]) total += weights[i];
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    prefix.push_back(i);
    enumerate_draws(weights, k, used, prefix, prob * weights[i] / total, out);
    prefix.pop_back();
    used[i] = false;
  }
}

}  // namespace

std::map<std::vector<std::size_t>, double> exact_draw_distribution(const std::vector<double>& weights, std::size_t k) {
  std::map<std::vector<std::size_t>, double> out;
  std::vector<bool> used(weights.size(), false);
  std::vector<std::size_t> prefix;
  enumerate_draws(weights, std::min(k, weights.size()), used, prefix, 1.0, out);
  return out;
}

std::map<std::vector<std::size_t>, double> unordered(const std::map<std::vector<std::size_t>, double>& ordered) {
  std::map<std::vector<std::size_t>, double> out;
  for (const auto& [key, p] : ordered) {
    auto seq = key;
    std::sort(seq.begin(), seq.end());
    out[seq] += p;
  }
  return out;
}

double confusion_f1(const std::vector<LabelPair>& pairs, const LabelSpace& space, bool weighted) {
  const std::size_t c = space.size();
  std::vector<std::vector<double>> m(c, std::vector<double>(c + 1, 0.0));
  for (const auto& p : pairs) {
    const auto g = *space.index_of(p.gold);
    const auto idx = space.index_of(p.predicted);
    m[g][idx ? *idx : c] += 1.0;
  }
  double total = 0.0;
  double support_sum = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    const double tp = m[k][k];
    double row = 0.0;
    double col = 0.0;
    for (std::size_t j = 0; j <= c; ++j) row += m[k][j];
    for (std::size_t i = 0; i < c; ++i) col += m[i][k];
    const double precision = col > 0 ? tp / col : 0.0;
    const double recall = row > 0 ? tp / row : 0.0;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    total += weighted ? f1 * row : f1;
    support_sum += row;
  }
  return weighted ? total / support_sum : total / static_cast<double>(c);
}

Eigen::VectorXd linear_by_loop(const theory::AttentionParams& p, const theory::PromptTensors& t) {
  const Eigen::VectorXd query = p.w_q * t.q;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p.w_v.rows());
  for (const Eigen::MatrixXd* rows : {&t.xp, &t.yp, &t.x}) {
    for (Eigen::Index i = 0; i < rows->rows(); ++i) {
      const Eigen::VectorXd h = rows->row(i).transpose();
      out += (p.w_v * h) * (p.w_k * h).dot(query);
    }
  }
  return out;
}

}  // namespace marginsel::testing
