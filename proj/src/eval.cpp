#include "marginsel/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <tuple>

#include <boost/math/distributions/students_t.hpp>
#include <spdlog/spdlog.h>

#include "marginsel/error.hpp"
#include "marginsel/jsonl.hpp"
#include "marginsel/parallel.hpp"
#include "marginsel/random.hpp"

namespace marginsel {
namespace {

constexpr std::string_view kRetryInstruction =
    "\n\nRespond with exactly one label from the list, enclosed in <label></label> tags.";

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double sample_stdev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::vector<std::string> train_ids(const Dataset& train) {
  std::vector<std::string> ids;
  ids.reserve(train.size());
  for (const auto& ex : train.examples()) ids.push_back(ex.id);
  return ids;
}

DemoSet random_demos(const Example& test, std::size_t shots, std::uint64_t seed, const Dataset& train) {
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "random:" + test.id));
  const std::size_t take = std::min(shots, order.size());
  DemoSet out;
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(order[i], order[i + rng.uniform_index(order.size() - i)]);
    out.entries.push_back(DemoEntry{train[order[i]], DemoSource::kRandom});
  }
  return out;
}

DemoSet knn_demos(const Example& test, std::size_t shots, const PredictionContext& ctx) {
  if (ctx.embeddings == nullptr) throw Error(Errc::kConfig, "kNN demonstrations need an embeddings file");
  DemoSet out;
  for (const auto& id : knn_retrieve(*ctx.embeddings, test.id, shots, train_ids(ctx.train))) {
    out.entries.push_back(DemoEntry{*ctx.train.find(id), DemoSource::kKnn});
  }
  return out;
}

std::string reply_label(const ChatExchange& ex, const LabelSpace& space) {
  return space.label(parse_single_label(ex.reply, space));
}

bool is_parse_failure(const Error& e) {
  return e.code() == Errc::kNoTag || e.code() == Errc::kEmptySet || e.code() == Errc::kAmbiguous;
}

std::string cell_key(std::string_view method, std::size_t shots, std::uint64_t seed) {
  return std::string(method) + "|" + std::to_string(shots) + "|" + std::to_string(seed);
}

// Existing per-example records, grouped by cell.
class RecordLog {
 public:
  RecordLog(std::optional<std::filesystem::path> path, const LabelSpace& space) : path_(std::move(path)) {
    if (!path_ || !std::filesystem::exists(*path_)) return;
    jsonl::for_each_record(*path_, [&](std::size_t, const nlohmann::json& rec) {
      PredictionRecord r = record_from_json(rec, space);
      auto& cell = by_cell_[cell_key(r.method, r.shots, r.seed)];
      const std::string id = r.id;
      cell.insert_or_assign(id, std::move(r));
    });
  }

  const PredictionRecord* find(const std::string& cell, const std::string& id) const {
    auto it = by_cell_.find(cell);
    if (it == by_cell_.end()) return nullptr;
    auto jt = it->second.find(id);
    return jt == it->second.end() ? nullptr : &jt->second;
  }

  void for_each(const std::function<void(const PredictionRecord&)>& fn) const {
    for (const auto& [cell, records] : by_cell_) {
      for (const auto& [id, r] : records) fn(r);
    }
  }

  void append(std::span<const PredictionRecord> records, const LabelSpace& space) {
    if (!path_ || records.empty()) return;
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    std::ofstream out(*path_, std::ios::app | std::ios::binary);
    if (!out) throw Error(Errc::kIo, "cannot append to " + path_->string());
    for (const auto& r : records) out << record_to_json(r, space).dump() << '\n';
    if (!out) throw Error(Errc::kIo, "write failed for " + path_->string());
  }

 private:
  std::optional<std::filesystem::path> path_;
  std::map<std::string, std::map<std::string, PredictionRecord>> by_cell_;
};

// Test-side candidate sets, computed once per example.
class Step1Memo {
 public:
  Step1Memo(ChatBackend& backend, const PromptTemplate& tmpl, const LabelSpace& space)
      : backend_(backend), tmpl_(tmpl), space_(space) {}

  CandidateSet get(const Example& ex) {
    {
      std::lock_guard lock(mu_);
      auto it = memo_.find(ex.id);
      if (it != memo_.end()) return it->second;
    }
    CandidateSet cs = assign_candidates(backend_, tmpl_, ex.text, space_);
    put(ex.id, cs);
    return cs;
  }

  void put(const std::string& id, const CandidateSet& cs) {
    std::lock_guard lock(mu_);
    memo_.insert_or_assign(id, cs);
  }

 private:
  ChatBackend& backend_;
  const PromptTemplate& tmpl_;
  const LabelSpace& space_;
  std::mutex mu_;
  std::map<std::string, CandidateSet> memo_;
};

nlohmann::ordered_json paired_to_json(const std::optional<PairedTest>& t) {
  if (!t) return nullptr;
  nlohmann::ordered_json j;
  j["mean_difference"] = t->mean_difference;
  j["t_statistic"] = t->t_statistic ? nlohmann::ordered_json(*t->t_statistic) : nlohmann::ordered_json(nullptr);
  j["p_value"] = t->p_value;
  j["significant"] = t->significant;
  return j;
}

std::vector<CellSummary> summarize(const std::vector<CellResult>& cells) {
  // (method, shots) in first-seen order
  std::vector<std::pair<std::string, std::size_t>> keys;
  std::map<std::pair<std::string, std::size_t>, std::map<std::uint64_t, double>> scores;
  for (const auto& c : cells) {
    auto key = std::make_pair(c.method.name(), c.shots);
    if (!scores.contains(key)) keys.push_back(key);
    auto& by_seed = scores[key];
    if (!c.error) by_seed[c.seed] = c.macro_f1;
  }

  std::vector<CellSummary> out;
  for (const auto& key : keys) {
    const auto& by_seed = scores[key];
    std::vector<double> values;
    for (const auto& [seed, f1] : by_seed) values.push_back(f1);
    CellSummary s;
    s.method = key.first;
    s.shots = key.second;
    s.seeds = values.size();
    s.mean = mean_of(values);
    s.stdev = sample_stdev(values);

    auto rand_it = scores.find({"random", key.second});
    if (key.first != "random" && rand_it != scores.end()) {
      std::vector<double> a;
      std::vector<double> b;
      for (const auto& [seed, f1] : by_seed) {
        auto it = rand_it->second.find(seed);
        if (it == rand_it->second.end()) continue;
        a.push_back(f1);
        b.push_back(it->second);
      }
      s.vs_random = paired_t_test(a, b);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

double macro_f1(std::span<const LabelPair> pairs, const LabelSpace& space, Averaging averaging) {
  if (pairs.empty()) throw Error(Errc::kEmptyInput, "macro_f1 needs at least one pair");
  const std::size_t c = space.size();
  std::vector<double> tp(c, 0.0);
  std::vector<double> gold_count(c, 0.0);
  std::vector<double> pred_count(c, 0.0);
  for (const auto& p : pairs) {
    const std::size_t g = space.require_index(p.gold);
    gold_count[g] += 1.0;
    if (p.predicted == kInvalidLabel) continue;
    const std::size_t y = space.require_index(p.predicted);
    pred_count[y] += 1.0;
    if (y == g) tp[g] += 1.0;
  }

  double total = 0.0;
  double weight_sum = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    const double denom = gold_count[k] + pred_count[k];
    const double f1 = denom == 0.0 ? 0.0 : 2.0 * tp[k] / denom;
    const double w = averaging == Averaging::kMacro ? 1.0 : gold_count[k];
    total += w * f1;
    weight_sum += w;
  }
  return weight_sum == 0.0 ? 0.0 : total / weight_sum;
}

std::string format_alpha(double alpha) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << alpha;
  return os.str();
}

std::string MethodSpec::name() const {
  switch (kind) {
    case MethodKind::kRandom:
      return "random";
    case MethodKind::kKnn:
      return "knn";
    case MethodKind::kMarginSel:
      return "marginsel(alpha=" + format_alpha(alpha) + ")";
  }
  return "unknown";
}

MethodSpec MethodSpec::parse(std::string_view text) {
  if (text == "random") return {MethodKind::kRandom, 1.0};
  if (text == "knn") return {MethodKind::kKnn, 1.0};
  if (text == "marginsel") return {MethodKind::kMarginSel, 1.0};

  std::string_view rest;
  if (text.starts_with("marginsel:")) {
    rest = text.substr(10);
  } else if (text.starts_with("marginsel(alpha=") && text.ends_with(")")) {
    rest = text.substr(16, text.size() - 17);
  } else {
    throw Error(Errc::kConfig, "unknown method '" + std::string(text) + "' (expected random, knn, marginsel[:alpha])");
  }
  std::size_t used = 0;
  double alpha = 0.0;
  try {
    alpha = std::stod(std::string(rest), &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != rest.size() || rest.empty() || !(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(Errc::kConfig, "bad alpha in method '" + std::string(text) + "'");
  }
  return {MethodKind::kMarginSel, alpha};
}

nlohmann::ordered_json record_to_json(const PredictionRecord& r, const LabelSpace& space) {
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["shots"] = r.shots;
  j["seed"] = r.seed;
  j["id"] = r.id;
  j["gold"] = r.gold;
  j["predicted"] = r.predicted;
  j["demo_ids"] = r.demo_ids;
  j["demo_sources"] = r.demo_sources;
  if (r.step1) {
    j["step1"] = candidate_labels(*r.step1, space);
    j["step1_key"] = candidate_key(*r.step1);
  } else {
    j["step1"] = nullptr;
    j["step1_key"] = nullptr;
  }
  j["fallback"] = r.fallback;
  j["retried"] = r.retried;
  return j;
}

PredictionRecord record_from_json(const nlohmann::json& j, const LabelSpace& space) {
  try {
    PredictionRecord r;
    r.method = j.at("method").get<std::string>();
    r.shots = j.at("shots").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.id = j.at("id").get<std::string>();
    r.gold = j.at("gold").get<std::string>();
    r.predicted = j.at("predicted").get<std::string>();
    r.demo_ids = j.at("demo_ids").get<std::vector<std::string>>();
    r.demo_sources = j.at("demo_sources").get<std::vector<std::string>>();
    if (j.contains("step1_key") && j["step1_key"].is_string()) {
      r.step1 = candidate_set_from_key(j["step1_key"].get<std::string>());
      if (r.step1->width() != space.size()) throw Error(Errc::kParseError, "step1_key width differs from the label space");
    }
    r.fallback = j.value("fallback", false);
    r.retried = j.value("retried", false);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kParseError, std::string("bad prediction record: ") + e.what());
  }
}

DemoSet select_for_method(const Example& test, const MethodSpec& method, std::size_t shots, std::uint64_t seed,
                          const PredictionContext& ctx, const CandidateSet* step1, bool* fell_back) {
  if (fell_back != nullptr) *fell_back = false;
  switch (method.kind) {
    case MethodKind::kRandom:
      return random_demos(test, shots, seed, ctx.train);
    case MethodKind::kKnn:
      return knn_demos(test, shots, ctx);
    case MethodKind::kMarginSel:
      break;
  }
  if (step1 == nullptr) throw Error(Errc::kInvalidArgument, "marginsel needs the test candidate set");
  if (ctx.lookup.empty()) throw Error(Errc::kEmptyLookup, "marginsel needs a lookup table");
  KnnQuery query{ctx.embeddings, test.id, {}};
  const SelectionConfig cfg{method.alpha, shots, derive_seed(seed, test.id)};
  try {
    return select_demos(ctx.lookup, *step1, &query, ctx.rho, cfg);
  } catch (const Error& e) {
    if (e.code() != Errc::kEmptySelection) throw;
  }
  if (fell_back != nullptr) *fell_back = true;
  return ctx.fallback == FallbackPolicy::kKnn ? knn_demos(test, shots, ctx) : random_demos(test, shots, seed, ctx.train);
}

PredictionRecord predict_one(const Example& test, const MethodSpec& method, std::size_t shots, std::uint64_t seed,
                             const PredictionContext& ctx, const std::optional<CandidateSet>& step1) {
  const LabelSpace& space = ctx.train.space();
  PredictionRecord rec;
  rec.method = method.name();
  rec.shots = shots;
  rec.seed = seed;
  rec.id = test.id;
  rec.gold = test.gold;

  if (method.kind == MethodKind::kMarginSel) {
    rec.step1 = step1 ? *step1 : assign_candidates(ctx.backend, ctx.templates.candidate, test.text, space);
  }
  const DemoSet demos =
      select_for_method(test, method, shots, seed, ctx, rec.step1 ? &*rec.step1 : nullptr, &rec.fallback);
  for (const auto& e : demos.entries) {
    rec.demo_ids.push_back(e.example.id);
    rec.demo_sources.emplace_back(demo_source_name(e.source));
  }

  const RenderedPrompt prompt = render_final_prompt(ctx.templates.final_prediction, demos.block(), test.text, space);
  try {
    rec.predicted = reply_label(ctx.backend.chat(chat_request(prompt.system, prompt.user)), space);
    return rec;
  } catch (const Error& e) {
    if (!is_parse_failure(e)) throw;
    spdlog::debug("final reply for '{}' unparseable ({}); retrying once", test.id, e.what());
  }
  rec.retried = true;
  try {
    rec.predicted =
        reply_label(ctx.backend.chat(chat_request(prompt.system, prompt.user + std::string(kRetryInstruction))), space);
  } catch (const Error& e) {
    if (!is_parse_failure(e)) throw;
    spdlog::warn("final reply for '{}' still unparseable ({}); recording {}", test.id, e.what(), kInvalidLabel);
    rec.predicted = std::string(kInvalidLabel);
  }
  return rec;
}

void RunConfig::validate() const {
  if (methods.empty()) throw Error(Errc::kConfig, "at least one method is required");
  if (shots.empty()) throw Error(Errc::kConfig, "at least one shot count is required");
  for (std::size_t s : shots) {
    if (s == 0) throw Error(Errc::kConfig, "shot counts must be positive");
  }
  if (seeds.empty()) throw Error(Errc::kConfig, "at least one seed is required");
  if (max_in_flight == 0) throw Error(Errc::kConfig, "max_in_flight must be >= 1");
}

std::optional<PairedTest> paired_t_test(std::span<const double> a, std::span<const double> b, double level) {
  if (a.size() != b.size()) throw Error(Errc::kInvalidArgument, "paired samples differ in length");
  if (a.size() < 2) return std::nullopt;
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  PairedTest out;
  out.mean_difference = mean_of(d);
  const double sd = sample_stdev(d);
  const double n = static_cast<double>(d.size());
  if (sd == 0.0) {
    out.p_value = out.mean_difference == 0.0 ? 1.0 : 0.0;
  } else {
    const double t = out.mean_difference / (sd / std::sqrt(n));
    boost::math::students_t dist(n - 1.0);
    out.t_statistic = t;
    out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
  }
  out.significant = out.p_value < level;
  return out;
}

bool RunReport::has_errors() const {
  return std::any_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.error.has_value(); });
}

const CellResult* RunReport::find(std::string_view method, std::size_t shots, std::uint64_t seed) const {
  for (const auto& c : cells) {
    if (c.method.name() == method && c.shots == shots && c.seed == seed) return &c;
  }
  return nullptr;
}

RunReport run_experiment(const RunConfig& cfg, const ExperimentInputs& in) {
  cfg.validate();
  if (in.test.empty()) throw Error(Errc::kEmptyDataset, "test set is empty");
  const LabelSpace& space = in.train.space();
  if (!(in.test.space() == space)) throw Error(Errc::kInvalidArgument, "train and test label spaces differ");

  const LabelFrequency rho = label_frequency(in.train);
  const PredictionContext ctx{in.train, in.lookup, in.embeddings, rho, in.templates, in.backend, cfg.fallback};
  RecordLog log(cfg.records_path, space);
  Step1Memo step1(in.backend, in.templates.candidate, space);
  log.for_each([&](const PredictionRecord& r) {
    if (r.step1) step1.put(r.id, *r.step1);
  });

  RunReport report;
  for (const auto& method : cfg.methods) {
    for (std::size_t shots : cfg.shots) {
      for (std::uint64_t seed : cfg.seeds) {
        CellResult cell;
        cell.method = method;
        cell.shots = shots;
        cell.seed = seed;
        const std::string key = cell_key(method.name(), shots, seed);
        const auto& tests = in.test.examples();

        std::vector<std::optional<PredictionRecord>> slots(tests.size());
        std::vector<std::size_t> todo;
        for (std::size_t i = 0; i < tests.size(); ++i) {
          if (const PredictionRecord* r = log.find(key, tests[i].id)) {
            slots[i] = *r;
          } else {
            todo.push_back(i);
          }
        }

        // Failures are kept per example so that finished predictions still
        // reach the log and a rerun only redoes the rest.
        std::vector<std::optional<PredictionRecord>> done(todo.size());
        std::vector<std::optional<std::string>> failed(todo.size());
        parallel_for(todo.size(), cfg.max_in_flight, [&](std::size_t j) {
          const Example& ex = tests[todo[j]];
          try {
            std::optional<CandidateSet> cs;
            if (method.kind == MethodKind::kMarginSel) cs = step1.get(ex);
            done[j] = predict_one(ex, method, shots, seed, ctx, cs);
          } catch (const Error& e) {
            failed[j] = e.what();
          }
        });
        std::vector<PredictionRecord> fresh;
        for (std::size_t j = 0; j < todo.size(); ++j) {
          if (done[j]) {
            slots[todo[j]] = done[j];
            fresh.push_back(*done[j]);
          } else if (!cell.error) {
            cell.error = *failed[j];
          }
        }
        if (cell.error) spdlog::error("cell {} failed: {}", key, *cell.error);
        log.append(fresh, space);
        for (const auto& r : fresh) {
          if (r.step1) step1.put(r.id, *r.step1);
        }

        for (auto& s : slots) {
          if (s) cell.records.push_back(std::move(*s));
        }
        if (!cell.error) {
          std::vector<LabelPair> pairs;
          pairs.reserve(cell.records.size());
          for (const auto& r : cell.records) {
            pairs.push_back({r.gold, r.predicted});
            cell.invalid += r.predicted == kInvalidLabel;
            cell.fallbacks += r.fallback;
          }
          cell.macro_f1 = macro_f1(pairs, space, cfg.averaging);
        }
        report.cells.push_back(std::move(cell));
      }
    }
  }
  report.summary = summarize(report.cells);
  return report;
}

nlohmann::ordered_json report_to_json(const RunReport& report, const LabelSpace& space) {
  nlohmann::ordered_json j;
  j["labels"] = space.labels();
  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  for (const auto& s : report.summary) {
    nlohmann::ordered_json e;
    e["method"] = s.method;
    e["shots"] = s.shots;
    e["seeds"] = s.seeds;
    e["mean_macro_f1"] = s.mean;
    e["stdev_macro_f1"] = s.stdev;
    e["vs_random"] = paired_to_json(s.vs_random);
    summary.push_back(std::move(e));
  }
  j["summary"] = std::move(summary);

  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& c : report.cells) {
    nlohmann::ordered_json e;
    e["method"] = c.method.name();
    e["shots"] = c.shots;
    e["seed"] = c.seed;
    e["macro_f1"] = c.error ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(c.macro_f1);
    e["invalid"] = c.invalid;
    e["fallbacks"] = c.fallbacks;
    e["error"] = c.error ? nlohmann::ordered_json(*c.error) : nlohmann::ordered_json(nullptr);
    nlohmann::ordered_json records = nlohmann::ordered_json::array();
    for (const auto& r : c.records) records.push_back(record_to_json(r, space));
    e["records"] = std::move(records);
    cells.push_back(std::move(e));
  }
  j["cells"] = std::move(cells);
  return j;
}

RunReport report_from_json(const nlohmann::json& j, const LabelSpace& space) {
  try {
    RunReport report;
    for (const auto& e : j.at("cells")) {
      CellResult c;
      c.method = MethodSpec::parse(e.at("method").get<std::string>());
      c.shots = e.at("shots").get<std::size_t>();
      c.seed = e.at("seed").get<std::uint64_t>();
      if (e.at("error").is_string()) c.error = e["error"].get<std::string>();
      if (e.at("macro_f1").is_number()) c.macro_f1 = e["macro_f1"].get<double>();
      c.invalid = e.value("invalid", std::size_t{0});
      c.fallbacks = e.value("fallbacks", std::size_t{0});
      for (const auto& r : e.at("records")) c.records.push_back(record_from_json(r, space));
      report.cells.push_back(std::move(c));
    }
    report.summary = summarize(report.cells);
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kParseError, std::string("bad run report: ") + e.what());
  }
}

std::string report_to_csv(const RunReport& report) {
  std::string out = "method,shot,seed,macro_f1\n";
  for (const auto& c : report.cells) {
    out += c.method.name() + "," + std::to_string(c.shots) + "," + std::to_string(c.seed) + ",";
    out += c.error ? std::string() : nlohmann::json(c.macro_f1).dump();
    out += "\n";
  }
  return out;
}

SweepResult alpha_sweep(const RunConfig& base, std::span<const double> alphas, const ExperimentInputs& inputs) {
  if (alphas.empty()) throw Error(Errc::kConfig, "alpha sweep needs at least one alpha");
  SweepResult out;
  for (double alpha : alphas) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::kConfig, "alpha must lie in [0, 1]");
    RunConfig cfg = base;
    cfg.methods = {MethodSpec{MethodKind::kMarginSel, alpha}};
    RunReport report = run_experiment(cfg, inputs);

    SweepRow row;
    row.alpha = alpha;
    std::vector<double> all;
    for (std::size_t shots : cfg.shots) {
      std::vector<double> vals;
      for (const auto& c : report.cells) {
        if (c.shots == shots && !c.error) vals.push_back(c.macro_f1);
      }
      row.per_shot.emplace_back(shots, mean_of(vals));
      all.insert(all.end(), vals.begin(), vals.end());
    }
    row.mean_f1 = mean_of(all);
    out.rows.push_back(std::move(row));
    out.reports.push_back(std::move(report));
  }
  return out;
}

nlohmann::ordered_json sweep_to_json(const SweepResult& sweep) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : sweep.rows) {
    nlohmann::ordered_json e;
    e["alpha"] = r.alpha;
    e["mean_macro_f1"] = r.mean_f1;
    nlohmann::ordered_json per_shot = nlohmann::ordered_json::object();
    for (const auto& [shots, f1] : r.per_shot) per_shot[std::to_string(shots)] = f1;
    e["per_shot"] = std::move(per_shot);
    rows.push_back(std::move(e));
  }
  nlohmann::ordered_json j;
  j["rows"] = std::move(rows);
  return j;
}

std::string sweep_to_csv(const SweepResult& sweep) {
  std::string out = "alpha,mean_macro_f1\n";
  for (const auto& r : sweep.rows) {
    out += format_alpha(r.alpha) + "," + nlohmann::json(r.mean_f1).dump() + "\n";
  }
  return out;
}

}  // namespace marginsel
