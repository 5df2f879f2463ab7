#include "marginsel/app.hpp"

#include <algorithm>
#include <memory>
#include <ostream>

#include <spdlog/spdlog.h>

#include "marginsel/analysis.hpp"
#include "marginsel/chat.hpp"
#include "marginsel/dataset.hpp"
#include "marginsel/eval.hpp"
#include "marginsel/jsonl.hpp"
#include "marginsel/knn.hpp"
#include "marginsel/mock.hpp"
#include "marginsel/prompting.hpp"
#include "marginsel/selection.hpp"
#include "marginsel/theory.hpp"

namespace marginsel::app {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

std::vector<KeyInfo> make_keys() {
  return {
      {"seed", 0, "base seed for splits, sampling and the theory sweep"},
      {"dataset.labels", json::array(), "label names in declaration order (default: the template preset's)"},
      {"dataset.path", "", "labeled JSON-lines file to split into train and test"},
      {"dataset.test_fraction", 0.2, "test share for dataset.path"},
      {"dataset.train", "", "pre-split training file (overrides dataset.path)"},
      {"dataset.test", "", "pre-split test file"},
      {"templates.preset", "sst5", "built-in prompt preset: sst5, cogdist or medabs"},
      {"templates.candidate_system", "", "candidate-assignment system prompt file"},
      {"templates.candidate_user", "", "candidate-assignment user prompt file"},
      {"templates.final_system", "", "final-prediction system prompt file"},
      {"templates.final_user", "", "final-prediction user prompt file"},
      {"backend.kind", "http", "http or mock"},
      {"backend.base_url", "", "chat-completion endpoint root, e.g. http://localhost:8000/v1"},
      {"backend.model", "", "model name sent with each request"},
      {"backend.temperature", 0.0, "sampling temperature"},
      {"backend.max_tokens", 256, "completion token cap"},
      {"backend.max_retries", 3, "retries for connection errors, timeouts and 5xx (at most 10)"},
      {"backend.timeout_ms", 60000, "per-request timeout"},
      {"backend.initial_backoff_ms", 500, "first retry delay"},
      {"backend.max_backoff_ms", 8000, "retry delay cap"},
      {"backend.api_key_env", "", "environment variable holding the bearer token"},
      {"backend.max_in_flight", 4, "concurrent backend requests"},
      {"backend.cache_dir", ".marginsel-cache", "response cache directory"},
      {"mock.keywords", json::object(), "mock backend: keyword -> list of labels"},
      {"mock.default_label", "", "mock backend: label when no keyword matches"},
      {"mock.final_mode", "majority", "mock backend final answers: keyword, majority or planted"},
      {"embeddings.path", "", "JSON-lines {id, vector} covering train and test ids"},
      {"embeddings.model", "", "embedding model; fetched from {base_url}/embeddings when the file is missing"},
      {"lookup.path", "lookup.jsonl", "candidate-label lookup table"},
      {"selection.alpha", 1.0, "share of hard examples"},
      {"selection.n", 4, "demonstrations per prompt"},
      {"eval.methods", json::array({"random", "marginsel"}), "random, knn, marginsel or marginsel:<alpha>"},
      {"eval.shots", json::array({2, 4, 6, 8, 10}), "shot counts"},
      {"eval.seeds", nullptr, "run seeds (default: seed + 1, seed + 2, seed + 3)"},
      {"eval.fallback", "knn", "when no training example matches at alpha = 1: knn or random"},
      {"eval.averaging", "macro", "macro or weighted F1"},
      {"eval.output_dir", "runs/eval", "report.json, report.csv and records.jsonl"},
      {"sweep.alphas", json::array({0.0, 0.25, 0.5, 0.75, 1.0}), "alpha values for the sweep"},
      {"sweep.output_dir", "runs/sweep", "sweep.json, sweep.csv and records.jsonl"},
      {"analyze.report", "", "run report to analyze (default: eval.output_dir/report.json)"},
      {"analyze.vectors", "", "id-aligned vectors for centroid distances (default: embeddings.path)"},
      {"analyze.metric", "euclidean", "euclidean or cosine_distance"},
      {"analyze.output_dir", "runs/analysis", "analysis outputs"},
      {"theory.identity_instances", 1000, "random instances for the attention identities"},
      {"theory.kkt_instances", 100, "random separable instances for the margin solver"},
      {"theory.output", "runs/theory.json", "theory-check report"},
  };
}

bool same_kind(const json& def, const json& value) {
  if (def.is_null() || value.is_null()) return true;
  if (def.is_number()) return value.is_number();
  if (def.is_boolean()) return value.is_boolean();
  if (def.is_string()) return value.is_string();
  if (def.is_array()) return value.is_array();
  if (def.is_object()) return value.is_object();
  return false;
}

const KeyInfo* find_key(std::string_view name) {
  for (const auto& k : config_keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

[[noreturn]] void unknown_key(const std::string& key) {
  std::string valid;
  for (const auto& k : config_keys()) valid += (valid.empty() ? "" : ", ") + k.name;
  throw Error(Errc::kConfig, "unknown config key '" + key + "'; valid keys: " + valid);
}

void flatten(const json& node, const std::string& prefix, std::map<std::string, json>& out) {
  for (const auto& [k, v] : node.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (find_key(key) != nullptr) {
      out[key] = v;
    } else if (v.is_object()) {
      flatten(v, key, out);
    } else {
      unknown_key(key);
    }
  }
}

void write_text(const fs::path& path, std::string_view text) { jsonl::write_file_atomic(path, text); }

// Everything the commands share, built lazily from one Config.
struct Session {
  explicit Session(const Config& c) : cfg(c) {}

  const Config& cfg;
  std::optional<LabelSpace> space_;
  std::optional<TemplateSet> templates_;
  std::optional<Split> split_;
  std::shared_ptr<CachedBackend> backend_;
  std::shared_ptr<HttpChatBackend> http_;
  std::optional<EmbeddingStore> embeddings_;
  bool embeddings_loaded_ = false;

  const LabelSpace& space() {
    if (!space_) {
      const json& labels = cfg.get("dataset.labels");
      if (!labels.empty()) {
        space_.emplace(labels.get<std::vector<std::string>>());
      } else {
        space_.emplace(builtin_label_space(cfg.str("templates.preset")));
      }
    }
    return *space_;
  }

  const TemplateSet& templates() {
    if (!templates_) {
      const bool custom = cfg.is_set("templates.candidate_system") || cfg.is_set("templates.candidate_user") ||
                          cfg.is_set("templates.final_system") || cfg.is_set("templates.final_user");
      if (custom) {
        templates_ = TemplateSet{
            load_template(PromptKind::kCandidateAssignment, cfg.path("templates.candidate_system"),
                          cfg.path("templates.candidate_user")),
            load_template(PromptKind::kFinalPrediction, cfg.path("templates.final_system"),
                          cfg.path("templates.final_user")),
        };
      } else {
        templates_ = builtin_templates(cfg.str("templates.preset"));
      }
      validate_template(templates_->candidate, space());
      validate_template(templates_->final_prediction, space());
    }
    return *templates_;
  }

  const Split& split() {
    if (!split_) {
      if (cfg.is_set("dataset.train") || cfg.is_set("dataset.test")) {
        split_ = Split{load_dataset(cfg.path("dataset.train"), space()), load_dataset(cfg.path("dataset.test"), space())};
      } else if (cfg.is_set("dataset.path")) {
        split_ = stratified_split(load_dataset(cfg.path("dataset.path"), space()), cfg.num("dataset.test_fraction"),
                                  cfg.seed());
      } else {
        throw Error(Errc::kConfig, "set dataset.path or dataset.train and dataset.test");
      }
    }
    return *split_;
  }

  CachedBackend& backend() {
    if (!backend_) {
      std::shared_ptr<ChatBackend> inner;
      const std::string kind = cfg.str("backend.kind");
      if (kind == "mock") {
        MockRule rule;
        for (const auto& [k, v] : cfg.get("mock.keywords").items()) {
          if (!v.is_array()) throw Error(Errc::kConfig, "mock.keywords values must be label lists");
          rule.keywords.emplace_back(k, v.get<std::vector<std::string>>());
        }
        rule.default_label = cfg.is_set("mock.default_label") ? cfg.str("mock.default_label") : space().label(0);
        validate_mock_rule(rule, space());
        const std::string mode = cfg.str("mock.final_mode");
        MockFinalMode m = MockFinalMode::kMajority;
        if (mode == "keyword") {
          m = MockFinalMode::kKeyword;
        } else if (mode == "planted") {
          m = MockFinalMode::kPlanted;
        } else if (mode != "majority") {
          throw Error(Errc::kConfig, "mock.final_mode must be keyword, majority or planted");
        }
        inner = std::make_shared<MockBackend>(std::move(rule), space(), templates(), m);
      } else if (kind == "http") {
        inner = http();
      } else {
        throw Error(Errc::kConfig, "backend.kind must be http or mock");
      }
      backend_ = std::make_shared<CachedBackend>(inner, std::make_shared<ResponseCache>(cfg.path("backend.cache_dir")));
    }
    return *backend_;
  }

  std::shared_ptr<HttpChatBackend> http() {
    if (!http_) {
      BackendConfig bc;
      bc.base_url = cfg.str("backend.base_url");
      bc.model_name = cfg.str("backend.model");
      bc.temperature = cfg.num("backend.temperature");
      bc.max_tokens = static_cast<int>(cfg.integer("backend.max_tokens"));
      bc.max_retries = static_cast<int>(cfg.integer("backend.max_retries"));
      bc.timeout = std::chrono::milliseconds(cfg.integer("backend.timeout_ms"));
      bc.initial_backoff = std::chrono::milliseconds(cfg.integer("backend.initial_backoff_ms"));
      bc.max_backoff = std::chrono::milliseconds(cfg.integer("backend.max_backoff_ms"));
      bc.api_key_env = cfg.str("backend.api_key_env");
      http_ = std::make_shared<HttpChatBackend>(bc);
    }
    return http_;
  }

  std::size_t in_flight() const { return static_cast<std::size_t>(std::max<std::int64_t>(1, cfg.integer("backend.max_in_flight"))); }

  // nullptr when no embeddings are configured.
  const EmbeddingStore* embeddings() {
    if (embeddings_loaded_) return embeddings_ ? &*embeddings_ : nullptr;
    embeddings_loaded_ = true;
    if (!cfg.is_set("embeddings.path")) return nullptr;
    const fs::path p = cfg.path("embeddings.path");
    if (!fs::exists(p) && cfg.is_set("embeddings.model") && cfg.str("backend.kind") == "http") {
      EmbeddingStore store;
      for (const Dataset* ds : {&split().train, &split().test}) {
        for (const auto& ex : ds->examples()) store.add(ex.id, http()->embed(ex.text, cfg.str("embeddings.model")));
      }
      save_embeddings(store, p);
    }
    embeddings_ = load_embeddings(p);
    return &*embeddings_;
  }

  std::vector<LookupEntry> lookup() {
    const fs::path p = cfg.path("lookup.path");
    if (!fs::exists(p)) throw Error(Errc::kConfig, "lookup table " + p.string() + " not found; run `assign` first");
    return load_lookup(p, space());
  }

  const Example& find_test(const SelectRequest& req, Example& scratch) {
    if (req.test_id) {
      if (const Example* ex = split().test.find(*req.test_id)) return *ex;
      if (const Example* ex = split().train.find(*req.test_id)) return *ex;
      throw Error(Errc::kUnknownId, "no example with id '" + *req.test_id + "'");
    }
    if (!req.test_text) throw Error(Errc::kConfig, "pass --test-id or --text");
    scratch = Example{"query", *req.test_text, space().label(0)};
    return scratch;
  }

  RunConfig run_config(const std::string& output_key) {
    RunConfig rc;
    for (const auto& m : cfg.get("eval.methods")) rc.methods.push_back(MethodSpec::parse(m.get<std::string>()));
    rc.shots = cfg.get("eval.shots").get<std::vector<std::size_t>>();
    if (cfg.get("eval.seeds").is_null()) {
      rc.seeds = {cfg.seed() + 1, cfg.seed() + 2, cfg.seed() + 3};
    } else {
      rc.seeds = cfg.get("eval.seeds").get<std::vector<std::uint64_t>>();
    }
    const std::string fallback = cfg.str("eval.fallback");
    if (fallback != "knn" && fallback != "random") throw Error(Errc::kConfig, "eval.fallback must be knn or random");
    rc.fallback = fallback == "knn" ? FallbackPolicy::kKnn : FallbackPolicy::kRandom;
    const std::string avg = cfg.str("eval.averaging");
    if (avg != "macro" && avg != "weighted") throw Error(Errc::kConfig, "eval.averaging must be macro or weighted");
    rc.averaging = avg == "macro" ? Averaging::kMacro : Averaging::kWeighted;
    rc.max_in_flight = in_flight();
    rc.records_path = cfg.path(output_key) / "records.jsonl";
    rc.validate();
    return rc;
  }

  void report_calls(std::ostream& out) {
    if (backend_) out << backend_->backend_calls() << " new calls (" << backend_->cache_hits() << " cached)\n";
  }
};

void print_histogram(const CandidateHistogram& h, std::ostream& out) {
  out << "candidate labels per example (" << h.total << " examples)\n";
  for (const auto& [k, n] : h.counts) {
    out << "  " << k << ": " << n << " (" << json(h.frequencies.at(k)).dump() << ")\n";
  }
}

ordered_json demo_json(const DemoSet& demos) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : demos.entries) {
    ordered_json d;
    d["id"] = e.example.id;
    d["label"] = e.example.gold;
    d["source"] = demo_source_name(e.source);
    arr.push_back(std::move(d));
  }
  return arr;
}

}  // namespace

int exit_code_for(const Error& e) {
  if (is_backend_error(e.code())) return kExitBackend;
  switch (e.code()) {
    case Errc::kEmptySelection:
      return kExitEmptySelection;
    case Errc::kConfig:
    case Errc::kIo:
    case Errc::kParseError:
    case Errc::kUnknownLabel:
    case Errc::kDuplicateId:
    case Errc::kClassTooSmall:
    case Errc::kEmptyDataset:
    case Errc::kMissingSlot:
    case Errc::kUnknownId:
    case Errc::kDimensionMismatch:
      return kExitConfig;
    default:
      return kExitFailure;
  }
}

const std::vector<KeyInfo>& config_keys() {
  static const std::vector<KeyInfo> keys = make_keys();
  return keys;
}

Config::Config() {
  for (const auto& k : config_keys()) values_[k.name] = k.default_value;
}

Config Config::from_json(const json& root, fs::path base_dir) {
  if (!root.is_object()) throw Error(Errc::kConfig, "config root must be a JSON object");
  std::map<std::string, json> flat;
  flatten(root, "", flat);
  Config c;
  c.base_dir_ = std::move(base_dir);
  for (auto& [k, v] : flat) c.set(k, std::move(v));
  return c;
}

Config Config::load(const fs::path& path) {
  std::string text;
  try {
    text = jsonl::read_file(path);
  } catch (const Error&) {
    throw Error(Errc::kConfig, "cannot read config " + path.string());
  }
  const json root = json::parse(text, nullptr, false, true);
  if (root.is_discarded()) throw Error(Errc::kConfig, "config " + path.string() + " is not valid JSON");
  return from_json(root, fs::absolute(path).parent_path());
}

void Config::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw Error(Errc::kConfig, "override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  const KeyInfo* info = find_key(key);
  if (info != nullptr && info->default_value.is_string() && !value.is_string()) value = raw;
  set(key, std::move(value));
}

void Config::set(const std::string& key, json value) {
  const KeyInfo* info = find_key(key);
  if (info == nullptr) unknown_key(key);
  if (!same_kind(info->default_value, value)) {
    throw Error(Errc::kConfig, "config key '" + key + "' expects a " + std::string(info->default_value.type_name()) +
                                   ", got " + value.type_name());
  }
  values_[key] = std::move(value);
}

const json& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) unknown_key(key);
  return it->second;
}

bool Config::is_set(const std::string& key) const {
  const json& v = get(key);
  return !v.is_null() && !(v.is_string() && v.get<std::string>().empty());
}

std::string Config::str(const std::string& key) const {
  const json& v = get(key);
  return v.is_string() ? v.get<std::string>() : std::string();
}

double Config::num(const std::string& key) const {
  const json& v = get(key);
  if (!v.is_number()) throw Error(Errc::kConfig, "config key '" + key + "' must be a number");
  return v.get<double>();
}

std::int64_t Config::integer(const std::string& key) const {
  const json& v = get(key);
  if (!v.is_number_integer()) throw Error(Errc::kConfig, "config key '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

bool Config::flag(const std::string& key) const {
  const json& v = get(key);
  return v.is_boolean() && v.get<bool>();
}

fs::path Config::path(const std::string& key) const {
  const fs::path p(str(key));
  if (p.empty()) throw Error(Errc::kConfig, "config key '" + key + "' is not set");
  return p.is_absolute() || base_dir_.empty() ? p : base_dir_ / p;
}

std::uint64_t Config::seed() const {
  const json& v = get("seed");
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw Error(Errc::kConfig, "seed must be a non-negative integer");
  return v.get<std::uint64_t>();
}

int cmd_assign(const Config& cfg, std::ostream& out) {
  Session s(cfg);
  const auto lookup = build_lookup(s.split().train, s.backend(), s.templates().candidate, s.in_flight());
  save_lookup(lookup, s.space(), cfg.path("lookup.path"));
  print_histogram(candidate_histogram(lookup), out);
  out << "lookup table: " << cfg.path("lookup.path").string() << "\n";
  s.report_calls(out);
  return kExitOk;
}

int cmd_select(const Config& cfg, const SelectRequest& req, std::ostream& out) {
  Session s(cfg);
  Example scratch;
  const Example& test = s.find_test(req, scratch);
  const auto lookup = s.lookup();
  const CandidateSet cs = assign_candidates(s.backend(), s.templates().candidate, test.text, s.space());
  const SelectionConfig sc{cfg.num("selection.alpha"), static_cast<std::size_t>(cfg.integer("selection.n")),
                           derive_seed(cfg.seed(), test.id)};
  const EmbeddingStore* store = sc.alpha < 1.0 ? s.embeddings() : nullptr;
  KnnQuery query{store, test.id, {}};
  if (store != nullptr && !store->contains(test.id)) {
    throw Error(Errc::kUnknownId, "no embedding for the query; select by --test-id with an embedded example");
  }

  DemoSet demos;
  try {
    demos = select_demos(lookup, cs, store != nullptr ? &query : nullptr, label_frequency(s.split().train), sc);
  } catch (const Error& e) {
    if (e.code() != Errc::kEmptySelection) throw;
    out << "error: " << e.what() << "\n"
        << "hint: no training example shares this candidate set; lower selection.alpha or evaluate with "
           "eval.fallback=knn|random\n";
    s.report_calls(out);
    return kExitEmptySelection;
  }
  ordered_json j;
  j["test_id"] = test.id;
  j["step1_key"] = candidate_key(cs);
  j["step1"] = candidate_labels(cs, s.space());
  j["alpha"] = sc.alpha;
  j["n"] = sc.n;
  j["hard"] = demos.count(DemoSource::kHard);
  j["knn"] = demos.count(DemoSource::kKnn);
  j["demos"] = demo_json(demos);
  out << j.dump(2) << "\n";
  s.report_calls(out);
  return kExitOk;
}

int cmd_predict(const Config& cfg, const SelectRequest& req, std::ostream& out) {
  Session s(cfg);
  Example scratch;
  const Example& test = s.find_test(req, scratch);
  const MethodSpec method =
      MethodSpec::parse(req.method.value_or("marginsel:" + format_alpha(cfg.num("selection.alpha"))));
  std::vector<LookupEntry> lookup;
  if (method.kind == MethodKind::kMarginSel) lookup = s.lookup();
  const LabelFrequency rho = label_frequency(s.split().train);
  const RunConfig rc = s.run_config("eval.output_dir");
  const PredictionContext ctx{s.split().train, lookup, s.embeddings(), rho, s.templates(), s.backend(), rc.fallback};
  const PredictionRecord rec =
      predict_one(test, method, static_cast<std::size_t>(cfg.integer("selection.n")), cfg.seed(), ctx);
  out << record_to_json(rec, s.space()).dump(2) << "\n";
  s.report_calls(out);
  return kExitOk;
}

int cmd_eval(const Config& cfg, std::ostream& out) {
  Session s(cfg);
  const RunConfig rc = s.run_config("eval.output_dir");
  const bool needs_lookup = std::any_of(rc.methods.begin(), rc.methods.end(),
                                        [](const MethodSpec& m) { return m.kind == MethodKind::kMarginSel; });
  std::vector<LookupEntry> lookup;
  if (needs_lookup) lookup = s.lookup();
  const ExperimentInputs in{s.split().train, s.split().test, lookup, s.embeddings(), s.templates(), s.backend()};
  const RunReport report = run_experiment(rc, in);

  const fs::path dir = cfg.path("eval.output_dir");
  write_text(dir / "report.json", report_to_json(report, s.space()).dump(2) + "\n");
  write_text(dir / "report.csv", report_to_csv(report));
  for (const auto& sm : report.summary) {
    out << sm.method << " shots=" << sm.shots << " mean=" << json(sm.mean).dump() << " sd=" << json(sm.stdev).dump();
    if (sm.vs_random) out << " p=" << json(sm.vs_random->p_value).dump() << (sm.vs_random->significant ? " *" : "");
    out << "\n";
  }
  out << "report: " << (dir / "report.json").string() << "\n";
  s.report_calls(out);
  return report.has_errors() ? kExitFailure : kExitOk;
}

int cmd_sweep(const Config& cfg, std::ostream& out) {
  Session s(cfg);
  const RunConfig rc = s.run_config("sweep.output_dir");
  const auto alphas = cfg.get("sweep.alphas").get<std::vector<double>>();
  const auto lookup = s.lookup();
  const bool needs_knn = std::any_of(alphas.begin(), alphas.end(), [](double a) { return a < 1.0; });
  const ExperimentInputs in{s.split().train, s.split().test, lookup,
                            needs_knn || rc.fallback == FallbackPolicy::kKnn ? s.embeddings() : nullptr,
                            s.templates(), s.backend()};
  const SweepResult sweep = alpha_sweep(rc, alphas, in);

  const fs::path dir = cfg.path("sweep.output_dir");
  write_text(dir / "sweep.json", sweep_to_json(sweep).dump(2) + "\n");
  write_text(dir / "sweep.csv", sweep_to_csv(sweep));
  for (const auto& row : sweep.rows) {
    out << "alpha=" << format_alpha(row.alpha) << " mean_macro_f1=" << json(row.mean_f1).dump() << "\n";
  }
  out << "sweep: " << (dir / "sweep.json").string() << "\n";
  s.report_calls(out);
  bool failed = false;
  for (const auto& r : sweep.reports) failed |= r.has_errors();
  return failed ? kExitFailure : kExitOk;
}

int cmd_analyze(const Config& cfg, std::ostream& out) {
  Session s(cfg);
  const fs::path dir = cfg.path("analyze.output_dir");
  std::size_t written = 0;

  if (fs::exists(cfg.path("lookup.path"))) {
    const CandidateHistogram h = candidate_histogram(s.lookup());
    write_text(dir / "candidate_histogram.json", histogram_to_json(h).dump(2) + "\n");
    write_text(dir / "candidate_histogram.csv", histogram_to_csv(h));
    print_histogram(h, out);
    written += 2;
  }

  const fs::path report_path =
      cfg.is_set("analyze.report") ? cfg.path("analyze.report") : cfg.path("eval.output_dir") / "report.json";
  if (fs::exists(report_path)) {
    const json j = json::parse(jsonl::read_file(report_path), nullptr, false);
    if (j.is_discarded()) throw Error(Errc::kParseError, report_path.string() + " is not valid JSON");
    const RunReport report = report_from_json(j, s.space());
    std::vector<PredictionRecord> all;
    for (const auto& c : report.cells) all.insert(all.end(), c.records.begin(), c.records.end());
    const auto records = step1_records(all);
    const Step1Recall recall = step1_recall(records, s.space());
    write_text(dir / "step1_recall.json", recall_to_json(recall).dump(2) + "\n");
    write_text(dir / "step1_recall.csv", recall_to_csv(recall));
    out << "step-1 recall over " << records.size() << " marginsel records\n";
    written += 2;
  }

  const std::string vectors_key = cfg.is_set("analyze.vectors") ? "analyze.vectors" : "embeddings.path";
  if (cfg.is_set(vectors_key) && fs::exists(cfg.path(vectors_key))) {
    const EmbeddingStore vectors = load_embeddings(cfg.path(vectors_key));
    std::vector<Example> labeled;
    for (const Dataset* ds : {&s.split().train, &s.split().test}) {
      for (const auto& ex : ds->examples()) {
        if (vectors.contains(ex.id)) labeled.push_back(ex);
      }
    }
    // Declared labels without any example have no centroid; leave them out.
    std::vector<std::string> present;
    for (const auto& label : s.space().labels()) {
      if (std::any_of(labeled.begin(), labeled.end(), [&](const Example& ex) { return ex.gold == label; })) {
        present.push_back(label);
      }
    }
    if (present.size() < s.space().size()) {
      spdlog::info("centroids cover {} of {} labels", present.size(), s.space().size());
    }
    if (present.size() >= 2) {
      const CentroidMatrix m = centroid_distances(vectors, labeled, LabelSpace(present),
                                                  parse_distance_metric(cfg.str("analyze.metric")));
      write_text(dir / "centroid_distances.json", centroid_to_json(m).dump(2) + "\n");
      write_text(dir / "centroid_distances.csv", centroid_to_csv(m));
      written += 2;
    }
    EmbeddingStore aligned;
    for (const auto& ex : labeled) {
      const auto v = vectors.at(ex.id);
      aligned.add(ex.id, std::vector<double>(v.begin(), v.end()));
    }
    dump_projection_input(aligned, labeled, dir / "projection_input.jsonl");
    out << "centroid distances over " << labeled.size() << " vectors\n";
    written += 1;
  }

  if (written == 0) throw Error(Errc::kConfig, "nothing to analyze: no lookup table, run report or vectors found");
  out << written << " files in " << dir.string() << "\n";
  return kExitOk;
}

int cmd_theory_check(const Config& cfg, std::ostream& out) {
  theory::TheoryCheckConfig tc;
  tc.seed = cfg.seed();
  tc.identity_instances = static_cast<int>(cfg.integer("theory.identity_instances"));
  tc.kkt_instances = static_cast<int>(cfg.integer("theory.kkt_instances"));
  const theory::TheoryReport r = theory::run_theory_check(tc);
  const fs::path p = cfg.path("theory.output");
  write_text(p, theory::theory_report_to_json(r, tc).dump(2) + "\n");
  out << "decomposition max error " << r.decomposition_error << "\n"
      << "affine update max error " << r.affine_update_error << "\n"
      << "kkt max residual " << r.kkt.max() << "\n"
      << "support restriction max error " << r.restriction_error << "\n"
      << "softmax/linear agreement " << r.agreement_rate << " (reported only)\n"
      << (r.passed ? "all checks within tolerance" : "some checks exceed tolerance") << "\n"
      << "report: " << p.string() << "\n";
  return kExitOk;
}

}  // namespace marginsel::app
