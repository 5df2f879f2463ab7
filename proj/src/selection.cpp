#include "marginsel/selection.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "marginsel/error.hpp"
#include "marginsel/jsonl.hpp"
#include "marginsel/parallel.hpp"
#include "marginsel/random.hpp"

namespace marginsel {

void SelectionConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::kInvalidArgument, "alpha must lie in [0, 1]");
  if (n < 1) throw Error(Errc::kInvalidArgument, "shot count n must be >= 1");
}

std::string_view demo_source_name(DemoSource source) {
  switch (source) {
    case DemoSource::kHard:
      return "hard";
    case DemoSource::kKnn:
      return "knn";
    case DemoSource::kRandom:
      return "random";
  }
  return "unknown";
}

std::vector<std::string> DemoSet::ids() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.example.id);
  return out;
}

std::size_t DemoSet::count(DemoSource source) const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.source == source;
  return n;
}

DemoBlock DemoSet::block() const {
  DemoBlock out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(Demo{e.example.text, e.example.gold});
  return out;
}

CandidateSet assign_candidates(ChatBackend& backend, const PromptTemplate& tmpl, std::string_view text,
                               const LabelSpace& space) {
  const RenderedPrompt prompt = render_candidate_prompt(tmpl, text, space);
  ChatExchange exchange = backend.chat(chat_request(prompt.system, prompt.user));
  try {
    return parse_label_tags(exchange.reply, space, /*multi=*/true);
  } catch (const Error& e) {
    if (e.code() != Errc::kNoTag && e.code() != Errc::kEmptySet) throw;
    spdlog::warn("unparseable candidate reply ({}); recording an empty candidate set", e.what());
    return CandidateSet::empty(space.size());
  }
}

std::vector<LookupEntry> build_lookup(const Dataset& train, ChatBackend& backend, const PromptTemplate& tmpl,
                                      std::size_t max_in_flight) {
  std::vector<LookupEntry> lookup(train.size());
  parallel_for(train.size(), max_in_flight, [&](std::size_t i) {
    lookup[i] = LookupEntry{train[i], assign_candidates(backend, tmpl, train[i].text, train.space())};
  });
  std::size_t failures = 0;
  for (const auto& e : lookup) failures += e.candidates.is_empty();
  if (failures > 0) spdlog::warn("{} of {} training examples have no candidate labels", failures, lookup.size());
  return lookup;
}

std::string lookup_to_jsonl(std::span<const LookupEntry> lookup, const LabelSpace& space) {
  std::string out;
  for (const auto& e : lookup) {
    nlohmann::ordered_json rec;
    rec["id"] = e.example.id;
    rec["text"] = e.example.text;
    rec["gold"] = e.example.gold;
    rec["candidates"] = candidate_labels(e.candidates, space);
    out += rec.dump();
    out += '\n';
  }
  return out;
}

void save_lookup(std::span<const LookupEntry> lookup, const LabelSpace& space, const std::filesystem::path& path) {
  jsonl::write_file_atomic(path, lookup_to_jsonl(lookup, space));
}

std::vector<LookupEntry> load_lookup(const std::filesystem::path& path, const LabelSpace& space) {
  std::vector<LookupEntry> lookup;
  std::vector<Example> examples;
  jsonl::for_each_record(path, [&](std::size_t line_no, const nlohmann::json& record) {
    Example ex{jsonl::string_field(record, "id", line_no), jsonl::string_field(record, "text", line_no),
               jsonl::string_field(record, "gold", line_no)};
    auto it = record.find("candidates");
    if (it == record.end() || !it->is_array()) {
      throw Error(Errc::kParseError, "line " + std::to_string(line_no) + ": missing array field 'candidates'");
    }
    std::vector<std::string> names;
    for (const auto& v : *it) {
      if (!v.is_string()) throw Error(Errc::kParseError, "line " + std::to_string(line_no) + ": non-string label");
      names.push_back(v.get<std::string>());
    }
    CandidateSet cs = candidate_set_from_labels(names, space);
    examples.push_back(ex);
    lookup.push_back(LookupEntry{std::move(ex), cs});
  });
  // Validates ids and gold labels; canonical gold labels flow back in.
  Dataset validated(space, std::move(examples));
  for (std::size_t i = 0; i < lookup.size(); ++i) lookup[i].example = validated[i];
  return lookup;
}

std::vector<LookupEntry> match_hard(std::span<const LookupEntry> lookup, const CandidateSet& test_candidates) {
  std::vector<LookupEntry> out;
  if (test_candidates.is_empty()) return out;
  for (const auto& e : lookup) {
    if (e.candidates == test_candidates) out.push_back(e);
  }
  return out;
}

std::vector<LookupEntry> weighted_sample(std::span<const LookupEntry> matched, std::size_t k,
                                         const LabelFrequency& rho, std::uint64_t seed) {
  if (matched.size() <= k) return {matched.begin(), matched.end()};

  std::vector<double> weights;
  weights.reserve(matched.size());
  for (const auto& e : matched) weights.push_back(rho.weight(e.example.gold));
  std::vector<std::size_t> remaining(matched.size());
  for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;

  Rng rng(seed);
  std::vector<LookupEntry> out;
  out.reserve(k);
  for (std::size_t draw = 0; draw < k; ++draw) {
    double total = 0.0;
    for (std::size_t idx : remaining) total += weights[idx];
    const double target = rng.uniform01() * total;
    std::size_t pick = remaining.size() - 1;
    double cumulative = 0.0;
    for (std::size_t j = 0; j < remaining.size(); ++j) {
      cumulative += weights[remaining[j]];
      if (target < cumulative) {
        pick = j;
        break;
      }
    }
    out.push_back(matched[remaining[pick]]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

std::size_t hard_quota(double alpha, std::size_t n) { return round_half_up(alpha * static_cast<double>(n)); }

DemoSet select_demos(std::span<const LookupEntry> lookup, const CandidateSet& test_candidates, const KnnQuery* knn,
                     const LabelFrequency& rho, const SelectionConfig& cfg) {
  cfg.validate();
  if (lookup.empty()) throw Error(Errc::kEmptyLookup, "select_demos needs a non-empty lookup table");
  const bool pure_hard = cfg.alpha >= 1.0;
  if (!pure_hard && (knn == nullptr || knn->store == nullptr)) {
    throw Error(Errc::kInvalidArgument, "alpha < 1 requires an embedding store");
  }

  const std::size_t quota = hard_quota(cfg.alpha, cfg.n);
  DemoSet demos;
  for (auto& e : weighted_sample(match_hard(lookup, test_candidates), quota, rho, cfg.seed)) {
    demos.entries.push_back(DemoEntry{std::move(e.example), DemoSource::kHard});
  }
  if (pure_hard) {
    if (demos.entries.empty()) {
      throw Error(Errc::kEmptySelection, "no training example shares the test candidate set " +
                                             candidate_key(test_candidates));
    }
    return demos;
  }

  const std::size_t want = cfg.n - demos.entries.size();
  if (want == 0) return demos;
  std::vector<std::string> candidate_ids;
  candidate_ids.reserve(lookup.size());
  for (const auto& e : lookup) candidate_ids.push_back(e.example.id);
  const std::vector<std::string> hard_ids = demos.ids();
  const auto nearest = knn->query_vector.empty()
                           ? knn_retrieve(*knn->store, knn->query_id, want, candidate_ids, hard_ids)
                           : knn_retrieve(*knn->store, knn->query_vector, want, candidate_ids, hard_ids);

  for (const auto& id : nearest) {
    for (const auto& e : lookup) {
      if (e.example.id == id) {
        demos.entries.push_back(DemoEntry{e.example, DemoSource::kKnn});
        break;
      }
    }
  }
  return demos;
}

}  // namespace marginsel
