#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "marginsel/error.hpp"

namespace marginsel::app {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitBackend = 3,
  kExitEmptySelection = 4,
};

int exit_code_for(const Error& e);

struct KeyInfo {
  std::string name;
  nlohmann::json default_value;
  std::string help;
};

// Every accepted dotted key with its default, in documentation order.
const std::vector<KeyInfo>& config_keys();

// Dotted-key view of a JSON config file plus `--set key=value` overrides.
// Relative paths resolve against the config file's directory.
class Config {
 public:
  Config();

  // Nested objects flatten to dotted keys. Throws Errc::kConfig for unknown
  // keys (listing the valid ones) or mistyped values.
  static Config from_json(const nlohmann::json& root, std::filesystem::path base_dir);
  static Config load(const std::filesystem::path& path);

  // `key=value`; the value is parsed as JSON when possible, else taken as a
  // string.
  void apply_override(std::string_view assignment);
  void set(const std::string& key, nlohmann::json value);

  const nlohmann::json& get(const std::string& key) const;
  bool is_set(const std::string& key) const;  // non-null and non-empty
  std::string str(const std::string& key) const;
  double num(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::filesystem::path path(const std::string& key) const;

  std::uint64_t seed() const;
  const std::filesystem::path& base_dir() const noexcept { return base_dir_; }

 private:
  std::map<std::string, nlohmann::json> values_;
  std::filesystem::path base_dir_;
};

struct SelectRequest {
  std::optional<std::string> test_id;
  std::optional<std::string> test_text;
  std::optional<std::string> method;  // predict only
};

int cmd_assign(const Config& cfg, std::ostream& out);
int cmd_select(const Config& cfg, const SelectRequest& req, std::ostream& out);
int cmd_predict(const Config& cfg, const SelectRequest& req, std::ostream& out);
int cmd_eval(const Config& cfg, std::ostream& out);
int cmd_sweep(const Config& cfg, std::ostream& out);
int cmd_analyze(const Config& cfg, std::ostream& out);
int cmd_theory_check(const Config& cfg, std::ostream& out);

}  // namespace marginsel::app
