#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simfuzz/classifier.hpp"
#include "simfuzz/fuzzer.hpp"
#include "simfuzz/gradcheck.hpp"

namespace simfuzz {

inline constexpr int kConfigSchemaVersion = 1;

/// A configuration problem; `key` is the dotted path of the offending entry
/// when one can be named.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct SeedgenConfig {
  std::size_t pool_size = 10000;
  std::size_t segment_len = 20;
  std::size_t chain_segments = 50;
  double force_cap = 1.0;
  std::uint64_t rng_seed = 7;
  /// Collect on the configured (possibly faulted) engine rather than the pristine one.
  bool faulted = false;
  /// Seed pool file written by the seedgen subcommand; empty collects in memory.
  std::string pool_file;

  void validate() const;
};

void to_json(nlohmann::json& j, const SeedgenConfig& c);
void from_json(const nlohmann::json& j, SeedgenConfig& c);

/// Everything a run needs. `scenario.faults` is configured at the top level
/// (key `faults`), not inside `scenario`.
struct AppConfig {
  std::uint64_t rng_seed = 0;
  Scenario scenario;
  SeedgenConfig seedgen;
  CampaignConfig campaign;
  ClassifierConfig classifier;
  GradcheckConfig gradcheck;
  bool queue_diagnostics = true;

  /// Scenario the seed pool is collected on.
  Scenario seedgen_scenario() const;
  /// Campaign config with rng_seed filled in.
  CampaignConfig resolved_campaign() const;
  void validate() const;
};

nlohmann::json to_json(const AppConfig& c);
/// Strict: unknown keys and type mismatches raise ConfigError.
AppConfig app_config_from_json(const nlohmann::json& j);

/// Applies `key=value` to a config tree. The key must already exist in the
/// tree; value is parsed as JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& tree, const std::string& assignment);

/// Defaults, then the file (if any), then the overrides in order.
AppConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides = {});
AppConfig load_config(const nlohmann::json& base, const std::vector<std::string>& overrides = {});

}  // namespace simfuzz
