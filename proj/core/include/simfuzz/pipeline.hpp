#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simfuzz/config.hpp"

namespace simfuzz {

inline constexpr int kReportSchemaVersion = 1;

/// Loads seedgen.pool_file when set (checking it was collected for the same
/// scenario), otherwise collects the pool in memory.
SeedPool build_pool(const AppConfig& cfg);

struct CampaignRun {
  AppConfig config;
  CampaignResult result;
  std::vector<Finding> findings;  // classified
  CategoryTable table;
  std::size_t pool_size = 0;
};

CampaignRun run_campaign(const AppConfig& cfg, const SeedPool& pool);

/// Deterministic findings document: no timings, fixed key order, shortest
/// round-trip doubles. Two runs of the same config produce identical bytes.
std::string findings_payload(const std::vector<Finding>& findings);
std::vector<Finding> parse_findings_payload(const nlohmann::json& j);

struct RunCounts {
  std::size_t iterations = 0;
  std::size_t skipped = 0;
  std::size_t numeric_failures = 0;
  std::size_t findings = 0;
  std::size_t forward = 0;
  std::size_t backward = 0;
  std::size_t energy_jumps = 0;
};
RunCounts count_run(const CampaignResult& r);

/// Full report: resolved config, counts, category table and timings.
nlohmann::json campaign_report(const CampaignRun& run);

/// `scenario,faults,iterations,errors,forward,backward,wall_time_s,scheduler_time_s`
void write_summary_csv(std::ostream& out, const CampaignRun& run);
/// RNG audit, one row per iteration; iteration i draws from stream (rng_seed, i).
void write_iterations_csv(std::ostream& out, const CampaignResult& r, std::uint64_t rng_seed);

/// A self-contained replay document: resolved config plus the finding.
nlohmann::json replay_document(const AppConfig& cfg, const Finding& f);
std::string replay_file_name(const Finding& f);

/// Writes report.json, findings.json, summary.csv, categories.csv,
/// iterations.csv, queue.csv (when recorded) and findings/<replay files>.
void write_run_outputs(const std::filesystem::path& dir, const CampaignRun& run);

struct AblationPair {
  std::uint64_t rng_seed = 0;
  std::size_t ss_findings = 0;
  std::size_t no_ss_findings = 0;
  double ss_seconds = 0.0;
  double ss_scheduler_seconds = 0.0;
  double no_ss_seconds = 0.0;
};

struct AblationResult {
  std::vector<AblationPair> pairs;
  double mean_ss = 0.0;
  double mean_no_ss = 0.0;
  /// 100 (mean_ss - mean_no_ss) / mean_no_ss; 0 when neither arm found anything,
  /// empty when only the SS arm did.
  std::optional<double> relative_increase_pct;
  std::size_t ss_not_worse = 0;  // pairs with ss_findings >= no_ss_findings
  double overhead_fraction = 0.0;  // SS scheduler time / SS wall time, summed over pairs
};

/// Paired campaigns with scheduling on and off for rng seeds
/// cfg.rng_seed .. cfg.rng_seed + repeats - 1. Up to `jobs` campaigns run at
/// once; counts do not depend on `jobs`. Completed runs are appended to `runs`
/// (SS then no-SS per seed) when given.
AblationResult run_ablation(const AppConfig& cfg, const SeedPool& pool, std::size_t repeats, std::size_t jobs,
                            std::vector<CampaignRun>* runs = nullptr);
nlohmann::json to_json(const AblationResult& r);
/// Bar data: `rng_seed,arm,findings,wall_time_s,scheduler_time_s`.
void write_ablation_csv(std::ostream& out, const AblationResult& r);

enum class ReproduceOutcome {
  Reproduced,    // same config, identical finding
  Mismatch,      // same config, different result
  Fixed,         // config changed and the oracle no longer fires
  StillFires,    // config changed and the oracle still fires
};
std::string to_string(ReproduceOutcome o);

struct ReproduceResult {
  ReproduceOutcome outcome = ReproduceOutcome::Mismatch;
  Finding original;
  std::optional<Finding> replayed;
  std::vector<std::string> differing_fields;
  std::string reason;
};

/// Re-executes the iteration named by the finding's rng_draw_ids on the
/// embedded config with `overrides` applied.
ReproduceResult reproduce(const nlohmann::json& replay, const std::vector<std::string>& overrides = {});

/// Human-readable seed-vs-mutant comparison and loss trace.
void describe_finding(std::ostream& out, const Finding& f);

}  // namespace simfuzz
