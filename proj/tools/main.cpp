// simfuzz command-line front end.
//
// Exit codes: 0 success, 1 findings present (--strict) or gradient check
// failed, 2 configuration or input error, 3 reproduction mismatch.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "simfuzz/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace simfuzz;

namespace {

enum Exit { kOk = 0, kFindings = 1, kConfigError = 2, kMismatch = 3 };

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> rng_seed;
  std::size_t jobs = 1;
  bool strict = false;
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_default) {
  cmd->add_option("--config,-c", c.config, "JSON config file (defaults apply to missing keys)");
  cmd->add_option("--out,-o", c.out, "output location")->default_str(out_default);
  cmd->add_option("--set", c.overrides, "override a config entry, e.g. faults.double_impulse=true")
      ->allow_extra_args(false);
  cmd->add_option("--rng-seed", c.rng_seed, "override the RNG seed");
  cmd->add_option("--jobs,-j", c.jobs, "maximum concurrent campaigns")->check(CLI::PositiveNumber);
  cmd->add_flag("--strict", c.strict, "exit 1 when findings are present");
  if (c.out.empty()) c.out = out_default;
}

AppConfig load(const Common& c, const char* seed_key = "rng_seed") {
  auto overrides = c.overrides;
  if (c.rng_seed) overrides.push_back(std::string(seed_key) + "=" + std::to_string(*c.rng_seed));
  return load_config(fs::path(c.config), overrides);
}

std::string component_name(std::size_t k, std::size_t dim) {
  const bool velocity = k >= dim;
  const std::size_t i = velocity ? k - dim : k;
  return std::string(velocity ? "v" : "x") + std::to_string(i / kDims) + (i % kDims == 0 ? ".x" : ".y");
}

void print_table(const CategoryTable& t) {
  std::cout << "  Forward   Position   " << t.forward_position << "\n"
            << "            Velocity   " << t.forward_velocity << "\n"
            << "  Backward  Direction  " << t.backward_direction << "\n"
            << "            Extent     " << t.backward_extent << "\n"
            << "  Unapparent           " << t.unapparent << "\n";
}

void print_run(const CampaignRun& run) {
  const RunCounts c = count_run(run.result);
  const auto& t = run.result.timings;
  std::cout << "iterations " << c.iterations << " (skipped " << c.skipped << ", numeric failures "
            << c.numeric_failures << ")\n"
            << "errors " << c.findings << " (ForwardViolation " << c.forward << ", BackwardViolation " << c.backward
            << "), energy jumps " << c.energy_jumps << "\n"
            << std::fixed << std::setprecision(3) << "wall time " << t.total_seconds << " s, scheduler time "
            << t.scheduler_seconds << " s\n"
            << std::defaultfloat;
  print_table(run.table);
}

int cmd_run(const Common& c) {
  const AppConfig cfg = load(c);
  const SeedPool pool = build_pool(cfg);
  const CampaignRun run = run_campaign(cfg, pool);
  write_run_outputs(c.out, run);
  print_run(run);
  std::cout << "reports written to " << c.out << "\n";
  return c.strict && !run.findings.empty() ? kFindings : kOk;
}

int cmd_ablate(const Common& c, std::size_t repeats) {
  const AppConfig cfg = load(c);
  const SeedPool pool = build_pool(cfg);
  std::vector<CampaignRun> runs;
  const AblationResult r = run_ablation(cfg, pool, repeats, c.jobs, &runs);
  for (const auto& run : runs)
    write_run_outputs(fs::path(c.out) / ((run.config.campaign.scheduling_enabled ? "ss_" : "no_ss_") +
                                         std::to_string(run.config.rng_seed)),
                      run);
  {
    std::ofstream j(fs::path(c.out) / "ablation.json");
    j << to_json(r).dump(2) << "\n";
    std::ofstream csv(fs::path(c.out) / "ablation.csv");
    write_ablation_csv(csv, r);
  }
  for (const auto& p : r.pairs)
    std::cout << "rng_seed " << p.rng_seed << ": SS " << p.ss_findings << ", no-SS " << p.no_ss_findings << "\n";
  std::cout << std::fixed << std::setprecision(1) << "mean findings: SS " << r.mean_ss << ", no-SS " << r.mean_no_ss
            << "\nrelative increase: ";
  if (r.relative_increase_pct) {
    std::cout << *r.relative_increase_pct << "%\n";
  } else {
    std::cout << "undefined (no-SS arm found nothing)\n";
  }
  std::cout << "SS >= no-SS in " << r.ss_not_worse << " of " << r.pairs.size() << " pairs\n"
            << "scheduler overhead: " << 100.0 * r.overhead_fraction << "% of SS wall time\n";
  bool any = false;
  for (const auto& run : runs) any = any || !run.findings.empty();
  return c.strict && any ? kFindings : kOk;
}

int cmd_gradcheck(const Common& c) {
  const AppConfig cfg = load(c);
  const GradcheckReport r = run_gradcheck(cfg.scenario, cfg.gradcheck, cfg.rng_seed);
  if (!r.warning.empty()) std::cerr << "warning: " << r.warning << "\n";
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    std::ofstream j(fs::path(c.out) / "gradcheck.json");
    j << json({{"config", to_json(cfg)}, {"report", to_json(r)}}).dump(2) << "\n";
  }
  std::cout << "samples " << r.samples.size() << ", skipped finite differences " << r.skipped_components << "\n"
            << "max relative error " << r.max_relative_error << " (tolerance " << cfg.gradcheck.tolerance << ")\n";
  if (!r.samples.empty()) {
    const auto& w = r.samples[r.worst_sample];
    std::cout << "worst: sample " << w.index << ", d loss / d " << component_name(w.worst_component, cfg.scenario.dim())
              << ": adjoint " << w.analytic << ", finite difference " << w.reference << "\n";
  }
  std::cout << (r.passed ? "PASS" : "FAIL") << "\n";
  return r.passed ? kOk : kFindings;
}

int cmd_seedgen(const Common& c) {
  AppConfig cfg = load(c, "seedgen.rng_seed");
  cfg.seedgen.pool_file.clear();
  const SeedPool pool = build_pool(cfg);
  const fs::path out = c.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write " + out.string());
  write_pool(f, pool);
  std::cout << "collected " << pool.size() << " seeds (" << pool.pre_findings.size() << " invalid states) into "
            << out.string() << "\n";
  return kOk;
}

int cmd_reproduce(const Common& c, const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("", "cannot open " + file);
  json doc = json::parse(in);
  if (c.rng_seed) doc.at("finding").at("rng_draw_ids")["rng_seed"] = *c.rng_seed;
  const ReproduceResult r = reproduce(doc, c.overrides);
  describe_finding(std::cout, r.original);
  std::cout << "outcome: " << to_string(r.outcome) << "\n";
  if (!r.reason.empty()) std::cout << "  " << r.reason << "\n";
  for (const auto& f : r.differing_fields) std::cout << "  differs: " << f << "\n";
  if (r.outcome == ReproduceOutcome::Mismatch) {
    if (r.replayed) {
      std::cout << "replayed finding:\n";
      describe_finding(std::cout, *r.replayed);
    }
    return kMismatch;
  }
  return kOk;
}

int cmd_report(const Common& c, const std::string& dir) {
  std::ifstream rep(fs::path(dir) / "report.json");
  std::ifstream fin(fs::path(dir) / "findings.json");
  if (!rep || !fin) throw ConfigError("", dir + " does not hold report.json and findings.json");
  const json report = json::parse(rep);
  const AppConfig cfg = load_config(report.at("config"), c.overrides);
  std::vector<Finding> findings = parse_findings_payload(json::parse(fin));
  classify_all(findings, cfg.classifier, cfg.resolved_campaign());
  const CategoryTable t = tabulate(findings);
  const fs::path out = c.out.empty() ? fs::path(dir) : fs::path(c.out);
  fs::create_directories(out);
  std::ofstream csv(out / "categories.csv");
  write_category_csv(csv, t);
  std::ofstream j(out / "categories.json");
  j << json({{"classifier", cfg.classifier}, {"categories", to_json(t)}}).dump(2) << "\n";
  const auto& counts = report.at("counts");
  std::cout << "errors " << counts.at("findings") << " (ForwardViolation " << counts.at("ForwardViolation")
            << ", BackwardViolation " << counts.at("BackwardViolation") << ")\n"
            << "wall time " << report.at("timings").at("wall_time_s") << " s, scheduler time "
            << report.at("timings").at("scheduler_time_s") << " s\n";
  print_table(t);
  return c.strict && !findings.empty() ? kFindings : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simfuzz: fuzz a differentiable rigid-body simulator with forward and backward oracles"};
  app.require_subcommand(1);

  Common run_c, ablate_c, grad_c, seed_c, repro_c, report_c;
  std::size_t repeats = 1;
  std::string finding_file, report_dir;

  auto* run = app.add_subcommand("run", "run one fuzzing campaign");
  add_common(run, run_c, "out/run");
  auto* ablate = app.add_subcommand("ablate", "paired campaigns with seed scheduling on and off");
  add_common(ablate, ablate_c, "out/ablate");
  ablate->add_option("--repeat", repeats, "number of rng seeds (rng_seed, rng_seed+1, ...)")
      ->check(CLI::PositiveNumber);
  auto* grad = app.add_subcommand("gradcheck", "compare adjoint gradients with finite differences");
  add_common(grad, grad_c, "");
  auto* seed = app.add_subcommand("seedgen", "collect a seed pool and write it to --out");
  add_common(seed, seed_c, "out/pool.txt");
  auto* repro = app.add_subcommand("reproduce", "replay a finding file");
  add_common(repro, repro_c, "");
  repro->add_option("finding", finding_file, "replay file written by run")->required();
  auto* report = app.add_subcommand("report", "re-render the category tables of a run directory");
  add_common(report, report_c, "");
  report->add_option("dir", report_dir, "run output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(run_c);
    if (*ablate) return cmd_ablate(ablate_c, repeats);
    if (*grad) return cmd_gradcheck(grad_c);
    if (*seed) return cmd_seedgen(seed_c);
    if (*repro) return cmd_reproduce(repro_c, finding_file);
    if (*report) return cmd_report(report_c, report_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kOk;
}
