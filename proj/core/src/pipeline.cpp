#include "simfuzz/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace simfuzz {

using nlohmann::json;
namespace fs = std::filesystem;

SeedPool build_pool(const AppConfig& cfg) {
  const Scenario sc = cfg.seedgen_scenario();
  if (cfg.seedgen.pool_file.empty())
    return collect_seeds(sc, default_meta_seed(sc), cfg.seedgen.pool_size, cfg.seedgen.segment_len,
                         cfg.seedgen.rng_seed, cfg.seedgen.chain_segments);
  std::ifstream in(cfg.seedgen.pool_file);
  if (!in) throw ConfigError("seedgen.pool_file", "cannot open " + cfg.seedgen.pool_file);
  SeedPool pool = read_pool(in);
  if (pool.scenario_hash != sc.hash())
    throw ConfigError("seedgen.pool_file", "pool was collected for a different scenario");
  if (pool.size() != cfg.seedgen.pool_size)
    throw ConfigError("seedgen.pool_file", "pool holds " + std::to_string(pool.size()) + " seeds, config asks for " +
                                               std::to_string(cfg.seedgen.pool_size));
  return pool;
}

CampaignRun run_campaign(const AppConfig& cfg, const SeedPool& pool) {
  cfg.validate();
  CampaignRun run;
  run.config = cfg;
  run.pool_size = pool.size();
  if (cfg.campaign.max_iter > 0) run.result = fuzz_campaign(cfg.scenario, pool, cfg.resolved_campaign(), cfg.queue_diagnostics);
  run.findings = run.result.findings();
  classify_all(run.findings, cfg.classifier, cfg.resolved_campaign());
  run.table = tabulate(run.findings);
  return run;
}

std::string findings_payload(const std::vector<Finding>& findings) {
  json list = json::array();
  for (const auto& f : findings) list.push_back(to_json(f));
  return json({{"schema_version", kReportSchemaVersion}, {"findings", list}}).dump(1) + "\n";
}

std::vector<Finding> parse_findings_payload(const json& j) {
  std::vector<Finding> out;
  for (const auto& f : j.at("findings")) out.push_back(finding_from_json(f));
  return out;
}

RunCounts count_run(const CampaignResult& r) {
  RunCounts c;
  c.iterations = r.iterations.size();
  for (const auto& it : r.iterations) {
    c.skipped += it.status == IterationStatus::Skipped;
    c.numeric_failures += it.status == IterationStatus::NumericFailure;
  }
  c.findings = r.finding_count();
  c.forward = r.count(Violation::Forward);
  c.backward = r.count(Violation::Backward);
  c.energy_jumps = r.energy_jumps();
  return c;
}

namespace {

std::string fault_list(const FaultSpec& f) {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(f.double_impulse, "double_impulse");
  add(f.end_of_step_contact, "end_of_step_contact");
  add(f.zero_grad_segment, "zero_grad_segment");
  add(f.dropped_unroll_grad, "dropped_unroll_grad");
  return out.empty() ? "none" : out;
}

double fraction(double part, double whole) { return whole > 0.0 ? part / whole : 0.0; }

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

}  // namespace

json campaign_report(const CampaignRun& run) {
  const RunCounts c = count_run(run.result);
  const auto& t = run.result.timings;
  return {{"schema_version", kReportSchemaVersion},
          {"config", to_json(run.config)},
          {"pool_size", run.pool_size},
          {"counts",
           {{"iterations", c.iterations},
            {"skipped", c.skipped},
            {"numeric_failures", c.numeric_failures},
            {"findings", c.findings},
            {"ForwardViolation", c.forward},
            {"BackwardViolation", c.backward},
            {"energy_jumps", c.energy_jumps}}},
          {"categories", to_json(run.table)},
          {"timings",
           {{"wall_time_s", t.total_seconds},
            {"scheduler_time_s", t.scheduler_seconds},
            {"scheduler_fraction", fraction(t.scheduler_seconds, t.total_seconds)}}}};
}

void write_summary_csv(std::ostream& out, const CampaignRun& run) {
  const RunCounts c = count_run(run.result);
  out << "scenario,faults,iterations,errors,forward,backward,wall_time_s,scheduler_time_s\n"
      << to_string(run.config.scenario.kind) << ',' << fault_list(run.config.scenario.faults) << ',' << c.iterations
      << ',' << c.findings << ',' << c.forward << ',' << c.backward << ',' << run.result.timings.total_seconds << ','
      << run.result.timings.scheduler_seconds << '\n';
}

void write_iterations_csv(std::ostream& out, const CampaignResult& r, std::uint64_t rng_seed) {
  out << "iteration,seed_id,status,rng_seed,stream,mutation_redraws,descent_steps,final_loss,energy_jumps,findings,"
         "reason\n";
  for (const auto& it : r.iterations) {
    out << it.iteration << ',' << it.seed_id << ',' << to_string(it.status) << ',' << rng_seed << ',' << it.iteration
        << ',' << it.mutation_redraws << ',' << it.descent_steps << ',' << json(it.final_loss).dump() << ','
        << it.energy_jumps << ',' << it.findings.size() << ",\"" << it.reason << "\"\n";
  }
}

json replay_document(const AppConfig& cfg, const Finding& f) {
  return {{"schema_version", kReportSchemaVersion}, {"config", to_json(cfg)}, {"finding", to_json(f)}};
}

std::string replay_file_name(const Finding& f) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "finding_%06zu_%s.json", f.iteration,
                f.violation == Violation::Forward ? "forward" : "backward");
  return buf;
}

void write_run_outputs(const fs::path& dir, const CampaignRun& run) {
  fs::create_directories(dir / "findings");
  write_text(dir / "report.json", campaign_report(run).dump(2) + "\n");
  write_text(dir / "findings.json", findings_payload(run.findings));
  std::ostringstream summary, categories, iterations;
  write_summary_csv(summary, run);
  write_category_csv(categories, run.table);
  write_iterations_csv(iterations, run.result, run.config.rng_seed);
  write_text(dir / "summary.csv", summary.str());
  write_text(dir / "categories.csv", categories.str());
  write_text(dir / "iterations.csv", iterations.str());
  if (!run.result.queue_diagnostics.empty()) {
    std::string q = "iteration,e1,e2,e3,e4,e5\n";
    for (const auto& row : run.result.queue_diagnostics) q += row;
    write_text(dir / "queue.csv", q);
  }
  for (const auto& f : run.findings)
    write_text(dir / "findings" / replay_file_name(f), replay_document(run.config, f).dump(1) + "\n");
}

AblationResult run_ablation(const AppConfig& cfg, const SeedPool& pool, std::size_t repeats, std::size_t jobs,
                            std::vector<CampaignRun>* runs) {
  if (repeats < 1) throw std::invalid_argument("ablation needs at least one repeat");
  std::vector<AppConfig> arms;
  for (std::size_t r = 0; r < repeats; ++r) {
    for (bool ss : {true, false}) {
      AppConfig c = cfg;
      c.rng_seed = cfg.rng_seed + r;
      c.campaign.scheduling_enabled = ss;
      arms.push_back(c);
    }
  }
  std::vector<CampaignRun> done(arms.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < arms.size();) {
      try {
        done[i] = run_campaign(arms[i], pool);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, arms.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool_threads;
    for (std::size_t t = 0; t < threads; ++t) pool_threads.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  AblationResult out;
  double sched = 0.0, wall = 0.0;
  for (std::size_t r = 0; r < repeats; ++r) {
    const CampaignRun& ss = done[2 * r];
    const CampaignRun& no = done[2 * r + 1];
    AblationPair p;
    p.rng_seed = ss.config.rng_seed;
    p.ss_findings = ss.result.finding_count();
    p.no_ss_findings = no.result.finding_count();
    p.ss_seconds = ss.result.timings.total_seconds;
    p.ss_scheduler_seconds = ss.result.timings.scheduler_seconds;
    p.no_ss_seconds = no.result.timings.total_seconds;
    out.mean_ss += static_cast<double>(p.ss_findings) / static_cast<double>(repeats);
    out.mean_no_ss += static_cast<double>(p.no_ss_findings) / static_cast<double>(repeats);
    out.ss_not_worse += p.ss_findings >= p.no_ss_findings;
    sched += p.ss_scheduler_seconds;
    wall += p.ss_seconds;
    out.pairs.push_back(p);
  }
  if (out.mean_no_ss > 0.0) {
    out.relative_increase_pct = 100.0 * (out.mean_ss - out.mean_no_ss) / out.mean_no_ss;
  } else if (out.mean_ss == 0.0) {
    out.relative_increase_pct = 0.0;
  }
  out.overhead_fraction = fraction(sched, wall);
  if (runs) std::move(done.begin(), done.end(), std::back_inserter(*runs));
  return out;
}

json to_json(const AblationResult& r) {
  json pairs = json::array();
  for (const auto& p : r.pairs)
    pairs.push_back({{"rng_seed", p.rng_seed},
                     {"ss_findings", p.ss_findings},
                     {"no_ss_findings", p.no_ss_findings},
                     {"ss_wall_time_s", p.ss_seconds},
                     {"ss_scheduler_time_s", p.ss_scheduler_seconds},
                     {"no_ss_wall_time_s", p.no_ss_seconds}});
  std::ostringstream overhead;
  overhead << std::fixed << std::setprecision(1) << 100.0 * r.overhead_fraction << '%';
  return {{"schema_version", kReportSchemaVersion},
          {"pairs", pairs},
          {"mean_ss", r.mean_ss},
          {"mean_no_ss", r.mean_no_ss},
          {"relative_increase_pct", r.relative_increase_pct ? json(*r.relative_increase_pct) : json(nullptr)},
          {"ss_not_worse", r.ss_not_worse},
          {"scheduler_overhead_fraction", r.overhead_fraction},
          {"scheduler_overhead", overhead.str()}};
}

void write_ablation_csv(std::ostream& out, const AblationResult& r) {
  out << "rng_seed,arm,findings,wall_time_s,scheduler_time_s\n";
  for (const auto& p : r.pairs) {
    out << p.rng_seed << ",SS," << p.ss_findings << ',' << p.ss_seconds << ',' << p.ss_scheduler_seconds << '\n';
    out << p.rng_seed << ",no-SS," << p.no_ss_findings << ',' << p.no_ss_seconds << ",0\n";
  }
}

std::string to_string(ReproduceOutcome o) {
  switch (o) {
    case ReproduceOutcome::Reproduced: return "reproduced";
    case ReproduceOutcome::Mismatch: return "mismatch";
    case ReproduceOutcome::Fixed: return "fixed under current engine";
    case ReproduceOutcome::StillFires: return "still fires under current engine";
  }
  return "?";
}

ReproduceResult reproduce(const json& replay, const std::vector<std::string>& overrides) {
  ReproduceResult out;
  const json& embedded = replay.at("config");
  out.original = finding_from_json(replay.at("finding"));
  const AppConfig cfg = load_config(embedded, overrides);
  const bool same_config = to_json(cfg) == to_json(app_config_from_json(embedded));

  AppConfig run_cfg = cfg;
  run_cfg.rng_seed = out.original.rng_draw_ids.rng_seed;
  const IterationRecord rec =
      run_iteration(run_cfg.scenario, run_cfg.resolved_campaign(), out.original.seed_id, out.original.s0_seed,
                    static_cast<std::size_t>(out.original.rng_draw_ids.iteration));
  for (const auto& f : rec.findings)
    if (f.violation == out.original.violation) out.replayed = f;
  if (out.replayed) out.replayed->categories = classify(*out.replayed, run_cfg.classifier, run_cfg.resolved_campaign());

  if (!same_config) {
    out.outcome = out.replayed ? ReproduceOutcome::StillFires : ReproduceOutcome::Fixed;
    out.reason = rec.status == IterationStatus::Ok ? "" : to_string(rec.status) + ": " + rec.reason;
    return out;
  }
  if (!out.replayed) {
    out.outcome = ReproduceOutcome::Mismatch;
    out.reason = "the replayed iteration raised no " + to_string(out.original.violation) +
                 (rec.status == IterationStatus::Ok ? "" : " (" + to_string(rec.status) + ": " + rec.reason + ")");
    return out;
  }
  const json a = to_json(out.original), b = to_json(*out.replayed);
  for (const auto& [key, value] : a.items())
    if (!b.contains(key) || b.at(key).dump() != value.dump()) out.differing_fields.push_back(key);
  out.outcome = out.differing_fields.empty() ? ReproduceOutcome::Reproduced : ReproduceOutcome::Mismatch;
  return out;
}

void describe_finding(std::ostream& out, const Finding& f) {
  auto row = [&](const char* label, const Vector& a, const Vector& b) {
    out << label << '\n';
    for (Eigen::Index i = 0; i < a.size(); ++i)
      out << "  [" << i << "] seed " << std::setw(24) << json(a[i]).dump() << "  mutant " << std::setw(24)
          << json(b[i]).dump() << "  diff " << json(b[i] - a[i]).dump() << '\n';
  };
  out << to_string(f.violation) << " at iteration " << f.iteration << ", seed " << f.seed_id << " (rng_seed "
      << f.rng_draw_ids.rng_seed << ", stream " << f.rng_draw_ids.iteration << ")\n";
  row("initial positions", f.s0_seed.positions, f.s0_mut.positions);
  row("initial velocities", f.s0_seed.velocities, f.s0_mut.velocities);
  row("final positions", f.sT_seed.positions, f.sT_mut.positions);
  row("final velocities", f.sT_seed.velocities, f.sT_mut.velocities);
  out << "initial gap " << json(distance(f.s0_seed, f.s0_mut)).dump() << ", final gap "
      << json(distance(f.sT_seed, f.sT_mut)).dump() << '\n';
  out << "loss trace (" << f.loss_trace.size() << " entries):";
  const std::size_t n = f.loss_trace.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (n > 12 && i == 6) {
      out << " ...";
      i = n - 6;
    }
    out << ' ' << json(f.loss_trace[i]).dump();
  }
  out << '\n';
}

}  // namespace simfuzz
