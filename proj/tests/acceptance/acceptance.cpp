// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any fails.
//
//   simfuzz_acceptance            run every criterion
//   simfuzz_acceptance 1 8 10     run a subset

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "simfuzz/pipeline.hpp"

using namespace simfuzz;
using nlohmann::json;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradTol = 1e-5;
constexpr double kOneContactTol = 1e-3;
constexpr double kGradcheckBudgetS = 120.0;
constexpr double kPristineBudgetS = 30 * 60.0;
constexpr double kEnergyJump = 0.10;
constexpr double kClassifiedShare = 0.5;
constexpr double kArtRatio = 1.13;
constexpr std::size_t kArtSeeds = 5;
constexpr std::size_t kArtNotWorse = 4;
constexpr double kSchedulerShare = 0.05;
constexpr std::size_t kPoolSize = 10000;
constexpr std::size_t kClassifierInstances = 10000;
constexpr double kBoundaryBand = 1e-9;

const std::string kConfigs = SIMFUZZ_SOURCE_DIR "/configs/";

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

AppConfig config(const std::string& file, std::vector<std::string> overrides = {}) {
  return load_config(std::filesystem::path(kConfigs + file), overrides);
}

// Pools are shared between criteria; collecting 10K seeds is not free.
const SeedPool& pool_for(const AppConfig& cfg) {
  static std::map<std::uint64_t, SeedPool> cache;
  const std::uint64_t key = cfg.seedgen_scenario().hash() ^ (cfg.seedgen.rng_seed * 0x9e3779b97f4a7c15ull) ^
                            (cfg.seedgen.pool_size << 20);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, build_pool(cfg)).first;
  return it->second;
}

CampaignRun campaign(const AppConfig& cfg) { return run_campaign(cfg, pool_for(cfg)); }

// ---------------------------------------------------------------- 1

Verdict gradient_fidelity() {
  const auto t0 = Clock::now();
  GradcheckConfig free;
  free.samples = 100;
  free.tolerance = kGradTol;
  free.contacts = ContactFilter::None;
  const GradcheckReport box = run_gradcheck(Scenario::balls_in_box(4), free, 1);
  const GradcheckReport fall = run_gradcheck(config("free_fall.json").scenario, free, 1);

  GradcheckConfig one = free;
  one.tolerance = kOneContactTol;
  one.contacts = ContactFilter::One;
  const GradcheckReport contact = run_gradcheck(Scenario::balls_in_box(4), one, 1);
  const double elapsed = seconds_since(t0);

  const bool counts = box.samples.size() == 100 && fall.samples.size() == 100 && contact.samples.size() == 100;
  const bool pass = counts && box.passed && fall.passed && contact.passed && elapsed < kGradcheckBudgetS;
  return {pass, fmt("collision-free box max err %.2e, free fall %.2e (tol %.0e); one contact %.2e (tol %.0e), "
                    "%zu finite differences skipped; %.1f s (budget %.0f s)",
                    box.max_relative_error, fall.max_relative_error, kGradTol, contact.max_relative_error,
                    kOneContactTol, contact.skipped_components, elapsed, kGradcheckBudgetS)};
}

// ---------------------------------------------------------------- 2

// Kept for criterion 7's informational line.
std::optional<CampaignRun> g_default_box_run;

Verdict false_positive_budget() {
  const auto t0 = Clock::now();
  std::string detail;
  std::size_t total = 0;
  for (const char* file : {"free_fall.json", "balls_in_box.json", "crowded_box.json"}) {
    const CampaignRun run = campaign(config(file, {"campaign.max_iter=1000"}));
    const RunCounts c = count_run(run.result);
    total += c.findings;
    detail += fmt("%s %zu/%zu; ", to_string(run.config.scenario.kind).c_str(), c.findings, c.iterations);
    if (std::string(file) == "balls_in_box.json") g_default_box_run = run;
  }
  const double elapsed = seconds_since(t0);
  return {total == 0 && elapsed < kPristineBudgetS,
          detail + fmt("violations %zu (must be 0); %.0f s (budget %.0f s)", total, elapsed, kPristineBudgetS)};
}

// ---------------------------------------------------------------- 3

Verdict double_impulse_forward() {
  const CampaignRun run = campaign(config("crowded_box_double_impulse.json", {"campaign.max_iter=2000"}));
  const RunCounts c = count_run(run.result);
  return {c.forward >= 1 && c.energy_jumps >= 1,
          fmt("crowded box, 2000 iterations: %zu forward violations (need >= 1), %zu kinetic-energy jumps "
              "> %.0f%% (need >= 1), %zu backward",
              c.forward, c.energy_jumps, 100 * kEnergyJump, c.backward)};
}

// ---------------------------------------------------------------- 4 and 9

std::string g_zero_grad_payload;

Verdict backward_faults() {
  bool pass = true;
  std::string detail;
  for (const char* fault : {"dropped_unroll_grad", "zero_grad_segment"}) {
    const CampaignRun run =
        campaign(config("balls_in_box.json", {std::string("faults.") + fault + "=true", "campaign.max_iter=500"}));
    std::size_t backward = 0, classified = 0;
    for (const auto& f : run.findings) {
      if (f.violation != Violation::Backward) continue;
      ++backward;
      classified += f.categories.grad_direction || f.categories.grad_extent;
    }
    const double share = backward ? static_cast<double>(classified) / static_cast<double>(backward) : 0.0;
    pass = pass && backward >= 1 && share >= kClassifiedShare;
    detail += fmt("%s: %zu backward, %.0f%% direction/extent; ", fault, backward, 100 * share);
    if (std::string(fault) == "zero_grad_segment") g_zero_grad_payload = findings_payload(run.findings);
  }
  return {pass, detail + fmt("need >= 1 and >= %.0f%% each", 100 * kClassifiedShare)};
}

Verdict determinism() {
  const AppConfig cfg = config("balls_in_box.json", {"faults.zero_grad_segment=true", "campaign.max_iter=500"});
  if (g_zero_grad_payload.empty()) g_zero_grad_payload = findings_payload(campaign(cfg).findings);
  // Second run from a freshly collected pool.
  const std::string again = findings_payload(run_campaign(cfg, build_pool(cfg)).findings);
  const bool same = again == g_zero_grad_payload;
  return {same && !again.empty(), fmt("zero_grad_segment campaign run twice: payloads %s (%zu bytes)",
                                      same ? "byte-identical" : "differ", again.size())};
}

// ---------------------------------------------------------------- 5

Verdict contact_model() {
  const CampaignRun run =
      campaign(config("balls_in_box.json", {"faults.end_of_step_contact=true", "campaign.max_iter=2000"}));
  const RunCounts c = count_run(run.result);
  return {c.findings >= 1, fmt("2000 iterations: %zu violations (%zu forward, %zu backward), need >= 1", c.findings,
                               c.forward, c.backward)};
}

// ---------------------------------------------------------------- 6 and 7

std::optional<AblationResult> g_ablation;

const AblationResult& ablation() {
  if (!g_ablation) {
    const AppConfig cfg = config("crowded_box_double_impulse.json", {"campaign.max_iter=1000"});
    g_ablation = run_ablation(cfg, pool_for(cfg), kArtSeeds, 1);
  }
  return *g_ablation;
}

Verdict art_effectiveness() {
  const AblationResult& r = ablation();
  std::string per_seed;
  for (const auto& p : r.pairs) per_seed += fmt("%zu/%zu ", p.ss_findings, p.no_ss_findings);
  const double ratio = r.mean_no_ss > 0 ? r.mean_ss / r.mean_no_ss : std::numeric_limits<double>::infinity();
  return {r.ss_not_worse >= kArtNotWorse,
          fmt("SS/no-SS per seed %s; mean %.1f vs %.1f, ratio %.2f (%s %.2f); SS >= no-SS in %zu/%zu seeds "
              "(need >= %zu)",
              per_seed.c_str(), r.mean_ss, r.mean_no_ss, ratio, ratio >= kArtRatio ? "meets" : "below", kArtRatio,
              r.ss_not_worse, r.pairs.size(), kArtNotWorse)};
}

Verdict scheduler_overhead() {
  const AblationResult& r = ablation();
  double worst = 0.0;
  for (const auto& p : r.pairs) worst = std::max(worst, p.ss_scheduler_seconds / p.ss_seconds);
  std::string info;
  if (g_default_box_run) {
    const auto& t = g_default_box_run->result.timings;
    info = fmt("; default box (info) %.1f%%", 100 * t.scheduler_seconds / t.total_seconds);
  }
  return {r.overhead_fraction < kSchedulerShare && worst < kSchedulerShare,
          fmt("crowded box, %zu-seed pool, 1000 iterations x %zu: scheduler %.2f%% of wall time, worst run %.2f%% "
              "(limit %.0f%%)%s",
              kPoolSize, r.pairs.size(), 100 * r.overhead_fraction, 100 * worst, 100 * kSchedulerShare, info.c_str())};
}

// ---------------------------------------------------------------- 8

Verdict stc_validity() {
  bool pass = true;
  std::string detail;
  for (const char* file : {"free_fall.json", "balls_in_box.json", "crowded_box.json"}) {
    const AppConfig cfg = config(file);
    const SeedPool& pool = pool_for(cfg);
    std::size_t invalid = 0;
    for (const auto& s : pool.seeds) invalid += !check_constraints(cfg.scenario, s).valid;
    pass = pass && pool.size() == kPoolSize && invalid == 0;
    detail += fmt("%s r=%.2f: %zu/%zu invalid; ", to_string(cfg.scenario.kind).c_str(), cfg.scenario.radius, invalid,
                  pool.size());
  }
  const Scenario six = Scenario::balls_in_box(6);
  Rng rng(0);
  std::size_t gtc_invalid = 0;
  for (int i = 0; i < 1000; ++i) gtc_invalid += !check_constraints(six, uniform_random_state(six, 1.0, rng)).valid;
  pass = pass && gtc_invalid >= 1;
  return {pass, detail + fmt("uniform 6-ball states: %zu/1000 invalid (need >= 1)", gtc_invalid)};
}

// ---------------------------------------------------------------- 10

// Reference implementations, written independently of the classifier.
struct Reference {
  std::optional<bool> direction;
  bool in_band = false;
  std::size_t extent = 0;
};

Reference reference(const std::vector<double>& g, const std::vector<double>& ds, double theta,
                    const std::vector<double>& loss, const std::vector<double>& grad) {
  Reference r;
  long double dot = 0, gg = 0, dd = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    dot += -static_cast<long double>(g[i]) * ds[i];
    gg += static_cast<long double>(g[i]) * g[i];
    dd += static_cast<long double>(ds[i]) * ds[i];
  }
  if (gg > 0 && dd > 0) {
    const long double c = std::clamp(dot / std::sqrt(gg * dd), -1.0L, 1.0L);
    const long double angle = std::acos(c);
    r.direction = angle >= theta;
    r.in_band = std::abs(static_cast<double>(angle) - theta) < kBoundaryBand;
  }
  for (std::size_t i = 0; i < loss.size(); ++i)
    for (std::size_t j = 0; j < loss.size(); ++j)
      r.extent += loss[i] > loss[j] * (1 + kExtentSlack) && grad[i] * (1 + kExtentSlack) < grad[j];
  return r;
}

Verdict classifier_equivalence() {
  Rng rng(2024);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> u(0.0, 1.0), theta_d(0.05, std::numbers::pi - 0.05);
  std::uniform_int_distribution<int> dim(1, 24), len(0, 60), kind(0, 5);
  std::size_t checked = 0, banded = 0, banded_agree = 0, disagree = 0;
  for (std::size_t t = 0; t < kClassifierInstances; ++t) {
    const int n = dim(rng);
    std::vector<double> g(n), ds(n);
    for (auto& x : g) x = gauss(rng);
    for (auto& x : ds) x = gauss(rng) * 1e-4;
    const int k = kind(rng);
    if (k == 0) std::fill(g.begin(), g.end(), 0.0);
    if (k == 1) {  // exactly orthogonal in the first two coordinates
      std::fill(g.begin(), g.end(), 0.0);
      std::fill(ds.begin(), ds.end(), 0.0);
      g[0] = 1.0;
      if (n > 1) ds[1] = 1e-4; else ds[0] = 1e-4;
    }
    const double theta = k == 1 || k == 2 ? std::numbers::pi / 2 : theta_d(rng);

    const int m = len(rng);
    std::vector<double> loss(m), grad(m);
    double l = 1.0;
    for (int i = 0; i < m; ++i) {
      switch (kind(rng)) {
        case 0: loss[i] = i ? loss[i - 1] : 1.0; grad[i] = i ? grad[i - 1] : 1.0; break;  // ties
        case 1: loss[i] = l * (1 + 1e-10); grad[i] = 1 - 1e-10; break;                    // inside the slack
        default: l *= 0.5 + u(rng); loss[i] = l; grad[i] = u(rng);
      }
    }

    Vector gv(n), dv(n);
    for (int i = 0; i < n; ++i) gv[i] = g[i], dv[i] = ds[i];
    const Reference ref = reference(g, ds, theta, loss, grad);
    const std::optional<bool> got = classify_direction(gv, dv, theta);
    const std::size_t got_extent = extent_violations(loss, grad);
    if (ref.in_band) {
      ++banded;
      banded_agree += got == ref.direction;
    } else {
      ++checked;
      disagree += got != ref.direction;
    }
    disagree += got_extent != ref.extent;
  }
  return {disagree == 0, fmt("%zu instances (%zu direction checks): %zu disagreements; %zu inside the %.0e band excluded "
                             "(%zu of them agree anyway)",
                             kClassifierInstances, checked, disagree, banded, kBoundaryBand, banded_agree)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria = {
      {1, gradient_fidelity},       {8, stc_validity},      {10, classifier_equivalence},
      {2, false_positive_budget},   {3, double_impulse_forward}, {4, backward_faults},
      {5, contact_model},           {6, art_effectiveness}, {7, scheduler_overhead},
      {9, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  std::map<int, Verdict> results;
  for (const auto& [id, run] : criteria) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = Clock::now();
    try {
      results[id] = run();
    } catch (const std::exception& e) {
      results[id] = {false, std::string("exception: ") + e.what()};
    }
    std::cerr << "[criterion " << id << " took " << fmt("%.1f", seconds_since(t0)) << " s]\n";
  }
  int failed = 0;
  for (const auto& [id, v] : results) {
    std::cout << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << "\n";
    failed += !v.pass;
  }
  std::cout << results.size() - failed << "/" << results.size() << " criteria passed\n";
  return failed ? 1 : 0;
}
