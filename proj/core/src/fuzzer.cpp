#include "simfuzz/fuzzer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "json_util.hpp"

namespace simfuzz {

using nlohmann::json;

void CampaignConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("campaign.") + name + " must be positive");
  };
  if (max_grad_iter < 1) throw std::invalid_argument("campaign.max_grad_iter must be at least 1");
  if (schedule_stride < 1) throw std::invalid_argument("campaign.schedule_stride must be at least 1");
  positive(eps_B, "eps_B");
  positive(mutation_magnitude, "mutation_magnitude");
  positive(alpha0, "alpha0");
  positive(alpha_floor, "alpha_floor");
  if (!(eps_F >= 1e-12)) throw std::invalid_argument("campaign.eps_F must be at least 1e-12");
  if (!(eps_I >= 1e-12)) throw std::invalid_argument("campaign.eps_I must be at least 1e-12");
  if (!(energy_jump_threshold > 0.0)) throw std::invalid_argument("campaign.energy_jump_threshold must be positive");
  if (!(force_cap >= 0.0)) throw std::invalid_argument("campaign.force_cap must be non-negative");
  if (!(weights.position >= 0.0) || !(weights.velocity >= 0.0))
    throw std::invalid_argument("campaign distance weights must be non-negative");
}

NLOHMANN_JSON_SERIALIZE_ENUM(StepRule, {{StepRule::Fixed, "fixed"}, {StepRule::Backtracking, "backtracking"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ThresholdOn, {{ThresholdOn::Loss, "loss"}, {ThresholdOn::Norm, "norm"}})

void to_json(json& j, const CampaignConfig& c) {
  j = {{"max_iter", c.max_iter},
       {"max_grad_iter", c.max_grad_iter},
       {"eps_B", c.eps_B},
       {"eps_F", c.eps_F},
       {"eps_I", c.eps_I},
       {"eps_B_on", c.eps_B_on},
       {"eps_F_on", c.eps_F_on},
       {"mutation_magnitude", c.mutation_magnitude},
       {"step_rule", c.step_rule},
       {"alpha0", c.alpha0},
       {"alpha_floor", c.alpha_floor},
       {"scheduling_enabled", c.scheduling_enabled},
       {"schedule_stride", c.schedule_stride},
       {"force_cap", c.force_cap},
       {"contact_guard", c.contact_guard},
       {"energy_jump_threshold", c.energy_jump_threshold},
       {"position_weight", c.weights.position},
       {"velocity_weight", c.weights.velocity}};
}

void from_json(const json& j, CampaignConfig& c) {
  detail::reject_unknown_keys(j,
                              {"max_iter", "max_grad_iter", "eps_B", "eps_F", "eps_I", "eps_B_on", "eps_F_on",
                               "mutation_magnitude", "step_rule", "alpha0", "alpha_floor", "scheduling_enabled",
                               "schedule_stride", "force_cap", "contact_guard", "energy_jump_threshold", "position_weight", "velocity_weight"},
                              "campaign");
  // Enum conversion silently maps unknown strings to the first value; check first.
  auto check_enum = [&](const char* key, const char* a, const char* b) {
    if (auto it = j.find(key); it != j.end() && *it != a && *it != b)
      throw std::invalid_argument(std::string("campaign.") + key + " must be \"" + a + "\" or \"" + b + "\"");
  };
  check_enum("eps_B_on", "loss", "norm");
  check_enum("eps_F_on", "loss", "norm");
  check_enum("step_rule", "fixed", "backtracking");
  detail::get_if_present(j, "max_iter", c.max_iter);
  detail::get_if_present(j, "max_grad_iter", c.max_grad_iter);
  detail::get_if_present(j, "eps_B", c.eps_B);
  detail::get_if_present(j, "eps_F", c.eps_F);
  detail::get_if_present(j, "eps_I", c.eps_I);
  detail::get_if_present(j, "eps_B_on", c.eps_B_on);
  detail::get_if_present(j, "eps_F_on", c.eps_F_on);
  detail::get_if_present(j, "mutation_magnitude", c.mutation_magnitude);
  detail::get_if_present(j, "step_rule", c.step_rule);
  detail::get_if_present(j, "alpha0", c.alpha0);
  detail::get_if_present(j, "alpha_floor", c.alpha_floor);
  detail::get_if_present(j, "scheduling_enabled", c.scheduling_enabled);
  detail::get_if_present(j, "schedule_stride", c.schedule_stride);
  detail::get_if_present(j, "force_cap", c.force_cap);
  detail::get_if_present(j, "contact_guard", c.contact_guard);
  detail::get_if_present(j, "energy_jump_threshold", c.energy_jump_threshold);
  detail::get_if_present(j, "position_weight", c.weights.position);
  detail::get_if_present(j, "velocity_weight", c.weights.velocity);
}

std::string to_string(Violation v) { return v == Violation::Forward ? "ForwardViolation" : "BackwardViolation"; }

std::string to_string(IterationStatus s) {
  switch (s) {
    case IterationStatus::Ok: return "ok";
    case IterationStatus::Skipped: return "skipped";
    case IterationStatus::NumericFailure: return "numeric_failure";
  }
  return "?";
}

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_eigen(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json state_json(const State& s) { return {{"positions", to_std(s.positions)}, {"velocities", to_std(s.velocities)}}; }

State state_from(const json& j) { return {to_eigen(j.at("positions")), to_eigen(j.at("velocities"))}; }

constexpr double kMaxAlpha = 1e6;

double threshold_value(double loss, ThresholdOn on) { return on == ThresholdOn::Loss ? loss : std::sqrt(loss); }

double angle_between(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::acos(std::clamp(a.dot(b) / (na * nb), -1.0, 1.0));
}

// JSON has no NaN; undefined angles travel as null.
json nullable(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(std::isnan(x) ? json(nullptr) : json(x));
  return out;
}

std::vector<double> from_nullable(const json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>());
  return out;
}

}  // namespace

json to_json(const Finding& f) {
  const auto& c = f.categories;
  return {{"seed_id", f.seed_id},
          {"iteration", f.iteration},
          {"violation", to_string(f.violation)},
          {"s0_seed", state_json(f.s0_seed)},
          {"s0_mut", state_json(f.s0_mut)},
          {"sT_seed", state_json(f.sT_seed)},
          {"sT_mut", state_json(f.sT_mut)},
          {"delta_s_initial", to_std(f.delta_s_initial)},
          {"delta_s_final", to_std(f.delta_s_final)},
          {"initial_gradient", to_std(f.initial_gradient)},
          {"loss_trace", f.loss_trace},
          {"grad_norm_trace", f.grad_norm_trace},
          {"contact_change", f.contact_change},
          {"direction_angle_trace", nullable(f.direction_angle_trace)},
          {"categories",
           {{"ForwardPosition", c.forward_position},
            {"ForwardVelocity", c.forward_velocity},
            {"GradDirection", c.grad_direction},
            {"GradExtent", c.grad_extent},
            {"Unapparent", c.unapparent},
            {"position_gap", c.position_gap},
            {"velocity_gap", c.velocity_gap},
            {"direction_angle", std::isnan(c.direction_angle) ? json(nullptr) : json(c.direction_angle)},
            {"extent_pairs", c.extent_pairs},
            {"note", c.note}}},
          {"rng_draw_ids", {{"rng_seed", f.rng_draw_ids.rng_seed}, {"iteration", f.rng_draw_ids.iteration}}}};
}

Finding finding_from_json(const json& j) {
  Finding f;
  f.seed_id = j.at("seed_id").get<std::size_t>();
  f.iteration = j.at("iteration").get<std::size_t>();
  const auto v = j.at("violation").get<std::string>();
  if (v == "ForwardViolation") {
    f.violation = Violation::Forward;
  } else if (v == "BackwardViolation") {
    f.violation = Violation::Backward;
  } else {
    throw std::invalid_argument("unknown violation '" + v + "'");
  }
  f.s0_seed = state_from(j.at("s0_seed"));
  f.s0_mut = state_from(j.at("s0_mut"));
  f.sT_seed = state_from(j.at("sT_seed"));
  f.sT_mut = state_from(j.at("sT_mut"));
  f.delta_s_initial = to_eigen(j.at("delta_s_initial"));
  f.delta_s_final = to_eigen(j.at("delta_s_final"));
  f.initial_gradient = to_eigen(j.at("initial_gradient"));
  f.loss_trace = j.at("loss_trace").get<std::vector<double>>();
  f.grad_norm_trace = j.at("grad_norm_trace").get<std::vector<double>>();
  f.contact_change = j.at("contact_change").get<std::vector<bool>>();
  f.direction_angle_trace = from_nullable(j.at("direction_angle_trace"));
  const auto& c = j.at("categories");
  f.categories.forward_position = c.at("ForwardPosition").get<bool>();
  f.categories.forward_velocity = c.at("ForwardVelocity").get<bool>();
  f.categories.grad_direction = c.at("GradDirection").get<bool>();
  f.categories.grad_extent = c.at("GradExtent").get<bool>();
  f.categories.unapparent = c.at("Unapparent").get<bool>();
  f.categories.position_gap = c.at("position_gap").get<double>();
  f.categories.velocity_gap = c.at("velocity_gap").get<double>();
  f.categories.direction_angle = c.at("direction_angle").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                                   : c.at("direction_angle").get<double>();
  f.categories.extent_pairs = c.at("extent_pairs").get<std::size_t>();
  f.categories.note = c.at("note").get<std::string>();
  f.rng_draw_ids.rng_seed = j.at("rng_draw_ids").at("rng_seed").get<std::uint64_t>();
  f.rng_draw_ids.iteration = j.at("rng_draw_ids").at("iteration").get<std::uint64_t>();
  return f;
}

std::optional<Vector> mutate(const Scenario& scenario, const State& s0_seed, double magnitude, Rng& rng,
                             std::size_t* redraws, const std::function<bool(const State&)>& accept) {
  if (!(magnitude > 0.0)) throw std::invalid_argument("mutation magnitude must be positive");
  constexpr int kRedraws = 100;
  constexpr int kShrinks = 10;
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(2 * s0_seed.dim());
  const Vector base = s0_seed.flat();
  std::size_t draws = 0;
  for (int shrink = 0; shrink <= kShrinks; ++shrink, magnitude *= 0.5) {
    for (int attempt = 0; attempt < kRedraws; ++attempt) {
      Vector d(n);
      for (Eigen::Index k = 0; k < n; ++k) d[k] = normal(rng);
      const double norm = d.norm();
      if (norm == 0.0) continue;
      d *= magnitude / norm;
      ++draws;
      const State candidate = State::from_flat(base + d);
      if (check_constraints(scenario, candidate).valid && (!accept || accept(candidate))) {
        if (redraws) *redraws = draws - 1;
        return d;
      }
    }
  }
  if (redraws) *redraws = draws;
  return std::nullopt;
}

DescentResult grad_descent(const Scenario& scenario, const State& s0_seed, const State& sT_seed,
                           const Vector& delta_s0, const ExternalForce& tau, const CampaignConfig& cfg) {
  DescentResult res;
  const Vector base = s0_seed.flat();
  res.delta_s = delta_s0;

  Rollout r;
  GradientResult g;
  try {
    r = rollout(scenario, State::from_flat(base + res.delta_s), tau);
    g = backward_from(scenario, r, sT_seed);
  } catch (const SimulationError& e) {
    res.numeric_failure = e.what();
    return res;
  }
  res.initial_gradient = g.grad_s0;
  std::vector<std::size_t> guard;
  if (cfg.contact_guard) guard = rollout(scenario, s0_seed, tau).contact_history();
  auto signature = r.contact_history();
  double alpha = cfg.alpha0;
  Vector prev_delta, prev_grad;

  for (std::size_t k = 0;; ++k) {
    if (!std::isfinite(g.loss) || !g.grad_s0.allFinite()) {
      res.numeric_failure = "non-finite loss or gradient at descent step " + std::to_string(k);
      break;
    }
    res.loss_trace.push_back(g.loss);
    res.grad_norm_trace.push_back(g.grad_s0.norm());
    res.direction_angle_trace.push_back(angle_between(-g.grad_s0, res.delta_s));
    auto next_signature = r.contact_history();
    res.contact_change.push_back(k > 0 && next_signature != signature);
    signature = std::move(next_signature);
    if (threshold_value(g.loss, cfg.eps_B_on) < cfg.eps_B || k == cfg.max_grad_iter) break;

    Vector candidate;
    Rollout trial;
    if (cfg.step_rule == StepRule::Fixed) {
      candidate = res.delta_s - cfg.alpha0 * g.grad_s0;
      try {
        trial = rollout(scenario, State::from_flat(base + candidate), tau);
      } catch (const SimulationError& e) {
        res.numeric_failure = e.what();
        break;
      }
    } else {
      // First trial step: Barzilai-Borwein estimate s.s / s.y from the last
      // accepted move, which tracks the curvature along slow directions far
      // better than a capped constant. Then halve until the loss decreases.
      alpha = std::min(cfg.alpha0, 2.0 * alpha);
      if (k > 0) {
        const Vector sdiff = res.delta_s - prev_delta;
        const double sy = sdiff.dot(g.grad_s0 - prev_grad);
        if (sy > 0.0 && std::isfinite(sy)) alpha = std::min(sdiff.squaredNorm() / sy, kMaxAlpha);
      }
      prev_delta = res.delta_s;
      prev_grad = g.grad_s0;
      bool accepted = false;
      for (; alpha >= cfg.alpha_floor; alpha *= 0.5) {
        candidate = res.delta_s - alpha * g.grad_s0;
        // Iterates stay inside the valid state space, like the mutation itself;
        // overlapping balls that separate without a contact fake a second preimage.
        if (!check_constraints(scenario, State::from_flat(base + candidate)).valid) continue;
        try {
          trial = rollout(scenario, State::from_flat(base + candidate), tau);
        } catch (const SimulationError&) {
          continue;  // step left the region the engine can integrate; shrink
        }
        if (cfg.contact_guard && trial.contact_history() != guard) continue;
        if (loss(trial.final_state(), sT_seed) < g.loss) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        res.stalled = true;
        break;
      }
    }
    res.delta_s = std::move(candidate);
    r = std::move(trial);
    try {
      g = backward_from(scenario, r, sT_seed);
    } catch (const SimulationError& e) {
      res.numeric_failure = e.what();
      break;
    }
  }
  res.final_mut = r.final_state();
  return res;
}

OracleResult violate_oracle(const State& s0_seed, const State& s0_mut, const State& sT_seed,
                            const State& sT_mut, double final_loss, const CampaignConfig& cfg) {
  if (s0_seed.dim() != s0_mut.dim() || sT_seed.dim() != sT_mut.dim() || s0_seed.dim() != sT_seed.dim())
    throw std::invalid_argument("oracle states differ in dimension");
  OracleResult out;
  out.backward = threshold_value(final_loss, cfg.eps_B_on) > cfg.eps_B;
  const double final_gap = threshold_value(squared_distance(sT_seed, sT_mut), cfg.eps_F_on);
  out.forward = final_gap < cfg.eps_F && distance(s0_seed, s0_mut) > cfg.eps_I;
  return out;
}

IterationRecord run_iteration(const Scenario& scenario, const CampaignConfig& cfg, std::size_t seed_id,
                              const State& s0_seed, std::size_t iteration) {
  IterationRecord rec;
  rec.iteration = iteration;
  rec.seed_id = seed_id;
  Rng rng = make_stream(cfg.rng_seed, iteration);
  const ExternalForce tau = rand_force(scenario.steps, scenario.dim(), cfg.force_cap, rng);

  State sT_seed;
  std::vector<std::size_t> sequence;
  try {
    const Rollout seed_run = rollout(scenario, s0_seed, tau);
    sT_seed = seed_run.final_state();
    sequence = seed_run.contact_history();
    rec.energy_jumps = kinetic_energy_jumps(scenario, seed_run, cfg.energy_jump_threshold).size();
  } catch (const SimulationError& e) {
    rec.status = IterationStatus::NumericFailure;
    rec.reason = std::string("seed run: ") + e.what();
    return rec;
  }
  std::function<bool(const State&)> same_contacts;
  if (cfg.contact_guard) {
    same_contacts = [&](const State& s) {
      try {
        return rollout(scenario, s, tau).contact_history() == sequence;
      } catch (const SimulationError&) {
        return false;
      }
    };
  }
  const auto delta = mutate(scenario, s0_seed, cfg.mutation_magnitude, rng, &rec.mutation_redraws, same_contacts);
  if (!delta) {
    rec.status = IterationStatus::Skipped;
    rec.reason = "no acceptable mutation after 100 redraws x 10 shrinks";
    return rec;
  }
  DescentResult d = grad_descent(scenario, s0_seed, sT_seed, *delta, tau, cfg);
  rec.descent_steps = d.loss_trace.empty() ? 0 : d.loss_trace.size() - 1;
  if (!d.numeric_failure.empty()) {
    rec.status = IterationStatus::NumericFailure;
    rec.reason = d.numeric_failure;
    return rec;
  }
  rec.final_loss = d.loss_trace.back();
  const State s0_mut = State::from_flat(s0_seed.flat() + d.delta_s);
  const OracleResult o = violate_oracle(s0_seed, s0_mut, sT_seed, d.final_mut, rec.final_loss, cfg);
  for (Violation v : {Violation::Forward, Violation::Backward}) {
    if (!(v == Violation::Forward ? o.forward : o.backward)) continue;
    Finding f;
    f.seed_id = seed_id;
    f.iteration = iteration;
    f.violation = v;
    f.s0_seed = s0_seed;
    f.s0_mut = s0_mut;
    f.sT_seed = sT_seed;
    f.sT_mut = d.final_mut;
    f.delta_s_initial = *delta;
    f.delta_s_final = d.delta_s;
    f.initial_gradient = d.initial_gradient;
    f.loss_trace = d.loss_trace;
    f.grad_norm_trace = d.grad_norm_trace;
    f.contact_change = d.contact_change;
    f.direction_angle_trace = d.direction_angle_trace;
    f.rng_draw_ids = {cfg.rng_seed, iteration};
    rec.findings.push_back(std::move(f));
  }
  return rec;
}

std::size_t CampaignResult::finding_count() const {
  std::size_t n = 0;
  for (const auto& it : iterations) n += it.findings.size();
  return n;
}

std::size_t CampaignResult::count(Violation v) const {
  std::size_t n = 0;
  for (const auto& it : iterations)
    for (const auto& f : it.findings) n += f.violation == v;
  return n;
}

std::size_t CampaignResult::energy_jumps() const {
  std::size_t n = 0;
  for (const auto& it : iterations) n += it.energy_jumps;
  return n;
}

std::vector<Finding> CampaignResult::findings() const {
  std::vector<Finding> out;
  for (const auto& it : iterations) out.insert(out.end(), it.findings.begin(), it.findings.end());
  return out;
}

CampaignResult fuzz_campaign(const Scenario& scenario, const SeedPool& pool, const CampaignConfig& cfg,
                             bool record_queue) {
  if (pool.seeds.empty()) throw std::invalid_argument("seed pool is empty");
  cfg.validate();
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::duration d) { return std::chrono::duration<double>(d).count(); };

  CampaignResult out;
  const auto start = clock::now();
  SeedQueue queue(pool.seeds, cfg.weights);
  for (std::size_t it = 0; it < cfg.max_iter && !queue.empty(); ++it) {
    const auto t0 = clock::now();
    const QueueEntry entry = queue.pop_front();
    IterationRecord rec = run_iteration(scenario, cfg, entry.id, queue.state(entry.id), it);
    queue.mark_fuzzed(entry.id, rec.failure_causing());
    if (cfg.scheduling_enabled && (it + 1) % cfg.schedule_stride == 0) {
      const auto s0 = clock::now();
      queue.schedule();
      out.timings.scheduler_seconds += seconds(clock::now() - s0);
    }
    if (record_queue) {
      std::ostringstream row;
      queue.write_top_energies(row, it);
      out.queue_diagnostics.push_back(row.str());
    }
    out.iterations.push_back(std::move(rec));
    out.timings.iteration_seconds.push_back(seconds(clock::now() - t0));
  }
  out.timings.total_seconds = seconds(clock::now() - start);
  return out;
}

}  // namespace simfuzz
