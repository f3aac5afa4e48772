#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simfuzz/adjoint.hpp"
#include "simfuzz/rng.hpp"
#include "simfuzz/scheduler.hpp"
#include "simfuzz/seedgen.hpp"

namespace simfuzz {

enum class StepRule { Fixed, Backtracking };

/// Which quantity a threshold is compared against: the squared final-state
/// gap (the loss) or its square root.
enum class ThresholdOn { Loss, Norm };

struct CampaignConfig {
  std::size_t max_iter = 1000;
  std::size_t max_grad_iter = 2000;
  double eps_B = 1e-11;
  double eps_F = 3e-8;
  double eps_I = 3e-6;
  ThresholdOn eps_B_on = ThresholdOn::Loss;
  ThresholdOn eps_F_on = ThresholdOn::Norm;
  double mutation_magnitude = 3e-5;
  StepRule step_rule = StepRule::Backtracking;
  double alpha0 = 0.5;
  double alpha_floor = 1e-8;
  std::uint64_t rng_seed = 0;
  bool scheduling_enabled = true;
  std::size_t schedule_stride = 1;
  // Any force kick that lands on the other side of a contact from one step to
  // the next jumps the state by 2 dt (F.n)/m, so campaign forces must stay
  // far below what the thresholds resolve.
  double force_cap = 1e-6;
  /// Keep mutants and descent iterates on the seed's contact history.
  bool contact_guard = true;
  /// Relative kinetic-energy change across a contact phase that the monitor logs.
  double energy_jump_threshold = 0.1;
  DistanceWeights weights;

  void validate() const;
};

void to_json(nlohmann::json& j, const CampaignConfig& c);
void from_json(const nlohmann::json& j, CampaignConfig& c);

enum class Violation { Forward, Backward };
std::string to_string(Violation v);

/// Category flags; filled in by the classifier.
struct CategorySet {
  bool forward_position = false;
  bool forward_velocity = false;
  bool grad_direction = false;
  bool grad_extent = false;
  bool unapparent = false;
  double position_gap = 0.0;
  double velocity_gap = 0.0;
  double direction_angle = 0.0;  // NaN when undefined
  std::size_t extent_pairs = 0;
  std::string note;
};

struct RngDrawIds {
  std::uint64_t rng_seed = 0;
  std::uint64_t iteration = 0;
  bool operator==(const RngDrawIds&) const = default;
};

struct Finding {
  std::size_t seed_id = 0;
  std::size_t iteration = 0;
  Violation violation = Violation::Backward;
  State s0_seed, s0_mut, sT_seed, sT_mut;
  Vector delta_s_initial, delta_s_final;
  Vector initial_gradient;  // gradient at delta_s_initial
  std::vector<double> loss_trace;
  std::vector<double> grad_norm_trace;
  std::vector<bool> contact_change;  // per descent iterate, vs the previous one
  std::vector<double> direction_angle_trace;  // angle(-g_k, ds_k) per iterate; NaN if undefined
  CategorySet categories;
  RngDrawIds rng_draw_ids;
};

nlohmann::json to_json(const Finding& f);
Finding finding_from_json(const nlohmann::json& j);

/// Random perturbation of norm `magnitude` keeping s0_seed + delta valid (and
/// accepted by `accept`, when given). Returns nullopt after 10 halvings of 100
/// rejected redraws each.
std::optional<Vector> mutate(const Scenario& scenario, const State& s0_seed, double magnitude, Rng& rng,
                             std::size_t* redraws = nullptr,
                             const std::function<bool(const State&)>& accept = {});

struct DescentResult {
  Vector delta_s;
  std::vector<double> loss_trace;
  std::vector<double> grad_norm_trace;
  std::vector<bool> contact_change;
  std::vector<double> direction_angle_trace;
  Vector initial_gradient;
  State final_mut;  // forward(s0_seed + delta_s).final
  bool stalled = false;
  std::string numeric_failure;  // non-empty when the descent aborted
};

/// Gradient descent on L(ds) = ||forward(s0_seed + ds).final - sT_seed||^2.
///
/// Backtracking starts each step from a Barzilai-Borwein estimate and halves
/// until the loss decreases; with cfg.contact_guard it also halves steps that
/// leave the seed's contact history. Below cfg.alpha_floor the descent stalls.
DescentResult grad_descent(const Scenario& scenario, const State& s0_seed, const State& sT_seed,
                           const Vector& delta_s0, const ExternalForce& tau, const CampaignConfig& cfg);

struct OracleResult {
  bool forward = false;
  bool backward = false;
  bool any() const { return forward || backward; }
};

OracleResult violate_oracle(const State& s0_seed, const State& s0_mut, const State& sT_seed,
                            const State& sT_mut, double final_loss, const CampaignConfig& cfg);

enum class IterationStatus { Ok, Skipped, NumericFailure };
std::string to_string(IterationStatus s);

struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t seed_id = 0;
  IterationStatus status = IterationStatus::Ok;
  std::string reason;
  std::size_t mutation_redraws = 0;
  std::size_t descent_steps = 0;
  double final_loss = 0.0;
  std::size_t energy_jumps = 0;  // contact steps of the seed run breaking energy conservation
  std::vector<Finding> findings;
  bool failure_causing() const { return status == IterationStatus::NumericFailure || !findings.empty(); }
};

/// One fuzz iteration of seed `seed_id` using RNG stream (cfg.rng_seed, iteration).
IterationRecord run_iteration(const Scenario& scenario, const CampaignConfig& cfg, std::size_t seed_id,
                              const State& s0_seed, std::size_t iteration);

struct CampaignTimings {
  double total_seconds = 0.0;
  double scheduler_seconds = 0.0;
  std::vector<double> iteration_seconds;
};

struct CampaignResult {
  std::vector<IterationRecord> iterations;  // includes the RNG audit (seed, stream, redraws)
  CampaignTimings timings;
  std::vector<std::string> queue_diagnostics;  // rows of `iteration,e1..e5`

  std::size_t finding_count() const;
  std::size_t count(Violation v) const;
  std::size_t energy_jumps() const;
  std::vector<Finding> findings() const;
};

CampaignResult fuzz_campaign(const Scenario& scenario, const SeedPool& pool, const CampaignConfig& cfg,
                             bool record_queue = false);

}  // namespace simfuzz
