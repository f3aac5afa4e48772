#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "simfuzz/scenario.hpp"
#include "simfuzz/state.hpp"

namespace simfuzz {

/// Raised when a step produces a non-finite state or exhausts its contact budget.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(std::size_t step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Penetration up to this depth (meters) still counts as a valid configuration.
inline constexpr double kValidityTolerance = 1e-9;

/// Wall identifiers used as the second member of a violating pair.
/// Wall w of body b is reported as the pair (b, body_count + w), with
/// w = 2 * axis + (0 for the min side, 1 for the max side).
struct ConstraintReport {
  bool valid = true;
  double worst_penetration = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> violating_pairs;
};

enum class ContactKind {
  Wall,     // time-of-impact wall reflection
  Pair,     // time-of-impact ball-ball impulse
  EndWall,  // end-of-step wall projection (fault path)
  EndPair,  // end-of-step ball-ball projection (fault path)
};

/// One resolved contact inside a step, with everything the adjoint needs.
struct ContactEvent {
  ContactKind kind = ContactKind::Wall;
  std::size_t a = 0;      // body index
  std::size_t b = 0;      // partner body, or body_count + wall id
  std::size_t axis = 0;   // wall axis (wall kinds only)
  bool max_side = false;  // wall side (wall kinds only)
  double delta = 0.0;     // drift before the contact (time-of-impact kinds)
  double time = 0.0;      // time within the step after the contact
  bool clamped = false;   // contact began overlapping; delta pinned to 0
  bool approaching = true;  // impulse applied (EndPair may only project)
  int impulse_multiplier = 1;
  Vector positions_before;  // segment start (TOI kinds) or pre-projection (end kinds)
  Vector velocities_before;
};

/// State after one step plus the contacts that were resolved in it.
struct StepRecord {
  State next;
  std::vector<ContactEvent> events;
  double kinetic_energy_before = 0.0;
  double kinetic_energy_after = 0.0;
};

/// One symplectic-Euler step with contact resolution.
///
/// The velocity is kicked by gravity and tau_i / m, positions drift with the
/// kicked velocity, and contacts are resolved by continuous time of impact
/// (ascending time, ties by the lowest (body, partner) pair). The faults in
/// `faults` select the corrupted forward paths.
State time_step(const Scenario& scenario, const State& s, const Vector& tau_i,
                const FaultSpec& faults, std::size_t step_index = 0);
State time_step(const Scenario& scenario, const State& s, const Vector& tau_i);

/// Same as time_step but also returns the resolved contacts.
StepRecord time_step_recorded(const Scenario& scenario, const State& s, const Vector& tau_i,
                              const FaultSpec& faults, std::size_t step_index = 0);

struct ForwardResult {
  State final_state;
  std::vector<State> trace;  // steps + 1 entries, trace.front() == s0
};

/// Full rollout: forward result plus the per-step contact records.
struct Rollout {
  std::vector<State> trace;
  std::vector<std::vector<ContactEvent>> events;  // one entry per step
  /// Kinetic energy just before and just after the contact phase of each step.
  std::vector<std::pair<double, double>> contact_energy;

  const State& final_state() const { return trace.back(); }
  std::size_t contact_count() const;
  /// Each body's own ordered list of (kind, partner) contacts, flattened with
  /// a separator per body. Rollouts with equal histories lie on the same smooth
  /// piece of the (force-free) trajectory map: contacts may drift across step
  /// boundaries and contacts on disjoint bodies may swap, but no contact
  /// appears, vanishes or changes order relative to another touching the same body.
  std::vector<std::size_t> contact_history() const;
};

ForwardResult forward(const Scenario& scenario, const State& s0, const ExternalForce& tau);
Rollout rollout(const Scenario& scenario, const State& s0, const ExternalForce& tau);

ConstraintReport check_constraints(const Scenario& scenario, const State& s);

struct ConservedQuantities {
  double kinetic_energy = 0.0;
  Vec2 momentum = Vec2::Zero();
};

ConservedQuantities conserved_quantities(const Scenario& scenario, const State& s);

/// Steps whose kinetic energy changes by more than `relative_jump` across a
/// contact-bearing step. Used to witness impulse faults.
struct EnergyJump {
  std::size_t step = 0;
  double before = 0.0;
  double after = 0.0;
};
std::vector<EnergyJump> kinetic_energy_jumps(const Scenario& scenario, const Rollout& r,
                                             double relative_jump);

/// CSV trace export: header `t,x0,y0,...,vx0,vy0,...`, one row per state.
void write_trace_csv(std::ostream& out, const Scenario& scenario, const std::vector<State>& trace);

/// Meta seed shipped with each scenario kind: balls on a regular grid at rest,
/// or the free-falling body at the origin at rest.
State default_meta_seed(const Scenario& scenario);

}  // namespace simfuzz
