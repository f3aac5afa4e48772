#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simfuzz/state.hpp"

namespace simfuzz {

enum class ScenarioKind { FreeFall, BallsInBox };

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& name);

/// Switchable corruptions of engine semantics. All-false is the pristine engine.
///
///  - double_impulse:      in a step that resolves two or more contacts, every
///                         ball-ball impulse is applied twice (forward).
///  - end_of_step_contact: contacts are found by an end-of-step penetration test and
///                         resolved by position projection instead of time of impact (forward).
///  - zero_grad_segment:   the adjoint treats the middle third of the steps as identity.
///  - dropped_unroll_grad: the adjoint treats every odd-indexed step as identity.
struct FaultSpec {
  bool double_impulse = false;
  bool end_of_step_contact = false;
  bool zero_grad_segment = false;
  bool dropped_unroll_grad = false;

  bool any() const {
    return double_impulse || end_of_step_contact || zero_grad_segment || dropped_unroll_grad;
  }
  bool operator==(const FaultSpec&) const = default;
};

class ScenarioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A physical world: bodies, geometry, constants and the integration grid.
///
/// Restitution is fixed at 1 and friction at 0; neither is configurable.
struct Scenario {
  ScenarioKind kind = ScenarioKind::BallsInBox;
  std::size_t body_count = 4;
  double radius = 0.1;
  std::array<double, 2> box_min{0.0, 0.0};
  std::array<double, 2> box_max{1.0, 1.0};
  std::vector<double> masses{1.0};  // one entry broadcasts to every body
  std::array<double, 2> gravity{0.0, 0.0};
  double dt = 0.01;
  std::size_t steps = 50;
  /// Declared bound on each component of an external force (newtons).
  double force_cap = 10.0;
  /// Contact events allowed within one step before the step is rejected.
  std::size_t max_events_per_step = 256;
  FaultSpec faults;

  static constexpr double restitution = 1.0;
  static constexpr double friction = 0.0;

  std::size_t dim() const { return kDims * body_count; }
  double duration() const { return dt * static_cast<double>(steps); }
  double mass(std::size_t body) const { return masses.size() == 1 ? masses[0] : masses.at(body); }

  /// Throws ScenarioError when an invariant does not hold.
  void validate() const;

  /// Stable 64-bit hash of the canonical serialisation (used to tag seed pools).
  std::uint64_t hash() const;

  static Scenario free_fall();
  static Scenario balls_in_box(std::size_t balls);
};

void to_json(nlohmann::json& j, const FaultSpec& f);
void from_json(const nlohmann::json& j, FaultSpec& f);
void to_json(nlohmann::json& j, const Scenario& s);
void from_json(const nlohmann::json& j, Scenario& s);

}  // namespace simfuzz
