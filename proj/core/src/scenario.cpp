#include "simfuzz/scenario.hpp"

#include <cmath>

#include "json_util.hpp"

namespace simfuzz {

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::FreeFall: return "FreeFall";
    case ScenarioKind::BallsInBox: return "BallsInBox";
  }
  return "?";
}

ScenarioKind scenario_kind_from_string(const std::string& name) {
  if (name == "FreeFall") return ScenarioKind::FreeFall;
  if (name == "BallsInBox") return ScenarioKind::BallsInBox;
  throw ScenarioError("unknown scenario kind '" + name + "'");
}

void Scenario::validate() const {
  if (body_count == 0) throw ScenarioError("body_count must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ScenarioError("dt must be positive");
  if (steps == 0) throw ScenarioError("steps must be at least 1");
  if (!(radius > 0.0)) throw ScenarioError("radius must be positive");
  if (masses.size() != 1 && masses.size() != body_count)
    throw ScenarioError("masses must have 1 or body_count entries");
  for (double m : masses)
    if (!(m > 0.0) || !std::isfinite(m)) throw ScenarioError("masses must be positive");
  if (!(force_cap >= 0.0)) throw ScenarioError("force_cap must be non-negative");
  if (max_events_per_step == 0) throw ScenarioError("max_events_per_step must be positive");
  if (kind == ScenarioKind::BallsInBox) {
    for (std::size_t d = 0; d < kDims; ++d)
      if (!(box_max[d] - box_min[d] > 2.0 * radius))
        throw ScenarioError("box must be wider than one ball on every axis");
  }
}

std::uint64_t Scenario::hash() const {
  const std::string canonical = nlohmann::json(*this).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Scenario Scenario::free_fall() {
  Scenario s;
  s.kind = ScenarioKind::FreeFall;
  s.body_count = 1;
  s.gravity = {0.0, -10.0};
  s.dt = 0.01;
  s.steps = 100;
  s.force_cap = 10.0;
  return s;
}

Scenario Scenario::balls_in_box(std::size_t balls) {
  Scenario s;
  s.kind = ScenarioKind::BallsInBox;
  s.body_count = balls;
  return s;
}

void to_json(nlohmann::json& j, const FaultSpec& f) {
  j = {{"double_impulse", f.double_impulse},
       {"end_of_step_contact", f.end_of_step_contact},
       {"zero_grad_segment", f.zero_grad_segment},
       {"dropped_unroll_grad", f.dropped_unroll_grad}};
}

void from_json(const nlohmann::json& j, FaultSpec& f) {
  detail::reject_unknown_keys(
      j, {"double_impulse", "end_of_step_contact", "zero_grad_segment", "dropped_unroll_grad"},
      "scenario.faults");
  detail::get_if_present(j, "double_impulse", f.double_impulse);
  detail::get_if_present(j, "end_of_step_contact", f.end_of_step_contact);
  detail::get_if_present(j, "zero_grad_segment", f.zero_grad_segment);
  detail::get_if_present(j, "dropped_unroll_grad", f.dropped_unroll_grad);
}

void to_json(nlohmann::json& j, const Scenario& s) {
  j = {{"kind", to_string(s.kind)},
       {"body_count", s.body_count},
       {"radius", s.radius},
       {"box_min", s.box_min},
       {"box_max", s.box_max},
       {"masses", s.masses},
       {"gravity", s.gravity},
       {"dt", s.dt},
       {"steps", s.steps},
       {"force_cap", s.force_cap},
       {"max_events_per_step", s.max_events_per_step},
       {"faults", s.faults}};
}

void from_json(const nlohmann::json& j, Scenario& s) {
  detail::reject_unknown_keys(j,
                              {"kind", "body_count", "radius", "box_min", "box_max", "masses",
                               "gravity", "dt", "steps", "force_cap", "max_events_per_step",
                               "faults"},
                              "scenario");
  if (auto it = j.find("kind"); it != j.end()) s.kind = scenario_kind_from_string(it->get<std::string>());
  detail::get_if_present(j, "body_count", s.body_count);
  detail::get_if_present(j, "radius", s.radius);
  detail::get_if_present(j, "box_min", s.box_min);
  detail::get_if_present(j, "box_max", s.box_max);
  detail::get_if_present(j, "masses", s.masses);
  detail::get_if_present(j, "gravity", s.gravity);
  detail::get_if_present(j, "dt", s.dt);
  detail::get_if_present(j, "steps", s.steps);
  detail::get_if_present(j, "force_cap", s.force_cap);
  detail::get_if_present(j, "max_events_per_step", s.max_events_per_step);
  if (auto it = j.find("faults"); it != j.end()) it->get_to(s.faults);
}

}  // namespace simfuzz
