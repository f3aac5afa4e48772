#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simfuzz/adjoint.hpp"

namespace simfuzz {

/// Which sampled states a gradient check keeps, by contacts in their rollout.
enum class ContactFilter { None, One, Any };

struct GradcheckConfig {
  std::size_t samples = 100;
  double tolerance = 1e-5;
  double h = kDefaultFiniteDifferenceStep;
  ContactFilter contacts = ContactFilter::None;
  double max_speed = 0.5;
  double force_cap = 1.0;  // per-component bound on the random external force
  std::size_t max_attempts = 100000;  // draws per sample before giving up

  void validate() const;
};

void to_json(nlohmann::json& j, const GradcheckConfig& c);
void from_json(const nlohmann::json& j, GradcheckConfig& c);

struct GradcheckSample {
  std::size_t index = 0;
  std::size_t contacts = 0;
  std::size_t skipped_components = 0;  // finite differences that changed the contact sequence
  double relative_error = 0.0;
  std::size_t worst_component = 0;
  double analytic = 0.0;
  double reference = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckSample> samples;
  std::size_t skipped_components = 0;
  double max_relative_error = 0.0;
  std::size_t worst_sample = 0;
  bool passed = true;  // max_relative_error <= tolerance (vacuous with no samples)
  std::string warning;
};

/// Compares the adjoint gradient with central differences on `cfg.samples`
/// random valid states. Sample i draws everything from stream (rng_seed, i):
/// the state, a force sequence and a target offset. Finite differences whose
/// perturbed rollout resolves a different contact sequence are skipped.
GradcheckReport run_gradcheck(const Scenario& scenario, const GradcheckConfig& cfg, std::uint64_t rng_seed);

/// Contacts of a rollout as (step, kind, a, b) tuples, flattened.
std::vector<std::size_t> contact_signature(const Rollout& r);

nlohmann::json to_json(const GradcheckReport& r);

}  // namespace simfuzz
