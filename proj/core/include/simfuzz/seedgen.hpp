#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "simfuzz/engine.hpp"
#include "simfuzz/rng.hpp"

namespace simfuzz {

/// Uniform per-component forces in [-cap, cap] for `steps` steps.
ExternalForce rand_force(std::size_t steps, std::size_t dim, double cap, Rng& rng);
ExternalForce rand_force(const Scenario& scenario, Rng& rng);

struct SeedProvenance {
  std::size_t trace_step = 0;  // steps simulated from the meta seed
  std::uint64_t draw_id = 0;   // RNG stream of the segment that produced the seed
};

/// A collected state that failed check_constraints (only possible under engine faults)
/// or a segment that raised a simulation error.
struct PreFinding {
  std::size_t trace_step = 0;
  std::uint64_t draw_id = 0;
  State state;
  ConstraintReport report;
  std::string error;
};

struct SeedPool {
  std::vector<State> seeds;
  State meta_seed;
  std::vector<SeedProvenance> provenance;
  std::vector<PreFinding> pre_findings;
  std::uint64_t scenario_hash = 0;
  std::uint64_t rng_seed = 0;
  std::size_t segment_len = 0;
  std::size_t chain_segments = 0;

  std::size_t size() const { return seeds.size(); }
};

class InvalidSeedError : public std::invalid_argument {
 public:
  InvalidSeedError(const std::string& what, ConstraintReport report)
      : std::invalid_argument(what), report_(std::move(report)) {}
  const ConstraintReport& report() const { return report_; }

 private:
  ConstraintReport report_;
};

/// Simulate-then-collect: chains forward segments of `segment_len` steps from the
/// meta seed, drawing fresh forces (bounded by scenario.force_cap) for segment k
/// from stream (rng_seed, k), and keeps the end state of every segment that
/// passes check_constraints. Without invalid states seeds[k] is the end of
/// segment k, so segment_len == 0 repeats the meta seed.
///
/// Random forcing pumps energy into a closed elastic system without bound, so a
/// positive `chain_segments` restarts the chain from the meta seed every that
/// many segments; 0 keeps a single chain.
SeedPool collect_seeds(const Scenario& scenario, const State& meta_seed, std::size_t n,
                       std::size_t segment_len, std::uint64_t rng_seed, std::size_t chain_segments = 0);

/// Generate-then-check contrast: positions uniform in the box, velocities uniform
/// in [-max_speed, max_speed]. No constraint filtering.
State uniform_random_state(const Scenario& scenario, double max_speed, Rng& rng);

/// Versioned text format; doubles are written in shortest round-trip form.
void write_pool(std::ostream& out, const SeedPool& pool);
SeedPool read_pool(std::istream& in);

}  // namespace simfuzz
