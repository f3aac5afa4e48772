#pragma once

#include <cstddef>
#include <limits>
#include <ostream>
#include <set>
#include <vector>

#include "simfuzz/state.hpp"

namespace simfuzz {

/// Per-component scaling of the seed distance; 1/1 is plain Euclidean.
struct DistanceWeights {
  double position = 1.0;
  double velocity = 1.0;
};

inline constexpr double kInfiniteEnergy = std::numeric_limits<double>::infinity();

/// Minimal (weighted) distance from `seed` to any state of `non_failure_set`;
/// +inf for an empty set.
double energy(const State& seed, const std::vector<State>& non_failure_set, DistanceWeights w = {});

struct QueueEntry {
  std::size_t id = 0;
  double energy = kInfiniteEnergy;
};

/// Adaptive-random-testing queue.
///
/// Seeds are dequeued from the front. After each fuzzed seed is reported back
/// with mark_fuzzed, schedule() refreshes energies against the non-failing
/// fuzzed seeds and stably sorts by descending energy. Only fuzzed seeds can
/// join the non-failing set, so each entry keeps a running minimum and
/// schedule() costs one distance per entry per newly fuzzed seed.
class SeedQueue {
 public:
  explicit SeedQueue(std::vector<State> seeds, DistanceWeights w = {});

  bool empty() const { return order_.empty(); }
  std::size_t size() const { return order_.size(); }
  /// Entries in dequeue order.
  std::vector<QueueEntry> entries() const;
  const State& state(std::size_t id) const { return seeds_[id]; }
  std::size_t pool_size() const { return seeds_.size(); }

  /// Removes and returns the front entry.
  QueueEntry pop_front();

  /// Records the outcome for a dequeued seed: it joins the fuzzed set and,
  /// unless it caused a failure, the non-failing set.
  void mark_fuzzed(std::size_t id, bool failure_causing);

  /// Refreshes energies and re-sorts. Returns the number of entries whose
  /// energy changed.
  std::size_t schedule();

  const std::set<std::size_t>& fuzzed() const { return fuzzed_; }
  const std::set<std::size_t>& buggy() const { return buggy_; }
  /// U = F - O, in the order the seeds were fuzzed.
  const std::vector<std::size_t>& non_failing() const { return non_failing_; }

  /// One diagnostics row: `iteration,e1,...,e5` (fewer if the queue is short).
  void write_top_energies(std::ostream& out, std::size_t iteration, std::size_t k = 5) const;

 private:
  double distance(std::size_t a, std::size_t b) const;

  std::vector<State> seeds_;
  Eigen::MatrixXd scaled_;  // one weighted, flattened seed per column
  // scaled_ in single precision, row-major so a screening pass streams each coordinate.
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> coarse_;
  Vector norms_;            // column norms of scaled_
  std::vector<double> energy_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> non_failing_;
  std::size_t applied_ = 0;  // prefix of non_failing_ already folded into energy_
  std::set<std::size_t> fuzzed_;
  std::set<std::size_t> buggy_;

  // Scratch reused across schedule() calls.
  struct Slot {
    double energy;
    std::size_t pos;
    std::size_t id;
  };
  Eigen::RowVectorXf rough_;
  std::vector<char> changed_;
  std::vector<Slot> kept_, moved_;
};

}  // namespace simfuzz
