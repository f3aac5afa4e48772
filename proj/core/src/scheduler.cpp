#include "simfuzz/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace simfuzz {
namespace {

Vector scaled_flat(const State& s, DistanceWeights w) {
  Vector out(2 * s.positions.size());
  out << std::sqrt(w.position) * s.positions, std::sqrt(w.velocity) * s.velocities;
  return out;
}

}  // namespace

double energy(const State& seed, const std::vector<State>& non_failure_set, DistanceWeights w) {
  const Vector x = scaled_flat(seed, w);
  double best = kInfiniteEnergy;
  for (const auto& u : non_failure_set) best = std::min(best, (scaled_flat(u, w) - x).norm());
  return best;
}

SeedQueue::SeedQueue(std::vector<State> seeds, DistanceWeights w)
    : seeds_(std::move(seeds)), energy_(seeds_.size(), kInfiniteEnergy), order_(seeds_.size()) {
  if (!(w.position >= 0.0) || !(w.velocity >= 0.0)) throw std::invalid_argument("distance weights must be non-negative");
  if (!seeds_.empty()) {
    scaled_.resize(static_cast<Eigen::Index>(2 * seeds_.front().dim()), static_cast<Eigen::Index>(seeds_.size()));
    for (std::size_t i = 0; i < seeds_.size(); ++i) {
      if (seeds_[i].dim() != seeds_.front().dim()) throw std::invalid_argument("seed dimensions differ");
      scaled_.col(static_cast<Eigen::Index>(i)) = scaled_flat(seeds_[i], w);
    }
    coarse_ = scaled_.cast<float>();
    norms_ = scaled_.colwise().norm().transpose();
  }
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
}

std::vector<QueueEntry> SeedQueue::entries() const {
  std::vector<QueueEntry> out;
  out.reserve(order_.size());
  for (auto id : order_) out.push_back({id, energy_[id]});
  return out;
}

QueueEntry SeedQueue::pop_front() {
  if (order_.empty()) throw std::out_of_range("seed queue is empty");
  const std::size_t id = order_.front();
  order_.erase(order_.begin());
  return {id, energy_[id]};
}

void SeedQueue::mark_fuzzed(std::size_t id, bool failure_causing) {
  if (id >= seeds_.size()) throw std::out_of_range("unknown seed id");
  if (!fuzzed_.insert(id).second) throw std::logic_error("seed fuzzed twice");
  if (failure_causing) {
    buggy_.insert(id);
  } else {
    non_failing_.push_back(id);
  }
}

double SeedQueue::distance(std::size_t a, std::size_t b) const {
  return (scaled_.col(static_cast<Eigen::Index>(a)) - scaled_.col(static_cast<Eigen::Index>(b))).norm();
}

std::size_t SeedQueue::schedule() {
  if (applied_ == non_failing_.size()) return 0;
  changed_.assign(seeds_.size(), 0);
  for (std::size_t u = applied_; u < non_failing_.size(); ++u) {
    const auto j = static_cast<Eigen::Index>(non_failing_[u]);
    // Single-precision screen in one contiguous pass over the pool. Rounding the
    // coordinates moves a distance by at most ~6e-8 (|x| + |u|) and the float
    // sum adds a small relative error; the margins below are far wider. Only
    // entries the screen cannot rule out get the exact distance.
    rough_.setZero(coarse_.cols());
    for (Eigen::Index r = 0; r < coarse_.rows(); ++r) rough_.array() += (coarse_.row(r).array() - coarse_(r, j)).square();
    for (auto id : order_) {
      const auto i = static_cast<Eigen::Index>(id);
      const double rough = std::sqrt(static_cast<double>(rough_[i]));
      if (rough * (1.0 - 1e-4) - 1e-6 * (norms_[i] + norms_[j]) >= energy_[id]) continue;
      const double d = distance(id, non_failing_[u]);
      if (d < energy_[id]) {
        energy_[id] = d;
        changed_[id] = 1;
      }
    }
  }
  applied_ = non_failing_.size();

  kept_.clear();
  moved_.clear();
  for (std::size_t p = 0; p < order_.size(); ++p) {
    const std::size_t id = order_[p];
    (changed_[id] ? moved_ : kept_).push_back({energy_[id], p, id});
  }
  if (moved_.empty()) return 0;

  // `kept_` is still sorted (its energies did not change). A stable sort of the
  // whole queue equals merging the two runs ordered by (energy desc, old position).
  auto before = [](const Slot& a, const Slot& b) {
    if (a.energy != b.energy) return a.energy > b.energy;
    return a.pos < b.pos;
  };
  std::sort(moved_.begin(), moved_.end(), before);
  std::size_t k = 0, m = 0, out = 0;
  while (k < kept_.size() || m < moved_.size()) {
    const bool take_moved = k == kept_.size() || (m < moved_.size() && before(moved_[m], kept_[k]));
    order_[out++] = take_moved ? moved_[m++].id : kept_[k++].id;
  }
  return moved_.size();
}

void SeedQueue::write_top_energies(std::ostream& out, std::size_t iteration, std::size_t k) const {
  out << iteration;
  for (std::size_t i = 0; i < std::min(k, order_.size()); ++i) out << ',' << energy_[order_[i]];
  out << '\n';
}

}  // namespace simfuzz
