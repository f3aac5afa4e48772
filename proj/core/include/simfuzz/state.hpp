#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace simfuzz {

/// Spatial dimensionality of every scenario.
inline constexpr std::size_t kDims = 2;

using Vector = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;

/// Positions and velocities of all bodies at one instant.
///
/// Both vectors have length D = kDims * body_count and are laid out body-major:
/// entries [kDims*b, kDims*b + kDims) belong to body b.
struct State {
  Vector positions;
  Vector velocities;

  State() = default;
  State(Vector x, Vector v) : positions(std::move(x)), velocities(std::move(v)) {}

  static State zeros(std::size_t dim) { return {Vector::Zero(dim), Vector::Zero(dim)}; }

  /// Builds a state from a flat vector laid out as positions ++ velocities.
  static State from_flat(const Vector& flat);

  std::size_t dim() const { return static_cast<std::size_t>(positions.size()); }
  std::size_t body_count() const { return dim() / kDims; }

  /// positions ++ velocities, length 2D.
  Vector flat() const;

  Vec2 position(std::size_t body) const { return positions.segment<2>(kDims * body); }
  Vec2 velocity(std::size_t body) const { return velocities.segment<2>(kDims * body); }

  bool is_finite() const;

  /// Bitwise equality of every entry.
  friend bool operator==(const State& a, const State& b);
  friend bool operator!=(const State& a, const State& b) { return !(a == b); }
};

/// Squared Euclidean distance over the full (2D-long) state vector.
double squared_distance(const State& a, const State& b);
double distance(const State& a, const State& b);

/// Per-step external force vectors; one entry of length D per time step.
using ExternalForce = std::vector<Vector>;

ExternalForce zero_force(std::size_t steps, std::size_t dim);

}  // namespace simfuzz
