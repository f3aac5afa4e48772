#include "simfuzz/state.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace simfuzz {

State State::from_flat(const Vector& flat) {
  if (flat.size() % 2 != 0) throw std::invalid_argument("flat state has odd length");
  const auto d = flat.size() / 2;
  return {flat.head(d), flat.tail(d)};
}

Vector State::flat() const {
  Vector out(positions.size() + velocities.size());
  out << positions, velocities;
  return out;
}

bool State::is_finite() const { return positions.allFinite() && velocities.allFinite(); }

bool operator==(const State& a, const State& b) {
  if (a.positions.size() != b.positions.size() || a.velocities.size() != b.velocities.size())
    return false;
  const auto bytes = [](const Vector& v) { return static_cast<std::size_t>(v.size()) * sizeof(double); };
  return std::memcmp(a.positions.data(), b.positions.data(), bytes(a.positions)) == 0 &&
         std::memcmp(a.velocities.data(), b.velocities.data(), bytes(a.velocities)) == 0;
}

double squared_distance(const State& a, const State& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("state dimension mismatch");
  return (a.positions - b.positions).squaredNorm() + (a.velocities - b.velocities).squaredNorm();
}

double distance(const State& a, const State& b) { return std::sqrt(squared_distance(a, b)); }

ExternalForce zero_force(std::size_t steps, std::size_t dim) {
  return ExternalForce(steps, Vector::Zero(static_cast<Eigen::Index>(dim)));
}

}  // namespace simfuzz
