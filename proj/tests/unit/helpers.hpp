#pragma once

#include <initializer_list>

#include "simfuzz/engine.hpp"

namespace simfuzz::test {

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline State state(std::initializer_list<double> x, std::initializer_list<double> v) { return {vec(x), vec(v)}; }

/// Balls in a 4 x 4 box, far from the walls unless placed there.
inline Scenario wide_box(std::size_t balls) {
  Scenario s = Scenario::balls_in_box(balls);
  s.box_min = {-2.0, -2.0};
  s.box_max = {2.0, 2.0};
  return s;
}

}  // namespace simfuzz::test
