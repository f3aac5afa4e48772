#pragma once

#include <cstddef>
#include <ostream>

#include "simfuzz/engine.hpp"

namespace simfuzz {

/// Squared Euclidean norm of the difference over the full state vector.
double loss(const State& final_a, const State& final_b);

struct GradientResult {
  Vector grad_s0;  // dL/dpositions0 ++ dL/dvelocities0, length 2D
  double loss = 0.0;
};

/// Gradient of ||forward(s0, tau).final - target_final||^2 with respect to s0,
/// computed by a reverse sweep over the stored trace.
///
/// Contact Jacobians use the contact sequence realised by the forward pass;
/// changes of contact timing order are not differentiated. The gradient faults
/// in scenario.faults drop whole steps from the sweep.
GradientResult backward(const Scenario& scenario, const State& s0, const ExternalForce& tau,
                        const State& target_final);

/// Reverse sweep over an existing rollout (avoids re-running the forward pass).
GradientResult backward_from(const Scenario& scenario, const Rollout& r, const State& target_final);

/// Adjoint of the trace map for an arbitrary cotangent on the final state.
Vector vector_jacobian_product(const Scenario& scenario, const Rollout& r, const Vector& final_cotangent);

/// True when the gradient faults drop step `step` from the reverse sweep.
bool adjoint_drops_step(const Scenario& scenario, std::size_t step);

inline constexpr double kDefaultFiniteDifferenceStep = 1e-5;

/// Central differences (L(s0 + h e_j) - L(s0 - h e_j)) / 2h for every component.
Vector finite_diff_grad(const Scenario& scenario, const State& s0, const ExternalForce& tau,
                        const State& target_final, double h = kDefaultFiniteDifferenceStep);

/// max_j |a_j - b_j| / max(||a||_inf, ||b||_inf); zero when both vectors vanish.
double max_relative_error(const Vector& analytic, const Vector& reference);

/// Debug dump: `component,analytic,finite_difference,relative_error`.
void write_gradient_csv(std::ostream& out, const Vector& analytic, const Vector& reference);

}  // namespace simfuzz
