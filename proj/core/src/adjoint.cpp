#include "simfuzz/adjoint.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace simfuzz {
namespace {

Eigen::Index idx(std::size_t body) { return static_cast<Eigen::Index>(kDims * body); }

// Adjoint of the elastic impulse U' = U + m * (k_i c nhat, -k_j c nhat), c = (U_j - U_i).nhat.
// Updates lU in place (post -> pre) and returns dS/dnhat.
Vec2 reverse_pair_impulse(const Scenario& sc, const ContactEvent& e, const Vec2& nhat, const Vector& U_pre,
                          Vector& lU) {
  const double mi = sc.mass(e.a);
  const double mj = sc.mass(e.b);
  const double ki = 2.0 * mj / (mi + mj);
  const double kj = 2.0 * mi / (mi + mj);
  const Vec2 w = U_pre.segment<2>(idx(e.b)) - U_pre.segment<2>(idx(e.a));
  const double c = w.dot(nhat);
  const Vec2 li = lU.segment<2>(idx(e.a));
  const Vec2 lj = lU.segment<2>(idx(e.b));
  const Vec2 q = static_cast<double>(e.impulse_multiplier) * (ki * li - kj * lj);
  const double qn = q.dot(nhat);
  lU.segment<2>(idx(e.a)) = li - qn * nhat;
  lU.segment<2>(idx(e.b)) = lj + qn * nhat;
  return c * q + qn * w;
}

// d(nhat)/d(p) applied transposed: (I - nhat nhat^T) g / |p|.
Vec2 project_normal(const Vec2& g, const Vec2& nhat, double length) {
  return (g - nhat * nhat.dot(g)) / length;
}

void reverse_time_of_impact_step(const Scenario& sc, const std::vector<ContactEvent>& events,
                                 const State& next, Vector& lx, Vector& lv) {
  const double t_end = events.empty() ? 0.0 : events.back().time;
  Vector lX = lx;
  Vector lU = lv + (sc.dt - t_end) * lx;
  double lt = -lx.dot(next.velocities);

  for (auto it = events.rbegin(); it != events.rend(); ++it) {
    const ContactEvent& e = *it;
    const Vector& U_pre = e.velocities_before;
    const Vector X_post = e.positions_before + U_pre * e.delta;

    if (e.kind == ContactKind::Pair) {
      const Vec2 p_post = X_post.segment<2>(idx(e.b)) - X_post.segment<2>(idx(e.a));
      const double len = p_post.norm();
      const Vec2 nhat = p_post / len;
      const Vec2 g = project_normal(reverse_pair_impulse(sc, e, nhat, U_pre, lU), nhat, len);
      lX.segment<2>(idx(e.b)) += g;
      lX.segment<2>(idx(e.a)) -= g;
    } else {
      lU[idx(e.a) + static_cast<Eigen::Index>(e.axis)] *= -1.0;
    }

    // X_post = X_pre + U_pre * delta, t_post = t_pre + delta.
    const double ldelta = lX.dot(U_pre) + lt;
    lU += e.delta * lX;

    if (!e.clamped) {
      if (e.kind == ContactKind::Pair) {
        const Vec2 p = e.positions_before.segment<2>(idx(e.b)) - e.positions_before.segment<2>(idx(e.a));
        const Vec2 w = U_pre.segment<2>(idx(e.b)) - U_pre.segment<2>(idx(e.a));
        const Vec2 n = p + w * e.delta;
        const double nw = n.dot(w);
        const Vec2 dp = -n / nw;
        const Vec2 dw = -e.delta * n / nw;
        lX.segment<2>(idx(e.b)) += ldelta * dp;
        lX.segment<2>(idx(e.a)) -= ldelta * dp;
        lU.segment<2>(idx(e.b)) += ldelta * dw;
        lU.segment<2>(idx(e.a)) -= ldelta * dw;
      } else {
        const auto k = idx(e.a) + static_cast<Eigen::Index>(e.axis);
        const double u = U_pre[k];
        lX[k] += -ldelta / u;
        lU[k] += -ldelta * e.delta / u;
      }
    }
  }
  lx = std::move(lX);
  lv = std::move(lU);
}

void reverse_end_of_step(const Scenario& sc, const std::vector<ContactEvent>& events, Vector& lx,
                         Vector& lv) {
  Vector lX = lx;
  Vector lU = lv;
  const double r = sc.radius;
  for (auto it = events.rbegin(); it != events.rend(); ++it) {
    const ContactEvent& e = *it;
    if (e.kind == ContactKind::EndWall) {
      const auto k = idx(e.a) + static_cast<Eigen::Index>(e.axis);
      lX[k] = 0.0;
      if (e.approaching) lU[k] = -lU[k];
      continue;
    }
    const Vec2 p = e.positions_before.segment<2>(idx(e.b)) - e.positions_before.segment<2>(idx(e.a));
    const double len = p.norm();
    const Vec2 nhat = p / len;
    Vec2 dnhat = Vec2::Zero();
    if (e.approaching) dnhat = reverse_pair_impulse(sc, e, nhat, e.velocities_before, lU);
    const double mi = sc.mass(e.a);
    const double mj = sc.mass(e.b);
    const double total = mi + mj;
    const Vec2 lxi = lX.segment<2>(idx(e.a));
    const Vec2 lxj = lX.segment<2>(idx(e.b));
    const Vec2 lcom = lxi + lxj;
    dnhat += 2.0 * r * (-(mj / total) * lxi + (mi / total) * lxj);
    const Vec2 g = project_normal(dnhat, nhat, len);
    lX.segment<2>(idx(e.a)) = (mi / total) * lcom - g;
    lX.segment<2>(idx(e.b)) = (mj / total) * lcom + g;
  }
  // X1 = x + U * dt
  lU += sc.dt * lX;
  lx = std::move(lX);
  lv = std::move(lU);
}

}  // namespace

double loss(const State& final_a, const State& final_b) { return squared_distance(final_a, final_b); }

bool adjoint_drops_step(const Scenario& scenario, std::size_t step) {
  const auto& f = scenario.faults;
  if (f.zero_grad_segment) {
    const std::size_t begin = scenario.steps / 3;
    const std::size_t end = 2 * scenario.steps / 3;
    if (step >= begin && step < end) return true;
  }
  return f.dropped_unroll_grad && step % 2 == 1;
}

Vector vector_jacobian_product(const Scenario& scenario, const Rollout& r, const Vector& final_cotangent) {
  const auto d = static_cast<Eigen::Index>(scenario.dim());
  if (final_cotangent.size() != 2 * d) throw std::invalid_argument("cotangent dimension mismatch");
  Vector lx = final_cotangent.head(d);
  Vector lv = final_cotangent.tail(d);
  for (std::size_t i = r.events.size(); i-- > 0;) {
    if (adjoint_drops_step(scenario, i)) continue;
    if (scenario.faults.end_of_step_contact) {
      reverse_end_of_step(scenario, r.events[i], lx, lv);
    } else {
      reverse_time_of_impact_step(scenario, r.events[i], r.trace[i + 1], lx, lv);
    }
    if (!lx.allFinite() || !lv.allFinite()) throw SimulationError(i, "non-finite gradient");
  }
  Vector out(2 * d);
  out << lx, lv;
  return out;
}

GradientResult backward_from(const Scenario& scenario, const Rollout& r, const State& target_final) {
  const State& fin = r.final_state();
  GradientResult res;
  res.loss = loss(fin, target_final);
  Vector cot(2 * fin.positions.size());
  cot << 2.0 * (fin.positions - target_final.positions), 2.0 * (fin.velocities - target_final.velocities);
  res.grad_s0 = vector_jacobian_product(scenario, r, cot);
  return res;
}

GradientResult backward(const Scenario& scenario, const State& s0, const ExternalForce& tau,
                        const State& target_final) {
  return backward_from(scenario, rollout(scenario, s0, tau), target_final);
}

Vector finite_diff_grad(const Scenario& scenario, const State& s0, const ExternalForce& tau,
                        const State& target_final, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  const Vector base = s0.flat();
  Vector grad(base.size());
  for (Eigen::Index j = 0; j < base.size(); ++j) {
    Vector plus = base;
    Vector minus = base;
    plus[j] += h;
    minus[j] -= h;
    const double lp = loss(forward(scenario, State::from_flat(plus), tau).final_state, target_final);
    const double lm = loss(forward(scenario, State::from_flat(minus), tau).final_state, target_final);
    grad[j] = (lp - lm) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(const Vector& analytic, const Vector& reference) {
  if (analytic.size() != reference.size()) throw std::invalid_argument("gradient dimension mismatch");
  const double scale = std::max(analytic.cwiseAbs().maxCoeff(), reference.cwiseAbs().maxCoeff());
  if (scale == 0.0) return 0.0;
  return (analytic - reference).cwiseAbs().maxCoeff() / scale;
}

void write_gradient_csv(std::ostream& out, const Vector& analytic, const Vector& reference) {
  const double scale = std::max(analytic.cwiseAbs().maxCoeff(), reference.cwiseAbs().maxCoeff());
  out << "component,analytic,finite_difference,relative_error\n";
  char buf[32];
  auto put = [&](double v) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, end - buf);
  };
  for (Eigen::Index j = 0; j < analytic.size(); ++j) {
    out << j << ',';
    put(analytic[j]);
    out << ',';
    put(reference[j]);
    out << ',';
    put(scale == 0.0 ? 0.0 : std::abs(analytic[j] - reference[j]) / scale);
    out << '\n';
  }
}

}  // namespace simfuzz
