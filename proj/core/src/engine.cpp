#include "simfuzz/engine.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

namespace simfuzz {
namespace {

struct Candidate {
  double delta = std::numeric_limits<double>::infinity();
  std::size_t a = 0;
  std::size_t b = 0;
  bool clamped = false;
  bool found = false;
};

double kinetic_energy(const Scenario& sc, const Vector& v) {
  double ke = 0.0;
  for (std::size_t b = 0; b < sc.body_count; ++b)
    ke += 0.5 * sc.mass(b) * v.segment<2>(kDims * b).squaredNorm();
  return ke;
}

void consider(Candidate& best, double delta, std::size_t a, std::size_t b) {
  bool clamped = false;
  if (delta < 0.0) {
    delta = 0.0;
    clamped = true;
  }
  // Candidates arrive in lexicographic (a, b) order, so a strict comparison
  // keeps the lowest pair on exact ties.
  if (delta < best.delta) best = {delta, a, b, clamped, true};
}

// Earliest time-of-impact contact for positions X drifting with velocities U.
Candidate next_contact(const Scenario& sc, const Vector& X, const Vector& U) {
  Candidate best;
  if (sc.kind != ScenarioKind::BallsInBox) return best;
  const std::size_t n = sc.body_count;
  const double r = sc.radius;
  const double contact2 = 4.0 * r * r;
  for (std::size_t a = 0; a < n; ++a) {
    const Vec2 xa = X.segment<2>(kDims * a);
    const Vec2 ua = U.segment<2>(kDims * a);
    for (std::size_t b = a + 1; b < n; ++b) {
      const Vec2 p = X.segment<2>(kDims * b) - xa;
      const Vec2 w = U.segment<2>(kDims * b) - ua;
      const double pw = p.dot(w);
      if (pw >= 0.0) continue;  // separating or at rest relative to each other
      const double ww = w.squaredNorm();
      const double c = p.squaredNorm() - contact2;
      const double disc = pw * pw - ww * c;
      if (disc < 0.0) continue;  // miss
      consider(best, c / (-pw + std::sqrt(disc)), a, b);
    }
    for (std::size_t d = 0; d < kDims; ++d) {
      const double u = ua[static_cast<Eigen::Index>(d)];
      const double x = xa[static_cast<Eigen::Index>(d)];
      if (u > 0.0) {
        consider(best, (sc.box_max[d] - r - x) / u, a, n + 2 * d + 1);
      } else if (u < 0.0) {
        consider(best, (sc.box_min[d] + r - x) / u, a, n + 2 * d);
      }
    }
  }
  return best;
}

void apply_pair_impulse(const Scenario& sc, Vector& U, std::size_t i, std::size_t j, const Vec2& nhat,
                        int multiplier) {
  const double mi = sc.mass(i);
  const double mj = sc.mass(j);
  const double total = mi + mj;
  const double c = (U.segment<2>(kDims * j) - U.segment<2>(kDims * i)).dot(nhat);
  U.segment<2>(kDims * i) += multiplier * (2.0 * mj / total) * c * nhat;
  U.segment<2>(kDims * j) -= multiplier * (2.0 * mi / total) * c * nhat;
}

std::size_t resolve_time_of_impact(const Scenario& sc, Vector& X, Vector& U, int multiplier,
                                   std::size_t step_index, std::vector<ContactEvent>* events) {
  const std::size_t n = sc.body_count;
  const double dt = sc.dt;
  double t = 0.0;
  std::size_t count = 0;
  for (;; ++count) {
    const Candidate next = next_contact(sc, X, U);
    if (!next.found || t + next.delta > dt) break;
    if (count >= sc.max_events_per_step)
      throw SimulationError(step_index, "contact budget exhausted");

    ContactEvent ev;
    ev.a = next.a;
    ev.b = next.b;
    ev.delta = next.delta;
    ev.clamped = next.clamped;
    if (events) {
      ev.positions_before = X;
      ev.velocities_before = U;
    }
    X += U * next.delta;
    t += next.delta;
    ev.time = t;

    if (next.b < n) {
      ev.kind = ContactKind::Pair;
      ev.impulse_multiplier = multiplier;
      const Vec2 p = X.segment<2>(kDims * next.b) - X.segment<2>(kDims * next.a);
      apply_pair_impulse(sc, U, next.a, next.b, p.normalized(), ev.impulse_multiplier);
    } else {
      ev.kind = ContactKind::Wall;
      ev.axis = (next.b - n) / 2;
      ev.max_side = ((next.b - n) % 2) == 1;
      U[static_cast<Eigen::Index>(kDims * next.a + ev.axis)] *= -1.0;
    }
    if (events) events->push_back(std::move(ev));
  }
  X += U * (dt - t);
  return count;
}

std::size_t resolve_end_of_step(const Scenario& sc, Vector& X, Vector& U, int multiplier,
                                std::vector<ContactEvent>* events) {
  X += U * sc.dt;
  if (sc.kind != ScenarioKind::BallsInBox) return 0;
  std::size_t count = 0;
  const std::size_t n = sc.body_count;
  const double r = sc.radius;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Vec2 p = X.segment<2>(kDims * j) - X.segment<2>(kDims * i);
      const double d = p.norm();
      if (d >= 2.0 * r || d == 0.0) continue;
      const Vec2 w = U.segment<2>(kDims * j) - U.segment<2>(kDims * i);
      ContactEvent ev;
      ev.kind = ContactKind::EndPair;
      ev.a = i;
      ev.b = j;
      ev.time = sc.dt;
      ev.approaching = p.dot(w) < 0.0;
      ev.impulse_multiplier = multiplier;
      ++count;
      if (events) {
        ev.positions_before = X;
        ev.velocities_before = U;
      }
      const Vec2 nhat = p / d;
      if (ev.approaching) apply_pair_impulse(sc, U, i, j, nhat, ev.impulse_multiplier);
      const double mi = sc.mass(i);
      const double mj = sc.mass(j);
      const Vec2 com = (mi * X.segment<2>(kDims * i) + mj * X.segment<2>(kDims * j)) / (mi + mj);
      X.segment<2>(kDims * i) = com - (mj / (mi + mj)) * 2.0 * r * nhat;
      X.segment<2>(kDims * j) = com + (mi / (mi + mj)) * 2.0 * r * nhat;
      if (events) events->push_back(std::move(ev));
    }
  }
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t d = 0; d < kDims; ++d) {
      const auto k = static_cast<Eigen::Index>(kDims * b + d);
      const double lo = sc.box_min[d] + r;
      const double hi = sc.box_max[d] - r;
      const bool over = X[k] > hi;
      if (!over && !(X[k] < lo)) continue;
      ContactEvent ev;
      ev.kind = ContactKind::EndWall;
      ev.a = b;
      ev.b = n + 2 * d + (over ? 1 : 0);
      ev.axis = d;
      ev.max_side = over;
      ev.time = sc.dt;
      ev.approaching = over ? U[k] > 0.0 : U[k] < 0.0;
      ++count;
      if (events) {
        ev.positions_before = X;
        ev.velocities_before = U;
      }
      X[k] = over ? hi : lo;
      if (ev.approaching) U[k] = -U[k];
      if (events) events->push_back(std::move(ev));
    }
  }
  return count;
}

// Contact phase of one step. Under double_impulse, a step that resolves two or
// more contacts is redone from the start with every ball-ball impulse doubled.
void resolve_contacts(const Scenario& sc, Vector& X, Vector& U, const FaultSpec& faults,
                      std::size_t step_index, std::vector<ContactEvent>* events) {
  auto pass = [&](Vector& x, Vector& u, int multiplier, std::vector<ContactEvent>* ev) {
    return faults.end_of_step_contact ? resolve_end_of_step(sc, x, u, multiplier, ev)
                                      : resolve_time_of_impact(sc, x, u, multiplier, step_index, ev);
  };
  if (!faults.double_impulse) {
    pass(X, U, 1, events);
    return;
  }
  Vector x = X;
  Vector u = U;
  std::vector<ContactEvent> pristine;
  if (pass(x, u, 1, events ? &pristine : nullptr) < 2) {
    X = std::move(x);
    U = std::move(u);
    if (events) *events = std::move(pristine);
    return;
  }
  pass(X, U, 2, events);
}

StepRecord step_impl(const Scenario& sc, const State& s, const Vector& tau_i, const FaultSpec& faults,
                     std::size_t step_index, bool record) {
  const auto dim = static_cast<Eigen::Index>(sc.dim());
  if (s.positions.size() != dim || s.velocities.size() != dim)
    throw std::invalid_argument("state dimension does not match scenario");
  if (tau_i.size() != dim) throw std::invalid_argument("force dimension does not match scenario");
  if (!s.is_finite()) throw SimulationError(step_index, "non-finite input state");

  StepRecord rec;
  Vector X = s.positions;
  Vector U = s.velocities;
  for (std::size_t b = 0; b < sc.body_count; ++b) {
    for (std::size_t d = 0; d < kDims; ++d) {
      const auto k = static_cast<Eigen::Index>(kDims * b + d);
      U[k] += sc.dt * (sc.gravity[d] + tau_i[k] / sc.mass(b));
    }
  }
  rec.kinetic_energy_before = kinetic_energy(sc, U);
  resolve_contacts(sc, X, U, faults, step_index, record ? &rec.events : nullptr);
  rec.kinetic_energy_after = kinetic_energy(sc, U);
  rec.next = State{std::move(X), std::move(U)};
  if (!rec.next.is_finite()) throw SimulationError(step_index, "non-finite state");
  return rec;
}

}  // namespace

State time_step(const Scenario& scenario, const State& s, const Vector& tau_i, const FaultSpec& faults,
                std::size_t step_index) {
  return step_impl(scenario, s, tau_i, faults, step_index, false).next;
}

State time_step(const Scenario& scenario, const State& s, const Vector& tau_i) {
  return time_step(scenario, s, tau_i, scenario.faults);
}

StepRecord time_step_recorded(const Scenario& scenario, const State& s, const Vector& tau_i,
                              const FaultSpec& faults, std::size_t step_index) {
  return step_impl(scenario, s, tau_i, faults, step_index, true);
}

std::size_t Rollout::contact_count() const {
  std::size_t n = 0;
  for (const auto& e : events) n += e.size();
  return n;
}

std::vector<std::size_t> Rollout::contact_history() const {
  const std::size_t n = trace.empty() ? 0 : trace.front().body_count();
  std::vector<std::vector<std::size_t>> per_body(n);
  for (const auto& step : events)
    for (const auto& e : step) {
      const auto kind = static_cast<std::size_t>(e.kind);
      per_body[e.a].insert(per_body[e.a].end(), {kind, e.b});
      if (e.b < n) per_body[e.b].insert(per_body[e.b].end(), {kind, e.a});
    }
  std::vector<std::size_t> out;
  for (const auto& h : per_body) {
    out.insert(out.end(), h.begin(), h.end());
    out.push_back(static_cast<std::size_t>(-1));
  }
  return out;
}

ForwardResult forward(const Scenario& scenario, const State& s0, const ExternalForce& tau) {
  if (tau.size() != scenario.steps) throw std::invalid_argument("force sequence length != steps");
  ForwardResult out;
  out.trace.reserve(scenario.steps + 1);
  out.trace.push_back(s0);
  for (std::size_t i = 0; i < scenario.steps; ++i)
    out.trace.push_back(time_step(scenario, out.trace.back(), tau[i], scenario.faults, i));
  out.final_state = out.trace.back();
  return out;
}

Rollout rollout(const Scenario& scenario, const State& s0, const ExternalForce& tau) {
  if (tau.size() != scenario.steps) throw std::invalid_argument("force sequence length != steps");
  Rollout out;
  out.trace.reserve(scenario.steps + 1);
  out.events.reserve(scenario.steps);
  out.trace.push_back(s0);
  for (std::size_t i = 0; i < scenario.steps; ++i) {
    auto rec = time_step_recorded(scenario, out.trace.back(), tau[i], scenario.faults, i);
    out.contact_energy.emplace_back(rec.kinetic_energy_before, rec.kinetic_energy_after);
    out.trace.push_back(std::move(rec.next));
    out.events.push_back(std::move(rec.events));
  }
  return out;
}

ConstraintReport check_constraints(const Scenario& scenario, const State& s) {
  ConstraintReport rep;
  if (scenario.kind != ScenarioKind::BallsInBox) return rep;
  const std::size_t n = scenario.body_count;
  const double r = scenario.radius;
  auto note = [&](double penetration, std::size_t a, std::size_t b) {
    if (penetration > kValidityTolerance) rep.violating_pairs.emplace_back(a, b);
    rep.worst_penetration = std::max(rep.worst_penetration, penetration);
  };
  for (std::size_t a = 0; a < n; ++a) {
    const Vec2 xa = s.position(a);
    for (std::size_t b = a + 1; b < n; ++b) note(2.0 * r - (s.position(b) - xa).norm(), a, b);
    for (std::size_t d = 0; d < kDims; ++d) {
      const double x = xa[static_cast<Eigen::Index>(d)];
      note(scenario.box_min[d] + r - x, a, n + 2 * d);
      note(x - (scenario.box_max[d] - r), a, n + 2 * d + 1);
    }
  }
  rep.valid = rep.worst_penetration <= kValidityTolerance;
  return rep;
}

ConservedQuantities conserved_quantities(const Scenario& scenario, const State& s) {
  ConservedQuantities q;
  for (std::size_t b = 0; b < scenario.body_count; ++b) {
    const Vec2 v = s.velocity(b);
    q.kinetic_energy += 0.5 * scenario.mass(b) * v.squaredNorm();
    q.momentum += scenario.mass(b) * v;
  }
  return q;
}

std::vector<EnergyJump> kinetic_energy_jumps(const Scenario& /*scenario*/, const Rollout& r,
                                             double relative_jump) {
  std::vector<EnergyJump> jumps;
  for (std::size_t i = 0; i < r.events.size(); ++i) {
    if (r.events[i].empty()) continue;
    // Energies bracket the contact phase only, so the kick from external forces is excluded.
    const auto [before, after] = r.contact_energy[i];
    const double scale = std::max(before, std::numeric_limits<double>::min());
    if (std::abs(after - before) > relative_jump * scale) jumps.push_back({i, before, after});
  }
  return jumps;
}

void write_trace_csv(std::ostream& out, const Scenario& scenario, const std::vector<State>& trace) {
  const std::size_t n = scenario.body_count;
  static constexpr const char* kAxis[] = {"x", "y"};
  out << "t";
  for (std::size_t b = 0; b < n; ++b)
    for (auto* a : kAxis) out << ',' << a << b;
  for (std::size_t b = 0; b < n; ++b)
    for (auto* a : kAxis) out << ",v" << a << b;
  out << '\n';
  char buf[32];
  auto put = [&](double v) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, end - buf);
  };
  for (std::size_t i = 0; i < trace.size(); ++i) {
    put(static_cast<double>(i) * scenario.dt);
    for (double v : trace[i].positions) out << ',', put(v);
    for (double v : trace[i].velocities) out << ',', put(v);
    out << '\n';
  }
}

State default_meta_seed(const Scenario& scenario) {
  State s = State::zeros(scenario.dim());
  if (scenario.kind != ScenarioKind::BallsInBox) return s;
  const auto n = scenario.body_count;
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const auto rows = (n + cols - 1) / cols;
  const double w = (scenario.box_max[0] - scenario.box_min[0]) / static_cast<double>(cols);
  const double h = (scenario.box_max[1] - scenario.box_min[1]) / static_cast<double>(rows);
  for (std::size_t b = 0; b < n; ++b) {
    s.positions[static_cast<Eigen::Index>(kDims * b)] = scenario.box_min[0] + (static_cast<double>(b % cols) + 0.5) * w;
    s.positions[static_cast<Eigen::Index>(kDims * b + 1)] = scenario.box_min[1] + (static_cast<double>(b / cols) + 0.5) * h;
  }
  if (!check_constraints(scenario, s).valid)
    throw ScenarioError("box too small for a grid of non-overlapping balls");
  return s;
}

}  // namespace simfuzz
