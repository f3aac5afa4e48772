#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "simfuzz/fuzzer.hpp"

namespace simfuzz {
namespace {

using test::state;
using test::wide_box;

TEST(Mutate, ExactNorm) {
  const Scenario sc = Scenario::balls_in_box(4);
  Rng rng(1);
  const auto d = mutate(sc, default_meta_seed(sc), 1e-3, rng);
  ASSERT_TRUE(d.has_value());
  EXPECT_NEAR(d->norm(), 1e-3, 1e-15);
  EXPECT_EQ(d->size(), 16);
}

TEST(Mutate, SameStreamSameDelta) {
  const Scenario sc = Scenario::balls_in_box(4);
  Rng a = make_stream(3, 9), b = make_stream(3, 9);
  EXPECT_EQ(*mutate(sc, default_meta_seed(sc), 1e-3, a), *mutate(sc, default_meta_seed(sc), 1e-3, b));
}

TEST(Mutate, DirectionsAreIsotropic) {
  const Scenario sc = wide_box(2);
  const State s0 = state({-1, 0, 1, 0}, {0, 0, 0, 0});
  Rng rng(5);
  Vector mean = Vector::Zero(8);
  for (int i = 0; i < 1000; ++i) mean += *mutate(sc, s0, 1e-3, rng) / 1e-3;
  EXPECT_LT((mean / 1000.0).norm(), 0.1);
}

TEST(Mutate, GivesUpAfterShrinking) {
  const Scenario sc = Scenario::balls_in_box(1);
  Rng rng(2);
  std::size_t redraws = 0;
  EXPECT_FALSE(mutate(sc, default_meta_seed(sc), 1e-3, rng, &redraws, [](const State&) { return false; }));
  EXPECT_EQ(redraws, 1100u);
  EXPECT_THROW(mutate(sc, default_meta_seed(sc), 0.0, rng), std::invalid_argument);
}

TEST(Mutate, KeepsBallsOutOfWalls) {
  // A ball resting on the floor: half of all directions would push it in.
  const Scenario sc = Scenario::balls_in_box(1);
  const State s0 = state({0.5, 0.1}, {0.0, 0.0});
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto d = mutate(sc, s0, 1e-3, rng);
    ASSERT_TRUE(d);
    EXPECT_TRUE(check_constraints(sc, State::from_flat(s0.flat() + *d)).valid);
  }
}

TEST(GradDescent, ZeroPerturbationStopsImmediately) {
  const Scenario sc = Scenario::free_fall();
  const auto tau = zero_force(sc.steps, 2);
  const State s0 = State::zeros(2);
  const State sT = forward(sc, s0, tau).final_state;
  const DescentResult d = grad_descent(sc, s0, sT, Vector::Zero(4), tau, CampaignConfig{});
  ASSERT_EQ(d.loss_trace.size(), 1u);
  EXPECT_EQ(d.loss_trace[0], 0.0);
  EXPECT_EQ(d.delta_s, Vector::Zero(4));
}

// Per axis the FreeFall map is (x, v) -> (x + T v, v) with T = 1, so the loss
// Hessian is 2 J^T J with J = [[1, 1], [0, 1]] and eigenvalues (3 +- sqrt 5)/2 of J^T J.
constexpr double kLambdaMax = (3.0 + 2.23606797749979) / 2.0;

TEST(GradDescent, FreeFallFixedStepConverges) {
  const Scenario sc = Scenario::free_fall();
  const auto tau = zero_force(sc.steps, 2);
  const State s0 = State::zeros(2);
  const State sT = forward(sc, s0, tau).final_state;
  CampaignConfig cfg;
  cfg.step_rule = StepRule::Fixed;
  cfg.alpha0 = 1.0 / (2.0 * kLambdaMax);
  cfg.eps_B = 1e-10;
  cfg.max_grad_iter = 200;
  Rng rng(8);
  const Vector d0 = *mutate(sc, s0, 1e-3, rng);
  const DescentResult d = grad_descent(sc, s0, sT, d0, tau, cfg);
  EXPECT_LT(d.loss_trace.back(), 1e-10);
  EXPECT_LT(d.loss_trace.size(), 201u);
  for (std::size_t k = 1; k < d.loss_trace.size(); ++k) EXPECT_LE(d.loss_trace[k], d.loss_trace[k - 1]);
  for (bool c : d.contact_change) EXPECT_FALSE(c);
}

TEST(GradDescent, FreeFallHessianMatchesClosedForm) {
  // J from unit differences of the (affine) final-state map.
  const Scenario sc = Scenario::free_fall();
  const auto tau = zero_force(sc.steps, 2);
  const Vector f0 = forward(sc, State::zeros(2), tau).final_state.flat();
  Eigen::MatrixXd J(4, 4);
  for (int j = 0; j < 4; ++j) {
    Vector e = Vector::Zero(4);
    e[j] = 1.0;
    J.col(j) = forward(sc, State::from_flat(e), tau).final_state.flat() - f0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J.transpose() * J);
  EXPECT_NEAR(es.eigenvalues().maxCoeff(), kLambdaMax, 1e-9);
  EXPECT_NEAR(es.eigenvalues().minCoeff(), 1.0 / kLambdaMax, 1e-9);
}

TEST(GradDescent, DroppedUnrollGradientStillDescendsOnFreeFall) {
  // The faulty adjoint reports N = [[1, 1/2], [0, 1]] per axis instead of J.
  // Descent follows N^T J, whose eigenvalues 2 and 1/2 are both positive, so
  // the loss still contracts on this linear scene; the fault is visible to
  // the gradient check, not to the backward oracle.
  Scenario sc = Scenario::free_fall();
  sc.faults.dropped_unroll_grad = true;
  const auto tau = zero_force(sc.steps, 2);
  const Rollout r = rollout(sc, State::zeros(2), tau);
  Eigen::MatrixXd NT(4, 4);
  for (int k = 0; k < 4; ++k) {
    Vector e = Vector::Zero(4);
    e[k] = 1.0;
    NT.col(k) = vector_jacobian_product(sc, r, e);
  }
  Eigen::Matrix4d J = Eigen::Matrix4d::Identity();
  J(0, 2) = J(1, 3) = 1.0;
  const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(NT * J).eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    EXPECT_NEAR(ev[i].imag(), 0.0, 1e-9);
    const double re = ev[i].real();
    EXPECT_TRUE(std::abs(re - 2.0) < 1e-9 || std::abs(re - 0.5) < 1e-9) << re;
  }

  CampaignConfig cfg;
  cfg.max_grad_iter = 200;
  cfg.eps_B = 1e-10;
  Rng rng(8);
  const State sT = r.final_state();
  const DescentResult d = grad_descent(sc, State::zeros(2), sT, *mutate(sc, State::zeros(2), 1e-3, rng), tau, cfg);
  EXPECT_LT(d.loss_trace.back(), 1e-10);
}

TEST(ViolateOracle, Examples) {
  CampaignConfig cfg;  // eps_F on the norm, eps_B on the loss
  const State s = state({0.5, 0.5}, {0.1, 0.0});
  EXPECT_FALSE(violate_oracle(s, s, s, s, 0.0, cfg).any());

  State mut = s;
  mut.velocities[0] += 2.0 * cfg.eps_I;
  State fin = s;
  fin.positions[1] += cfg.eps_F / 2.0;
  const OracleResult fwd = violate_oracle(s, mut, s, fin, 0.0, cfg);
  EXPECT_TRUE(fwd.forward);
  EXPECT_FALSE(fwd.backward);

  const OracleResult bwd = violate_oracle(s, s, s, s, 2.0 * cfg.eps_B, cfg);
  EXPECT_TRUE(bwd.backward);
  EXPECT_FALSE(bwd.forward);

  fin.positions[1] = s.positions[1] + 2.0 * cfg.eps_F;
  EXPECT_FALSE(violate_oracle(s, mut, s, fin, 0.0, cfg).forward);
  EXPECT_THROW(violate_oracle(s, State::zeros(4), s, s, 0.0, cfg), std::invalid_argument);
}

TEST(ViolateOracle, DoubleImpulseAdmitsTwoPreimages) {
  // Ball 1 bounces off the floor at t = 1e-4 s, then ball 0 strikes it at
  // t = 5e-3 s along a normal tilted by asin(0.01). Two contacts in one step
  // double the pair impulse. Running the pristine engine backwards from the
  // faulted end state gives a second initial state with a single contact that
  // the faulted engine maps to the same end state.
  Scenario sc = Scenario::balls_in_box(2);
  sc.steps = 1;
  Scenario di = sc;
  di.faults.double_impulse = true;
  const double r = sc.radius, tw = 1e-4, tc = 5e-3, s = 0.01;
  const Vec2 v1(-2.0, 1.0), u0(1.0, -0.5);
  const Vec2 p1c = Vec2(0.5, r) + v1 * (tc - tw);
  const Vec2 p0c = p1c - 2.0 * r * Vec2(std::sqrt(1.0 - s * s), s);
  State a = State::zeros(4);
  a.positions << p0c - u0 * tc, Vec2(0.5 - v1.x() * tw, r + v1.y() * tw);
  a.velocities << u0, Vec2(v1.x(), -v1.y());
  ASSERT_TRUE(check_constraints(sc, a).valid);

  const auto tau = zero_force(1, 4);
  const Rollout ra = rollout(di, a, tau);
  ASSERT_EQ(ra.contact_count(), 2u);
  const State e = ra.final_state();
  const State back = forward(sc, {e.positions, -e.velocities}, tau).final_state;
  const State b{back.positions, -back.velocities};
  ASSERT_TRUE(check_constraints(sc, b).valid);
  const Rollout rb = rollout(di, b, tau);
  EXPECT_EQ(rb.contact_count(), 1u);
  EXPECT_LT(distance(rb.final_state(), e), 1e-12);
  EXPECT_GT(distance(a, b), 1.0);

  const CampaignConfig cfg;
  const OracleResult o = violate_oracle(a, b, e, rb.final_state(), loss(rb.final_state(), e), cfg);
  EXPECT_TRUE(o.forward);
  EXPECT_FALSE(o.backward);
  // The pristine engine separates the two states.
  EXPECT_GT(distance(forward(sc, a, tau).final_state, forward(sc, b, tau).final_state), 1.0);
}

Finding sample_finding() {
  Finding f;
  f.seed_id = 3;
  f.iteration = 17;
  f.violation = Violation::Forward;
  f.s0_seed = state({0.1, 0.2}, {0.3, 0.4});
  f.s0_mut = state({0.1 + 1e-7, 0.2}, {0.3, 0.4 - 1.0 / 3.0});
  f.sT_seed = state({0.5, 0.6}, {0.7, 0.8});
  f.sT_mut = state({0.5, 0.6}, {0.7, 0.8 + 1e-17});
  f.delta_s_initial = test::vec({1e-3, 0, 0, 0});
  f.delta_s_final = test::vec({1e-7, 0, 0, -1.0 / 3.0});
  f.initial_gradient = test::vec({-2e-3, 0, 0, 1e-300});
  f.loss_trace = {1e-6, 5e-7};
  f.grad_norm_trace = {2e-3, 1e-3};
  f.contact_change = {false, true};
  f.direction_angle_trace = {0.5, std::numeric_limits<double>::quiet_NaN()};
  f.rng_draw_ids = {42, 17};
  f.categories.forward_velocity = true;
  f.categories.velocity_gap = 1.0 / 3.0;
  f.categories.direction_angle = std::numeric_limits<double>::quiet_NaN();
  f.categories.note = "x";
  return f;
}

TEST(Finding, JsonRoundTripIsExact) {
  const Finding f = sample_finding();
  const nlohmann::json j = to_json(f);
  const Finding back = finding_from_json(j);
  EXPECT_EQ(to_json(back).dump(), j.dump());
  EXPECT_EQ(back.s0_mut, f.s0_mut);
  EXPECT_EQ(back.delta_s_final, f.delta_s_final);
  EXPECT_TRUE(std::isnan(back.direction_angle_trace[1]));
  EXPECT_EQ(back.rng_draw_ids, f.rng_draw_ids);
  EXPECT_EQ(back.contact_change, f.contact_change);
}

SeedPool small_pool(const Scenario& sc, std::size_t n) {
  Scenario seed_sc = sc;
  seed_sc.force_cap = 1.0;
  return collect_seeds(seed_sc, default_meta_seed(sc), n, 20, 7, 50);
}

TEST(Campaign, SchedulingToggleSharesTheFirstIteration) {
  const Scenario sc = Scenario::balls_in_box(4);
  const SeedPool pool = small_pool(sc, 50);
  CampaignConfig on;
  on.max_iter = 3;
  on.rng_seed = 5;
  CampaignConfig off = on;
  off.scheduling_enabled = false;
  const CampaignResult a = fuzz_campaign(sc, pool, on), b = fuzz_campaign(sc, pool, off);
  ASSERT_EQ(a.iterations.size(), 3u);
  ASSERT_EQ(b.iterations.size(), 3u);
  EXPECT_EQ(a.iterations[0].seed_id, b.iterations[0].seed_id);
  EXPECT_EQ(a.iterations[0].final_loss, b.iterations[0].final_loss);
  EXPECT_EQ(a.iterations[0].descent_steps, b.iterations[0].descent_steps);
  EXPECT_EQ(a.iterations[0].mutation_redraws, b.iterations[0].mutation_redraws);
  // Without scheduling the queue is FIFO.
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(b.iterations[i].seed_id, i);
}

TEST(Campaign, BookkeepingAndReplay) {
  const Scenario sc = Scenario::balls_in_box(4);
  const SeedPool pool = small_pool(sc, 30);
  CampaignConfig cfg;
  cfg.max_iter = 40;  // more than the pool: stops at exhaustion
  cfg.rng_seed = 2;
  const CampaignResult r = fuzz_campaign(sc, pool, cfg, true);
  ASSERT_EQ(r.iterations.size(), 30u);
  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < r.iterations.size(); ++i) {
    EXPECT_EQ(r.iterations[i].iteration, i);
    EXPECT_TRUE(seen.insert(r.iterations[i].seed_id).second);
  }
  EXPECT_EQ(r.queue_diagnostics.size(), 30u);
  EXPECT_EQ(r.timings.iteration_seconds.size(), 30u);
  EXPECT_EQ(r.finding_count(), 0u);

  const IterationRecord again =
      run_iteration(sc, cfg, r.iterations[7].seed_id, pool.seeds[r.iterations[7].seed_id], 7);
  EXPECT_EQ(again.final_loss, r.iterations[7].final_loss);
  EXPECT_EQ(again.descent_steps, r.iterations[7].descent_steps);
}

TEST(Campaign, PristineFreeFallHasNoFindings) {
  const Scenario sc = Scenario::free_fall();
  const SeedPool pool = small_pool(sc, 100);
  CampaignConfig cfg;
  cfg.max_iter = 100;
  const CampaignResult r = fuzz_campaign(sc, pool, cfg);
  EXPECT_EQ(r.iterations.size(), 100u);
  EXPECT_EQ(r.finding_count(), 0u);
  for (const auto& it : r.iterations) EXPECT_EQ(it.status, IterationStatus::Ok);
}

TEST(Campaign, ZeroGradSegmentRaisesBackwardViolations) {
  Scenario sc = Scenario::balls_in_box(4);
  sc.faults.zero_grad_segment = true;
  const SeedPool pool = small_pool(sc, 20);
  CampaignConfig cfg;
  cfg.max_iter = 20;
  const CampaignResult r = fuzz_campaign(sc, pool, cfg);
  EXPECT_GT(r.count(Violation::Backward), 0u);
  for (const auto& f : r.findings()) {
    EXPECT_FALSE(f.loss_trace.empty());
    EXPECT_EQ(f.loss_trace.size(), f.grad_norm_trace.size());
    EXPECT_EQ(f.rng_draw_ids.iteration, f.iteration);
  }
}

TEST(CampaignConfig, Validation) {
  CampaignConfig c;
  EXPECT_NO_THROW(c.validate());
  c.eps_F = 1e-13;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.max_grad_iter = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.energy_jump_threshold = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(CampaignConfig, JsonRoundTrip) {
  CampaignConfig c;
  c.step_rule = StepRule::Fixed;
  c.eps_B_on = ThresholdOn::Norm;
  c.weights.velocity = 0.25;
  const nlohmann::json j = c;
  EXPECT_EQ(nlohmann::json(j.get<CampaignConfig>()), j);
  nlohmann::json bad = j;
  bad["no_such_key"] = 1;
  EXPECT_ANY_THROW(bad.get<CampaignConfig>());
}

}  // namespace
}  // namespace simfuzz
