#include <benchmark/benchmark.h>

#include "simfuzz/adjoint.hpp"
#include "simfuzz/scheduler.hpp"
#include "simfuzz/seedgen.hpp"

namespace {

using namespace simfuzz;

Scenario box(double radius) {
  Scenario sc = Scenario::balls_in_box(4);
  sc.radius = radius;
  sc.force_cap = 1.0;
  return sc;
}

// A state somewhere along a seed chain, so contacts happen.
State busy_state(const Scenario& sc) {
  return collect_seeds(sc, default_meta_seed(sc), 10, 20, 3, 50).seeds.back();
}

void BM_TimeStep(benchmark::State& st) {
  const Scenario sc = box(st.range(0) / 100.0);
  State s = busy_state(sc);
  const Vector tau = Vector::Zero(sc.dim());
  for (auto _ : st) {
    s = time_step(sc, s, tau);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_TimeStep)->Arg(10)->Arg(15);

void BM_Rollout(benchmark::State& st) {
  Scenario sc = box(0.15);
  sc.steps = 100;
  const State s0 = busy_state(sc);
  const ExternalForce tau = zero_force(sc.steps, sc.dim());
  for (auto _ : st) benchmark::DoNotOptimize(rollout(sc, s0, tau));
}
BENCHMARK(BM_Rollout);

void BM_Backward(benchmark::State& st) {
  Scenario sc = box(0.15);
  sc.steps = 100;
  const State s0 = busy_state(sc);
  const ExternalForce tau = zero_force(sc.steps, sc.dim());
  const Rollout r = rollout(sc, s0, tau);
  const State target = State::zeros(sc.dim());
  for (auto _ : st) benchmark::DoNotOptimize(backward_from(sc, r, target));
}
BENCHMARK(BM_Backward);

// One campaign iteration's worth of scheduling on a pool of the given size.
void BM_Schedule(benchmark::State& st) {
  const Scenario sc = box(0.1);
  const SeedPool pool = collect_seeds(sc, default_meta_seed(sc), st.range(0), 20, 7, 50);
  SeedQueue q(pool.seeds);
  std::size_t i = 0;
  for (auto _ : st) {
    if (q.size() < 2) {
      st.PauseTiming();
      q = SeedQueue(pool.seeds);
      st.ResumeTiming();
    }
    const std::size_t id = q.pop_front().id;
    q.mark_fuzzed(id, ++i % 3 == 0);
    benchmark::DoNotOptimize(q.schedule());
  }
}
BENCHMARK(BM_Schedule)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
