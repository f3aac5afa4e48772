#include "simfuzz/seedgen.hpp"

#include <string>

#include "text_util.hpp"

namespace simfuzz {

ExternalForce rand_force(std::size_t steps, std::size_t dim, double cap, Rng& rng) {
  ExternalForce tau(steps, Vector::Zero(static_cast<Eigen::Index>(dim)));
  if (cap == 0.0) return tau;
  std::uniform_real_distribution<double> u(-cap, cap);
  for (auto& f : tau)
    for (Eigen::Index k = 0; k < f.size(); ++k) f[k] = u(rng);
  return tau;
}

ExternalForce rand_force(const Scenario& scenario, Rng& rng) {
  return rand_force(scenario.steps, scenario.dim(), scenario.force_cap, rng);
}

SeedPool collect_seeds(const Scenario& scenario, const State& meta_seed, std::size_t n,
                       std::size_t segment_len, std::uint64_t rng_seed, std::size_t chain_segments) {
  if (n == 0) throw std::invalid_argument("pool size must be at least 1");
  if (meta_seed.dim() != scenario.dim()) throw std::invalid_argument("meta seed dimension mismatch");
  auto report = check_constraints(scenario, meta_seed);
  if (!report.valid || !meta_seed.is_finite())
    throw InvalidSeedError("meta seed violates the scenario constraints", std::move(report));

  SeedPool pool;
  pool.meta_seed = meta_seed;
  pool.scenario_hash = scenario.hash();
  pool.rng_seed = rng_seed;
  pool.segment_len = segment_len;
  pool.chain_segments = chain_segments;
  pool.seeds.reserve(n);
  pool.provenance.reserve(n);

  Scenario segment = scenario;
  segment.steps = segment_len;
  // Only faulted engines can leave the valid region; bound the damage.
  const std::size_t max_segments = 2 * n + 100;

  State current = meta_seed;
  std::size_t trace_step = 0;
  for (std::uint64_t k = 0; pool.seeds.size() < n; ++k) {
    if (k >= max_segments)
      throw std::runtime_error("seed collection produced too many invalid states");
    if (chain_segments > 0 && k > 0 && k % chain_segments == 0) {
      current = meta_seed;
      trace_step = 0;
    }
    Rng rng = make_stream(rng_seed, k);
    const ExternalForce tau = rand_force(segment, rng);
    try {
      current = forward(segment, current, tau).final_state;
      trace_step += segment_len;
    } catch (const SimulationError& e) {
      pool.pre_findings.push_back({trace_step, k, current, {}, e.what()});
      current = meta_seed;
      trace_step = 0;
      continue;
    }
    auto rep = check_constraints(scenario, current);
    if (!rep.valid) {
      pool.pre_findings.push_back({trace_step, k, current, std::move(rep), {}});
      continue;
    }
    pool.seeds.push_back(current);
    pool.provenance.push_back({trace_step, k});
  }
  return pool;
}

State uniform_random_state(const Scenario& scenario, double max_speed, Rng& rng) {
  State s = State::zeros(scenario.dim());
  std::uniform_real_distribution<double> speed(-max_speed, max_speed);
  for (std::size_t b = 0; b < scenario.body_count; ++b) {
    for (std::size_t d = 0; d < kDims; ++d) {
      const auto k = static_cast<Eigen::Index>(kDims * b + d);
      double lo = -1.0, hi = 1.0;
      if (scenario.kind == ScenarioKind::BallsInBox) {
        lo = scenario.box_min[d] + scenario.radius;
        hi = scenario.box_max[d] - scenario.radius;
      }
      s.positions[k] = std::uniform_real_distribution<double>(lo, hi)(rng);
      s.velocities[k] = speed(rng);
    }
  }
  return s;
}

namespace {
constexpr const char* kPoolMagic = "# simfuzz seed pool v1";
}

void write_pool(std::ostream& out, const SeedPool& pool) {
  std::string buf;
  buf += kPoolMagic;
  buf += "\nscenario_hash=" + std::to_string(pool.scenario_hash);
  buf += "\nrng_seed=" + std::to_string(pool.rng_seed);
  buf += "\nn=" + std::to_string(pool.seeds.size());
  buf += "\ndims=" + std::to_string(pool.meta_seed.dim());
  buf += "\nsegment_len=" + std::to_string(pool.segment_len);
  buf += "\nchain_segments=" + std::to_string(pool.chain_segments);
  buf += "\nmeta=";
  detail::append_vector(buf, pool.meta_seed.flat());
  buf += "\nseed,trace_step,draw_id,state\n";
  for (std::size_t i = 0; i < pool.seeds.size(); ++i) {
    buf += std::to_string(i) + ',' + std::to_string(pool.provenance[i].trace_step) + ',' +
           std::to_string(pool.provenance[i].draw_id) + ',';
    detail::append_vector(buf, pool.seeds[i].flat());
    buf += '\n';
  }
  out << buf;
}

SeedPool read_pool(std::istream& in) {
  std::string line;
  auto header = [&](const std::string& key) {
    if (!std::getline(in, line) || line.rfind(key + "=", 0) != 0)
      throw std::runtime_error("seed pool: expected '" + key + "=' header");
    return line.substr(key.size() + 1);
  };
  if (!std::getline(in, line) || line != kPoolMagic) throw std::runtime_error("seed pool: bad magic line");
  SeedPool pool;
  pool.scenario_hash = detail::parse_integer<std::uint64_t>(header("scenario_hash"));
  pool.rng_seed = detail::parse_integer<std::uint64_t>(header("rng_seed"));
  const auto n = detail::parse_integer<std::size_t>(header("n"));
  const auto dims = detail::parse_integer<std::size_t>(header("dims"));
  pool.segment_len = detail::parse_integer<std::size_t>(header("segment_len"));
  pool.chain_segments = detail::parse_integer<std::size_t>(header("chain_segments"));

  auto parse_state = [&](const std::vector<std::string_view>& fields, std::size_t first) {
    if (fields.size() != first + 2 * dims) throw std::runtime_error("seed pool: wrong field count");
    Vector flat(static_cast<Eigen::Index>(2 * dims));
    for (std::size_t j = 0; j < 2 * dims; ++j) flat[static_cast<Eigen::Index>(j)] = detail::parse_double(fields[first + j]);
    return State::from_flat(flat);
  };
  const std::string meta = header("meta");
  pool.meta_seed = parse_state(detail::split(meta, ','), 0);
  if (!std::getline(in, line) || line != "seed,trace_step,draw_id,state")
    throw std::runtime_error("seed pool: missing column header");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("seed pool: truncated");
    const auto fields = detail::split(line, ',');
    if (fields.size() < 3 || detail::parse_integer<std::size_t>(fields[0]) != i)
      throw std::runtime_error("seed pool: rows out of order");
    pool.provenance.push_back({detail::parse_integer<std::size_t>(fields[1]),
                               detail::parse_integer<std::uint64_t>(fields[2])});
    pool.seeds.push_back(parse_state(fields, 3));
  }
  return pool;
}

}  // namespace simfuzz
