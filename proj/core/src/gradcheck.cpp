#include "simfuzz/gradcheck.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "json_util.hpp"
#include "simfuzz/seedgen.hpp"

namespace simfuzz {

using nlohmann::json;

NLOHMANN_JSON_SERIALIZE_ENUM(ContactFilter, {{ContactFilter::None, "none"}, {ContactFilter::One, "one"}, {ContactFilter::Any, "any"}})

void GradcheckConfig::validate() const {
  if (!(tolerance > 0.0)) throw std::invalid_argument("gradcheck.tolerance must be positive");
  if (!(h > 0.0)) throw std::invalid_argument("gradcheck.h must be positive");
  if (!(max_speed >= 0.0)) throw std::invalid_argument("gradcheck.max_speed must be non-negative");
  if (!(force_cap >= 0.0)) throw std::invalid_argument("gradcheck.force_cap must be non-negative");
  if (max_attempts < 1) throw std::invalid_argument("gradcheck.max_attempts must be at least 1");
}

void to_json(json& j, const GradcheckConfig& c) {
  j = {{"samples", c.samples},     {"tolerance", c.tolerance}, {"h", c.h},
       {"contacts", c.contacts},   {"max_speed", c.max_speed}, {"force_cap", c.force_cap},
       {"max_attempts", c.max_attempts}};
}

void from_json(const json& j, GradcheckConfig& c) {
  detail::reject_unknown_keys(j, {"samples", "tolerance", "h", "contacts", "max_speed", "force_cap", "max_attempts"},
                              "gradcheck");
  if (auto it = j.find("contacts"); it != j.end() && *it != "none" && *it != "one" && *it != "any")
    throw std::invalid_argument("gradcheck.contacts must be \"none\", \"one\" or \"any\"");
  detail::get_if_present(j, "samples", c.samples);
  detail::get_if_present(j, "tolerance", c.tolerance);
  detail::get_if_present(j, "h", c.h);
  detail::get_if_present(j, "contacts", c.contacts);
  detail::get_if_present(j, "max_speed", c.max_speed);
  detail::get_if_present(j, "force_cap", c.force_cap);
  detail::get_if_present(j, "max_attempts", c.max_attempts);
}

std::vector<std::size_t> contact_signature(const Rollout& r) {
  std::vector<std::size_t> sig;
  for (std::size_t step = 0; step < r.events.size(); ++step)
    for (const auto& e : r.events[step]) sig.insert(sig.end(), {step, static_cast<std::size_t>(e.kind), e.a, e.b});
  return sig;
}

namespace {

bool keep(ContactFilter f, std::size_t contacts) {
  switch (f) {
    case ContactFilter::None: return contacts == 0;
    case ContactFilter::One: return contacts == 1;
    case ContactFilter::Any: return true;
  }
  return false;
}

}  // namespace

GradcheckReport run_gradcheck(const Scenario& scenario, const GradcheckConfig& cfg, std::uint64_t rng_seed) {
  scenario.validate();
  cfg.validate();
  GradcheckReport out;
  if (cfg.samples == 0) {
    out.warning = "no samples requested; the check passes vacuously";
    return out;
  }
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    Rng rng = make_stream(rng_seed, i);
    State s0;
    Rollout base;
    ExternalForce tau;
    bool found = false;
    for (std::size_t attempt = 0; attempt < cfg.max_attempts && !found; ++attempt) {
      s0 = uniform_random_state(scenario, cfg.max_speed, rng);
      if (!check_constraints(scenario, s0).valid) continue;
      tau = rand_force(scenario.steps, scenario.dim(), cfg.force_cap, rng);
      try {
        base = rollout(scenario, s0, tau);
      } catch (const SimulationError&) {
        continue;
      }
      found = keep(cfg.contacts, base.contact_count());
    }
    if (!found) throw std::runtime_error("gradcheck: no state with the requested contacts after max_attempts draws");

    std::uniform_real_distribution<double> offset(-0.5, 0.5);
    Vector target = base.final_state().flat();
    for (Eigen::Index k = 0; k < target.size(); ++k) target[k] += offset(rng);
    const State target_final = State::from_flat(target);

    const Vector analytic = backward_from(scenario, base, target_final).grad_s0;
    const auto signature = contact_signature(base);
    const Vector flat = s0.flat();
    GradcheckSample sample;
    sample.index = i;
    sample.contacts = base.contact_count();
    std::vector<Eigen::Index> kept;
    Vector reference = Vector::Zero(flat.size());
    for (Eigen::Index k = 0; k < flat.size(); ++k) {
      Vector plus = flat, minus = flat;
      plus[k] += cfg.h;
      minus[k] -= cfg.h;
      try {
        const Rollout rp = rollout(scenario, State::from_flat(plus), tau);
        const Rollout rm = rollout(scenario, State::from_flat(minus), tau);
        if (contact_signature(rp) != signature || contact_signature(rm) != signature) {
          ++sample.skipped_components;
          continue;
        }
        reference[k] = (loss(rp.final_state(), target_final) - loss(rm.final_state(), target_final)) / (2.0 * cfg.h);
        kept.push_back(k);
      } catch (const SimulationError&) {
        ++sample.skipped_components;
      }
    }
    double scale = 0.0;
    for (auto k : kept) scale = std::max({scale, std::abs(analytic[k]), std::abs(reference[k])});
    for (auto k : kept) {
      const double err = scale == 0.0 ? 0.0 : std::abs(analytic[k] - reference[k]) / scale;
      if (err > sample.relative_error || k == kept.front()) {
        sample.relative_error = std::max(sample.relative_error, err);
        sample.worst_component = static_cast<std::size_t>(k);
        sample.analytic = analytic[k];
        sample.reference = reference[k];
      }
    }
    out.skipped_components += sample.skipped_components;
    if (sample.relative_error > out.max_relative_error || i == 0) {
      out.max_relative_error = std::max(out.max_relative_error, sample.relative_error);
      out.worst_sample = i;
    }
    out.samples.push_back(sample);
  }
  out.passed = out.max_relative_error <= cfg.tolerance;
  return out;
}

json to_json(const GradcheckReport& r) {
  json samples = json::array();
  for (const auto& s : r.samples)
    samples.push_back({{"index", s.index},
                       {"contacts", s.contacts},
                       {"skipped_components", s.skipped_components},
                       {"relative_error", s.relative_error},
                       {"worst_component", s.worst_component},
                       {"analytic", s.analytic},
                       {"finite_difference", s.reference}});
  return {{"max_relative_error", r.max_relative_error},
          {"worst_sample", r.worst_sample},
          {"skipped_components", r.skipped_components},
          {"passed", r.passed},
          {"warning", r.warning},
          {"samples", samples}};
}

}  // namespace simfuzz
