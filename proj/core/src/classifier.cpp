#include "simfuzz/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "json_util.hpp"

namespace simfuzz {

using nlohmann::json;

void ClassifierConfig::validate() const {
  if (pos_tol && !(*pos_tol >= 0.0)) throw std::invalid_argument("classifier.pos_tol must be non-negative");
  if (vel_tol && !(*vel_tol >= 0.0)) throw std::invalid_argument("classifier.vel_tol must be non-negative");
  if (!(theta_d > 0.0 && theta_d <= 3.141592653589793))
    throw std::invalid_argument("classifier.theta_d must lie in (0, pi]");
}

void to_json(json& j, const ClassifierConfig& c) {
  j = {{"pos_tol", c.pos_tol ? json(*c.pos_tol) : json(nullptr)},
       {"vel_tol", c.vel_tol ? json(*c.vel_tol) : json(nullptr)},
       {"theta_d", c.theta_d},
       {"direction", c.direction == DirectionMode::First ? "first" : "majority"}};
}

void from_json(const json& j, ClassifierConfig& c) {
  detail::reject_unknown_keys(j, {"pos_tol", "vel_tol", "theta_d", "direction"}, "classifier");
  auto tol = [&](const char* key, std::optional<double>& out) {
    if (auto it = j.find(key); it != j.end()) out = it->is_null() ? std::nullopt : std::optional(it->get<double>());
  };
  tol("pos_tol", c.pos_tol);
  tol("vel_tol", c.vel_tol);
  detail::get_if_present(j, "theta_d", c.theta_d);
  if (auto it = j.find("direction"); it != j.end()) {
    const auto mode = it->get<std::string>();
    if (mode == "first") {
      c.direction = DirectionMode::First;
    } else if (mode == "majority") {
      c.direction = DirectionMode::Majority;
    } else {
      throw std::invalid_argument("classifier.direction must be \"first\" or \"majority\"");
    }
  }
}

ForwardFlags classify_forward(const Finding& f, double pos_tol, double vel_tol) {
  ForwardFlags out;
  out.position_gap = (f.s0_mut.positions - f.s0_seed.positions).norm();
  out.velocity_gap = (f.s0_mut.velocities - f.s0_seed.velocities).norm();
  out.position = out.position_gap > pos_tol;
  out.velocity = out.velocity_gap > vel_tol;
  return out;
}

std::optional<double> descent_angle(const Vector& g, const Vector& ds) {
  if (g.size() != ds.size()) throw std::invalid_argument("gradient and perturbation differ in dimension");
  const double ng = g.norm();
  const double nd = ds.norm();
  if (ng == 0.0 || nd == 0.0) return std::nullopt;
  return std::acos(std::clamp(-g.dot(ds) / (ng * nd), -1.0, 1.0));
}

std::optional<bool> classify_direction(const Vector& g, const Vector& ds, double theta_d) {
  const auto angle = descent_angle(g, ds);
  if (!angle) return std::nullopt;
  return *angle >= theta_d;
}

std::size_t extent_violations(const std::vector<double>& loss, const std::vector<double>& grad, double slack) {
  if (loss.size() != grad.size()) throw std::invalid_argument("loss and gradient traces differ in length");
  const std::size_t n = loss.size();
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(loss[i]) || !std::isfinite(grad[i])) throw std::invalid_argument("non-finite trace entry");
  if (n < 2) return 0;
  const double widen = 1.0 + slack;

  // Sweep i by increasing loss; j joins once loss_j * widen < loss_i. A
  // Fenwick tree over the gradient norms of joined j counts those above
  // grad_i * widen.
  std::vector<double> levels(grad);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::vector<std::size_t> tree(levels.size() + 1, 0);
  auto add = [&](double g) {
    for (auto k = static_cast<std::size_t>(std::lower_bound(levels.begin(), levels.end(), g) - levels.begin()) + 1;
         k < tree.size(); k += k & (~k + 1))
      ++tree[k];
  };
  auto at_most = [&](double g) {  // joined entries with norm <= g
    std::size_t total = 0;
    for (auto k = static_cast<std::size_t>(std::upper_bound(levels.begin(), levels.end(), g) - levels.begin()); k > 0;
         k -= k & (~k + 1))
      total += tree[k];
    return total;
  };

  std::vector<std::size_t> by_loss(n), by_key(n);
  std::iota(by_loss.begin(), by_loss.end(), std::size_t{0});
  std::iota(by_key.begin(), by_key.end(), std::size_t{0});
  std::sort(by_loss.begin(), by_loss.end(), [&](std::size_t a, std::size_t b) { return loss[a] < loss[b]; });
  std::sort(by_key.begin(), by_key.end(),
            [&](std::size_t a, std::size_t b) { return loss[a] * widen < loss[b] * widen; });

  std::size_t joined = 0, pairs = 0;
  for (std::size_t i : by_loss) {
    for (; joined < n && loss[i] > loss[by_key[joined]] * widen; ++joined) add(grad[by_key[joined]]);
    pairs += joined - at_most(grad[i] * widen);
  }
  return pairs;
}

CategorySet classify(const Finding& f, const ClassifierConfig& cfg, const CampaignConfig& campaign) {
  CategorySet c;
  c.direction_angle = std::numeric_limits<double>::quiet_NaN();
  if (f.violation == Violation::Forward) {
    const ForwardFlags ff = classify_forward(f, cfg.position_tolerance(campaign), cfg.velocity_tolerance(campaign));
    c.forward_position = ff.position;
    c.forward_velocity = ff.velocity;
    c.position_gap = ff.position_gap;
    c.velocity_gap = ff.velocity_gap;
  } else {
    const auto angle = descent_angle(f.initial_gradient, f.delta_s_initial);
    if (angle) c.direction_angle = *angle;
    if (cfg.direction == DirectionMode::First) {
      if (angle) {
        c.grad_direction = *angle >= cfg.theta_d;
      } else {
        c.note = "direction undefined: zero gradient or perturbation at the first iterate";
      }
    } else {
      std::size_t defined = 0, wrong = 0;
      for (double a : f.direction_angle_trace) {
        if (std::isnan(a)) continue;
        ++defined;
        wrong += a >= cfg.theta_d;
      }
      if (defined == 0) {
        c.note = "direction undefined at every iterate";
      } else {
        c.grad_direction = 2 * wrong > defined;
        c.note = std::to_string(wrong) + " of " + std::to_string(defined) + " iterates point away";
      }
    }
    c.extent_pairs = extent_violations(f.loss_trace, f.grad_norm_trace);
    c.grad_extent = c.extent_pairs > 0;
  }
  c.unapparent = !(c.forward_position || c.forward_velocity || c.grad_direction || c.grad_extent);
  return c;
}

void classify_all(std::vector<Finding>& findings, const ClassifierConfig& cfg, const CampaignConfig& campaign) {
  for (auto& f : findings) f.categories = classify(f, cfg, campaign);
}

CategoryTable tabulate(const std::vector<Finding>& findings) {
  CategoryTable t;
  for (const auto& f : findings) {
    const auto& c = f.categories;
    (f.violation == Violation::Forward ? t.forward_findings : t.backward_findings) += 1;
    t.forward_position += c.forward_position;
    t.forward_velocity += c.forward_velocity;
    t.backward_direction += c.grad_direction;
    t.backward_extent += c.grad_extent;
    t.unapparent += c.unapparent;
  }
  return t;
}

json to_json(const CategoryTable& t) {
  return {{"Forward", {{"Position", t.forward_position}, {"Velocity", t.forward_velocity}}},
          {"Backward", {{"Direction", t.backward_direction}, {"Extent", t.backward_extent}}},
          {"Unapparent", t.unapparent},
          {"findings", {{"ForwardViolation", t.forward_findings}, {"BackwardViolation", t.backward_findings}}}};
}

void write_category_csv(std::ostream& out, const CategoryTable& t) {
  out << "category,count\n"
      << "ForwardPosition," << t.forward_position << '\n'
      << "ForwardVelocity," << t.forward_velocity << '\n'
      << "BackwardDirection," << t.backward_direction << '\n'
      << "BackwardExtent," << t.backward_extent << '\n'
      << "Unapparent," << t.unapparent << '\n';
}

}  // namespace simfuzz
