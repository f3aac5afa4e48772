#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

#include "simfuzz/fuzzer.hpp"

namespace simfuzz {

enum class DirectionMode {
  First,     // the gradient at the first descent iterate only
  Majority,  // over every iterate; error when more than half are errors
};

struct ClassifierConfig {
  // Unset tolerances default to eps_I / 2 of the campaign that produced the finding.
  std::optional<double> pos_tol;
  std::optional<double> vel_tol;
  double theta_d = 1.5707963267948966;  // pi / 2
  DirectionMode direction = DirectionMode::First;

  double position_tolerance(const CampaignConfig& c) const { return pos_tol.value_or(c.eps_I / 2.0); }
  double velocity_tolerance(const CampaignConfig& c) const { return vel_tol.value_or(c.eps_I / 2.0); }
  void validate() const;
};

void to_json(nlohmann::json& j, const ClassifierConfig& c);
void from_json(const nlohmann::json& j, ClassifierConfig& c);

struct ForwardFlags {
  bool position = false;
  bool velocity = false;
  double position_gap = 0.0;
  double velocity_gap = 0.0;
};

/// Which parts of the initial-state gap exceed their tolerance.
ForwardFlags classify_forward(const Finding& finding, double pos_tol, double vel_tol);

/// Angle between -g and ds, in [0, pi]; nullopt when either vector is zero.
std::optional<double> descent_angle(const Vector& g, const Vector& ds);

/// True when the angle between -g and ds is at least theta_d, i.e. -g does
/// not point towards the perturbation. nullopt for zero vectors.
std::optional<bool> classify_direction(const Vector& g, const Vector& ds, double theta_d);

inline constexpr double kExtentSlack = 1e-9;

/// Number of pairs (i, j) with loss_i > loss_j (1 + slack) but
/// |g_i| (1 + slack) < |g_j|: a larger loss that receives a smaller gradient.
std::size_t extent_violations(const std::vector<double>& loss_trace, const std::vector<double>& grad_norm_trace,
                              double slack = kExtentSlack);

inline bool classify_extent(const std::vector<double>& loss_trace, const std::vector<double>& grad_norm_trace) {
  return extent_violations(loss_trace, grad_norm_trace) > 0;
}

CategorySet classify(const Finding& finding, const ClassifierConfig& cfg, const CampaignConfig& campaign);

/// Classifies every finding in place.
void classify_all(std::vector<Finding>& findings, const ClassifierConfig& cfg, const CampaignConfig& campaign);

struct CategoryTable {
  std::size_t forward_position = 0;
  std::size_t forward_velocity = 0;
  std::size_t backward_direction = 0;
  std::size_t backward_extent = 0;
  std::size_t unapparent = 0;
  std::size_t forward_findings = 0;
  std::size_t backward_findings = 0;
};

CategoryTable tabulate(const std::vector<Finding>& findings);
nlohmann::json to_json(const CategoryTable& t);
/// `category,count` rows in the order ForwardPosition, ForwardVelocity,
/// BackwardDirection, BackwardExtent, Unapparent.
void write_category_csv(std::ostream& out, const CategoryTable& t);

}  // namespace simfuzz
