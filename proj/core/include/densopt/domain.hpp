#pragma once

#include "densopt/polynomial.hpp"

#include <map>
#include <optional>

namespace densopt {

enum class DomainKind { Box, Ball, General };

/// Integration domain carrying analytic Lebesgue moments (Box, Ball) or a
/// user-supplied moment table (General). A General table may carry a
/// bounding box to enable rejection sampling.
struct Domain {
  DomainKind kind = DomainKind::Box;
  // Box
  Eigen::VectorXd lo, hi;
  // Ball
  Eigen::VectorXd center;
  double radius = 1.0;
  // General
  std::map<MultiIndex, double> moment_table;
  std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> bounding_box;

  int dim = 0;

  static Domain box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);
  static Domain ball(const Eigen::VectorXd& center, double radius);
  static Domain general(int dim, std::map<MultiIndex, double> moments);

  double volume() const;
};

/// Exact Lebesgue moment of x^alpha over the domain. Odd moments of
/// symmetric domains come out exactly zero.
double lebesgue_moment(const Domain& domain, const MultiIndex& alpha);

/// All moments up to max_degree, keyed by exponent tuple.
std::map<MultiIndex, double> lebesgue_moments(const Domain& domain, int dim, int max_degree);

/// Integral of p over the domain; converts to the monomial basis and pairs
/// coefficients with moments.
double integrate(const Polynomial& p, const Domain& domain);

std::string moments_to_json(const std::map<MultiIndex, double>& moments);
std::map<MultiIndex, double> moments_from_json(const std::string& json_text, int dim);

}  // namespace densopt
