#pragma once

#include "densopt/domain.hpp"
#include "densopt/polynomial.hpp"
#include "densopt/rng.hpp"

#include <array>
#include <string>
#include <vector>

namespace densopt {

/// Basic semialgebraic state set {x : g_i(x) >= 0}. Construction guarantees
/// that one generator is syntactically N - ||x||^2 (appended if absent), as
/// the compactness certificate requires.
class SemialgebraicSet {
 public:
  /// Empty placeholder (dim 0); value members default-construct with it.
  SemialgebraicSet() = default;

  static SemialgebraicSet ball(const Eigen::VectorXd& center, double radius);
  static SemialgebraicSet box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);
  static SemialgebraicSet general(std::vector<Polynomial> generators, Domain domain);

  int dim() const { return dim_; }
  DomainKind kind() const { return domain_.kind; }
  const Domain& domain() const { return domain_; }
  const std::vector<Polynomial>& generators() const { return generators_; }
  double ball_bound() const { return ball_bound_; }
  int ball_generator_index() const { return ball_gen_index_; }
  /// True when the N - ||x||^2 generator was auto-appended rather than part
  /// of the user's description.
  bool ball_bound_auto_appended() const { return auto_appended_; }

  /// Product of all generators (Eq. barg); positive on the interior for
  /// well-posed generator lists.
  Polynomial bar_g() const;

  bool contains(const Eigen::VectorXd& x, double tol = kContainsTol) const;

  /// Uniform samples; deterministic for a fixed seed. Ball sampling uses a
  /// normalized Gaussian direction with radius ~ U^(1/n) (rejection-free).
  std::vector<Eigen::VectorXd> sample_uniform(int count, std::uint64_t seed) const;

  /// Affinely mapped copy: the set in xhat coordinates where x = Q xhat + q.
  SemialgebraicSet affine_preimage(const Eigen::MatrixXd& Q, const Eigen::VectorXd& q) const;

  static constexpr double kContainsTol = 1e-9;

 private:
  void append_ball_bound_if_missing();

  int dim_ = 0;
  std::vector<Polynomial> generators_;
  Domain domain_;
  double ball_bound_ = 0.0;
  int ball_gen_index_ = -1;
  bool auto_appended_ = false;
};

/// Box input set, affinely normalized to [0, u_bar]^m:
///   u_original_i = lo_i + scale_i * u_normalized_i.
struct InputBox {
  int m = 0;
  double u_bar = 0.0;
  std::vector<std::array<double, 2>> original;  // per-input [lo, hi]
  std::vector<double> lo;
  std::vector<double> scale;

  Eigen::VectorXd to_original(const Eigen::VectorXd& u_normalized) const;
  Eigen::VectorXd to_normalized(const Eigen::VectorXd& u_original) const;
  bool is_identity() const;
};

/// Rewrite of the problem data induced by the input normalization: the
/// drift absorbs lo_i * f_{u_i}, input fields and input costs pick up the
/// per-input scale. Closed-loop dynamics are unchanged as a function of
/// state.
struct InputRewrite {
  PolyVector drift;                  // f + sum_i lo_i f_{u_i}
  std::vector<PolyVector> inputs;    // scale_i * f_{u_i}
  Polynomial state_cost;             // l_x + sum_i lo_i l_{u_i}
  std::vector<Polynomial> input_costs;  // scale_i * l_{u_i}
};

InputBox normalize_inputs(const std::vector<std::array<double, 2>>& box);

InputRewrite apply_input_rewrite(const InputBox& box, const PolyVector& f,
                                 const std::vector<PolyVector>& f_u, const Polynomial& l_x,
                                 const std::vector<Polynomial>& l_u);

}  // namespace densopt
