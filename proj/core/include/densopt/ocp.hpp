#pragma once

#include "densopt/semialgebraic.hpp"

#include <string>
#include <vector>

namespace densopt {

/// Affine state normalization x = Q xhat + q mapping the unit ball/cube
/// onto the state set. Compilation happens in xhat coordinates.
struct StateScaling {
  Eigen::MatrixXd Q;
  Eigen::VectorXd q;
  Eigen::MatrixXd Qinv;  // kept alongside Q; trajectory code maps points often

  static StateScaling make(const Eigen::MatrixXd& Q, const Eigen::VectorXd& q);
  static StateScaling identity(int n);
  bool is_identity() const;
  Eigen::VectorXd to_scaled(const Eigen::VectorXd& x) const { return Qinv * (x - q); }
  Eigen::VectorXd to_original(const Eigen::VectorXd& xhat) const { return Q * xhat + q; }
};

/// Discounted exit-penalty optimal control problem for input-affine
/// polynomial dynamics xdot = f(x) + sum_i f_{u_i}(x) u_i with inputs
/// already normalized to [0, u_bar]^m (see normalize_inputs).
struct OcpProblem {
  int n = 0;
  int m = 0;
  PolyVector f;
  std::vector<PolyVector> f_u;
  SemialgebraicSet X;
  InputBox U;
  Polynomial l_x;
  std::vector<Polynomial> l_u;
  double beta = 1.0;
  double M = 0.0;  // exit penalty; 0 requests auto_M at synthesis time
  Polynomial rho0_bar;

  /// Assembles the problem from data in original input coordinates,
  /// applying the box normalization rewrite to f, f_u, l_x, l_u.
  static OcpProblem make(PolyVector f, std::vector<PolyVector> f_u, SemialgebraicSet X,
                         std::vector<std::array<double, 2>> input_box, Polynomial l_x,
                         std::vector<Polynomial> l_u, double beta, double M = 0.0,
                         Polynomial rho0_bar = Polynomial());

  void validate() const;

  /// Closed-loop vector field value in original coordinates for a
  /// normalized input u in [0, u_bar]^m.
  Eigen::VectorXd dynamics(const Eigen::VectorXd& x, const Eigen::VectorXd& u_normalized) const;
  /// Joint stage cost l(x, u) for a normalized input.
  double stage_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u_normalized) const;

  int max_dynamics_degree() const;
};

/// Canonical scaling of the state set: Ball -> unit ball, Box -> unit cube.
StateScaling auto_scaling(const SemialgebraicSet& X);

/// The same problem expressed in xhat coordinates.
OcpProblem scale_problem(const OcpProblem& problem, const StateScaling& scaling);

}  // namespace densopt
