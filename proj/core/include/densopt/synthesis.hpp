#pragma once

#include "densopt/ocp.hpp"
#include "densopt/sos_compiler.hpp"

#include <string>
#include <vector>

namespace densopt {

struct SynthesisConfig {
  Basis basis = Basis::ChebyshevTensor;
  SolverConfig solver;
  bool auto_scale = true;
};

/// Solution of the degree-d density program: the density tuple, its
/// objective value p_d, and solver diagnostics. Polynomials live in the
/// scaled coordinates recorded in `scaling`.
struct DensitySolution {
  int degree = 0;
  Polynomial rho, rho0, rhoT;
  std::vector<Polynomial> sigma;
  double objective = 0.0;  // p_d
  SdpStatus status = SdpStatus::NumericalFailure;
  double solver_gap = 0.0;
  double liouville_residual = 0.0;  // coefficient inf-norm, scaled by data norm
  double identity_residual = 0.0;
  int iterations = 0;
  std::vector<std::string> warnings;

  StateScaling scaling;
  OcpProblem scaled_problem;  // the problem actually compiled (M resolved)
};

/// Feedback law u_i = clamp(sigma_i / max(rho, epsilon), 0, u_bar), stored
/// verbatim from the density solution in scaled coordinates; evaluation in
/// original coordinates goes through the recorded state and input maps.
struct RationalController {
  std::vector<Polynomial> numerators;
  Polynomial denominator;
  double u_bar = 0.0;
  double epsilon = 0.0;
  StateScaling scaling;
  InputBox input_map;
  int degree = 0;

  /// Value in normalized input coordinates [0, u_bar]^m at a scaled point.
  Eigen::VectorXd eval_normalized_scaled(const Eigen::VectorXd& xhat) const;
  /// Value in normalized input coordinates at an original-coordinates point.
  Eigen::VectorXd eval_normalized(const Eigen::VectorXd& x) const;
  /// Value in original input coordinates.
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const;
};

/// Upper bound on sup_{X x U} l / beta certified by a low-degree SOS
/// program over the product set, inflated by 1% (floored at 1e-2). The
/// certificate degree escalates twice before giving up.
double auto_M(const OcpProblem& problem);

/// The degree-d SOS density program: Liouville identity, boundary and box
/// memberships, discounted-cost objective. `problem` must already be in
/// compilation (scaled) coordinates.
SosProgram build_density_program(const OcpProblem& problem, int d,
                                 Basis basis = Basis::ChebyshevTensor);

/// Decision-coefficient assignment for the always-feasible point
/// (rho, rho0, rhoT, sigma) = (0, rho0_bar, rho0_bar, 0); test hook for the
/// feasibility guarantee.
std::vector<Polynomial> trivial_density_point(const SosProgram& program);

DensitySolution synthesize(const OcpProblem& problem, int d, const SynthesisConfig& config = {});

RationalController extract_controller(const DensitySolution& sol, double u_bar,
                                      double epsilon = -1.0);

Eigen::VectorXd eval_controller(const RationalController& ctrl, const Eigen::VectorXd& x);

/// Controller JSON (versioned schema; polynomials in the module's text
/// format, monomial basis).
std::string controller_to_json(const RationalController& ctrl);
RationalController controller_from_json(const std::string& text);

}  // namespace densopt
