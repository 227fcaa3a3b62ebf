#pragma once

#include "densopt/synthesis.hpp"

#include <string>

namespace densopt {

/// Closed-loop polynomial data for a rational controller u = sigma / rho:
/// fhat = rho f + sum_i f_{u_i} sigma_i and lhat = rho l_x + sum_i l_{u_i}
/// sigma_i, so that fhat / rho is the closed-loop field wherever rho > 0.
struct ClosedLoopData {
  PolyVector f_hat;
  Polynomial l_hat;
  Polynomial rho;
};

ClosedLoopData closed_loop_data(const OcpProblem& scaled_problem, const DensitySolution& sol);

enum class BoundSide { UpperOnVu, LowerOnVu, LowerOnV };

std::string to_string(BoundSide side);

struct ValueBound {
  BoundSide side = BoundSide::UpperOnVu;
  int degree = 0;
  Polynomial poly_scaled;    // compilation coordinates
  Polynomial poly_original;  // original coordinates via affine substitution
  double integral_over_X = 0.0;  // scaled coordinates, exact moments
  double certificate_residual = 0.0;
  SdpStatus status = SdpStatus::NumericalFailure;
  int iterations = 0;
  StateScaling scaling;
  std::vector<std::string> warnings;

  double evaluate_original(const Eigen::VectorXd& x) const { return poly_original.evaluate(x); }
  bool solved() const { return status == SdpStatus::Optimal || status == SdpStatus::NearOptimal; }
};

struct BoundConfig {
  Basis basis = Basis::ChebyshevTensor;
  SolverConfig solver;
};

/// Assembled SOS program for one bound side, before compilation. The
/// density solution is consulted for the Vu sides only; lower_on_V scales
/// the problem itself. Exposed for SDPA export and structure tests.
struct BoundProgram {
  SosProgram program;
  OcpProblem scaled_problem;
  StateScaling scaling;
  BoundSide side;
  int degree;
  int decision_poly_id;  // the bound polynomial V
};

BoundProgram build_bound_program(const OcpProblem& problem, const DensitySolution* sol, int d,
                                 const BoundConfig& config, BoundSide side);

/// Program (upper Gronwall): minimize the integral of Vbar subject to
///   beta rho Vbar - grad(Vbar).fhat - lhat in Q(X),
///   Vbar - M in Q(X) + barg R.
ValueBound upper_bound_Vu(const OcpProblem& problem, const DensitySolution& sol, int d,
                          const BoundConfig& config = {});

/// Mirror program maximizing the integral of Vlow with the Gronwall
/// inequality reversed.
ValueBound lower_bound_Vu(const OcpProblem& problem, const DensitySolution& sol, int d,
                          const BoundConfig& config = {});

/// Controller-independent lower bound on the optimal value function, with
/// box-dualization multipliers p_i.
ValueBound lower_bound_V(const OcpProblem& problem, int d, const BoundConfig& config = {});

/// 100 * integral(Vbar - Vlow) / integral(Vlow); both bounds must share the
/// scaled domain.
double gap_report(const ValueBound& upper, const ValueBound& lower);

std::string bound_to_json(const ValueBound& bound);
ValueBound bound_from_json(const std::string& text);

/// CSV surface sample `x1,..,xn,value` over a per-axis grid of the scaled
/// domain's bounding box, restricted to X, in original coordinates.
std::string bound_surface_csv(const ValueBound& bound, const SemialgebraicSet& X, int grid);

}  // namespace densopt
