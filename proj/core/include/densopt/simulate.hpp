#pragma once

#include "densopt/synthesis.hpp"
#include "densopt/value_bounds.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace densopt {

/// Closed-loop trajectory in original coordinates. `inputs` holds the
/// applied control (original input coordinates) at each sample time.
struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> inputs;
  double exit_time = kNoExit;  // +inf sentinel when no exit before t_max
  bool exited = false;
  bool blew_up = false;  // non-finite state encountered

  static constexpr double kNoExit = std::numeric_limits<double>::infinity();
};

struct SimConfig {
  double step = 1e-3;
  /// Horizon cap; <= 0 derives it from exp(-beta T) M <= 1e-6.
  double t_max = 0.0;
  double exit_tol = 1e-9;
  std::uint64_t seed = 0;

  double resolve_t_max(double beta, double M) const;
};

struct CostReport {
  std::vector<double> costs;
  double mean_cost = 0.0;
  double mean_bound = 0.0;
  double suboptimality_percent = 0.0;
  int sample_count = 0;
  std::uint64_t seed = 0;
  double truncation_bound = 0.0;  // exp(-beta t_max) M, per non-exiting sample
};

/// Fixed-step RK4 with the controller evaluated at every stage point;
/// stops at the first step leaving X and bisects the last step so the exit
/// time is located within step * 1e-3.
Trajectory integrate_closed_loop(const OcpProblem& problem, const RationalController& ctrl,
                                 const Eigen::VectorXd& x0, const SimConfig& config);

/// Discounted running cost along the trajectory (composite Simpson) plus
/// exp(-beta tau) M on exit. Uses normalized inputs for the stage cost, so
/// it matches OCP data regardless of the input box.
double discounted_cost(const Trajectory& traj, const OcpProblem& problem);

/// N uniform initial conditions, simulated with per-sample deterministic
/// substreams; reports mean cost against the mean of the lower bound.
CostReport monte_carlo_suboptimality(const OcpProblem& problem, const RationalController& ctrl,
                                     const ValueBound& lower_bound, int samples, std::uint64_t seed,
                                     const SimConfig& config = {});

std::string trajectory_to_csv(const Trajectory& traj);
std::string cost_report_to_json(const CostReport& report, const SimConfig& config);

}  // namespace densopt
