#include "densopt/simulate.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <thread>

namespace densopt {

namespace {

// Flat-array polynomial evaluator; Polynomial::evaluate allocates per call,
// which the RK4 inner loop cannot afford.
struct FlatPoly {
  int dim = 0;
  Basis basis = Basis::Monomial;
  int max_order = 0;
  std::vector<int> exps;      // term-major, dim entries per term
  std::vector<double> coefs;

  FlatPoly() = default;
  explicit FlatPoly(const Polynomial& p) : dim(p.dim()), basis(p.basis()) {
    for (const auto& [idx, c] : p.terms()) {
      for (int i = 0; i < dim; ++i) {
        exps.push_back(idx.exps[i]);
        max_order = std::max(max_order, idx.exps[i]);
      }
      coefs.push_back(c);
    }
  }

  // table: dim x (max_order + 1) workspace of univariate values at x.
  void fill_table(const double* x, double* table) const {
    const int w = max_order + 1;
    for (int i = 0; i < dim; ++i) {
      double* t = table + i * w;
      t[0] = 1.0;
      if (max_order >= 1) t[1] = x[i];
      for (int k = 2; k <= max_order; ++k)
        t[k] = (basis == Basis::Monomial) ? t[k - 1] * x[i] : 2.0 * x[i] * t[k - 1] - t[k - 2];
    }
  }

  double eval(const double* table) const {
    const int w = max_order + 1;
    double sum = 0.0;
    const int* e = exps.data();
    for (size_t t = 0; t < coefs.size(); ++t, e += dim) {
      double v = coefs[t];
      for (int i = 0; i < dim; ++i) v *= table[i * w + e[i]];
      sum += v;
    }
    return sum;
  }
};

// Everything needed to evaluate the closed loop without allocation.
struct LoopEvaluator {
  int n = 0, m = 0;
  std::vector<FlatPoly> drift;               // f components, original coords
  std::vector<std::vector<FlatPoly>> gain;   // f_u[i] components
  std::vector<FlatPoly> numerators;          // scaled coords
  FlatPoly denominator;
  double u_bar = 0.0, epsilon = 0.0;
  Eigen::MatrixXd Qinv;
  Eigen::VectorXd qoff;
  std::vector<double> lo, scale;             // input map
  int table_w_dyn = 0, table_w_ctrl = 0;
  mutable std::vector<double> tab_dyn, tab_ctrl;
  mutable Eigen::VectorXd xhat;

  LoopEvaluator(const OcpProblem& prob, const RationalController& ctrl)
      : n(prob.n), m(prob.m), Qinv(ctrl.scaling.Qinv), qoff(ctrl.scaling.q) {
    for (int k = 0; k < n; ++k) drift.emplace_back(prob.f[k].convert_basis(Basis::Monomial));
    for (int i = 0; i < m; ++i) {
      std::vector<FlatPoly> col;
      for (int k = 0; k < n; ++k) col.emplace_back(prob.f_u[i][k].convert_basis(Basis::Monomial));
      gain.push_back(std::move(col));
    }
    for (const auto& s : ctrl.numerators) numerators.emplace_back(s);
    denominator = FlatPoly(ctrl.denominator);
    u_bar = ctrl.u_bar;
    epsilon = ctrl.epsilon;
    lo = ctrl.input_map.lo;
    scale = ctrl.input_map.scale;
    int mo = 0;
    for (const auto& p : drift) mo = std::max(mo, p.max_order);
    for (const auto& col : gain)
      for (const auto& p : col) mo = std::max(mo, p.max_order);
    table_w_dyn = mo + 1;
    mo = denominator.max_order;
    for (const auto& p : numerators) mo = std::max(mo, p.max_order);
    table_w_ctrl = mo + 1;
    tab_dyn.resize(static_cast<size_t>(n) * table_w_dyn);
    tab_ctrl.resize(static_cast<size_t>(n) * table_w_ctrl);
    xhat.resize(n);
  }

  // Normalized input at x (original coordinates).
  void control(const Eigen::VectorXd& x, Eigen::VectorXd& u) const {
    xhat.noalias() = Qinv * (x - qoff);
    // denominators/numerators share the table; rebuild with controller width
    for (int i = 0; i < n; ++i) {
      double* t = tab_ctrl.data() + static_cast<size_t>(i) * table_w_ctrl;
      t[0] = 1.0;
      if (table_w_ctrl > 1) t[1] = xhat(i);
      for (int k = 2; k < table_w_ctrl; ++k)
        t[k] = (denominator.basis == Basis::Monomial) ? t[k - 1] * xhat(i)
                                                      : 2.0 * xhat(i) * t[k - 1] - t[k - 2];
    }
    const double den = std::max(denominator.eval(tab_ctrl.data()), epsilon);
    for (int i = 0; i < m; ++i) {
      const double raw = numerators[i].eval(tab_ctrl.data()) / den;
      u(i) = std::clamp(raw, 0.0, u_bar);
    }
  }

  // dx = f(x) + sum u_i f_{u_i}(x), u normalized.
  void field(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd& dx) const {
    for (int i = 0; i < n; ++i) {
      double* t = tab_dyn.data() + static_cast<size_t>(i) * table_w_dyn;
      t[0] = 1.0;
      if (table_w_dyn > 1) t[1] = x(i);
      for (int k = 2; k < table_w_dyn; ++k) t[k] = t[k - 1] * x(i);
    }
    for (int k = 0; k < n; ++k) {
      double v = drift[k].eval(tab_dyn.data());
      for (int i = 0; i < m; ++i) v += u(i) * gain[i][k].eval(tab_dyn.data());
      dx(k) = v;
    }
  }
};

}  // namespace

double SimConfig::resolve_t_max(double beta, double M) const {
  if (t_max > 0.0) return t_max;
  return std::log(std::max(M, 1e-6) / 1e-6) / beta;
}

Trajectory integrate_closed_loop(const OcpProblem& problem, const RationalController& ctrl,
                                 const Eigen::VectorXd& x0, const SimConfig& config) {
  if (!problem.X.contains(x0, SemialgebraicSet::kContainsTol))
    throw std::invalid_argument("integrate_closed_loop: initial state outside X");
  const LoopEvaluator loop(problem, ctrl);
  const double h = config.step;
  const double t_end = config.resolve_t_max(problem.beta, problem.M);

  Trajectory traj;
  Eigen::VectorXd x = x0, u(problem.m);
  Eigen::VectorXd k1(problem.n), k2(problem.n), k3(problem.n), k4(problem.n);
  Eigen::VectorXd xs(problem.n), u_stage(problem.m);

  auto rk4_step = [&](const Eigen::VectorXd& from, double step, Eigen::VectorXd& to) {
    loop.control(from, u_stage);
    loop.field(from, u_stage, k1);
    xs = from + 0.5 * step * k1;
    loop.control(xs, u_stage);
    loop.field(xs, u_stage, k2);
    xs = from + 0.5 * step * k2;
    loop.control(xs, u_stage);
    loop.field(xs, u_stage, k3);
    xs = from + step * k3;
    loop.control(xs, u_stage);
    loop.field(xs, u_stage, k4);
    to = from + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };

  loop.control(x, u);
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  traj.inputs.push_back(ctrl.input_map.to_original(u));

  double t = 0.0;
  while (t < t_end - 0.5 * h) {
    Eigen::VectorXd xn(problem.n);
    rk4_step(x, h, xn);
    if (!xn.allFinite()) {
      traj.blew_up = true;
      break;
    }
    if (!problem.X.contains(xn, config.exit_tol)) {
      // Bisect the step until the exit time is located within h * 1e-3.
      double lo_a = 0.0, hi_a = 1.0;
      Eigen::VectorXd xm(problem.n);
      while ((hi_a - lo_a) > 1e-3) {
        const double mid = 0.5 * (lo_a + hi_a);
        rk4_step(x, mid * h, xm);
        if (problem.X.contains(xm, config.exit_tol))
          lo_a = mid;
        else
          hi_a = mid;
      }
      rk4_step(x, hi_a * h, xm);
      traj.exit_time = t + hi_a * h;
      traj.exited = true;
      loop.control(xm, u);
      traj.times.push_back(traj.exit_time);
      traj.states.push_back(xm);
      traj.inputs.push_back(ctrl.input_map.to_original(u));
      return traj;
    }
    x = xn;
    t += h;
    loop.control(x, u);
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.inputs.push_back(ctrl.input_map.to_original(u));
  }
  return traj;
}

double discounted_cost(const Trajectory& traj, const OcpProblem& problem) {
  if (traj.states.empty()) return 0.0;
  const size_t n = traj.times.size();
  std::vector<double> integrand(n);
  for (size_t k = 0; k < n; ++k) {
    const Eigen::VectorXd u_norm = problem.U.to_normalized(traj.inputs[k]);
    integrand[k] = std::exp(-problem.beta * traj.times[k]) * problem.stage_cost(traj.states[k], u_norm);
  }
  // Composite Simpson over the uniform part, trapezoid on leftovers.
  double cost = 0.0;
  size_t k = 0;
  while (k + 2 < n) {
    const double h1 = traj.times[k + 1] - traj.times[k];
    const double h2 = traj.times[k + 2] - traj.times[k + 1];
    if (std::abs(h1 - h2) < 1e-12 * std::max(1.0, h1)) {
      cost += (h1 / 3.0) * (integrand[k] + 4.0 * integrand[k + 1] + integrand[k + 2]);
      k += 2;
    } else {
      cost += 0.5 * h1 * (integrand[k] + integrand[k + 1]);
      k += 1;
    }
  }
  while (k + 1 < n) {
    cost += 0.5 * (traj.times[k + 1] - traj.times[k]) * (integrand[k] + integrand[k + 1]);
    k += 1;
  }
  if (traj.exited) cost += std::exp(-problem.beta * traj.exit_time) * problem.M;
  return cost;
}

CostReport monte_carlo_suboptimality(const OcpProblem& problem, const RationalController& ctrl,
                                     const ValueBound& lower_bound, int samples, std::uint64_t seed,
                                     const SimConfig& config) {
  if (samples < 1) throw std::invalid_argument("monte_carlo_suboptimality: need at least one sample");
  CostReport report;
  report.sample_count = samples;
  report.seed = seed;
  report.costs.resize(samples);
  std::vector<double> bounds(samples);

  // Initial conditions come from one deterministic stream; trajectories are
  // embarrassingly parallel and every sample owns its slot, so threading
  // does not affect the result.
  const auto starts = problem.X.sample_uniform(samples, seed);
  SimConfig cfg = config;
  cfg.seed = seed;

  int threads = 1;
  if (const char* env = std::getenv("DENSOPT_THREADS")) threads = std::max(1, std::atoi(env));
  threads = std::min<int>(threads, std::max(1u, std::thread::hardware_concurrency()));

  auto worker = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      const Trajectory traj = integrate_closed_loop(problem, ctrl, starts[i], cfg);
      report.costs[i] = discounted_cost(traj, problem);
      bounds[i] = lower_bound.evaluate_original(starts[i]);
    }
  };
  if (threads <= 1 || samples < 4) {
    worker(0, samples);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (samples + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int b = t * chunk, e = std::min(samples, (t + 1) * chunk);
      if (b < e) pool.emplace_back(worker, b, e);
    }
    for (auto& th : pool) th.join();
  }

  double sum_c = 0.0, sum_b = 0.0;
  for (int i = 0; i < samples; ++i) {
    sum_c += report.costs[i];
    sum_b += bounds[i];
  }
  report.mean_cost = sum_c / samples;
  report.mean_bound = sum_b / samples;
  report.suboptimality_percent =
      100.0 * (report.mean_cost - report.mean_bound) / report.mean_bound;
  report.truncation_bound =
      std::exp(-problem.beta * config.resolve_t_max(problem.beta, problem.M)) * problem.M;
  return report;
}

std::string trajectory_to_csv(const Trajectory& traj) {
  std::string csv = "t";
  const int n = traj.states.empty() ? 0 : static_cast<int>(traj.states[0].size());
  const int m = traj.inputs.empty() ? 0 : static_cast<int>(traj.inputs[0].size());
  for (int i = 1; i <= n; ++i) csv += ",x" + std::to_string(i);
  for (int i = 1; i <= m; ++i) csv += ",u" + std::to_string(i);
  csv += "\n";
  char buf[40];
  for (size_t k = 0; k < traj.times.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.12g", traj.times[k]);
    csv += buf;
    for (int i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof(buf), ",%.12g", traj.states[k](i));
      csv += buf;
    }
    for (int i = 0; i < m; ++i) {
      std::snprintf(buf, sizeof(buf), ",%.12g", traj.inputs[k](i));
      csv += buf;
    }
    csv += "\n";
  }
  return csv;
}

std::string cost_report_to_json(const CostReport& report, const SimConfig& config) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["kind"] = "cost_report";
  j["sample_count"] = report.sample_count;
  j["seed"] = report.seed;
  j["mean_cost"] = report.mean_cost;
  j["mean_lower_bound"] = report.mean_bound;
  j["suboptimality_percent"] = report.suboptimality_percent;
  j["truncation_bound"] = report.truncation_bound;
  j["costs"] = report.costs;
  nlohmann::json cfg;
  cfg["step"] = config.step;
  cfg["t_max"] = config.t_max;
  cfg["exit_tol"] = config.exit_tol;
  j["sim_config"] = cfg;
  return j.dump(2);
}

}  // namespace densopt
