#include "densopt/value_bounds.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <stdexcept>

namespace densopt {

std::string to_string(BoundSide side) {
  switch (side) {
    case BoundSide::UpperOnVu: return "upper_on_Vu";
    case BoundSide::LowerOnVu: return "lower_on_Vu";
    case BoundSide::LowerOnV: return "lower_on_V";
  }
  return "unknown";
}

ClosedLoopData closed_loop_data(const OcpProblem& sp, const DensitySolution& sol) {
  if (static_cast<int>(sol.sigma.size()) != sp.m)
    throw std::invalid_argument("closed_loop_data: controller/problem input count mismatch");
  ClosedLoopData data;
  const Polynomial rho = sol.rho.convert_basis(Basis::Monomial);
  data.rho = rho;
  std::vector<Polynomial> comps;
  for (int k = 0; k < sp.n; ++k) {
    Polynomial c = rho * sp.f[k].convert_basis(Basis::Monomial);
    for (int i = 0; i < sp.m; ++i)
      c += sp.f_u[i][k].convert_basis(Basis::Monomial) * sol.sigma[i].convert_basis(Basis::Monomial);
    comps.push_back(c);
  }
  data.f_hat = PolyVector(std::move(comps));
  data.l_hat = rho * sp.l_x.convert_basis(Basis::Monomial);
  for (int i = 0; i < sp.m; ++i)
    data.l_hat += sp.l_u[i].convert_basis(Basis::Monomial) * sol.sigma[i].convert_basis(Basis::Monomial);
  return data;
}

namespace {

// sign_V = +1: V - M in Q(X) + barg R; sign_V = -1: M - V.
void add_boundary_membership(SosProgram& prog, const OcpProblem& sp, int V, double sign_V, int d) {
  const Polynomial barg = sp.X.bar_g();
  const int D = std::max(d, barg.degree());
  SosProgram::Membership mem{PolyExpr(sp.n), QuadraticModuleSpec::quadratic_module(sp.X, D, &prog.warnings),
                             sign_V > 0 ? "V-M" : "M-V"};
  prog.add_transformed(mem.expr, V, [&](const Polynomial& phi) { return sign_V * phi; });
  mem.expr.add_constant(Polynomial::constant(sp.n, -sign_V * sp.M));
  mem.spec.add_free(barg, D, &prog.warnings);
  mem.spec.dedupe();
  prog.memberships.push_back(std::move(mem));
}

int even_up(int d) { return d + (d % 2); }

}  // namespace

BoundProgram build_bound_program(const OcpProblem& problem, const DensitySolution* sol, int d,
                                 const BoundConfig& config, BoundSide side) {
  if (side != BoundSide::LowerOnV && sol == nullptr)
    throw std::invalid_argument("build_bound_program: Vu sides need a density solution");

  StateScaling scaling;
  OcpProblem scaled;
  if (side == BoundSide::LowerOnV) {
    problem.validate();
    OcpProblem resolved = problem;
    if (!(resolved.M > 0.0)) resolved.M = auto_M(problem);
    scaling = auto_scaling(problem.X);
    scaled = scale_problem(resolved, scaling);
  } else {
    scaling = sol->scaling;
    scaled = sol->scaled_problem;
  }
  const OcpProblem& sp = scaled;

  SosProgram prog(sp.n, config.basis);
  const int V = prog.declare_poly("V", d);
  const double sign = (side == BoundSide::UpperOnVu) ? 1.0 : -1.0;  // maximization flips sign
  prog.add_integral_objective(V, Polynomial::constant(sp.n, 1.0), sp.X.domain(), sign);

  if (side == BoundSide::LowerOnV) {
    std::vector<int> pmul(sp.m);
    for (int i = 0; i < sp.m; ++i) pmul[i] = prog.declare_poly("p" + std::to_string(i + 1), d);
    // l_x - beta V + grad(V).f + ubar sum_i p_i in Q(X).
    {
      SosProgram::Membership mem{PolyExpr(sp.n), QuadraticModuleSpec{}, "hjb_drift"};
      mem.expr.add_constant(sp.l_x);
      prog.add_transformed(mem.expr, V, [&](const Polynomial& phi) {
        return -sp.beta * phi + gradient_dot(phi, sp.f);
      });
      for (int i = 0; i < sp.m; ++i)
        prog.add_transformed(mem.expr, pmul[i], [&](const Polynomial& phi) { return sp.U.u_bar * phi; });
      mem.spec = QuadraticModuleSpec::quadratic_module(sp.X, even_up(mem.expr.degree()), &prog.warnings);
      prog.memberships.push_back(std::move(mem));
    }
    // l_{u_i} + grad(V).f_{u_i} - p_i in Q(X).
    for (int i = 0; i < sp.m; ++i) {
      SosProgram::Membership mem{PolyExpr(sp.n), QuadraticModuleSpec{},
                                 "hjb_input" + std::to_string(i + 1)};
      mem.expr.add_constant(sp.l_u[i]);
      prog.add_transformed(mem.expr, V,
                           [&](const Polynomial& phi) { return gradient_dot(phi, sp.f_u[i]); });
      prog.add_transformed(mem.expr, pmul[i], [](const Polynomial& phi) { return -phi; });
      mem.spec = QuadraticModuleSpec::quadratic_module(sp.X, even_up(mem.expr.degree()), &prog.warnings);
      prog.memberships.push_back(std::move(mem));
    }
    // -p_i in Q_d(X).
    for (int i = 0; i < sp.m; ++i) {
      SosProgram::Membership mem{PolyExpr(sp.n),
                                 QuadraticModuleSpec::quadratic_module(sp.X, d, &prog.warnings),
                                 "p_sign" + std::to_string(i + 1)};
      prog.add_transformed(mem.expr, pmul[i], [](const Polynomial& phi) { return -phi; });
      prog.memberships.push_back(std::move(mem));
    }
    add_boundary_membership(prog, sp, V, -1.0, d);
  } else {
    const ClosedLoopData data = closed_loop_data(sp, *sol);
    const double gron_sign = (side == BoundSide::UpperOnVu) ? 1.0 : -1.0;
    // +/- (beta rho V - grad(V).fhat - lhat) in Q(X), at the expression's
    // own degree.
    SosProgram::Membership mem{PolyExpr(sp.n), QuadraticModuleSpec{},
                               side == BoundSide::UpperOnVu ? "gronwall_upper" : "gronwall_lower"};
    prog.add_transformed(mem.expr, V, [&](const Polynomial& phi) {
      return gron_sign * (sp.beta * (data.rho * phi) - gradient_dot(phi, data.f_hat));
    });
    mem.expr.add_constant(-gron_sign * data.l_hat);
    mem.spec = QuadraticModuleSpec::quadratic_module(sp.X, even_up(mem.expr.degree()), &prog.warnings);
    prog.memberships.push_back(std::move(mem));
    add_boundary_membership(prog, sp, V, gron_sign, d);
  }

  return BoundProgram{std::move(prog), std::move(scaled), scaling, side, d, V};
}

namespace {

ValueBound run_bound_program(BoundProgram bp, const BoundConfig& config) {
  ValueBound out;
  out.side = bp.side;
  out.degree = bp.degree;
  out.scaling = bp.scaling;

  const CompiledSdp compiled = compile(bp.program);
  const SdpSolution sol = solve(compiled.problem, config.solver);
  if (std::getenv("DENSOPT_SOLVER_DEBUG")) {
    std::fprintf(stderr, "bound %s d=%d: %s it=%d pres=%.2e dres=%.2e gap=%.2e pobj=%.6f\n",
                 to_string(bp.side).c_str(), bp.degree, to_string(sol.status).c_str(), sol.iterations,
                 sol.primal_residual, sol.dual_residual, sol.gap, sol.primal_objective);
    for (const auto& line : sol.trace) std::fprintf(stderr, "    %s\n", line.c_str());
  }
  out.status = sol.status;
  out.iterations = sol.iterations;
  out.warnings = bp.program.warnings;
  if (!sol.feasible_status()) return out;
  if (sol.status == SdpStatus::NearOptimal)
    out.warnings.push_back("bound solver returned near_optimal; certificate residuals are ~1e-6");

  const SosSolution sos = decompile(bp.program, compiled, sol);
  out.certificate_residual = sos.identity_residual;
  out.poly_scaled = sos.decision_values[bp.decision_poly_id];
  out.integral_over_X = integrate(out.poly_scaled, bp.scaled_problem.X.domain());
  // Back to original coordinates: V_orig(x) = V_scaled(Qinv (x - q)).
  const Eigen::MatrixXd Qinv = bp.scaling.Qinv;
  out.poly_original =
      out.poly_scaled.convert_basis(Basis::Monomial).affine_substitute(Qinv, -Qinv * bp.scaling.q);
  return out;
}

}  // namespace

ValueBound upper_bound_Vu(const OcpProblem& problem, const DensitySolution& sol, int d,
                          const BoundConfig& config) {
  return run_bound_program(build_bound_program(problem, &sol, d, config, BoundSide::UpperOnVu), config);
}

ValueBound lower_bound_Vu(const OcpProblem& problem, const DensitySolution& sol, int d,
                          const BoundConfig& config) {
  return run_bound_program(build_bound_program(problem, &sol, d, config, BoundSide::LowerOnVu), config);
}

ValueBound lower_bound_V(const OcpProblem& problem, int d, const BoundConfig& config) {
  return run_bound_program(build_bound_program(problem, nullptr, d, config, BoundSide::LowerOnV), config);
}

double gap_report(const ValueBound& upper, const ValueBound& lower) {
  if (!upper.solved() || !lower.solved())
    throw std::runtime_error("gap_report: both bounds must be solved");
  if (lower.integral_over_X == 0.0) throw std::runtime_error("gap_report: lower bound integrates to zero");
  return 100.0 * (upper.integral_over_X - lower.integral_over_X) / lower.integral_over_X;
}

std::string bound_to_json(const ValueBound& b) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["kind"] = "value_bound";
  j["side"] = to_string(b.side);
  j["degree"] = b.degree;
  j["status"] = to_string(b.status);
  j["integral_over_X"] = b.integral_over_X;
  j["certificate_residual"] = b.certificate_residual;
  j["polynomial_scaled"] = b.poly_scaled.convert_basis(Basis::Monomial).to_string();
  j["polynomial_original"] = b.poly_original.to_string();
  j["dim"] = b.poly_original.dim();
  nlohmann::json sm;
  const int n = b.poly_original.dim();
  std::vector<double> qm;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) qm.push_back(b.scaling.Q(r, c));
  sm["Q"] = qm;
  sm["q"] = std::vector<double>(b.scaling.q.data(), b.scaling.q.data() + n);
  j["state_map"] = sm;
  j["warnings"] = b.warnings;
  return j.dump(2);
}

ValueBound bound_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("schema_version", 0) != 1 || j.value("kind", "") != "value_bound")
    throw std::invalid_argument("bound_from_json: unrecognized schema");
  ValueBound b;
  const std::string side = j.at("side").get<std::string>();
  if (side == "upper_on_Vu")
    b.side = BoundSide::UpperOnVu;
  else if (side == "lower_on_Vu")
    b.side = BoundSide::LowerOnVu;
  else
    b.side = BoundSide::LowerOnV;
  b.degree = j.at("degree").get<int>();
  const int n = j.at("dim").get<int>();
  b.poly_scaled = Polynomial::parse(j.at("polynomial_scaled").get<std::string>(), n);
  b.poly_original = Polynomial::parse(j.at("polynomial_original").get<std::string>(), n);
  b.integral_over_X = j.at("integral_over_X").get<double>();
  b.certificate_residual = j.at("certificate_residual").get<double>();
  const std::string st = j.at("status").get<std::string>();
  b.status = st == "optimal" ? SdpStatus::Optimal
                             : (st == "near_optimal" ? SdpStatus::NearOptimal : SdpStatus::NumericalFailure);
  Eigen::MatrixXd Q(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) Q(r, c) = j.at("state_map").at("Q").at(r * n + c).get<double>();
  Eigen::VectorXd q(n);
  for (int r = 0; r < n; ++r) q(r) = j.at("state_map").at("q").at(r).get<double>();
  b.scaling = StateScaling::make(Q, q);
  return b;
}

std::string bound_surface_csv(const ValueBound& bound, const SemialgebraicSet& X, int grid) {
  if (grid < 2) throw std::invalid_argument("bound_surface_csv: grid must be >= 2");
  const int n = X.dim();
  Eigen::VectorXd lo(n), hi(n);
  const Domain& dom = X.domain();
  if (dom.kind == DomainKind::Box) {
    lo = dom.lo;
    hi = dom.hi;
  } else if (dom.kind == DomainKind::Ball) {
    lo = dom.center.array() - dom.radius;
    hi = dom.center.array() + dom.radius;
  } else if (dom.bounding_box) {
    lo = dom.bounding_box->first;
    hi = dom.bounding_box->second;
  } else {
    throw std::invalid_argument("bound_surface_csv: general domain without bounding box");
  }
  std::string csv;
  for (int i = 0; i < n; ++i) csv += "x" + std::to_string(i + 1) + ",";
  csv += "value\n";
  std::vector<int> counter(n, 0);
  Eigen::VectorXd x(n);
  long total = 1;
  for (int i = 0; i < n; ++i) total *= grid;
  char buf[40];
  for (long it = 0; it < total; ++it) {
    long rem = it;
    for (int i = 0; i < n; ++i) {
      counter[i] = static_cast<int>(rem % grid);
      rem /= grid;
      x(i) = lo(i) + (hi(i) - lo(i)) * counter[i] / (grid - 1);
    }
    if (!X.contains(x, SemialgebraicSet::kContainsTol)) continue;
    for (int i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof(buf), "%.12g,", x(i));
      csv += buf;
    }
    std::snprintf(buf, sizeof(buf), "%.12g\n", bound.evaluate_original(x));
    csv += buf;
  }
  return csv;
}

}  // namespace densopt
