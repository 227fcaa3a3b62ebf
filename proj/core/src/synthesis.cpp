#include "densopt/synthesis.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace densopt {

namespace {

Polynomial lift_to(const Polynomial& p, int total_dim) {
  Polynomial out(total_dim, p.basis());
  for (const auto& [idx, c] : p.terms()) {
    MultiIndex lifted = MultiIndex::zeros(total_dim);
    for (int i = 0; i < idx.dim(); ++i) lifted.exps[i] = idx.exps[i];
    out.add_term(lifted, c);
  }
  return out;
}

}  // namespace

double auto_M(const OcpProblem& problem) {
  const int n = problem.n, m = problem.m;
  const int nm = n + m;
  const double ubar = problem.U.u_bar;

  // Joint stage cost on the product space (x, u).
  Polynomial l = lift_to(problem.l_x.convert_basis(Basis::Monomial), nm);
  for (int i = 0; i < m; ++i) {
    Polynomial ui = Polynomial::variable(nm, n + i);
    l += lift_to(problem.l_u[i].convert_basis(Basis::Monomial), nm) * ui;
  }
  if (l.is_zero()) return 1e-2;

  // Generators of X x U plus a product-space ball bound.
  std::vector<Polynomial> gens;
  for (const auto& g : problem.X.generators()) gens.push_back(lift_to(g, nm));
  for (int i = 0; i < m; ++i) {
    Polynomial ui = Polynomial::variable(nm, n + i);
    Polynomial box = ui * (Polynomial::constant(nm, ubar) - ui);
    gens.push_back(box);
  }
  {
    Polynomial ball = Polynomial::constant(nm, problem.X.ball_bound() + m * ubar * ubar);
    for (int i = 0; i < nm; ++i) ball.add_term(MultiIndex::unit(nm, i, 2), -1.0);
    gens.push_back(ball);
  }
  Eigen::VectorXd lo(nm), hi(nm);
  const double xr = std::sqrt(problem.X.ball_bound());
  for (int i = 0; i < n; ++i) {
    lo(i) = -xr;
    hi(i) = xr;
  }
  for (int i = 0; i < m; ++i) {
    lo(n + i) = 0.0;
    hi(n + i) = ubar;
  }
  const SemialgebraicSet XU = SemialgebraicSet::general(gens, Domain::box(lo, hi));

  int D = std::max(2, 2 * ((l.degree() + 1) / 2));
  for (int attempt = 0; attempt < 3; ++attempt, D += 2) {
    SosProgram prog(nm, Basis::Monomial);
    const int t = prog.declare_poly("t", 0);
    prog.objective.coeffs[{t, 0}] = 1.0;
    SosProgram::Membership mem{PolyExpr(nm), QuadraticModuleSpec::quadratic_module(XU, D, &prog.warnings),
                               "t-l"};
    mem.expr.add_constant(-l);
    mem.expr.add_linear(t, 0, Polynomial::constant(nm, 1.0));
    prog.memberships.push_back(std::move(mem));
    const CompiledSdp compiled = compile(prog);
    SolverConfig cfg;
    const SdpSolution sol = solve(compiled.problem, cfg);
    if (std::getenv("DENSOPT_SOLVER_DEBUG"))
      std::fprintf(stderr, "auto_M attempt D=%d: %s obj=%.8f rows=%d\n", D,
                   to_string(sol.status).c_str(), sol.primal_objective, compiled.problem.num_rows());
    if (sol.feasible_status()) {
      const double sup_bound = sol.primal_objective;
      return std::max(1.01 * sup_bound / problem.beta, 1e-2);
    }
  }
  throw std::runtime_error("auto_M: no SOS upper bound certificate found after degree escalation");
}

SosProgram build_density_program(const OcpProblem& p, int d, Basis basis) {
  const int n = p.n, m = p.m;
  const int min_d = std::max({p.max_dynamics_degree() + 1, p.l_x.degree(), 2});
  if (d < min_d)
    throw std::invalid_argument("build_density_program: degree " + std::to_string(d) +
                                " too small for the problem data (need >= " + std::to_string(min_d) + ")");
  if (!(p.M > 0.0)) throw std::invalid_argument("build_density_program: exit penalty M must be resolved");

  SosProgram prog(n, basis);
  const int rho = prog.declare_poly("rho", d);
  const int rho0 = prog.declare_poly("rho0", d);
  const int rhoT = prog.declare_poly("rhoT", d);
  std::vector<int> sigma(m);
  for (int i = 0; i < m; ++i) sigma[i] = prog.declare_poly("sigma" + std::to_string(i + 1), d);

  const Domain& dom = p.X.domain();
  prog.add_integral_objective(rho, p.l_x, dom);
  for (int i = 0; i < m; ++i) prog.add_integral_objective(sigma[i], p.l_u[i], dom);
  prog.add_integral_objective(rhoT, Polynomial::constant(n, 1.0), dom, p.M);

  // Discounted Liouville identity.
  {
    SosProgram::Equality eq{PolyExpr(n), "liouville"};
    prog.add_transformed(eq.expr, rhoT, [](const Polynomial& phi) { return phi; });
    prog.add_transformed(eq.expr, rho0, [](const Polynomial& phi) { return -phi; });
    prog.add_transformed(eq.expr, rho, [&](const Polynomial& phi) {
      return p.beta * phi + divergence_of_product(phi, p.f);
    });
    for (int i = 0; i < m; ++i)
      prog.add_transformed(eq.expr, sigma[i],
                           [&](const Polynomial& phi) { return divergence_of_product(phi, p.f_u[i]); });
    prog.equalities.push_back(std::move(eq));
  }

  const Polynomial barg = p.X.bar_g();

  // -rho in Q_d(X) + g_i R + barg R, one membership per generator, so the
  // sign of rho is certified on every face of the boundary.
  for (int gi = 0; gi < static_cast<int>(p.X.generators().size()); ++gi) {
    SosProgram::Membership mem{PolyExpr(n), QuadraticModuleSpec::quadratic_module(p.X, d, &prog.warnings),
                               "-rho_g" + std::to_string(gi + 1)};
    prog.add_transformed(mem.expr, rho, [](const Polynomial& phi) { return -phi; });
    mem.spec.add_free(p.X.generators()[gi], d, &prog.warnings);
    mem.spec.add_free(barg, d, &prog.warnings);
    mem.spec.dedupe();
    prog.memberships.push_back(std::move(mem));
  }
  // rho0 - rho0_bar in Q_d(X).
  {
    SosProgram::Membership mem{PolyExpr(n), QuadraticModuleSpec::quadratic_module(p.X, d, &prog.warnings),
                               "rho0"};
    prog.add_transformed(mem.expr, rho0, [](const Polynomial& phi) { return phi; });
    mem.expr.add_constant(-p.rho0_bar);
    prog.memberships.push_back(std::move(mem));
  }
  // ubar rho - sigma_i in Q_d(X) + barg Q_{d - deg barg}(X).
  for (int i = 0; i < m; ++i) {
    SosProgram::Membership mem{PolyExpr(n), QuadraticModuleSpec::quadratic_module(p.X, d, &prog.warnings),
                               "ubar*rho-sigma" + std::to_string(i + 1)};
    prog.add_transformed(mem.expr, rho, [&](const Polynomial& phi) { return p.U.u_bar * phi; });
    prog.add_transformed(mem.expr, sigma[i], [](const Polynomial& phi) { return -phi; });
    mem.spec.add_scaled_module(barg, p.X, d - barg.degree(), &prog.warnings);
    mem.spec.dedupe();
    prog.memberships.push_back(std::move(mem));
  }
  // rhoT in Q_d(X).
  {
    SosProgram::Membership mem{PolyExpr(n), QuadraticModuleSpec::quadratic_module(p.X, d, &prog.warnings),
                               "rhoT"};
    prog.add_transformed(mem.expr, rhoT, [](const Polynomial& phi) { return phi; });
    prog.memberships.push_back(std::move(mem));
  }
  // sigma_i in Q_d(X) + barg Q_{d - deg barg}(X).
  for (int i = 0; i < m; ++i) {
    SosProgram::Membership mem{PolyExpr(n), QuadraticModuleSpec::quadratic_module(p.X, d, &prog.warnings),
                               "sigma" + std::to_string(i + 1)};
    prog.add_transformed(mem.expr, sigma[i], [](const Polynomial& phi) { return phi; });
    mem.spec.add_scaled_module(barg, p.X, d - barg.degree(), &prog.warnings);
    mem.spec.dedupe();
    prog.memberships.push_back(std::move(mem));
  }
  return prog;
}

std::vector<Polynomial> trivial_density_point(const SosProgram& program) {
  std::vector<Polynomial> vals;
  for (const auto& dp : program.decision_polys) {
    if (dp.name == "rho0" || dp.name == "rhoT")
      vals.push_back(Polynomial::constant(program.dim, 1.0, program.param_basis));
    else
      vals.push_back(Polynomial::zero(program.dim, program.param_basis));
  }
  return vals;
}

DensitySolution synthesize(const OcpProblem& problem, int d, const SynthesisConfig& config) {
  problem.validate();
  DensitySolution out;
  out.degree = d;

  OcpProblem resolved = problem;
  if (!(resolved.M > 0.0)) resolved.M = auto_M(problem);

  out.scaling = config.auto_scale ? auto_scaling(problem.X) : StateScaling::identity(problem.n);
  out.scaled_problem = scale_problem(resolved, out.scaling);

  SosProgram prog = build_density_program(out.scaled_problem, d, config.basis);
  const CompiledSdp compiled = compile(prog);
  const SdpSolution sol = solve(compiled.problem, config.solver);
  out.status = sol.status;
  out.solver_gap = sol.gap;
  out.iterations = sol.iterations;
  out.warnings = prog.warnings;
  if (sol.status == SdpStatus::NearOptimal)
    out.warnings.push_back("solver returned near_optimal; results carry ~1e-6 certificates");
  if (!sol.feasible_status()) return out;  // infeasible density SDP signals a compiler defect; caller decides

  const SosSolution sos = decompile(prog, compiled, sol);
  out.identity_residual = sos.identity_residual;
  out.objective = sos.objective;
  out.rho = sos.decision_values[0];
  out.rho0 = sos.decision_values[1];
  out.rhoT = sos.decision_values[2];
  for (int i = 0; i < problem.m; ++i) out.sigma.push_back(sos.decision_values[3 + i]);

  // Liouville residual, scaled by the identity's own data norm.
  {
    const OcpProblem& sp = out.scaled_problem;
    Polynomial res = out.rhoT.convert_basis(Basis::Monomial);
    res -= out.rho0.convert_basis(Basis::Monomial);
    const Polynomial rho_mono = out.rho.convert_basis(Basis::Monomial);
    res += sp.beta * rho_mono;
    res += divergence_of_product(rho_mono, sp.f);
    double scale = 1.0;
    scale = std::max({scale, out.rhoT.max_abs_coefficient(), out.rho0.max_abs_coefficient(),
                      rho_mono.max_abs_coefficient()});
    for (int i = 0; i < problem.m; ++i) {
      const Polynomial s = out.sigma[i].convert_basis(Basis::Monomial);
      res += divergence_of_product(s, sp.f_u[i]);
      scale = std::max(scale, s.max_abs_coefficient());
    }
    out.liouville_residual = res.max_abs_coefficient() / (1.0 + scale);
  }
  return out;
}

RationalController extract_controller(const DensitySolution& sol, double u_bar, double epsilon) {
  if (!(sol.status == SdpStatus::Optimal || sol.status == SdpStatus::NearOptimal))
    throw std::runtime_error("extract_controller: density solution not solved");
  RationalController ctrl;
  ctrl.numerators = sol.sigma;
  ctrl.denominator = sol.rho;
  ctrl.u_bar = u_bar;
  ctrl.degree = sol.degree;
  ctrl.scaling = sol.scaling;
  ctrl.input_map = sol.scaled_problem.U;
  if (epsilon > 0.0) {
    ctrl.epsilon = epsilon;
  } else {
    // sup |rho| on X is bounded by the Chebyshev coefficient l1 norm on the
    // scaled unit domain.
    const double rho_sup = sol.rho.convert_basis(Basis::ChebyshevTensor).coefficient_l1();
    ctrl.epsilon = 1e-8 * (1.0 + rho_sup);
  }
  return ctrl;
}

Eigen::VectorXd RationalController::eval_normalized_scaled(const Eigen::VectorXd& xhat) const {
  const double den = std::max(denominator.evaluate(xhat), epsilon);
  Eigen::VectorXd u(numerators.size());
  for (size_t i = 0; i < numerators.size(); ++i) {
    const double raw = numerators[i].evaluate(xhat) / den;
    u(i) = std::clamp(raw, 0.0, u_bar);
  }
  return u;
}

Eigen::VectorXd RationalController::eval_normalized(const Eigen::VectorXd& x) const {
  return eval_normalized_scaled(scaling.to_scaled(x));
}

Eigen::VectorXd RationalController::eval(const Eigen::VectorXd& x) const {
  return input_map.to_original(eval_normalized(x));
}

Eigen::VectorXd eval_controller(const RationalController& ctrl, const Eigen::VectorXd& x) {
  return ctrl.eval_normalized(x);
}

std::string controller_to_json(const RationalController& ctrl) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["kind"] = "rational_controller";
  j["degree"] = ctrl.degree;
  j["u_bar"] = ctrl.u_bar;
  j["epsilon"] = ctrl.epsilon;
  j["dim"] = ctrl.denominator.dim();
  nlohmann::json nums = nlohmann::json::array();
  for (const auto& s : ctrl.numerators) nums.push_back(s.convert_basis(Basis::Monomial).to_string());
  j["numerators"] = nums;
  j["denominator"] = ctrl.denominator.convert_basis(Basis::Monomial).to_string();
  nlohmann::json sm;
  const int n = ctrl.denominator.dim();
  std::vector<double> qm;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) qm.push_back(ctrl.scaling.Q(r, c));
  sm["Q"] = qm;
  std::vector<double> qv(ctrl.scaling.q.data(), ctrl.scaling.q.data() + n);
  sm["q"] = qv;
  j["state_map"] = sm;
  nlohmann::json im;
  im["u_bar"] = ctrl.input_map.u_bar;
  im["lo"] = ctrl.input_map.lo;
  im["scale"] = ctrl.input_map.scale;
  nlohmann::json orig = nlohmann::json::array();
  for (const auto& [lo, hi] : ctrl.input_map.original) orig.push_back({lo, hi});
  im["original_box"] = orig;
  j["input_map"] = im;
  return j.dump(2);
}

RationalController controller_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("schema_version", 0) != 1 || j.value("kind", "") != "rational_controller")
    throw std::invalid_argument("controller_from_json: unrecognized schema");
  RationalController ctrl;
  const int n = j.at("dim").get<int>();
  ctrl.degree = j.at("degree").get<int>();
  ctrl.u_bar = j.at("u_bar").get<double>();
  ctrl.epsilon = j.at("epsilon").get<double>();
  for (const auto& s : j.at("numerators"))
    ctrl.numerators.push_back(Polynomial::parse(s.get<std::string>(), n));
  ctrl.denominator = Polynomial::parse(j.at("denominator").get<std::string>(), n);
  Eigen::MatrixXd Q(n, n);
  const auto& qm = j.at("state_map").at("Q");
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) Q(r, c) = qm.at(r * n + c).get<double>();
  Eigen::VectorXd q(n);
  for (int r = 0; r < n; ++r) q(r) = j.at("state_map").at("q").at(r).get<double>();
  ctrl.scaling = StateScaling::make(Q, q);
  const auto& im = j.at("input_map");
  ctrl.input_map.u_bar = im.at("u_bar").get<double>();
  ctrl.input_map.lo = im.at("lo").get<std::vector<double>>();
  ctrl.input_map.scale = im.at("scale").get<std::vector<double>>();
  for (const auto& pair : im.at("original_box"))
    ctrl.input_map.original.push_back({pair.at(0).get<double>(), pair.at(1).get<double>()});
  ctrl.input_map.m = static_cast<int>(ctrl.input_map.lo.size());
  return ctrl;
}

}  // namespace densopt
