#include "densopt/ocp.hpp"

#include <stdexcept>

namespace densopt {

StateScaling StateScaling::make(const Eigen::MatrixXd& Q, const Eigen::VectorXd& q) {
  StateScaling s;
  s.Q = Q;
  s.q = q;
  s.Qinv = Q.inverse();
  return s;
}

StateScaling StateScaling::identity(int n) {
  return make(Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n));
}

bool StateScaling::is_identity() const {
  return Q.isIdentity(0.0) && q.isZero(0.0);
}

OcpProblem OcpProblem::make(PolyVector f, std::vector<PolyVector> f_u, SemialgebraicSet X,
                            std::vector<std::array<double, 2>> input_box, Polynomial l_x,
                            std::vector<Polynomial> l_u, double beta, double M,
                            Polynomial rho0_bar) {
  OcpProblem p;
  p.n = X.dim();
  p.m = static_cast<int>(f_u.size());
  p.U = normalize_inputs(input_box);
  const InputRewrite rw = apply_input_rewrite(p.U, f, f_u, l_x, l_u);
  p.f = rw.drift;
  p.f_u = rw.inputs;
  p.l_x = rw.state_cost;
  p.l_u = rw.input_costs;
  p.X = std::move(X);
  p.beta = beta;
  p.M = M;
  p.rho0_bar = rho0_bar.dim() == p.n && !rho0_bar.is_zero() ? rho0_bar : Polynomial::constant(p.n, 1.0);
  p.validate();
  return p;
}

void OcpProblem::validate() const {
  if (n <= 0 || f.size() != n) throw std::invalid_argument("OcpProblem: drift dimension mismatch");
  if (static_cast<int>(f_u.size()) != m || static_cast<int>(l_u.size()) != m)
    throw std::invalid_argument("OcpProblem: input field / cost count mismatch");
  for (const auto& col : f_u)
    if (col.size() != n) throw std::invalid_argument("OcpProblem: input field dimension mismatch");
  if (l_x.dim() != n) throw std::invalid_argument("OcpProblem: state cost dimension mismatch");
  if (!(beta > 0.0)) throw std::invalid_argument("OcpProblem: discount factor must be positive");
  if (rho0_bar.dim() != n) throw std::invalid_argument("OcpProblem: rho0_bar dimension mismatch");
}

Eigen::VectorXd OcpProblem::dynamics(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  Eigen::VectorXd dx = f.evaluate(x);
  for (int i = 0; i < m; ++i) dx += u(i) * f_u[i].evaluate(x);
  return dx;
}

double OcpProblem::stage_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  double l = l_x.evaluate(x);
  for (int i = 0; i < m; ++i) l += u(i) * l_u[i].evaluate(x);
  return l;
}

int OcpProblem::max_dynamics_degree() const {
  int d = f.components.empty() ? 0 : 0;
  for (const auto& c : f.components) d = std::max(d, c.degree());
  for (const auto& col : f_u)
    for (const auto& c : col.components) d = std::max(d, c.degree());
  return d;
}

StateScaling auto_scaling(const SemialgebraicSet& X) {
  const int n = X.dim();
  const Domain& dom = X.domain();
  if (dom.kind == DomainKind::Ball)
    return StateScaling::make(dom.radius * Eigen::MatrixXd::Identity(n, n), dom.center);
  if (dom.kind == DomainKind::Box) {
    Eigen::VectorXd half = 0.5 * (dom.hi - dom.lo);
    return StateScaling::make(Eigen::MatrixXd(half.asDiagonal()), 0.5 * (dom.hi + dom.lo));
  }
  // General domains stay unscaled.
  return StateScaling::identity(n);
}

OcpProblem scale_problem(const OcpProblem& problem, const StateScaling& scaling) {
  if (scaling.is_identity()) return problem;
  OcpProblem out = problem;
  const Eigen::MatrixXd Qinv = scaling.Q.inverse();
  auto map_field = [&](const PolyVector& field) {
    // xhatdot = Q^-1 field(Q xhat + q)
    std::vector<Polynomial> comps;
    std::vector<Polynomial> subbed;
    subbed.reserve(field.size());
    for (int k = 0; k < field.size(); ++k)
      subbed.push_back(field[k].affine_substitute(scaling.Q, scaling.q));
    for (int i = 0; i < field.size(); ++i) {
      Polynomial c = Polynomial::zero(problem.n, subbed[0].basis());
      for (int k = 0; k < field.size(); ++k)
        if (Qinv(i, k) != 0.0) c += Qinv(i, k) * subbed[k];
      comps.push_back(c);
    }
    return PolyVector(std::move(comps));
  };
  out.f = map_field(problem.f);
  out.f_u.clear();
  for (const auto& col : problem.f_u) out.f_u.push_back(map_field(col));
  out.l_x = problem.l_x.affine_substitute(scaling.Q, scaling.q);
  out.l_u.clear();
  for (const auto& l : problem.l_u) out.l_u.push_back(l.affine_substitute(scaling.Q, scaling.q));
  out.rho0_bar = problem.rho0_bar.affine_substitute(scaling.Q, scaling.q);
  out.X = problem.X.affine_preimage(scaling.Q, scaling.q);
  return out;
}

}  // namespace densopt
