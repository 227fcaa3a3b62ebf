#include "densopt/domain.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>

namespace densopt {

Domain Domain::box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  if (lo.size() != hi.size() || lo.size() == 0) throw std::invalid_argument("Domain::box: bad bounds");
  for (int i = 0; i < lo.size(); ++i)
    if (!(lo(i) < hi(i))) throw std::invalid_argument("Domain::box: requires lo < hi per axis");
  Domain d;
  d.kind = DomainKind::Box;
  d.lo = lo;
  d.hi = hi;
  d.dim = static_cast<int>(lo.size());
  return d;
}

Domain Domain::ball(const Eigen::VectorXd& center, double radius) {
  if (center.size() == 0 || radius <= 0) throw std::invalid_argument("Domain::ball: bad parameters");
  Domain d;
  d.kind = DomainKind::Ball;
  d.center = center;
  d.radius = radius;
  d.dim = static_cast<int>(center.size());
  return d;
}

Domain Domain::general(int dim, std::map<MultiIndex, double> moments) {
  Domain d;
  d.kind = DomainKind::General;
  d.dim = dim;
  d.moment_table = std::move(moments);
  return d;
}

namespace {

// Gamma at integer or half-integer argument, exact double-factorial form.
double gamma_half(int twice_arg) {
  if (twice_arg <= 0) throw std::invalid_argument("gamma_half: nonpositive argument");
  if (twice_arg % 2 == 0) {
    double g = 1.0;
    for (int k = 2; k < twice_arg / 2; ++k) g *= k;
    return twice_arg == 2 ? 1.0 : g;  // Gamma(n) = (n-1)!
  }
  // Gamma(1/2 + m) = (2m-1)!! / 2^m * sqrt(pi)
  const int m = (twice_arg - 1) / 2;
  double g = std::sqrt(M_PI);
  for (int k = 1; k <= m; ++k) g *= (2.0 * k - 1.0) / 2.0;
  return g;
}

// Moment of x^alpha over the unit ball centered at the origin.
double unit_ball_moment(const MultiIndex& alpha) {
  for (int e : alpha.exps)
    if (e % 2 == 1) return 0.0;
  const int n = alpha.dim();
  const int total = alpha.degree();
  double num = 2.0;
  for (int e : alpha.exps) num *= gamma_half(e + 1);          // Gamma((e+1)/2)
  const double den = (total + n) * gamma_half(total + n);     // Gamma((|a|+n)/2)
  return num / den;
}

}  // namespace

double Domain::volume() const {
  return lebesgue_moment(*this, MultiIndex::zeros(dim));
}

double lebesgue_moment(const Domain& domain, const MultiIndex& alpha) {
  if (alpha.dim() != domain.dim) throw std::invalid_argument("lebesgue_moment: index dimension mismatch");
  switch (domain.kind) {
    case DomainKind::Box: {
      double m = 1.0;
      for (int i = 0; i < domain.dim; ++i) {
        const int k = alpha.exps[i];
        m *= (std::pow(domain.hi(i), k + 1) - std::pow(domain.lo(i), k + 1)) / (k + 1);
      }
      return m;
    }
    case DomainKind::Ball: {
      if (domain.center.isZero(0.0) && domain.radius == 1.0) return unit_ball_moment(alpha);
      // Shift and scale to the canonical ball: x = c + r y.
      Polynomial mono = Polynomial::term(alpha, 1.0);
      Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(domain.dim, domain.dim) * domain.radius;
      Polynomial shifted = mono.affine_substitute(Q, domain.center);
      double sum = 0.0;
      for (const auto& [idx, c] : shifted.terms()) sum += c * unit_ball_moment(idx);
      return sum * std::pow(domain.radius, domain.dim);
    }
    case DomainKind::General: {
      auto it = domain.moment_table.find(alpha);
      if (it == domain.moment_table.end())
        throw std::out_of_range("lebesgue_moment: moment " + alpha.to_string() + " missing from user table");
      return it->second;
    }
  }
  throw std::logic_error("lebesgue_moment: unknown domain kind");
}

std::map<MultiIndex, double> lebesgue_moments(const Domain& domain, int dim, int max_degree) {
  if (dim != domain.dim) throw std::invalid_argument("lebesgue_moments: dimension mismatch");
  std::map<MultiIndex, double> out;
  for (const auto& idx : enumerate_indices(dim, max_degree)) out[idx] = lebesgue_moment(domain, idx);
  return out;
}

double integrate(const Polynomial& p, const Domain& domain) {
  if (p.dim() != domain.dim) throw std::invalid_argument("integrate: dimension mismatch");
  const Polynomial mono = p.convert_basis(Basis::Monomial);
  double sum = 0.0;
  for (const auto& [idx, c] : mono.terms()) sum += c * lebesgue_moment(domain, idx);
  return sum;
}

std::string moments_to_json(const std::map<MultiIndex, double>& moments) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [idx, v] : moments) {
    std::string key;
    for (int i = 0; i < idx.dim(); ++i) {
      if (i) key += ",";
      key += std::to_string(idx.exps[i]);
    }
    j[key] = v;
  }
  return j.dump(2);
}

std::map<MultiIndex, double> moments_from_json(const std::string& json_text, int dim) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  std::map<MultiIndex, double> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    MultiIndex idx = MultiIndex::zeros(dim);
    const std::string& key = it.key();
    size_t pos = 0;
    for (int i = 0; i < dim; ++i) {
      size_t next = key.find(',', pos);
      idx.exps[i] = std::stoi(key.substr(pos, next - pos));
      if (next == std::string::npos && i + 1 < dim)
        throw std::invalid_argument("moments_from_json: key has too few entries: " + key);
      pos = next + 1;
    }
    out[idx] = it.value().get<double>();
  }
  return out;
}

}  // namespace densopt
