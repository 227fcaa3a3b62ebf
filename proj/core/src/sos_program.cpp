#include "densopt/sos_program.hpp"

#include <stdexcept>

namespace densopt {

QuadraticModuleSpec QuadraticModuleSpec::quadratic_module(const SemialgebraicSet& set, int d,
                                                          std::vector<std::string>* warnings) {
  QuadraticModuleSpec spec;
  ModuleTerm plain;
  plain.generator = Polynomial::constant(set.dim(), 1.0);
  plain.kind = MultiplierKind::Sos;
  plain.degree = 2 * (d / 2);
  plain.label = "s0";
  if (d >= 0) spec.terms.push_back(plain);
  int i = 0;
  for (const auto& g : set.generators()) {
    ++i;
    const int k = d - g.degree();
    if (k < 0) {
      if (warnings)
        warnings->push_back("module degree " + std::to_string(d) + " below deg(g" + std::to_string(i) +
                            ") = " + std::to_string(g.degree()) + "; term dropped");
      continue;
    }
    ModuleTerm t;
    t.generator = g;
    t.kind = MultiplierKind::Sos;
    t.degree = 2 * (k / 2);
    t.label = "g" + std::to_string(i) + "*s" + std::to_string(i);
    spec.terms.push_back(t);
  }
  return spec;
}

QuadraticModuleSpec& QuadraticModuleSpec::add_free(const Polynomial& factor, int d,
                                                   std::vector<std::string>* warnings) {
  const int k = d - factor.degree();
  if (k < 0) {
    if (warnings) warnings->push_back("free multiplier degree negative; term dropped");
    return *this;
  }
  ModuleTerm t;
  t.generator = factor;
  t.kind = MultiplierKind::Free;
  t.degree = k;
  t.label = "free";
  terms.push_back(t);
  return *this;
}

QuadraticModuleSpec& QuadraticModuleSpec::add_scaled_module(const Polynomial& factor,
                                                            const SemialgebraicSet& set, int d,
                                                            std::vector<std::string>* warnings) {
  if (d < 0) {
    if (warnings) warnings->push_back("scaled module degree negative; terms dropped");
    return *this;
  }
  QuadraticModuleSpec inner = quadratic_module(set, d, warnings);
  for (auto& t : inner.terms) {
    t.generator = t.generator * factor;
    t.label = "factor*" + t.label;
    terms.push_back(std::move(t));
  }
  return *this;
}

void QuadraticModuleSpec::dedupe() {
  std::vector<ModuleTerm> kept;
  for (auto& t : terms) {
    bool merged = false;
    for (auto& k : kept) {
      if (k.kind != t.kind) continue;
      const Polynomial diff = k.generator - t.generator;
      if (!diff.is_zero()) continue;
      k.degree = std::max(k.degree, t.degree);
      merged = true;
      break;
    }
    if (!merged) kept.push_back(std::move(t));
  }
  // An SOS term whose generator also carries a free multiplier of at least
  // the same degree spans a subset of the free term; keeping both would put
  // a PSD recession direction into the compiled SDP (the Gram can grow while
  // the free coefficients cancel it), which destroys dual strict feasibility.
  std::vector<ModuleTerm> final_terms;
  for (auto& t : kept) {
    bool dominated = false;
    if (t.kind == MultiplierKind::Sos) {
      for (const auto& other : kept) {
        if (other.kind != MultiplierKind::Free || other.degree < t.degree) continue;
        if ((other.generator - t.generator).is_zero()) {
          dominated = true;
          break;
        }
      }
    }
    if (!dominated) final_terms.push_back(std::move(t));
  }
  terms = std::move(final_terms);
}

void PolyExpr::add_linear(int poly_id, int coeff_index, const Polynomial& sensitivity) {
  auto key = std::make_pair(poly_id, coeff_index);
  auto it = linear.find(key);
  if (it == linear.end())
    linear.emplace(key, sensitivity.convert_basis(Basis::Monomial));
  else
    it->second += sensitivity.convert_basis(Basis::Monomial);
}

int PolyExpr::degree() const {
  int d = constant.degree();
  for (const auto& [key, p] : linear) d = std::max(d, p.degree());
  return d;
}

Polynomial PolyExpr::instantiate(const std::vector<Polynomial>& decision_values,
                                 const std::vector<std::vector<MultiIndex>>& supports) const {
  Polynomial out = constant;
  for (const auto& [key, sens] : linear) {
    const auto& [id, j] = key;
    const Polynomial& val = decision_values.at(id);
    const double c = val.coefficient(supports.at(id).at(j));
    if (c != 0.0) out += c * sens;
  }
  return out;
}

int SosProgram::declare_poly(const std::string& name, int degree) {
  DecisionPoly p;
  p.name = name;
  p.degree = degree;
  p.support = enumerate_indices(dim, degree);
  decision_polys.push_back(std::move(p));
  return static_cast<int>(decision_polys.size()) - 1;
}

Polynomial SosProgram::basis_function(int poly_id, int coeff_index) const {
  const auto& idx = decision_polys.at(poly_id).support.at(coeff_index);
  return Polynomial::term(idx, 1.0, param_basis).convert_basis(Basis::Monomial);
}

void SosProgram::add_integral_objective(int poly_id, const Polynomial& weight, const Domain& domain,
                                        double scale) {
  const auto& poly = decision_polys.at(poly_id);
  const Polynomial w = weight.convert_basis(Basis::Monomial);
  for (int j = 0; j < static_cast<int>(poly.support.size()); ++j) {
    const double v = scale * integrate(w * basis_function(poly_id, j), domain);
    if (v != 0.0) objective.coeffs[{poly_id, j}] += v;
  }
}

void SosProgram::add_transformed(PolyExpr& expr, int poly_id,
                                 const std::function<Polynomial(const Polynomial&)>& transform) const {
  const auto& poly = decision_polys.at(poly_id);
  for (int j = 0; j < static_cast<int>(poly.support.size()); ++j) {
    Polynomial s = transform(basis_function(poly_id, j));
    if (!s.is_zero()) expr.add_linear(poly_id, j, s);
  }
}

}  // namespace densopt
