#pragma once

#include "densopt/polynomial.hpp"
#include "densopt/semialgebraic.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace densopt {

enum class MultiplierKind { Sos, Free };

/// One summand of a generalized quadratic-module membership:
/// generator * multiplier, the multiplier either an SOS polynomial of even
/// degree (Gram-parametrized) or an unconstrained coefficient vector.
struct ModuleTerm {
  Polynomial generator;  // monomial basis; constant 1 for the plain term
  MultiplierKind kind = MultiplierKind::Sos;
  int degree = 0;  // multiplier degree; even for Sos
  std::string label;
};

struct QuadraticModuleSpec {
  std::vector<ModuleTerm> terms;

  /// Q_d(X): one plain SOS term of degree 2*floor(d/2) plus one SOS term of
  /// degree 2*floor((d - deg g_i)/2) per generator. Terms whose degree would
  /// be negative are dropped and reported through `warnings`.
  static QuadraticModuleSpec quadratic_module(const SemialgebraicSet& set, int d,
                                              std::vector<std::string>* warnings = nullptr);

  /// Appends `factor * R[x]_{d - deg factor}` (a free multiplier).
  QuadraticModuleSpec& add_free(const Polynomial& factor, int d,
                                std::vector<std::string>* warnings = nullptr);

  /// Appends `factor * Q_{d}(X)` with the module built on `set`.
  QuadraticModuleSpec& add_scaled_module(const Polynomial& factor, const SemialgebraicSet& set, int d,
                                         std::vector<std::string>* warnings = nullptr);

  /// Merges terms with the same generator and kind (keeping the larger
  /// degree); identical generator polynomials arise when bar_g coincides
  /// with a listed g_i.
  void dedupe();
};

/// Polynomial-valued expression affine in the coefficients of declared
/// decision polynomials: constant + sum over (poly, basis index) of
/// coefficient * sensitivity polynomial. All stored in the monomial basis.
struct PolyExpr {
  int dim = 0;
  Polynomial constant;
  std::map<std::pair<int, int>, Polynomial> linear;

  explicit PolyExpr(int dimension)
      : dim(dimension), constant(Polynomial::zero(dimension, Basis::Monomial)) {}

  void add_constant(const Polynomial& p) { constant += p.convert_basis(Basis::Monomial); }
  void add_linear(int poly_id, int coeff_index, const Polynomial& sensitivity);

  int degree() const;
  /// Value of the expression for concrete decision polynomials, by id.
  Polynomial instantiate(const std::vector<Polynomial>& decision_values,
                         const std::vector<std::vector<MultiIndex>>& supports) const;
};

struct DecisionPoly {
  std::string name;
  int degree = 0;
  std::vector<MultiIndex> support;  // indices of the parametrization basis
};

struct LinearFunctional {
  std::map<std::pair<int, int>, double> coeffs;
  double constant = 0.0;
};

/// Symbolic SOS program: named decision polynomials, module memberships,
/// polynomial-identity equalities, and a linear objective (minimized).
struct SosProgram {
  int dim = 0;
  Basis param_basis = Basis::ChebyshevTensor;

  std::vector<DecisionPoly> decision_polys;
  LinearFunctional objective;

  struct Membership {
    PolyExpr expr;
    QuadraticModuleSpec spec;
    std::string name;
  };
  std::vector<Membership> memberships;

  struct Equality {
    PolyExpr expr;  // == 0
    std::string name;
  };
  std::vector<Equality> equalities;

  std::vector<std::string> warnings;

  /// Tiny objective weight on every Gram trace. The quadratic-module
  /// parametrization of (11)-style memberships admits zero-cost PSD
  /// recession directions (an SOS Gram can grow while a free multiplier
  /// cancels it exactly), which leaves the optimal face unbounded and
  /// stalls path-following solvers; the penalty selects the minimum-trace
  /// certificate instead. 0 disables.
  double gram_trace_penalty = 1e-9;

  SosProgram(int dimension, Basis basis) : dim(dimension), param_basis(basis) {}

  int declare_poly(const std::string& name, int degree);
  /// The parametrization basis function for coefficient j of poly id, as a
  /// monomial-basis polynomial.
  Polynomial basis_function(int poly_id, int coeff_index) const;
  /// Adds the expression `weight * poly` integrated over `domain` to the
  /// objective.
  void add_integral_objective(int poly_id, const Polynomial& weight, const Domain& domain,
                              double scale = 1.0);
  /// Builds the expression sensitivity for every basis function of poly_id
  /// through `transform` and adds it to expr.
  void add_transformed(PolyExpr& expr, int poly_id,
                       const std::function<Polynomial(const Polynomial&)>& transform) const;
};

}  // namespace densopt
