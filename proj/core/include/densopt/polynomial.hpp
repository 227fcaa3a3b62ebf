#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace densopt {

/// Exponent (or Chebyshev order) tuple of a single term. Comparison is
/// graded lexicographic so that term maps iterate lowest degree first.
struct MultiIndex {
  std::vector<int> exps;

  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> e) : exps(std::move(e)) {}
  static MultiIndex zeros(int dim) { return MultiIndex(std::vector<int>(dim, 0)); }
  static MultiIndex unit(int dim, int var, int power = 1);

  int dim() const { return static_cast<int>(exps.size()); }
  int degree() const;
  int operator[](int i) const { return exps[i]; }

  bool operator==(const MultiIndex& o) const { return exps == o.exps; }
  bool operator<(const MultiIndex& o) const;

  std::string to_string() const;
};

/// All multi-indices with dim variables and degree <= max_degree, in
/// graded lexicographic order. Size is C(dim + max_degree, dim).
std::vector<MultiIndex> enumerate_indices(int dim, int max_degree);

std::int64_t binomial(int n, int k);

enum class Basis { Monomial, ChebyshevTensor };

/// Sparse multivariate polynomial over a fixed basis. Terms with
/// |coefficient| < prune_threshold() are dropped after arithmetic.
class Polynomial {
 public:
  using TermMap = std::map<MultiIndex, double>;

  Polynomial() : dim_(0), basis_(Basis::Monomial) {}
  Polynomial(int dim, Basis basis) : dim_(dim), basis_(basis) {}

  static Polynomial zero(int dim, Basis basis = Basis::Monomial);
  static Polynomial constant(int dim, double value, Basis basis = Basis::Monomial);
  static Polynomial variable(int dim, int var);
  static Polynomial term(MultiIndex idx, double coef, Basis basis = Basis::Monomial);

  int dim() const { return dim_; }
  Basis basis() const { return basis_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;
  int num_terms() const { return static_cast<int>(terms_.size()); }
  double coefficient(const MultiIndex& idx) const;
  double max_abs_coefficient() const;
  /// Sum of absolute coefficients; in the Chebyshev basis this bounds
  /// sup |p| on [-1,1]^n.
  double coefficient_l1() const;

  void add_term(const MultiIndex& idx, double coef);

  Polynomial& operator+=(const Polynomial& q);
  Polynomial& operator-=(const Polynomial& q);
  Polynomial& operator*=(double s);
  friend Polynomial operator+(Polynomial p, const Polynomial& q) { return p += q; }
  friend Polynomial operator-(Polynomial p, const Polynomial& q) { return p -= q; }
  friend Polynomial operator*(Polynomial p, double s) { return p *= s; }
  friend Polynomial operator*(double s, Polynomial p) { return p *= s; }
  friend Polynomial operator-(Polynomial p) { return p *= -1.0; }
  friend Polynomial operator*(const Polynomial& p, const Polynomial& q);

  Polynomial differentiate(int var) const;
  Polynomial convert_basis(Basis target) const;
  /// p(Q xhat + q), same basis as the input, degree preserved.
  Polynomial affine_substitute(const Eigen::MatrixXd& Q, const Eigen::VectorXd& q) const;
  double evaluate(std::span<const double> x) const;
  double evaluate(const Eigen::VectorXd& x) const;

  /// Text form `c1*x1^a1*...*xn^an + c2*... `; Chebyshev polynomials print
  /// and parse with T markers, e.g. `0.5*T2(x1)*T1(x3)`.
  std::string to_string() const;
  /// Parses the text format (monomial terms only). Whitespace-insensitive,
  /// `^1` optional, bare constants and bare variables allowed.
  static Polynomial parse(const std::string& text, int dim);

  static double prune_threshold() { return 1e-14; }

 private:
  void prune();
  int dim_;
  Basis basis_;
  TermMap terms_;
};

/// Fixed-length vector of polynomials sharing dim and basis (vector fields,
/// multiplier tuples).
struct PolyVector {
  std::vector<Polynomial> components;

  PolyVector() = default;
  explicit PolyVector(std::vector<Polynomial> comps);

  int size() const { return static_cast<int>(components.size()); }
  int dim() const;
  const Polynomial& operator[](int i) const { return components[i]; }
  Polynomial& operator[](int i) { return components[i]; }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const;
};

Polynomial differentiate(const Polynomial& p, int var);
Polynomial convert_basis(const Polynomial& p, Basis target);

/// sum_k d(rho * F_k)/dx_k, computed exactly in the monomial basis.
Polynomial divergence_of_product(const Polynomial& rho, const PolyVector& F);

/// grad(p) . F
Polynomial gradient_dot(const Polynomial& p, const PolyVector& F);

}  // namespace densopt
