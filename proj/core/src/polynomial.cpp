#include "densopt/polynomial.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>

namespace densopt {

MultiIndex MultiIndex::unit(int dim, int var, int power) {
  MultiIndex m = zeros(dim);
  m.exps[var] = power;
  return m;
}

int MultiIndex::degree() const {
  int d = 0;
  for (int e : exps) d += e;
  return d;
}

bool MultiIndex::operator<(const MultiIndex& o) const {
  const int da = degree(), db = o.degree();
  if (da != db) return da < db;
  return exps < o.exps;
}

std::string MultiIndex::to_string() const {
  std::string s = "(";
  for (int i = 0; i < dim(); ++i) {
    if (i) s += ",";
    s += std::to_string(exps[i]);
  }
  return s + ")";
}

std::vector<MultiIndex> enumerate_indices(int dim, int max_degree) {
  std::vector<MultiIndex> out;
  if (dim == 0 || max_degree < 0) return out;
  MultiIndex cur = MultiIndex::zeros(dim);
  // Depth-first over exponent slots, emitted in graded-lex order afterwards.
  std::vector<MultiIndex> all;
  std::function<void(int, int)> rec = [&](int var, int remaining) {
    if (var == dim - 1) {
      for (int e = 0; e <= remaining; ++e) {
        cur.exps[var] = e;
        all.push_back(cur);
      }
      cur.exps[var] = 0;
      return;
    }
    for (int e = 0; e <= remaining; ++e) {
      cur.exps[var] = e;
      rec(var + 1, remaining - e);
    }
    cur.exps[var] = 0;
  };
  rec(0, max_degree);
  std::sort(all.begin(), all.end());
  return all;
}

std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

Polynomial Polynomial::zero(int dim, Basis basis) { return Polynomial(dim, basis); }

Polynomial Polynomial::constant(int dim, double value, Basis basis) {
  Polynomial p(dim, basis);
  p.add_term(MultiIndex::zeros(dim), value);
  return p;
}

Polynomial Polynomial::variable(int dim, int var) {
  if (var < 0 || var >= dim) throw std::out_of_range("Polynomial::variable: var out of range");
  Polynomial p(dim, Basis::Monomial);
  p.add_term(MultiIndex::unit(dim, var), 1.0);
  return p;
}

Polynomial Polynomial::term(MultiIndex idx, double coef, Basis basis) {
  Polynomial p(static_cast<int>(idx.exps.size()), basis);
  p.add_term(idx, coef);
  return p;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [idx, c] : terms_) d = std::max(d, idx.degree());
  return d;
}

double Polynomial::coefficient(const MultiIndex& idx) const {
  auto it = terms_.find(idx);
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::max_abs_coefficient() const {
  double m = 0.0;
  for (const auto& [idx, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

double Polynomial::coefficient_l1() const {
  double s = 0.0;
  for (const auto& [idx, c] : terms_) s += std::abs(c);
  return s;
}

void Polynomial::add_term(const MultiIndex& idx, double coef) {
  if (idx.dim() != dim_) throw std::invalid_argument("Polynomial::add_term: index dimension mismatch");
  double& slot = terms_[idx];
  slot += coef;
  if (std::abs(slot) < prune_threshold()) terms_.erase(idx);
}

void Polynomial::prune() {
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (std::abs(it->second) < prune_threshold())
      it = terms_.erase(it);
    else
      ++it;
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& q) {
  if (dim_ != q.dim_) throw std::invalid_argument("polynomial add: dimension mismatch");
  if (basis_ != q.basis_) throw std::invalid_argument("polynomial add: basis mismatch");
  for (const auto& [idx, c] : q.terms_) add_term(idx, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& q) {
  if (dim_ != q.dim_) throw std::invalid_argument("polynomial sub: dimension mismatch");
  if (basis_ != q.basis_) throw std::invalid_argument("polynomial sub: basis mismatch");
  for (const auto& [idx, c] : q.terms_) add_term(idx, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [idx, c] : terms_) c *= s;
  prune();
  return *this;
}

namespace {

// Accumulates coef * prod_i T_{a_i} T_{b_i} using T_a T_b = (T_{a+b} + T_{|a-b|}) / 2.
void cheb_term_product(const MultiIndex& a, const MultiIndex& b, double coef, int var,
                       MultiIndex& scratch, Polynomial& out) {
  if (var == a.dim()) {
    out.add_term(scratch, coef);
    return;
  }
  const int p = a.exps[var], q = b.exps[var];
  if (p == 0 || q == 0) {
    scratch.exps[var] = p + q;
    cheb_term_product(a, b, coef, var + 1, scratch, out);
  } else {
    scratch.exps[var] = p + q;
    cheb_term_product(a, b, 0.5 * coef, var + 1, scratch, out);
    scratch.exps[var] = std::abs(p - q);
    cheb_term_product(a, b, 0.5 * coef, var + 1, scratch, out);
  }
  scratch.exps[var] = 0;
}

}  // namespace

Polynomial operator*(const Polynomial& p, const Polynomial& q) {
  if (p.dim() != q.dim()) throw std::invalid_argument("polynomial mul: dimension mismatch");
  if (p.basis() != q.basis()) throw std::invalid_argument("polynomial mul: basis mismatch");
  Polynomial out(p.dim(), p.basis());
  if (p.basis() == Basis::Monomial) {
    MultiIndex sum = MultiIndex::zeros(p.dim());
    for (const auto& [a, ca] : p.terms())
      for (const auto& [b, cb] : q.terms()) {
        for (int i = 0; i < p.dim(); ++i) sum.exps[i] = a.exps[i] + b.exps[i];
        out.add_term(sum, ca * cb);
      }
  } else {
    MultiIndex scratch = MultiIndex::zeros(p.dim());
    for (const auto& [a, ca] : p.terms())
      for (const auto& [b, cb] : q.terms()) cheb_term_product(a, b, ca * cb, 0, scratch, out);
  }
  return out;
}

Polynomial Polynomial::differentiate(int var) const {
  if (var < 0 || var >= dim_) throw std::out_of_range("differentiate: var out of range");
  if (basis_ == Basis::Monomial) {
    Polynomial out(dim_, Basis::Monomial);
    for (const auto& [idx, c] : terms_) {
      if (idx.exps[var] == 0) continue;
      MultiIndex d = idx;
      d.exps[var] -= 1;
      out.add_term(d, c * idx.exps[var]);
    }
    return out;
  }
  // Chebyshev: differentiate through the monomial basis; exact either way.
  return convert_basis(Basis::Monomial).differentiate(var).convert_basis(Basis::ChebyshevTensor);
}

namespace {

// Coefficients of T_k in the monomial basis, T_0..T_k stacked row by row.
std::vector<std::vector<double>> cheb_to_mono_rows(int max_k) {
  std::vector<std::vector<double>> rows(max_k + 1);
  rows[0] = {1.0};
  if (max_k >= 1) rows[1] = {0.0, 1.0};
  for (int k = 2; k <= max_k; ++k) {
    rows[k].assign(k + 1, 0.0);
    for (int j = 0; j <= k - 1; ++j) rows[k][j + 1] += 2.0 * rows[k - 1][j];
    for (int j = 0; j <= k - 2; ++j) rows[k][j] -= rows[k - 2][j];
  }
  return rows;
}

// Coefficients of x^k in the Chebyshev basis, using x*T_j = (T_{j+1} + T_{|j-1|})/2.
std::vector<std::vector<double>> mono_to_cheb_rows(int max_k) {
  std::vector<std::vector<double>> rows(max_k + 1);
  rows[0] = {1.0};
  for (int k = 1; k <= max_k; ++k) {
    rows[k].assign(k + 1, 0.0);
    const auto& prev = rows[k - 1];
    for (int j = 0; j < static_cast<int>(prev.size()); ++j) {
      const double c = prev[j];
      if (c == 0.0) continue;
      if (j == 0) {
        rows[k][1] += c;
      } else {
        rows[k][j + 1] += 0.5 * c;
        rows[k][std::abs(j - 1)] += 0.5 * c;
      }
    }
  }
  return rows;
}

}  // namespace

Polynomial Polynomial::convert_basis(Basis target) const {
  if (target == basis_) return *this;
  const int maxdeg = degree();
  const auto rows = (basis_ == Basis::ChebyshevTensor) ? cheb_to_mono_rows(maxdeg)
                                                       : mono_to_cheb_rows(maxdeg);
  Polynomial out(dim_, target);
  MultiIndex scratch = MultiIndex::zeros(dim_);
  // Expand each term as a tensor product of univariate expansions.
  std::function<void(const MultiIndex&, int, double)> expand = [&](const MultiIndex& idx, int var,
                                                                   double coef) {
    if (coef == 0.0) return;
    if (var == dim_) {
      out.add_term(scratch, coef);
      return;
    }
    const auto& row = rows[idx.exps[var]];
    for (int j = 0; j < static_cast<int>(row.size()); ++j) {
      if (row[j] == 0.0) continue;
      scratch.exps[var] = j;
      expand(idx, var + 1, coef * row[j]);
    }
    scratch.exps[var] = 0;
  };
  for (const auto& [idx, c] : terms_) expand(idx, 0, c);
  return out;
}

Polynomial Polynomial::affine_substitute(const Eigen::MatrixXd& Q, const Eigen::VectorXd& q) const {
  if (Q.rows() != dim_ || Q.cols() != dim_ || q.size() != dim_)
    throw std::invalid_argument("affine_substitute: dimension mismatch");
  const Basis original = basis_;
  const Polynomial mono = convert_basis(Basis::Monomial);

  std::vector<Polynomial> lin(dim_, Polynomial(dim_, Basis::Monomial));
  for (int i = 0; i < dim_; ++i) {
    lin[i].add_term(MultiIndex::zeros(dim_), q(i));
    for (int j = 0; j < dim_; ++j)
      if (Q(i, j) != 0.0) lin[i].add_term(MultiIndex::unit(dim_, j), Q(i, j));
  }
  // Powers of each substituted coordinate, built on demand.
  std::vector<std::vector<Polynomial>> pow(dim_);
  auto power = [&](int i, int k) -> const Polynomial& {
    auto& cache = pow[i];
    if (cache.empty()) cache.push_back(Polynomial::constant(dim_, 1.0));
    while (static_cast<int>(cache.size()) <= k) cache.push_back(cache.back() * lin[i]);
    return cache[k];
  };

  Polynomial out(dim_, Basis::Monomial);
  for (const auto& [idx, c] : mono.terms()) {
    Polynomial t = Polynomial::constant(dim_, c);
    for (int i = 0; i < dim_; ++i)
      if (idx.exps[i] > 0) t = t * power(i, idx.exps[i]);
    out += t;
  }
  return out.convert_basis(original);
}

double Polynomial::evaluate(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) throw std::invalid_argument("evaluate: point dimension mismatch");
  if (terms_.empty()) return 0.0;
  std::vector<int> maxdeg(dim_, 0);
  for (const auto& [idx, c] : terms_)
    for (int i = 0; i < dim_; ++i) maxdeg[i] = std::max(maxdeg[i], idx.exps[i]);
  // Univariate value tables: powers or Chebyshev values by recurrence.
  std::vector<std::vector<double>> table(dim_);
  for (int i = 0; i < dim_; ++i) {
    auto& t = table[i];
    t.resize(maxdeg[i] + 1);
    t[0] = 1.0;
    if (maxdeg[i] >= 1) t[1] = x[i];
    for (int k = 2; k <= maxdeg[i]; ++k)
      t[k] = (basis_ == Basis::Monomial) ? t[k - 1] * x[i] : 2.0 * x[i] * t[k - 1] - t[k - 2];
  }
  double sum = 0.0;
  for (const auto& [idx, c] : terms_) {
    double v = c;
    for (int i = 0; i < dim_; ++i) v *= table[i][idx.exps[i]];
    sum += v;
  }
  return sum;
}

double Polynomial::evaluate(const Eigen::VectorXd& x) const {
  return evaluate(std::span<const double>(x.data(), static_cast<size_t>(x.size())));
}

namespace {

void append_double(std::string& s, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  s += buf;
}

}  // namespace

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::string s;
  bool first = true;
  for (const auto& [idx, c] : terms_) {
    double coef = c;
    if (!first) {
      s += (coef < 0) ? " - " : " + ";
      coef = std::abs(coef);
    }
    first = false;
    append_double(s, coef);
    for (int i = 0; i < dim_; ++i) {
      const int e = idx.exps[i];
      if (e == 0) continue;
      if (basis_ == Basis::Monomial) {
        s += "*x" + std::to_string(i + 1);
        if (e != 1) s += "^" + std::to_string(e);
      } else {
        s += "*T" + std::to_string(e) + "(x" + std::to_string(i + 1) + ")";
      }
    }
  }
  return s;
}

namespace {

struct Lexer {
  const std::string& text;
  size_t pos = 0;
  explicit Lexer(const std::string& t) : text(t) {}
  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  bool done() {
    skip_ws();
    return pos >= text.size();
  }
  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }
  [[noreturn]] void fail(const std::string& what) {
    throw std::invalid_argument("polynomial parse error at position " + std::to_string(pos) + ": " + what);
  }
  double number() {
    skip_ws();
    size_t end = pos;
    while (end < text.size() &&
           (std::isdigit(static_cast<unsigned char>(text[end])) || text[end] == '.' || text[end] == 'e' ||
            text[end] == 'E' ||
            ((text[end] == '+' || text[end] == '-') && end > pos && (text[end - 1] == 'e' || text[end - 1] == 'E'))))
      ++end;
    if (end == pos) fail("expected number");
    double v = std::stod(text.substr(pos, end - pos));
    pos = end;
    return v;
  }
  int integer() {
    skip_ws();
    size_t end = pos;
    while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
    if (end == pos) fail("expected integer");
    int v = std::stoi(text.substr(pos, end - pos));
    pos = end;
    return v;
  }
};

}  // namespace

Polynomial Polynomial::parse(const std::string& text, int dim) {
  Polynomial out(dim, Basis::Monomial);
  Lexer lx(text);
  bool expect_term = true;
  double sign = 1.0;
  while (!lx.done()) {
    char c = lx.peek();
    if (c == '+' || c == '-') {
      if (expect_term && c == '-') sign = -sign;
      if (expect_term && c == '+') { /* unary plus */
      }
      if (!expect_term) sign = (c == '-') ? -1.0 : 1.0;
      ++lx.pos;
      expect_term = true;
      continue;
    }
    // One term: optional coefficient, then *-separated variable powers.
    double coef = sign;
    sign = 1.0;
    expect_term = false;
    bool saw_factor = false;
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      coef *= lx.number();
      saw_factor = true;
    }
    MultiIndex idx = MultiIndex::zeros(dim);
    while (true) {
      char p = lx.peek();
      if (p == '*') {
        ++lx.pos;
        p = lx.peek();
      } else if (saw_factor && p != 'x') {
        break;
      }
      if (p == 'x') {
        ++lx.pos;
        int var = lx.integer();
        if (var < 1 || var > dim) lx.fail("variable index x" + std::to_string(var) + " out of range 1.." + std::to_string(dim));
        int e = 1;
        if (lx.peek() == '^') {
          ++lx.pos;
          e = lx.integer();
          if (e < 0) lx.fail("negative exponent");
        }
        idx.exps[var - 1] += e;
        saw_factor = true;
      } else if (std::isdigit(static_cast<unsigned char>(p)) || p == '.') {
        coef *= lx.number();
        saw_factor = true;
      } else {
        break;
      }
    }
    if (!saw_factor) lx.fail("expected term");
    out.add_term(idx, coef);
  }
  return out;
}

PolyVector::PolyVector(std::vector<Polynomial> comps) : components(std::move(comps)) {
  if (components.empty()) throw std::invalid_argument("PolyVector: empty component list");
  for (const auto& p : components) {
    if (p.dim() != components[0].dim() || p.basis() != components[0].basis())
      throw std::invalid_argument("PolyVector: components must share dim and basis");
  }
}

int PolyVector::dim() const { return components.empty() ? 0 : components[0].dim(); }

Eigen::VectorXd PolyVector::evaluate(const Eigen::VectorXd& x) const {
  Eigen::VectorXd v(size());
  for (int i = 0; i < size(); ++i) v(i) = components[i].evaluate(x);
  return v;
}

Polynomial differentiate(const Polynomial& p, int var) { return p.differentiate(var); }

Polynomial convert_basis(const Polynomial& p, Basis target) { return p.convert_basis(target); }

Polynomial divergence_of_product(const Polynomial& rho, const PolyVector& F) {
  if (rho.dim() != F.dim() || F.size() != F.dim())
    throw std::invalid_argument("divergence_of_product: dimension mismatch");
  Polynomial out(rho.dim(), rho.basis());
  for (int k = 0; k < F.size(); ++k) out += (rho * F[k]).differentiate(k);
  return out;
}

Polynomial gradient_dot(const Polynomial& p, const PolyVector& F) {
  if (p.dim() != F.dim() || F.size() != F.dim())
    throw std::invalid_argument("gradient_dot: dimension mismatch");
  Polynomial out(p.dim(), p.basis());
  for (int k = 0; k < F.size(); ++k) out += p.differentiate(k) * F[k];
  return out;
}

}  // namespace densopt
