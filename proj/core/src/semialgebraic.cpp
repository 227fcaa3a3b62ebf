#include "densopt/semialgebraic.hpp"

#include <cmath>
#include <stdexcept>

namespace densopt {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::substream(std::uint64_t seed, std::uint64_t index) {
  return Rng(splitmix64(splitmix64(seed) ^ (index + 1)));
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  have_spare_ = true;
  return u * f;
}

namespace {

// N - ||x||^2 as a polynomial.
Polynomial ball_bound_poly(int dim, double N) {
  Polynomial p = Polynomial::constant(dim, N);
  for (int i = 0; i < dim; ++i) p.add_term(MultiIndex::unit(dim, i, 2), -1.0);
  return p;
}

// True if g is syntactically N - ||x||^2 for some N >= 0 (returns N).
bool is_ball_bound(const Polynomial& g, double* N_out) {
  double N = 0.0;
  int quad_count = 0;
  for (const auto& [idx, c] : g.terms()) {
    const int deg = idx.degree();
    if (deg == 0) {
      N = c;
    } else if (deg == 2) {
      bool pure_square = false;
      for (int i = 0; i < idx.dim(); ++i)
        if (idx.exps[i] == 2) pure_square = true;
      if (!pure_square || c != -1.0) return false;
      ++quad_count;
    } else {
      return false;
    }
  }
  if (quad_count != g.dim() || N < 0.0) return false;
  if (N_out) *N_out = N;
  return true;
}

}  // namespace

void SemialgebraicSet::append_ball_bound_if_missing() {
  for (int i = 0; i < static_cast<int>(generators_.size()); ++i) {
    double N;
    if (is_ball_bound(generators_[i], &N)) {
      ball_bound_ = N;
      ball_gen_index_ = i;
      return;
    }
  }
  // Tightest analytic bound for Box/Ball, inflated by 1e-6 so the appended
  // generator stays strictly positive on the set.
  double tight = 0.0;
  if (domain_.kind == DomainKind::Box) {
    for (int i = 0; i < dim_; ++i)
      tight += std::max(domain_.lo(i) * domain_.lo(i), domain_.hi(i) * domain_.hi(i));
  } else if (domain_.kind == DomainKind::Ball) {
    const double c = domain_.center.norm();
    tight = (c + domain_.radius) * (c + domain_.radius);
  } else {
    if (!domain_.bounding_box)
      throw std::invalid_argument(
          "SemialgebraicSet: general domain needs an explicit N - ||x||^2 generator or a bounding box");
    const auto& [lo, hi] = *domain_.bounding_box;
    for (int i = 0; i < dim_; ++i) tight += std::max(lo(i) * lo(i), hi(i) * hi(i));
  }
  ball_bound_ = (1.0 + 1e-6) * tight;
  ball_gen_index_ = static_cast<int>(generators_.size());
  auto_appended_ = true;
  generators_.push_back(ball_bound_poly(dim_, ball_bound_));
}

SemialgebraicSet SemialgebraicSet::ball(const Eigen::VectorXd& center, double radius) {
  SemialgebraicSet s;
  s.dim_ = static_cast<int>(center.size());
  s.domain_ = Domain::ball(center, radius);
  // r^2 - ||x - c||^2
  Polynomial g = Polynomial::constant(s.dim_, radius * radius - center.squaredNorm());
  for (int i = 0; i < s.dim_; ++i) {
    g.add_term(MultiIndex::unit(s.dim_, i, 2), -1.0);
    if (center(i) != 0.0) g.add_term(MultiIndex::unit(s.dim_, i), 2.0 * center(i));
  }
  s.generators_.push_back(g);
  s.append_ball_bound_if_missing();
  return s;
}

SemialgebraicSet SemialgebraicSet::box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  SemialgebraicSet s;
  s.dim_ = static_cast<int>(lo.size());
  s.domain_ = Domain::box(lo, hi);
  // One quadratic (x_i - lo_i)(hi_i - x_i) per axis keeps n_g small.
  for (int i = 0; i < s.dim_; ++i) {
    Polynomial g(s.dim_, Basis::Monomial);
    g.add_term(MultiIndex::zeros(s.dim_), -lo(i) * hi(i));
    g.add_term(MultiIndex::unit(s.dim_, i), lo(i) + hi(i));
    g.add_term(MultiIndex::unit(s.dim_, i, 2), -1.0);
    s.generators_.push_back(g);
  }
  s.append_ball_bound_if_missing();
  return s;
}

SemialgebraicSet SemialgebraicSet::general(std::vector<Polynomial> generators, Domain domain) {
  if (generators.empty()) throw std::invalid_argument("SemialgebraicSet: generators must be nonempty");
  SemialgebraicSet s;
  s.dim_ = generators[0].dim();
  s.generators_ = std::move(generators);
  s.domain_ = std::move(domain);
  if (s.domain_.dim != s.dim_) throw std::invalid_argument("SemialgebraicSet: domain dimension mismatch");
  s.append_ball_bound_if_missing();
  return s;
}

Polynomial SemialgebraicSet::bar_g() const {
  Polynomial prod = Polynomial::constant(dim_, 1.0);
  for (const auto& g : generators_) prod = prod * g;
  return prod;
}

bool SemialgebraicSet::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != dim_) throw std::invalid_argument("contains: point dimension mismatch");
  for (const auto& g : generators_)
    if (g.evaluate(x) < -tol) return false;
  return true;
}

std::vector<Eigen::VectorXd> SemialgebraicSet::sample_uniform(int count, std::uint64_t seed) const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(std::max(count, 0));
  if (count <= 0) return out;
  Rng rng(splitmix64(seed));
  switch (domain_.kind) {
    case DomainKind::Box:
      for (int k = 0; k < count; ++k) {
        Eigen::VectorXd x(dim_);
        for (int i = 0; i < dim_; ++i) x(i) = rng.uniform(domain_.lo(i), domain_.hi(i));
        out.push_back(x);
      }
      break;
    case DomainKind::Ball:
      for (int k = 0; k < count; ++k) {
        Eigen::VectorXd dir(dim_);
        double norm2;
        do {
          for (int i = 0; i < dim_; ++i) dir(i) = rng.normal();
          norm2 = dir.squaredNorm();
        } while (norm2 == 0.0);
        const double r = domain_.radius * std::pow(rng.uniform(), 1.0 / dim_);
        out.push_back(domain_.center + (r / std::sqrt(norm2)) * dir);
      }
      break;
    case DomainKind::General: {
      if (!domain_.bounding_box)
        throw std::invalid_argument("sample_uniform: general domain needs a bounding box for rejection sampling");
      const auto& [lo, hi] = *domain_.bounding_box;
      int produced = 0;
      long attempts = 0;
      const long max_attempts = 100000L * count;
      while (produced < count) {
        if (++attempts > max_attempts)
          throw std::runtime_error("sample_uniform: rejection sampling failed to hit the set");
        Eigen::VectorXd x(dim_);
        for (int i = 0; i < dim_; ++i) x(i) = rng.uniform(lo(i), hi(i));
        if (contains(x, 0.0)) {
          out.push_back(x);
          ++produced;
        }
      }
      break;
    }
  }
  return out;
}

SemialgebraicSet SemialgebraicSet::affine_preimage(const Eigen::MatrixXd& Q,
                                                   const Eigen::VectorXd& q) const {
  SemialgebraicSet s;
  s.dim_ = dim_;
  // A previously auto-appended bound is dropped rather than transformed; it
  // would survive as a redundant generator of the mapped set, and the
  // append below restores a canonical bound when one is still needed.
  for (int gi = 0; gi < static_cast<int>(generators_.size()); ++gi) {
    if (auto_appended_ && gi == ball_gen_index_) continue;
    Polynomial gh = generators_[gi].affine_substitute(Q, q);
    // Positive rescaling preserves the set and keeps generator coefficients
    // O(1); it also lets a scaled ball generator be recognized as N - ||x||^2.
    const double scale = gh.max_abs_coefficient();
    if (scale > 0.0) gh *= 1.0 / scale;
    s.generators_.push_back(gh);
  }
  // Domain transforms cleanly for the axis-aligned cases used here.
  if (domain_.kind == DomainKind::Ball && Q.isDiagonal(0.0) && Q(0, 0) > 0 &&
      (Q.diagonal().array() == Q(0, 0)).all()) {
    s.domain_ = Domain::ball((domain_.center - q) / Q(0, 0), domain_.radius / Q(0, 0));
  } else if (domain_.kind == DomainKind::Box && Q.isDiagonal(0.0)) {
    Eigen::VectorXd lo(dim_), hi(dim_);
    for (int i = 0; i < dim_; ++i) {
      const double a = (domain_.lo(i) - q(i)) / Q(i, i);
      const double b = (domain_.hi(i) - q(i)) / Q(i, i);
      lo(i) = std::min(a, b);
      hi(i) = std::max(a, b);
    }
    s.domain_ = Domain::box(lo, hi);
  } else {
    throw std::invalid_argument("affine_preimage: only axis-aligned transforms of Box/Ball domains are supported");
  }
  s.append_ball_bound_if_missing();
  return s;
}

Eigen::VectorXd InputBox::to_original(const Eigen::VectorXd& u_normalized) const {
  Eigen::VectorXd u(m);
  for (int i = 0; i < m; ++i) u(i) = lo[i] + scale[i] * u_normalized(i);
  return u;
}

Eigen::VectorXd InputBox::to_normalized(const Eigen::VectorXd& u_original) const {
  Eigen::VectorXd u(m);
  for (int i = 0; i < m; ++i) u(i) = (u_original(i) - lo[i]) / scale[i];
  return u;
}

bool InputBox::is_identity() const {
  for (int i = 0; i < m; ++i)
    if (lo[i] != 0.0 || scale[i] != 1.0) return false;
  return true;
}

InputBox normalize_inputs(const std::vector<std::array<double, 2>>& box) {
  InputBox ib;
  ib.m = static_cast<int>(box.size());
  ib.original = box;
  double max_width = 0.0;
  for (const auto& [lo, hi] : box) {
    if (!(lo < hi)) throw std::invalid_argument("normalize_inputs: degenerate input interval");
    max_width = std::max(max_width, hi - lo);
  }
  ib.u_bar = max_width;
  for (const auto& [lo, hi] : box) {
    ib.lo.push_back(lo);
    ib.scale.push_back((hi - lo) / max_width);
  }
  return ib;
}

InputRewrite apply_input_rewrite(const InputBox& box, const PolyVector& f,
                                 const std::vector<PolyVector>& f_u, const Polynomial& l_x,
                                 const std::vector<Polynomial>& l_u) {
  if (static_cast<int>(f_u.size()) != box.m || static_cast<int>(l_u.size()) != box.m)
    throw std::invalid_argument("apply_input_rewrite: input count mismatch");
  InputRewrite rw;
  rw.drift = f;
  rw.state_cost = l_x;
  for (int i = 0; i < box.m; ++i) {
    if (box.lo[i] != 0.0) {
      for (int k = 0; k < f.size(); ++k) rw.drift[k] += box.lo[i] * f_u[i][k];
      rw.state_cost += box.lo[i] * l_u[i];
    }
    PolyVector scaled = f_u[i];
    for (int k = 0; k < scaled.size(); ++k) scaled[k] *= box.scale[i];
    rw.inputs.push_back(scaled);
    rw.input_costs.push_back(l_u[i] * box.scale[i]);
  }
  return rw;
}

}  // namespace densopt
