#include "densopt/sdp.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace densopt {

Eigen::VectorXd tri_vec(const Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  Eigen::VectorXd v(tri_size(n));
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) v(k++) = A(i, j);
  return v;
}

Eigen::MatrixXd tri_mat(const Eigen::VectorXd& v, int n) {
  if (v.size() != tri_size(n)) throw std::invalid_argument("tri_mat: size mismatch");
  Eigen::MatrixXd A(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) {
      A(i, j) = v(k);
      A(j, i) = v(k);
      ++k;
    }
  return A;
}

Eigen::VectorXd tri_weights(int n) {
  Eigen::VectorXd w(tri_size(n));
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) w(k++) = (i == j) ? 1.0 : 2.0;
  return w;
}

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "optimal";
    case SdpStatus::NearOptimal: return "near_optimal";
    case SdpStatus::PrimalInfeasible: return "primal_infeasible";
    case SdpStatus::DualInfeasible: return "dual_infeasible";
    case SdpStatus::MaxIterations: return "max_iterations";
    case SdpStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

int SdpProblem::num_psd_vars() const {
  int n = 0;
  for (const auto& b : blocks) n += tri_size(b.size);
  return n;
}

int SdpProblem::normalize_rows() {
  const int m = num_rows();
  Eigen::VectorXd norms = Eigen::VectorXd::Zero(m);
  for (const auto& blk : blocks)
    for (int k = 0; k < static_cast<int>(blk.row_index.size()); ++k)
      if (blk.rows.cols() > 0)
        norms(blk.row_index[k]) = std::max(norms(blk.row_index[k]), blk.rows.row(k).cwiseAbs().maxCoeff());
  for (int c = 0; c < free_cols.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(free_cols, c); it; ++it)
      norms(it.row()) = std::max(norms(it.row()), std::abs(it.value()));

  Eigen::VectorXd scale(m);
  for (int i = 0; i < m; ++i) {
    const double rownorm = std::max(norms(i), std::abs(rhs(i)));  // [A|b] infinity norm
    scale(i) = rownorm > 0.0 ? 1.0 / rownorm : 1.0;
  }

  for (auto& blk : blocks)
    for (int k = 0; k < static_cast<int>(blk.row_index.size()); ++k) blk.rows.row(k) *= scale(blk.row_index[k]);
  for (int c = 0; c < free_cols.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(free_cols, c); it; ++it)
      it.valueRef() *= scale(it.row());
  for (int i = 0; i < m; ++i) rhs(i) *= scale(i);

  // Exact-duplicate removal: rows whose scaled pattern and rhs coincide are
  // redundant; the first occurrence stays. All-zero rows with nonzero rhs
  // stay too (the solver reports those as infeasible).
  std::vector<std::map<std::pair<int, long>, double>> pattern(m);
  for (int bi = 0; bi < num_blocks(); ++bi) {
    const auto& blk = blocks[bi];
    for (int k = 0; k < static_cast<int>(blk.row_index.size()); ++k)
      for (long c = 0; c < blk.rows.cols(); ++c)
        if (blk.rows(k, c) != 0.0) pattern[blk.row_index[k]][{bi, c}] = blk.rows(k, c);
  }
  for (int c = 0; c < free_cols.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(free_cols, c); it; ++it)
      if (it.value() != 0.0) pattern[it.row()][{-1, static_cast<long>(c)}] = it.value();

  std::map<std::pair<std::vector<std::pair<std::pair<int, long>, double>>, double>, int> seen;
  std::vector<int> remap(m, -1);
  int kept = 0;
  for (int i = 0; i < m; ++i) {
    if (pattern[i].empty() && rhs(i) == 0.0) continue;  // trivially satisfied row
    std::vector<std::pair<std::pair<int, long>, double>> key(pattern[i].begin(), pattern[i].end());
    auto [it, inserted] = seen.try_emplace({std::move(key), rhs(i)}, kept);
    (void)it;
    remap[i] = inserted ? kept++ : -1;
  }
  const int dropped = m - kept;
  if (dropped == 0) return 0;

  Eigen::VectorXd new_rhs(kept);
  for (int i = 0; i < m; ++i)
    if (remap[i] >= 0) new_rhs(remap[i]) = rhs(i);
  rhs = new_rhs;

  for (auto& blk : blocks) {
    std::vector<int> keep_rows;
    for (int k = 0; k < static_cast<int>(blk.row_index.size()); ++k)
      if (remap[blk.row_index[k]] >= 0) keep_rows.push_back(k);
    Eigen::MatrixXd rows(keep_rows.size(), blk.rows.cols());
    std::vector<int> idx(keep_rows.size());
    for (size_t k = 0; k < keep_rows.size(); ++k) {
      rows.row(k) = blk.rows.row(keep_rows[k]);
      idx[k] = remap[blk.row_index[keep_rows[k]]];
    }
    blk.rows = std::move(rows);
    blk.row_index = std::move(idx);
  }

  std::vector<Eigen::Triplet<double>> trips;
  for (int c = 0; c < free_cols.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(free_cols, c); it; ++it)
      if (remap[it.row()] >= 0) trips.emplace_back(remap[it.row()], c, it.value());
  Eigen::SparseMatrix<double> nf(kept, num_free);
  nf.setFromTriplets(trips.begin(), trips.end());
  free_cols = std::move(nf);
  return dropped;
}

SdpResiduals residuals(const SdpProblem& p, const SdpSolution& sol) {
  SdpResiduals r;
  const int m = p.num_rows();
  Eigen::VectorXd ax = Eigen::VectorXd::Zero(m);
  double pobj = p.objective_offset, dobj = p.objective_offset;
  for (int j = 0; j < p.num_blocks(); ++j) {
    const auto& blk = p.blocks[j];
    const Eigen::VectorXd xw = tri_weights(blk.size).cwiseProduct(tri_vec(sol.primal_blocks[j]));
    const Eigen::VectorXd contrib = blk.rows * xw;
    for (int k = 0; k < static_cast<int>(blk.row_index.size()); ++k) ax(blk.row_index[k]) += contrib(k);
    if (blk.objective.size()) pobj += blk.objective.dot(xw);
  }
  if (p.num_free > 0) {
    ax += p.free_cols * sol.free_values;
    pobj += p.free_obj.dot(sol.free_values);
  }
  r.primal_feas = (m > 0) ? (p.rhs - ax).cwiseAbs().maxCoeff() / (1.0 + p.rhs.cwiseAbs().maxCoeff()) : 0.0;

  double dres = 0.0;
  double cnorm = 0.0;
  for (int j = 0; j < p.num_blocks(); ++j) {
    const auto& blk = p.blocks[j];
    Eigen::VectorXd aty = Eigen::VectorXd::Zero(blk.rows.cols());
    for (int k = 0; k < static_cast<int>(blk.row_index.size()); ++k)
      aty += sol.dual(blk.row_index[k]) * blk.rows.row(k).transpose();
    Eigen::VectorXd cvec = blk.objective.size() ? blk.objective : Eigen::VectorXd::Zero(blk.rows.cols()).eval();
    const Eigen::VectorXd rd = cvec - aty - tri_vec(sol.dual_blocks[j]);
    if (rd.size()) dres = std::max(dres, rd.cwiseAbs().maxCoeff());
    if (cvec.size()) cnorm = std::max(cnorm, cvec.cwiseAbs().maxCoeff());
  }
  if (p.num_free > 0) {
    const Eigen::VectorXd rf = p.free_obj - p.free_cols.transpose() * sol.dual;
    if (rf.size()) dres = std::max(dres, rf.cwiseAbs().maxCoeff());
    if (p.free_obj.size()) cnorm = std::max(cnorm, p.free_obj.cwiseAbs().maxCoeff());
  }
  r.dual_feas = dres / (1.0 + cnorm);

  dobj += (m > 0) ? p.rhs.dot(sol.dual) : 0.0;
  r.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
  return r;
}

}  // namespace densopt
