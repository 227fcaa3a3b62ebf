#include "densopt/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace densopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// sqrt(2)-scaled vectorization used internally: svec(A).svec(B) = <A,B>.
Eigen::VectorXd svec_scaled(const Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  Eigen::VectorXd v(tri_size(n));
  const double s = std::sqrt(2.0);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    v(k++) = A(j, j);
    for (int i = j + 1; i < n; ++i) v(k++) = s * A(i, j);
  }
  return v;
}

Eigen::MatrixXd smat_scaled(const Eigen::VectorXd& v, int n) {
  Eigen::MatrixXd A(n, n);
  const double s = 1.0 / std::sqrt(2.0);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    A(j, j) = v(k++);
    for (int i = j + 1; i < n; ++i) {
      const double w = s * v(k++);
      A(i, j) = w;
      A(j, i) = w;
    }
  }
  return A;
}

struct BlockWork {
  int size = 0;
  std::vector<int> rows;   // global row ids
  Eigen::MatrixXd A;       // (#rows) x tri, sqrt(2)-scaled entries
  Eigen::VectorXd c;       // tri, sqrt(2)-scaled objective
  Eigen::MatrixXd X, S;    // iterates
  Eigen::LLT<Eigen::MatrixXd> cholX, cholS;

  // Nesterov-Todd scaling: X = R Lam R', S = R^-T Lam R^-1, W = R R'.
  Eigen::MatrixXd R, Rinv, W;
  Eigen::VectorXd lam;

  Eigen::MatrixXd dX, dS;
  Eigen::MatrixXd dXaff, dSaff;
  Eigen::VectorXd rd;  // dual residual, svec
};

double min_eig(const Eigen::MatrixXd& A) {
  if (A.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Largest alpha with X + alpha * dX >= 0, given chol(X).
double max_step(const Eigen::LLT<Eigen::MatrixXd>& cholX, const Eigen::MatrixXd& dX) {
  const int n = static_cast<int>(dX.rows());
  if (n == 0) return kInf;
  Eigen::MatrixXd B = cholX.matrixL().solve(dX);
  B = cholX.matrixL().solve(B.transpose()).eval();
  B = 0.5 * (B + B.transpose()).eval();
  const double lmin = min_eig(B);
  if (lmin >= 0.0) return kInf;
  return -1.0 / lmin;
}

struct Workspace {
  std::vector<BlockWork> blocks;
  Eigen::MatrixXd F;  // dense free columns
  Eigen::VectorXd cf, b;
  Eigen::VectorXd y, v;
  int m = 0, nf = 0, N = 0;

  Eigen::MatrixXd M;  // Schur complement <A_i, W A_j W>
  // Free variables are eliminated exactly through a one-time column-pivoted
  // QR of F: F P = [Q1 Q2] [R11 R12; 0 0]. Dependent multiplier columns
  // (syzygies among generator products) are pinned to zero after an
  // objective-consistency check; dy = Q1 R11^-T rf_kept + Q2 z reduces the
  // augmented system to the positive definite (Q2' M Q2) z = Q2'(h - M y0).
  Eigen::MatrixXd Q1, Q2;
  Eigen::MatrixXd Rtri;
  std::vector<int> kept_cols;  // permuted column order, first rank_f are kept
  int rank_f = 0;
  Eigen::MatrixXd Mred;
  Eigen::VectorXd Dred;
  Eigen::LLT<Eigen::MatrixXd> cholMred;

  Eigen::VectorXd apply_A() const {
    Eigen::VectorXd ax = Eigen::VectorXd::Zero(m);
    for (const auto& blk : blocks) {
      const Eigen::VectorXd contrib = blk.A * svec_scaled(blk.X);
      for (size_t k = 0; k < blk.rows.size(); ++k) ax(blk.rows[k]) += contrib(k);
    }
    if (nf > 0) ax += F * v;
    return ax;
  }

  Eigen::VectorXd apply_A_to(const std::vector<Eigen::MatrixXd>& P) const {
    Eigen::VectorXd ax = Eigen::VectorXd::Zero(m);
    for (size_t j = 0; j < blocks.size(); ++j) {
      const Eigen::VectorXd contrib = blocks[j].A * svec_scaled(P[j]);
      for (size_t k = 0; k < blocks[j].rows.size(); ++k) ax(blocks[j].rows[k]) += contrib(k);
    }
    return ax;
  }

  Eigen::VectorXd gather(const Eigen::VectorXd& y_global, const BlockWork& blk) const {
    Eigen::VectorXd out(blk.rows.size());
    for (size_t k = 0; k < blk.rows.size(); ++k) out(k) = y_global(blk.rows[k]);
    return out;
  }
};

// Solves (Lam G + G Lam)/2 = Rhs entrywise: G_ij = 2 Rhs_ij / (lam_i + lam_j).
Eigen::MatrixXd jordan_solve(const Eigen::VectorXd& lam, const Eigen::MatrixXd& rhs) {
  const int n = static_cast<int>(lam.size());
  Eigen::MatrixXd G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = 2.0 * rhs(i, j) / (lam(i) + lam(j));
  return G;
}

}  // namespace

SdpSolution solve(const SdpProblem& prob, const SolverConfig& cfg) {
  SdpSolution sol;
  const int m = prob.num_rows();

  Workspace ws;
  ws.m = m;
  ws.nf = prob.num_free;
  ws.b = prob.rhs;
  ws.cf = prob.free_obj.size() ? prob.free_obj : Eigen::VectorXd::Zero(ws.nf);
  if (ws.nf > 0) ws.F = Eigen::MatrixXd(prob.free_cols);

  double normb = m ? ws.b.cwiseAbs().maxCoeff() : 0.0;
  double normC = ws.nf && ws.cf.size() ? ws.cf.cwiseAbs().maxCoeff() : 0.0;
  double normA = 0.0;
  for (const auto& blk : prob.blocks) {
    BlockWork w;
    w.size = blk.size;
    w.rows = blk.row_index;
    Eigen::VectorXd scale(tri_size(blk.size));
    {
      int k = 0;
      const double s = std::sqrt(2.0);
      for (int jj = 0; jj < blk.size; ++jj) {
        scale(k++) = 1.0;
        for (int ii = jj + 1; ii < blk.size; ++ii) scale(k++) = s;
      }
    }
    w.A = blk.rows * scale.asDiagonal();
    w.c = blk.objective.size() ? (scale.asDiagonal() * blk.objective).eval()
                               : Eigen::VectorXd::Zero(tri_size(blk.size)).eval();
    if (w.A.size()) normA = std::max(normA, w.A.cwiseAbs().maxCoeff());
    if (w.c.size()) normC = std::max(normC, w.c.cwiseAbs().maxCoeff());
    ws.N += blk.size;
    ws.blocks.push_back(std::move(w));
  }
  if (ws.nf > 0 && ws.F.size()) normA = std::max(normA, ws.F.cwiseAbs().maxCoeff());

  auto finalize = [&](SdpStatus status) {
    sol.status = status;
    sol.primal_blocks.clear();
    sol.dual_blocks.clear();
    for (const auto& blk : ws.blocks) {
      sol.primal_blocks.push_back(blk.X);
      sol.dual_blocks.push_back(blk.S);
    }
    sol.free_values = ws.v;
    sol.dual = ws.y;
    const SdpResiduals r = residuals(prob, sol);
    sol.primal_residual = r.primal_feas;
    sol.dual_residual = r.dual_feas;
    sol.gap = r.gap;
    double pobj = prob.objective_offset, dobj = prob.objective_offset;
    for (size_t j = 0; j < ws.blocks.size(); ++j) pobj += ws.blocks[j].c.dot(svec_scaled(ws.blocks[j].X));
    if (ws.nf) pobj += ws.cf.dot(ws.v);
    if (m) dobj += ws.b.dot(ws.y);
    sol.primal_objective = pobj;
    sol.dual_objective = dobj;
    return sol;
  };

  ws.y = Eigen::VectorXd::Zero(m);
  ws.v = Eigen::VectorXd::Zero(ws.nf);
  for (auto& blk : ws.blocks) {
    blk.X = Eigen::MatrixXd::Zero(blk.size, blk.size);
    blk.S = Eigen::MatrixXd::Zero(blk.size, blk.size);
  }
  // Degenerate shapes are answered directly.
  if (m == 0) {
    if (ws.nf > 0 && ws.cf.size() && ws.cf.cwiseAbs().maxCoeff() > 0)
      return finalize(SdpStatus::DualInfeasible);
    bool c_psd = true;
    for (auto& blk : ws.blocks) {
      blk.S = smat_scaled(blk.c, blk.size);
      if (min_eig(blk.S) < -1e-12) c_psd = false;
    }
    return finalize(c_psd ? SdpStatus::Optimal : SdpStatus::DualInfeasible);
  }
  // Zero rows with nonzero rhs certify infeasibility outright.
  {
    Eigen::VectorXd rownorm = Eigen::VectorXd::Zero(m);
    for (const auto& blk : ws.blocks)
      for (size_t k = 0; k < blk.rows.size(); ++k)
        if (blk.A.cols() > 0)
          rownorm(blk.rows[k]) = std::max(rownorm(blk.rows[k]), blk.A.row(k).cwiseAbs().maxCoeff());
    if (ws.nf > 0)
      for (int i = 0; i < m; ++i) rownorm(i) = std::max(rownorm(i), ws.F.row(i).cwiseAbs().maxCoeff());
    for (int i = 0; i < m; ++i)
      if (rownorm(i) == 0.0 && ws.b(i) != 0.0) {
        Eigen::VectorXd ray = Eigen::VectorXd::Zero(m);
        ray(i) = ws.b(i) > 0 ? 1.0 : -1.0;
        sol.infeasibility_ray = ray;
        sol.ray_verified = true;
        return finalize(SdpStatus::PrimalInfeasible);
      }
  }

  // One-time exact elimination of the free columns.
  if (ws.nf > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ws.F);
    qr.setThreshold(1e-10);
    ws.rank_f = static_cast<int>(qr.rank());
    if (ws.rank_f > m) return finalize(SdpStatus::NumericalFailure);
    const auto& perm = qr.colsPermutation();
    ws.kept_cols.resize(ws.nf);
    for (int i = 0; i < ws.nf; ++i) ws.kept_cols[i] = perm.indices()(i);
    ws.Rtri = qr.matrixQR().topLeftCorner(ws.rank_f, ws.rank_f).triangularView<Eigen::Upper>();
    if (ws.rank_f < ws.nf) {
      // Pinned (dependent) columns must cost the same as the combination of
      // kept columns they equal; otherwise the dual is inconsistent.
      const Eigen::MatrixXd R12 = qr.matrixQR().topRightCorner(ws.rank_f, ws.nf - ws.rank_f);
      const Eigen::MatrixXd Z =
          ws.Rtri.triangularView<Eigen::Upper>().solve(R12);  // combinations
      Eigen::VectorXd cf_kept(ws.rank_f), cf_dep(ws.nf - ws.rank_f);
      for (int i = 0; i < ws.rank_f; ++i) cf_kept(i) = ws.cf(ws.kept_cols[i]);
      for (int i = ws.rank_f; i < ws.nf; ++i) cf_dep(i - ws.rank_f) = ws.cf(ws.kept_cols[i]);
      const double mismatch = (cf_dep - Z.transpose() * cf_kept).cwiseAbs().maxCoeff();
      if (mismatch > 1e-9 * (1.0 + ws.cf.cwiseAbs().maxCoeff()))
        return finalize(SdpStatus::NumericalFailure);
    }
    Eigen::MatrixXd idm = Eigen::MatrixXd::Identity(m, m);
    Eigen::MatrixXd Qfull = qr.householderQ() * idm;
    ws.Q1 = Qfull.leftCols(ws.rank_f);
    ws.Q2 = Qfull.rightCols(m - ws.rank_f);
  }

  // Cold start: identity iterates scaled by the data norms.
  const double p_scale = 10.0 * std::max(1.0, normb);
  const double d_scale = 10.0 * std::max({1.0, normC, normA});
  for (auto& blk : ws.blocks) {
    blk.X = p_scale * Eigen::MatrixXd::Identity(blk.size, blk.size);
    blk.S = d_scale * Eigen::MatrixXd::Identity(blk.size, blk.size);
  }

  const double ray_tol = 1e-8;
  double best_score = kInf;
  SdpSolution best;
  int stall_count = 0;
  int tiny_step_count = 0;
  int no_progress_count = 0;
  double last_best_score = kInf;
  double last_mu = kInf;

  auto try_certify_primal_infeasible = [&]() -> bool {
    // Farkas ray: -A'(y) >= 0, F'y = 0, b.y > 0.
    const double by = ws.b.dot(ws.y);
    if (by <= 0) return false;
    Eigen::VectorXd yn = ws.y / by;  // normalized so b.yn = 1
    double viol = 0.0;
    for (const auto& blk : ws.blocks) {
      Eigen::VectorXd yloc(blk.rows.size());
      for (size_t k = 0; k < blk.rows.size(); ++k) yloc(k) = yn(blk.rows[k]);
      const Eigen::MatrixXd ATy = smat_scaled(blk.A.transpose() * yloc, blk.size);
      viol = std::max(viol, min_eig(ATy));  // need A'(y) <= 0
    }
    if (ws.nf > 0) {
      const Eigen::VectorXd fty = ws.F.transpose() * yn;
      if (fty.size()) viol = std::max(viol, fty.cwiseAbs().maxCoeff());
    }
    const double scale_yn = 1.0 + yn.cwiseAbs().maxCoeff() * std::max(1.0, normA);
    if (viol <= ray_tol * scale_yn) {
      sol.infeasibility_ray = yn;
      sol.ray_verified = true;
      return true;
    }
    return false;
  };

  auto try_certify_dual_infeasible = [&](double pobj_raw) -> bool {
    // Improving primal ray: A(X) + F v = 0, X >= 0, <C,X> + cf.v < 0.
    if (pobj_raw >= 0) return false;
    const double s = -pobj_raw;
    std::vector<Eigen::MatrixXd> Xn;
    for (const auto& blk : ws.blocks) Xn.push_back(blk.X / s);
    Eigen::VectorXd ax = ws.apply_A_to(Xn);
    if (ws.nf > 0) ax += ws.F * (ws.v / s);
    double xmax = 0.0;
    for (const auto& X : Xn)
      if (X.size()) xmax = std::max(xmax, X.cwiseAbs().maxCoeff());
    const double scale_x = 1.0 + xmax * std::max(1.0, normA);
    if (ax.cwiseAbs().maxCoeff() <= ray_tol * scale_x) {
      sol.ray_verified = true;
      return true;
    }
    return false;
  };

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    const Eigen::VectorXd Rp = ws.b - ws.apply_A();
    double pobj_raw = 0.0, mu_num = 0.0;
    for (auto& blk : ws.blocks) {
      Eigen::VectorXd yloc = ws.gather(ws.y, blk);
      blk.rd = blk.c - blk.A.transpose() * yloc - svec_scaled(blk.S);
      pobj_raw += blk.c.dot(svec_scaled(blk.X));
      mu_num += blk.X.cwiseProduct(blk.S).sum();
    }
    Eigen::VectorXd rf;
    if (ws.nf > 0) {
      rf = ws.cf - ws.F.transpose() * ws.y;
      pobj_raw += ws.cf.dot(ws.v);
    }
    const double dobj_raw = ws.b.dot(ws.y);
    const double mu = (ws.N > 0) ? mu_num / ws.N : 0.0;
    const double pres = Rp.cwiseAbs().maxCoeff() / (1.0 + normb);
    double dres = 0.0;
    for (const auto& blk : ws.blocks)
      if (blk.rd.size()) dres = std::max(dres, blk.rd.cwiseAbs().maxCoeff());
    if (ws.nf > 0 && rf.size()) dres = std::max(dres, rf.cwiseAbs().maxCoeff());
    dres /= (1.0 + normC);
    const double relgap = std::abs(pobj_raw - dobj_raw) / (1.0 + std::abs(pobj_raw) + std::abs(dobj_raw));

    if (cfg.collect_trace) {
      char line[160];
      std::snprintf(line, sizeof(line), "%4d %11.4e %11.4e %11.4e %11.4e", iter - 1, mu, relgap, pres, dres);
      sol.trace.push_back(line);
    }

    const double score = std::max({pres, dres, relgap});
    if (score < best_score) {
      best_score = score;
      best.free_values = ws.v;
      best.dual = ws.y;
      best.primal_blocks.clear();
      best.dual_blocks.clear();
      for (const auto& blk : ws.blocks) {
        best.primal_blocks.push_back(blk.X);
        best.dual_blocks.push_back(blk.S);
      }
    }

    sol.iterations = iter - 1;
    if (pres <= cfg.tol_feas && dres <= cfg.tol_feas && relgap <= cfg.tol_gap)
      return finalize(SdpStatus::Optimal);

    const double div_scale = 1e8 * (1.0 + normb + normC);
    if (iter > 5 && dobj_raw > div_scale && try_certify_primal_infeasible())
      return finalize(SdpStatus::PrimalInfeasible);
    if (iter > 5 && pobj_raw < -div_scale && try_certify_dual_infeasible(pobj_raw))
      return finalize(SdpStatus::DualInfeasible);

    if (mu > 0.3 * last_mu && iter > 8)
      ++stall_count;
    else
      stall_count = 0;
    last_mu = mu;
    if (iter % 12 == 0) {
      no_progress_count = (best_score > 0.95 * last_best_score) ? no_progress_count + 1 : 0;
      last_best_score = best_score;
    }
    if (stall_count >= 12 || no_progress_count >= 2) {
      if (std::getenv("DENSOPT_SOLVER_DEBUG")) std::fprintf(stderr, "exit: stall=%d noprog=%d at iter %d\n", stall_count, no_progress_count, iter);
      if (try_certify_primal_infeasible()) return finalize(SdpStatus::PrimalInfeasible);
      if (try_certify_dual_infeasible(pobj_raw)) return finalize(SdpStatus::DualInfeasible);
      break;  // report the best iterate seen
    }

    // Nesterov-Todd scaling point per block.
    bool scaling_ok = true;
    for (auto& blk : ws.blocks) {
      if (blk.size == 0) continue;
      blk.cholX.compute(blk.X);
      blk.cholS.compute(blk.S);
      if (blk.cholX.info() != Eigen::Success || blk.cholS.info() != Eigen::Success) {
        scaling_ok = false;
        break;
      }
      const Eigen::MatrixXd Lx = blk.cholX.matrixL();
      const Eigen::MatrixXd Lz = blk.cholS.matrixL();
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(Lz.transpose() * Lx,
                                            Eigen::ComputeFullU | Eigen::ComputeFullV);
      blk.lam = svd.singularValues();
      if (blk.lam.size() == 0 || blk.lam.minCoeff() <= 0.0) {
        scaling_ok = false;
        break;
      }
      const Eigen::VectorXd sq = blk.lam.cwiseSqrt();
      // R = Lz^-T U sqrt(Lam), R^-1 = sqrt(Lam)^-1 U' Lz'.
      blk.R = Lz.transpose().triangularView<Eigen::Upper>().solve(svd.matrixU()) * sq.asDiagonal();
      blk.Rinv = sq.cwiseInverse().asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
      blk.W.noalias() = blk.R * blk.R.transpose();
    }
    if (!scaling_ok) {
      if (std::getenv("DENSOPT_SOLVER_DEBUG")) std::fprintf(stderr, "exit: scaling failed at iter %d\n", iter);
      break;  // boundary hit; report the best iterate
    }

    // Schur complement M_ij = <A_i, W A_j W>, assembled per block.
    ws.M.setZero(m, m);
    for (auto& blk : ws.blocks) {
      const int mj = static_cast<int>(blk.rows.size());
      if (mj == 0) continue;
      Eigen::MatrixXd MK(mj, blk.A.cols());
      for (int k = 0; k < mj; ++k) {
        const Eigen::MatrixXd Ak = smat_scaled(blk.A.row(k).transpose(), blk.size);
        Eigen::MatrixXd U = blk.W * Ak * blk.W;
        MK.row(k) = svec_scaled(0.5 * (U + U.transpose()));
      }
      const Eigen::MatrixXd Msub = MK * blk.A.transpose();
      for (int a = 0; a < mj; ++a)
        for (int bcol = 0; bcol < mj; ++bcol) ws.M(blk.rows[a], blk.rows[bcol]) += Msub(a, bcol);
    }
    ws.M = (0.5 * (ws.M + ws.M.transpose())).eval();

    // Reduce onto the null space of F' and factor the definite part, with
    // diagonal equilibration for the end-game conditioning.
    {
      const int kk = ws.nf > 0 ? m - ws.rank_f : m;
      if (ws.nf > 0) {
        Eigen::MatrixXd MQ2 = ws.M * ws.Q2;
        ws.Mred.noalias() = ws.Q2.transpose() * MQ2;
        ws.Mred = (0.5 * (ws.Mred + ws.Mred.transpose())).eval();
      } else {
        ws.Mred = ws.M;
      }
      ws.Dred.resize(kk);
      for (int i = 0; i < kk; ++i) ws.Dred(i) = 1.0 / std::sqrt(std::max(ws.Mred(i, i), 1e-300));
      ws.Mred = ws.Dred.asDiagonal() * ws.Mred * ws.Dred.asDiagonal();
      ws.Mred = (0.5 * (ws.Mred + ws.Mred.transpose())).eval();
      double reg = 0.0;
      for (int attempt = 0; attempt < 7; ++attempt) {
        Eigen::MatrixXd Mreg = ws.Mred;
        if (reg > 0.0) Mreg.diagonal().array() += reg;
        ws.cholMred.compute(Mreg);
        if (ws.cholMred.info() == Eigen::Success) break;
        reg = (reg == 0.0) ? 1e-14 : reg * 100.0;
      }
      if (ws.cholMred.info() != Eigen::Success) return finalize(SdpStatus::NumericalFailure);
    }

    auto solve_reduced = [&](const Eigen::VectorXd& r) {
      Eigen::VectorXd rs = ws.Dred.cwiseProduct(r);
      Eigen::VectorXd zs = ws.cholMred.solve(rs);
      return ws.Dred.cwiseProduct(zs).eval();
    };

    auto solve_kkt = [&](const Eigen::VectorXd& h, const Eigen::VectorXd& rf_rhs, Eigen::VectorXd& dy,
                         Eigen::VectorXd& dv) {
      if (ws.nf == 0) {
        dy = solve_reduced(h);
        for (int pass = 0; pass < 3; ++pass) dy += solve_reduced(h - ws.M * dy);
        dv.resize(0);
        return;
      }
      Eigen::VectorXd rf_kept(ws.rank_f);
      for (int i = 0; i < ws.rank_f; ++i) rf_kept(i) = rf_rhs(ws.kept_cols[i]);
      const Eigen::VectorXd y0 =
          ws.Q1 * ws.Rtri.transpose().triangularView<Eigen::Lower>().solve(rf_kept);
      Eigen::VectorXd rhs_red = ws.Q2.transpose() * (h - ws.M * y0);
      Eigen::VectorXd z = solve_reduced(rhs_red);
      dy = y0 + ws.Q2 * z;
      for (int pass = 0; pass < 3; ++pass) {
        const Eigen::VectorXd r = ws.Q2.transpose() * (h - ws.M * dy);
        dy += ws.Q2 * solve_reduced(r);
      }
      const Eigen::VectorXd dv_kept =
          ws.Rtri.triangularView<Eigen::Upper>().solve(ws.Q1.transpose() * (h - ws.M * dy));
      dv = Eigen::VectorXd::Zero(ws.nf);
      for (int i = 0; i < ws.rank_f; ++i) dv(ws.kept_cols[i]) = dv_kept(i);
    };

    // Direction for a scaled central target G: dX = R G R' - W dS W with
    // dS = Rd - A'(dy).
    auto compute_direction = [&](const std::vector<Eigen::MatrixXd>& G, Eigen::VectorXd& dy,
                                 Eigen::VectorXd& dv, bool affine) {
      std::vector<Eigen::MatrixXd> Psi(ws.blocks.size());
      for (size_t j = 0; j < ws.blocks.size(); ++j) {
        auto& blk = ws.blocks[j];
        const Eigen::MatrixXd Rd = smat_scaled(blk.rd, blk.size);
        Eigen::MatrixXd P = blk.R * G[j] * blk.R.transpose();
        P -= blk.W * Rd * blk.W;
        Psi[j] = 0.5 * (P + P.transpose());
      }
      const Eigen::VectorXd h = Rp - ws.apply_A_to(Psi);
      solve_kkt(h, ws.nf > 0 ? rf : Eigen::VectorXd(), dy, dv);
      for (size_t j = 0; j < ws.blocks.size(); ++j) {
        auto& blk = ws.blocks[j];
        const Eigen::VectorXd dyloc = ws.gather(dy, blk);
        const Eigen::MatrixXd ATdy = smat_scaled(blk.A.transpose() * dyloc, blk.size);
        Eigen::MatrixXd& dS = affine ? blk.dSaff : blk.dS;
        Eigen::MatrixXd& dX = affine ? blk.dXaff : blk.dX;
        dS = smat_scaled(blk.rd, blk.size) - ATdy;
        const Eigen::MatrixXd T = blk.W * ATdy * blk.W;
        dX = Psi[j] + 0.5 * (T + T.transpose());
      }
    };

    // Predictor: scaled target G = -Lam.
    Eigen::VectorXd dy_aff, dv_aff;
    {
      std::vector<Eigen::MatrixXd> G(ws.blocks.size());
      for (size_t j = 0; j < ws.blocks.size(); ++j) {
        const Eigen::VectorXd neg = -ws.blocks[j].lam;
        G[j] = Eigen::MatrixXd(neg.asDiagonal());
      }
      compute_direction(G, dy_aff, dv_aff, true);
    }
    double ap_aff = 1.0, ad_aff = 1.0;
    for (auto& blk : ws.blocks) {
      ap_aff = std::min(ap_aff, max_step(blk.cholX, blk.dXaff));
      ad_aff = std::min(ad_aff, max_step(blk.cholS, blk.dSaff));
    }
    double mu_aff = 0.0;
    for (const auto& blk : ws.blocks)
      mu_aff += (blk.X + ap_aff * blk.dXaff).cwiseProduct(blk.S + ad_aff * blk.dSaff).sum();
    mu_aff = (ws.N > 0) ? mu_aff / ws.N : 0.0;
    double sigma = (mu > 0) ? std::pow(std::max(mu_aff, 0.0) / mu, 3.0) : 0.0;
    sigma = std::min(std::max(sigma, 0.0), 1.0);

    // Corrector: (Lam G + G Lam)/2 = sigma mu I - Lam^2 - sym(dXa~ dSa~),
    // with the affine directions expressed in scaled coordinates.
    Eigen::VectorXd dy, dv;
    {
      std::vector<Eigen::MatrixXd> G(ws.blocks.size());
      for (size_t j = 0; j < ws.blocks.size(); ++j) {
        auto& blk = ws.blocks[j];
        const Eigen::MatrixXd dSt = blk.R.transpose() * blk.dSaff * blk.R;
        const Eigen::MatrixXd dXt = blk.Rinv * blk.dXaff * blk.Rinv.transpose();
        Eigen::MatrixXd rhs = -0.5 * (dXt * dSt + dSt * dXt);
        rhs.diagonal().array() += sigma * mu;
        rhs -= Eigen::MatrixXd(blk.lam.cwiseAbs2().asDiagonal());
        G[j] = jordan_solve(blk.lam, 0.5 * (rhs + rhs.transpose()));
      }
      compute_direction(G, dy, dv, false);
    }

    double ap = kInf, ad = kInf;
    for (auto& blk : ws.blocks) {
      ap = std::min(ap, max_step(blk.cholX, blk.dX));
      ad = std::min(ad, max_step(blk.cholS, blk.dS));
    }
    if (std::getenv("DENSOPT_SOLVER_DEBUG")) {
      Eigen::VectorXd adx = Eigen::VectorXd::Zero(m);
      for (size_t j = 0; j < ws.blocks.size(); ++j) {
        const Eigen::VectorXd contrib = ws.blocks[j].A * svec_scaled(ws.blocks[j].dX);
        for (size_t k = 0; k < ws.blocks[j].rows.size(); ++k) adx(ws.blocks[j].rows[k]) += contrib(k);
      }
      if (ws.nf > 0) adx += ws.F * dv;
      double wmax = 0.0;
      for (auto& blk : ws.blocks) if (blk.W.size()) wmax = std::max(wmax, blk.W.cwiseAbs().maxCoeff());
      std::fprintf(stderr, "  it %d: |A(dX)+Fdv-Rp|=%.2e |M|=%.2e |dy|=%.2e |W|=%.2e apmax=%.2e admax=%.2e\n",
                   iter, (adx - Rp).cwiseAbs().maxCoeff(), ws.M.cwiseAbs().maxCoeff(),
                   dy.cwiseAbs().maxCoeff(), wmax, ap, ad);
    }
    double gamma = cfg.step_fraction;
    if (pres < 1e-6 && dres < 1e-6 && relgap < 1e-3) gamma = std::max(gamma, 0.99);
    if (pres < 1e-7 && dres < 1e-7 && relgap < 1e-5) gamma = std::max(gamma, 0.995);
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);

    if (cfg.collect_trace && !sol.trace.empty()) {
      char extra[64];
      std::snprintf(extra, sizeof(extra), " %9.3e", std::min(ap, ad));
      sol.trace.back() += extra;
    }

    tiny_step_count = (std::min(ap, ad) < 1e-5) ? tiny_step_count + 1 : 0;
    if ((ap < 1e-8 && ad < 1e-8) || tiny_step_count >= 15) {
      if (std::getenv("DENSOPT_SOLVER_DEBUG")) std::fprintf(stderr, "exit: tiny steps at iter %d\n", iter);
      if (try_certify_primal_infeasible()) return finalize(SdpStatus::PrimalInfeasible);
      if (try_certify_dual_infeasible(pobj_raw)) return finalize(SdpStatus::DualInfeasible);
      break;
    }

    // Backtrack if roundoff pushed an updated block off the cone.
    bool updated = false;
    for (int bt = 0; bt < 40 && !updated; ++bt) {
      updated = true;
      for (auto& blk : ws.blocks) {
        Eigen::MatrixXd Xn = blk.X + ap * blk.dX;
        Xn = 0.5 * (Xn + Xn.transpose()).eval();
        Eigen::MatrixXd Sn = blk.S + ad * blk.dS;
        Sn = 0.5 * (Sn + Sn.transpose()).eval();
        if (Eigen::LLT<Eigen::MatrixXd>(Xn).info() != Eigen::Success ||
            Eigen::LLT<Eigen::MatrixXd>(Sn).info() != Eigen::Success) {
          updated = false;
          ap *= 0.8;
          ad *= 0.8;
          break;
        }
      }
    }
    if (!updated) {
      if (std::getenv("DENSOPT_SOLVER_DEBUG")) std::fprintf(stderr, "exit: backtracking exhausted at iter %d\n", iter);
      break;
    }
    for (auto& blk : ws.blocks) {
      blk.X += ap * blk.dX;
      blk.X = (0.5 * (blk.X + blk.X.transpose())).eval();
      blk.S += ad * blk.dS;
      blk.S = (0.5 * (blk.S + blk.S.transpose())).eval();
    }
    ws.y += ad * dy;
    if (ws.nf > 0) ws.v += ap * dv;
  }

  // Out of iterations or stalled: report the best iterate seen.
  if (!best.primal_blocks.empty()) {
    for (size_t j = 0; j < ws.blocks.size(); ++j) {
      ws.blocks[j].X = best.primal_blocks[j];
      ws.blocks[j].S = best.dual_blocks[j];
    }
    ws.y = best.dual;
    ws.v = best.free_values;
  }
  {
    SdpSolution tmp;
    for (const auto& blk : ws.blocks) {
      tmp.primal_blocks.push_back(blk.X);
      tmp.dual_blocks.push_back(blk.S);
    }
    tmp.free_values = ws.v;
    tmp.dual = ws.y;
    const SdpResiduals r = residuals(prob, tmp);
    if (r.primal_feas <= cfg.tol_feas && r.dual_feas <= cfg.tol_feas && r.gap <= cfg.tol_gap)
      return finalize(SdpStatus::Optimal);
    // Feasible to 1e-6 with a small but not fully closed gap: usable with a
    // warning downstream.
    if (r.gap <= 1e-3 && r.primal_feas <= 1e-6 && r.dual_feas <= 1e-6)
      return finalize(SdpStatus::NearOptimal);
  }
  if (try_certify_primal_infeasible()) return finalize(SdpStatus::PrimalInfeasible);
  return finalize(SdpStatus::MaxIterations);
}

}  // namespace densopt
