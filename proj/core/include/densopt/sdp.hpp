#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <optional>
#include <string>
#include <vector>

namespace densopt {

/// Number of lower-triangle entries of an n x n symmetric matrix.
inline int tri_size(int n) { return n * (n + 1) / 2; }

/// Plain lower-triangle stacking, column-major: (0,0),(1,0),..,(1,1),(2,1),..
/// Off-diagonals are NOT scaled, so stored values are matrix entries and
/// text export round-trips bit-exactly. Use tri_weights() for inner
/// products: <A,B> = sum w .* tri(A) .* tri(B), w = 1 on the diagonal and
/// 2 off it.
Eigen::VectorXd tri_vec(const Eigen::MatrixXd& A);
Eigen::MatrixXd tri_mat(const Eigen::VectorXd& v, int n);
Eigen::VectorXd tri_weights(int n);

/// One PSD block together with the rows of the constraint map that touch
/// it. Row k of `rows` holds the lower-triangle entries of A_{row_index[k]}
/// restricted to this block.
struct SdpBlock {
  int size = 0;
  std::vector<int> row_index;
  Eigen::MatrixXd rows;      // (#active rows) x tri_size(size)
  Eigen::VectorXd objective; // tri entries of C_block (empty means zero)

  std::string name;  // provenance label for sidecar maps

  double inner(int local_row, const Eigen::VectorXd& tri_x_weighted) const {
    return rows.row(local_row).dot(tri_x_weighted);
  }
};

/// Block-diagonal SDP with free variables:
///   minimize   sum_j <C_j, X_j> + c_f . v
///   subject to sum_j <A_ij, X_j> + (F v)_i = b_i,   X_j >= 0, v free.
struct SdpProblem {
  std::vector<SdpBlock> blocks;
  int num_free = 0;
  Eigen::SparseMatrix<double> free_cols;  // m x num_free
  Eigen::VectorXd free_obj;               // c_f
  Eigen::VectorXd rhs;                    // b
  double objective_offset = 0.0;

  std::vector<std::string> free_names;

  int num_rows() const { return static_cast<int>(rhs.size()); }
  int num_blocks() const { return static_cast<int>(blocks.size()); }
  int num_psd_vars() const;

  /// In-place row normalization (unit infinity norm) with exact-duplicate
  /// removal. Returns the number of dropped rows.
  int normalize_rows();
};

enum class SdpStatus {
  Optimal,
  NearOptimal,
  PrimalInfeasible,
  DualInfeasible,
  MaxIterations,
  NumericalFailure,
};

std::string to_string(SdpStatus s);

struct SolverConfig {
  double tol_gap = 1e-8;
  double tol_feas = 1e-8;
  int max_iters = 200;
  double step_fraction = 0.98;
  bool collect_trace = false;  // keep `iter, mu, gap, pres, dres, step` lines
};

struct SdpSolution {
  SdpStatus status = SdpStatus::NumericalFailure;
  std::vector<Eigen::MatrixXd> primal_blocks;  // X_j
  Eigen::VectorXd free_values;                 // v
  Eigen::VectorXd dual;                        // y
  std::vector<Eigen::MatrixXd> dual_blocks;    // S_j

  double primal_objective = 0.0;  // includes objective_offset
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;

  /// Improving-ray certificate for infeasible statuses, with verified sign
  /// conditions (see ray_verified).
  std::optional<Eigen::VectorXd> infeasibility_ray;
  bool ray_verified = false;

  std::vector<std::string> trace;

  bool feasible_status() const {
    return status == SdpStatus::Optimal || status == SdpStatus::NearOptimal;
  }
};

struct SdpResiduals {
  double primal_feas = 0.0;
  double dual_feas = 0.0;
  double gap = 0.0;
};

SdpSolution solve(const SdpProblem& problem, const SolverConfig& config = {});

/// Recomputed from scratch, independent of solver internals.
SdpResiduals residuals(const SdpProblem& problem, const SdpSolution& solution);

}  // namespace densopt
