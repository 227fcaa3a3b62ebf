#pragma once

#include "densopt/sdp.hpp"
#include "densopt/sos_program.hpp"

#include <map>
#include <string>
#include <vector>

namespace densopt {

/// Ordered basis vector b(x) backing one Gram matrix: the membership's SOS
/// multiplier is b(x)' W b(x) with W >= 0.
struct GramBlock {
  std::vector<MultiIndex> basis_vector;  // graded order, param basis
  Basis basis = Basis::Monomial;
  int size = 0;
};

/// Basis of R[x]_{degree/2}; deterministic graded ordering, size
/// C(dim + degree/2, dim).
GramBlock gram_parametrize(int degree, int dim, Basis basis);

/// Certified map from SDP variables back to named polynomials and
/// per-membership certificates.
struct VariableMap {
  struct PolyColumns {
    int offset = 0;  // first free column
    int count = 0;
  };
  std::vector<PolyColumns> decision_columns;

  struct MembershipInfo {
    std::vector<int> block_index;            // into SdpProblem::blocks, one per SOS term
    std::vector<GramBlock> gram;             // aligned with block_index
    std::vector<std::pair<int, int>> free_multiplier_columns;  // offset, count per Free term
    std::vector<int> term_of_block;          // spec term index per Gram block
    std::vector<int> term_of_free;           // spec term index per free range
  };
  std::vector<MembershipInfo> memberships;
};

struct CompiledSdp {
  SdpProblem problem;
  VariableMap map;
};

/// Translates the program to a block-diagonal SDP: one Gram block per SOS
/// term, free scalars for decision coefficients and Free multipliers,
/// coefficient-matching equalities in the monomial basis, unit-infinity-norm
/// rows with exact duplicates removed. Deterministic: identical programs
/// compile to bit-identical SDP data.
CompiledSdp compile(const SosProgram& program);

/// Single-membership helper: is `expr` in the module described by `spec`?
/// Returns the feasibility SDP (zero objective).
CompiledSdp compile_membership(const Polynomial& expr, const QuadraticModuleSpec& spec,
                               Basis gram_basis);

struct SosSolution {
  std::vector<Polynomial> decision_values;  // param basis, by poly id
  double objective = 0.0;

  struct Certificate {
    std::vector<Eigen::MatrixXd> gram;      // per SOS term
    std::vector<Polynomial> multipliers;    // per term (SOS expanded or Free)
  };
  std::vector<Certificate> certificates;    // per membership

  /// Max coefficient infinity-norm residual over all polynomial identities,
  /// recomputed from the reconstructed polynomials.
  double identity_residual = 0.0;
};

/// Reconstructs named polynomials and certificates from an SDP solution and
/// verifies every polynomial identity of the program.
SosSolution decompile(const SosProgram& program, const CompiledSdp& compiled,
                      const SdpSolution& solution);

}  // namespace densopt
