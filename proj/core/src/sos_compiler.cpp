#include "densopt/sos_compiler.hpp"

#include <algorithm>
#include <stdexcept>

namespace densopt {

GramBlock gram_parametrize(int degree, int dim, Basis basis) {
  if (degree < 0 || degree % 2 != 0) throw std::invalid_argument("gram_parametrize: degree must be even and >= 0");
  GramBlock blk;
  blk.basis = basis;
  blk.basis_vector = enumerate_indices(dim, degree / 2);
  blk.size = static_cast<int>(blk.basis_vector.size());
  return blk;
}

namespace {

// lower-triangle column-major position of (i, j), i >= j, 0-based
int tri_index(int n, int i, int j) { return j * n - j * (j - 1) / 2 + (i - j); }

struct RowIndexer {
  std::map<MultiIndex, int> local;  // monomial -> local row
  std::vector<MultiIndex> order;
  int get(const MultiIndex& idx) {
    auto it = local.find(idx);
    if (it != local.end()) return it->second;
    const int r = static_cast<int>(order.size());
    local.emplace(idx, r);
    order.push_back(idx);
    return r;
  }
};

}  // namespace

CompiledSdp compile(const SosProgram& program) {
  CompiledSdp out;
  SdpProblem& sdp = out.problem;
  VariableMap& vmap = out.map;
  const int dim = program.dim;

  // Free columns: decision coefficients first, Free multipliers appended
  // per membership in order.
  int next_free = 0;
  for (const auto& dp : program.decision_polys) {
    VariableMap::PolyColumns pc;
    pc.offset = next_free;
    pc.count = static_cast<int>(dp.support.size());
    vmap.decision_columns.push_back(pc);
    next_free += pc.count;
    for (int j = 0; j < pc.count; ++j) sdp.free_names.push_back(dp.name + "[" + dp.support[j].to_string() + "]");
  }

  std::vector<Eigen::Triplet<double>> free_trips;
  std::vector<double> rhs;
  int row_base = 0;

  // Each membership/equality owns a contiguous row range ordered by graded
  // lexicographic monomial.
  for (size_t mi = 0; mi < program.memberships.size(); ++mi) {
    const auto& mem = program.memberships[mi];
    VariableMap::MembershipInfo info;

    // Row support: everything of degree up to the largest contributor.
    int max_deg = mem.expr.degree();
    for (const auto& t : mem.spec.terms) max_deg = std::max(max_deg, t.generator.degree() + t.degree);
    const std::vector<MultiIndex> support = enumerate_indices(dim, max_deg);
    std::map<MultiIndex, int> row_of;
    for (int r = 0; r < static_cast<int>(support.size()); ++r) row_of[support[r]] = row_base + r;

    // Module side: Gram blocks and free multipliers. Matching happens in
    // the parametrization basis; for Chebyshev parametrizations this keeps
    // high-degree rows O(1) instead of the 2^d monomial conversion scale.
    const Basis match = program.param_basis;
    for (size_t ti = 0; ti < mem.spec.terms.size(); ++ti) {
      const auto& term = mem.spec.terms[ti];
      const Polynomial gen = term.generator.convert_basis(match);
      if (term.kind == MultiplierKind::Sos) {
        GramBlock gb = gram_parametrize(term.degree, dim, program.param_basis);
        SdpBlock blk;
        blk.size = gb.size;
        blk.name = mem.name + ":" + term.label;
        blk.rows = Eigen::MatrixXd::Zero(support.size(), tri_size(gb.size));
        blk.row_index.resize(support.size());
        for (int r = 0; r < static_cast<int>(support.size()); ++r) blk.row_index[r] = row_base + r;
        // Basis functions of the Gram vector, kept in the parametrization basis.
        std::vector<Polynomial> phi(gb.size, Polynomial(dim, program.param_basis));
        for (int j = 0; j < gb.size; ++j)
          phi[j] = Polynomial::term(gb.basis_vector[j], 1.0, program.param_basis);
        for (int a = 0; a < gb.size; ++a) {
          for (int b = 0; b <= a; ++b) {
            const Polynomial prod = (phi[a] * phi[b]) * gen;
            const int col = tri_index(gb.size, a, b);
            for (const auto& [alpha, c] : prod.terms()) {
              auto it = row_of.find(alpha);
              if (it == row_of.end())
                throw std::logic_error("compile: product support exceeded enumerated rows");
              blk.rows(it->second - row_base, col) += c;
            }
          }
        }
        info.block_index.push_back(sdp.num_blocks());
        info.gram.push_back(gb);
        info.term_of_block.push_back(static_cast<int>(ti));
        sdp.blocks.push_back(std::move(blk));
      } else {
        const auto psi = enumerate_indices(dim, term.degree);
        info.free_multiplier_columns.emplace_back(next_free, static_cast<int>(psi.size()));
        info.term_of_free.push_back(static_cast<int>(ti));
        for (size_t j = 0; j < psi.size(); ++j) {
          const Polynomial col_poly = Polynomial::term(psi[j], 1.0, program.param_basis) * gen;
          for (const auto& [alpha, c] : col_poly.terms()) {
            auto it = row_of.find(alpha);
            if (it == row_of.end()) throw std::logic_error("compile: free multiplier support exceeded rows");
            free_trips.emplace_back(it->second, next_free, c);
          }
          sdp.free_names.push_back(mem.name + ":free" + std::to_string(ti) + "[" + psi[j].to_string() + "]");
          ++next_free;
        }
      }
    }

    // Expression side: module - linear(decision) = constant.
    for (const auto& [key, sens] : mem.expr.linear) {
      const auto& [pid, cj] = key;
      const int col = vmap.decision_columns.at(pid).offset + cj;
      const Polynomial sens_m = sens.convert_basis(match);
      for (const auto& [alpha, c] : sens_m.terms()) {
        auto it = row_of.find(alpha);
        if (it == row_of.end()) throw std::logic_error("compile: expression support exceeded rows");
        free_trips.emplace_back(it->second, col, -c);
      }
    }
    rhs.resize(row_base + support.size(), 0.0);
    const Polynomial const_m = mem.expr.constant.convert_basis(match);
    for (const auto& [alpha, c] : const_m.terms()) {
      auto it = row_of.find(alpha);
      if (it == row_of.end()) throw std::logic_error("compile: expression constant exceeded rows");
      rhs[it->second] = c;
    }
    row_base += static_cast<int>(support.size());
    vmap.memberships.push_back(std::move(info));
  }

  // Polynomial-identity equalities: linear(decision) = -constant.
  for (const auto& eq : program.equalities) {
    const Basis match = program.param_basis;
    const std::vector<MultiIndex> support = enumerate_indices(dim, eq.expr.degree());
    std::map<MultiIndex, int> row_of;
    for (int r = 0; r < static_cast<int>(support.size()); ++r) row_of[support[r]] = row_base + r;
    rhs.resize(row_base + support.size(), 0.0);
    for (const auto& [key, sens] : eq.expr.linear) {
      const auto& [pid, cj] = key;
      const int col = vmap.decision_columns.at(pid).offset + cj;
      const Polynomial sens_m = sens.convert_basis(match);
      for (const auto& [alpha, c] : sens_m.terms()) free_trips.emplace_back(row_of.at(alpha), col, c);
    }
    const Polynomial eq_const_m = eq.expr.constant.convert_basis(match);
    for (const auto& [alpha, c] : eq_const_m.terms()) rhs[row_of.at(alpha)] = -c;
    row_base += static_cast<int>(support.size());
  }

  if (program.gram_trace_penalty > 0.0) {
    for (auto& blk : sdp.blocks) {
      blk.objective = Eigen::VectorXd::Zero(tri_size(blk.size));
      for (int dpos = 0, k = 0; dpos < blk.size; ++dpos) {
        blk.objective(k) = program.gram_trace_penalty;
        k += blk.size - dpos;
      }
    }
  }

  sdp.num_free = next_free;
  sdp.rhs = Eigen::Map<const Eigen::VectorXd>(rhs.data(), rhs.size());
  sdp.free_cols = Eigen::SparseMatrix<double>(row_base, next_free);
  sdp.free_cols.setFromTriplets(free_trips.begin(), free_trips.end());

  // Objective over free columns only; Gram blocks never enter it directly.
  sdp.free_obj = Eigen::VectorXd::Zero(next_free);
  for (const auto& [key, v] : program.objective.coeffs) {
    const auto& [pid, cj] = key;
    sdp.free_obj(vmap.decision_columns.at(pid).offset + cj) += v;
  }
  sdp.objective_offset = program.objective.constant;

  sdp.normalize_rows();
  return out;
}

CompiledSdp compile_membership(const Polynomial& expr, const QuadraticModuleSpec& spec,
                               Basis gram_basis) {
  SosProgram prog(expr.dim(), gram_basis);
  SosProgram::Membership mem{PolyExpr(expr.dim()), spec, "membership"};
  mem.expr.add_constant(expr);
  prog.memberships.push_back(std::move(mem));
  return compile(prog);
}

SosSolution decompile(const SosProgram& program, const CompiledSdp& compiled,
                      const SdpSolution& solution) {
  if (!solution.feasible_status())
    throw std::runtime_error("decompile: solver status " + to_string(solution.status) +
                             " carries no usable solution");
  SosSolution out;
  std::vector<std::vector<MultiIndex>> supports;
  for (size_t id = 0; id < program.decision_polys.size(); ++id) {
    const auto& dp = program.decision_polys[id];
    const auto& cols = compiled.map.decision_columns[id];
    Polynomial p(program.dim, program.param_basis);
    for (int j = 0; j < cols.count; ++j) p.add_term(dp.support[j], solution.free_values(cols.offset + j));
    out.decision_values.push_back(p);
    supports.push_back(dp.support);
  }
  // Paper objective, excluding the trace regularization term.
  out.objective = program.objective.constant;
  for (const auto& [key, coef] : program.objective.coeffs) {
    const auto& [pid, cj] = key;
    out.objective += coef * solution.free_values(compiled.map.decision_columns[pid].offset + cj);
  }

  double residual = 0.0;
  for (size_t mi = 0; mi < program.memberships.size(); ++mi) {
    const auto& mem = program.memberships[mi];
    const auto& info = compiled.map.memberships[mi];
    SosSolution::Certificate cert;
    cert.multipliers.resize(mem.spec.terms.size(), Polynomial(program.dim, Basis::Monomial));
    Polynomial module_value(program.dim, Basis::Monomial);
    int gi = 0;
    for (size_t k = 0; k < info.block_index.size(); ++k, ++gi) {
      const auto& gb = info.gram[k];
      const Eigen::MatrixXd& W = solution.primal_blocks[info.block_index[k]];
      cert.gram.push_back(W);
      // b' W b expanded through the parametrization basis.
      Polynomial s(program.dim, program.param_basis);
      std::vector<Polynomial> phi(gb.size, Polynomial(program.dim, program.param_basis));
      for (int j = 0; j < gb.size; ++j) phi[j] = Polynomial::term(gb.basis_vector[j], 1.0, program.param_basis);
      for (int a = 0; a < gb.size; ++a)
        for (int b = 0; b <= a; ++b) {
          const double w = (a == b) ? W(a, b) : 2.0 * W(a, b);
          if (w != 0.0) s += w * (phi[a] * phi[b]);
        }
      const Polynomial s_mono = s.convert_basis(Basis::Monomial);
      cert.multipliers[info.term_of_block[k]] = s_mono;
      module_value += s_mono * mem.spec.terms[info.term_of_block[k]].generator.convert_basis(Basis::Monomial);
    }
    for (size_t k = 0; k < info.free_multiplier_columns.size(); ++k) {
      const auto& [offset, count] = info.free_multiplier_columns[k];
      const int ti = info.term_of_free[k];
      const auto psi = enumerate_indices(program.dim, mem.spec.terms[ti].degree);
      Polynomial r(program.dim, program.param_basis);
      for (int j = 0; j < count; ++j) r.add_term(psi[j], solution.free_values(offset + j));
      const Polynomial r_mono = r.convert_basis(Basis::Monomial);
      cert.multipliers[ti] = r_mono;
      module_value += r_mono * mem.spec.terms[ti].generator.convert_basis(Basis::Monomial);
    }
    const Polynomial lhs = mem.expr.instantiate(out.decision_values, supports);
    const Polynomial diff = lhs - module_value;
    const double scale = 1.0 + std::max(lhs.max_abs_coefficient(), module_value.max_abs_coefficient());
    residual = std::max(residual, diff.max_abs_coefficient() / scale);
    out.certificates.push_back(std::move(cert));
  }
  for (const auto& eq : program.equalities) {
    const Polynomial val = eq.expr.instantiate(out.decision_values, supports);
    residual = std::max(residual, val.max_abs_coefficient());
  }
  out.identity_residual = residual;
  return out;
}

}  // namespace densopt
