#pragma once

#include "densopt/ocp.hpp"

#include <optional>
#include <string>

namespace densopt {

/// Declarative problem description, one human-editable key = value file.
/// Polynomials use the text format of the polynomial module. See the
/// bundled configs under tools/configs/ for complete examples.
///
/// Keys:
///   version      = 1
///   dim          = n
///   inputs       = m
///   f1..fn       = drift components
///   fu<i>_<k>    = input field i, component k (omitted entries are zero)
///   state_set    = ball | box | general
///   center, radius | box_lo, box_hi | generators (';'-separated) + moments_file
///   input_box    = lo1 hi1 ; lo2 hi2 ; ...
///   l_x          = state stage cost
///   l_u<i>       = input stage cost weights
///   beta         = discount factor
///   M            = auto | positive number
///   rho0_bar     = initial weighting polynomial (optional, default 1)
///   basis        = chebyshev | monomial   (optional, default chebyshev)
///   scaling      = auto | none            (optional, default auto)
struct ProblemConfig {
  int version = 1;
  int dim = 0;
  int inputs = 0;
  std::vector<std::string> f_text;
  std::vector<std::vector<std::string>> fu_text;  // [input][component]
  std::string state_set_kind;
  std::vector<double> center;
  double radius = 1.0;
  std::vector<double> box_lo, box_hi;
  std::vector<std::string> generators_text;
  std::string moments_file;
  std::vector<std::array<double, 2>> input_box;
  std::string l_x_text = "0";
  std::vector<std::string> l_u_text;
  std::string beta_text = "1";
  std::string M_text = "auto";
  std::string rho0_bar_text;
  std::string basis_text = "chebyshev";
  std::string scaling_text = "auto";

  static ProblemConfig parse(const std::string& text);
  std::string serialize() const;

  /// Materializes the OCP (reads the moments file for general sets,
  /// relative to `base_dir`).
  OcpProblem to_problem(const std::string& base_dir = ".") const;

  Basis basis() const;
  bool auto_scaling_enabled() const { return scaling_text != "none"; }
};

std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace densopt
