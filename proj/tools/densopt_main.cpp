#include "densopt/config.hpp"
#include "densopt/manifest.hpp"
#include "densopt/sdpa_io.hpp"
#include "densopt/simulate.hpp"
#include "densopt/synthesis.hpp"
#include "densopt/value_bounds.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

namespace {

using namespace densopt;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;
constexpr int kExitInfeasibleBound = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  int degree = 6;
};

void emit_error_json(const std::string& out_dir, const std::string& command, const std::string& what,
                     int code) {
  nlohmann::json j;
  j["kind"] = "error";
  j["command"] = command;
  j["message"] = what;
  j["exit_code"] = code;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  try {
    write_file_atomic((fs::path(out_dir) / "error.json").string(), j.dump(2));
  } catch (...) {
  }
  std::cerr << "error: " << what << "\n";
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

ProblemConfig load_config(const std::string& path) {
  return ProblemConfig::parse(read_file(path));
}

SynthesisConfig synthesis_config(const ProblemConfig& cfg) {
  SynthesisConfig sc;
  sc.basis = cfg.basis();
  sc.auto_scale = cfg.auto_scaling_enabled();
  return sc;
}

int cmd_synthesize(const CommonArgs& args) {
  Timer timer;
  const std::string config_text = read_file(args.config_path);
  const ProblemConfig cfg = ProblemConfig::parse(config_text);
  const OcpProblem problem = cfg.to_problem(fs::path(args.config_path).parent_path().string());

  const DensitySolution sol = synthesize(problem, args.degree, synthesis_config(cfg));
  if (!(sol.status == SdpStatus::Optimal || sol.status == SdpStatus::NearOptimal)) {
    emit_error_json(args.out_dir, "synthesize",
                    "density SDP not solved: " + to_string(sol.status), kExitSolver);
    return kExitSolver;
  }
  const RationalController ctrl = extract_controller(sol, sol.scaled_problem.U.u_bar);

  fs::create_directories(args.out_dir);
  RunManifest manifest;
  manifest.command = "synthesize --degree " + std::to_string(args.degree);
  manifest.config_hash = content_hash(config_text);
  manifest.degrees = {args.degree};

  const std::string ctrl_json = controller_to_json(ctrl);
  write_file_atomic((fs::path(args.out_dir) / "controller.json").string(), ctrl_json);
  manifest.add_output("controller.json", ctrl_json);

  nlohmann::json summary;
  summary["kind"] = "density_solution";
  summary["degree"] = sol.degree;
  summary["objective_p_d"] = sol.objective;
  summary["status"] = to_string(sol.status);
  summary["solver_gap"] = sol.solver_gap;
  summary["liouville_residual"] = sol.liouville_residual;
  summary["identity_residual"] = sol.identity_residual;
  summary["iterations"] = sol.iterations;
  summary["exit_penalty_M"] = sol.scaled_problem.M;
  summary["warnings"] = sol.warnings;
  summary["rho"] = sol.rho.convert_basis(Basis::Monomial).to_string();
  const std::string summary_text = summary.dump(2);
  write_file_atomic((fs::path(args.out_dir) / "density_solution.json").string(), summary_text);
  manifest.add_output("density_solution.json", summary_text);

  manifest.wall_time_seconds = timer.seconds();
  manifest.solver_summary = to_string(sol.status) + " in " + std::to_string(sol.iterations) + " iterations";
  write_file_atomic((fs::path(args.out_dir) / "manifest.json").string(), manifest.to_json());
  std::printf("p_%d = %.9f (%s, %d iterations)\n", sol.degree, sol.objective,
              to_string(sol.status).c_str(), sol.iterations);
  return kExitOk;
}

int cmd_bound(const CommonArgs& args, const std::string& side, const std::string& controller_file,
              int grid) {
  Timer timer;
  const std::string config_text = read_file(args.config_path);
  const ProblemConfig cfg = ProblemConfig::parse(config_text);
  const OcpProblem problem = cfg.to_problem(fs::path(args.config_path).parent_path().string());

  BoundConfig bc;
  bc.basis = cfg.basis();

  ValueBound bound;
  if (side == "lower-on-V") {
    bound = lower_bound_V(problem, args.degree, bc);
  } else {
    if (controller_file.empty()) {
      emit_error_json(args.out_dir, "bound", "side '" + side + "' requires --controller", kExitConfig);
      return kExitConfig;
    }
    const RationalController ctrl = controller_from_json(read_file(controller_file));
    // Rebuild the density solution context the bounds need.
    OcpProblem resolved = problem;
    if (!(resolved.M > 0.0)) resolved.M = auto_M(problem);
    DensitySolution sol;
    sol.status = SdpStatus::Optimal;
    sol.degree = ctrl.degree;
    sol.rho = ctrl.denominator;
    sol.sigma = ctrl.numerators;
    sol.rho0 = Polynomial::constant(problem.n, 1.0);
    sol.rhoT = Polynomial::constant(problem.n, 1.0);
    sol.scaling = ctrl.scaling;
    sol.scaled_problem = scale_problem(resolved, ctrl.scaling);
    bound = (side == "upper") ? upper_bound_Vu(problem, sol, args.degree, bc)
                              : lower_bound_Vu(problem, sol, args.degree, bc);
  }
  if (!bound.solved()) {
    emit_error_json(args.out_dir, "bound",
                    "bound SDP " + to_string(bound.status) + " at degree " + std::to_string(args.degree) +
                        "; raising the degree usually restores feasibility",
                    kExitInfeasibleBound);
    return kExitInfeasibleBound;
  }

  fs::create_directories(args.out_dir);
  RunManifest manifest;
  manifest.command = "bound --side " + side + " --degree " + std::to_string(args.degree);
  manifest.config_hash = content_hash(config_text);
  manifest.degrees = {args.degree};

  const std::string bound_json = bound_to_json(bound);
  const std::string bound_name = "bound_" + to_string(bound.side) + ".json";
  write_file_atomic((fs::path(args.out_dir) / bound_name).string(), bound_json);
  manifest.add_output(bound_name, bound_json);

  const std::string csv = bound_surface_csv(bound, problem.X, grid);
  const std::string csv_name = "bound_" + to_string(bound.side) + "_surface.csv";
  write_file_atomic((fs::path(args.out_dir) / csv_name).string(), csv);
  manifest.add_output(csv_name, csv);

  manifest.wall_time_seconds = timer.seconds();
  manifest.solver_summary = to_string(bound.status);
  write_file_atomic((fs::path(args.out_dir) / "manifest.json").string(), manifest.to_json());
  std::printf("integral over X = %.9f (%s)\n", bound.integral_over_X, to_string(bound.status).c_str());
  return kExitOk;
}

int cmd_simulate(const CommonArgs& args, const std::string& controller_file,
                 const std::vector<double>& x0, int mc, std::uint64_t seed,
                 const std::string& bound_file, double step) {
  Timer timer;
  const std::string config_text = read_file(args.config_path);
  const ProblemConfig cfg = ProblemConfig::parse(config_text);
  OcpProblem problem = cfg.to_problem(fs::path(args.config_path).parent_path().string());
  if (!(problem.M > 0.0)) problem.M = auto_M(problem);
  const RationalController ctrl = controller_from_json(read_file(controller_file));

  SimConfig sim;
  sim.step = step;
  sim.seed = seed;

  fs::create_directories(args.out_dir);
  RunManifest manifest;
  manifest.config_hash = content_hash(config_text);
  manifest.seed = seed;

  if (mc > 0) {
    if (bound_file.empty()) {
      emit_error_json(args.out_dir, "simulate", "--mc requires --bound (lower bound JSON)", kExitConfig);
      return kExitConfig;
    }
    const ValueBound lb = bound_from_json(read_file(bound_file));
    const CostReport report = monte_carlo_suboptimality(problem, ctrl, lb, mc, seed, sim);
    manifest.command = "simulate --mc " + std::to_string(mc);
    const std::string report_json = cost_report_to_json(report, sim);
    write_file_atomic((fs::path(args.out_dir) / "cost_report.json").string(), report_json);
    manifest.add_output("cost_report.json", report_json);
    std::printf("mean cost %.6f, mean bound %.6f, suboptimality %.2f%%\n", report.mean_cost,
                report.mean_bound, report.suboptimality_percent);
  } else {
    if (static_cast<int>(x0.size()) != problem.n) {
      emit_error_json(args.out_dir, "simulate", "--x0 needs exactly dim values", kExitConfig);
      return kExitConfig;
    }
    Eigen::VectorXd start = Eigen::Map<const Eigen::VectorXd>(x0.data(), problem.n);
    if (!problem.X.contains(start, SemialgebraicSet::kContainsTol)) {
      emit_error_json(args.out_dir, "simulate", "initial state lies outside X", kExitConfig);
      return kExitConfig;
    }
    const Trajectory traj = integrate_closed_loop(problem, ctrl, start, sim);
    manifest.command = "simulate --x0";
    const std::string csv = trajectory_to_csv(traj);
    write_file_atomic((fs::path(args.out_dir) / "trajectory.csv").string(), csv);
    manifest.add_output("trajectory.csv", csv);
    const double cost = discounted_cost(traj, problem);
    std::printf("discounted cost %.8f%s\n", cost,
                traj.exited ? (" (exit at t = " + std::to_string(traj.exit_time) + ")").c_str() : "");
  }
  manifest.wall_time_seconds = timer.seconds();
  write_file_atomic((fs::path(args.out_dir) / "manifest.json").string(), manifest.to_json());
  return kExitOk;
}

int cmd_export_sdpa(const CommonArgs& args, const std::string& stage, const std::string& controller_file) {
  Timer timer;
  const std::string config_text = read_file(args.config_path);
  const ProblemConfig cfg = ProblemConfig::parse(config_text);
  OcpProblem problem = cfg.to_problem(fs::path(args.config_path).parent_path().string());
  if (!(problem.M > 0.0)) problem.M = auto_M(problem);

  CompiledSdp compiled;
  if (stage == "density") {
    const StateScaling scaling = cfg.auto_scaling_enabled() ? auto_scaling(problem.X)
                                                            : StateScaling::identity(problem.n);
    const OcpProblem scaled = scale_problem(problem, scaling);
    compiled = compile(build_density_program(scaled, args.degree, cfg.basis()));
  } else if (stage == "upper_vu" || stage == "lower_vu" || stage == "lower_v") {
    BoundConfig bc;
    bc.basis = cfg.basis();
    if (stage == "lower_v") {
      compiled = compile(build_bound_program(problem, nullptr, args.degree, bc, BoundSide::LowerOnV).program);
    } else {
      if (controller_file.empty()) {
        emit_error_json(args.out_dir, "export-sdpa", "stage needs --controller", kExitConfig);
        return kExitConfig;
      }
      const RationalController ctrl = controller_from_json(read_file(controller_file));
      DensitySolution sol;
      sol.status = SdpStatus::Optimal;
      sol.degree = ctrl.degree;
      sol.rho = ctrl.denominator;
      sol.sigma = ctrl.numerators;
      sol.rho0 = Polynomial::constant(problem.n, 1.0);
      sol.rhoT = Polynomial::constant(problem.n, 1.0);
      sol.scaling = ctrl.scaling;
      sol.scaled_problem = scale_problem(problem, ctrl.scaling);
      const BoundSide bside = stage == "upper_vu" ? BoundSide::UpperOnVu : BoundSide::LowerOnVu;
      compiled = compile(build_bound_program(problem, &sol, args.degree, bc, bside).program);
    }
  } else {
    emit_error_json(args.out_dir, "export-sdpa",
                    "unknown stage '" + stage + "' (density|upper_vu|lower_vu|lower_v)", kExitConfig);
    return kExitConfig;
  }

  fs::create_directories(args.out_dir);
  RunManifest manifest;
  manifest.command = "export-sdpa --stage " + stage + " --degree " + std::to_string(args.degree);
  manifest.config_hash = content_hash(config_text);
  manifest.degrees = {args.degree};

  const std::string sdpa = export_sdpa(compiled.problem);
  const std::string name = stage + "_d" + std::to_string(args.degree) + ".dat-s";
  write_file_atomic((fs::path(args.out_dir) / name).string(), sdpa);
  manifest.add_output(name, sdpa);
  const std::string sidecar = sdpa_sidecar(compiled.problem);
  write_file_atomic((fs::path(args.out_dir) / (name + ".names")).string(), sidecar);
  manifest.add_output(name + ".names", sidecar);

  manifest.wall_time_seconds = timer.seconds();
  write_file_atomic((fs::path(args.out_dir) / "manifest.json").string(), manifest.to_json());
  std::printf("wrote %s (%d rows, %d blocks, %d free)\n", name.c_str(), compiled.problem.num_rows(),
              compiled.problem.num_blocks(), compiled.problem.num_free);
  return kExitOk;
}

int cmd_gap(const CommonArgs& args, const std::string& upper_file, const std::string& lower_file) {
  const ValueBound ub = bound_from_json(read_file(upper_file));
  const ValueBound lb = bound_from_json(read_file(lower_file));
  const double gap = gap_report(ub, lb);
  std::printf("average performance gap = %.4f%%\n", gap);
  nlohmann::json j;
  j["kind"] = "gap_report";
  j["gap_percent"] = gap;
  j["upper_integral"] = ub.integral_over_X;
  j["lower_integral"] = lb.integral_over_X;
  std::error_code ec;
  fs::create_directories(args.out_dir, ec);
  write_file_atomic((fs::path(args.out_dir) / "gap.json").string(), j.dump(2));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"densopt: rational controller synthesis via polynomial density programs"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string controller_file, side = "upper", stage = "density";
  std::string bound_file, upper_file, lower_file;
  std::vector<double> x0;
  int mc = -1, grid = 41;
  std::uint64_t seed = 0;
  double step = 1e-3;

  auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
    if (needs_config) cmd->add_option("--config", args.config_path, "problem config file")->required();
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--degree", args.degree, "relaxation degree d");
  };

  auto* synth = app.add_subcommand("synthesize", "solve the density program, extract the controller");
  add_common(synth);

  auto* bound = app.add_subcommand("bound", "value function bound (13)/(14)/(15)");
  add_common(bound);
  bound->add_option("--side", side, "upper | lower-on-Vu | lower-on-V");
  bound->add_option("--controller", controller_file, "controller JSON (upper/lower-on-Vu)");
  bound->add_option("--grid", grid, "surface CSV grid points per axis");

  auto* sim = app.add_subcommand("simulate", "closed-loop simulation / Monte-Carlo");
  add_common(sim);
  sim->add_option("--controller", controller_file, "controller JSON")->required();
  sim->add_option("--x0", x0, "initial state (dim values)");
  sim->add_option("--mc", mc, "Monte-Carlo sample count");
  sim->add_option("--seed", seed, "RNG seed");
  sim->add_option("--bound", bound_file, "lower bound JSON for --mc");
  sim->add_option("--step", step, "RK4 step size");

  auto* exp = app.add_subcommand("export-sdpa", "write the compiled SDP in SDPA sparse format");
  add_common(exp);
  exp->add_option("--stage", stage, "density | upper_vu | lower_vu | lower_v");
  exp->add_option("--controller", controller_file, "controller JSON for the Vu stages");

  auto* gap = app.add_subcommand("gap", "suboptimality gap from two bound JSONs");
  gap->add_option("--upper", upper_file, "upper bound JSON")->required();
  gap->add_option("--lower", lower_file, "lower bound JSON")->required();
  gap->add_option("--out", args.out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synthesize(args);
    if (bound->parsed()) return cmd_bound(args, side, controller_file, grid);
    if (sim->parsed()) {
      if (mc == 0) {
        emit_error_json(args.out_dir, "simulate", "--mc must be positive", kExitConfig);
        return kExitConfig;
      }
      return cmd_simulate(args, controller_file, x0, mc, seed, bound_file, step);
    }
    if (exp->parsed()) return cmd_export_sdpa(args, stage, controller_file);
    if (gap->parsed()) return cmd_gap(args, upper_file, lower_file);
  } catch (const std::exception& e) {
    const std::string what = e.what();
    const bool solver_side = what.find("SDP") != std::string::npos || what.find("solver") != std::string::npos;
    emit_error_json(args.out_dir, app.get_subcommands().front()->get_name(), what,
                    solver_side ? kExitSolver : kExitConfig);
    return solver_side ? kExitSolver : kExitConfig;
  }
  return kExitOk;
}
