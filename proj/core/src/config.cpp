#include "densopt/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace densopt {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::vector<double> parse_numbers(const std::string& s) {
  std::vector<double> out;
  std::istringstream is(s);
  double v;
  while (is >> v) out.push_back(v);
  return out;
}

void append_numbers(std::string& out, const std::vector<double>& v) {
  char buf[40];
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += " ";
    std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
    out += buf;
  }
}

}  // namespace

ProblemConfig ProblemConfig::parse(const std::string& text) {
  ProblemConfig cfg;
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (kv.count(key))
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = value;
  }

  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto require = [&](const std::string& key) {
    auto v = take(key);
    if (!v) throw std::invalid_argument("config: missing required key '" + key + "'");
    return *v;
  };

  cfg.version = std::stoi(require("version"));
  if (cfg.version != 1) throw std::invalid_argument("config: unsupported version");
  cfg.dim = std::stoi(require("dim"));
  cfg.inputs = std::stoi(require("inputs"));
  if (cfg.dim < 1 || cfg.inputs < 0) throw std::invalid_argument("config: bad dim/inputs");

  for (int i = 1; i <= cfg.dim; ++i) cfg.f_text.push_back(take("f" + std::to_string(i)).value_or("0"));
  for (int i = 1; i <= cfg.inputs; ++i) {
    std::vector<std::string> col;
    for (int k = 1; k <= cfg.dim; ++k)
      col.push_back(take("fu" + std::to_string(i) + "_" + std::to_string(k)).value_or("0"));
    cfg.fu_text.push_back(col);
  }

  cfg.state_set_kind = require("state_set");
  if (cfg.state_set_kind == "ball") {
    cfg.center = parse_numbers(require("center"));
    cfg.radius = std::stod(require("radius"));
    if (static_cast<int>(cfg.center.size()) != cfg.dim) throw std::invalid_argument("config: center size mismatch");
  } else if (cfg.state_set_kind == "box") {
    cfg.box_lo = parse_numbers(require("box_lo"));
    cfg.box_hi = parse_numbers(require("box_hi"));
    if (static_cast<int>(cfg.box_lo.size()) != cfg.dim || static_cast<int>(cfg.box_hi.size()) != cfg.dim)
      throw std::invalid_argument("config: box bounds size mismatch");
  } else if (cfg.state_set_kind == "general") {
    for (const auto& g : split(require("generators"), ';'))
      if (!g.empty()) cfg.generators_text.push_back(g);
    cfg.moments_file = require("moments_file");
  } else {
    throw std::invalid_argument("config: state_set must be ball, box, or general");
  }

  if (cfg.inputs > 0) {
    for (const auto& pair : split(require("input_box"), ';')) {
      const auto nums = parse_numbers(pair);
      if (nums.size() != 2) throw std::invalid_argument("config: input_box entries need 'lo hi'");
      cfg.input_box.push_back({nums[0], nums[1]});
    }
    if (static_cast<int>(cfg.input_box.size()) != cfg.inputs)
      throw std::invalid_argument("config: input_box count mismatch");
  }

  cfg.l_x_text = take("l_x").value_or("0");
  for (int i = 1; i <= cfg.inputs; ++i) cfg.l_u_text.push_back(take("l_u" + std::to_string(i)).value_or("0"));
  cfg.beta_text = take("beta").value_or("1");
  cfg.M_text = take("M").value_or("auto");
  cfg.rho0_bar_text = take("rho0_bar").value_or("");
  cfg.basis_text = take("basis").value_or("chebyshev");
  cfg.scaling_text = take("scaling").value_or("auto");
  if (cfg.basis_text != "chebyshev" && cfg.basis_text != "monomial")
    throw std::invalid_argument("config: basis must be chebyshev or monomial");
  if (cfg.scaling_text != "auto" && cfg.scaling_text != "none")
    throw std::invalid_argument("config: scaling must be auto or none");

  if (!kv.empty()) throw std::invalid_argument("config: unknown key '" + kv.begin()->first + "'");

  // Validate polynomial syntax now so errors carry positions.
  for (const auto& t : cfg.f_text) Polynomial::parse(t, cfg.dim);
  for (const auto& col : cfg.fu_text)
    for (const auto& t : col) Polynomial::parse(t, cfg.dim);
  Polynomial::parse(cfg.l_x_text, cfg.dim);
  for (const auto& t : cfg.l_u_text) Polynomial::parse(t, cfg.dim);
  for (const auto& t : cfg.generators_text) Polynomial::parse(t, cfg.dim);
  if (!cfg.rho0_bar_text.empty()) Polynomial::parse(cfg.rho0_bar_text, cfg.dim);
  return cfg;
}

std::string ProblemConfig::serialize() const {
  std::string out;
  out += "version = " + std::to_string(version) + "\n";
  out += "dim = " + std::to_string(dim) + "\n";
  out += "inputs = " + std::to_string(inputs) + "\n";
  for (int i = 0; i < dim; ++i) out += "f" + std::to_string(i + 1) + " = " + f_text[i] + "\n";
  for (int i = 0; i < inputs; ++i)
    for (int k = 0; k < dim; ++k)
      out += "fu" + std::to_string(i + 1) + "_" + std::to_string(k + 1) + " = " + fu_text[i][k] + "\n";
  out += "state_set = " + state_set_kind + "\n";
  if (state_set_kind == "ball") {
    out += "center = ";
    append_numbers(out, center);
    out += "\n";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", radius);
    out += "radius = " + std::string(buf) + "\n";
  } else if (state_set_kind == "box") {
    out += "box_lo = ";
    append_numbers(out, box_lo);
    out += "\nbox_hi = ";
    append_numbers(out, box_hi);
    out += "\n";
  } else {
    out += "generators = ";
    for (size_t i = 0; i < generators_text.size(); ++i) {
      if (i) out += " ; ";
      out += generators_text[i];
    }
    out += "\nmoments_file = " + moments_file + "\n";
  }
  if (inputs > 0) {
    out += "input_box = ";
    for (int i = 0; i < inputs; ++i) {
      if (i) out += " ; ";
      append_numbers(out, {input_box[i][0], input_box[i][1]});
    }
    out += "\n";
  }
  out += "l_x = " + l_x_text + "\n";
  for (int i = 0; i < inputs; ++i) out += "l_u" + std::to_string(i + 1) + " = " + l_u_text[i] + "\n";
  out += "beta = " + beta_text + "\n";
  out += "M = " + M_text + "\n";
  if (!rho0_bar_text.empty()) out += "rho0_bar = " + rho0_bar_text + "\n";
  out += "basis = " + basis_text + "\n";
  out += "scaling = " + scaling_text + "\n";
  return out;
}

OcpProblem ProblemConfig::to_problem(const std::string& base_dir) const {
  std::vector<Polynomial> f_comps;
  for (const auto& t : f_text) f_comps.push_back(Polynomial::parse(t, dim));
  PolyVector f(f_comps);
  std::vector<PolyVector> f_u;
  for (const auto& col : fu_text) {
    std::vector<Polynomial> comps;
    for (const auto& t : col) comps.push_back(Polynomial::parse(t, dim));
    f_u.push_back(PolyVector(comps));
  }
  SemialgebraicSet X;
  if (state_set_kind == "ball") {
    X = SemialgebraicSet::ball(Eigen::Map<const Eigen::VectorXd>(center.data(), dim), radius);
  } else if (state_set_kind == "box") {
    X = SemialgebraicSet::box(Eigen::Map<const Eigen::VectorXd>(box_lo.data(), dim),
                              Eigen::Map<const Eigen::VectorXd>(box_hi.data(), dim));
  } else {
    std::vector<Polynomial> gens;
    for (const auto& t : generators_text) gens.push_back(Polynomial::parse(t, dim));
    const std::string path = (std::filesystem::path(base_dir) / moments_file).string();
    Domain dom = Domain::general(dim, moments_from_json(read_file(path), dim));
    X = SemialgebraicSet::general(gens, dom);
  }
  Polynomial lx = Polynomial::parse(l_x_text, dim);
  std::vector<Polynomial> lu;
  for (const auto& t : l_u_text) lu.push_back(Polynomial::parse(t, dim));
  const double beta = std::stod(beta_text);
  const double M = (M_text == "auto") ? 0.0 : std::stod(M_text);
  Polynomial rho0 = rho0_bar_text.empty() ? Polynomial() : Polynomial::parse(rho0_bar_text, dim);
  return OcpProblem::make(f, f_u, X, input_box, lx, lu, beta, M, rho0);
}

Basis ProblemConfig::basis() const {
  return basis_text == "monomial" ? Basis::Monomial : Basis::ChebyshevTensor;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + tmp);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace densopt
