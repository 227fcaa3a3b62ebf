#include "densopt/sdpa_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace densopt {

namespace {

void print_value(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

// lower-triangle column-major position of (i, j), i >= j, 0-based
int tri_index(int n, int i, int j) { return j * n - j * (j - 1) / 2 + (i - j); }

}  // namespace

std::string export_sdpa(const SdpProblem& p) {
  std::string out;
  out += "\"densopt sdpa sparse export\"\n";
  out += std::to_string(p.num_rows()) + " = mDIM\n";
  const int nblocks = p.num_blocks() + (p.num_free > 0 ? 1 : 0);
  out += std::to_string(nblocks) + " = nBLOCK\n";
  for (int j = 0; j < p.num_blocks(); ++j) {
    if (j) out += " ";
    out += std::to_string(p.blocks[j].size);
  }
  if (p.num_free > 0) {
    if (p.num_blocks()) out += " ";
    out += std::to_string(-p.num_free);
  }
  out += "\n";
  for (int i = 0; i < p.num_rows(); ++i) {
    if (i) out += " ";
    print_value(out, p.rhs(i));
  }
  out += "\n";

  auto emit_tri = [&](int cons, int block_1based, int size, const Eigen::VectorXd& v) {
    int k = 0;
    for (int j = 0; j < size; ++j)
      for (int i = j; i < size; ++i) {
        const double val = v(k++);
        if (val == 0.0) continue;
        out += std::to_string(cons) + " " + std::to_string(block_1based) + " " + std::to_string(j + 1) +
               " " + std::to_string(i + 1) + " ";
        print_value(out, val);
        out += "\n";
      }
  };

  for (int j = 0; j < p.num_blocks(); ++j)
    if (p.blocks[j].objective.size()) emit_tri(0, j + 1, p.blocks[j].size, p.blocks[j].objective);
  for (int c = 0; c < p.num_free; ++c) {
    if (p.free_obj(c) == 0.0) continue;
    out += "0 " + std::to_string(p.num_blocks() + 1) + " " + std::to_string(c + 1) + " " +
           std::to_string(c + 1) + " ";
    print_value(out, p.free_obj(c));
    out += "\n";
  }
  for (int j = 0; j < p.num_blocks(); ++j) {
    const auto& blk = p.blocks[j];
    for (int k = 0; k < static_cast<int>(blk.row_index.size()); ++k)
      emit_tri(blk.row_index[k] + 1, j + 1, blk.size, blk.rows.row(k).transpose());
  }
  if (p.num_free > 0) {
    // Column-by-column keeps the emission order independent of row layout.
    for (int c = 0; c < p.free_cols.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(p.free_cols, c); it; ++it) {
        if (it.value() == 0.0) continue;
        out += std::to_string(it.row() + 1) + " " + std::to_string(p.num_blocks() + 1) + " " +
               std::to_string(static_cast<int>(it.col()) + 1) + " " +
               std::to_string(static_cast<int>(it.col()) + 1) + " ";
        print_value(out, it.value());
        out += "\n";
      }
  }
  return out;
}

SdpProblem parse_sdpa(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<std::string> data_lines;
  while (std::getline(is, line)) {
    size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '"' || line[first] == '*') continue;  // comment lines
    data_lines.push_back(line);
  }
  if (data_lines.size() < 4) throw std::invalid_argument("parse_sdpa: truncated header");

  auto read_ints = [](const std::string& s) {
    std::vector<long> vals;
    std::istringstream ls(s);
    std::string tok;
    while (ls >> tok) {
      std::string cleaned;  // tolerate ( ) , { } separators
      for (char c : tok)
        if (c == '-' || c == '+' || std::isdigit(static_cast<unsigned char>(c))) cleaned += c;
      if (!cleaned.empty() && cleaned != "-" && cleaned != "+") vals.push_back(std::stol(cleaned));
    }
    return vals;
  };

  const long m = read_ints(data_lines[0]).at(0);
  const long nblock = read_ints(data_lines[1]).at(0);
  const auto sizes = read_ints(data_lines[2]);
  if (static_cast<long>(sizes.size()) != nblock)
    throw std::invalid_argument("parse_sdpa: block size list mismatch");

  SdpProblem p;
  int num_psd = 0;
  for (long s : sizes) {
    if (s > 0) {
      SdpBlock blk;
      blk.size = static_cast<int>(s);
      blk.objective = Eigen::VectorXd::Zero(tri_size(blk.size));
      p.blocks.push_back(std::move(blk));
      ++num_psd;
    } else {
      if (p.num_free > 0) throw std::invalid_argument("parse_sdpa: multiple free blocks unsupported");
      p.num_free = static_cast<int>(-s);
    }
  }
  if (p.num_free > 0 && sizes.back() > 0)
    throw std::invalid_argument("parse_sdpa: free block must be the trailing block");
  p.rhs = Eigen::VectorXd::Zero(m);
  {
    std::istringstream ls(data_lines[3]);
    for (long i = 0; i < m; ++i)
      if (!(ls >> p.rhs(i))) throw std::invalid_argument("parse_sdpa: truncated rhs");
  }
  p.free_obj = Eigen::VectorXd::Zero(p.num_free);

  struct Entry {
    long cons, block, i, j;
    double value;
  };
  std::vector<Entry> entries;
  for (size_t li = 4; li < data_lines.size(); ++li) {
    std::istringstream ls(data_lines[li]);
    Entry e;
    if (!(ls >> e.cons >> e.block >> e.i >> e.j >> e.value)) continue;
    if (e.block < 1 || e.block > nblock) throw std::invalid_argument("parse_sdpa: block index out of range");
    if (e.cons < 0 || e.cons > m) throw std::invalid_argument("parse_sdpa: constraint index out of range");
    entries.push_back(e);
  }

  const int free_block_no = (p.num_free > 0) ? static_cast<int>(nblock) : -1;
  std::vector<std::vector<int>> active(num_psd);
  for (const auto& e : entries) {
    if (e.block == free_block_no || e.cons == 0) continue;
    active[e.block - 1].push_back(static_cast<int>(e.cons - 1));
  }
  for (int b = 0; b < num_psd; ++b) {
    auto& v = active[b];
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    p.blocks[b].row_index = v;
    p.blocks[b].rows = Eigen::MatrixXd::Zero(v.size(), tri_size(p.blocks[b].size));
  }
  auto local_row = [&](int b, int cons) {
    const auto& v = p.blocks[b].row_index;
    return static_cast<int>(std::lower_bound(v.begin(), v.end(), cons) - v.begin());
  };

  std::vector<Eigen::Triplet<double>> free_trips;
  for (const auto& e : entries) {
    if (e.block == free_block_no) {
      if (e.i != e.j) throw std::invalid_argument("parse_sdpa: off-diagonal entry in free block");
      if (e.i < 1 || e.i > p.num_free) throw std::invalid_argument("parse_sdpa: free index out of range");
      if (e.cons == 0)
        p.free_obj(e.i - 1) = e.value;
      else
        free_trips.emplace_back(e.cons - 1, e.i - 1, e.value);
      continue;
    }
    auto& blk = p.blocks[e.block - 1];
    if (e.i < 1 || e.i > blk.size || e.j < 1 || e.j > blk.size)
      throw std::invalid_argument("parse_sdpa: entry index out of range");
    const int i = static_cast<int>(std::max(e.i, e.j)) - 1;
    const int j = static_cast<int>(std::min(e.i, e.j)) - 1;
    const int k = tri_index(blk.size, i, j);
    if (e.cons == 0)
      blk.objective(k) = e.value;
    else
      blk.rows(local_row(e.block - 1, static_cast<int>(e.cons - 1)), k) = e.value;
  }
  p.free_cols = Eigen::SparseMatrix<double>(m, p.num_free);
  p.free_cols.setFromTriplets(free_trips.begin(), free_trips.end());
  return p;
}

std::string sdpa_sidecar(const SdpProblem& p) {
  std::string out;
  for (int j = 0; j < p.num_blocks(); ++j)
    out += "block " + std::to_string(j + 1) + " size " + std::to_string(p.blocks[j].size) + " " +
           (p.blocks[j].name.empty() ? std::string("-") : p.blocks[j].name) + "\n";
  for (int c = 0; c < p.num_free; ++c)
    out += "free " + std::to_string(c + 1) + " " +
           (c < static_cast<int>(p.free_names.size()) && !p.free_names[c].empty() ? p.free_names[c]
                                                                                  : std::string("-")) +
           "\n";
  return out;
}

}  // namespace densopt
