#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "h2mor/sdp.hpp"

namespace h2mor::sdp {

namespace {

void write_upper(std::ostream& out, int matno, std::size_t blkno, const MatR& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i; j < m.cols(); ++j) {
      if (m(i, j) != 0.0) out << matno << ' ' << blkno + 1 << ' ' << i + 1 << ' ' << j + 1 << ' ' << m(i, j) << '\n';
    }
  }
}

}  // namespace

void write_sdpa(const Problem& problem, std::ostream& out) {
  const auto flags = out.flags();
  out << std::setprecision(17);
  out << "* h2mor SDP: minimize c'x s.t. sum_i x_i F_i - F_0 >= 0 (blockwise)\n";
  out << problem.nvars << " = mDIM\n";
  out << problem.blocks.size() << " = nBLOCK\n";
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
    out << (b ? " " : "") << problem.blocks[b].dim();
  }
  out << " = bLOCKsTRUCT\n";
  for (int i = 0; i < problem.nvars; ++i) out << (i ? " " : "") << problem.objective(i);
  out << '\n';
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) write_upper(out, 0, b, -problem.blocks[b].constant);
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
    for (const auto& term : problem.blocks[b].terms) write_upper(out, term.var + 1, b, MatR(term.matrix));
  }
  out.flags(flags);
}

Problem read_sdpa(std::istream& in) {
  std::string line;
  const auto next_data_line = [&]() {
    while (std::getline(in, line)) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      if (line[first] == '*' || line[first] == '"') continue;
      for (auto& ch : line) {
        if (ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')') ch = ' ';
      }
      return true;
    }
    return false;
  };
  const auto fail = [](const std::string& what) { return Error(ErrorKind::Parse, "sdpa: " + what); };

  Problem p;
  if (!next_data_line()) throw fail("missing mDIM");
  std::istringstream(line) >> p.nvars;
  if (!next_data_line()) throw fail("missing nBLOCK");
  std::size_t nblocks = 0;
  std::istringstream(line) >> nblocks;
  if (!next_data_line()) throw fail("missing bLOCKsTRUCT");
  {
    std::istringstream ss(line);
    for (std::size_t b = 0; b < nblocks; ++b) {
      long dim = 0;
      if (!(ss >> dim)) throw fail("short bLOCKsTRUCT");
      if (dim <= 0) throw fail("only dense PSD blocks (positive sizes) are supported");
      p.blocks.emplace_back(static_cast<Eigen::Index>(dim));
    }
  }
  if (!next_data_line()) throw fail("missing objective");
  p.objective.resize(p.nvars);
  {
    std::istringstream ss(line);
    for (int i = 0; i < p.nvars; ++i) {
      if (!(ss >> p.objective(i))) throw fail("short objective vector");
    }
  }
  std::vector<std::vector<std::vector<Eigen::Triplet<double>>>> entries(
      nblocks, std::vector<std::vector<Eigen::Triplet<double>>>(static_cast<std::size_t>(p.nvars)));
  while (next_data_line()) {
    std::istringstream ss(line);
    int matno = 0;
    std::size_t blk = 0;
    long i = 0;
    long j = 0;
    double v = 0.0;
    if (!(ss >> matno >> blk >> i >> j >> v)) throw fail("bad entry line: " + line);
    if (blk < 1 || blk > nblocks || matno < 0 || matno > p.nvars) throw fail("entry index out of range");
    auto& b = p.blocks[blk - 1];
    if (i < 1 || j < 1 || i > b.dim() || j > b.dim()) throw fail("entry position out of range");
    if (i > j) std::swap(i, j);
    if (matno == 0) {
      b.constant(i - 1, j - 1) = -v;
      b.constant(j - 1, i - 1) = -v;
    } else {
      entries[blk - 1][static_cast<std::size_t>(matno - 1)].emplace_back(i - 1, j - 1, v);
    }
  }
  for (std::size_t b = 0; b < nblocks; ++b) {
    for (int var = 0; var < p.nvars; ++var) {
      const auto& list = entries[b][static_cast<std::size_t>(var)];
      if (!list.empty()) p.blocks[b].add_term(var, list);
    }
  }
  p.validate();
  return p;
}

}  // namespace h2mor::sdp
