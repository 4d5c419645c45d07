#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include <Eigen/Sparse>

#include "h2mor/linalg.hpp"

namespace h2mor::sdp {

using SparseSym = Eigen::SparseMatrix<double>;

/// Coefficient of one variable inside one block; stored with both triangles.
struct Coefficient {
  int var;
  SparseSym matrix;
};

/// Affine symmetric block F0 + sum_i x_i F_i, constrained to be PSD.
struct Block {
  MatR constant;
  std::vector<Coefficient> terms;

  explicit Block(Eigen::Index dim) : constant(MatR::Zero(dim, dim)) {}
  Eigen::Index dim() const { return constant.rows(); }

  /// Adds a coefficient given as (row, col, value) triplets. Each off-diagonal
  /// triplet is mirrored, so pass each symmetric pair once.
  void add_term(int var, const std::vector<Eigen::Triplet<double>>& upper);
};

/// minimize c^T x subject to every block being PSD.
struct Problem {
  int nvars = 0;
  VecR objective;
  std::vector<Block> blocks;

  void validate() const;
  MatR evaluate(std::size_t block, const VecR& x) const;

  /// Replaces block F(x) by D F(x) D with D = diag(d), d > 0. The feasible
  /// set and the optimum are unchanged; only the conditioning differs.
  void scale_block(std::size_t block, const VecR& d);
};

enum class Status { Optimal, Infeasible, MaxIters, NumericalTrouble };

const char* to_string(Status s);

struct Tolerances {
  double feas_tol = 1e-8;
  double gap_tol = 1e-7;
  int max_iters = 120;
  double divergence = 1e12;  // |x| or |Y| beyond this is reported Infeasible
  bool verbose = false;      // per-iteration trace on stderr
};

struct Solution {
  VecR x;
  double objective_value = 0.0;
  Status status = Status::NumericalTrouble;
  double gap = 0.0;                  // max(|primal - dual objective|, Z . Y)
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  int iterations = 0;
  double merit = 0.0;                // largest residual-to-tolerance ratio; <= 1 iff Optimal
  std::vector<MatR> dual;            // dual PSD matrix per block
};

/// Interface behind which an external conic solver could be substituted.
class Engine {
 public:
  virtual ~Engine() = default;
  virtual Solution solve(const Problem& problem, const Tolerances& tol) const = 0;
};

/// Infeasible-start primal-dual path-following method (HKM direction,
/// Mehrotra predictor-corrector) over the block-diagonal PSD cone.
class InteriorPointEngine final : public Engine {
 public:
  Solution solve(const Problem& problem, const Tolerances& tol) const override;
};

Solution solve_sdp(const Problem& problem, const Tolerances& tol = {});

/// SDPA sparse text format. The constant block is written with flipped sign,
/// matching SDPA's sum_i x_i F_i - F_0 >= 0 convention.
void write_sdpa(const Problem& problem, std::ostream& out);
Problem read_sdpa(std::istream& in);

}  // namespace h2mor::sdp
