#pragma once

#include <optional>
#include <vector>

#include "h2mor/krylov.hpp"
#include "h2mor/sdp.hpp"

namespace h2mor::sdr {

/// Constant matrices of the relaxation for reduced order m in {1, 2}.
///
///   m = 1: T4 = A^{-1},            T6 = A^{-1} B B^T A^{-T}
///   m = 2: T4 = [A^{-1}; -A^{-2}], T6 = [A^{-1} B B^T A^{-T}; 0],
///          T7 = [0, A^{-2} B B^T A^{-2T}; 0, 0]
///   T5 = -(T6 T4^T + T4 T6^T + T7 + T7^T),  T2 = -C,  T3 = T6 C^T
struct OperatorSet {
  int m = 1;
  MatR T2;  // 1 x n
  MatR T3;  // mn x 1
  MatR T4;  // mn x n
  MatR T5;  // mn x mn
  MatR T6;  // mn x n
  std::optional<MatR> T7;  // 2n x 2n, m = 2 only

  Eigen::Index n() const { return T4.cols(); }
};

OperatorSet build_operators(const StateSpace& g, int m);

/// Squared H2 norm of the order-m model with poles -s_j that interpolates G
/// at the roots s_j of the polynomial defined by p:
///   m = 1: 2 p1 (C (p1 I - A)^{-1} B)^2
///   m = 2: 2 p1 (p2 u^2 + v^2), u = C Q^{-1} B, v = C Q^{-1} A B,
///          Q = p2 I - p1 A + A^2
double f_eval(const StateSpace& g, const std::vector<double>& p);
double f_eval(const OperatorSet& ops, const StateSpace& g, const std::vector<double>& p);

/// The same quantity through the Delta-hat expansion
///   C Dh T6 C^T + C T6^T Dh^T C^T - C Dh T5 Dh^T C^T,
///   Dh = (I - Delta T4)^{-1} Delta,  Delta = [p1 I, p2 I].
double f_eval_expansion(const OperatorSet& ops, const StateSpace& g, const std::vector<double>& p);

MatR delta(int m, Eigen::Index n, const std::vector<double>& p);
MatR delta_hat(const OperatorSet& ops, const std::vector<double>& p);

/// Variable layout of the LMI problem: x = [gamma^2, vec(S) row-major,
/// vec(G12) row-major (m = 2)].
struct LmiLayout {
  int m;
  Eigen::Index n;
  int nvars() const;
  int s_index(Eigen::Index row, Eigen::Index col) const;
  int g_index(Eigen::Index row, Eigen::Index col) const;
  std::size_t l_block() const { return m == 1 ? 1 : 3; }
};

/// m = 1 blocks: [S + S^T, L]; m = 2 blocks: [S1 + S1^T, S2 + S2^T, G12 + G12^T, L]
/// with L = [gamma^2, T3^T - T2 S^T; T3 - S T2^T, -S T4^T - T4 S^T + T5 - G].
sdp::Problem assemble_lmi(const OperatorSet& ops);

/// Row scaling used when solving the L block by congruence: 1 on the gamma
/// row and ||T4 row i||^{-1/2} on row 1 + i.
VecR lmi_scaling(const OperatorSet& ops);

struct ExtractionConfig {
  double null_rel = 1e-5;    // smallest eigenvalue must be <= null_rel * ||L||_F
  double simplicity = 10.0;  // second-smallest must exceed simplicity * smallest
};

struct Extraction {
  std::vector<double> p;
  double smallest = 0.0;
  double second = 0.0;
  VecR null_vector;  // scaled so its first entry is 1
};

/// Reads p from the null vector [1; X] of L: Z = T4^T X - C^T and, per block
/// b, p_b = (Z . X_b) / (Z . Z).
Extraction extract_shifts(const OperatorSet& ops, const StateSpace& g, const MatR& l_opt,
                          const ExtractionConfig& cfg = {});

struct GridSpec {
  int points = 2000;  // per axis, log-spaced
  double lo = 1e-4;
  double hi = 1e4;
  int refine = 10;    // second pass with refine-times finer spacing around the incumbent
};

struct OracleResult {
  std::vector<double> p;
  double f = 0.0;
};

/// Brute-force maximization of f over a log-spaced positive lattice.
OracleResult oracle_max_f(const OperatorSet& ops, const StateSpace& g, const GridSpec& grid = {});

struct Options {
  sdp::Tolerances sdp_tol;
  const sdp::Engine* engine = nullptr;  // defaults to the interior-point engine
  ExtractionConfig extraction;
  // A stalled SDP whose best iterate is within this factor of every tolerance
  // is still used; the result is flagged sdp_inexact. Set to 1 to require Optimal.
  double inexact_merit = 100.0;
  bool polish = true;       // Newton refinement of the extracted point on the fixed-point map
  bool run_oracle = false;
  GridSpec oracle_grid;
  GridSpec fallback_grid{200, 1e-4, 1e4, 10};
};

struct Solution {
  double gamma_sq = 0.0;
  MatR l_opt;
  sdp::Status sdp_status = sdp::Status::NumericalTrouble;
  int sdp_iterations = 0;
  double sdp_merit = 0.0;
  bool sdp_inexact = false;
  std::vector<double> p_extracted;  // straight from the null vector (or fallback grid)
  std::vector<double> p;            // after refinement
  ShiftSet shifts;
  std::optional<ReducedModel> model;
  double full_h2_sq = 0.0;
  double model_h2_sq = 0.0;
  double relative_error = 0.0;
  double identity_gap = 0.0;        // |E^2 - (|G|^2 - |Gm|^2)| / |G|^2
  double bound_gap = 0.0;           // (gamma^2 - f(p)) / gamma^2
  bool upper_bound_ok = false;
  bool fallback_used = false;
  bool relaxation_gap = false;      // bound or oracle gap above 1e-4 relative
  std::optional<double> exactness_gap;  // gamma^2 - max_grid f, when the oracle ran
  std::optional<OracleResult> oracle;
};

inline constexpr double kExactnessTol = 1e-4;
inline constexpr double kWidePolishMove = 1.0;  // relative move allowed in the second polish pass

/// Realization the relaxation is posed on: balanced when the Gramians allow
/// it, else g unchanged. The SDP depends only on the transfer function.
StateSpace working_realization(const StateSpace& g);

/// The unscaled LMI problem reduce_sdr solves for (g, m).
sdp::Problem relaxation_problem(const StateSpace& g, int m);

/// Full pipeline: operators, LMIs, SDP, null-vector extraction, shifts,
/// projection. Stage errors are rethrown with the stage name attached.
Solution reduce_sdr(const StateSpace& g, int m, const Options& opts = {});

}  // namespace h2mor::sdr
