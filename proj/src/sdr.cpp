#include "h2mor/sdr.hpp"

#include <cmath>
#include <limits>

namespace h2mor::sdr {

namespace {

void require_order(int m) {
  if (m != 1 && m != 2) throw Error(ErrorKind::InvalidArgument, "the relaxation is available for m = 1 and m = 2 only");
}

void require_coordinates(int m, const std::vector<double>& p) {
  if (static_cast<int>(p.size()) != m) throw Error(ErrorKind::InvalidArgument, "expected one coordinate per reduced state");
  for (double v : p) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "shift coordinates must be positive");
  }
}

}  // namespace

OperatorSet build_operators(const StateSpace& g, int m) {
  require_order(m);
  const auto n = g.order();
  const linalg::LuSolver<double> lu(g.A());
  const MatR identity = MatR::Identity(n, n);
  const MatR a_inv = lu.solve(identity);
  const MatR a_inv_b = lu.solve(g.B());

  OperatorSet ops;
  ops.m = m;
  ops.T2 = -g.C();
  if (m == 1) {
    ops.T4 = a_inv;
    ops.T6 = a_inv_b * a_inv_b.transpose();
    ops.T5 = -(ops.T6 * ops.T4.transpose() + ops.T4 * ops.T6.transpose());
  } else {
    const MatR a_inv2 = lu.solve(a_inv);
    const MatR a_inv2_b = lu.solve(a_inv_b);
    ops.T4.resize(2 * n, n);
    ops.T4 << a_inv, -a_inv2;
    ops.T6 = MatR::Zero(2 * n, n);
    ops.T6.topRows(n) = a_inv_b * a_inv_b.transpose();
    MatR t7 = MatR::Zero(2 * n, 2 * n);
    t7.topRightCorner(n, n) = a_inv2_b * a_inv2_b.transpose();
    ops.T5 = -(ops.T6 * ops.T4.transpose() + ops.T4 * ops.T6.transpose() + t7 + t7.transpose());
    ops.T7 = std::move(t7);
  }
  ops.T5 = 0.5 * (ops.T5 + ops.T5.transpose()).eval();
  ops.T3 = ops.T6 * g.C().transpose();
  return ops;
}

double f_eval(const StateSpace& g, const std::vector<double>& p) {
  const int m = static_cast<int>(p.size());
  require_order(m);
  require_coordinates(m, p);
  const auto n = g.order();
  MatR resolvent = -g.A();
  if (m == 2) resolvent = g.A() * g.A() - p[0] * g.A();
  resolvent.diagonal().array() += (m == 1 ? p[0] : p[1]);
  try {
    const linalg::LuSolver<double> lu(resolvent);
    if (m == 1) {
      const double u = (g.C() * lu.solve(g.B()))(0, 0);
      return 2.0 * p[0] * u * u;
    }
    MatR rhs(n, 2);
    rhs << g.B(), g.A() * g.B();
    const MatR x = lu.solve(rhs);
    const double u = g.C().dot(x.col(0));
    const double v = g.C().dot(x.col(1));
    return 2.0 * p[0] * (p[1] * u * u + v * v);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SingularMatrix) {
      throw Error(ErrorKind::ResolventSingular, "resolvent is singular at the requested coordinates");
    }
    throw;
  }
}

double f_eval(const OperatorSet& ops, const StateSpace& g, const std::vector<double>& p) {
  if (static_cast<int>(p.size()) != ops.m) throw Error(ErrorKind::InvalidArgument, "coordinate count != m");
  return f_eval(g, p);
}

MatR delta(int m, Eigen::Index n, const std::vector<double>& p) {
  require_order(m);
  require_coordinates(m, p);
  MatR d = MatR::Zero(n, m * n);
  for (int b = 0; b < m; ++b) d.middleCols(b * n, n).diagonal().setConstant(p[static_cast<std::size_t>(b)]);
  return d;
}

MatR delta_hat(const OperatorSet& ops, const std::vector<double>& p) {
  const auto n = ops.n();
  const MatR d = delta(ops.m, n, p);
  MatR lhs = -d * ops.T4;
  lhs.diagonal().array() += 1.0;
  try {
    return linalg::solve<double>(lhs, d);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SingularMatrix) throw Error(ErrorKind::ResolventSingular, "I - Delta T4 is singular");
    throw;
  }
}

double f_eval_expansion(const OperatorSet& ops, const StateSpace& g, const std::vector<double>& p) {
  const MatR dh = delta_hat(ops, p);
  const Eigen::RowVectorXd c_dh = g.C() * dh;
  const double cross = c_dh.dot((ops.T6 * g.C().transpose()).col(0));
  const double cross_t = (g.C() * ops.T6.transpose() * dh.transpose() * g.C().transpose())(0, 0);
  const double quad = c_dh * ops.T5 * c_dh.transpose();
  return cross + cross_t - quad;
}

int LmiLayout::nvars() const {
  const auto n2 = static_cast<int>(n * n);
  return 1 + m * n2 + (m == 2 ? n2 : 0);
}

int LmiLayout::s_index(Eigen::Index row, Eigen::Index col) const { return 1 + static_cast<int>(row * n + col); }

int LmiLayout::g_index(Eigen::Index row, Eigen::Index col) const {
  return 1 + static_cast<int>(m * n * n + row * n + col);
}

sdp::Problem assemble_lmi(const OperatorSet& ops) {
  using Triplets = std::vector<Eigen::Triplet<double>>;
  const int m = ops.m;
  const auto n = ops.n();
  const auto mn = m * n;
  const LmiLayout layout{m, n};

  sdp::Problem prob;
  prob.nvars = layout.nvars();
  prob.objective = VecR::Zero(prob.nvars);
  prob.objective(0) = 1.0;

  // Slack positivity: S_b + S_b^T (and G12 + G12^T for m = 2).
  for (int b = 0; b < m; ++b) {
    sdp::Block blk(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      for (Eigen::Index l = 0; l < n; ++l) {
        const double v = (k == l) ? 2.0 : 1.0;
        blk.add_term(layout.s_index(b * n + k, l), Triplets{{static_cast<int>(k), static_cast<int>(l), v}});
      }
    }
    prob.blocks.push_back(std::move(blk));
  }
  if (m == 2) {
    sdp::Block blk(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      for (Eigen::Index l = 0; l < n; ++l) {
        const double v = (k == l) ? 2.0 : 1.0;
        blk.add_term(layout.g_index(k, l), Triplets{{static_cast<int>(k), static_cast<int>(l), v}});
      }
    }
    prob.blocks.push_back(std::move(blk));
  }

  // L = [gamma^2, T3^T - T2 S^T; T3 - S T2^T, -S T4^T - T4 S^T + T5 - G].
  sdp::Block l(mn + 1);
  l.constant.block(1, 0, mn, 1) = ops.T3;
  l.constant.block(0, 1, 1, mn) = ops.T3.transpose();
  l.constant.bottomRightCorner(mn, mn) = ops.T5;
  l.add_term(0, Triplets{{0, 0, 1.0}});
  for (Eigen::Index k = 0; k < mn; ++k) {
    const int row = static_cast<int>(k + 1);
    for (Eigen::Index col = 0; col < n; ++col) {
      // d L / d S_{k,col} = e_row w^T + w e_row^T, w = [-T2(col); -T4(:, col)].
      Triplets t;
      const double w0 = -ops.T2(0, col);
      if (w0 != 0.0) t.emplace_back(row, 0, w0);
      for (Eigen::Index b = 0; b < mn; ++b) {
        const double wb = -ops.T4(b, col);
        if (wb == 0.0) continue;
        const int idx = static_cast<int>(b + 1);
        t.emplace_back(row, idx, idx == row ? 2.0 * wb : wb);
      }
      l.add_term(layout.s_index(k, col), t);
    }
  }
  if (m == 2) {
    for (Eigen::Index k = 0; k < n; ++k) {
      for (Eigen::Index col = 0; col < n; ++col) {
        l.add_term(layout.g_index(k, col), Triplets{{static_cast<int>(1 + k), static_cast<int>(1 + n + col), -1.0}});
      }
    }
  }
  prob.blocks.push_back(std::move(l));
  return prob;
}

VecR lmi_scaling(const OperatorSet& ops) {
  VecR d = VecR::Ones(ops.T4.rows() + 1);
  for (Eigen::Index i = 0; i < ops.T4.rows(); ++i) {
    const double t = ops.T4.row(i).norm();
    if (t > 0.0) d(1 + i) = 1.0 / std::sqrt(t);
  }
  return d;
}

Extraction extract_shifts(const OperatorSet& ops, const StateSpace& g, const MatR& l_opt, const ExtractionConfig& cfg) {
  const auto n = ops.n();
  const auto mn = ops.m * n;
  if (l_opt.rows() != mn + 1 || l_opt.cols() != mn + 1) {
    throw Error(ErrorKind::InvalidArgument, "L has the wrong dimension for this operator set");
  }
  const auto eigs = linalg::eig_sym(l_opt);
  Extraction ex;
  ex.smallest = eigs.values(0);
  ex.second = eigs.values(1);
  const double scale = l_opt.norm();
  if (!(ex.smallest <= cfg.null_rel * scale)) {
    throw Error(ErrorKind::NullspaceNotFound, "smallest eigenvalue of L is " + std::to_string(ex.smallest) +
                                                  " relative to ||L||_F = " + std::to_string(scale));
  }
  const double floor = std::max(std::abs(ex.smallest), 1e-14 * scale);
  if (!(ex.second > cfg.simplicity * floor)) {
    throw Error(ErrorKind::AmbiguousNullspace, "zero eigenvalue of L is not simple");
  }
  VecR v = eigs.vectors.col(0);
  if (std::abs(v(0)) <= 1e-12 * v.norm()) {
    throw Error(ErrorKind::NullspaceNotFound, "null vector of L has a vanishing leading entry");
  }
  v /= v(0);
  const VecR x = v.tail(mn);
  const VecR z = ops.T4.transpose() * x - g.C().transpose();
  const double zz = z.squaredNorm();
  if (!(zz > 0.0)) throw Error(ErrorKind::NullspaceNotFound, "degenerate null vector (Z = 0)");
  for (int b = 0; b < ops.m; ++b) {
    const double pb = z.dot(x.segment(b * n, n)) / zz;
    if (!(pb > 0.0)) {
      throw Error(ErrorKind::NegativeShiftCoordinates, "extracted coordinate p" + std::to_string(b + 1) + " = " +
                                                           std::to_string(pb));
    }
    ex.p.push_back(pb);
  }
  ex.null_vector = std::move(v);
  return ex;
}

namespace {

// Pole-residue form of f for fast lattice scans.
class ModalEvaluator {
 public:
  explicit ModalEvaluator(const StateSpace& g) {
    Eigen::ComplexEigenSolver<MatC> es(g.A().cast<Complex>());
    lambda_ = es.eigenvalues();
    const MatC& x = es.eigenvectors();
    const VecC left = x.partialPivLu().solve(g.B().cast<Complex>());
    const Eigen::RowVectorXcd right = g.C().cast<Complex>() * x;
    residue_ = right.transpose().cwiseProduct(left);
  }

  double operator()(double p1, double p2, int m) const {
    Complex u{0.0};
    Complex v{0.0};
    for (Eigen::Index k = 0; k < lambda_.size(); ++k) {
      const Complex l = lambda_(k);
      if (m == 1) {
        u += residue_(k) / (p1 - l);
      } else {
        const Complex q = p2 - p1 * l + l * l;
        u += residue_(k) / q;
        v += residue_(k) * l / q;
      }
    }
    if (m == 1) return 2.0 * p1 * u.real() * u.real();
    return 2.0 * p1 * (p2 * u.real() * u.real() + v.real() * v.real());
  }

 private:
  VecC lambda_;
  VecC residue_;
};

std::vector<double> log_grid(double lo, double hi, int points) {
  std::vector<double> g(static_cast<std::size_t>(points));
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int i = 0; i < points; ++i) {
    g[static_cast<std::size_t>(i)] = points == 1 ? lo : std::exp(a + (b - a) * i / (points - 1));
  }
  return g;
}

}  // namespace

OracleResult oracle_max_f(const OperatorSet& ops, const StateSpace& g, const GridSpec& grid) {
  if (grid.points < 2 || !(grid.lo > 0.0) || !(grid.hi > grid.lo) || grid.refine < 1) {
    throw Error(ErrorKind::InvalidArgument, "oracle grid must be a positive log lattice");
  }
  const int m = ops.m;
  const ModalEvaluator modal(g);
  const auto coarse = log_grid(grid.lo, grid.hi, grid.points);
  const double log_step = (std::log(grid.hi) - std::log(grid.lo)) / (grid.points - 1);

  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> arg(static_cast<std::size_t>(m), grid.lo);
  const auto consider = [&](double p1, double p2) {
    const double f = modal(p1, p2, m);
    if (std::isfinite(f) && f > best) {
      best = f;
      arg[0] = p1;
      if (m == 2) arg[1] = p2;
    }
  };
  if (m == 1) {
    for (double p1 : coarse) consider(p1, 0.0);
  } else {
    for (double p1 : coarse) {
      for (double p2 : coarse) consider(p1, p2);
    }
  }

  // Second pass: +-2 coarse steps around the incumbent at refine-times finer spacing.
  const int half = 2 * grid.refine;
  const double fine_step = log_step / grid.refine;
  const auto around = [&](double center) {
    std::vector<double> pts;
    for (int k = -half; k <= half; ++k) pts.push_back(center * std::exp(k * fine_step));
    return pts;
  };
  const auto fine1 = around(arg[0]);
  if (m == 1) {
    for (double p1 : fine1) consider(p1, 0.0);
  } else {
    const auto fine2 = around(arg[1]);
    for (double p1 : fine1) {
      for (double p2 : fine2) consider(p1, p2);
    }
  }

  OracleResult out;
  out.p = arg;
  out.f = f_eval(g, arg);
  return out;
}

// Companion forms leave the SDP badly scaled; a balanced realization does not.
StateSpace working_realization(const StateSpace& g) {
  try {
    return balanced_realization(g);
  } catch (const Error&) {
    return g;
  }
}

sdp::Problem relaxation_problem(const StateSpace& g, int m) {
  require_order(m);
  if (m > g.order()) throw Error(ErrorKind::InvalidArgument, "reduced order exceeds the full order");
  return assemble_lmi(build_operators(working_realization(g), m));
}

Solution reduce_sdr(const StateSpace& g, int m, const Options& opts) {
  require_order(m);
  if (m > g.order()) throw Error(ErrorKind::InvalidArgument, "reduced order exceeds the full order");
  if (!g.is_stable()) throw Error(ErrorKind::UnstableSystem, "the relaxation requires a stable system");
  if (!is_minimal(g)) throw Error(ErrorKind::InvalidArgument, "system realization is not minimal");

  const auto staged = [](const char* stage, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      throw with_stage(e, stage);
    }
  };

  const StateSpace work = working_realization(g);

  Solution sol;
  const OperatorSet ops = staged("operators", [&] { return build_operators(work, m); });
  const sdp::Problem problem = staged("lmi", [&] { return assemble_lmi(ops); });
  const LmiLayout layout{m, ops.n()};
  sdp::Problem scaled = problem;
  scaled.scale_block(layout.l_block(), lmi_scaling(ops));
  const sdp::InteriorPointEngine default_engine;
  const sdp::Engine& engine = opts.engine ? *opts.engine : default_engine;
  const sdp::Solution sdp_sol = staged("sdp", [&] { return engine.solve(scaled, opts.sdp_tol); });
  sol.sdp_status = sdp_sol.status;
  sol.sdp_iterations = sdp_sol.iterations;
  sol.sdp_merit = sdp_sol.merit;
  const bool near_optimal = sdp_sol.status != sdp::Status::Infeasible && sdp_sol.x.allFinite() &&
                            sdp_sol.merit <= opts.inexact_merit;
  sol.sdp_inexact = sdp_sol.status != sdp::Status::Optimal && near_optimal;
  if (sdp_sol.status != sdp::Status::Optimal && !near_optimal) {
    throw Error(ErrorKind::SdpFailure, std::string("[sdp] solver stopped with status ") + sdp::to_string(sdp_sol.status));
  }
  sol.gamma_sq = sdp_sol.x(0);
  sol.l_opt = problem.evaluate(layout.l_block(), sdp_sol.x);

  try {
    sol.p_extracted = extract_shifts(ops, work, sol.l_opt, opts.extraction).p;
  } catch (const Error& e) {
    const auto k = e.kind();
    if (k != ErrorKind::NullspaceNotFound && k != ErrorKind::AmbiguousNullspace &&
        k != ErrorKind::NegativeShiftCoordinates) {
      throw with_stage(e, "extract");
    }
    // The relaxation did not certify a point: fall back to a coarse lattice search.
    sol.fallback_used = true;
    const auto coarse = staged("fallback", [&] { return oracle_max_f(ops, work, opts.fallback_grid); });
    sol.p_extracted = coarse.p;
  }

  ShiftSet shifts = staged("shifts", [&] { return ShiftSet::from_p(sol.p_extracted); });
  if (opts.polish) {
    shifts = staged("refine", [&] {
      auto near = refine_fixed_point(g, shifts);
      if (near.accepted) return near.shifts;
      // f can be flat along some p_k, which leaves the extracted point far
      // from the fixed point in that coordinate. A wider search is kept only
      // if it does not lower f.
      const auto wide = refine_fixed_point(g, shifts, kWidePolishMove);
      if (wide.accepted && f_eval(g, wide.shifts.p()) >= f_eval(g, shifts.p())) return wide.shifts;
      return shifts;
    });
  }
  sol.shifts = shifts;
  sol.p = shifts.p();
  sol.model = staged("reduce", [&] { return reduce(g, shifts); });

  sol.full_h2_sq = h2_norm_sq(g);
  sol.model_h2_sq = h2_norm_sq(sol.model->sys);
  const double err_sq = h2_norm_sq(error_system(g, sol.model->sys));
  sol.relative_error = std::sqrt(err_sq / sol.full_h2_sq);
  sol.identity_gap = std::abs(err_sq - (sol.full_h2_sq - sol.model_h2_sq)) / sol.full_h2_sq;
  sol.upper_bound_ok = sol.gamma_sq >= sol.model_h2_sq - 1e-5 * sol.gamma_sq;
  const double f_here = f_eval(g, sol.p);
  sol.bound_gap = (sol.gamma_sq - f_here) / std::max(sol.gamma_sq, std::numeric_limits<double>::min());
  sol.relaxation_gap = sol.bound_gap > kExactnessTol;

  if (opts.run_oracle) {
    sol.oracle = staged("oracle", [&] { return oracle_max_f(ops, work, opts.oracle_grid); });
    sol.exactness_gap = sol.gamma_sq - sol.oracle->f;
    if (*sol.exactness_gap > kExactnessTol * sol.gamma_sq) sol.relaxation_gap = true;
  }
  return sol;
}

}  // namespace h2mor::sdr
