#include "h2mor/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>

namespace h2mor::sdp {

void Block::add_term(int var, const std::vector<Eigen::Triplet<double>>& upper) {
  std::vector<Eigen::Triplet<double>> full;
  full.reserve(2 * upper.size());
  for (const auto& t : upper) {
    full.push_back(t);
    if (t.row() != t.col()) full.emplace_back(t.col(), t.row(), t.value());
  }
  SparseSym m(dim(), dim());
  m.setFromTriplets(full.begin(), full.end());
  m.prune(0.0);
  if (m.nonZeros() > 0) terms.push_back({var, std::move(m)});
}

void Problem::validate() const {
  if (nvars <= 0) throw Error(ErrorKind::InvalidArgument, "sdp: problem has no variables");
  if (objective.size() != nvars) throw Error(ErrorKind::InvalidArgument, "sdp: objective length != nvars");
  if (!objective.allFinite()) throw Error(ErrorKind::InvalidArgument, "sdp: non-finite objective");
  for (const auto& blk : blocks) {
    if (blk.constant.rows() != blk.constant.cols()) throw Error(ErrorKind::InvalidArgument, "sdp: non-square block");
    if (!blk.constant.isApprox(blk.constant.transpose(), 1e-14) && blk.constant.norm() > 0.0) {
      throw Error(ErrorKind::InvalidArgument, "sdp: constant block is not symmetric");
    }
    for (const auto& term : blk.terms) {
      if (term.var < 0 || term.var >= nvars) throw Error(ErrorKind::InvalidArgument, "sdp: variable index out of range");
      if (term.matrix.rows() != blk.dim() || term.matrix.cols() != blk.dim()) {
        throw Error(ErrorKind::InvalidArgument, "sdp: coefficient dimension mismatch");
      }
      const SparseSym t = term.matrix.transpose();
      if ((term.matrix - t).norm() > 1e-14 * (1.0 + term.matrix.norm())) {
        throw Error(ErrorKind::InvalidArgument, "sdp: coefficient matrix is not symmetric");
      }
    }
  }
}

void Problem::scale_block(std::size_t block, const VecR& d) {
  if (block >= blocks.size()) throw Error(ErrorKind::InvalidArgument, "sdp: block index out of range");
  auto& blk = blocks[block];
  if (d.size() != blk.dim() || !(d.minCoeff() > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "sdp: scaling must be positive with one entry per row");
  }
  blk.constant = d.asDiagonal() * blk.constant * d.asDiagonal();
  for (auto& term : blk.terms) {
    for (Eigen::Index k = 0; k < term.matrix.outerSize(); ++k) {
      for (SparseSym::InnerIterator it(term.matrix, k); it; ++it) it.valueRef() *= d(it.row()) * d(it.col());
    }
  }
}

MatR Problem::evaluate(std::size_t block, const VecR& x) const {
  const auto& blk = blocks.at(block);
  MatR out = blk.constant;
  for (const auto& term : blk.terms) {
    const double xv = x(term.var);
    for (Eigen::Index k = 0; k < term.matrix.outerSize(); ++k) {
      for (SparseSym::InnerIterator it(term.matrix, k); it; ++it) out(it.row(), it.col()) += xv * it.value();
    }
  }
  return out;
}

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "Optimal";
    case Status::Infeasible: return "Infeasible";
    case Status::MaxIters: return "MaxIters";
    case Status::NumericalTrouble: return "NumericalTrouble";
  }
  return "Unknown";
}

namespace {

// Every coefficient F_i restricted to one block, written as sum_s lam_s u_s u_s^T.
struct Factored {
  MatR u;
  VecR lam;
  std::vector<int> owner;
};

Factored factor_block(const Block& blk) {
  const auto d = blk.dim();
  std::vector<VecR> vectors;
  std::vector<double> values;
  std::vector<int> owners;
  for (const auto& term : blk.terms) {
    std::vector<Eigen::Index> support;
    std::vector<Eigen::Index> position(static_cast<std::size_t>(d), -1);
    for (Eigen::Index k = 0; k < term.matrix.outerSize(); ++k) {
      for (SparseSym::InnerIterator it(term.matrix, k); it; ++it) {
        if (position[static_cast<std::size_t>(it.row())] < 0) {
          position[static_cast<std::size_t>(it.row())] = static_cast<Eigen::Index>(support.size());
          support.push_back(it.row());
        }
      }
    }
    const auto s = static_cast<Eigen::Index>(support.size());
    MatR local = MatR::Zero(s, s);
    for (Eigen::Index k = 0; k < term.matrix.outerSize(); ++k) {
      for (SparseSym::InnerIterator it(term.matrix, k); it; ++it) {
        local(position[static_cast<std::size_t>(it.row())], position[static_cast<std::size_t>(it.col())]) = it.value();
      }
    }
    Eigen::SelfAdjointEigenSolver<MatR> es(local);
    const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
    for (Eigen::Index e = 0; e < s; ++e) {
      const double lam = es.eigenvalues()(e);
      if (std::abs(lam) <= 1e-13 * scale) continue;
      VecR u = VecR::Zero(d);
      for (Eigen::Index r = 0; r < s; ++r) u(support[static_cast<std::size_t>(r)]) = es.eigenvectors()(r, e);
      vectors.push_back(std::move(u));
      values.push_back(lam);
      owners.push_back(term.var);
    }
  }
  Factored f;
  f.u.resize(d, static_cast<Eigen::Index>(vectors.size()));
  f.lam.resize(static_cast<Eigen::Index>(values.size()));
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    f.u.col(static_cast<Eigen::Index>(k)) = vectors[k];
    f.lam(static_cast<Eigen::Index>(k)) = values[k];
  }
  f.owner = std::move(owners);
  return f;
}

// out[i] += F_i . K for every variable.
void accumulate_inner(const Factored& f, const MatR& k, VecR& out) {
  if (f.u.cols() == 0) return;
  const MatR ku = k * f.u;
  for (Eigen::Index s = 0; s < f.u.cols(); ++s) {
    out(f.owner[static_cast<std::size_t>(s)]) += f.lam(s) * f.u.col(s).dot(ku.col(s));
  }
}

// M_ij += tr(F_i Y F_j Z^{-1}), evaluated in column chunks to bound memory.
void accumulate_schur(const Factored& f, const MatR& y, const MatR& zinv, MatR& m) {
  const auto r = f.u.cols();
  if (r == 0) return;
  const MatR yu = y * f.u;
  const MatR zu = zinv * f.u;
  const MatR ut = f.u.transpose();
  constexpr Eigen::Index kChunk = 256;
  for (Eigen::Index c0 = 0; c0 < r; c0 += kChunk) {
    const auto c = std::min(kChunk, r - c0);
    const MatR p = ut * yu.middleCols(c0, c);
    const MatR q = ut * zu.middleCols(c0, c);
    for (Eigen::Index t = 0; t < c; ++t) {
      const int j = f.owner[static_cast<std::size_t>(c0 + t)];
      const double lt = f.lam(c0 + t);
      for (Eigen::Index s = 0; s < r; ++s) {
        m(f.owner[static_cast<std::size_t>(s)], j) += f.lam(s) * lt * p(s, t) * q(s, t);
      }
    }
  }
}

// Sparse Gram matrix G_ij = sum over blocks of F_i . F_j.
Eigen::SparseMatrix<double> gram_matrix(const Problem& problem) {
  std::vector<Eigen::Triplet<double>> vec_entries;
  Eigen::Index offset = 0;
  for (const auto& blk : problem.blocks) {
    const auto d = blk.dim();
    for (const auto& term : blk.terms) {
      for (Eigen::Index k = 0; k < term.matrix.outerSize(); ++k) {
        for (SparseSym::InnerIterator it(term.matrix, k); it; ++it) {
          vec_entries.emplace_back(offset + it.row() * d + it.col(), term.var, it.value());
        }
      }
    }
    offset += d * d;
  }
  Eigen::SparseMatrix<double> a(offset, problem.nvars);
  a.setFromTriplets(vec_entries.begin(), vec_entries.end());
  return Eigen::SparseMatrix<double>(a.transpose() * a);
}

MatR combine(const Block& blk, const VecR& coeffs) {
  MatR out = MatR::Zero(blk.dim(), blk.dim());
  for (const auto& term : blk.terms) {
    const double cv = coeffs(term.var);
    if (cv == 0.0) continue;
    for (Eigen::Index k = 0; k < term.matrix.outerSize(); ++k) {
      for (SparseSym::InnerIterator it(term.matrix, k); it; ++it) out(it.row(), it.col()) += cv * it.value();
    }
  }
  return out;
}

MatR sym(const MatR& a) { return 0.5 * (a + a.transpose()); }

double inner(const MatR& a, const MatR& b) { return a.cwiseProduct(b).sum(); }

// Largest alpha with X + alpha dX still PSD (infinity when unbounded).
double max_step(const MatR& x, const MatR& dx) {
  Eigen::LLT<MatR> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  const auto l = llt.matrixL();
  const MatR half = l.solve(dx);
  const MatR s = sym(l.solve(half.transpose()));
  Eigen::SelfAdjointEigenSolver<MatR> es(s, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

class SchurSolver {
 public:
  bool factor(MatR m) {
    m_ = std::move(m);
    const double diag = m_.diagonal().cwiseAbs().maxCoeff();
    for (double reg : {0.0, 1e-14, 1e-12, 1e-10, 1e-8}) {
      MatR shifted = m_;
      shifted.diagonal().array() += reg * std::max(diag, 1.0);
      llt_.compute(shifted);
      if (llt_.info() == Eigen::Success) return true;
    }
    return false;
  }

  // Cholesky solve followed by iterative refinement against the unshifted matrix.
  VecR solve(const VecR& rhs) const {
    VecR x = llt_.solve(rhs);
    double last = (rhs - m_ * x).norm();
    for (int k = 0; k < 3 && last > 0.0; ++k) {
      const VecR cand = x + llt_.solve(rhs - m_ * x);
      const double res = (rhs - m_ * cand).norm();
      if (!(res < last)) break;
      x = cand;
      last = res;
    }
    return x;
  }

 private:
  MatR m_;
  Eigen::LLT<MatR> llt_;
};

}  // namespace

Solution InteriorPointEngine::solve(const Problem& problem, const Tolerances& tol) const {
  problem.validate();
  const int nv = problem.nvars;
  const auto nb = problem.blocks.size();
  const VecR& c = problem.objective;

  std::vector<Factored> factored;
  factored.reserve(nb);
  double total_dim = 0.0;
  double f0_norm = 0.0;
  for (const auto& blk : problem.blocks) {
    factored.push_back(factor_block(blk));
    total_dim += static_cast<double>(blk.dim());
    f0_norm = std::max(f0_norm, blk.constant.norm());
  }
  const double c_norm = c.norm();


  // Standard infeasible starting point (identity multiples scaled by data).
  VecR x = VecR::Zero(nv);
  std::vector<MatR> z(nb);
  std::vector<MatR> y(nb);
  {
    std::vector<double> coef_norm(static_cast<std::size_t>(nv) * nb, 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
      const auto& blk = problem.blocks[b];
      const double d = static_cast<double>(blk.dim());
      double zeta = std::max({10.0, std::sqrt(d), blk.constant.norm()});
      double eta = std::max(10.0, std::sqrt(d));
      std::vector<double> norms(static_cast<std::size_t>(nv), 0.0);
      for (const auto& term : blk.terms) norms[static_cast<std::size_t>(term.var)] += term.matrix.squaredNorm();
      for (int i = 0; i < nv; ++i) {
        const double fn = std::sqrt(norms[static_cast<std::size_t>(i)]);
        zeta = std::max(zeta, fn);
        eta = std::max(eta, std::sqrt(d) * (1.0 + std::abs(c(i))) / (1.0 + fn));
      }
      z[b] = zeta * MatR::Identity(blk.dim(), blk.dim());
      y[b] = eta * MatR::Identity(blk.dim(), blk.dim());
    }
  }

  // Dual quality is judged on Y projected onto {F_i . Y = c_i} (least
  // Frobenius-norm correction); what is left is the PSD violation of the
  // projection. Near the optimum Y dZ Z^{-1} loses the equality to roundoff.
  const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> gram(gram_matrix(problem));
  if (gram.info() != Eigen::Success) throw Error(ErrorKind::InvalidArgument, "sdp: coefficient matrices are linearly dependent");

  Solution sol;
  sol.status = Status::MaxIters;
  SchurSolver schur;
  std::vector<MatR> zinv(nb), rd(nb), dz(nb), dy(nb), dz_aff(nb), dy_aff(nb);

  struct Snapshot {
    double merit = std::numeric_limits<double>::infinity();
    VecR x;
    std::vector<MatR> y;
    double gap = 0.0, pinf = 0.0, dinf = 0.0;
    int iter = 0;
  } best;
  int since_improvement = 0;

  for (int iter = 0; iter <= tol.max_iters; ++iter) {
    // Residuals and convergence measures.
    VecR fy = VecR::Zero(nv);
    double complementarity = 0.0;
    double rd_norm = 0.0;
    double y_norm = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      accumulate_inner(factored[b], y[b], fy);
      complementarity += inner(z[b], y[b]);
      rd[b] = problem.blocks[b].constant + combine(problem.blocks[b], x) - z[b];
      rd_norm = std::max(rd_norm, rd[b].norm());
      y_norm = std::max(y_norm, y[b].norm());
    }
    const VecR rp = c - fy;
    const double primal_obj = c.dot(x);
    const double mu = complementarity / total_dim;

    const VecR w = gram.solve(rp);
    std::vector<MatR> y_clean(nb);
    double dual_obj = 0.0;
    double psd_violation = 0.0;
    VecR fy_clean = VecR::Zero(nv);
    for (std::size_t b = 0; b < nb; ++b) {
      y_clean[b] = y[b] + combine(problem.blocks[b], w);
      accumulate_inner(factored[b], y_clean[b], fy_clean);
      dual_obj -= inner(problem.blocks[b].constant, y_clean[b]);
      if (Eigen::LLT<MatR>(y_clean[b]).info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<MatR> es(y_clean[b], Eigen::EigenvaluesOnly);
        psd_violation = std::max(psd_violation, -es.eigenvalues()(0));
      }
    }
    const double pinf = rd_norm / (1.0 + f0_norm);
    const double dinf = std::max((c - fy_clean).norm() / (1.0 + c_norm), psd_violation / (1.0 + y_norm));
    const double gap = std::max(std::abs(primal_obj - dual_obj), complementarity);
    const double merit = std::max({pinf / tol.feas_tol, dinf / tol.feas_tol, gap / (tol.gap_tol * (1.0 + std::abs(primal_obj)))});
    if (tol.verbose) {
      std::fprintf(stderr, "%3d pobj=%.12g dobj=%.12g pinf=%.2e dinf=%.2e (raw %.2e) mu=%.2e\n", iter, primal_obj, dual_obj,
                   pinf, dinf, rp.norm() / (1.0 + c_norm), mu);
    }
    if (merit < 0.9 * best.merit) since_improvement = 0;
    else ++since_improvement;
    if (merit < best.merit) best = Snapshot{merit, x, y_clean, gap, pinf, dinf, iter};

    sol.iterations = iter;
    if (merit <= 1.0) break;
    if (iter == tol.max_iters) break;
    if (since_improvement >= 10) {
      sol.status = Status::NumericalTrouble;
      break;
    }
    if (x.cwiseAbs().maxCoeff() > tol.divergence || y_norm > tol.divergence) {
      sol.status = Status::Infeasible;
      break;
    }

    // Schur complement of the HKM direction.
    MatR m = MatR::Zero(nv, nv);
    bool ok = true;
    for (std::size_t b = 0; b < nb && ok; ++b) {
      Eigen::LLT<MatR> llt(z[b]);
      if (llt.info() != Eigen::Success) {
        ok = false;
        break;
      }
      zinv[b] = llt.solve(MatR::Identity(z[b].rows(), z[b].cols()));
      zinv[b] = sym(zinv[b]);
      accumulate_schur(factored[b], y[b], zinv[b], m);
    }
    if (!ok || !m.allFinite() || !schur.factor(sym(m))) {
      if (tol.verbose) std::fprintf(stderr, "schur factorization failed\n");
      sol.status = Status::NumericalTrouble;
      break;
    }

    // Returns F_i . (target) - rp_i where target_b = base_b - Y Rd Zinv.
    const auto direction = [&](const std::vector<MatR>& base, std::vector<MatR>& ddz, std::vector<MatR>& ddy) {
      VecR rhs = VecR::Zero(nv);
      for (std::size_t b = 0; b < nb; ++b) accumulate_inner(factored[b], base[b] - y[b] * rd[b] * zinv[b], rhs);
      rhs -= rp;
      VecR dx = schur.solve(rhs);
      for (std::size_t b = 0; b < nb; ++b) {
        ddz[b] = combine(problem.blocks[b], dx) + rd[b];
        ddy[b] = sym(base[b] - y[b] * ddz[b] * zinv[b]);
      }
      // Refine against the true residual of F . dY = rp.
      for (int pass = 0; pass < 2; ++pass) {
        VecR fdy = VecR::Zero(nv);
        for (std::size_t b = 0; b < nb; ++b) accumulate_inner(factored[b], ddy[b], fdy);
        const VecR w = schur.solve(VecR(fdy - rp));
        dx += w;
        for (std::size_t b = 0; b < nb; ++b) {
          const MatR fw = combine(problem.blocks[b], w);
          ddz[b] += fw;
          ddy[b] -= sym(y[b] * fw * zinv[b]);
        }
      }
      return dx;
    };
    const auto steps = [&](const std::vector<MatR>& ddz, const std::vector<MatR>& ddy) {
      double ap = std::numeric_limits<double>::infinity();
      double ad = std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < nb; ++b) {
        ap = std::min(ap, max_step(z[b], ddz[b]));
        ad = std::min(ad, max_step(y[b], ddy[b]));
      }
      return std::pair{ap, ad};
    };

    // Predictor.
    std::vector<MatR> base(nb);
    for (std::size_t b = 0; b < nb; ++b) base[b] = -y[b];
    direction(base, dz_aff, dy_aff);
    auto [ap_aff, ad_aff] = steps(dz_aff, dy_aff);
    ap_aff = std::min(1.0, ap_aff);
    ad_aff = std::min(1.0, ad_aff);
    double mu_aff = 0.0;
    for (std::size_t b = 0; b < nb; ++b) mu_aff += inner(z[b] + ap_aff * dz_aff[b], y[b] + ad_aff * dy_aff[b]);
    mu_aff /= total_dim;
    const double ratio = std::clamp(mu_aff / mu, 0.0, 1.0);
    const double sigma = ratio * ratio * ratio;

    // Corrector.
    for (std::size_t b = 0; b < nb; ++b) {
      base[b] = sigma * mu * zinv[b] - y[b] - dy_aff[b] * dz_aff[b] * zinv[b];
    }
    VecR dx = direction(base, dz, dy);
    auto [ap, ad] = steps(dz, dy);

    // Short corrector steps mean the iterate has drifted off the central
    // path; a pure centering step recovers it.
    if (std::min(ap, ad) < 0.2) {
      std::vector<MatR> cz(nb), cy(nb);
      for (std::size_t b = 0; b < nb; ++b) base[b] = mu * zinv[b] - y[b];
      VecR cx = direction(base, cz, cy);
      const auto [cap, cad] = steps(cz, cy);
      if (cx.allFinite() && std::min(cap, cad) > std::min(ap, ad)) {
        dx = std::move(cx);
        dz = std::move(cz);
        dy = std::move(cy);
        ap = cap;
        ad = cad;
      }
    }
    const double frac = (ap_aff > 0.9 && ad_aff > 0.9) ? 0.98 : 0.95;
    ap = std::min(1.0, frac * ap);
    ad = std::min(1.0, frac * ad);
    if (!dx.allFinite() || (ap < 1e-12 && ad < 1e-12)) {
      if (tol.verbose) std::fprintf(stderr, "step length collapsed\n");
      sol.status = Status::NumericalTrouble;
      break;
    }
    if (tol.verbose) std::fprintf(stderr, "    sigma=%.2e ap=%.2e ad=%.2e\n", sigma, ap, ad);
    x += ap * dx;
    for (std::size_t b = 0; b < nb; ++b) {
      z[b] += ap * dz[b];
      y[b] += ad * dy[b];
    }
  }

  if (best.merit <= 1.0) sol.status = Status::Optimal;
  if (best.x.size() == 0) {
    best.x = x;
    best.y = y;
  }
  sol.x = std::move(best.x);
  sol.objective_value = c.dot(sol.x);
  sol.dual = std::move(best.y);
  sol.gap = best.gap;
  sol.primal_infeasibility = best.pinf;
  sol.dual_infeasibility = best.dinf;
  sol.merit = best.merit;
  return sol;
}

Solution solve_sdp(const Problem& problem, const Tolerances& tol) {
  return InteriorPointEngine{}.solve(problem, tol);
}

}  // namespace h2mor::sdp
