#include "h2mor/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace h2mor {

namespace {

void sort_shifts(std::vector<Complex>& s) {
  std::sort(s.begin(), s.end(), [](const Complex& x, const Complex& y) {
    if (x.real() != y.real()) return x.real() < y.real();
    return x.imag() < y.imag();
  });
}

}  // namespace

ShiftSet::ShiftSet(std::vector<Complex> shifts, std::vector<double> p)
    : shifts_(std::move(shifts)), p_(std::move(p)) {
  sort_shifts(shifts_);
}

double ShiftSet::max_abs() const {
  double m = 0.0;
  for (const auto& s : shifts_) m = std::max(m, std::abs(s));
  return m;
}

bool ShiftSet::has_complex() const {
  return std::any_of(shifts_.begin(), shifts_.end(), [](const Complex& s) { return s.imag() != 0.0; });
}

std::vector<double> elementary_symmetric(const std::vector<Complex>& values) {
  // Coefficients of prod (s - v_j) in descending order; p_k = (-1)^k coef_k.
  std::vector<Complex> coef{Complex{1.0}};
  for (const auto& v : values) {
    std::vector<Complex> next(coef.size() + 1, Complex{0.0});
    for (std::size_t k = 0; k < coef.size(); ++k) {
      next[k] += coef[k];
      next[k + 1] -= v * coef[k];
    }
    coef = std::move(next);
  }
  std::vector<double> p(values.size());
  for (std::size_t k = 1; k < coef.size(); ++k) {
    p[k - 1] = ((k % 2 == 0) ? 1.0 : -1.0) * coef[k].real();
  }
  return p;
}

namespace {

void require_distinct(const std::vector<Complex>& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      const double scale = 1.0 + std::max(std::abs(s[i]), std::abs(s[j]));
      if (std::abs(s[i] - s[j]) <= 1e-10 * scale) {
        throw Error(ErrorKind::RepeatedShift, "interpolation points must be distinct");
      }
    }
  }
}

}  // namespace

ShiftSet ShiftSet::from_p(std::vector<double> p) {
  if (p.empty()) throw Error(ErrorKind::InvalidArgument, "shift coordinates are empty");
  for (double v : p) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "non-finite shift coordinate");
  }
  std::vector<Complex> roots;
  if (p.size() == 1) {
    roots = {Complex{p[0]}};
  } else if (p.size() == 2) {
    const double p1 = p[0];
    const double p2 = p[1];
    const double disc = p1 * p1 - 4.0 * p2;
    if (disc >= 0.0) {
      // Cancellation-free pair: the larger root first, the other from the product.
      const double q = 0.5 * (p1 + std::copysign(std::sqrt(disc), p1));
      if (q == 0.0) {
        roots = {Complex{0.0}, Complex{0.0}};
      } else {
        roots = {Complex{q}, Complex{p2 / q}};
      }
    } else {
      const double re = 0.5 * p1;
      const double im = 0.5 * std::sqrt(-disc);
      roots = {Complex{re, im}, Complex{re, -im}};
    }
  } else {
    const auto m = static_cast<Eigen::Index>(p.size());
    MatR companion = MatR::Zero(m, m);
    for (Eigen::Index i = 1; i < m; ++i) companion(i, i - 1) = 1.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      // s^m = p1 s^{m-1} - p2 s^{m-2} + ...
      companion(0, k) = ((k % 2 == 0) ? 1.0 : -1.0) * p[static_cast<std::size_t>(k)];
    }
    const auto spectrum = linalg::eig(companion);
    roots.assign(spectrum.begin(), spectrum.end());
  }
  require_distinct(roots);
  return ShiftSet(std::move(roots), std::move(p));
}

ShiftSet ShiftSet::from_shifts(const std::vector<Complex>& shifts) {
  if (shifts.empty()) throw Error(ErrorKind::InvalidArgument, "shift set is empty");
  std::vector<Complex> s = shifts;
  for (const auto& v : s) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw Error(ErrorKind::InvalidArgument, "non-finite shift");
    }
  }
  std::vector<bool> used(s.size(), false);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (used[i]) continue;
    const double tol = 1e-10 * (1.0 + std::abs(s[i]));
    if (std::abs(s[i].imag()) <= 1e-14 * (1.0 + std::abs(s[i]))) {
      s[i] = Complex{s[i].real()};
      used[i] = true;
      continue;
    }
    std::size_t mate = s.size();
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j != i && !used[j] && std::abs(s[j] - std::conj(s[i])) <= tol) {
        mate = j;
        break;
      }
    }
    if (mate == s.size()) {
      throw Error(ErrorKind::InvalidArgument, "shift set is not closed under conjugation");
    }
    used[i] = used[mate] = true;
    s[mate] = std::conj(s[i]);
  }
  require_distinct(s);
  auto p = elementary_symmetric(s);
  return ShiftSet(std::move(s), std::move(p));
}

ShiftSet shifts_from_p(const std::vector<double>& p) { return ShiftSet::from_p(p); }


Projection build_projection(const StateSpace& g, const ShiftSet& shifts) {
  const auto n = g.order();
  const auto m = static_cast<Eigen::Index>(shifts.size());
  const MatR& a = g.A();
  const MatR at = a.transpose();

  MatR v(n, m);
  MatR w(n, m);
  v.col(0) = g.B();
  w.col(0) = g.C().transpose();
  for (Eigen::Index k = 1; k < m; ++k) {
    v.col(k) = a * v.col(k - 1);
    w.col(k) = at * w.col(k - 1);
  }

  const MatR identity = MatR::Identity(n, n);
  try {
    for (const auto& s : shifts.shifts()) {
      if (s.imag() < 0.0) continue;  // folded into its mate's quadratic factor
      MatR factor;
      if (s.imag() == 0.0) {
        factor = s.real() * identity - a;
      } else {
        factor = a * a - 2.0 * s.real() * a + std::norm(s) * identity;
      }
      const linalg::LuSolver<double> lu(factor);
      v = lu.solve(v);
      w = lu.solve_transposed(w);
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SingularMatrix) {
      throw Error(ErrorKind::ShiftAtPole, "an interpolation point coincides with an eigenvalue of A");
    }
    throw;
  }
  return {std::move(v), std::move(w)};
}

std::vector<Complex> mirrored_poles(const StateSpace& reduced) {
  const auto spectrum = linalg::eig(-reduced.A());
  return spectrum.values();
}

double assignment_distance(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  std::vector<bool> used_a(a.size(), false);
  std::vector<bool> used_b(b.size(), false);
  double worst = 0.0;
  for (std::size_t round = 0; round < a.size(); ++round) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0;
    std::size_t bj = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (used_a[i]) continue;
      for (std::size_t j = 0; j < b.size(); ++j) {
        if (used_b[j]) continue;
        const double d = std::abs(a[i] - b[j]);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    used_a[bi] = used_b[bj] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

InterpolationReport verify_interpolation(const StateSpace& g, const StateSpace& reduced,
                                         const std::vector<Complex>& shifts) {
  InterpolationReport report;
  const auto residual = [](Complex approx, Complex exact) { return std::abs(approx - exact) / (1.0 + std::abs(exact)); };
  for (const auto& s : shifts) {
    double r0 = std::numeric_limits<double>::infinity();
    double r1 = std::numeric_limits<double>::infinity();
    try {
      r0 = residual(moment(reduced, s, 0), moment(g, s, 0));
      r1 = residual(moment(reduced, s, 1), moment(g, s, 1));
    } catch (const Error&) {
      // leave the residuals infinite: the point is a pole of one of the models
    }
    report.value_residuals.push_back(r0);
    report.derivative_residuals.push_back(r1);
    report.max_residual = std::max({report.max_residual, r0, r1});
  }
  report.passed = report.max_residual <= kInterpolationTol;
  return report;
}

InterpolationReport verify_interpolation(const StateSpace& g, const ReducedModel& model) {
  return verify_interpolation(g, model.sys, model.shifts.shifts());
}

ReducedModel reduce(const StateSpace& g, const ShiftSet& shifts) {
  if (static_cast<Eigen::Index>(shifts.size()) > g.order()) {
    throw Error(ErrorKind::InvalidArgument, "reduced order exceeds the full order");
  }
  const auto [v, w] = build_projection(g, shifts);
  const MatR t = w.transpose() * v;
  const auto sv = linalg::singular_values(t);
  if (!(sv(sv.size() - 1) > 1e-12 * sv(0))) {
    throw Error(ErrorKind::SingularTm, "W^T V is numerically singular for this shift set");
  }
  const linalg::LuSolver<double> lu(t);
  MatR am = lu.solve(w.transpose() * g.A() * v);
  VecR bm = lu.solve(w.transpose() * g.B());
  Eigen::RowVectorXd cm = g.C() * v;
  StateSpace sys(std::move(am), std::move(bm), std::move(cm));
  const double fp = assignment_distance(shifts.shifts(), mirrored_poles(sys));
  auto report = verify_interpolation(g, sys, shifts.shifts());
  return ReducedModel{std::move(sys), shifts, fp, std::move(report)};
}

bool is_fixed_point(const ReducedModel& model, double tol) {
  return model.fixed_point_residual <= tol * (1.0 + model.shifts.max_abs());
}

ModelCheck check_reduced_model(const StateSpace& g, const StateSpace& gm,
                               const std::optional<std::vector<Complex>>& shifts) {
  if (gm.order() >= g.order()) {
    throw Error(ErrorKind::InvalidArgument, "reduced order " + std::to_string(gm.order()) +
                                                " must be below the full order " + std::to_string(g.order()));
  }
  ModelCheck out;
  const auto mirrored = mirrored_poles(gm);
  out.shifts = shifts ? *shifts : mirrored;
  if (out.shifts.size() != static_cast<std::size_t>(gm.order())) {
    throw Error(ErrorKind::InvalidArgument, "number of shifts does not match the reduced order");
  }
  out.interpolation = verify_interpolation(g, gm, out.shifts);
  double smax = 0.0;
  for (const auto& s : out.shifts) smax = std::max(smax, std::abs(s));
  out.fixed_point_distance = assignment_distance(out.shifts, mirrored);
  out.fixed_point_ok = out.fixed_point_distance <= kCheckFixedPointTol * (1.0 + smax);
  const double full = h2_norm_sq(g);
  const double err = h2_norm_sq(error_system(g, gm));
  out.identity_gap = std::abs(err - full + h2_norm_sq(gm)) / full;
  out.identity_ok = out.identity_gap <= kCheckIdentityTol;
  return out;
}

namespace {

VecR fixed_point_map_residual(const StateSpace& g, const VecR& p) {
  const std::vector<double> coords(p.data(), p.data() + p.size());
  const auto model = reduce(g, ShiftSet::from_p(coords));
  const auto mapped = elementary_symmetric(mirrored_poles(model.sys));
  VecR r(p.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) r(k) = mapped[static_cast<std::size_t>(k)] - p(k);
  return r;
}

double scaled_norm(const VecR& r, const VecR& p) {
  double m = 0.0;
  for (Eigen::Index k = 0; k < r.size(); ++k) m = std::max(m, std::abs(r(k)) / (1.0 + std::abs(p(k))));
  return m;
}

constexpr double kRefinedResidual = 1e-11;

}  // namespace

RefinementResult refine_fixed_point(const StateSpace& g, const ShiftSet& start, double max_rel_move, int max_iters) {
  const auto m = static_cast<Eigen::Index>(start.size());
  const VecR p0 = Eigen::Map<const VecR>(start.p().data(), m);
  RefinementResult result{start, 0, std::numeric_limits<double>::infinity(), false};

  VecR p = p0;
  VecR r;
  try {
    r = fixed_point_map_residual(g, p);
  } catch (const Error&) {
    return result;
  }
  double norm = scaled_norm(r, p);
  result.residual = norm;
  const auto within_basin = [&](const VecR& q) {
    for (Eigen::Index k = 0; k < m; ++k) {
      if (!(q(k) > 0.0) || std::abs(q(k) - p0(k)) > max_rel_move * std::abs(p0(k))) return false;
    }
    return true;
  };

  for (int it = 0; it < max_iters && norm > 1e-15; ++it) {
    MatR jac(m, m);
    try {
      for (Eigen::Index k = 0; k < m; ++k) {
        const double h = 1e-7 * (1.0 + std::abs(p(k)));
        VecR plus = p;
        VecR minus = p;
        plus(k) += h;
        minus(k) -= h;
        jac.col(k) = (fixed_point_map_residual(g, plus) - fixed_point_map_residual(g, minus)) / (2.0 * h);
      }
    } catch (const Error&) {
      break;
    }
    const VecR step = jac.fullPivLu().solve(-r);
    if (!step.allFinite()) break;
    bool improved = false;
    for (double damping = 1.0; damping > 1e-3; damping *= 0.5) {
      const VecR trial = p + damping * step;
      if (!within_basin(trial)) continue;
      try {
        const VecR rt = fixed_point_map_residual(g, trial);
        const double nt = scaled_norm(rt, trial);
        if (nt < norm) {
          p = trial;
          r = rt;
          norm = nt;
          improved = true;
          break;
        }
      } catch (const Error&) {
      }
    }
    result.iterations = it + 1;
    if (!improved) break;
  }

  if (norm <= kRefinedResidual) {
    result.shifts = ShiftSet::from_p(std::vector<double>(p.data(), p.data() + m));
    result.residual = norm;
    result.accepted = true;
  }
  return result;
}

}  // namespace h2mor
