#include "h2mor/lti.hpp"

#include <cmath>

namespace h2mor {

StateSpace::StateSpace(MatR a, VecR b, Eigen::RowVectorXd c)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
  const auto n = a_.rows();
  if (a_.cols() != n || b_.rows() != n || c_.cols() != n) {
    throw Error(ErrorKind::InvalidArgument, "StateSpace: inconsistent dimensions");
  }
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "StateSpace: empty system");
  if (!a_.allFinite() || !b_.allFinite() || !c_.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "StateSpace: non-finite entries");
  }
  abscissa_ = linalg::eig(a_).max_real();
  stable_ = abscissa_ < -kStabilityMargin;
}

namespace {

std::vector<double> strip_leading_zeros(std::vector<double> c) {
  std::size_t first = 0;
  while (first < c.size() && c[first] == 0.0) ++first;
  c.erase(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(first));
  return c;
}

}  // namespace

RationalTF::RationalTF(std::vector<double> num, std::vector<double> den)
    : num_(strip_leading_zeros(std::move(num))), den_(strip_leading_zeros(std::move(den))) {
  for (double v : num_) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "RationalTF: non-finite numerator");
  }
  for (double v : den_) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "RationalTF: non-finite denominator");
  }
  if (den_.empty()) throw Error(ErrorKind::InvalidArgument, "RationalTF: zero denominator");
  if (num_.empty()) num_ = {0.0};
  if (num_.size() >= den_.size()) {
    throw Error(ErrorKind::ImproperTransferFunction, "deg(num) must be smaller than deg(den)");
  }
  const double lead = den_.front();
  for (auto& v : den_) v /= lead;
  for (auto& v : num_) v /= lead;
}

Complex polyval(const std::vector<double>& coeffs, Complex s) {
  Complex acc{0.0};
  for (double c : coeffs) acc = acc * s + c;
  return acc;
}

Complex RationalTF::eval(Complex s) const { return polyval(num_, s) / polyval(den_, s); }

StateSpace tf_to_ss(const RationalTF& tf) {
  const auto n = static_cast<Eigen::Index>(tf.degree());
  // Companion form: last row holds -a_n ... -a_1, C holds b_n ... b_1.
  MatR a = MatR::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) a(i, i + 1) = 1.0;
  const auto& den = tf.den();
  for (Eigen::Index j = 0; j < n; ++j) a(n - 1, j) = -den[static_cast<std::size_t>(n - j)];
  VecR b = VecR::Zero(n);
  b(n - 1) = 1.0;
  Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(n);
  const auto& num = tf.num();
  for (std::size_t k = 0; k < num.size(); ++k) {
    c(static_cast<Eigen::Index>(k)) = num[num.size() - 1 - k];
  }
  return StateSpace(std::move(a), std::move(b), std::move(c));
}

namespace {

MatC resolvent_operator(const StateSpace& sys, Complex s) {
  MatC m = -sys.A().cast<Complex>();
  m.diagonal().array() += s;
  return m;
}

// Solves (sI - A) x = rhs and rejects the result when the residual exposes a pole.
MatC checked_solve(const Eigen::PartialPivLU<MatC>& lu, const MatC& op, const MatC& rhs) {
  MatC x = lu.solve(rhs);
  const double scale = rhs.norm();
  const double residual = (op * x - rhs).norm();
  if (!x.allFinite() || !(residual <= 1e-6 * scale)) {
    throw Error(ErrorKind::EvalAtPole, "evaluation point coincides with a pole");
  }
  return x;
}

}  // namespace

Complex eval(const StateSpace& sys, Complex s) { return moment(sys, s, 0); }

Complex moment(const StateSpace& sys, Complex s, int j) {
  if (j < 0) throw Error(ErrorKind::InvalidArgument, "moment: negative index");
  const MatC op = resolvent_operator(sys, s);
  Eigen::PartialPivLU<MatC> lu(op);
  MatC x = sys.B().cast<Complex>();
  for (int k = 0; k <= j; ++k) x = checked_solve(lu, op, x);
  return (sys.C().cast<Complex>() * x)(0, 0);
}

double h2_norm_sq(const StateSpace& sys) {
  if (!sys.is_stable()) throw Error(ErrorKind::UnstableSystem, "H2 norm requires a stable system");
  const MatR q = sys.B() * sys.B().transpose();
  const MatR p = linalg::lyap<double>(sys.A(), q);
  const double value = (sys.C() * p * sys.C().transpose())(0, 0);
  return std::max(value, 0.0);
}

double h2_norm(const StateSpace& sys) { return std::sqrt(h2_norm_sq(sys)); }

StateSpace error_system(const StateSpace& full, const StateSpace& red) {
  const auto n = full.order();
  const auto m = red.order();
  MatR a = MatR::Zero(n + m, n + m);
  a.topLeftCorner(n, n) = full.A();
  a.bottomRightCorner(m, m) = red.A();
  VecR b(n + m);
  b << full.B(), red.B();
  Eigen::RowVectorXd c(n + m);
  c << full.C(), -red.C();
  return StateSpace(std::move(a), std::move(b), std::move(c));
}

double relative_h2_error(const StateSpace& full, const StateSpace& red) {
  return std::sqrt(h2_norm_sq(error_system(full, red)) / h2_norm_sq(full));
}

bool is_minimal(const StateSpace& sys) {
  const auto n = sys.order();
  const MatC a = sys.A().cast<Complex>();
  Eigen::ComplexEigenSolver<MatC> solver(a, false);
  if (solver.info() != Eigen::Success) return false;
  const auto ratio_ok = [](const MatC& m) {
    Eigen::BDCSVD<MatC> svd(m);
    const auto& sv = svd.singularValues();
    return sv(sv.size() - 1) > 1e-8 * sv(0);
  };
  for (Eigen::Index k = 0; k < n; ++k) {
    MatC shifted = a;
    shifted.diagonal().array() -= solver.eigenvalues()(k);
    MatC ctrb(n, n + 1);
    ctrb << shifted, sys.B().cast<Complex>();
    MatC obsv(n + 1, n);
    obsv << shifted, sys.C().cast<Complex>();
    if (!ratio_ok(ctrb) || !ratio_ok(obsv)) return false;
  }
  return true;
}

namespace {

// Symmetric square-root factor R with R R^T = M, clamping roundoff negatives.
MatR gramian_factor(const MatR& m) {
  const auto es = linalg::eig_sym(m);
  const VecR root = es.values.cwiseMax(0.0).cwiseSqrt();
  return es.vectors * root.asDiagonal();
}

}  // namespace

StateSpace balanced_realization(const StateSpace& sys) {
  if (!sys.is_stable()) throw Error(ErrorKind::UnstableSystem, "balancing requires a stable system");
  const MatR p = linalg::lyap<double>(sys.A(), sys.B() * sys.B().transpose());
  const MatR q = linalg::lyap<double>(sys.A().transpose(), sys.C().transpose() * sys.C());
  const MatR lp = gramian_factor(p);
  const MatR lq = gramian_factor(q);
  Eigen::JacobiSVD<MatR> svd(lq.transpose() * lp, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VecR& hsv = svd.singularValues();
  if (hsv.size() == 0 || !(hsv(hsv.size() - 1) > 1e-14 * hsv(0))) {
    throw Error(ErrorKind::SingularMatrix, "negligible Hankel singular value; realization is not minimal");
  }
  const VecR scale = hsv.cwiseSqrt().cwiseInverse();
  const MatR t = lp * svd.matrixV() * scale.asDiagonal();
  const MatR t_inv = scale.asDiagonal() * svd.matrixU().transpose() * lq.transpose();
  return StateSpace(t_inv * sys.A() * t, t_inv * sys.B(), sys.C() * t);
}

}  // namespace h2mor
