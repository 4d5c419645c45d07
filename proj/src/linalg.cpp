#include "h2mor/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace h2mor {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::UnstableMatrix: return "UnstableMatrix";
    case ErrorKind::ImproperTransferFunction: return "ImproperTransferFunction";
    case ErrorKind::EvalAtPole: return "EvalAtPole";
    case ErrorKind::UnstableSystem: return "UnstableSystem";
    case ErrorKind::ShiftAtPole: return "ShiftAtPole";
    case ErrorKind::RepeatedShift: return "RepeatedShift";
    case ErrorKind::SingularTm: return "SingularTm";
    case ErrorKind::MaxItersExceeded: return "MaxItersExceeded";
    case ErrorKind::ResolventSingular: return "ResolventSingular";
    case ErrorKind::NullspaceNotFound: return "NullspaceNotFound";
    case ErrorKind::AmbiguousNullspace: return "AmbiguousNullspace";
    case ErrorKind::NegativeShiftCoordinates: return "NegativeShiftCoordinates";
    case ErrorKind::GenerationFailed: return "GenerationFailed";
    case ErrorKind::SdpFailure: return "SdpFailure";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

namespace linalg {

namespace {

template <typename Scalar>
void require_square(const Mat<Scalar>& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorKind::InvalidArgument, std::string(what) + ": matrix is not square");
  }
}

template <typename Scalar>
void check_pivots(const Eigen::PartialPivLU<Mat<Scalar>>& lu, double max_abs, const Config& cfg) {
  const auto& packed = lu.matrixLU();
  const double threshold = cfg.pivot_rel * max_abs;
  for (Eigen::Index i = 0; i < packed.rows(); ++i) {
    const double pivot = std::abs(packed(i, i));
    if (!(pivot > threshold)) {
      throw Error(ErrorKind::SingularMatrix,
                  "pivot " + std::to_string(pivot) + " below threshold " + std::to_string(threshold));
    }
  }
}

}  // namespace

template <typename Scalar>
LuSolver<Scalar>::LuSolver(const Mat<Scalar>& a, const Config& cfg) {
  require_square(a, "LuSolver");
  if (!a.allFinite()) throw Error(ErrorKind::InvalidArgument, "LuSolver: non-finite entries");
  const double max_abs = a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
  if (a.size() > 0 && max_abs == 0.0) throw Error(ErrorKind::SingularMatrix, "zero matrix");
  lu_.compute(a);
  check_pivots(lu_, max_abs, cfg);
}

template <typename Scalar>
Mat<Scalar> LuSolver<Scalar>::solve(const Mat<Scalar>& rhs) const {
  if (rhs.rows() != lu_.rows()) throw Error(ErrorKind::InvalidArgument, "solve: row mismatch");
  return lu_.solve(rhs);
}

template <typename Scalar>
Mat<Scalar> LuSolver<Scalar>::solve_transposed(const Mat<Scalar>& rhs) const {
  if (rhs.rows() != lu_.rows()) throw Error(ErrorKind::InvalidArgument, "solve: row mismatch");
  return lu_.transpose().solve(rhs);
}

template <typename Scalar>
Mat<Scalar> solve(const Mat<Scalar>& a, const Mat<Scalar>& rhs, const Config& cfg) {
  return LuSolver<Scalar>(a, cfg).solve(rhs);
}

template class LuSolver<double>;
template class LuSolver<Complex>;
template MatR solve<double>(const MatR&, const MatR&, const Config&);
template MatC solve<Complex>(const MatC&, const MatC&, const Config&);

Spectrum::Spectrum(std::vector<Complex> values) : values_(std::move(values)) {
  std::sort(values_.begin(), values_.end(), [](const Complex& x, const Complex& y) {
    if (x.real() != y.real()) return x.real() < y.real();
    return x.imag() < y.imag();
  });
}

double Spectrum::max_real() const {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& v : values_) m = std::max(m, v.real());
  return m;
}

Complex Spectrum::sum() const { return std::accumulate(values_.begin(), values_.end(), Complex{0.0}); }

Complex Spectrum::product() const {
  return std::accumulate(values_.begin(), values_.end(), Complex{1.0}, std::multiplies<>());
}

Spectrum eig(const MatR& a, const Config& cfg) {
  require_square(a, "eig");
  if (!a.allFinite()) throw Error(ErrorKind::InvalidArgument, "eig: non-finite entries");
  const auto n = a.rows();
  if (n == 0) return Spectrum{};
  Eigen::EigenSolver<MatR> solver;
  solver.setMaxIterations(static_cast<Eigen::Index>(cfg.eig_sweeps_per_dim) * n);
  solver.compute(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NoConvergence, "eig: QR iteration did not converge");
  }
  std::vector<Complex> values(solver.eigenvalues().data(), solver.eigenvalues().data() + n);

  // Enforce exact conjugate pairing: every value with positive imaginary part
  // claims the nearest unclaimed value in the lower half-plane.
  std::vector<bool> claimed(values.size(), false);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].imag() <= 0.0) continue;
    std::size_t best = values.size();
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < values.size(); ++j) {
      if (j == i || claimed[j] || values[j].imag() >= 0.0) continue;
      const double d = std::abs(values[j] - std::conj(values[i]));
      if (d < best_dist) {
        best_dist = d;
        best = j;
      }
    }
    if (best < values.size()) {
      claimed[best] = true;
      values[best] = std::conj(values[i]);
    }
  }
  return Spectrum(std::move(values));
}

SymmetricEigen eig_sym(const MatR& h, const Config&) {
  require_square(h, "eig_sym");
  if (!h.allFinite()) throw Error(ErrorKind::InvalidArgument, "eig_sym: non-finite entries");
  const MatR sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<MatR> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NoConvergence, "eig_sym: tridiagonal QR did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

std::pair<double, VecR> eig_sym_smallest(const MatR& h, const Config& cfg) {
  if (h.rows() == 0) throw Error(ErrorKind::InvalidArgument, "eig_sym_smallest: empty matrix");
  auto decomposition = eig_sym(h, cfg);
  VecR v = decomposition.vectors.col(0);
  return {decomposition.values(0), v / v.norm()};
}

template <typename Scalar>
Mat<Scalar> lyap(const Mat<Scalar>& a, const Mat<Scalar>& q, const Config& cfg) {
  require_square(a, "lyap");
  require_square(q, "lyap");
  if (a.rows() != q.rows()) throw Error(ErrorKind::InvalidArgument, "lyap: dimension mismatch");
  if (!a.allFinite() || !q.allFinite()) throw Error(ErrorKind::InvalidArgument, "lyap: non-finite entries");
  const auto n = a.rows();
  if (n == 0) return Mat<Scalar>(0, 0);

  const MatC ac = a.template cast<Complex>();
  Eigen::ComplexSchur<MatC> schur;
  schur.setMaxIterations(static_cast<Eigen::Index>(cfg.eig_sweeps_per_dim) * n);
  schur.compute(ac);
  if (schur.info() != Eigen::Success) throw Error(ErrorKind::NoConvergence, "lyap: Schur form failed");
  const MatC& t = schur.matrixT();
  const MatC& u = schur.matrixU();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (t(i, i).real() >= -cfg.stability_margin) {
      throw Error(ErrorKind::UnstableMatrix, "lyap: eigenvalue with real part " + std::to_string(t(i, i).real()));
    }
  }

  // T X + X T^H = -U^H Q U, solved one column at a time from the right.
  const MatC f = u.adjoint() * q.template cast<Complex>() * u;
  MatC x = MatC::Zero(n, n);
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    VecC rhs = -f.col(j);
    for (Eigen::Index k = j + 1; k < n; ++k) rhs -= std::conj(t(j, k)) * x.col(k);
    MatC shifted = t;
    shifted.diagonal().array() += std::conj(t(j, j));
    x.col(j) = shifted.template triangularView<Eigen::Upper>().solve(rhs);
  }
  MatC p = u * x * u.adjoint();
  p = 0.5 * (p + p.adjoint()).eval();
  if constexpr (std::is_same_v<Scalar, double>) {
    return p.real();
  } else {
    return p;
  }
}

template MatR lyap<double>(const MatR&, const MatR&, const Config&);
template MatC lyap<Complex>(const MatC&, const MatC&, const Config&);

VecR singular_values(const MatR& m) {
  if (m.size() == 0) return VecR(0);
  Eigen::JacobiSVD<MatR> svd(m);
  return svd.singularValues();
}

}  // namespace linalg
}  // namespace h2mor
