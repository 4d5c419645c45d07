#pragma once

#include <complex>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "h2mor/error.hpp"

namespace h2mor {

using Complex = std::complex<double>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatR = Mat<double>;
using MatC = Mat<Complex>;
using VecR = Vec<double>;
using VecC = Vec<Complex>;

namespace linalg {

// Thresholds shared by the dense kernels. Callers that need different
// numerics pass their own instance; everything else uses the defaults.
struct Config {
  double pivot_rel = 1e-13;        // |u_ii| below pivot_rel * max|A_ij| is singular
  int eig_sweeps_per_dim = 100;    // QR iteration budget = sweeps * dim
  double stability_margin = 1e-12; // lyap requires max Re(lambda) < -margin
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// Solves A X = rhs by partially pivoted LU. Throws SingularMatrix when a
/// pivot is negligible relative to the largest entry of A.
template <typename Scalar>
Mat<Scalar> solve(const Mat<Scalar>& a, const Mat<Scalar>& rhs, const Config& cfg = {});

/// LU factorization that can be reused for several right-hand sides.
template <typename Scalar>
class LuSolver {
 public:
  explicit LuSolver(const Mat<Scalar>& a, const Config& cfg = {});
  Mat<Scalar> solve(const Mat<Scalar>& rhs) const;
  Mat<Scalar> solve_transposed(const Mat<Scalar>& rhs) const;

 private:
  Eigen::PartialPivLU<Mat<Scalar>> lu_;
};

/// Eigenvalues sorted by (real, imag). For real input, conjugate pairs are
/// exact: the negative-imaginary member is the bitwise conjugate of its mate.
class Spectrum {
 public:
  Spectrum() = default;
  explicit Spectrum(std::vector<Complex> values);

  std::size_t size() const { return values_.size(); }
  const Complex& operator[](std::size_t i) const { return values_[i]; }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }
  const std::vector<Complex>& values() const { return values_; }

  double max_real() const;
  Complex sum() const;
  Complex product() const;

 private:
  std::vector<Complex> values_;
};

Spectrum eig(const MatR& a, const Config& cfg = {});

struct SymmetricEigen {
  VecR values;   // ascending
  MatR vectors;  // columns, orthonormal
};

/// Full symmetric eigendecomposition of (H + H^T) / 2.
SymmetricEigen eig_sym(const MatR& h, const Config& cfg = {});

/// Smallest eigenvalue and a unit eigenvector of (H + H^T) / 2.
std::pair<double, VecR> eig_sym_smallest(const MatR& h, const Config& cfg = {});

/// Solves A P + P A^H + Q = 0 for stable A by a complex Schur
/// (Bartels-Stewart) reduction. The result is Hermitian; for real input it is
/// returned real and symmetric.
template <typename Scalar>
Mat<Scalar> lyap(const Mat<Scalar>& a, const Mat<Scalar>& q, const Config& cfg = {});

/// Singular values in descending order.
VecR singular_values(const MatR& m);

}  // namespace linalg
}  // namespace h2mor
