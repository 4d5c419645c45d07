#pragma once

#include <vector>

#include "h2mor/linalg.hpp"

namespace h2mor {

/// Strictly proper SISO state-space model x' = A x + B u, y = C x.
class StateSpace {
 public:
  StateSpace(MatR a, VecR b, Eigen::RowVectorXd c);

  const MatR& A() const { return a_; }
  const VecR& B() const { return b_; }
  const Eigen::RowVectorXd& C() const { return c_; }
  Eigen::Index order() const { return a_.rows(); }

  /// max Re(lambda(A)) < -1e-10, evaluated once at construction.
  bool is_stable() const { return stable_; }
  double spectral_abscissa() const { return abscissa_; }

 private:
  MatR a_;
  VecR b_;
  Eigen::RowVectorXd c_;
  double abscissa_;
  bool stable_;
};

inline constexpr double kStabilityMargin = 1e-10;

/// num(s) / den(s) with coefficients in descending powers. Construction
/// strips leading zeros and normalizes den to be monic.
class RationalTF {
 public:
  RationalTF(std::vector<double> num, std::vector<double> den);

  const std::vector<double>& num() const { return num_; }
  const std::vector<double>& den() const { return den_; }
  std::size_t degree() const { return den_.size() - 1; }

  Complex eval(Complex s) const;

 private:
  std::vector<double> num_;
  std::vector<double> den_;
};

/// Horner evaluation of a descending coefficient list.
Complex polyval(const std::vector<double>& coeffs, Complex s);

/// Controllable canonical realization.
StateSpace tf_to_ss(const RationalTF& tf);

/// C (sI - A)^{-1} B.
Complex eval(const StateSpace& sys, Complex s);

/// j-th moment C (sI - A)^{-(j+1)} B. G'(s) = -moment(sys, s, 1).
Complex moment(const StateSpace& sys, Complex s, int j);

/// C P C^T with A P + P A^T + B B^T = 0.
double h2_norm_sq(const StateSpace& sys);

double h2_norm(const StateSpace& sys);

/// Block-diagonal realization of full - red.
StateSpace error_system(const StateSpace& full, const StateSpace& red);

/// ||full - red||_H2 / ||full||_H2.
double relative_h2_error(const StateSpace& full, const StateSpace& red);

/// PBH rank test on every eigenvalue: [A - lambda I, B] and [A - lambda I; C]
/// must both have sigma_min > 1e-8 * sigma_max.
bool is_minimal(const StateSpace& sys);

/// Square-root balanced realization (equal, diagonal Gramians). Same transfer
/// function, much better scaled than companion forms. Throws SingularMatrix
/// when a Hankel singular value is negligible.
StateSpace balanced_realization(const StateSpace& sys);

}  // namespace h2mor
