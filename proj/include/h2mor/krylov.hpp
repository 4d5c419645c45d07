#pragma once

#include <optional>
#include <vector>

#include "h2mor/lti.hpp"

namespace h2mor {

/// Conjugate-closed multiset of interpolation points together with its
/// elementary symmetric coordinates p_k (sum, pairwise products, ...).
/// The shifts are exactly the roots of s^m - p_1 s^{m-1} + ... + (-1)^m p_m.
class ShiftSet {
 public:
  ShiftSet() = default;

  /// Roots of the monic polynomial built from p. Both factories throw
  /// RepeatedShift when two points coincide to 1e-10 relative.
  static ShiftSet from_p(std::vector<double> p);
  /// Validates conjugate closure (to 1e-10 relative), snaps mates to exact
  /// conjugates and derives p.
  static ShiftSet from_shifts(const std::vector<Complex>& shifts);

  const std::vector<Complex>& shifts() const { return shifts_; }
  const std::vector<double>& p() const { return p_; }
  std::size_t size() const { return shifts_.size(); }
  double max_abs() const;
  bool has_complex() const;

 private:
  ShiftSet(std::vector<Complex> shifts, std::vector<double> p);

  std::vector<Complex> shifts_;
  std::vector<double> p_;
};

ShiftSet shifts_from_p(const std::vector<double>& p);

/// Elementary symmetric functions e_1..e_m of the values (real parts for
/// conjugate-closed input).
std::vector<double> elementary_symmetric(const std::vector<Complex>& values);

struct Projection {
  MatR V;  // n x m
  MatR W;  // n x m
};

/// Rational Krylov bases V = R [B, AB, ...], W = R^T [C^T, A^T C^T, ...] with
/// R the product of resolvents (s_j I - A)^{-1}. Conjugate pairs are applied
/// as one real quadratic factor A^2 - 2 Re(s) A + |s|^2 I.
Projection build_projection(const StateSpace& g, const ShiftSet& shifts);

struct InterpolationReport {
  std::vector<double> value_residuals;       // |Gm(s) - G(s)| / (1 + |G(s)|)
  std::vector<double> derivative_residuals;  // same for the first moment
  double max_residual = 0.0;
  bool passed = false;
};

inline constexpr double kInterpolationTol = 1e-7;
inline constexpr double kFixedPointTol = 1e-4;

struct ReducedModel {
  StateSpace sys;
  ShiftSet shifts;
  double fixed_point_residual;  // assignment distance between shifts and lambda(-A_m)
  InterpolationReport interpolation;
};

/// Projected model A_m = T^{-1} W^T A V, B_m = T^{-1} W^T B, C_m = C V with
/// T = W^T V. Throws SingularTm when T is numerically singular.
ReducedModel reduce(const StateSpace& g, const ShiftSet& shifts);

InterpolationReport verify_interpolation(const StateSpace& g, const StateSpace& reduced,
                                         const std::vector<Complex>& shifts);
InterpolationReport verify_interpolation(const StateSpace& g, const ReducedModel& model);

/// Greedy nearest-pair matching; returns the largest matched distance.
double assignment_distance(const std::vector<Complex>& a, const std::vector<Complex>& b);

/// lambda(-A) for a reduced model.
std::vector<Complex> mirrored_poles(const StateSpace& reduced);

/// distance(S, lambda(-A_m)) <= tol * (1 + max|s|).
bool is_fixed_point(const ReducedModel& model, double tol = kFixedPointTol);

inline constexpr double kCheckFixedPointTol = 1e-3;  // relative to 1 + max|s|
inline constexpr double kCheckIdentityTol = 1e-6;    // relative to ||G||^2

/// Checks of a reduced model against the full system.
struct ModelCheck {
  std::vector<Complex> shifts;  // as given, or lambda(-A_m) when none were given
  InterpolationReport interpolation;
  double fixed_point_distance = 0.0;
  bool fixed_point_ok = false;
  double identity_gap = 0.0;  // | ||G-Gm||^2 - ||G||^2 + ||Gm||^2 | / ||G||^2
  bool identity_ok = false;
  bool passed() const { return interpolation.passed && fixed_point_ok && identity_ok; }
};

/// Requires Gm to have lower order than G. Throws UnstableSystem when either
/// model is unstable.
ModelCheck check_reduced_model(const StateSpace& g, const StateSpace& gm,
                               const std::optional<std::vector<Complex>>& shifts = std::nullopt);

struct RefinementResult {
  ShiftSet shifts;
  int iterations = 0;
  double residual = 0.0;  // |p(lambda(-A_m(p))) - p| at the returned point
  bool accepted = false;  // false when the input was returned unchanged
};

/// Newton's method on p -> e(lambda(-A_m(p))) - p, the fixed-point map in
/// symmetric coordinates. The result is kept only if Newton converges
/// (scaled residual <= 1e-11) without any p_k moving by more than
/// max_rel_move relative to the start.
RefinementResult refine_fixed_point(const StateSpace& g, const ShiftSet& start, double max_rel_move = 0.05,
                                    int max_iters = 30);

}  // namespace h2mor
