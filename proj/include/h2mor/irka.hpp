#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "h2mor/krylov.hpp"

namespace h2mor::irka {

enum class Init { Given, Random };

struct Config {
  int max_iters = 200;
  double tol = 1e-8;  // relative distance between consecutive shift sets
  Init init = Init::Random;
  std::vector<Complex> initial_shifts;  // used when init == Given
  std::uint64_t seed = 0;
};

struct Result {
  ReducedModel model;
  int iterations = 0;
  bool converged = false;
  std::vector<ShiftSet> trajectory;  // starts with the initial set
};

/// Conjugate-closed random start: |N(0,1)| real parts; each pair slot becomes
/// a conjugate pair with imaginary part N(0,1) with probability 1/2.
ShiftSet random_shifts(int m, std::uint64_t seed);

/// Fixed-point iteration S <- lambda(-A_m(S)). Shifts that land in the
/// closed left half-plane are reflected to |Re s| + i Im s. A run that hits
/// max_iters returns the iterate with the smallest step, converged = false.
Result run(const StateSpace& g, int m, const Config& cfg);

}  // namespace h2mor::irka
