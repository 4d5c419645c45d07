#include "h2mor/irka.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace h2mor::irka {

ShiftSet random_shifts(int m, std::uint64_t seed) {
  if (m < 1) throw Error(ErrorKind::InvalidArgument, "random_shifts: order must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<Complex> shifts;
  int remaining = m;
  while (remaining > 0) {
    const double re = std::abs(normal(rng));
    if (remaining >= 2 && coin(rng)) {
      const double im = normal(rng);
      shifts.emplace_back(re, im);
      shifts.emplace_back(re, -im);
      remaining -= 2;
    } else {
      shifts.emplace_back(re, 0.0);
      remaining -= 1;
    }
  }
  return ShiftSet::from_shifts(shifts);
}

namespace {

ShiftSet reflect(const std::vector<Complex>& poles) {
  std::vector<Complex> s;
  s.reserve(poles.size());
  for (const auto& v : poles) s.emplace_back(std::abs(v.real()), v.imag());
  return ShiftSet::from_shifts(s);
}

}  // namespace

Result run(const StateSpace& g, int m, const Config& cfg) {
  if (cfg.max_iters < 1) throw Error(ErrorKind::InvalidArgument, "irka: max_iters must be >= 1");
  if (!(cfg.tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "irka: tol must be positive");
  if (m < 1 || m > g.order()) throw Error(ErrorKind::InvalidArgument, "irka: reduced order out of range");
  if (!g.is_stable()) throw Error(ErrorKind::UnstableSystem, "irka: system must be stable");

  ShiftSet current;
  if (cfg.init == Init::Given) {
    if (static_cast<int>(cfg.initial_shifts.size()) != m) {
      throw Error(ErrorKind::InvalidArgument, "irka: number of initial shifts must equal m");
    }
    current = ShiftSet::from_shifts(cfg.initial_shifts);
    for (const auto& s : current.shifts()) {
      if (!(s.real() > 0.0)) throw Error(ErrorKind::InvalidArgument, "irka: initial shifts must lie in Re s > 0");
    }
  } else {
    current = random_shifts(m, cfg.seed);
  }

  std::vector<ShiftSet> trajectory{current};
  ShiftSet best = current;
  double best_step = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const auto model = reduce(g, current);
    ShiftSet next = reflect(mirrored_poles(model.sys));
    const double step = assignment_distance(current.shifts(), next.shifts());
    const double scale = 1.0 + std::max(current.max_abs(), next.max_abs());
    trajectory.push_back(next);
    if (step < best_step) {
      best_step = step;
      best = next;
    }
    current = std::move(next);
    if (step <= cfg.tol * scale) {
      return Result{reduce(g, current), it, true, std::move(trajectory)};
    }
  }
  return Result{reduce(g, best), cfg.max_iters, false, std::move(trajectory)};
}

}  // namespace h2mor::irka
