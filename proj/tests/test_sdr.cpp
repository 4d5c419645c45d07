#include <doctest.h>

#include <cmath>
#include <random>

#include "h2mor/sdr.hpp"
#include "support.hpp"

using namespace h2mor;
using h2mor::test::builtin;
using h2mor::test::thrown_kind;

namespace {

bool near_set(const std::vector<Complex>& got, const std::vector<Complex>& want, double rel) {
  double scale = 0.0;
  for (const auto& w : want) scale = std::max(scale, std::abs(w));
  return assignment_distance(got, want) <= rel * scale;
}

// ||Gm||^2 of the order-2 interpolant with poles -s1, -s2, from the values
// g_i = G(s_i) alone.
double f_real_pair(double s1, double s2, double g1, double g2) {
  const double a = s1 * g1 - s2 * g2, d = g1 - g2;
  return 2.0 * (s1 + s2) * (a * a + s1 * s2 * d * d) / ((s2 - s1) * (s2 - s1));
}

double f_complex_pair(Complex s1, Complex s2, Complex g1, Complex g2) {
  const Complex num = std::norm(s1 * g1 - s2 * g2) + s1 * s2 * std::norm(g1 - g2);
  return (-2.0 * (s1 + s2) * num / ((s2 - s1) * (s2 - s1))).real();
}

double f_general(const StateSpace& g, double p1, double p2) {
  const auto n = g.order();
  const MatR& a = g.A();
  const MatR a2 = p2 * MatR::Identity(n, n) - p1 * a + a * a;
  const MatR bb = g.B() * g.B().transpose();
  const MatR mid = p1 * p2 * bb + p1 * a * bb * a.transpose();
  const MatR left = a2.transpose().fullPivLu().solve(g.C().transpose()).transpose();
  return 2.0 * (left * mid * left.transpose())(0, 0);
}

Complex tf_value(const RationalTF& tf, Complex s) { return polyval(tf.num(), s) / polyval(tf.den(), s); }

}  // namespace

TEST_SUITE("sdr") {

TEST_CASE("operators of a first order system") {
  const auto ops = sdr::build_operators(h2mor::test::first_order(), 1);
  CHECK(ops.T4(0, 0) == doctest::Approx(-1.0));
  CHECK(ops.T6(0, 0) == doctest::Approx(1.0));
  CHECK(ops.T5(0, 0) == doctest::Approx(2.0));
  CHECK(ops.T2(0, 0) == doctest::Approx(-1.0));
  CHECK(ops.T3(0, 0) == doctest::Approx(1.0));
  CHECK_FALSE(ops.T7.has_value());
}

TEST_CASE("operator shapes and identities") {
  for (const char* name : {"G1", "G2", "G3", "G4"}) {
    const auto& g = builtin(name).system;
    const auto n = g.order();
    for (int m : {1, 2}) {
      const auto ops = sdr::build_operators(g, m);
      CHECK(ops.T4.rows() == m * n);
      CHECK(ops.T4.cols() == n);
      CHECK(ops.T5.rows() == m * n);
      CHECK((ops.T5 - ops.T5.transpose()).norm() <= 1e-12 * ops.T5.norm());
      CHECK((ops.T3 - ops.T6 * g.C().transpose()).norm() <= 1e-12 * std::max(1.0, ops.T3.norm()));
      CHECK((ops.T2 + g.C()).norm() == 0.0);
      const MatR ainv = g.A().inverse();
      CHECK((ops.T4.topRows(n) - ainv).norm() <= 1e-10 * ainv.norm());
      if (m == 2) {
        REQUIRE(ops.T7.has_value());
        CHECK(ops.T7->rows() == 2 * n);
        CHECK((ops.T4.bottomRows(n) + ainv * ainv).norm() <= 1e-10 * (ainv * ainv).norm());
      }
    }
  }
  CHECK(thrown_kind([] { sdr::build_operators(builtin("G1").system, 3); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("LMI of a first order system") {
  const auto prob = sdr::assemble_lmi(sdr::build_operators(h2mor::test::first_order(), 1));
  CHECK(prob.nvars == 2);
  REQUIRE(prob.blocks.size() == 2);
  const sdr::LmiLayout layout{1, 1};
  VecR x(2);
  x << 0.7, 0.3;
  MatR expect(2, 2);
  expect << 0.7, 1.3, 1.3, 2.6;
  CHECK((prob.evaluate(layout.l_block(), x) - expect).norm() < 1e-14);
  CHECK(prob.evaluate(0, x)(0, 0) == doctest::Approx(0.6));
  CHECK(prob.objective(0) == 1.0);
}

TEST_CASE("LMI dimensions for a fourth order system") {
  const auto& g = builtin("G1").system;
  const auto p1 = sdr::assemble_lmi(sdr::build_operators(g, 1));
  CHECK(p1.nvars == 17);
  CHECK(p1.blocks[1].dim() == 5);
  const auto p2 = sdr::assemble_lmi(sdr::build_operators(g, 2));
  CHECK(p2.nvars == 49);
  CHECK(p2.blocks.size() == 4);
  CHECK(p2.blocks[3].dim() == 9);
}

TEST_CASE("f of a first order system") {
  const auto g = h2mor::test::first_order();
  const auto ops = sdr::build_operators(g, 1);
  for (double p : {0.01, 0.5, 1.0, 3.0, 100.0}) {
    CHECK(sdr::f_eval(g, {p}) == doctest::Approx(2 * p / ((1 + p) * (1 + p))).epsilon(1e-13));
    CHECK(sdr::f_eval(ops, g, {p}) == doctest::Approx(2 * p / ((1 + p) * (1 + p))).epsilon(1e-13));
  }
  CHECK(sdr::f_eval(g, {1.0}) == doctest::Approx(h2_norm_sq(g)));
  CHECK(thrown_kind([&] { sdr::f_eval(g, {-1.0}); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("f equals the norm of the interpolating model") {
  const auto& g = builtin("G1").system;
  const auto model = reduce(g, shifts_from_p({0.5762}));
  CHECK(sdr::f_eval(g, {0.5762}) == doctest::Approx(h2_norm_sq(model.sys)).epsilon(1e-9));
  const auto model2 = reduce(g, shifts_from_p({5.3474, 4.8386}));
  CHECK(sdr::f_eval(g, {5.3474, 4.8386}) == doctest::Approx(h2_norm_sq(model2.sys)).epsilon(1e-9));
}

TEST_CASE("direct and expanded f agree") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(std::log(0.05), std::log(50.0));
  for (const char* name : {"G1", "G2", "G3", "G4"}) {
    const auto& g = builtin(name).system;
    for (int m : {1, 2}) {
      const auto ops = sdr::build_operators(g, m);
      for (int k = 0; k < 20; ++k) {
        std::vector<double> p;
        for (int j = 0; j < m; ++j) p.push_back(std::exp(U(rng)));
        const double direct = sdr::f_eval(ops, g, p);
        const double expanded = sdr::f_eval_expansion(ops, g, p);
        CHECK(std::abs(direct - expanded) <= 1e-9 * std::abs(direct));
      }
    }
  }
}

TEST_CASE("f matches the closed forms built from G at the two shifts") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> U(std::log(0.1), std::log(30.0));
  std::uniform_real_distribution<double> phase(0.05, 1.5);
  for (const char* name : {"G1", "G2", "G3", "G4"}) {
    const auto& c = builtin(name);
    for (int k = 0; k < 10; ++k) {
      const double s1 = std::exp(U(rng)), s2 = std::exp(U(rng));
      const double p1 = s1 + s2, p2 = s1 * s2;
      const double real_form = f_real_pair(s1, s2, tf_value(c.tf, s1).real(), tf_value(c.tf, s2).real());
      CHECK(std::abs(sdr::f_eval(c.system, {p1, p2}) - real_form) <= 1e-9 * std::abs(real_form));
      CHECK(std::abs(f_general(c.system, p1, p2) - real_form) <= 1e-9 * std::abs(real_form));

      const Complex z = std::polar(std::exp(U(rng)), phase(rng));
      const Complex zc = std::conj(z);
      const double complex_form = f_complex_pair(z, zc, tf_value(c.tf, z), tf_value(c.tf, zc));
      const double q1 = 2 * z.real(), q2 = std::norm(z);
      CHECK(std::abs(sdr::f_eval(c.system, {q1, q2}) - complex_form) <= 1e-9 * std::abs(complex_form));
    }
  }
}

TEST_CASE("complex branch on the published G2 pair") {
  const auto& c = builtin("G2");
  const Complex s(0.6935, 3.2772);
  const double oracle = f_complex_pair(s, std::conj(s), tf_value(c.tf, s), tf_value(c.tf, std::conj(s)));
  const double f = sdr::f_eval(c.system, {2 * s.real(), std::norm(s)});
  CHECK(std::abs(f - oracle) <= 1e-9 * std::abs(oracle));
}

TEST_CASE("push-through identity") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> U(std::log(0.05), std::log(50.0));
  const auto& g = builtin("G4").system;
  for (int m : {1, 2}) {
    const auto ops = sdr::build_operators(g, m);
    for (int k = 0; k < 20; ++k) {
      std::vector<double> p;
      for (int j = 0; j < m; ++j) p.push_back(std::exp(U(rng)));
      const MatR d = sdr::delta(m, g.order(), p);
      const MatR id = MatR::Identity(m * g.order(), m * g.order());
      const MatR left = d * (id - ops.T4 * d).inverse();
      const MatR right = sdr::delta_hat(ops, p);
      CHECK((left - right).norm() <= 1e-10 * std::max(1.0, right.norm()));
    }
  }
}

TEST_CASE("L at the optimum is singular") {
  const auto& g = builtin("G1").system;
  const auto sol = sdr::reduce_sdr(g, 1);
  const double smallest = linalg::eig_sym_smallest(sol.l_opt).first;
  CHECK(smallest <= 1e-6 * sol.l_opt.norm());
}

TEST_CASE("reduce_sdr on the built-in examples") {
  struct Case {
    const char* name;
    int m;
    std::vector<Complex> shifts;
    double error;
  };
  const std::vector<Case> cases{{"G1", 1, {0.5762}, 0.48175}, {"G2", 1, {2.1364}, 0.93389},
                                {"G4", 2, {0.2030, 1.2052}, 0.32707}};
  for (const auto& c : cases) {
    const auto& g = builtin(c.name).system;
    const auto sol = sdr::reduce_sdr(g, c.m);
    INFO(c.name << " m=" << c.m);
    REQUIRE(sol.model.has_value());
    CHECK(near_set(sol.shifts.shifts(), c.shifts, 1e-2));
    CHECK(std::abs(sol.relative_error - c.error) <= 1e-3);
    CHECK(std::abs(sol.relative_error - relative_h2_error(g, sol.model->sys)) <= 1e-9);
    CHECK(sol.upper_bound_ok);
    CHECK(sol.identity_gap <= 1e-6);
    CHECK(sol.model->interpolation.passed);
    CHECK(sol.gamma_sq >= sol.model_h2_sq - 1e-5 * sol.gamma_sq);
    CHECK_FALSE(sol.relaxation_gap);
  }
}

TEST_CASE("extraction before polishing is already close") {
  const auto g3 = sdr::reduce_sdr(builtin("G3").system, 2);
  CHECK(near_set(shifts_from_p(g3.p_extracted).shifts(), {0.7051, 39.2818}, 1e-2));
  const auto g2 = sdr::reduce_sdr(builtin("G2").system, 2);
  const auto s = shifts_from_p(g2.p_extracted).shifts();
  CHECK(assignment_distance(s, {Complex(0.6935, 3.2772), Complex(0.6935, -3.2772)}) <= 1e-2);
}

TEST_CASE("self reduction of a first order system") {
  const auto g = h2mor::test::first_order();
  const auto sol = sdr::reduce_sdr(g, 1);
  CHECK(std::abs(sol.shifts.shifts()[0] - 1.0) <= 1e-4);
  CHECK(sol.relative_error <= 1e-3);
  CHECK(sol.gamma_sq == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("grid oracle on a first order system") {
  const auto g = h2mor::test::first_order();
  const auto r = sdr::oracle_max_f(sdr::build_operators(g, 1), g);
  CHECK(r.p[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(r.f == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("relaxation is exact and an upper bound at m = 1") {
  for (const char* name : {"G1", "G2", "G3", "G4"}) {
    const auto& g = builtin(name).system;
    sdr::Options opts;
    opts.run_oracle = true;
    const auto sol = sdr::reduce_sdr(g, 1, opts);
    REQUIRE(sol.oracle.has_value());
    INFO(name << " gamma^2=" << sol.gamma_sq << " grid max=" << sol.oracle->f);
    CHECK(sol.oracle->f <= sol.gamma_sq * (1.0 + 1e-7));
    CHECK(sol.gamma_sq - sol.oracle->f <= 1e-4 * sol.gamma_sq);
  }
}

TEST_CASE("global optimum of G3 at m = 2 beats the local fixed point") {
  const auto& g = builtin("G3").system;
  const double global = sdr::f_eval(g, {0.7051 + 39.2818, 0.7051 * 39.2818});
  const double local = sdr::f_eval(g, {2 * 0.8261, 0.8261 * 0.8261 + 0.6577 * 0.6577});
  CHECK(global > local);
  sdr::Options opts;
  opts.oracle_grid.points = 400;
  opts.run_oracle = true;
  const auto sol = sdr::reduce_sdr(g, 2, opts);
  CHECK(near_set(sol.shifts.shifts(), {0.7051, 39.2818}, 1e-2));
  REQUIRE(sol.oracle.has_value());
  CHECK(sol.oracle->f > local);
  CHECK(near_set(shifts_from_p(sol.oracle->p).shifts(), {0.7051, 39.2818}, 2e-2));
}

TEST_CASE("pipeline preconditions") {
  CHECK(thrown_kind([] { sdr::reduce_sdr(builtin("G1").system, 3); }) == ErrorKind::InvalidArgument);
  CHECK(thrown_kind([] { sdr::reduce_sdr(h2mor::test::first_order(), 2); }) == ErrorKind::InvalidArgument);
  const StateSpace unstable(MatR::Identity(1, 1), VecR::Ones(1), Eigen::RowVectorXd::Ones(1));
  CHECK(thrown_kind([&] { sdr::reduce_sdr(unstable, 1); }) == ErrorKind::UnstableSystem);
  CHECK(thrown_kind([] { sdr::reduce_sdr(tf_to_ss(RationalTF({1, 1}, {1, 3, 2})), 1); }) ==
        ErrorKind::InvalidArgument);
}

TEST_CASE("extraction rejects a nonsingular L") {
  const auto g = h2mor::test::first_order();
  const auto ops = sdr::build_operators(g, 1);
  CHECK(thrown_kind([&] { sdr::extract_shifts(ops, g, MatR::Identity(2, 2)); }) == ErrorKind::NullspaceNotFound);
}

}
