// One line per acceptance criterion. Exit status is 0 unless a criterion
// fails outside the known discrepancies listed below; --strict makes every
// FAIL count. --quick uses a coarse oracle grid and only n = 12; --large adds
// the n = 38 ensemble.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "h2mor/bench.hpp"

using namespace h2mor;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Rows whose published reference is not reachable with the published
// coefficients: the optimum of f is unique and lies elsewhere.
const std::set<std::string> kKnownDiscrepancies{"G3 m=1 SDR"};

struct Verdict {
  bool pass = true;
  std::vector<std::string> failures;  // row labels
  std::string detail;

  void fail(const std::string& label) {
    pass = false;
    failures.push_back(label);
  }
  bool explained() const {
    for (const auto& f : failures)
      if (!kKnownDiscrepancies.count(f)) return false;
    return true;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string label(const std::string& sys, int m, const std::string& method) {
  return sys + " m=" + std::to_string(m) + " " + method;
}

// Max over matched pairs of |got - want| / |want|, best of all pairings (m <= 2).
double pairwise_relative(const std::vector<Complex>& got, const std::vector<Complex>& want) {
  if (got.size() != want.size()) return INFINITY;
  auto worst = [&](bool swap) {
    double w = 0.0;
    for (std::size_t k = 0; k < want.size(); ++k) {
      const auto& g = got[swap ? want.size() - 1 - k : k];
      w = std::max(w, std::abs(g - want[k]) / std::abs(want[k]));
    }
    return w;
  };
  return want.size() == 2 ? std::min(worst(false), worst(true)) : worst(false);
}

struct CaseRun {
  const bench::BenchCase* c;
  int m;
  std::optional<sdr::Solution> sdr;
  std::string sdr_error;
  double sdr_seconds = 0.0;
};

double identity_gap(const StateSpace& g, const StateSpace& gm) {
  const double g2 = h2_norm_sq(g);
  return std::abs(h2_norm_sq(error_system(g, gm)) - (g2 - h2_norm_sq(gm))) / g2;
}

double fixed_point_distance(const ReducedModel& model) {
  return assignment_distance(model.shifts.shifts(), mirrored_poles(model.sys)) / (1.0 + model.shifts.max_abs());
}

// Independent forms of f for m = 2, from G(s1), G(s2) alone.
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

// Residues b of Gm(s) = sum_j b_j / (s + s_j) interpolating g_i = G(s_i).
VecC diagonal_residues(Complex s1, Complex s2, Complex g1, Complex g2) {
  MatC k(2, 2);
  k << 1.0 / (2.0 * s1), 1.0 / (s1 + s2), 1.0 / (s1 + s2), 1.0 / (2.0 * s2);
  VecC g(2);
  g << g1, g2;
  return k.fullPivLu().solve(g);
}

// Relative mismatch between the Lyapunov Gramian of the diagonal realization
// and the closed form b_i conj(b_j) / (s_i + conj(s_j)).
double gramian_mismatch(Complex s1, Complex s2, const VecC& b) {
  MatC a = MatC::Zero(2, 2);
  a(0, 0) = -s1;
  a(1, 1) = -s2;
  const MatC p = linalg::lyap<Complex>(a, b * b.adjoint());
  const Complex s[2] = {s1, s2};
  MatC closed(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) closed(i, j) = b(i) * std::conj(b(j)) / (s[i] + std::conj(s[j]));
  return (p - closed).norm() / closed.norm();
}

void report(int id, const char* title, const Verdict& v) {
  std::printf("criterion %d %s %s: %s\n", id, v.pass ? "PASS" : "FAIL", title, v.detail.c_str());
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  bool quick = false;
  bool large = false;
  for (int k = 1; k < argc; ++k) {
    if (!std::strcmp(argv[k], "--strict")) strict = true;
    if (!std::strcmp(argv[k], "--quick")) quick = true;
    if (!std::strcmp(argv[k], "--large")) large = true;
  }

  const auto cases = bench::builtin_systems();
  std::vector<CaseRun> runs;
  for (const auto& c : cases) {
    for (int m : c.orders) {
      CaseRun r{&c, m, std::nullopt, "", 0.0};
      const auto t0 = Clock::now();
      try {
        r.sdr = sdr::reduce_sdr(c.system, m);
      } catch (const Error& e) {
        r.sdr_error = e.what();
      }
      r.sdr_seconds = seconds_since(t0);
      runs.push_back(std::move(r));
    }
  }

  std::vector<Verdict> verdicts(9);

  // 1: shift reproduction.
  {
    auto& v = verdicts[0];
    double total = 0.0, worst = 0.0;
    std::ostringstream bad;
    for (const auto& r : runs) {
      total += r.sdr_seconds;
      const auto* e = r.c->find("SDR", r.m);
      const auto lbl = label(r.c->name, r.m, "SDR");
      if (!r.sdr || !e) {
        v.fail(lbl);
        bad << " " << lbl << " (" << (r.sdr ? "no reference" : r.sdr_error) << ")";
        continue;
      }
      const auto& got = r.sdr->shifts.shifts();
      bool ok;
      double dev;
      if (r.m == 1) {
        dev = std::abs(got[0] - e->shifts[0]);
        ok = dev <= 1e-3;
      } else {
        dev = pairwise_relative(got, e->shifts);
        ok = dev <= bench::kShiftRelTol;
        worst = std::max(worst, dev);
      }
      if (!ok) {
        v.fail(lbl);
        bad << " " << lbl << " got " << bench::format_shifts(got) << " want " << bench::format_shifts(e->shifts);
      }
    }
    if (total >= 30.0) v.fail("runtime");
    v.detail = "8 SDR shift sets, worst m=2 relative deviation " + fmt(worst) + ", SDR runtime " + fmt(total) + " s" +
               (bad.str().empty() ? "" : ";" + bad.str());
    report(1, "shift reproduction", v);
  }

  // 2: relative H2 errors.
  {
    auto& v = verdicts[1];
    std::ostringstream bad, irka_note;
    int sdr_ok = 0, irka_gated = 0, irka_ok = 0;
    for (const auto& r : runs) {
      const auto* e = r.c->find("SDR", r.m);
      const auto lbl = label(r.c->name, r.m, "SDR");
      if (r.sdr && e && e->rel_error && std::abs(r.sdr->relative_error - *e->rel_error) <= bench::kErrorAbsTol) {
        ++sdr_ok;
      } else {
        v.fail(lbl);
        bad << " " << lbl << " got " << (r.sdr ? bench::format_number(r.sdr->relative_error) : r.sdr_error)
            << " want " << (e && e->rel_error ? bench::format_number(*e->rel_error) : "?");
      }
      if (r.m != 2) continue;
      const auto* ie = r.c->find("IRKA2", 2);
      if (!ie || !ie->rel_error) continue;
      std::size_t oi = 0;
      while (r.c->orders[oi] != 2) ++oi;
      irka::Config cfg;
      cfg.seed = r.c->irka_seeds[oi];
      try {
        const auto res = irka::run(r.c->system, 2, cfg);
        const bool in_basin = res.converged && pairwise_relative(res.model.shifts.shifts(), ie->shifts) <= bench::kShiftRelTol;
        if (!in_basin) {
          irka_note << " " << r.c->name << (res.converged ? " other fixed point" : " not converged");
          continue;
        }
        ++irka_gated;
        const double err = relative_h2_error(r.c->system, res.model.sys);
        if (std::abs(err - *ie->rel_error) <= bench::kErrorAbsTol) {
          ++irka_ok;
        } else {
          v.fail(label(r.c->name, 2, "IRKA"));
          bad << " " << r.c->name << " IRKA got " << bench::format_number(err);
        }
      } catch (const Error& ex) {
        irka_note << " " << r.c->name << " " << ex.what();
      }
    }
    v.detail = std::to_string(sdr_ok) + "/8 SDR errors within 1e-3; IRKA m=2 " + std::to_string(irka_ok) + "/" +
               std::to_string(irka_gated) + " in basin" + (irka_note.str().empty() ? "" : " (not gated:" + irka_note.str() + ")") +
               (bad.str().empty() ? "" : ";" + bad.str());
    report(2, "error reproduction", v);
  }

  // 3: exactness against the grid oracle.
  {
    auto& v = verdicts[2];
    double worst = 0.0;
    std::ostringstream bad;
    for (const auto& r : runs) {
      const auto lbl = label(r.c->name, r.m, "SDR");
      if (!r.sdr) {
        v.fail(lbl);
        continue;
      }
      sdr::GridSpec grid;
      if (quick) grid.points = 300;
      const auto ops = sdr::build_operators(r.c->system, r.m);
      const auto oracle = sdr::oracle_max_f(ops, r.c->system, grid);
      const double gap = std::abs(r.sdr->gamma_sq - oracle.f) / r.sdr->gamma_sq;
      worst = std::max(worst, gap);
      if (gap > sdr::kExactnessTol) {
        v.fail(lbl);
        bad << " " << lbl << " gap " << fmt(gap);
      }
    }
    v.detail = "max |gamma^2 - max_grid f| / gamma^2 = " + fmt(worst) + " over G1-G4, m=1,2" +
               (bad.str().empty() ? "" : ";" + bad.str());
    report(3, "relaxation exactness", v);
  }

  // 4, 5: fixed point, identity and interpolation for every model.
  std::vector<std::pair<std::string, ReducedModel>> models;
  std::map<std::string, std::pair<int, bool>> irka1;  // iterations, converged
  std::map<std::string, double> irka1_distance;
  for (const auto& r : runs) {
    if (!r.sdr || !r.sdr->model) continue;
    models.emplace_back(label(r.c->name, r.m, "SDR"), *r.sdr->model);
    irka::Config cfg;
    cfg.init = irka::Init::Given;
    cfg.initial_shifts = r.sdr->shifts.shifts();
    const auto lbl = label(r.c->name, r.m, "IRKA1");
    try {
      const auto res = irka::run(r.c->system, r.m, cfg);
      irka1[lbl] = {res.iterations, res.converged};
      irka1_distance[lbl] = assignment_distance(res.model.shifts.shifts(), r.sdr->shifts.shifts()) /
                            std::max(1.0, r.sdr->shifts.max_abs());
      if (res.converged) models.emplace_back(lbl, res.model);
    } catch (const Error& e) {
      irka1[lbl] = {0, false};
      irka1_distance[lbl] = INFINITY;
    }
    std::size_t oi = 0;
    while (r.c->orders[oi] != r.m) ++oi;
    irka::Config rnd;
    rnd.seed = r.c->irka_seeds[oi];
    try {
      const auto res = irka::run(r.c->system, r.m, rnd);
      if (res.converged) models.emplace_back(label(r.c->name, r.m, "IRKA2"), res.model);
    } catch (const Error&) {
    }
  }
  {
    auto& v4 = verdicts[3];
    auto& v5 = verdicts[4];
    double worst_fp = 0.0, worst_id = 0.0, worst_ip = 0.0;
    std::ostringstream bad4, bad5;
    for (const auto& [lbl, model] : models) {
      const auto& g = [&]() -> const StateSpace& {
        for (const auto& c : cases)
          if (lbl.rfind(c.name + " ", 0) == 0) return c.system;
        throw Error(ErrorKind::InvalidArgument, lbl);
      }();
      const double fp = fixed_point_distance(model);
      const double id = identity_gap(g, model.sys);
      const auto ip = verify_interpolation(g, model);
      worst_fp = std::max(worst_fp, fp);
      worst_id = std::max(worst_id, id);
      worst_ip = std::max(worst_ip, ip.max_residual);
      if (fp > kCheckFixedPointTol || id > kCheckIdentityTol) {
        v4.fail(lbl);
        bad4 << " " << lbl << " (fp " << fmt(fp) << ", identity " << fmt(id) << ")";
      }
      if (ip.max_residual > kInterpolationTol) {
        v5.fail(lbl);
        bad5 << " " << lbl << " " << fmt(ip.max_residual);
      }
    }
    v4.detail = std::to_string(models.size()) + " models; worst scaled fixed-point distance " + fmt(worst_fp) +
                ", worst identity gap " + fmt(worst_id) + (bad4.str().empty() ? "" : ";" + bad4.str());
    v5.detail = std::to_string(models.size()) + " models; worst interpolation residual " + fmt(worst_ip) +
                (bad5.str().empty() ? "" : ";" + bad5.str());
    report(4, "fixed point and error identity", v4);
    report(5, "moment matching", v5);
  }

  // 6: structural oracles.
  {
    auto& v = verdicts[5];
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> logmag(std::log(0.1), std::log(30.0));
    std::uniform_real_distribution<double> angle(0.05, 1.5);
    double worst_gram = 0.0, worst_form = 0.0, worst_push = 0.0;
    for (const auto& c : cases) {
      for (int k = 0; k < 50; ++k) {
        const bool complex_pair = k % 2 == 1;
        Complex s1, s2;
        if (complex_pair) {
          s1 = std::polar(std::exp(logmag(rng)), angle(rng));
          s2 = std::conj(s1);
        } else {
          s1 = std::exp(logmag(rng));
          s2 = std::exp(logmag(rng));
        }
        const Complex g1 = tf_value(c.tf, s1), g2 = tf_value(c.tf, s2);
        const double p1 = (s1 + s2).real(), p2 = (s1 * s2).real();
        const double general = f_general(c.system, p1, p2);
        const double special = complex_pair ? f_complex_pair(s1, s2, g1, g2) : f_real_pair(s1.real(), s2.real(), g1.real(), g2.real());
        const double library = sdr::f_eval(c.system, {p1, p2});
        worst_form = std::max({worst_form, std::abs(general - special) / std::abs(special),
                               std::abs(library - special) / std::abs(special)});

        const VecC b = diagonal_residues(s1, s2, g1, g2);
        worst_gram = std::max(worst_gram, gramian_mismatch(s1, s2, b));
        // The closed-form Gramian also reproduces f.
        const Complex s[2] = {s1, s2};
        Complex norm_sq = 0.0;
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) norm_sq += b(i) * std::conj(b(j)) / (s[i] + std::conj(s[j]));
        worst_form = std::max(worst_form, std::abs(norm_sq.real() - special) / std::abs(special));
      }
      for (int m : {1, 2}) {
        const auto ops = sdr::build_operators(c.system, m);
        for (int k = 0; k < 20; ++k) {
          std::vector<double> p;
          for (int j = 0; j < m; ++j) p.push_back(std::exp(logmag(rng)));
          const MatR d = sdr::delta(m, c.system.order(), p);
          const auto mn = m * c.system.order();
          const MatR left = d * (MatR::Identity(mn, mn) - ops.T4 * d).inverse();
          const MatR right = sdr::delta_hat(ops, p);
          worst_push = std::max(worst_push, (left - right).norm() / std::max(1.0, right.norm()));
        }
      }
    }
    for (const auto& r : runs) {
      if (r.m != 2 || !r.sdr || !r.sdr->model) continue;
      const auto& s = r.sdr->shifts.shifts();
      const VecC b = diagonal_residues(s[0], s[1], tf_value(r.c->tf, s[0]), tf_value(r.c->tf, s[1]));
      worst_gram = std::max(worst_gram, gramian_mismatch(s[0], s[1], b));
    }
    if (worst_gram > 1e-9) v.fail("gramian");
    if (worst_form > 1e-9) v.fail("f forms");
    if (worst_push > 1e-10) v.fail("push-through");
    v.detail = "Gramian closed form " + fmt(worst_gram) + ", f forms on 200 pairs " + fmt(worst_form) +
               ", push-through " + fmt(worst_push);
    report(6, "structural oracles", v);
  }

  // 7: IRKA started at the SDR shifts.
  {
    auto& v = verdicts[6];
    std::ostringstream bad;
    int worst_iters = 0;
    double worst_dist = 0.0;
    for (const auto& r : runs) {
      const auto lbl = label(r.c->name, r.m, "IRKA1");
      const auto it = irka1.find(lbl);
      if (it == irka1.end()) {
        v.fail(lbl);
        bad << " " << lbl << " (no SDR shifts)";
        continue;
      }
      const auto [iters, converged] = it->second;
      const double dist = irka1_distance[lbl];
      worst_iters = std::max(worst_iters, iters);
      worst_dist = std::max(worst_dist, dist);
      if (!converged || iters > 2 || dist > 1e-6) {
        v.fail(lbl);
        bad << " " << lbl << " (" << iters << " iterations, distance " << fmt(dist) << ")";
      }
    }
    v.detail = "8 cases, max " + std::to_string(worst_iters) + " iterations, max shift change " + fmt(worst_dist) +
               (bad.str().empty() ? "" : ";" + bad.str());
    report(7, "IRKA round trip", v);
  }

  // 8: ensemble dominance.
  {
    auto& v = verdicts[7];
    std::ostringstream detail;
    const std::vector<int> gated_orders = quick ? std::vector<int>{12} : std::vector<int>{12, 20};
    for (int n : gated_orders) {
      bench::EnsembleSpec spec;
      spec.n = n;
      spec.count = 5;
      const auto t0 = Clock::now();
      const auto rows = bench::run_ensemble(spec, 2);
      int compared = 0, dominated = 0;
      std::vector<std::string> skipped;
      for (const auto& r : rows) {
        if (!r.both_succeeded()) {
          skipped.push_back(std::to_string(r.seed));
          continue;
        }
        ++compared;
        if (r.dominates()) {
          ++dominated;
        } else {
          v.fail("n=" + std::to_string(n) + " seed " + std::to_string(r.seed));
        }
      }
      detail << " n=" << n << ": " << dominated << "/" << compared << " dominate";
      if (!skipped.empty()) {
        detail << " (seeds";
        for (const auto& s : skipped) detail << " " << s;
        detail << " not compared)";
      }
      detail << " in " << fmt(seconds_since(t0)) << " s;";
      if (compared == 0) v.fail("n=" + std::to_string(n) + " no comparisons");
    }
    if (large) {
      bench::EnsembleSpec spec;
      spec.n = 38;
      spec.count = 5;
      const auto t0 = Clock::now();
      int sdr_ok = 0, compared = 0, dominated = 0;
      for (const auto& r : bench::run_ensemble(spec, 2)) {
        sdr_ok += r.sdr_error.has_value();
        if (!r.both_succeeded()) continue;
        ++compared;
        dominated += r.dominates();
      }
      detail << " n=38 (not gated): SDR solved " << sdr_ok << "/5, " << dominated << "/" << compared << " dominate in "
             << fmt(seconds_since(t0)) << " s;";
    } else {
      detail << " n=38 not gated, run with --large;";
    }
    const double schur_gb = std::pow(1.0 + 3.0 * 80 * 80, 2) * 8.0 / 1e9;
    detail << " n=80 not gated, not run: dense Schur matrix would need " << fmt(schur_gb) << " GB";
    v.detail = detail.str().substr(1);
    report(8, "ensemble dominance", v);
  }

  std::printf(
      "criterion 9 NOTE excluded from gating: bit-exact regeneration of the unseeded reference ensembles and "
      "solver-specific numerics of the reference SDP solver; covered instead by criteria 3-6\n");

  bool ok = true;
  for (std::size_t k = 0; k < 8; ++k) {
    if (verdicts[k].pass) continue;
    if (strict || !verdicts[k].explained()) ok = false;
  }
  std::printf("known discrepancies:");
  for (const auto& d : kKnownDiscrepancies) std::printf(" %s", d.c_str());
  std::printf("\nacceptance %s\n", ok ? "OK" : "FAILED");
  return ok ? 0 : 1;
}
