#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "h2mor/bench.hpp"
#include "h2mor/io.hpp"

namespace h2mor::cli {

namespace {

using io::Json;

struct ReduceFlags {
  std::string method = "sdr";
  int m = 1;
  std::string init_shifts;
  std::optional<std::uint64_t> seed;
  bool oracle = false;
  int oracle_points = 2000;
  std::optional<double> feas_tol;
  std::optional<double> gap_tol;
  std::optional<int> sdp_max_iters;
  std::optional<double> irka_tol;
  std::optional<int> irka_max_iters;
  bool verbose = false;
  std::string dump_sdp;
};

void add_reduce_flags(CLI::App& cmd, ReduceFlags& f, const std::string& method_flag) {
  cmd.add_option(method_flag, f.method, "Reduction method")->check(CLI::IsMember({"sdr", "irka"}));
  cmd.add_option("-m,--order", f.m, "Reduced order")->check(CLI::PositiveNumber);
  cmd.add_option("--init-shifts", f.init_shifts, "IRKA start, e.g. 4.1936,1.1538 or 0.69+3.28i,0.69-3.28i");
  cmd.add_option("--seed", f.seed, "Seed for random IRKA starts (falls back to MOR_SEED)");
  cmd.add_flag("--oracle", f.oracle, "Grid-scan f to measure the exactness gap (sdr)");
  cmd.add_option("--oracle-points", f.oracle_points, "Oracle grid points per axis")->check(CLI::PositiveNumber);
  cmd.add_option("--feas-tol", f.feas_tol, "SDP feasibility tolerance");
  cmd.add_option("--gap-tol", f.gap_tol, "SDP duality gap tolerance");
  cmd.add_option("--sdp-max-iters", f.sdp_max_iters, "SDP iteration cap");
  cmd.add_option("--irka-tol", f.irka_tol, "IRKA stopping tolerance");
  cmd.add_option("--irka-max-iters", f.irka_max_iters, "IRKA iteration cap");
  cmd.add_flag("--verbose", f.verbose, "Trace SDP iterations on stderr");
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv("MOR_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, std::string("MOR_SEED is not an unsigned integer: ") + env);
    }
  }
  return fallback;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    io::write_text_file(path, text);
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct ReduceOutcome {
  Json json;
  StateSpace model;
  int exit_code = 0;
};

ReduceOutcome reduce_system(const StateSpace& g, const ReduceFlags& f, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  if (f.method == "sdr") {
    sdr::Options opts;
    if (f.feas_tol) opts.sdp_tol.feas_tol = *f.feas_tol;
    if (f.gap_tol) opts.sdp_tol.gap_tol = *f.gap_tol;
    if (f.sdp_max_iters) opts.sdp_tol.max_iters = *f.sdp_max_iters;
    opts.sdp_tol.verbose = f.verbose;
    opts.run_oracle = f.oracle;
    opts.oracle_grid.points = f.oracle_points;
    const auto sol = sdr::reduce_sdr(g, f.m, opts);
    ReduceOutcome r{io::sdr_result_to_json(sol, g, io::Timings{seconds_since(t0)}), sol.model->sys, 0};
    if (sol.relaxation_gap) {
      err << "warning: relaxation gap detected (bound gap " << sol.bound_gap << ")\n";
      r.exit_code = 2;
    }
    return r;
  }
  irka::Config cfg;
  if (f.irka_tol) cfg.tol = *f.irka_tol;
  if (f.irka_max_iters) cfg.max_iters = *f.irka_max_iters;
  if (!f.init_shifts.empty()) {
    cfg.init = irka::Init::Given;
    cfg.initial_shifts = parse_shift_list(f.init_shifts);
  }
  cfg.seed = resolve_seed(f.seed, 0);
  const auto res = irka::run(g, f.m, cfg);
  ReduceOutcome r{io::irka_result_to_json(res, g, io::Timings{seconds_since(t0)}), res.model.sys, 0};
  if (!res.converged) {
    err << "error: IRKA did not converge in " << res.iterations << " iterations\n";
    r.exit_code = 1;
  }
  return r;
}

Json shift_rows_json(const std::vector<bench::ShiftRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    Json j{{"system", r.system}, {"m", r.m},         {"method", r.method},         {"shifts", io::shifts_to_json(r.shifts)},
           {"pass", r.pass},     {"gated", r.gated}, {"converged", r.converged},   {"iterations", r.iterations},
           {"source", r.source}};
    j["expected"] = r.expected ? io::shifts_to_json(*r.expected) : Json();
    j["deviation"] = std::isfinite(r.deviation) ? Json(r.deviation) : Json();
    j["rel_error"] = std::isfinite(r.rel_error) ? Json(r.rel_error) : Json();
    if (!r.error.empty()) j["error"] = r.error;
    out.push_back(std::move(j));
  }
  return out;
}

Json error_rows_json(const std::vector<bench::ErrorRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    Json j{{"system", r.system}, {"m", r.m}, {"method", r.method}, {"pass", r.pass}, {"gated", r.gated}, {"source", r.source}};
    j["rel_error"] = std::isfinite(r.value) ? Json(r.value) : Json();
    j["expected"] = r.expected ? Json(*r.expected) : Json();
    if (!r.note.empty()) j["note"] = r.note;
    out.push_back(std::move(j));
  }
  return out;
}

Json ensemble_rows_json(const std::vector<bench::EnsembleRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    Json j{{"n", r.n},
           {"seed", r.seed},
           {"irka_converged", r.irka_converged},
           {"relaxation_gap", r.relaxation_gap},
           {"both_succeeded", r.both_succeeded()},
           {"dominates", r.dominates()}};
    j["sdr_error"] = r.sdr_error ? Json(*r.sdr_error) : Json();
    j["irka_random_error"] = r.irka_random_error ? Json(*r.irka_random_error) : Json();
    if (!r.failure.empty()) j["failure"] = r.failure;
    out.push_back(std::move(j));
  }
  return out;
}

// Formats one table either as Markdown or CSV, with a heading for Markdown.
std::string render(const bench::Table& t, const std::string& title, bool csv) {
  if (csv) return bench::to_csv(t);
  return "## " + title + "\n\n" + bench::to_markdown(t) + "\n";
}

int cmd_reduce(const std::string& input, const std::string& output, const ReduceFlags& f, std::ostream& out,
               std::ostream& err) {
  const StateSpace g = io::system_from_json(io::read_json_file(input));
  if (!f.dump_sdp.empty()) {
    std::ostringstream sdpa;
    sdp::write_sdpa(sdr::relaxation_problem(g, f.m), sdpa);
    io::write_text_file(f.dump_sdp, sdpa.str());
  }
  auto r = reduce_system(g, f, err);
  emit(r.json.dump(2) + "\n", output, out);
  return r.exit_code;
}

struct BenchFlags {
  bool tables = false;
  bool ensemble = false;
  std::vector<int> n{12, 20};
  int seeds = 5;
  std::optional<std::uint64_t> seed;
  int m = 2;
  bool json = false;
  bool markdown = false;
  bool csv = false;
  std::string data;
};

int cmd_bench(const BenchFlags& f, const std::string& output, std::ostream& out, std::ostream& err) {
  const bool tables = f.tables || !f.ensemble;
  bool passed = true;
  Json doc;
  std::string text;

  if (tables) {
    const auto cases = f.data.empty() ? bench::builtin_systems() : bench::builtin_systems(f.data);
    const auto report = bench::run_tables(cases);
    passed = passed && report.all_gated_pass();
    for (const auto& r : report.shifts) {
      if (r.gated && !r.pass) err << "FAIL shift " << r.system << " m=" << r.m << " " << r.method << ": deviation " << r.deviation << (r.error.empty() ? "" : " (" + r.error + ")") << "\n";
    }
    for (const auto& r : report.errors) {
      if (r.gated && !r.pass) err << "FAIL error " << r.system << " m=" << r.m << " " << r.method << ": " << r.value << "\n";
    }
    doc["shifts"] = shift_rows_json(report.shifts);
    doc["errors"] = error_rows_json(report.errors);
    text += render(bench::shift_table(report.shifts), "Interpolation points", f.csv);
    if (f.csv) text += "\n";
    text += render(bench::error_table(report.errors), "Relative H2 errors", f.csv);
  }

  if (f.ensemble) {
    std::vector<bench::EnsembleRow> rows;
    for (int n : f.n) {
      bench::EnsembleSpec spec;
      spec.n = n;
      spec.count = f.seeds;
      spec.seed = resolve_seed(f.seed, spec.seed);
      auto part = bench::run_ensemble(spec, f.m);
      rows.insert(rows.end(), part.begin(), part.end());
    }
    for (const auto& r : rows) {
      if (r.both_succeeded() && !r.dominates()) {
        passed = false;
        err << "FAIL ensemble n=" << r.n << " seed=" << r.seed << ": sdr " << *r.sdr_error << " > irka " << *r.irka_random_error << "\n";
      }
    }
    doc["ensemble"] = ensemble_rows_json(rows);
    if (tables && f.csv) text += "\n";
    text += render(bench::ensemble_table(rows), "Ensemble, m = " + std::to_string(f.m), f.csv);
  }

  doc["passed"] = passed;
  if (!f.csv) text += std::string("Result: ") + (passed ? "PASS" : "FAIL") + "\n";
  emit(f.json ? doc.dump(2) + "\n" : text, output, out);
  return passed ? 0 : 1;
}

struct BodeFlags {
  std::string reduce_method;
  bench::BodeGrid grid;
};

int cmd_bode(const std::vector<std::string>& inputs, const std::string& output, const BodeFlags& bf, ReduceFlags rf,
             std::ostream& out, std::ostream& err) {
  if (inputs.empty() || inputs.size() > 2) throw Error(ErrorKind::InvalidArgument, "bode takes a full system and optionally a reduced one");
  const StateSpace g = io::system_from_json(io::read_json_file(inputs[0]));
  std::optional<StateSpace> gm;
  int code = 0;
  if (inputs.size() == 2) {
    gm = io::system_from_json(io::read_json_file(inputs[1]));
  } else {
    if (bf.reduce_method.empty()) throw Error(ErrorKind::InvalidArgument, "bode needs a reduced model file or --reduce");
    rf.method = bf.reduce_method;
    auto r = reduce_system(g, rf, err);
    code = r.exit_code == 2 ? 0 : r.exit_code;
    gm = r.model;
  }
  emit(bench::to_csv(bench::bode_table(bench::bode_csv(g, *gm, bf.grid))), output, out);
  return code;
}

int cmd_verify(const std::vector<std::string>& inputs, const std::string& output, std::ostream& out, std::ostream& err) {
  if (inputs.empty() || inputs.size() > 2) throw Error(ErrorKind::InvalidArgument, "verify takes a full and a reduced system file");
  const bool single = inputs.size() == 1;
  io::ModelFile reduced = io::model_file_from_json(io::read_json_file(inputs[single ? 0 : 1]));
  if (single && !reduced.full) {
    throw Error(ErrorKind::InvalidArgument, inputs[0] + " has no \"full\" system; pass the full system first");
  }
  const StateSpace g = single ? *reduced.full : io::system_from_json(io::read_json_file(inputs[0]));
  const auto check = check_reduced_model(g, reduced.model, reduced.shifts);
  emit(io::model_check_to_json(check).dump(2) + "\n", output, out);
  if (!check.interpolation.passed) err << "FAIL interpolation: max residual " << check.interpolation.max_residual << "\n";
  if (!check.fixed_point_ok) err << "FAIL fixed point: distance " << check.fixed_point_distance << "\n";
  if (!check.identity_ok) err << "FAIL error identity: gap " << check.identity_gap << "\n";
  return check.passed() ? 0 : 1;
}

std::complex<double> parse_shift(std::string s) {
  const auto bad = [&] { return Error(ErrorKind::Parse, "cannot read shift \"" + s + "\""); };
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
  if (s.empty()) throw bad();
  const auto to_double = [&](const std::string& t) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      throw bad();
    }
    if (used != t.size()) throw bad();
    return v;
  };
  if (s.back() != 'i' && s.back() != 'j') return {to_double(s), 0.0};
  s.pop_back();
  // Split at the last sign that is not leading and not an exponent sign.
  std::size_t cut = std::string::npos;
  for (std::size_t k = s.size(); k-- > 1;) {
    if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
      cut = k;
      break;
    }
  }
  if (cut == std::string::npos) {
    const std::string im = (s.empty() || s == "+") ? "1" : (s == "-" ? "-1" : s);
    return {0.0, to_double(im)};
  }
  std::string im = s.substr(cut);
  if (im == "+" || im == "-") im += "1";
  return {to_double(s.substr(0, cut)), to_double(im)};
}

}  // namespace

std::vector<std::complex<double>> parse_shift_list(const std::string& text) {
  std::vector<std::complex<double>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_shift(item));
  if (out.empty()) throw Error(ErrorKind::Parse, "empty shift list");
  return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"H2-optimal model order reduction by semidefinite relaxation"};
  app.require_subcommand(1);
  std::string output;

  auto* reduce = app.add_subcommand("reduce", "Reduce a system read from a JSON file");
  std::string reduce_input;
  ReduceFlags reduce_flags;
  reduce->add_option("input", reduce_input, "System file")->required();
  reduce->add_option("-o,--output", output, "Output file (default stdout)");
  add_reduce_flags(*reduce, reduce_flags, "--method");
  reduce->add_option("--dump-sdp", reduce_flags.dump_sdp, "Also write the relaxation in SDPA sparse format");

  auto* bench_cmd = app.add_subcommand("bench", "Reproduce the reference tables and the random ensemble");
  BenchFlags bench_flags;
  bench_cmd->add_flag("--tables", bench_flags.tables, "Shift and error tables for the built-in systems (default)");
  bench_cmd->add_flag("--ensemble", bench_flags.ensemble, "SDR against random-start IRKA on random stable systems");
  bench_cmd->add_option("--n", bench_flags.n, "Ensemble orders, e.g. 12,20")->delimiter(',')->check(CLI::Range(3, 1000));
  bench_cmd->add_option("--seeds", bench_flags.seeds, "Samples per order")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench_flags.seed, "First sample seed (falls back to MOR_SEED, then 1)");
  bench_cmd->add_option("-m,--order", bench_flags.m, "Reduced order for the ensemble")->check(CLI::Range(1, 2));
  bench_cmd->add_option("--data", bench_flags.data, "Expected-values file");
  auto* json_flag = bench_cmd->add_flag("--json", bench_flags.json, "JSON output");
  auto* md_flag = bench_cmd->add_flag("--markdown", bench_flags.markdown, "Markdown output (default)");
  auto* csv_flag = bench_cmd->add_flag("--csv", bench_flags.csv, "CSV output");
  json_flag->excludes(md_flag)->excludes(csv_flag);
  md_flag->excludes(csv_flag);
  bench_cmd->add_option("-o,--output", output, "Output file (default stdout)");

  auto* bode = app.add_subcommand("bode", "Magnitude responses of a full and a reduced model as CSV");
  std::vector<std::string> bode_inputs;
  BodeFlags bode_flags;
  ReduceFlags bode_reduce;
  bode_reduce.m = 1;
  bode->add_option("inputs", bode_inputs, "Full system file, then optionally a reduced model file")->required();
  bode->add_option("--reduce", bode_flags.reduce_method, "Reduce on the fly with this method")->check(CLI::IsMember({"sdr", "irka"}));
  add_reduce_flags(*bode, bode_reduce, "--method");
  bode->add_option("--wmin", bode_flags.grid.wmin, "Lowest frequency");
  bode->add_option("--wmax", bode_flags.grid.wmax, "Highest frequency");
  bode->add_option("--points", bode_flags.grid.points, "Number of log-spaced frequencies");
  bode->add_option("-o,--output", output, "Output file (default stdout)");

  auto* verify = app.add_subcommand("verify", "Check interpolation, fixed point and error identity of a reduced model");
  std::vector<std::string> verify_inputs;
  verify->add_option("inputs", verify_inputs, "Full and reduced files, or one reduce output")->required();
  verify->add_option("-o,--output", output, "Report file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*reduce) return cmd_reduce(reduce_input, output, reduce_flags, out, err);
    if (*bench_cmd) return cmd_bench(bench_flags, output, out, err);
    if (*bode) return cmd_bode(bode_inputs, output, bode_flags, bode_reduce, out, err);
    if (*verify) return cmd_verify(verify_inputs, output, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace h2mor::cli
