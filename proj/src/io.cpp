#include "h2mor/io.hpp"

#include <fstream>
#include <sstream>

namespace h2mor::io {

namespace {

Error parse_error(const std::string& what) { return Error(ErrorKind::Parse, what); }

std::vector<double> number_list(const Json& j, const char* what) {
  if (!j.is_array()) throw parse_error(std::string(what) + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw parse_error(std::string(what) + " must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

MatR matrix_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw parse_error(std::string(what) + " must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  MatR m;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto row = number_list(j[static_cast<std::size_t>(r)], what);
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(rows, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw parse_error(std::string(what) + " has ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

// A vector may be written flat or as a column/row of one-element arrays.
VecR vector_from_json(const Json& j, const char* what) {
  if (j.is_array() && !j.empty() && j[0].is_array()) {
    const MatR m = matrix_from_json(j, what);
    if (m.cols() == 1) return m.col(0);
    if (m.rows() == 1) return m.row(0).transpose();
    throw parse_error(std::string(what) + " must be a vector");
  }
  const auto v = number_list(j, what);
  return Eigen::Map<const VecR>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Json matrix_to_json(const MatR& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_to_json(const VecR& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

Json interpolation_to_json(const InterpolationReport& r) {
  return Json{{"value_residuals", r.value_residuals},
              {"derivative_residuals", r.derivative_residuals},
              {"max_residual", r.max_residual},
              {"passed", r.passed}};
}

}  // namespace

Json read_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw parse_error(path + ": " + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path);
}

Json to_json(const StateSpace& sys) {
  return Json{{"ss", {{"A", matrix_to_json(sys.A())}, {"B", vector_to_json(sys.B())}, {"C", vector_to_json(sys.C().transpose())}}}};
}

StateSpace system_from_json(const Json& j) {
  if (!j.is_object()) throw parse_error("system file must hold a JSON object");
  if (j.contains("model")) return system_from_json(j["model"]);
  if (j.contains("ss")) {
    const auto& ss = j["ss"];
    if (!ss.is_object() || !ss.contains("A") || !ss.contains("B") || !ss.contains("C")) {
      throw parse_error("\"ss\" needs A, B and C");
    }
    const MatR a = matrix_from_json(ss["A"], "A");
    const VecR b = vector_from_json(ss["B"], "B");
    const VecR c = vector_from_json(ss["C"], "C");
    return StateSpace(a, b, c.transpose());
  }
  if (j.contains("tf")) {
    const auto& tf = j["tf"];
    if (!tf.is_object() || !tf.contains("num") || !tf.contains("den")) throw parse_error("\"tf\" needs num and den");
    return tf_to_ss(RationalTF(number_list(tf["num"], "num"), number_list(tf["den"], "den")));
  }
  throw parse_error("expected one of \"ss\", \"tf\" or \"model\"");
}

Json shifts_to_json(const std::vector<Complex>& s) {
  Json out = Json::array();
  for (const auto& z : s) out.push_back(Json::array({z.real(), z.imag()}));
  return out;
}

std::vector<Complex> shifts_from_json(const Json& j) {
  if (!j.is_array()) throw parse_error("shifts must be an array");
  std::vector<Complex> out;
  for (const auto& v : j) {
    if (v.is_number()) {
      out.emplace_back(v.get<double>(), 0.0);
    } else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
      out.emplace_back(v[0].get<double>(), v[1].get<double>());
    } else if (v.is_object() && v.contains("re")) {
      out.emplace_back(v["re"].get<double>(), v.value("im", 0.0));
    } else {
      throw parse_error("a shift is a number, an [re, im] pair or {\"re\", \"im\"}");
    }
  }
  return out;
}

ModelFile model_file_from_json(const Json& j) {
  ModelFile f{system_from_json(j), std::nullopt, std::nullopt};
  if (j.is_object() && j.contains("model")) {
    if (j.contains("shifts")) f.shifts = shifts_from_json(j["shifts"]);
    if (j.contains("full")) f.full = system_from_json(j["full"]);
  }
  return f;
}

Json sdr_result_to_json(const sdr::Solution& sol, const StateSpace& full, const Timings& t) {
  Json out;
  out["method"] = "sdr";
  out["m"] = sol.shifts.size();
  out["shifts"] = shifts_to_json(sol.shifts.shifts());
  out["p"] = sol.p;
  out["p_extracted"] = sol.p_extracted;
  out["gamma_sq"] = sol.gamma_sq;
  out["sdp"] = {{"status", sdp::to_string(sol.sdp_status)}, {"iterations", sol.sdp_iterations}, {"merit", sol.sdp_merit}, {"inexact", sol.sdp_inexact}};
  out["relative_error"] = sol.relative_error;
  out["full_h2_sq"] = sol.full_h2_sq;
  out["model_h2_sq"] = sol.model_h2_sq;
  out["residuals"] = {{"identity_gap", sol.identity_gap},
                      {"bound_gap", sol.bound_gap},
                      {"fixed_point", sol.model ? sol.model->fixed_point_residual : 0.0},
                      {"interpolation", sol.model ? interpolation_to_json(sol.model->interpolation) : Json()}};
  out["upper_bound_ok"] = sol.upper_bound_ok;
  out["fallback_used"] = sol.fallback_used;
  out["relaxation_gap"] = sol.relaxation_gap;
  if (sol.exactness_gap) out["exactness_gap"] = *sol.exactness_gap;
  if (sol.oracle) out["oracle"] = {{"p", sol.oracle->p}, {"f", sol.oracle->f}};
  out["model"] = sol.model ? to_json(sol.model->sys) : Json();
  out["full"] = to_json(full);
  out["timings"] = {{"total_seconds", t.total_seconds}};
  return out;
}

Json irka_result_to_json(const irka::Result& res, const StateSpace& full, const Timings& t) {
  Json out;
  out["method"] = "irka";
  out["m"] = res.model.shifts.size();
  out["shifts"] = shifts_to_json(res.model.shifts.shifts());
  out["p"] = res.model.shifts.p();
  out["iterations"] = res.iterations;
  out["converged"] = res.converged;
  try {
    out["relative_error"] = relative_h2_error(full, res.model.sys);
  } catch (const Error& e) {
    out["relative_error"] = nullptr;
    out["error"] = e.what();
  }
  out["residuals"] = {{"fixed_point", res.model.fixed_point_residual},
                      {"interpolation", interpolation_to_json(res.model.interpolation)}};
  Json traj = Json::array();
  for (const auto& s : res.trajectory) traj.push_back(shifts_to_json(s.shifts()));
  out["trajectory"] = std::move(traj);
  out["model"] = to_json(res.model.sys);
  out["full"] = to_json(full);
  out["timings"] = {{"total_seconds", t.total_seconds}};
  return out;
}

Json model_check_to_json(const ModelCheck& check) {
  return Json{{"passed", check.passed()},
              {"shifts", shifts_to_json(check.shifts)},
              {"interpolation", interpolation_to_json(check.interpolation)},
              {"fixed_point", {{"distance", check.fixed_point_distance}, {"passed", check.fixed_point_ok}}},
              {"identity", {{"gap", check.identity_gap}, {"passed", check.identity_ok}}}};
}

}  // namespace h2mor::io
