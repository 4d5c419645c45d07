#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "h2mor/irka.hpp"
#include "h2mor/sdr.hpp"

namespace h2mor::io {

using Json = nlohmann::json;

Json read_json_file(const std::string& path);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// {"ss": {"A": [[..]], "B": [..], "C": [..]}}
Json to_json(const StateSpace& sys);

/// Accepts {"ss": {...}}, {"tf": {"num": [..], "den": [..]}}, or a reduce
/// result, in which case the reduced model under "model" is returned.
StateSpace system_from_json(const Json& j);

/// Shifts as [re, im] pairs. Plain numbers are read as real shifts.
Json shifts_to_json(const std::vector<Complex>& s);
std::vector<Complex> shifts_from_json(const Json& j);

/// A reduced model file: the model plus, when present, the interpolation
/// points it was built from and the full system.
struct ModelFile {
  StateSpace model;
  std::optional<std::vector<Complex>> shifts;
  std::optional<StateSpace> full;
};

ModelFile model_file_from_json(const Json& j);

struct Timings {
  double total_seconds = 0.0;
};

Json sdr_result_to_json(const sdr::Solution& sol, const StateSpace& full, const Timings& t);
Json irka_result_to_json(const irka::Result& res, const StateSpace& full, const Timings& t);
Json model_check_to_json(const ModelCheck& check);

}  // namespace h2mor::io
