#pragma once

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

namespace h2mor::cli {

/// Runs the command line with argv[0] as the program name. Exit codes: 0 on
/// success, 1 on error or failed check, 2 when the relaxation gap flag is set.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// "1.5", "2-3i", "0.7+1e-2j" -> complex values; comma separated.
std::vector<std::complex<double>> parse_shift_list(const std::string& text);

}  // namespace h2mor::cli
