#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "h2mor/irka.hpp"
#include "h2mor/sdr.hpp"

namespace h2mor::bench {

/// One reference value from the expected-tables data file.
struct ExpectedRow {
  std::string method;  // "SDR", "IRKA1", "IRKA2", "ZeroSolving"
  int m = 1;
  std::vector<Complex> shifts;
  std::optional<double> rel_error;
  std::string source;  // echoed into reports
  std::string note;
};

struct BenchCase {
  std::string name;
  RationalTF tf;
  StateSpace system;
  std::vector<int> orders;
  std::vector<ExpectedRow> expected;
  std::vector<std::uint64_t> irka_seeds;  // one per entry of orders

  const ExpectedRow* find(const std::string& method, int m) const;
};

/// G1..G4 with expected values read from data/expected_tables.json.
std::vector<BenchCase> builtin_systems();
std::vector<BenchCase> builtin_systems(const std::string& data_path);
std::string default_data_path();

enum class Generator { StableRandom, UncheckedRandom };

struct EnsembleSpec {
  int n = 12;
  int count = 5;
  std::uint64_t seed = 1;  // sample k uses seed + k
  Generator generator = Generator::StableRandom;

  void validate() const;
};

inline constexpr double kGeneratorMargin = 0.05;  // max Re(lambda) <= -margin
inline constexpr int kGeneratorAttempts = 100;

/// Modal construction: real poles and conjugate pairs with log-uniform
/// magnitudes in [0.1, 100], hidden behind a random orthogonal similarity;
/// rejected until stable with margin and minimal. The unchecked generator
/// is a shifted Gaussian A with no minimality check.
StateSpace random_stable_system(const EnsembleSpec& spec);

inline constexpr double kShiftRelTol = 0.01;
inline constexpr double kErrorAbsTol = 1e-3;

struct ShiftRow {
  std::string system;
  int m = 1;
  std::string method;  // SDR, IRKA1 (SDR-initialized), IRKA2 (random start)
  std::vector<Complex> shifts;
  std::optional<std::vector<Complex>> expected;
  double deviation = 0.0;  // max relative distance to the expected set
  bool pass = false;
  bool gated = false;      // counts toward the bench exit status
  bool converged = true;
  int iterations = 0;
  double rel_error = 0.0;
  std::string source;
  std::string error;       // stage error, if the pipeline threw
};

struct ErrorRow {
  std::string system;
  int m = 1;
  std::string method;  // SDR or IRKA (random start)
  double value = 0.0;
  std::optional<double> expected;
  bool pass = false;
  bool gated = false;
  std::string source;
  std::string note;
};

struct TableReport {
  std::vector<ShiftRow> shifts;
  std::vector<ErrorRow> errors;
  bool all_gated_pass() const;
};

/// SDR, IRKA1 and IRKA2 per case and order, compared at 1% relative.
std::vector<ShiftRow> run_shift_tables(const std::vector<BenchCase>& cases);

/// Relative H2 errors for SDR and random-start IRKA, compared at 1e-3.
std::vector<ErrorRow> run_error_table(const std::vector<BenchCase>& cases);

/// Both tables from one pass over the pipelines.
TableReport run_tables(const std::vector<BenchCase>& cases);

struct EnsembleRow {
  int n = 0;
  std::uint64_t seed = 0;
  std::optional<double> sdr_error;
  std::optional<double> irka_random_error;
  bool irka_converged = false;
  bool relaxation_gap = false;
  std::string failure;  // stage-labelled message when a pipeline failed
  bool both_succeeded() const { return sdr_error && irka_random_error && irka_converged; }
  bool dominates() const;  // sdr_error <= irka_random_error + 1e-9
};

std::vector<EnsembleRow> run_ensemble(const EnsembleSpec& spec, int m = 2);

struct BodeGrid {
  int points = 400;
  double wmin = 1e-3;
  double wmax = 1e3;
};

struct BodeRow {
  double omega;
  double full_db;
  double reduced_db;
};

std::vector<BodeRow> bode_csv(const StateSpace& g, const StateSpace& gm, const BodeGrid& grid = {});

/// Header plus rows of preformatted cells.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string format_number(double v);  // 10 significant digits
std::string format_shifts(const std::vector<Complex>& s);
std::string to_csv(const Table& t);
std::string to_markdown(const Table& t);

Table shift_table(const std::vector<ShiftRow>& rows);
Table error_table(const std::vector<ErrorRow>& rows);
Table ensemble_table(const std::vector<EnsembleRow>& rows);
Table bode_table(const std::vector<BodeRow>& rows);

}  // namespace h2mor::bench
