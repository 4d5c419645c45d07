#pragma once

#include <optional>
#include <string>

#include "h2mor/bench.hpp"

namespace h2mor::test {

/// Kind of the Error thrown by f, or nullopt when f returns normally.
template <typename F>
std::optional<ErrorKind> thrown_kind(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline const bench::BenchCase& builtin(const std::string& name) {
  static const auto cases = bench::builtin_systems();
  for (const auto& c : cases)
    if (c.name == name) return c;
  throw Error(ErrorKind::InvalidArgument, "no builtin system " + name);
}

inline StateSpace first_order() { return tf_to_ss(RationalTF({1}, {1, 1})); }

inline std::string data_dir() { return H2MOR_DATA_DIR; }

}  // namespace h2mor::test
