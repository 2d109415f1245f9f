#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nscmab {

// Base arms are 0-based indices in [0, m). A super arm is an ordered tuple of
// distinct arms; order only matters for cascade examination.
using Arm = int;
using Action = std::vector<Arm>;

// Rounds are 1-based, t in [1, T].
using Round = std::int64_t;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BoundsError : Error {
  using Error::Error;
};
struct InvalidActionError : Error {
  using Error::Error;
};
struct GenerationError : Error {
  using Error::Error;
};
struct ContractError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};
struct DecompositionError : Error {
  using Error::Error;
};
struct UnsupportedError : Error {
  using Error::Error;
};

inline bool contains(const Action& action, Arm arm) {
  return std::find(action.begin(), action.end(), arm) != action.end();
}

inline void validate_action(const Action& action, int m) {
  if (action.empty()) throw InvalidActionError("empty action");
  std::vector<bool> seen(static_cast<std::size_t>(m), false);
  for (Arm a : action) {
    if (a < 0 || a >= m)
      throw InvalidActionError("arm " + std::to_string(a) + " outside [0, " +
                               std::to_string(m) + ")");
    if (seen[static_cast<std::size_t>(a)])
      throw InvalidActionError("duplicate arm " + std::to_string(a));
    seen[static_cast<std::size_t>(a)] = true;
  }
}

inline std::vector<double> indicator(const Action& action, int m) {
  std::vector<double> v(static_cast<std::size_t>(m), 0.0);
  for (Arm a : action) v[static_cast<std::size_t>(a)] = 1.0;
  return v;
}

inline std::string to_string(const Action& action) {
  std::string s = "{";
  for (std::size_t k = 0; k < action.size(); ++k) {
    if (k) s += ",";
    s += std::to_string(action[k]);
  }
  return s + "}";
}

}  // namespace nscmab
