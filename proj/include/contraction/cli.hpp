#pragma once

// Scenario harness: JSON scenario files in, report.json and CSV series out.

#include "contraction/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace contraction::cli {

using Json = nlohmann::json;

inline constexpr int kExitPass = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitCertificateFail = 2;
inline constexpr int kExitUsage = 64;

/// Malformed text or a parameter of the wrong type.
class ParseError : public Error {
 public:
  using Error::Error;
};

class UnknownKind : public Error {
 public:
  using Error::Error;
};

/// Required parameters are absent; `missing` lists their dotted paths.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::vector<std::string> missing)
      : Error(what), missing(std::move(missing)) {}
  std::vector<std::string> missing;
};

struct Scenario {
  std::string kind;
  Json params = Json::object();
  std::uint64_t seed = 0;
  std::string output_dir;
};

const std::vector<std::string>& known_kinds();

/// Parses {"kind": ..., "seed": ..., "output_dir": ..., "params": {...}}.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

/// Dotted paths of required parameters that are absent. Raises UnknownKind.
std::vector<std::string> missing_parameters(const Scenario& sc);

struct Series {
  std::string name;
  std::vector<double> times;
  std::vector<double> values;
};

struct RunResult {
  Json report;
  bool pass = false;
  std::vector<Series> series;
  /// Extra files (name, contents), e.g. grid states.
  std::vector<std::pair<std::string, std::string>> files;
};

/// Validates and dispatches; raises ValidationError, UnknownKind, or the
/// analysis modules' errors.
RunResult run(const Scenario& sc);

/// Deterministic JSON text: sorted keys, two-space indent, doubles with 17
/// significant digits.
std::string dump(const Json& j);

/// Writes `dir/<name>.csv` with header "t,<name>" and returns the path.
/// Raises DimensionError for unequal lengths and Error on IO failure.
std::string emit_series(const std::string& name, const std::vector<double>& times,
                        const std::vector<double>& values, const std::string& dir);

/// The `run` command: exit 0 on pass, 2 on a failed certificate, 1 on
/// error, 64 for an unknown kind.
int run_scenario(const std::string& path, const std::optional<std::string>& out_dir,
                 const std::optional<std::uint64_t>& seed, std::ostream& log);

/// The `validate` command: 0 if the file parses and has every required key.
int validate_scenario(const std::string& path, std::ostream& log);

}  // namespace contraction::cli
