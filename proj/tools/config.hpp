#pragma once

// Run configuration for the csos command line: defaults, a JSON config file
// and flag overrides, applied in that order.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "csos/cascade.hpp"
#include "csos/certify.hpp"
#include "csos/risk.hpp"
#include "json.hpp"

namespace csos::cli {

enum ExitCode { kOk = 0, kValidation = 1, kCertification = 2, kNumerical = 3 };

class CliError : public std::runtime_error {
 public:
  CliError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

struct SimulateConfig {
  int trajectories = 100;  // per certified sequence
  double max_gap = 2.0;    // switch intervals U[0, max_gap] s
  double horizon = 20.0;   // s after the last switch
  int dump = 1;            // trajectories per sequence written as CSV
};

struct RunConfig {
  std::string system;
  std::string distribution;  // empty: uniform over every sequence
  std::vector<cascade::BlockingLogic> blocking;
  certify::CertifyOptions certify;
  risk::GridSpec grid;
  SimulateConfig simulate;
  std::string outdir = "csos_out";
  std::uint64_t seed = 1;
  int jobs = 1;
};

// Flags given on the command line; unset ones leave the file value.
struct FlagOverrides {
  std::optional<std::string> system, distribution, outdir;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs, grid_points, trajectories, dump;
};

// Throws CliError(kValidation) naming the offending field.
RunConfig load_config(const std::string& path, const FlagOverrides& flags);
void validate(const RunConfig& cfg);

// Everything that can change an artifact; jobs and outdir are excluded.
nlohmann::json effective_config(const RunConfig& cfg);
// FNV-1a 64 as 16 hex digits.
std::string fnv1a(const std::string& text);
// Hash of the compact effective config.
std::string config_hash(const RunConfig& cfg);
// Hash of the inputs certificates depend on: system file contents, seed,
// degrees, tolerances and certify settings.
std::string certify_key(const RunConfig& cfg, const std::string& system_text);

}  // namespace csos::cli
