#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace csub::cli {

enum ExitCode : int { kOk = 0, kIdentityFailure = 1, kConfigError = 2, kNumericalBreakdown = 3 };

/// Bad configuration or command line; maps to exit 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

const std::vector<std::string> &known_suites();

struct SuiteConfig {
  std::string bundle = "flat_product:3:2";
  std::vector<std::string> suites = known_suites();
  int points = 5;
  double fd_step = 1e-4;
  std::map<std::string, double> tolerances;  // identity id → tolerance
  std::uint64_t seed = 1;
  std::string output;  // empty: stdout
};

/// Parses a SuiteConfig document; unknown keys, suites and identities raise ConfigError.
SuiteConfig parse_config(const nlohmann::json &doc);
SuiteConfig load_config(const std::string &path);
void validate(const SuiteConfig &config);

/// Worker count from CSUB_WORKERS, else hardware concurrency (at least 1).
int default_workers();

struct VerifyOutcome {
  int exit_code = kOk;
  nlohmann::json report;
};

/// Runs the selected suites; the report is identical for any worker count.
VerifyOutcome cmd_verify(const SuiteConfig &config, int workers);

/// Report text with the timestamp field included; deterministic apart from it.
std::string render_report(const nlohmann::json &report);

/// Full command-line entry point; returns the process exit code.
int run(int argc, char **argv, std::ostream &out, std::ostream &err);

}  // namespace csub::cli
