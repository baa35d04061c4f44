#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rtls::cli {

// exit codes, BSD sysexits style where applicable
inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 2;     // some problems failed to solve
inline constexpr int kExitInfeasible = 3;  // tuner found no feasible point
inline constexpr int kExitUsage = 64;
inline constexpr int kExitConfig = 65;
inline constexpr int kExitNoInput = 66;

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kConfigDirEnv = "RTLSIM_CONFIG_DIR";

struct SimulateOverrides {
  bool has_seed = false;
  std::uint64_t seed = 0;
  bool has_days = false;
  int days = 0;
  bool has_tags = false;
  int tags = 0;
  std::string scheduler;  // empty: keep config
  std::string output_dir;
  bool with_solvers = false;
};

int cmd_solve(const std::string& measurements_path, const std::string& solver,
              double tolerance, const std::string& output_path);

int cmd_simulate(const std::string& config_path,
                 const SimulateOverrides& overrides);

int cmd_tune(const std::string& config_path, const std::string& grid_path);

int cmd_report(const std::string& stats_dir);

/// Resolves a config path: as given if it exists, otherwise relative to
/// $RTLSIM_CONFIG_DIR when that is set.
std::string resolve_config_path(const std::string& path);

}  // namespace rtls::cli
