#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rtls/sim.hpp"
#include "rtls/tuner.hpp"

namespace rtls::config {

/// Parses the INI-style simulation config: `[section]` headers, `key =
/// value` lines, `#` comments, and repeatable `anchor` / `tag` / `wall`
/// keys in the world section. Unknown keys and malformed values are
/// reported; semantic problems surface through SimConfig::validate().
sim::SimConfig load_sim_config(const std::string& path);

/// Parses a `[grid]` file with beta1/beta2/gamma value lists.
std::vector<scheduler::GridPoint> load_grid(const std::string& path);

/// Canonical flat serialization of a resolved config: stable key order,
/// exact float formatting. Two files that parse to the same configuration
/// serialize (and therefore hash) identically.
std::string canonical_serialization(const sim::SimConfig& config);

/// FNV-1a hash of the canonical serialization, as fixed-width hex.
std::string config_hash(const sim::SimConfig& config);

}  // namespace rtls::config
