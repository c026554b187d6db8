#pragma once

#include <cstdint>
#include <string>

#include "ranlin/system.hpp"

namespace ranlin {

// System description file (JSON): dimension, blocks, driving, linear_part,
// nonlinearity, rho, alpha.  Validation errors carry the offending field
// path.
RandomMapSystem parse_system_file(const std::string& path);
RandomMapSystem parse_system_text(const std::string& text);

struct RunConfig {
  std::string subcommand;
  std::string system_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  double radius = 0.0;       // 0 = default
  double tol = 0.0;          // 0 = default
  long horizon = 0;          // 0 = default
  bool strict_radius = false;
  int workers = 1;
};

// Exit codes: 0 all checks pass, 2 resonance/precondition abort, 1 numeric
// failure.
int run(const RunConfig& cfg);

std::uint64_t config_hash(const RunConfig& cfg, const std::string& system_text);

}  // namespace ranlin
