#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddcbf/channel.hpp"
#include "ddcbf/drl.hpp"
#include "ddcbf/env.hpp"
#include "ddcbf/network.hpp"
#include "ddcbf/solvers.hpp"

namespace ddcbf::harness {

/// Everything a run needs. Parsed from a flat `key = value` file; see
/// parse_config() and the README for the key list and defaults.
struct RunConfig {
  NetworkConfig net;
  ChannelModelConfig channel;
  env::EnvConfig env;
  drl::DdpgConfig ddpg;
  WmmseOptions wmmse;

  std::int64_t num_slots = 0;
  /// Schemes driven by `train` and `bench`: ddcbf, mslnr-ddpg, mslnr-ep,
  /// wmmse, wmmse-<R>ri, mrt.
  std::vector<std::string> schemes{"ddcbf", "mslnr-ddpg", "mslnr-ep"};
  /// WMMSE benchmarks run on every n-th slot (and on the final window).
  int wmmse_every = 1;
  int moving_window = 200;
  std::int64_t eval_slots = 200;
  std::uint64_t eval_seed = 7;
  std::int64_t checkpoint_every = 0;  // 0: only at the end
  bool record_timing = false;
  int timing_trials = 30;
  std::string output_dir = "out";

  /// Fingerprint of every field that influences results.
  std::uint64_t hash() const;
  void validate() const;
};

/// Parses a configuration file. Errors name the file and line.
RunConfig parse_config(const std::string& path);
/// Parses configuration text; `origin` labels error messages.
RunConfig parse_config_text(const std::string& text,
                            const std::string& origin = "<config>");

/// Output directory after applying the DDCBF_OUTPUT_DIR override.
std::string resolve_output_dir(const RunConfig& cfg);

inline constexpr const char* kOutputDirEnv = "DDCBF_OUTPUT_DIR";

}  // namespace ddcbf::harness
