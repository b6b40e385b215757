#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ddcbf/harness/config.hpp"

namespace ddcbf::harness {

struct SchemeSummary {
  std::string scheme;
  double final_moving_avg = 0.0;
  double mean_sum_rate = 0.0;
  std::int64_t samples = 0;  // slots on which the scheme was evaluated
};

struct TrainOptions {
  bool resume = false;
  /// Stop (with a checkpoint) once this slot index is reached; -1 runs to
  /// num_slots.
  std::int64_t stop_at = -1;
};

struct TrainResult {
  std::int64_t next_slot = 0;
  bool complete = false;
  std::vector<SchemeSummary> schemes;
  std::string metrics_path;
  std::string events_path;
  std::string checkpoint_path;
};

/// Online training of every DRL scheme in `cfg.schemes`, with the non-learning
/// schemes scored on the same channel stream. Writes metrics.csv, events.jsonl
/// and checkpoint.bin into the output directory.
TrainResult run_train(const RunConfig& cfg, const TrainOptions& options = {});

struct BenchOptions {
  std::vector<std::string> schemes;  // empty: cfg.schemes
  std::string checkpoint;            // required by DRL schemes
  std::string trace;                 // empty: generate from the channel config
  std::int64_t num_slots = -1;       // -1: cfg.num_slots (or the trace length)
  std::uint64_t channel_seed = 0;    // used when `override_seed` is set
  bool override_seed = false;
  std::string tag = "bench";         // output file prefix
};

struct BenchResult {
  std::vector<SchemeSummary> schemes;
  std::map<std::string, std::vector<double>> sum_rates;  // evaluated slots only
};

/// Greedy evaluation of the selected schemes on one channel trace. Writes
/// <tag>.csv (per-slot rows) and <tag>_cdf.csv.
BenchResult run_benchmark(const RunConfig& cfg, const BenchOptions& options);

/// run_benchmark over `eval_slots` fresh slots drawn with `eval_seed`.
BenchResult run_eval(const RunConfig& cfg, const std::string& checkpoint);

struct TimingRow {
  std::string path;
  double median_s = 0.0;
  double q1_s = 0.0;
  double q3_s = 0.0;
  std::vector<double> samples_s;
};

/// Wall-clock of the per-BS DRL decision path, per-BS MSLNR and MRT, and a
/// full WMMSE run, each over `timing_trials` trials on one channel instance.
/// Writes timing.csv.
std::vector<TimingRow> run_timing(const RunConfig& cfg);

/// Checkpoint file used by run_train inside `output_dir`.
std::string checkpoint_path(const std::string& output_dir);

inline constexpr std::string_view kCheckpointMagic{"DDCBF-CHECKPT01\n", 16};

}  // namespace ddcbf::harness
