// Command-line front end: trace generation, training, benchmarks, timing and
// evaluation. Exit codes: 0 ok, 1 other error, 2 configuration, 3 I/O,
// 4 numerical failure.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ddcbf/channel.hpp"
#include "ddcbf/errors.hpp"
#include "ddcbf/harness/config.hpp"
#include "ddcbf/harness/runner.hpp"
#include "ddcbf/util/alloc.hpp"

namespace {

using namespace ddcbf;
using namespace ddcbf::harness;

void print_summary(const std::vector<SchemeSummary>& rows) {
  std::printf("%-14s %14s %14s %10s\n", "scheme", "moving_avg", "mean", "slots");
  for (const auto& r : rows)
    std::printf("%-14s %14.6f %14.6f %10lld\n", r.scheme.c_str(), r.final_moving_avg,
                r.mean_sum_rate, static_cast<long long>(r.samples));
}

int fail(const char* category, const std::exception& e, int code) {
  std::fprintf(stderr, "ddcbf: %s error: %s\n", category, e.what());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  util::keep_heap_resident();
  CLI::App app{"Distributed dynamic coordinated beamforming lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::int64_t slots = -1;
  bool resume = false;
  std::int64_t stop_at = -1;
  std::vector<std::string> schemes;
  std::string checkpoint;
  std::string trace;

  auto* trace_gen = app.add_subcommand("trace-gen", "Generate a channel trace file");
  trace_gen->add_option("config", config_path, "Configuration file")->required();
  trace_gen->add_option("out", out_path, "Output trace file")->required();
  trace_gen->add_option("--slots", slots, "Number of slots (default: num_slots)");

  auto* train = app.add_subcommand("train", "Train the DRL schemes online");
  train->add_option("config", config_path, "Configuration file")->required();
  train->add_flag("--resume", resume, "Continue from the checkpoint in the output directory");
  train->add_option("--stop-at", stop_at, "Checkpoint and stop once this slot is reached");

  auto* bench = app.add_subcommand("bench", "Evaluate schemes on one channel trace");
  bench->add_option("config", config_path, "Configuration file")->required();
  bench->add_option("--schemes", schemes, "Comma-separated scheme list")->delimiter(',');
  bench->add_option("--checkpoint", checkpoint, "Training checkpoint for DRL schemes");
  bench->add_option("--trace", trace, "Trace file (default: generate)");
  bench->add_option("--slots", slots, "Number of slots");

  auto* timing = app.add_subcommand("timing", "Measure per-decision wall-clock time");
  timing->add_option("config", config_path, "Configuration file")->required();

  auto* eval = app.add_subcommand("eval", "Greedy evaluation of a trained checkpoint");
  eval->add_option("config", config_path, "Configuration file")->required();
  eval->add_option("--checkpoint", checkpoint, "Training checkpoint")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = parse_config(config_path);
    if (*trace_gen) {
      const auto t = generate_trace(cfg.net, cfg.channel, slots > 0 ? slots : cfg.num_slots);
      save_trace(t, out_path);
      std::printf("wrote %zu slots to %s\n", t.slots.size(), out_path.c_str());
    } else if (*train) {
      TrainOptions options;
      options.resume = resume;
      options.stop_at = stop_at;
      const TrainResult r = run_train(cfg, options);
      std::printf("%s at slot %lld; metrics in %s\n", r.complete ? "finished" : "stopped",
                  static_cast<long long>(r.next_slot), r.metrics_path.c_str());
      print_summary(r.schemes);
    } else if (*bench) {
      BenchOptions options;
      options.schemes = schemes;
      options.checkpoint = checkpoint;
      options.trace = trace;
      options.num_slots = slots;
      print_summary(run_benchmark(cfg, options).schemes);
    } else if (*timing) {
      std::printf("%-24s %14s %14s %14s\n", "path", "median_s", "q1_s", "q3_s");
      for (const auto& row : run_timing(cfg))
        std::printf("%-24s %14.6g %14.6g %14.6g\n", row.path.c_str(), row.median_s, row.q1_s,
                    row.q3_s);
    } else if (*eval) {
      print_summary(run_eval(cfg, checkpoint).schemes);
    }
  } catch (const ConfigError& e) {
    return fail("configuration", e, 2);
  } catch (const IoError& e) {
    return fail("I/O", e, 3);
  } catch (const NumericError& e) {
    return fail("numerical", e, 4);
  } catch (const std::exception& e) {
    return fail("internal", e, 1);
  }
  return 0;
}
