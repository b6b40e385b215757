#include "ddcbf/harness/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <fstream>

#include <json.hpp>

#include "ddcbf/channel.hpp"
#include "ddcbf/drl.hpp"
#include "ddcbf/env.hpp"
#include "ddcbf/errors.hpp"
#include "ddcbf/harness/metrics.hpp"
#include "ddcbf/solvers.hpp"
#include "ddcbf/util/log.hpp"
#include "ddcbf/util/rng.hpp"

namespace ddcbf::harness {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool is_learner(const std::string& name) {
  return name == "ddcbf" || name == "mslnr-ddpg";
}

/// 1 for "wmmse", R for "wmmse-<R>ri", 0 otherwise.
int wmmse_restarts(const std::string& name) {
  if (name == "wmmse") return 1;
  if (name.rfind("wmmse-", 0) == 0) return std::stoi(name.substr(6, name.size() - 8));
  return 0;
}

std::string blob(const io::ByteWriter& w) {
  return std::string(w.bytes().begin(), w.bytes().end());
}

io::ByteReader reader_of(const std::string& s) {
  return io::ByteReader(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

struct SlotOutcome {
  bool evaluated = false;
  SlotMetrics metrics;
  std::vector<double> rewards;
  double sigma = 0.0;
  double decision_us = 0.0;
};

class Scheme {
 public:
  Scheme(std::string name, int window) : name_(std::move(name)), average_(window) {}
  virtual ~Scheme() = default;

  const std::string& name() const { return name_; }

  virtual void start(const ChannelState&) {}
  virtual SlotOutcome run(const ChannelState& channel, const ChannelState& next,
                          std::int64_t slot) = 0;

  double record(double sum_rate) {
    total_ += sum_rate;
    ++samples_;
    return average_.push(sum_rate);
  }

  SchemeSummary summary() const {
    return {name_, average_.value(),
            samples_ ? total_ / static_cast<double>(samples_) : 0.0, samples_};
  }

  virtual void save(io::ByteWriter& out) const { save_stats(out); }
  virtual void load(io::ByteReader& in) { load_stats(in); }

 protected:
  void save_stats(io::ByteWriter& out) const {
    average_.save(out);
    out.f64(total_);
    out.i64(samples_);
  }
  void load_stats(io::ByteReader& in) {
    average_.load(in);
    total_ = in.f64();
    samples_ = in.i64();
  }

 private:
  std::string name_;
  MovingAverage average_;
  double total_ = 0.0;
  std::int64_t samples_ = 0;
};

/// N DDPG agents acting on their own copy of the environment.
class Learner final : public Scheme {
 public:
  Learner(const std::string& name, const RunConfig& cfg, bool training)
      : Scheme(name, cfg.moving_window),
        cfg_(cfg),
        training_(training),
        env_(cfg.net, env_config(name, cfg)) {
    const std::uint64_t scheme_seed =
        splitmix64(cfg.ddpg.seed + (name == "ddcbf" ? 1 : 2));
    for (int n = 0; n < cfg.net.num_cells; ++n) {
      drl::DdpgConfig dc = cfg.ddpg;
      dc.seed = splitmix64(scheme_seed + static_cast<std::uint64_t>(n));
      agents_.emplace_back(env_.state_dim(), env_.action_dim(), dc);
    }
  }

  void start(const ChannelState& first) override { env_.reset(first); }

  SlotOutcome run(const ChannelState&, const ChannelState& next,
                  std::int64_t slot) override {
    const std::vector<RVector> states = env_.states();
    std::vector<RVector> actions(agents_.size());
    const auto t0 = Clock::now();
    for (std::size_t n = 0; n < agents_.size(); ++n) {
      auto& agent = agents_[n];
      actions[n] = training_ && !agent.ready() ? agent.random_action()
                                               : agent.act(states[n], training_);
    }
    SlotOutcome out;
    if (cfg_.record_timing) {
      (void)env_.beams_for(actions);
      out.decision_us = seconds_since(t0) * 1e6 / static_cast<double>(agents_.size());
    }

    env::StepResult res = env_.step(actions, next);
    out.evaluated = true;
    out.metrics = std::move(res.metrics);
    for (const auto& r : res.rewards) out.rewards.push_back(r.reward);

    if (training_) {
      const auto& next_states = env_.states();
      for (std::size_t n = 0; n < agents_.size(); ++n)
        agents_[n].remember({states[n], actions[n], res.rewards[n].reward, next_states[n]});
      for (std::size_t n = 0; n < agents_.size(); ++n) {
        auto& agent = agents_[n];
        if (!agent.ready()) continue;
        const auto where = "scheme " + name() + ", BS " + std::to_string(n) + ", slot " +
                           std::to_string(slot);
        try {
          const auto stats = agent.train_step();
          if (!std::isfinite(stats.critic_loss) || !std::isfinite(stats.mean_q))
            throw NumericError("non-finite critic loss");
        } catch (const NumericError& e) {
          throw NumericError(where + ": " + e.what());
        }
        agent.soft_update(cfg_.ddpg.rho);
      }
    }
    out.sigma = agents_.front().noise_sigma();
    return out;
  }

  void save(io::ByteWriter& out) const override {
    out.u32(static_cast<std::uint32_t>(agents_.size()));
    for (const auto& a : agents_) a.save(out);
    env_.save_state(out);
    save_stats(out);
  }

  void load(io::ByteReader& in) override {
    load_agents(in);
    env_.load_state(in);
    load_stats(in);
  }

  /// Reads only the agents of a saved block (the layout puts them first).
  void load_agents(io::ByteReader& in) {
    if (in.u32() != agents_.size())
      throw ConfigError("checkpoint was trained with a different number of cells");
    for (auto& a : agents_) {
      drl::DdpgAgent loaded;
      loaded.load(in);
      if (loaded.state_dim() != env_.state_dim() || loaded.action_dim() != env_.action_dim())
        throw ConfigError("checkpoint agents do not match the configured state/action sizes");
      a = std::move(loaded);
    }
  }

 private:
  static env::EnvConfig env_config(const std::string& name, const RunConfig& cfg) {
    env::EnvConfig e = cfg.env;
    e.mode = name == "ddcbf" ? env::ActionMode::kStructured : env::ActionMode::kPowerOnly;
    return e;
  }

  const RunConfig& cfg_;
  bool training_;
  env::Environment env_;
  std::vector<drl::DdpgAgent> agents_;
};

/// Schemes computed directly from the slot's channel.
class Direct final : public Scheme {
 public:
  Direct(const std::string& name, const RunConfig& cfg, std::int64_t total_slots)
      : Scheme(name, cfg.moving_window),
        cfg_(cfg),
        restarts_(wmmse_restarts(name)),
        final_window_start_(total_slots - cfg.moving_window) {}

  SlotOutcome run(const ChannelState& channel, const ChannelState&,
                  std::int64_t slot) override {
    SlotOutcome out;
    if (restarts_ > 0 && slot % cfg_.wmmse_every != 0 && slot < final_window_start_)
      return out;
    const auto t0 = Clock::now();
    const BeamformerSet beams = beamform(channel, slot);
    const double elapsed = seconds_since(t0);
    if (cfg_.record_timing)
      out.decision_us = restarts_ > 0 ? elapsed * 1e6 : elapsed * 1e6 / cfg_.net.num_cells;
    out.evaluated = true;
    out.metrics = compute_metrics(channel, beams, cfg_.net);
    out.rewards.assign(static_cast<std::size_t>(cfg_.net.num_cells),
                       std::numeric_limits<double>::quiet_NaN());
    return out;
  }

 private:
  BeamformerSet beamform(const ChannelState& channel, std::int64_t slot) const {
    const auto& net = cfg_.net;
    if (name() == "mslnr-ep") return mslnr_equal_power(channel, net);
    if (name() == "mrt") {
      BeamformerSet beams(net.num_cells, net.users_per_cell, net.num_antennas());
      const double amp = std::sqrt(net.max_power / net.users_per_cell);
      for (int n = 0; n < net.num_cells; ++n)
        for (int k = 0; k < net.users_per_cell; ++k)
          beams.beam(n, k) = amp * mrt_beamformer(channel.link(n, n, k));
      return beams;
    }
    WmmseOptions opts = cfg_.wmmse;
    opts.init_seed = splitmix64(cfg_.wmmse.init_seed + static_cast<std::uint64_t>(slot));
    if (restarts_ == 1) return wmmse(channel, net, opts).beams;
    return wmmse_multi_init(channel, net, opts, restarts_).beams;
  }

  const RunConfig& cfg_;
  int restarts_;
  std::int64_t final_window_start_;
};

std::vector<std::unique_ptr<Scheme>> make_schemes(const RunConfig& cfg,
                                                  const std::vector<std::string>& names,
                                                  bool training, std::int64_t total_slots) {
  std::vector<std::unique_ptr<Scheme>> out;
  for (const auto& name : names) {
    if (is_learner(name))
      out.push_back(std::make_unique<Learner>(name, cfg, training));
    else
      out.push_back(std::make_unique<Direct>(name, cfg, total_slots));
  }
  return out;
}

MetricRow make_row(std::int64_t slot, const std::string& scheme, const SlotOutcome& o,
                   double moving_avg, const NetworkConfig& net) {
  MetricRow row;
  row.slot = slot;
  row.scheme = scheme;
  row.sum_rate = sum_rate(o.metrics);
  row.moving_avg = moving_avg;
  row.sigma_a = o.sigma;
  row.decision_us = o.decision_us;
  for (int n = 0; n < net.num_cells; ++n)
    row.cell_rates.push_back(o.metrics.rate.segment(n * net.users_per_cell,
                                                    net.users_per_cell).sum());
  row.rewards = o.rewards;
  return row;
}

/// Runs every scheme on one slot and appends their rows.
void run_slot(std::vector<std::unique_ptr<Scheme>>& schemes, const ChannelState& channel,
              const ChannelState& next, std::int64_t slot, const NetworkConfig& net,
              MetricWriter& writer, BenchResult* collect) {
  for (auto& s : schemes) {
    const SlotOutcome o = s->run(channel, next, slot);
    if (!o.evaluated) continue;
    const double rate = sum_rate(o.metrics);
    const double avg = s->record(rate);
    writer.add(make_row(slot, s->name(), o, avg, net));
    if (collect) collect->sum_rates[s->name()].push_back(rate);
  }
  writer.flush();
}

struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::int64_t next_slot = 0;
  std::int64_t metrics_size = 0;
  std::int64_t events_size = 0;
  std::string generator;
  std::vector<std::pair<std::string, std::string>> schemes;
};

void write_checkpoint(const Checkpoint& c, const std::string& path) {
  io::ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u64(c.config_hash);
  w.i64(c.next_slot);
  w.i64(c.metrics_size);
  w.i64(c.events_size);
  w.str(c.generator);
  w.u32(static_cast<std::uint32_t>(c.schemes.size()));
  for (const auto& [name, data] : c.schemes) {
    w.str(name);
    w.str(data);
  }
  const std::string tmp = path + ".tmp";
  io::write_checked_file(tmp, w);
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::string& path) {
  const auto bytes = io::read_checked_file(path);
  io::ByteReader r(bytes);
  if (bytes.size() < kCheckpointMagic.size() || r.raw(kCheckpointMagic.size()) != kCheckpointMagic)
    throw IoError(path + " is not a training checkpoint");
  Checkpoint c;
  c.config_hash = r.u64();
  c.next_slot = r.i64();
  c.metrics_size = r.i64();
  c.events_size = r.i64();
  c.generator = r.str();
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    c.schemes.emplace_back(std::move(name), r.str());
  }
  return c;
}

/// Mirrors library warnings into the event log for the lifetime of the object.
class WarningCapture {
 public:
  explicit WarningCapture(EventLog& events) {
    previous_ = log::set_sink([this, &events](log::Level level, const std::string& msg) {
      if (level == log::Level::kWarning)
        events.write(json{{"event", "warning"}, {"message", msg}}.dump());
      if (previous_) previous_(level, msg);
    });
  }
  ~WarningCapture() { log::set_sink(std::move(previous_)); }
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

 private:
  log::Sink previous_;
};

std::string prepare_output_dir(const RunConfig& cfg) {
  const std::string dir = resolve_output_dir(cfg);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  return dir;
}

double quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::string checkpoint_path(const std::string& output_dir) {
  return (std::filesystem::path(output_dir) / "checkpoint.bin").string();
}

TrainResult run_train(const RunConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  const std::string dir = prepare_output_dir(cfg);
  TrainResult result;
  result.metrics_path = (std::filesystem::path(dir) / "metrics.csv").string();
  result.events_path = (std::filesystem::path(dir) / "events.jsonl").string();
  result.checkpoint_path = checkpoint_path(dir);

  auto schemes = make_schemes(cfg, cfg.schemes, true, cfg.num_slots);
  ChannelGenerator generator(cfg.net, cfg.channel);
  std::int64_t slot = 0;
  std::int64_t metrics_at = -1;
  std::int64_t events_at = -1;
  if (options.resume) {
    const Checkpoint c = read_checkpoint(result.checkpoint_path);
    if (c.config_hash != cfg.hash())
      throw ConfigError("checkpoint " + result.checkpoint_path +
                        " was written with a different configuration");
    if (c.schemes.size() != schemes.size())
      throw ConfigError("checkpoint scheme list does not match the configuration");
    auto gr = reader_of(c.generator);
    generator.load_state(gr);
    for (std::size_t i = 0; i < schemes.size(); ++i) {
      if (c.schemes[i].first != schemes[i]->name())
        throw ConfigError("checkpoint scheme list does not match the configuration");
      auto sr = reader_of(c.schemes[i].second);
      schemes[i]->load(sr);
    }
    slot = c.next_slot;
    metrics_at = c.metrics_size;
    events_at = c.events_size;
  } else {
    generator.next();
    for (auto& s : schemes) s->start(generator.current());
  }

  MetricWriter writer(result.metrics_path, cfg.net.num_cells, metrics_at);
  EventLog events(result.events_path, events_at);
  WarningCapture capture(events);
  char hash_hex[17];
  std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                static_cast<unsigned long long>(cfg.hash()));
  events.write(json{{"event", options.resume ? "resume" : "start"},
                    {"slot", slot},
                    {"config_hash", hash_hex},
                    {"num_slots", cfg.num_slots}}
                   .dump());

  auto save = [&](const std::string& path) {
    Checkpoint c;
    c.config_hash = cfg.hash();
    c.next_slot = slot;
    c.metrics_size = writer.size();
    io::ByteWriter gw;
    generator.save_state(gw);
    c.generator = blob(gw);
    for (const auto& s : schemes) {
      io::ByteWriter sw;
      s->save(sw);
      c.schemes.emplace_back(s->name(), blob(sw));
    }
    events.write(json{{"event", "checkpoint"}, {"slot", slot}, {"path", path}}.dump());
    c.events_size = events.size();
    write_checkpoint(c, path);
  };

  const std::int64_t end =
      options.stop_at >= 0 ? std::min(options.stop_at, cfg.num_slots) : cfg.num_slots;
  try {
    for (; slot < end;) {
      const ChannelState channel = generator.current();
      const ChannelState& next = generator.next();
      run_slot(schemes, channel, next, slot, cfg.net, writer, nullptr);
      ++slot;
      if (cfg.checkpoint_every > 0 && slot % cfg.checkpoint_every == 0 && slot < end)
        save(result.checkpoint_path);
    }
  } catch (const NumericError& e) {
    writer.flush();
    const std::string dump = (std::filesystem::path(dir) / "failure.bin").string();
    events.write(json{{"event", "numeric_failure"}, {"slot", slot}, {"message", e.what()}}.dump());
    save(dump);
    throw NumericError(std::string(e.what()) + " (state dumped to " + dump + ")");
  }

  save(result.checkpoint_path);
  result.next_slot = slot;
  result.complete = slot >= cfg.num_slots;
  for (const auto& s : schemes) result.schemes.push_back(s->summary());
  if (result.complete) {
    json summary = json::array();
    for (const auto& s : result.schemes)
      summary.push_back({{"scheme", s.scheme},
                         {"final_moving_avg", s.final_moving_avg},
                         {"mean_sum_rate", s.mean_sum_rate},
                         {"samples", s.samples}});
    events.write(json{{"event", "done"}, {"slot", slot}, {"summary", summary}}.dump());
  }
  return result;
}

BenchResult run_benchmark(const RunConfig& base, const BenchOptions& options) {
  RunConfig cfg = base;
  if (!options.schemes.empty()) cfg.schemes = options.schemes;
  cfg.validate();
  const std::string dir = prepare_output_dir(cfg);

  std::vector<ChannelState> trace;
  std::int64_t slots = options.num_slots > 0 ? options.num_slots : cfg.num_slots;
  if (!options.trace.empty()) {
    ChannelTrace t = load_trace(options.trace);
    if (t.header.num_cells != static_cast<std::uint32_t>(cfg.net.num_cells) ||
        t.header.users_per_cell != static_cast<std::uint32_t>(cfg.net.users_per_cell) ||
        t.header.num_antennas != static_cast<std::uint32_t>(cfg.net.num_antennas()))
      throw ConfigError("trace " + options.trace + " does not match the configured network");
    if (t.slots.empty()) throw ConfigError("trace " + options.trace + " has no slots");
    trace = std::move(t.slots);
    if (options.num_slots <= 0) slots = static_cast<std::int64_t>(trace.size());
    if (slots > static_cast<std::int64_t>(trace.size()))
      throw ConfigError("trace " + options.trace + " is shorter than the requested slots");
  }

  auto schemes = make_schemes(cfg, cfg.schemes, false, slots);
  std::optional<Checkpoint> checkpoint;
  for (auto& s : schemes) {
    if (!is_learner(s->name())) continue;
    if (options.checkpoint.empty())
      throw ConfigError("scheme " + s->name() + " needs a trained checkpoint");
    if (!checkpoint) checkpoint = read_checkpoint(options.checkpoint);
    const auto it = std::find_if(checkpoint->schemes.begin(), checkpoint->schemes.end(),
                                 [&](const auto& e) { return e.first == s->name(); });
    if (it == checkpoint->schemes.end())
      throw ConfigError("checkpoint " + options.checkpoint + " has no agents for scheme " +
                        s->name());
    auto r = reader_of(it->second);
    static_cast<Learner&>(*s).load_agents(r);
  }

  ChannelModelConfig channel_cfg = cfg.channel;
  if (options.override_seed) channel_cfg.rng_seed = options.channel_seed;
  ChannelGenerator generator(cfg.net, channel_cfg);
  auto channel_at = [&](std::int64_t t) -> ChannelState {
    if (!trace.empty())
      return trace[static_cast<std::size_t>(std::min<std::int64_t>(
          t, static_cast<std::int64_t>(trace.size()) - 1))];
    return generator.next();
  };

  const std::string csv = (std::filesystem::path(dir) / (options.tag + ".csv")).string();
  MetricWriter writer(csv, cfg.net.num_cells);
  BenchResult result;
  ChannelState channel = channel_at(0);
  for (auto& s : schemes) s->start(channel);
  for (std::int64_t t = 0; t < slots; ++t) {
    ChannelState next = channel_at(t + 1);
    run_slot(schemes, channel, next, t, cfg.net, writer, &result);
    channel = std::move(next);
  }
  for (const auto& s : schemes) result.schemes.push_back(s->summary());

  const std::string cdf_path =
      (std::filesystem::path(dir) / (options.tag + "_cdf.csv")).string();
  std::ofstream cdf(cdf_path, std::ios::binary | std::ios::trunc);
  if (!cdf) throw IoError("cannot create " + cdf_path);
  cdf << "scheme,sum_rate,cdf\n";
  char buf[96];
  for (const auto& s : schemes) {
    for (const auto& [value, level] : empirical_cdf(result.sum_rates[s->name()])) {
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", value, level);
      cdf << s->name() << buf;
    }
  }
  if (!cdf) throw IoError("write to " + cdf_path + " failed");
  return result;
}

BenchResult run_eval(const RunConfig& cfg, const std::string& checkpoint) {
  BenchOptions options;
  options.checkpoint = checkpoint;
  options.num_slots = cfg.eval_slots;
  options.override_seed = true;
  options.channel_seed = cfg.eval_seed;
  options.tag = "eval";
  return run_benchmark(cfg, options);
}

std::vector<TimingRow> run_timing(const RunConfig& cfg) {
  cfg.validate();
  const std::string dir = prepare_output_dir(cfg);
  const auto& net = cfg.net;
  ChannelGenerator generator(net, cfg.channel);
  const ChannelState channel = generator.next();

  env::EnvConfig ecfg = cfg.env;
  ecfg.mode = env::ActionMode::kStructured;
  env::Environment environment(net, ecfg);
  environment.reset(channel);
  drl::DdpgAgent agent(environment.state_dim(), environment.action_dim(), cfg.ddpg);
  const RVector state = environment.states().front();
  const RVector equal_q = RVector::Constant(net.users_per_cell, 1.0 / net.users_per_cell);

  std::vector<TimingRow> rows(4);
  rows[0].path = "ddcbf-decision-per-bs";
  rows[1].path = "mslnr-per-bs";
  rows[2].path = "mrt-per-bs";
  rows[3].path = "wmmse-full-run";
  double sink = 0.0;  // keeps the timed work observable
  for (int trial = 0; trial < cfg.timing_trials; ++trial) {
    auto t0 = Clock::now();
    const RVector action = agent.actor().forward(state);
    const StructuredParams params = env::decode_action(action, net);
    CMatrix w = structured_beamformer(channel.local_csi(0), 0, net.users_per_cell, params,
                                      net.max_power);
    rows[0].samples_s.push_back(seconds_since(t0));
    sink += std::abs(w(0, 0));

    t0 = Clock::now();
    w = mslnr_beamformer(channel.local_csi(0), 0, net.users_per_cell, net.noise_power,
                         net.max_power, equal_q);
    rows[1].samples_s.push_back(seconds_since(t0));
    sink += std::abs(w(0, 0));

    t0 = Clock::now();
    for (int k = 0; k < net.users_per_cell; ++k) {
      const CVector b = mrt_beamformer(channel.link(0, 0, k));
      sink += std::abs(b(0));
    }
    rows[2].samples_s.push_back(seconds_since(t0));

    WmmseOptions opts = cfg.wmmse;
    opts.init_seed = splitmix64(cfg.wmmse.init_seed + static_cast<std::uint64_t>(trial));
    t0 = Clock::now();
    const WmmseState s = wmmse(channel, net, opts);
    rows[3].samples_s.push_back(seconds_since(t0));
    sink += s.sum_rates.back();
  }
  if (!std::isfinite(sink)) log::warning("timing run produced non-finite outputs");

  const std::string path = (std::filesystem::path(dir) / "timing.csv").string();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path);
  out << "path,median_s,q1_s,q3_s,trials\n";
  char buf[128];
  for (auto& row : rows) {
    std::vector<double> sorted = row.samples_s;
    std::sort(sorted.begin(), sorted.end());
    row.median_s = quantile(sorted, 0.5);
    row.q1_s = quantile(sorted, 0.25);
    row.q3_s = quantile(sorted, 0.75);
    std::snprintf(buf, sizeof buf, ",%.9g,%.9g,%.9g,%zu\n", row.median_s, row.q1_s, row.q3_s,
                  sorted.size());
    out << row.path << buf;
  }
  if (!out) throw IoError("write to " + path + " failed");
  return rows;
}

}  // namespace ddcbf::harness
