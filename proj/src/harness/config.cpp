#include "ddcbf/harness/config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "ddcbf/errors.hpp"
#include "ddcbf/util/binary_io.hpp"

namespace ddcbf::harness {

namespace {

/// Thrown by value parsers; rewrapped with file/line context.
struct ValueError {
  std::string what;
};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_integer(const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ValueError{"expected an integer, got '" + v + "'"};
  return out;
}

double parse_double(const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
    throw ValueError{"expected a number, got '" + v + "'"};
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValueError{"expected true/false, got '" + v + "'"};
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      // Network.
      {"num_cells", [](RunConfig& c, const std::string& v) { c.net.num_cells = parse_integer<int>(v); }},
      {"users_per_cell", [](RunConfig& c, const std::string& v) { c.net.users_per_cell = parse_integer<int>(v); }},
      {"array_rows", [](RunConfig& c, const std::string& v) { c.net.array_rows = parse_integer<int>(v); }},
      {"array_cols", [](RunConfig& c, const std::string& v) { c.net.array_cols = parse_integer<int>(v); }},
      {"p_max_dbm", [](RunConfig& c, const std::string& v) { c.net.max_power = dbm_to_watt(parse_double(v)); }},
      {"noise_dbm", [](RunConfig& c, const std::string& v) { c.net.noise_power = dbm_to_watt(parse_double(v)); }},
      {"carrier_freq_hz", [](RunConfig& c, const std::string& v) { c.net.carrier_freq = parse_double(v); }},
      {"cell_radius_m", [](RunConfig& c, const std::string& v) { c.net.cell_radius = parse_double(v); }},
      {"slot_duration_s", [](RunConfig& c, const std::string& v) { c.net.slot_duration = parse_double(v); }},
      {"ue_speed_kmh", [](RunConfig& c, const std::string& v) { c.net.ue_speed = parse_double(v) / 3.6; }},
      // Channel.
      {"channel_model", [](RunConfig& c, const std::string& v) {
         try {
           c.channel.model = parse_channel_model(v);
         } catch (const ConfigError& e) {
           throw ValueError{e.what()};
         }
       }},
      {"temporal_corr", [](RunConfig& c, const std::string& v) { c.channel.temporal_corr = parse_double(v); }},
      {"pathloss_exponent", [](RunConfig& c, const std::string& v) { c.channel.pathloss_exponent = parse_double(v); }},
      {"pathloss_ref_db", [](RunConfig& c, const std::string& v) { c.channel.pathloss_ref_db = parse_double(v); }},
      {"pathloss_ref_distance_m", [](RunConfig& c, const std::string& v) { c.channel.pathloss_ref_distance = parse_double(v); }},
      {"num_rays", [](RunConfig& c, const std::string& v) { c.channel.num_rays = parse_integer<int>(v); }},
      {"azimuth_spread_deg", [](RunConfig& c, const std::string& v) { c.channel.azimuth_spread_deg = parse_double(v); }},
      {"elevation_spread_deg", [](RunConfig& c, const std::string& v) { c.channel.elevation_spread_deg = parse_double(v); }},
      {"bs_height_m", [](RunConfig& c, const std::string& v) { c.channel.bs_height = parse_double(v); }},
      {"ue_height_m", [](RunConfig& c, const std::string& v) { c.channel.ue_height = parse_double(v); }},
      {"channel_seed", [](RunConfig& c, const std::string& v) { c.channel.rng_seed = parse_integer<std::uint64_t>(v); }},
      // State/action design.
      {"codebook_size", [](RunConfig& c, const std::string& v) { c.env.codebook_size = parse_integer<int>(v); }},
      {"compressed_size", [](RunConfig& c, const std::string& v) { c.env.compressed_size = parse_integer<int>(v); }},
      {"num_interferers", [](RunConfig& c, const std::string& v) { c.env.num_interferers = parse_integer<int>(v); }},
      // DDPG.
      {"hidden_layers", [](RunConfig& c, const std::string& v) {
         c.ddpg.hidden.clear();
         for (const auto& item : split_list(v)) c.ddpg.hidden.push_back(parse_integer<int>(item));
       }},
      {"gamma", [](RunConfig& c, const std::string& v) { c.ddpg.gamma = parse_double(v); }},
      {"rho", [](RunConfig& c, const std::string& v) { c.ddpg.rho = parse_double(v); }},
      {"lr_actor", [](RunConfig& c, const std::string& v) { c.ddpg.lr_actor = parse_double(v); }},
      {"lr_critic", [](RunConfig& c, const std::string& v) { c.ddpg.lr_critic = parse_double(v); }},
      {"replay_capacity", [](RunConfig& c, const std::string& v) { c.ddpg.replay_capacity = parse_integer<std::size_t>(v); }},
      {"batch_size", [](RunConfig& c, const std::string& v) { c.ddpg.batch_size = parse_integer<std::size_t>(v); }},
      {"noise_init", [](RunConfig& c, const std::string& v) { c.ddpg.noise_init = parse_double(v); }},
      {"noise_decay", [](RunConfig& c, const std::string& v) { c.ddpg.noise_decay = parse_double(v); }},
      {"noise_min", [](RunConfig& c, const std::string& v) { c.ddpg.noise_min = parse_double(v); }},
      {"agent_seed", [](RunConfig& c, const std::string& v) { c.ddpg.seed = parse_integer<std::uint64_t>(v); }},
      // WMMSE.
      {"wmmse_eps", [](RunConfig& c, const std::string& v) { c.wmmse.stop_eps = parse_double(v); }},
      {"wmmse_max_iter", [](RunConfig& c, const std::string& v) { c.wmmse.max_iter = parse_integer<int>(v); }},
      {"wmmse_seed", [](RunConfig& c, const std::string& v) { c.wmmse.init_seed = parse_integer<std::uint64_t>(v); }},
      {"wmmse_every", [](RunConfig& c, const std::string& v) { c.wmmse_every = parse_integer<int>(v); }},
      // Run control.
      {"num_slots", [](RunConfig& c, const std::string& v) { c.num_slots = parse_integer<std::int64_t>(v); }},
      {"schemes", [](RunConfig& c, const std::string& v) { c.schemes = split_list(v); }},
      {"moving_window", [](RunConfig& c, const std::string& v) { c.moving_window = parse_integer<int>(v); }},
      {"eval_slots", [](RunConfig& c, const std::string& v) { c.eval_slots = parse_integer<std::int64_t>(v); }},
      {"eval_seed", [](RunConfig& c, const std::string& v) { c.eval_seed = parse_integer<std::uint64_t>(v); }},
      {"checkpoint_every", [](RunConfig& c, const std::string& v) { c.checkpoint_every = parse_integer<std::int64_t>(v); }},
      {"record_timing", [](RunConfig& c, const std::string& v) { c.record_timing = parse_bool(v); }},
      {"timing_trials", [](RunConfig& c, const std::string& v) { c.timing_trials = parse_integer<int>(v); }},
      {"output_dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; }},
  };
  return table;
}

const std::vector<std::string> kMandatory = {"num_cells", "users_per_cell", "array_rows",
                                             "array_cols", "num_slots"};

bool known_scheme(const std::string& s) {
  if (s == "ddcbf" || s == "mslnr-ddpg" || s == "mslnr-ep" || s == "wmmse" || s == "mrt")
    return true;
  if (s.rfind("wmmse-", 0) == 0 && s.size() > 8 && s.substr(s.size() - 2) == "ri") {
    const std::string count = s.substr(6, s.size() - 8);
    return count.find_first_not_of("0123456789") == std::string::npos && count != "0";
  }
  return false;
}

}  // namespace

std::uint64_t RunConfig::hash() const {
  io::ByteWriter w;
  w.u32(static_cast<std::uint32_t>(net.num_cells));
  w.u32(static_cast<std::uint32_t>(net.users_per_cell));
  w.u32(static_cast<std::uint32_t>(net.array_rows));
  w.u32(static_cast<std::uint32_t>(net.array_cols));
  for (double x : {net.max_power, net.noise_power, net.carrier_freq, net.cell_radius,
                   net.slot_duration, net.ue_speed})
    w.f64(x);
  w.u64(channel.hash());
  w.u32(static_cast<std::uint32_t>(env.codebook_size));
  w.u32(static_cast<std::uint32_t>(env.compressed_size));
  w.u32(static_cast<std::uint32_t>(env.num_interferers));
  for (int h : ddpg.hidden) w.u32(static_cast<std::uint32_t>(h));
  for (double x : {ddpg.gamma, ddpg.rho, ddpg.lr_actor, ddpg.lr_critic, ddpg.noise_init,
                   ddpg.noise_decay, ddpg.noise_min})
    w.f64(x);
  w.u64(ddpg.replay_capacity);
  w.u64(ddpg.batch_size);
  w.u64(ddpg.seed);
  w.f64(wmmse.stop_eps);
  w.u32(static_cast<std::uint32_t>(wmmse.max_iter));
  w.u64(wmmse.init_seed);
  w.u32(static_cast<std::uint32_t>(wmmse_every));
  for (const auto& s : schemes) w.str(s);
  w.u32(static_cast<std::uint32_t>(moving_window));
  w.u64(static_cast<std::uint64_t>(eval_slots));
  w.u64(eval_seed);
  w.u8(record_timing ? 1 : 0);
  return io::fnv1a(w.bytes());
}

void RunConfig::validate() const {
  net.validate();
  channel.validate();
  env.validate(net);
  ddpg.validate();
  if (num_slots < 1) throw ConfigError("num_slots must be >= 1");
  if (moving_window < 1) throw ConfigError("moving_window must be >= 1");
  if (wmmse_every < 1) throw ConfigError("wmmse_every must be >= 1");
  if (eval_slots < 1) throw ConfigError("eval_slots must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (timing_trials < 1) throw ConfigError("timing_trials must be >= 1");
  if (!(wmmse.stop_eps > 0.0) || wmmse.max_iter < 1)
    throw ConfigError("wmmse_eps must be > 0 and wmmse_max_iter >= 1");
  if (schemes.empty()) throw ConfigError("schemes must list at least one scheme");
  std::set<std::string> seen;
  for (const auto& s : schemes) {
    if (!known_scheme(s)) throw ConfigError("unknown scheme '" + s + "'");
    if (!seen.insert(s).second) throw ConfigError("scheme '" + s + "' listed twice");
  }
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  cfg.net.max_power = dbm_to_watt(38.0);
  cfg.net.noise_power = dbm_to_watt(-101.0);
  std::set<std::string> given;
  std::istringstream in(text);
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = origin + ":" + std::to_string(number) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + "expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!given.insert(key).second)
      throw ConfigError(where + "key '" + key + "' set more than once");
    if (value.empty()) throw ConfigError(where + "key '" + key + "' has no value");
    try {
      it->second(cfg, value);
    } catch (const ValueError& e) {
      throw ConfigError(where + "key '" + key + "': " + e.what);
    }
  }
  for (const auto& key : kMandatory)
    if (!given.count(key))
      throw ConfigError(origin + ": missing mandatory key '" + key + "'");
  if (!given.count("temporal_corr")) {
    cfg.channel.temporal_corr = jakes_correlation(cfg.net);
    if (cfg.channel.temporal_corr < 0.0)
      throw ConfigError(origin + ": the Jakes correlation at this ue_speed_kmh is negative; "
                        "set temporal_corr explicitly");
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::string resolve_output_dir(const RunConfig& cfg) {
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return cfg.output_dir;
}

}  // namespace ddcbf::harness
