#include "ddcbf/channel.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "ddcbf/errors.hpp"
#include "ddcbf/util/log.hpp"

namespace ddcbf {
namespace {

constexpr double kSpeedOfLight = 299792458.0;
constexpr double kExclusionRadius = 10.0;

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

Complex complex_normal(Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  const double re = normal(rng);
  return {re, normal(rng)};
}

CVector draw_marginal(const Eigen::Vector2d& bs, const Eigen::Vector2d& ue,
                      const ChannelModelConfig& cfg, const NetworkConfig& net,
                      Rng& rng) {
  const Eigen::Vector2d delta = ue - bs;
  const double distance = delta.norm();
  const double amplitude =
      std::sqrt(db_to_linear(-path_loss_db(distance, cfg)));
  const int m = net.num_antennas();

  if (cfg.model != ChannelModel::kGeometricUra) {
    CVector h(m);
    for (int a = 0; a < m; ++a) h(a) = complex_normal(rng);
    return amplitude * h;
  }

  const double azimuth = std::atan2(delta.y(), delta.x());
  const double elevation =
      std::atan2(cfg.bs_height - cfg.ue_height, std::max(distance, 1e-9));
  std::normal_distribution<double> spread(0.0, 1.0);
  const double az_spread = deg_to_rad(cfg.azimuth_spread_deg);
  const double el_spread = deg_to_rad(cfg.elevation_spread_deg);

  CVector h = CVector::Zero(m);
  for (int l = 0; l < cfg.num_rays; ++l) {
    const double az = azimuth + az_spread * spread(rng);
    const double el = elevation + el_spread * spread(rng);
    const Complex gain = complex_normal(rng);
    h += gain * ura_steering(az, el, net.array_rows, net.array_cols);
  }
  // Unit-norm steering vectors and unit-variance gains: E|h|^2 = M * PL.
  return amplitude * std::sqrt(static_cast<double>(m) / cfg.num_rays) * h;
}

}  // namespace

std::string_view to_string(ChannelModel model) {
  switch (model) {
    case ChannelModel::kIidRayleigh:
      return "iid-rayleigh";
    case ChannelModel::kGaussMarkov:
      return "gauss-markov";
    case ChannelModel::kGeometricUra:
      return "geometric-ura";
  }
  return "unknown";
}

ChannelModel parse_channel_model(std::string_view name) {
  if (name == "iid-rayleigh") return ChannelModel::kIidRayleigh;
  if (name == "gauss-markov") return ChannelModel::kGaussMarkov;
  if (name == "geometric-ura") return ChannelModel::kGeometricUra;
  throw ConfigError("unknown channel model '" + std::string(name) + "'");
}

void ChannelModelConfig::validate() const {
  if (!(temporal_corr >= 0.0 && temporal_corr <= 1.0))
    throw ConfigError("temporal_corr must lie in [0, 1]");
  if (!(pathloss_exponent > 0.0))
    throw ConfigError("pathloss_exponent must be > 0");
  if (!(pathloss_ref_distance > 0.0))
    throw ConfigError("pathloss_ref_distance must be > 0");
  if (num_rays < 1) throw ConfigError("num_rays must be >= 1");
  if (!(azimuth_spread_deg >= 0.0) || !(elevation_spread_deg >= 0.0))
    throw ConfigError("angular spreads must be >= 0");
}

std::uint64_t ChannelModelConfig::hash() const {
  io::ByteWriter w;
  w.u8(static_cast<std::uint8_t>(model));
  w.f64(temporal_corr);
  w.f64(pathloss_exponent);
  w.f64(pathloss_ref_db);
  w.f64(pathloss_ref_distance);
  w.u32(static_cast<std::uint32_t>(num_rays));
  w.f64(azimuth_spread_deg);
  w.f64(elevation_spread_deg);
  w.f64(bs_height);
  w.f64(ue_height);
  w.u64(rng_seed);
  return io::fnv1a(w.bytes());
}

double jakes_correlation(const NetworkConfig& net) {
  const double doppler = net.ue_speed * net.carrier_freq / kSpeedOfLight;
  return std::cyl_bessel_j(0.0, 2.0 * std::numbers::pi * doppler *
                                    net.slot_duration);
}

std::vector<Eigen::Vector2d> hex_sites(int count, double isd) {
  std::vector<Eigen::Vector2d> sites;
  if (count <= 0) return sites;
  sites.emplace_back(0.0, 0.0);
  for (int ring = 1; static_cast<int>(sites.size()) < count; ++ring) {
    auto corner = [&](int i) {
      const double angle = std::numbers::pi / 3.0 * i;
      return Eigen::Vector2d(ring * isd * std::cos(angle),
                             ring * isd * std::sin(angle));
    };
    for (int side = 0; side < 6; ++side) {
      const Eigen::Vector2d from = corner(side);
      const Eigen::Vector2d to = corner(side + 1);
      for (int step = 0; step < ring; ++step) {
        if (static_cast<int>(sites.size()) == count) return sites;
        sites.push_back(from + (to - from) * (static_cast<double>(step) / ring));
      }
    }
  }
  return sites;
}

Topology init_topology(const NetworkConfig& net, std::uint64_t seed) {
  net.validate();
  Rng rng(seed);
  Topology topo;
  topo.bs_positions = hex_sites(net.num_cells, 2.0 * net.cell_radius);

  const double r_min = std::min(kExclusionRadius, 0.5 * net.cell_radius);
  std::uniform_real_distribution<double> radius_sq(r_min * r_min,
                                                   net.cell_radius *
                                                       net.cell_radius);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (int n = 0; n < net.num_cells; ++n) {
    for (int k = 0; k < net.users_per_cell; ++k) {
      const double r = std::sqrt(radius_sq(rng));
      const double theta = angle(rng);
      topo.ue_positions.push_back(topo.bs_positions[n] +
                                  r * Eigen::Vector2d(std::cos(theta),
                                                      std::sin(theta)));
      topo.ue_headings.push_back(angle(rng));
    }
  }
  return topo;
}

void advance_topology(Topology& topo, const NetworkConfig& net) {
  const double step = net.ue_speed * net.slot_duration;
  if (step == 0.0) return;
  const int users = net.users_per_cell;
  for (std::size_t u = 0; u < topo.ue_positions.size(); ++u) {
    const Eigen::Vector2d& bs = topo.bs_positions[u / users];
    Eigen::Vector2d& pos = topo.ue_positions[u];
    double& heading = topo.ue_headings[u];

    Eigen::Vector2d dir(std::cos(heading), std::sin(heading));
    Eigen::Vector2d next = pos + step * dir;
    if ((next - bs).norm() > net.cell_radius) {
      const Eigen::Vector2d radial = (pos - bs).normalized();
      dir -= 2.0 * dir.dot(radial) * radial;
      next = pos + step * dir;
      if ((next - bs).norm() > net.cell_radius) {
        // Grazing exit: head straight back towards the BS.
        dir = -radial;
        next = pos + step * dir;
      }
      heading = std::atan2(dir.y(), dir.x());
    }
    pos = next;
  }
}

CVector ura_steering(double azimuth, double elevation, int rows, int cols) {
  const int m = rows * cols;
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  const double u = std::sin(azimuth) * std::cos(elevation);
  const double v = std::sin(elevation);
  CVector a(m);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      a(r * cols + c) =
          scale * std::polar(1.0, std::numbers::pi * (r * u + c * v));
  return a;
}

double path_loss_db(double distance, const ChannelModelConfig& cfg) {
  double d = distance;
  if (!(d >= cfg.pathloss_ref_distance)) {
    log::warning("distance " + std::to_string(distance) +
                 " m below reference distance; clamped");
    d = cfg.pathloss_ref_distance;
  }
  return cfg.pathloss_ref_db +
         10.0 * cfg.pathloss_exponent * std::log10(d / cfg.pathloss_ref_distance);
}

ChannelState generate_slot(Topology& topo, const ChannelState* prev,
                           const ChannelModelConfig& cfg,
                           const NetworkConfig& net, Rng& rng) {
  const int num_cells = net.num_cells;
  const int users = net.users_per_cell;
  if (topo.bs_positions.size() != static_cast<std::size_t>(num_cells) ||
      topo.ue_positions.size() != static_cast<std::size_t>(num_cells * users))
    throw DimensionError("topology does not match network configuration");
  if (prev != nullptr && !prev->matches(net))
    throw DimensionError("previous channel does not match network dimensions");

  if (prev != nullptr) advance_topology(topo, net);

  ChannelState out(num_cells, users, net.num_antennas(),
                   prev ? prev->slot() + 1 : 0);
  for (int m = 0; m < num_cells; ++m)
    for (int n = 0; n < num_cells; ++n)
      for (int k = 0; k < users; ++k)
        out.link(m, n, k) = draw_marginal(
            topo.bs_positions[m], topo.ue_positions[n * users + k], cfg, net,
            rng);

  if (prev != nullptr && cfg.model != ChannelModel::kIidRayleigh) {
    const double rho = cfg.temporal_corr;
    out.coefficients() = rho * prev->coefficients() +
                         std::sqrt(1.0 - rho * rho) * out.coefficients();
  }
  return out;
}

ChannelGenerator::ChannelGenerator(NetworkConfig net, ChannelModelConfig cfg)
    : net_(net), cfg_(cfg), rng_(cfg.rng_seed) {
  net_.validate();
  cfg_.validate();
  // Topology and fading draws use decorrelated streams of the same seed.
  topo_ = init_topology(net_, cfg_.rng_seed ^ 0x9e3779b97f4a7c15ULL);
}

const ChannelState& ChannelGenerator::next() {
  current_ = generate_slot(topo_, generated_ == 0 ? nullptr : &current_, cfg_,
                           net_, rng_);
  ++generated_;
  return current_;
}

void ChannelGenerator::save_state(io::ByteWriter& out) const {
  out.i64(generated_);
  out.str(rng_state(rng_));
  out.u64(topo_.ue_positions.size());
  for (std::size_t u = 0; u < topo_.ue_positions.size(); ++u) {
    out.f64(topo_.ue_positions[u].x());
    out.f64(topo_.ue_positions[u].y());
    out.f64(topo_.ue_headings[u]);
  }
  out.i64(current_.slot());
  out.complex_matrix(current_.coefficients());
}

void ChannelGenerator::load_state(io::ByteReader& in) {
  generated_ = in.i64();
  restore_rng(rng_, in.str());
  const auto count = in.u64();
  if (count != topo_.ue_positions.size())
    throw DimensionError("generator state has wrong UE count");
  for (std::size_t u = 0; u < count; ++u) {
    const double x = in.f64();
    const double y = in.f64();
    topo_.ue_positions[u] = {x, y};
    topo_.ue_headings[u] = in.f64();
  }
  const auto slot = in.i64();
  CMatrix coeffs = in.complex_matrix();
  if (generated_ > 0) {
    current_ = ChannelState(net_.num_cells, net_.users_per_cell,
                            std::move(coeffs), slot);
    if (!current_.matches(net_))
      throw DimensionError("generator state has wrong channel dimensions");
  } else {
    current_ = ChannelState();
  }
}

ChannelTrace generate_trace(const NetworkConfig& net,
                            const ChannelModelConfig& cfg,
                            std::int64_t num_slots) {
  ChannelGenerator gen(net, cfg);
  ChannelTrace trace;
  trace.header = {static_cast<std::uint32_t>(net.num_cells),
                  static_cast<std::uint32_t>(net.users_per_cell),
                  static_cast<std::uint32_t>(net.num_antennas()),
                  static_cast<std::uint64_t>(num_slots), cfg.hash()};
  trace.slots.reserve(static_cast<std::size_t>(num_slots));
  for (std::int64_t t = 0; t < num_slots; ++t) trace.slots.push_back(gen.next());
  return trace;
}

void save_trace(const ChannelTrace& trace, const std::string& path) {
  const auto& h = trace.header;
  if (trace.slots.size() != h.num_slots)
    throw DimensionError("trace header slot count does not match payload");
  io::ByteWriter w;
  w.raw(kTraceMagic);
  w.u32(h.num_cells);
  w.u32(h.users_per_cell);
  w.u32(h.num_antennas);
  w.u64(h.num_slots);
  w.u64(h.config_hash);
  for (const auto& slot : trace.slots) {
    if (slot.num_cells() != static_cast<int>(h.num_cells) ||
        slot.users_per_cell() != static_cast<int>(h.users_per_cell) ||
        slot.num_antennas() != static_cast<int>(h.num_antennas))
      throw DimensionError("trace slot dimensions differ from header");
    w.i64(slot.slot());
    const auto& c = slot.coefficients();
    for (Eigen::Index col = 0; col < c.cols(); ++col)
      for (Eigen::Index row = 0; row < c.rows(); ++row) {
        w.f64(c(row, col).real());
        w.f64(c(row, col).imag());
      }
  }
  io::write_checked_file(path, w);
}

ChannelTrace load_trace(const std::string& path) {
  const auto bytes = io::read_checked_file(path);
  io::ByteReader r(bytes);
  if (r.remaining() < kTraceMagic.size() || r.raw(kTraceMagic.size()) != kTraceMagic)
    throw IoError("'" + path + "' is not a channel trace");

  ChannelTrace trace;
  auto& h = trace.header;
  h.num_cells = r.u32();
  h.users_per_cell = r.u32();
  h.num_antennas = r.u32();
  h.num_slots = r.u64();
  h.config_hash = r.u64();
  if (h.num_cells == 0 || h.users_per_cell == 0 || h.num_antennas == 0)
    throw DimensionError("trace header has a zero dimension");

  const std::uint64_t per_slot =
      8 + 16ULL * h.num_cells * h.num_cells * h.users_per_cell * h.num_antennas;
  if (h.num_slots != 0 && r.remaining() / h.num_slots < per_slot)
    throw DimensionError("trace payload shorter than header dimensions imply");
  if (r.remaining() != per_slot * h.num_slots)
    throw DimensionError("trace payload size does not match header");

  const int n = static_cast<int>(h.num_cells);
  const int k = static_cast<int>(h.users_per_cell);
  const int m = static_cast<int>(h.num_antennas);
  trace.slots.reserve(static_cast<std::size_t>(h.num_slots));
  for (std::uint64_t t = 0; t < h.num_slots; ++t) {
    const auto slot = r.i64();
    CMatrix c(m, static_cast<Eigen::Index>(n) * n * k);
    for (Eigen::Index col = 0; col < c.cols(); ++col)
      for (Eigen::Index row = 0; row < c.rows(); ++row) {
        const double re = r.f64();
        c(row, col) = {re, r.f64()};
      }
    trace.slots.emplace_back(n, k, std::move(c), slot);
  }
  return trace;
}

}  // namespace ddcbf
