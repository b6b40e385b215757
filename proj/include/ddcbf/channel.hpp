#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ddcbf/network.hpp"
#include "ddcbf/util/binary_io.hpp"
#include "ddcbf/util/rng.hpp"

namespace ddcbf {


/// Slot-marginal and temporal evolution of the synthetic channel.
///  - kIidRayleigh: pathloss-scaled i.i.d. CN(0, 1) entries, independent slots.
///  - kGaussMarkov: same marginal, AR(1) evolution with `temporal_corr`.
///  - kGeometricUra: L-ray URA marginal, AR(1) evolution with `temporal_corr`.
enum class ChannelModel : std::uint8_t {
  kIidRayleigh = 0,
  kGaussMarkov = 1,
  kGeometricUra = 2,
};

std::string_view to_string(ChannelModel model);
/// Accepts "iid-rayleigh", "gauss-markov", "geometric-ura".
ChannelModel parse_channel_model(std::string_view name);

struct ChannelModelConfig {
  ChannelModel model = ChannelModel::kGeometricUra;
  double temporal_corr = 0.8041832556022939;  // J0(2 pi f_D T_s), 3 km/h, 2.6 GHz, 20 ms
  double pathloss_exponent = 3.5;
  double pathloss_ref_db = 40.7;  // 32.4 + 20 log10(2.6 GHz)
  double pathloss_ref_distance = 1.0;  // d0 [m]
  int num_rays = 8;
  double azimuth_spread_deg = 10.0;   // per-ray Gaussian spread around LOS
  double elevation_spread_deg = 5.0;
  double bs_height = 25.0;
  double ue_height = 1.5;
  std::uint64_t rng_seed = 1;

  void validate() const;
  /// Fingerprint stored in trace headers.
  std::uint64_t hash() const;
};

/// Jakes-model lag-one correlation J0(2 pi f_D T_s), f_D = v f_c / c.
double jakes_correlation(const NetworkConfig& net);

struct Topology {
  std::vector<Eigen::Vector2d> bs_positions;
  std::vector<Eigen::Vector2d> ue_positions;  // index n*K + k
  std::vector<double> ue_headings;            // radians

  bool operator==(const Topology&) const = default;
};

/// First `count` sites of a hexagonal lattice with inter-site distance `isd`,
/// center first, then ring by ring counter-clockwise from angle 0.
std::vector<Eigen::Vector2d> hex_sites(int count, double isd);

/// Inter-site distance 2*cell_radius; UEs uniform over the cell disc outside a
/// 10 m exclusion radius.
Topology init_topology(const NetworkConfig& net, std::uint64_t seed);

/// Moves every UE by v*T_s along its heading. A UE whose step would leave its
/// cell disc has its heading mirrored about the radial direction first.
void advance_topology(Topology& topo, const NetworkConfig& net);

/// Half-wavelength URA response, entry r*M2 + c equal to
/// exp(j*pi*(r sin(az) cos(el) + c sin(el))) / sqrt(M1*M2).
CVector ura_steering(double azimuth, double elevation, int rows, int cols);

/// Log-distance pathloss. Distances below d0 are clamped with a warning.
double path_loss_db(double distance, const ChannelModelConfig& cfg);

/// Draws h(t). With `prev == nullptr` the marginal is drawn at the current
/// topology. Otherwise the topology first advances one slot and
/// h(t) = rho*h(t-1) + sqrt(1-rho^2)*e(t).
ChannelState generate_slot(Topology& topo, const ChannelState* prev,
                           const ChannelModelConfig& cfg,
                           const NetworkConfig& net, Rng& rng);

/// Stateful wrapper over init_topology/generate_slot.
class ChannelGenerator {
 public:
  ChannelGenerator(NetworkConfig net, ChannelModelConfig cfg);

  /// Returns the channel of the next slot (slot 0 first).
  const ChannelState& next();
  const ChannelState& current() const { return current_; }
  std::int64_t slots_generated() const { return generated_; }
  const Topology& topology() const { return topo_; }
  const NetworkConfig& network() const { return net_; }
  const ChannelModelConfig& model() const { return cfg_; }

  void save_state(io::ByteWriter& out) const;
  void load_state(io::ByteReader& in);

 private:
  NetworkConfig net_;
  ChannelModelConfig cfg_;
  Topology topo_;
  Rng rng_;
  ChannelState current_;
  std::int64_t generated_ = 0;
};

struct TraceHeader {
  std::uint32_t num_cells = 0;
  std::uint32_t users_per_cell = 0;
  std::uint32_t num_antennas = 0;
  std::uint64_t num_slots = 0;
  std::uint64_t config_hash = 0;

  bool operator==(const TraceHeader&) const = default;
};

struct ChannelTrace {
  TraceHeader header;
  std::vector<ChannelState> slots;
};

/// Generates `num_slots` consecutive slots.
ChannelTrace generate_trace(const NetworkConfig& net,
                            const ChannelModelConfig& cfg,
                            std::int64_t num_slots);

/// Layout: 16-byte magic, header (u32 N, K, M; u64 slots; u64 hash), then per
/// slot an i64 slot index and N*N*K*M (re, im) f64 pairs, then a CRC32 footer.
/// All little-endian.
void save_trace(const ChannelTrace& trace, const std::string& path);
ChannelTrace load_trace(const std::string& path);

inline constexpr std::string_view kTraceMagic{"DDCBF-TRACE-v01\n", 16};

}  // namespace ddcbf
