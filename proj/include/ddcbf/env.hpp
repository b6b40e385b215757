#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "ddcbf/network.hpp"
#include "ddcbf/solvers.hpp"
#include "ddcbf/util/binary_io.hpp"

namespace ddcbf::env {

/// Which beamformer parameters the agents control.
///  - kStructured: powers, ILCFs and the BNCF (the full structured design).
///  - kPowerOnly: powers only; directions are max-SLNR.
enum class ActionMode { kStructured, kPowerOnly };

struct EnvConfig {
  int codebook_size = 128;   // C
  int compressed_size = 3;   // N_c
  int num_interferers = 4;   // U
  ActionMode mode = ActionMode::kStructured;

  void validate(const NetworkConfig& net) const;
};

/// C unit-norm DFT beams over M antennas, one per column.
struct DftCodebook {
  CMatrix f;
  int size() const { return static_cast<int>(f.cols()); }
};

DftCodebook build_codebook(int num_antennas, int size);

/// The N_c strongest codebook coefficients of a channel, strongest first.
struct CompressedCsi {
  std::vector<int> index;
  CVector value;  // d_c / ||h||

  /// (c/C, Re, Im) per entry.
  RVector features(int codebook_size) const;
};

CompressedCsi compress_csi(const CVector& h, const DftCodebook& codebook,
                           int count);

/// Squared normalized inner products between the columns of `h`.
RMatrix orthogonal_measure(const CMatrix& h);

/// The U strongest interferer BSs of UE (n, k) by beta_{m,n,k}, descending,
/// ties to the lower BS index.
std::vector<int> select_interferers(const SlotMetrics& metrics, int cell,
                                    int user, int count, int users_per_cell);

/// The `count` out-of-cell UEs receiving the most interference from BS
/// `cell`, as flat indices m*K + j, descending, ties to the lower index.
std::vector<int> select_interfered(const SlotMetrics& metrics, int cell,
                                   int count, int users_per_cell);

/// Everything about one slot that other agents may observe one slot later.
struct SlotRecord {
  ChannelState channel;
  BeamformerSet beams;
  SlotMetrics metrics;
  std::vector<CompressedCsi> own_csi;  // flat UE index n*K + k, link h_{n,n,k}
};

std::vector<CompressedCsi> compress_own_links(const ChannelState& channel,
                                              const DftCodebook& codebook,
                                              int count);

int state_size(const NetworkConfig& net, const EnvConfig& cfg);
int action_size(const NetworkConfig& net, ActionMode mode);

/// Agent state of BS `cell` in the slot whose own-link data is
/// (`channel`, `own_csi`). `previous` is the record of the preceding slot,
/// or null at slot 0, where every delayed block is zero.
RVector build_state(int cell, const ChannelState& channel,
                    const std::vector<CompressedCsi>& own_csi,
                    const SlotRecord* previous, const NetworkConfig& net,
                    const EnvConfig& cfg);

/// Maps a raw action in [0,1]^A to structured-beamformer parameters.
StructuredParams decode_action(const RVector& action, const NetworkConfig& net);

/// Power-only action [q~_1..K, q~_total]: returns (q, q_total).
std::pair<RVector, double> decode_power_action(const RVector& action,
                                               int users_per_cell);

/// Raw action that decodes to max-SLNR directions with equal full power.
RVector mslnr_equivalent_action(const NetworkConfig& net, ActionMode mode);

struct RewardRecord {
  double reward = 0.0;
  double own_rate = 0.0;
  double penalty = 0.0;
  std::vector<double> terms;  // one per interfered UE, same order
};

RewardRecord compute_reward(int cell, const SlotMetrics& metrics,
                            const std::vector<int>& interfered,
                            const NetworkConfig& net);

struct StepResult {
  BeamformerSet beams;
  SlotMetrics metrics;
  std::vector<RewardRecord> rewards;
};

/// Multi-agent environment. The caller supplies each slot's channel, so
/// several environments and the benchmarks can run on one channel stream.
class Environment {
 public:
  Environment(NetworkConfig net, EnvConfig cfg);

  /// Starts at the given channel (treated as the first slot, no history).
  void reset(const ChannelState& channel);

  const std::vector<RVector>& states() const { return states_; }
  const ChannelState& channel() const { return current_.channel; }
  const SlotRecord* previous() const { return previous_ ? &*previous_ : nullptr; }
  const NetworkConfig& network() const { return net_; }
  const EnvConfig& config() const { return cfg_; }
  int state_dim() const { return state_size(net_, cfg_); }
  int action_dim() const { return action_size(net_, cfg_.mode); }

  /// Beamformers the given actions produce on the current channel.
  BeamformerSet beams_for(const std::vector<RVector>& actions) const;

  /// Applies one action per BS to the current slot, scores it, then moves to
  /// `next_channel` and rebuilds every agent's state.
  StepResult step(const std::vector<RVector>& actions,
                  const ChannelState& next_channel);

  void save_state(io::ByteWriter& out) const;
  void load_state(io::ByteReader& in);

 private:
  void rebuild_states();

  NetworkConfig net_;
  EnvConfig cfg_;
  DftCodebook codebook_;
  SlotRecord current_;  // only channel and own_csi are meaningful
  std::optional<SlotRecord> previous_;
  std::vector<RVector> states_;
};

/// Feature maps shared by state construction.
double power_feature(double watts);
inline constexpr double kRateScale = 10.0;

}  // namespace ddcbf::env
