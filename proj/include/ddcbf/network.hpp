#pragma once

#include <complex>
#include <cstdint>

#include <Eigen/Dense>

namespace ddcbf {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// Relative slack on the per-BS power budget.
inline constexpr double kPowerSlack = 1e-9;

double dbm_to_watt(double dbm);
double watt_to_dbm(double watt);
double db_to_linear(double db);

/// Cellular topology dimensions and radio constants. Powers are linear watts.
struct NetworkConfig {
  int num_cells = 1;       // N
  int users_per_cell = 1;  // K
  int array_rows = 1;      // M1
  int array_cols = 1;      // M2
  double max_power = 1.0;    // P_max [W]
  double noise_power = 1.0;  // sigma_u^2 [W]
  double carrier_freq = 2.6e9;  // [Hz]
  double cell_radius = 250.0;   // [m]
  double slot_duration = 0.02;  // [s]
  double ue_speed = 3.0 / 3.6;  // [m/s]

  int num_antennas() const { return array_rows * array_cols; }
  int num_users() const { return num_cells * users_per_cell; }

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
};

/// Channels of one slot. Column `(m * N + n) * K + k` holds h_{m,n,k}, the
/// downlink channel from BS m to user k of cell n. The N*K columns starting at
/// `m * N * K` are the local CSI of BS m.
class ChannelState {
 public:
  ChannelState() = default;
  ChannelState(int num_cells, int users_per_cell, int num_antennas,
               std::int64_t slot = 0);
  ChannelState(int num_cells, int users_per_cell, CMatrix coefficients,
               std::int64_t slot = 0);

  int num_cells() const { return num_cells_; }
  int users_per_cell() const { return users_per_cell_; }
  int num_antennas() const { return static_cast<int>(coeffs_.rows()); }
  std::int64_t slot() const { return slot_; }
  void set_slot(std::int64_t slot) { slot_ = slot; }

  Eigen::Index column(int bs, int cell, int user) const {
    return (static_cast<Eigen::Index>(bs) * num_cells_ + cell) *
               users_per_cell_ +
           user;
  }

  auto link(int bs, int cell, int user) {
    return coeffs_.col(column(bs, cell, user));
  }
  auto link(int bs, int cell, int user) const {
    return coeffs_.col(column(bs, cell, user));
  }

  /// M x (N*K) block: channels from BS `bs` to every user of the network.
  auto local_csi(int bs) const {
    const Eigen::Index width =
        static_cast<Eigen::Index>(num_cells_) * users_per_cell_;
    return coeffs_.middleCols(bs * width, width);
  }

  const CMatrix& coefficients() const { return coeffs_; }
  CMatrix& coefficients() { return coeffs_; }

  bool matches(const NetworkConfig& cfg) const;

 private:
  int num_cells_ = 0;
  int users_per_cell_ = 0;
  std::int64_t slot_ = 0;
  CMatrix coeffs_;
};

/// Beamformers w_{n,k}, stored as column `n * K + k` of an M x (N*K) matrix.
class BeamformerSet {
 public:
  BeamformerSet() = default;
  BeamformerSet(int num_cells, int users_per_cell, int num_antennas);
  BeamformerSet(int num_cells, int users_per_cell, CMatrix weights);

  int num_cells() const { return num_cells_; }
  int users_per_cell() const { return users_per_cell_; }
  int num_antennas() const { return static_cast<int>(weights_.rows()); }

  Eigen::Index column(int cell, int user) const {
    return static_cast<Eigen::Index>(cell) * users_per_cell_ + user;
  }
  auto beam(int cell, int user) { return weights_.col(column(cell, user)); }
  auto beam(int cell, int user) const {
    return weights_.col(column(cell, user));
  }
  auto cell_beams(int cell) {
    return weights_.middleCols(column(cell, 0), users_per_cell_);
  }
  auto cell_beams(int cell) const {
    return weights_.middleCols(column(cell, 0), users_per_cell_);
  }

  const CMatrix& weights() const { return weights_; }
  CMatrix& weights() { return weights_; }

  /// p_{n,k} = |w_{n,k}|^2.
  double power(int cell, int user) const;
  double cell_power(int cell) const;
  /// w_{n,k} / |w_{n,k}|; throws PreconditionError when p_{n,k} = 0.
  CVector direction(int cell, int user) const;
  /// N x K table of allocated powers.
  RMatrix power_table() const;

 private:
  int num_cells_ = 0;
  int users_per_cell_ = 0;
  CMatrix weights_;
};

/// Per-slot link measurements. Per-user vectors are indexed by `n * K + k`.
struct SlotMetrics {
  RVector sinr;
  RVector rate;            // bits/s/Hz
  RVector received_power;  // p^r_{n,k} [W]
  /// N x (N*K): entry (m, n*K+k) is beta_{m,n,k}, the interference BS m
  /// causes at user (n,k), excluding user (n,k)'s own beam.
  RMatrix interference;
  RVector total_ipn;  // beta_{n,k} = sum_m beta_{m,n,k} + sigma_u^2

  int num_cells() const { return static_cast<int>(interference.rows()); }
  int num_users() const { return static_cast<int>(rate.size()); }
};

/// Eq.-(2) SINR of user k in cell n.
double compute_sinr(const ChannelState& channel, const BeamformerSet& beams,
                    const NetworkConfig& cfg, int cell, int user);

/// Throws ConstraintError naming the first BS whose budget is exceeded.
void check_power_constraint(const BeamformerSet& beams, double max_power);

SlotMetrics compute_metrics(const ChannelState& channel,
                            const BeamformerSet& beams,
                            const NetworkConfig& cfg);

double sum_rate(const SlotMetrics& metrics);

/// sqrt(p) * unit_direction.
CVector recompose_beamformer(double power,
                             const Eigen::Ref<const CVector>& unit_direction);

}  // namespace ddcbf
