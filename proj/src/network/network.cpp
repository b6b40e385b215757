#include "ddcbf/network.hpp"

#include <cmath>
#include <string>

#include "ddcbf/errors.hpp"

namespace ddcbf {

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double watt_to_dbm(double watt) { return 10.0 * std::log10(watt) + 30.0; }

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

void NetworkConfig::validate() const {
  if (num_cells < 1) throw ConfigError("num_cells must be >= 1");
  if (users_per_cell < 1) throw ConfigError("users_per_cell must be >= 1");
  if (array_rows < 1 || array_cols < 1)
    throw ConfigError("array dimensions must be >= 1");
  if (!(max_power > 0.0) || !std::isfinite(max_power))
    throw ConfigError("max_power must be positive");
  if (!(noise_power > 0.0) || !std::isfinite(noise_power))
    throw ConfigError("noise_power must be positive");
  if (!(slot_duration > 0.0)) throw ConfigError("slot_duration must be > 0");
  if (!(carrier_freq > 0.0)) throw ConfigError("carrier_freq must be > 0");
  if (!(cell_radius > 0.0)) throw ConfigError("cell_radius must be > 0");
  if (!(ue_speed >= 0.0)) throw ConfigError("ue_speed must be >= 0");
}

ChannelState::ChannelState(int num_cells, int users_per_cell, int num_antennas,
                           std::int64_t slot)
    : num_cells_(num_cells),
      users_per_cell_(users_per_cell),
      slot_(slot),
      coeffs_(CMatrix::Zero(num_antennas, static_cast<Eigen::Index>(num_cells) *
                                              num_cells * users_per_cell)) {}

ChannelState::ChannelState(int num_cells, int users_per_cell,
                           CMatrix coefficients, std::int64_t slot)
    : num_cells_(num_cells),
      users_per_cell_(users_per_cell),
      slot_(slot),
      coeffs_(std::move(coefficients)) {
  if (coeffs_.cols() !=
      static_cast<Eigen::Index>(num_cells) * num_cells * users_per_cell) {
    throw DimensionError("channel matrix has " +
                         std::to_string(coeffs_.cols()) +
                         " columns, expected N*N*K");
  }
}

bool ChannelState::matches(const NetworkConfig& cfg) const {
  return num_cells_ == cfg.num_cells && users_per_cell_ == cfg.users_per_cell &&
         num_antennas() == cfg.num_antennas();
}

BeamformerSet::BeamformerSet(int num_cells, int users_per_cell,
                             int num_antennas)
    : num_cells_(num_cells),
      users_per_cell_(users_per_cell),
      weights_(CMatrix::Zero(num_antennas, static_cast<Eigen::Index>(num_cells) *
                                               users_per_cell)) {}

BeamformerSet::BeamformerSet(int num_cells, int users_per_cell,
                             CMatrix weights)
    : num_cells_(num_cells),
      users_per_cell_(users_per_cell),
      weights_(std::move(weights)) {
  if (weights_.cols() != static_cast<Eigen::Index>(num_cells) * users_per_cell)
    throw DimensionError("beamformer matrix must have N*K columns");
}

double BeamformerSet::power(int cell, int user) const {
  return beam(cell, user).squaredNorm();
}

double BeamformerSet::cell_power(int cell) const {
  return cell_beams(cell).squaredNorm();
}

CVector BeamformerSet::direction(int cell, int user) const {
  const double norm = beam(cell, user).norm();
  if (norm == 0.0)
    throw PreconditionError("direction of a zero beamformer is undefined");
  return beam(cell, user) / norm;
}

RMatrix BeamformerSet::power_table() const {
  RMatrix table(num_cells_, users_per_cell_);
  for (int n = 0; n < num_cells_; ++n)
    for (int k = 0; k < users_per_cell_; ++k) table(n, k) = power(n, k);
  return table;
}

namespace {

void check_shapes(const ChannelState& channel, const BeamformerSet& beams) {
  if (channel.num_cells() != beams.num_cells() ||
      channel.users_per_cell() != beams.users_per_cell() ||
      channel.num_antennas() != beams.num_antennas()) {
    throw DimensionError("channel and beamformer dimensions differ");
  }
}

}  // namespace

double compute_sinr(const ChannelState& channel, const BeamformerSet& beams,
                    const NetworkConfig& cfg, int cell, int user) {
  check_shapes(channel, beams);
  const int num_cells = channel.num_cells();
  const int users = channel.users_per_cell();
  if (cell < 0 || cell >= num_cells || user < 0 || user >= users)
    throw IndexError("user (" + std::to_string(cell) + ", " +
                     std::to_string(user) + ") out of range");
  if (!beams.weights().allFinite() || !channel.coefficients().allFinite())
    throw NumericError("non-finite channel or beamformer");

  double signal = 0.0;
  double interference = 0.0;
  for (int l = 0; l < num_cells; ++l) {
    const auto h = channel.link(l, cell, user);
    for (int j = 0; j < users; ++j) {
      const double gain = std::norm(h.dot(beams.beam(l, j)));
      if (l == cell && j == user)
        signal = gain;
      else
        interference += gain;
    }
  }
  return signal / (interference + cfg.noise_power);
}

void check_power_constraint(const BeamformerSet& beams, double max_power) {
  for (int n = 0; n < beams.num_cells(); ++n) {
    const double p = beams.cell_power(n);
    if (!(p <= max_power * (1.0 + kPowerSlack))) {
      throw ConstraintError("BS " + std::to_string(n) + " transmits " +
                            std::to_string(p) + " W, budget " +
                            std::to_string(max_power) + " W");
    }
  }
}

SlotMetrics compute_metrics(const ChannelState& channel,
                            const BeamformerSet& beams,
                            const NetworkConfig& cfg) {
  check_shapes(channel, beams);
  if (!beams.weights().allFinite() || !channel.coefficients().allFinite())
    throw NumericError("non-finite channel or beamformer");
  check_power_constraint(beams, cfg.max_power);

  const int num_cells = channel.num_cells();
  const int users = channel.users_per_cell();
  const int total = num_cells * users;

  SlotMetrics out;
  out.interference = RMatrix::Zero(num_cells, total);
  out.received_power = RVector::Zero(total);

  for (int m = 0; m < num_cells; ++m) {
    // Row n*K+k, column j: h_{m,n,k}^H w_{m,j}.
    const RMatrix gains =
        (channel.local_csi(m).adjoint() * beams.cell_beams(m)).cwiseAbs2();
    for (int u = 0; u < total; ++u) {
      const int own = (u / users == m) ? u % users : -1;
      double beta = 0.0;
      for (int j = 0; j < users; ++j) {
        if (j == own)
          out.received_power(u) = gains(u, j);
        else
          beta += gains(u, j);
      }
      out.interference(m, u) = beta;
    }
  }

  out.total_ipn = out.interference.colwise().sum().transpose().array() +
                  cfg.noise_power;
  out.sinr = out.received_power.cwiseQuotient(out.total_ipn);
  out.rate = out.sinr.unaryExpr([](double g) { return std::log2(1.0 + g); });
  return out;
}

double sum_rate(const SlotMetrics& metrics) { return metrics.rate.sum(); }

CVector recompose_beamformer(double power,
                             const Eigen::Ref<const CVector>& unit_direction) {
  if (!(power >= 0.0)) throw PreconditionError("power must be nonnegative");
  if (std::abs(unit_direction.norm() - 1.0) > 1e-9)
    throw PreconditionError("direction is not unit-norm");
  return std::sqrt(power) * unit_direction;
}

}  // namespace ddcbf
