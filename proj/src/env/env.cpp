#include "ddcbf/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "ddcbf/errors.hpp"

namespace ddcbf::env {

namespace {

constexpr double kQFloor = 1e-3;
constexpr double kMuDecades = 6.0;
constexpr double kDbmLow = -120.0;
constexpr double kDbmHigh = 40.0;

/// Indices 0..n-1 ordered by descending key, ties to the lower index.
std::vector<int> top_indices(const std::vector<double>& key,
                             const std::vector<int>& candidates, int count) {
  std::vector<int> order = candidates;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return key[a] > key[b]; });
  order.resize(static_cast<std::size_t>(count));
  return order;
}

void check_unit_box(const RVector& a) {
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (!(a(i) >= 0.0 && a(i) <= 1.0))
      throw PreconditionError("action entry " + std::to_string(i) + " = " +
                              std::to_string(a(i)) + " is outside [0, 1]");
}

}  // namespace

void EnvConfig::validate(const NetworkConfig& net) const {
  if (codebook_size < 1) throw ConfigError("codebook_size must be >= 1");
  if (compressed_size < 1 || compressed_size > codebook_size)
    throw ConfigError("compressed_size must lie in [1, codebook_size]");
  if (num_interferers < 0) throw ConfigError("num_interferers must be >= 0");
  if (num_interferers > net.num_cells - 1)
    throw ConfigError("num_interferers = " + std::to_string(num_interferers) +
                      " exceeds the " + std::to_string(net.num_cells - 1) +
                      " neighbouring cells");
}

DftCodebook build_codebook(int num_antennas, int size) {
  if (num_antennas < 1 || size < 1)
    throw PreconditionError("codebook needs M >= 1 and C >= 1");
  DftCodebook cb;
  cb.f.resize(num_antennas, size);
  const double scale = 1.0 / std::sqrt(static_cast<double>(num_antennas));
  for (int c = 0; c < size; ++c)
    for (int a = 0; a < num_antennas; ++a) {
      // Reduce c*a mod C first so the phase stays accurate for large arrays.
      const double phase = 2.0 * std::numbers::pi *
                           static_cast<double>((static_cast<long>(c) * a) % size) / size;
      cb.f(a, c) = std::polar(scale, phase);
    }
  return cb;
}

RVector CompressedCsi::features(int codebook_size) const {
  RVector out(3 * static_cast<Eigen::Index>(index.size()));
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    out(3 * e) = static_cast<double>(index[i]) / codebook_size;
    out(3 * e + 1) = value(e).real();
    out(3 * e + 2) = value(e).imag();
  }
  return out;
}

CompressedCsi compress_csi(const CVector& h, const DftCodebook& codebook,
                           int count) {
  if (h.size() != codebook.f.rows())
    throw DimensionError("channel length does not match the codebook");
  if (count < 1 || count > codebook.size())
    throw PreconditionError("compressed size must lie in [1, C]");
  const double norm = h.norm();
  if (!(norm > 0.0)) throw PreconditionError("cannot compress a zero channel");
  const CVector d = codebook.f.adjoint() * h;
  std::vector<double> magnitude(static_cast<std::size_t>(d.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) magnitude[i] = std::norm(d(i));
  std::vector<int> all(magnitude.size());
  std::iota(all.begin(), all.end(), 0);
  CompressedCsi out;
  out.index = top_indices(magnitude, all, count);
  out.value.resize(count);
  for (int i = 0; i < count; ++i) out.value(i) = d(out.index[i]) / norm;
  return out;
}

RMatrix orthogonal_measure(const CMatrix& h) {
  const RVector norms = h.colwise().norm().transpose();
  for (Eigen::Index k = 0; k < norms.size(); ++k)
    if (!(norms(k) > 0.0))
      throw PreconditionError("channel " + std::to_string(k) + " is zero");
  const CMatrix gram = h.adjoint() * h;
  RMatrix o(h.cols(), h.cols());
  for (Eigen::Index j = 0; j < h.cols(); ++j)
    for (Eigen::Index k = 0; k < h.cols(); ++k)
      o(j, k) = j == k ? 1.0 : std::min(1.0, std::norm(gram(j, k)) /
                                                 (norms(j) * norms(j) * norms(k) * norms(k)));
  // Gram round-off can break exact symmetry.
  return 0.5 * (o + o.transpose());
}

std::vector<int> select_interferers(const SlotMetrics& metrics, int cell,
                                    int user, int count, int users_per_cell) {
  const int num_cells = metrics.num_cells();
  if (count > num_cells - 1)
    throw ConfigError("cannot select " + std::to_string(count) +
                      " interferers among " + std::to_string(num_cells - 1) +
                      " neighbouring cells");
  const int ue = cell * users_per_cell + user;
  std::vector<double> key(static_cast<std::size_t>(num_cells));
  std::vector<int> candidates;
  for (int m = 0; m < num_cells; ++m) {
    key[m] = metrics.interference(m, ue);
    if (m != cell) candidates.push_back(m);
  }
  return top_indices(key, candidates, count);
}

std::vector<int> select_interfered(const SlotMetrics& metrics, int cell,
                                   int count, int users_per_cell) {
  const int total = metrics.num_users();
  if (count > total - users_per_cell)
    throw ConfigError("cannot select " + std::to_string(count) +
                      " interfered UEs among " +
                      std::to_string(total - users_per_cell) + " out-of-cell UEs");
  std::vector<double> key(static_cast<std::size_t>(total));
  std::vector<int> candidates;
  for (int u = 0; u < total; ++u) {
    key[u] = metrics.interference(cell, u);
    if (u / users_per_cell != cell) candidates.push_back(u);
  }
  return top_indices(key, candidates, count);
}

std::vector<CompressedCsi> compress_own_links(const ChannelState& channel,
                                              const DftCodebook& codebook,
                                              int count) {
  std::vector<CompressedCsi> out;
  out.reserve(static_cast<std::size_t>(channel.num_cells() * channel.users_per_cell()));
  for (int n = 0; n < channel.num_cells(); ++n)
    for (int k = 0; k < channel.users_per_cell(); ++k)
      out.push_back(compress_csi(channel.link(n, n, k), codebook, count));
  return out;
}

int state_size(const NetworkConfig& net, const EnvConfig& cfg) {
  const int k = net.users_per_cell;
  const int csi = 3 * cfg.compressed_size;
  const int u = cfg.num_interferers;
  const int local = k * k + k * csi + 4 * k;
  const int interferers = k * u * (1 + k * csi + k + 1);
  const int interfered = k * u * 4;
  return local + interferers + interfered;
}

int action_size(const NetworkConfig& net, ActionMode mode) {
  const int k = net.users_per_cell;
  if (mode == ActionMode::kPowerOnly) return k + 1;
  return k + 1 + net.num_users() + 1;
}

double power_feature(double watts) {
  const double dbm = watts > 0.0 ? watt_to_dbm(watts) : kDbmLow;
  return (std::clamp(dbm, kDbmLow, kDbmHigh) - 0.5 * (kDbmLow + kDbmHigh)) /
         (0.5 * (kDbmHigh - kDbmLow));
}

RVector build_state(int cell, const ChannelState& channel,
                    const std::vector<CompressedCsi>& own_csi,
                    const SlotRecord* previous, const NetworkConfig& net,
                    const EnvConfig& cfg) {
  if (!channel.matches(net))
    throw DimensionError("channel does not match network configuration");
  const int n_cells = net.num_cells;
  const int k_users = net.users_per_cell;
  if (cell < 0 || cell >= n_cells)
    throw IndexError("BS index " + std::to_string(cell) + " out of range");
  if (own_csi.size() != static_cast<std::size_t>(net.num_users()))
    throw DimensionError("own compressed CSI list has the wrong length");
  if (previous && (!previous->channel.matches(net) ||
                   previous->metrics.num_users() != net.num_users()))
    throw DimensionError("previous slot record does not match the network");

  RVector s = RVector::Zero(state_size(net, cfg));
  Eigen::Index pos = 0;
  auto put = [&](double v) { s(pos++) = v; };
  auto put_vec = [&](const RVector& v) {
    s.segment(pos, v.size()) = v;
    pos += v.size();
  };

  // Local block: current-slot spatial structure and CSI, then last slot's
  // outcome for the own users.
  CMatrix own(net.num_antennas(), k_users);
  for (int k = 0; k < k_users; ++k) own.col(k) = channel.link(cell, cell, k);
  const RMatrix o = orthogonal_measure(own);
  for (int j = 0; j < k_users; ++j)
    for (int k = 0; k < k_users; ++k) put(o(j, k));
  for (int k = 0; k < k_users; ++k)
    put_vec(own_csi[cell * k_users + k].features(cfg.codebook_size));
  if (previous) {
    const SlotMetrics& m = previous->metrics;
    for (int k = 0; k < k_users; ++k) put(power_feature(previous->beams.power(cell, k)));
    for (int k = 0; k < k_users; ++k) put(m.rate(cell * k_users + k) / kRateScale);
    for (int k = 0; k < k_users; ++k)
      put(power_feature(m.received_power(cell * k_users + k)));
    for (int k = 0; k < k_users; ++k) put(power_feature(m.total_ipn(cell * k_users + k)));
  } else {
    pos += 4 * k_users;
  }
  if (!previous) return s;

  const SlotMetrics& m = previous->metrics;
  const int u_count = cfg.num_interferers;

  // Interferer block: for each own user, its strongest interferers last slot.
  for (int k = 0; k < k_users; ++k) {
    const int ue = cell * k_users + k;
    for (int bs : select_interferers(m, cell, k, u_count, k_users)) {
      put(static_cast<double>(bs + 1) / n_cells);
      for (int j = 0; j < k_users; ++j)
        put_vec(previous->own_csi[bs * k_users + j].features(cfg.codebook_size));
      for (int j = 0; j < k_users; ++j) put(power_feature(previous->beams.power(bs, j)));
      put(power_feature(m.interference(bs, ue)));
    }
  }

  // Interfered block: the out-of-cell UEs this BS disturbed most last slot.
  for (int ue : select_interfered(m, cell, k_users * u_count, k_users)) {
    put(static_cast<double>(ue + 1) / net.num_users());
    put(m.rate(ue) / kRateScale);
    put(power_feature(m.interference(cell, ue)));
    put(m.interference(cell, ue) / m.total_ipn(ue));
  }
  return s;
}

StructuredParams decode_action(const RVector& action, const NetworkConfig& net) {
  const int k_users = net.users_per_cell;
  if (action.size() != action_size(net, ActionMode::kStructured))
    throw DimensionError("action has " + std::to_string(action.size()) +
                         " entries, expected " +
                         std::to_string(action_size(net, ActionMode::kStructured)));
  check_unit_box(action);
  StructuredParams p;
  const auto [q, q_total] = decode_power_action(action.head(k_users + 1), k_users);
  p.q = q;
  p.q_total = q_total;
  p.alpha = action.segment(k_users + 1, net.num_users());
  const double mu_raw = action(action.size() - 1);
  p.mu = net.noise_power * std::pow(10.0, kMuDecades * (mu_raw - 0.5));
  return p;
}

std::pair<RVector, double> decode_power_action(const RVector& action,
                                               int users_per_cell) {
  if (action.size() != users_per_cell + 1)
    throw DimensionError("power action must have K + 1 entries");
  check_unit_box(action);
  const RVector shifted = action.head(users_per_cell).array() + kQFloor;
  return {shifted / shifted.sum(), std::max(action(users_per_cell), kQFloor)};
}

RVector mslnr_equivalent_action(const NetworkConfig& net, ActionMode mode) {
  RVector a = RVector::Ones(action_size(net, mode));
  if (mode == ActionMode::kStructured) a(a.size() - 1) = 0.5;
  return a;
}

RewardRecord compute_reward(int cell, const SlotMetrics& metrics,
                            const std::vector<int>& interfered,
                            const NetworkConfig& net) {
  const int k_users = net.users_per_cell;
  RewardRecord r;
  for (int k = 0; k < k_users; ++k) r.own_rate += metrics.rate(cell * k_users + k);
  for (int ue : interfered) {
    if (ue < 0 || ue >= metrics.num_users() || ue / k_users == cell)
      throw IndexError("interfered UE " + std::to_string(ue) +
                       " is not an out-of-cell user");
    // Rate UE (m,j) would get without BS n's interference.
    const double without = metrics.total_ipn(ue) - metrics.interference(cell, ue);
    const double term =
        std::log2(1.0 + metrics.received_power(ue) / without) - metrics.rate(ue);
    r.terms.push_back(term);
    r.penalty += term;
  }
  r.reward = r.own_rate - r.penalty;
  return r;
}

Environment::Environment(NetworkConfig net, EnvConfig cfg)
    : net_(std::move(net)), cfg_(cfg) {
  net_.validate();
  cfg_.validate(net_);
  codebook_ = build_codebook(net_.num_antennas(), cfg_.codebook_size);
}

void Environment::reset(const ChannelState& channel) {
  if (!channel.matches(net_))
    throw DimensionError("channel does not match network configuration");
  current_ = SlotRecord{};
  current_.channel = channel;
  current_.own_csi = compress_own_links(channel, codebook_, cfg_.compressed_size);
  previous_.reset();
  rebuild_states();
}

void Environment::rebuild_states() {
  states_.clear();
  for (int n = 0; n < net_.num_cells; ++n)
    states_.push_back(build_state(n, current_.channel, current_.own_csi,
                                  previous(), net_, cfg_));
}

BeamformerSet Environment::beams_for(const std::vector<RVector>& actions) const {
  if (actions.size() != static_cast<std::size_t>(net_.num_cells))
    throw DimensionError("expected one action per BS");
  if (current_.own_csi.empty()) throw PreconditionError("environment not reset");
  BeamformerSet beams(net_.num_cells, net_.users_per_cell, net_.num_antennas());
  for (int n = 0; n < net_.num_cells; ++n) {
    const auto local = current_.channel.local_csi(n);
    if (cfg_.mode == ActionMode::kStructured) {
      const StructuredParams p = decode_action(actions[n], net_);
      beams.cell_beams(n) =
          structured_beamformer(local, n, net_.users_per_cell, p, net_.max_power);
    } else {
      const auto [q, q_total] = decode_power_action(actions[n], net_.users_per_cell);
      beams.cell_beams(n) = mslnr_beamformer(local, n, net_.users_per_cell,
                                             net_.noise_power, net_.max_power, q,
                                             q_total);
    }
  }
  return beams;
}

StepResult Environment::step(const std::vector<RVector>& actions,
                             const ChannelState& next_channel) {
  if (!next_channel.matches(net_))
    throw DimensionError("next channel does not match network configuration");
  StepResult out;
  out.beams = beams_for(actions);
  out.metrics = compute_metrics(current_.channel, out.beams, net_);
  const int interfered = net_.users_per_cell * cfg_.num_interferers;
  for (int n = 0; n < net_.num_cells; ++n)
    out.rewards.push_back(compute_reward(
        n, out.metrics, select_interfered(out.metrics, n, interfered, net_.users_per_cell),
        net_));

  SlotRecord done = std::move(current_);
  done.beams = out.beams;
  done.metrics = out.metrics;
  previous_ = std::move(done);
  current_ = SlotRecord{};
  current_.channel = next_channel;
  current_.own_csi = compress_own_links(next_channel, codebook_, cfg_.compressed_size);
  rebuild_states();
  return out;
}

void Environment::save_state(io::ByteWriter& out) const {
  out.i64(current_.channel.slot());
  out.complex_matrix(current_.channel.coefficients());
  out.u8(previous_ ? 1 : 0);
  if (previous_) {
    out.i64(previous_->channel.slot());
    out.complex_matrix(previous_->channel.coefficients());
    out.complex_matrix(previous_->beams.weights());
  }
}

void Environment::load_state(io::ByteReader& in) {
  const auto slot = in.i64();
  ChannelState current(net_.num_cells, net_.users_per_cell, in.complex_matrix(), slot);
  const bool has_previous = in.u8() != 0;
  std::optional<SlotRecord> prev;
  if (has_previous) {
    SlotRecord r;
    const auto prev_slot = in.i64();
    r.channel = ChannelState(net_.num_cells, net_.users_per_cell, in.complex_matrix(),
                             prev_slot);
    r.beams = BeamformerSet(net_.num_cells, net_.users_per_cell, in.complex_matrix());
    r.metrics = compute_metrics(r.channel, r.beams, net_);
    r.own_csi = compress_own_links(r.channel, codebook_, cfg_.compressed_size);
    prev = std::move(r);
  }
  reset(current);
  previous_ = std::move(prev);
  rebuild_states();
}

}  // namespace ddcbf::env
