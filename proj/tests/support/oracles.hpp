#pragma once

// Test-only helpers: random instances and scalar re-implementations that the
// library paths are checked against.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

#include "ddcbf/network.hpp"

namespace ddcbf::testing {

inline Complex cn(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, std::sqrt(0.5) * scale);
  const double re = d(rng);
  return {re, d(rng)};
}

inline CVector random_cvector(std::mt19937_64& rng, int m, double scale = 1.0) {
  CVector v(m);
  for (int i = 0; i < m; ++i) v(i) = cn(rng, scale);
  return v;
}

inline CVector random_unit(std::mt19937_64& rng, int m) {
  CVector v = random_cvector(rng, m);
  return v / v.norm();
}

inline NetworkConfig small_net(int n, int k, int m1, int m2 = 1,
                               double p_max = 1.0, double noise = 0.1) {
  NetworkConfig net;
  net.num_cells = n;
  net.users_per_cell = k;
  net.array_rows = m1;
  net.array_cols = m2;
  net.max_power = p_max;
  net.noise_power = noise;
  return net;
}

/// Channel with i.i.d. CN(0, scale^2) entries; cross links optionally
/// attenuated by `cross_scale`.
inline ChannelState random_channel(const NetworkConfig& net,
                                   std::mt19937_64& rng,
                                   double cross_scale = 1.0) {
  ChannelState ch(net.num_cells, net.users_per_cell, net.num_antennas());
  for (int m = 0; m < net.num_cells; ++m)
    for (int n = 0; n < net.num_cells; ++n)
      for (int k = 0; k < net.users_per_cell; ++k)
        ch.link(m, n, k) = random_cvector(rng, net.num_antennas(),
                                          m == n ? 1.0 : cross_scale);
  return ch;
}

/// Random beams scaled so each BS uses `fill` of its budget.
inline BeamformerSet random_beams(const NetworkConfig& net,
                                  std::mt19937_64& rng, double fill = 1.0) {
  BeamformerSet b(net.num_cells, net.users_per_cell, net.num_antennas());
  for (int n = 0; n < net.num_cells; ++n) {
    for (int k = 0; k < net.users_per_cell; ++k)
      b.beam(n, k) = random_cvector(rng, net.num_antennas());
    b.cell_beams(n) *= std::sqrt(fill * net.max_power) / b.cell_beams(n).norm();
  }
  return b;
}

/// Scalar-loop evaluation of the SINR formula, one complex product at a time.
inline double scalar_sinr(const ChannelState& ch, const BeamformerSet& b,
                          double noise, int n, int k) {
  const int cells = ch.num_cells();
  const int users = ch.users_per_cell();
  const int m_ant = ch.num_antennas();
  auto inner = [&](int bs, int cell, int user, int beam_cell, int beam_user) {
    Complex acc = 0.0;
    for (int a = 0; a < m_ant; ++a)
      acc += std::conj(ch.link(bs, cell, user)(a)) * b.beam(beam_cell, beam_user)(a);
    return std::norm(acc);
  };
  const double signal = inner(n, n, k, n, k);
  double intra = 0.0;
  for (int j = 0; j < users; ++j)
    if (j != k) intra += inner(n, n, k, n, j);
  double inter = 0.0;
  for (int l = 0; l < cells; ++l) {
    if (l == n) continue;
    for (int j = 0; j < users; ++j) inter += inner(l, n, k, l, j);
  }
  return signal / (intra + inter + noise);
}

inline double scalar_sum_rate(const ChannelState& ch, const BeamformerSet& b,
                              double noise) {
  double total = 0.0;
  for (int n = 0; n < ch.num_cells(); ++n)
    for (int k = 0; k < ch.users_per_cell(); ++k)
      total += std::log2(1.0 + scalar_sinr(ch, b, noise, n, k));
  return total;
}

/// |<a, b>| / (|a| |b|) for direction comparisons.
inline double alignment(const CVector& a, const CVector& b) {
  return std::abs(a.dot(b)) / (a.norm() * b.norm());
}

}  // namespace ddcbf::testing
