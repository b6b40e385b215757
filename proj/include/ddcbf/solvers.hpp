#pragma once

#include <cstdint>
#include <vector>

#include "ddcbf/network.hpp"

namespace ddcbf {

/// Auxiliary variables of the WMMSE iteration after the last update.
struct WmmseState {
  BeamformerSet beams;
  CVector u;         // MMSE receive coefficients, index n*K + k
  RVector v;         // MSE weights, v = 1 + SINR >= 1
  RVector mu;        // per-BS power multipliers
  int iterations = 0;
  bool truncated = false;         // stopped by max_iter
  std::vector<double> objective;  // sum of v, once per iteration
  /// Sum rate of every beamformer iterate, starting with the initialization;
  /// the last entry belongs to the returned beams.
  std::vector<double> sum_rates;
};

struct WmmseOptions {
  double stop_eps = 1e-4;
  int max_iter = 500;
  std::uint64_t init_seed = 1;
};

/// Full-power random start: complex-Gaussian directions, P_max/K per user.
BeamformerSet random_full_power_init(const NetworkConfig& net,
                                     std::uint64_t seed);

/// Block-coordinate WMMSE with a bisection search for each BS multiplier.
WmmseState wmmse(const ChannelState& channel, const NetworkConfig& net,
                 const WmmseOptions& options);

/// Best of `num_inits` independent starts by sum rate. Start 0 uses
/// `options.init_seed`; later starts use derived seeds.
WmmseState wmmse_multi_init(const ChannelState& channel,
                            const NetworkConfig& net,
                            const WmmseOptions& options, int num_inits);

/// Seed of the r-th WMMSE restart.
std::uint64_t restart_seed(std::uint64_t seed, int restart);

/// Smallest mu >= 0 with sum_k |(B + mu I)^{-1} c_k|^2 <= P_max, found by
/// bisection to a relative power tolerance of 1e-8. `leakage` must be
/// Hermitian PSD; columns of `targets` are the c_k. A pseudo-inverse is used
/// at mu = 0.
double bisect_mu(const CMatrix& leakage, const CMatrix& targets,
                 double max_power);

/// sum_k |(B + mu I)^{-1} c_k|^2 with a pseudo-inverse at mu = 0.
double regularized_power(const CMatrix& leakage, const CMatrix& targets,
                         double mu);

/// Interference-leakage and noise control factors plus power split of one BS.
struct StructuredParams {
  RVector alpha;       // one ILCF per user of the network, index m*K + j
  double mu = 1.0;     // BNCF
  RVector q;           // per-user power ratios, summing to one
  double q_total = 1.0;

  /// Throws PreconditionError when an invariant is violated.
  void validate(int num_users, int users_per_cell) const;
};

/// Beams of BS `cell`: direction (sum alpha h h^H + mu I)^{-1} h_{n,n,k},
/// power P_max * q_total * q_k. `local_csi` is the M x (N*K) block of
/// channels from this BS.
CMatrix structured_beamformer(const Eigen::Ref<const CMatrix>& local_csi,
                              int cell, int users_per_cell,
                              const StructuredParams& params, double max_power);

/// Max-SLNR beams of BS `cell`: for each user the leakage matrix excludes its
/// own channel. `q` are the power ratios (summing to one).
CMatrix mslnr_beamformer(const Eigen::Ref<const CMatrix>& local_csi, int cell,
                         int users_per_cell, double noise_power,
                         double max_power, const RVector& q,
                         double q_total = 1.0);

/// h / |h|.
CVector mrt_beamformer(const Eigen::Ref<const CVector>& h);

/// |h^H w|^2 / (sum_i alpha_i |g_i^H w|^2 + mu |w|^2), leakage channels g_i
/// as columns.
double rayleigh_quotient(const Eigen::Ref<const CVector>& w,
                         const Eigen::Ref<const CVector>& signal,
                         const RVector& alpha, double mu,
                         const Eigen::Ref<const CMatrix>& leakage);

/// Beams for every BS: max-SLNR directions with equal power P_max/K.
BeamformerSet mslnr_equal_power(const ChannelState& channel,
                                const NetworkConfig& net);

}  // namespace ddcbf
