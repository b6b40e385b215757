#include "ddcbf/solvers.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "ddcbf/errors.hpp"
#include "ddcbf/util/rng.hpp"

namespace ddcbf {
namespace {

constexpr int kBisectionMaxIter = 200;
constexpr int kBracketMaxDoublings = 2000;
constexpr double kBisectionTol = 1e-8;

/// Eigen-decomposed leakage matrix; evaluates the regularized power and
/// solution for any shift mu without refactoring.
class ShiftedSolver {
 public:
  ShiftedSolver(const CMatrix& leakage, const CMatrix& targets)
      : eig_(leakage) {
    if (eig_.info() != Eigen::Success)
      throw NumericError("eigendecomposition of leakage matrix failed");
    lambda_ = eig_.eigenvalues().cwiseMax(0.0);
    projected_ = eig_.eigenvectors().adjoint() * targets;
    weight_ = projected_.rowwise().squaredNorm();
    const double scale = lambda_.size() > 0 ? lambda_.maxCoeff() : 0.0;
    null_tol_ = scale * static_cast<double>(lambda_.size()) *
                std::numeric_limits<double>::epsilon();
  }

  double power(double mu) const {
    double total = 0.0;
    for (Eigen::Index i = 0; i < lambda_.size(); ++i) {
      const double d = lambda_(i) + mu;
      if (mu == 0.0 && lambda_(i) <= null_tol_) continue;
      total += weight_(i) / (d * d);
    }
    return total;
  }

  CMatrix solve(double mu) const {
    RVector inv(lambda_.size());
    for (Eigen::Index i = 0; i < lambda_.size(); ++i) {
      const double d = lambda_(i) + mu;
      inv(i) = (mu == 0.0 && lambda_(i) <= null_tol_) ? 0.0 : 1.0 / d;
    }
    return eig_.eigenvectors() * (inv.asDiagonal() * projected_);
  }

 private:
  Eigen::SelfAdjointEigenSolver<CMatrix> eig_;
  RVector lambda_;
  CMatrix projected_;
  RVector weight_;
  double null_tol_ = 0.0;
};

void require_hermitian(const CMatrix& b) {
  if (b.rows() != b.cols())
    throw PreconditionError("leakage matrix must be square");
  const double scale = std::max(b.norm(), std::numeric_limits<double>::min());
  if ((b - b.adjoint()).norm() > 1e-10 * scale)
    throw PreconditionError("leakage matrix is not Hermitian");
}

double bisect_with(const ShiftedSolver& solver, double max_power) {
  if (solver.power(0.0) <= max_power) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; solver.power(hi) > max_power; ++i) {
    if (i == kBracketMaxDoublings)
      throw NumericError("could not bracket the power multiplier");
    lo = hi;
    hi *= 2.0;
  }
  // power(hi) <= P_max always holds, so returning hi keeps the budget.
  for (int i = 0; i < kBisectionMaxIter; ++i) {
    if (max_power - solver.power(hi) <= kBisectionTol * max_power) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (solver.power(mid) > max_power)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

/// Solves (A) X = B for Hermitian A, Cholesky first, pivoted LU otherwise.
CMatrix hermitian_solve(const CMatrix& a, const CMatrix& b, double mu) {
  Eigen::LLT<CMatrix> llt(a);
  if (llt.info() == Eigen::Success) {
    CMatrix x = llt.solve(b);
    if (x.allFinite()) return x;
  }
  Eigen::FullPivLU<CMatrix> lu(a);
  if (!lu.isInvertible()) {
    if (mu == 0.0)
      throw NumericError(
          "regularized leakage matrix is singular with mu = 0; use mu > 0");
    throw NumericError("regularized leakage matrix is singular");
  }
  return lu.solve(b);
}

void normalize_columns(CMatrix& x) {
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double norm = x.col(c).norm();
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw NumericError("beamformer direction is zero or non-finite");
    x.col(c) /= norm;
  }
}

void check_power_ratios(const RVector& q, double q_total, int users) {
  if (q.size() != users)
    throw PreconditionError("power ratio vector must have K entries");
  if (!((q.array() > 0.0).all() && (q.array() <= 1.0).all()))
    throw PreconditionError("power ratios must lie in (0, 1]");
  if (std::abs(q.sum() - 1.0) > 1e-9)
    throw PreconditionError("power ratios must sum to one");
  if (!(q_total > 0.0 && q_total <= 1.0))
    throw PreconditionError("total power ratio must lie in (0, 1]");
}

}  // namespace

BeamformerSet random_full_power_init(const NetworkConfig& net,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  BeamformerSet beams(net.num_cells, net.users_per_cell, net.num_antennas());
  const double per_user = net.max_power / net.users_per_cell;
  auto& w = beams.weights();
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      const double re = normal(rng);
      w(r, c) = {re, normal(rng)};
    }
    w.col(c) *= std::sqrt(per_user) / w.col(c).norm();
  }
  return beams;
}

double regularized_power(const CMatrix& leakage, const CMatrix& targets,
                         double mu) {
  require_hermitian(leakage);
  return ShiftedSolver(leakage, targets).power(mu);
}

double bisect_mu(const CMatrix& leakage, const CMatrix& targets,
                 double max_power) {
  require_hermitian(leakage);
  if (targets.rows() != leakage.rows())
    throw DimensionError("target vectors do not match leakage matrix");
  return bisect_with(ShiftedSolver(leakage, targets), max_power);
}

WmmseState wmmse(const ChannelState& channel, const NetworkConfig& net,
                 const WmmseOptions& options) {
  if (!channel.matches(net))
    throw DimensionError("channel does not match network configuration");
  if (!channel.coefficients().allFinite())
    throw NumericError("non-finite channel");
  if (!(options.stop_eps > 0.0))
    throw PreconditionError("stop_eps must be positive");

  const int num_cells = net.num_cells;
  const int users = net.users_per_cell;
  const int total = num_cells * users;
  const double noise = net.noise_power;

  WmmseState st;
  st.beams = random_full_power_init(net, options.init_seed);
  st.u = CVector::Zero(total);
  st.v = RVector::Zero(total);
  st.mu = RVector::Zero(num_cells);
  st.sum_rates.push_back(sum_rate(compute_metrics(channel, st.beams, net)));

  // gains(m) row n*K+k, column j: h_{m,n,k}^H w_{m,j}.
  std::vector<CMatrix> cross(num_cells);
  double prev_objective = 0.0;
  for (;;) {
    for (int m = 0; m < num_cells; ++m)
      cross[m] = channel.local_csi(m).adjoint() * st.beams.cell_beams(m);

    for (int n = 0; n < num_cells; ++n) {
      for (int k = 0; k < users; ++k) {
        const int idx = n * users + k;
        const Complex signal = cross[n](idx, k);
        const double signal_power = std::norm(signal);
        double residual = noise;
        for (int m = 0; m < num_cells; ++m) {
          for (int j = 0; j < users; ++j)
            if (m != n || j != k) residual += std::norm(cross[m](idx, j));
        }
        const double received = residual + signal_power;
        if (!(residual > 0.0) || !std::isfinite(received))
          throw NumericError("degenerate MMSE receiver update");
        st.u(idx) = signal / received;
        // (1 - u^* h^H w)^{-1} = received / (received - |h^H w|^2).
        st.v(idx) = received / residual;
      }
    }

    for (int n = 0; n < num_cells; ++n) {
      const auto h = channel.local_csi(n);
      const RVector alpha = st.u.cwiseAbs2().cwiseProduct(st.v);
      CMatrix leakage = h * alpha.asDiagonal() * h.adjoint();
      leakage = 0.5 * (leakage + leakage.adjoint()).eval();
      CMatrix targets(h.rows(), users);
      for (int k = 0; k < users; ++k) {
        const int idx = n * users + k;
        targets.col(k) = h.col(idx) * (st.u(idx) * st.v(idx));
      }
      const ShiftedSolver solver(leakage, targets);
      st.mu(n) = bisect_with(solver, net.max_power);
      st.beams.cell_beams(n) = solver.solve(st.mu(n));
    }

    const double objective = st.v.sum();
    st.objective.push_back(objective);
    st.sum_rates.push_back(sum_rate(compute_metrics(channel, st.beams, net)));
    ++st.iterations;
    if (std::abs(objective - prev_objective) < options.stop_eps) break;
    if (st.iterations >= options.max_iter) {
      st.truncated = true;
      break;
    }
    prev_objective = objective;
  }
  return st;
}

std::uint64_t restart_seed(std::uint64_t seed, int restart) {
  if (restart == 0) return seed;
  return splitmix64(seed ^ (0xd1b54a32d192ed03ULL * static_cast<std::uint64_t>(restart)));
}

WmmseState wmmse_multi_init(const ChannelState& channel,
                            const NetworkConfig& net,
                            const WmmseOptions& options, int num_inits) {
  if (num_inits < 1) throw PreconditionError("num_inits must be >= 1");
  WmmseState best;
  double best_rate = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < num_inits; ++r) {
    WmmseOptions opt = options;
    opt.init_seed = restart_seed(options.init_seed, r);
    WmmseState st = wmmse(channel, net, opt);
    if (st.sum_rates.back() > best_rate) {
      best_rate = st.sum_rates.back();
      best = std::move(st);
    }
  }
  return best;
}

void StructuredParams::validate(int num_users, int users_per_cell) const {
  if (alpha.size() != num_users)
    throw PreconditionError("ILCF vector must have N*K entries");
  if (!alpha.allFinite() || (alpha.array() < 0.0).any())
    throw PreconditionError("ILCFs must be finite and nonnegative");
  if (!(mu > 0.0) || !std::isfinite(mu))
    throw PreconditionError("BNCF must be positive");
  check_power_ratios(q, q_total, users_per_cell);
}

CMatrix structured_beamformer(const Eigen::Ref<const CMatrix>& local_csi,
                              int cell, int users_per_cell,
                              const StructuredParams& params,
                              double max_power) {
  if (params.alpha.size() != local_csi.cols())
    throw PreconditionError("ILCF vector must have one entry per user");
  if (!params.alpha.allFinite() || (params.alpha.array() < 0.0).any())
    throw PreconditionError("ILCFs must be finite and nonnegative");
  if (!(params.mu >= 0.0) || !std::isfinite(params.mu))
    throw PreconditionError("BNCF must be nonnegative");
  check_power_ratios(params.q, params.q_total, users_per_cell);

  CMatrix a = local_csi * params.alpha.asDiagonal() * local_csi.adjoint();
  a.diagonal().array() += params.mu;
  const CMatrix own = local_csi.middleCols(
      static_cast<Eigen::Index>(cell) * users_per_cell, users_per_cell);
  CMatrix beams = hermitian_solve(a, own, params.mu);
  normalize_columns(beams);
  for (int k = 0; k < users_per_cell; ++k)
    beams.col(k) *= std::sqrt(max_power * params.q_total * params.q(k));
  return beams;
}

CMatrix mslnr_beamformer(const Eigen::Ref<const CMatrix>& local_csi, int cell,
                         int users_per_cell, double noise_power,
                         double max_power, const RVector& q, double q_total) {
  if (!(noise_power > 0.0))
    throw PreconditionError("noise power must be positive");
  check_power_ratios(q, q_total, users_per_cell);
  const Eigen::Index m = local_csi.rows();
  CMatrix full = local_csi * local_csi.adjoint();
  full.diagonal().array() += noise_power;

  CMatrix beams(m, users_per_cell);
  for (int k = 0; k < users_per_cell; ++k) {
    const auto h = local_csi.col(static_cast<Eigen::Index>(cell) * users_per_cell + k);
    const CMatrix leakage = full - h * h.adjoint();
    beams.col(k) = hermitian_solve(leakage, h, noise_power);
  }
  normalize_columns(beams);
  for (int k = 0; k < users_per_cell; ++k)
    beams.col(k) *= std::sqrt(max_power * q_total * q(k));
  return beams;
}

CVector mrt_beamformer(const Eigen::Ref<const CVector>& h) {
  const double norm = h.norm();
  if (norm == 0.0) throw PreconditionError("MRT of a zero channel");
  return h / norm;
}

double rayleigh_quotient(const Eigen::Ref<const CVector>& w,
                         const Eigen::Ref<const CVector>& signal,
                         const RVector& alpha, double mu,
                         const Eigen::Ref<const CMatrix>& leakage) {
  if (w.norm() == 0.0) throw PreconditionError("quotient of a zero vector");
  if (alpha.size() != leakage.cols())
    throw DimensionError("one ILCF per leakage channel expected");
  const double numerator = std::norm(signal.dot(w));
  const double denominator =
      alpha.dot((leakage.adjoint() * w).cwiseAbs2()) + mu * w.squaredNorm();
  if (!(denominator > 0.0))
    throw NumericError("Rayleigh quotient denominator is zero");
  return numerator / denominator;
}

BeamformerSet mslnr_equal_power(const ChannelState& channel,
                                const NetworkConfig& net) {
  const int users = net.users_per_cell;
  BeamformerSet beams(net.num_cells, users, net.num_antennas());
  const RVector q = RVector::Constant(users, 1.0 / users);
  for (int n = 0; n < net.num_cells; ++n)
    beams.cell_beams(n) = mslnr_beamformer(channel.local_csi(n), n, users,
                                           net.noise_power, net.max_power, q);
  return beams;
}

}  // namespace ddcbf
