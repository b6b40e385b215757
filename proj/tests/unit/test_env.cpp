#include <cmath>
#include <random>

#include "doctest.h"

#include "ddcbf/env.hpp"
#include "ddcbf/errors.hpp"
#include "ddcbf/solvers.hpp"
#include "support/oracles.hpp"

using namespace ddcbf;
using namespace ddcbf::env;
using ddcbf::testing::random_beams;
using ddcbf::testing::random_channel;
using ddcbf::testing::small_net;

namespace {

/// Metrics with a hand-written interference table; rates and powers filled
/// with distinct placeholder values.
SlotMetrics table_metrics(const RMatrix& interference, double noise = 1.0) {
  SlotMetrics m;
  const Eigen::Index users = interference.cols();
  m.interference = interference;
  m.total_ipn = interference.colwise().sum().transpose().array() + noise;
  m.received_power = RVector::LinSpaced(users, 1.0, 2.0);
  m.sinr = m.received_power.cwiseQuotient(m.total_ipn);
  m.rate = m.sinr.unaryExpr([](double g) { return std::log2(1.0 + g); });
  return m;
}

EnvConfig desk_env() {
  EnvConfig cfg;
  cfg.codebook_size = 16;
  cfg.num_interferers = 2;
  return cfg;
}

/// Indices of the delayed blocks (everything after the current-slot O_n
/// and own CSI) in the state vector.
std::pair<Eigen::Index, Eigen::Index> delayed_range(const NetworkConfig& net,
                                                    const EnvConfig& cfg) {
  const int k = net.users_per_cell;
  const Eigen::Index start = k * k + k * 3 * cfg.compressed_size;
  return {start, state_size(net, cfg) - start};
}

}  // namespace

TEST_CASE("DFT codebook") {
  const auto cb = build_codebook(8, 16);
  for (int a = 0; a < 8; ++a)
    CHECK(std::abs(cb.f(a, 0) - Complex(1.0 / std::sqrt(8.0), 0.0)) < 1e-15);
  for (int c = 0; c < 16; ++c) CHECK(std::abs(cb.f.col(c).norm() - 1.0) < 1e-12);

  const auto square = build_codebook(8, 8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      if (i != j) CHECK(std::abs(square.f.col(i).dot(square.f.col(j))) < 1e-12);

  const auto full = build_codebook(64, 128);
  CHECK(full.size() == 128);
  CHECK(std::abs(full.f(3, 5) - std::polar(1.0 / 8.0, 2.0 * M_PI * 15.0 / 128.0)) < 1e-15);
}

TEST_CASE("compress_csi") {
  const auto cb = build_codebook(8, 8);
  const CVector f5 = cb.f.col(5);
  const auto one = compress_csi(f5, cb, 3);
  CHECK(one.index[0] == 5);
  CHECK(std::abs(one.value(0) - Complex(1.0, 0.0)) < 1e-12);
  const RVector feat = one.features(8);
  CHECK(feat.size() == 9);
  CHECK(feat(0) == 5.0 / 8.0);

  // Full-size compression inverts through F.
  std::mt19937_64 rng(3);
  const CVector h = testing::random_cvector(rng, 8);
  const auto full = compress_csi(h, cb, 8);
  CVector d = CVector::Zero(8);
  for (int i = 0; i < 8; ++i) d(full.index[i]) = full.value(i) * h.norm();
  CHECK((cb.f * d - h).norm() < 1e-10);
  for (int i = 1; i < 8; ++i)
    CHECK(std::abs(full.value(i)) <= std::abs(full.value(i - 1)) + 1e-15);

  // Equal magnitudes: lower index first.
  const CVector tie = cb.f.col(6) + cb.f.col(2);
  const auto t = compress_csi(tie, cb, 2);
  CHECK(t.index == std::vector<int>{2, 6});

  CHECK_THROWS_AS(compress_csi(CVector::Zero(8), cb, 3), PreconditionError);
  CHECK_THROWS_AS(compress_csi(h, cb, 9), PreconditionError);
}

TEST_CASE("orthogonal_measure") {
  CMatrix orth = CMatrix::Identity(4, 3);
  const RMatrix o = orthogonal_measure(orth);
  CHECK(o == RMatrix::Identity(3, 3));

  std::mt19937_64 rng(7);
  CMatrix pair(4, 2);
  pair.col(0) = testing::random_cvector(rng, 4);
  pair.col(1) = Complex(-2.0, 0.5) * pair.col(0);
  CHECK(orthogonal_measure(pair)(0, 1) == doctest::Approx(1.0).epsilon(1e-12));

  CMatrix h(8, 4);
  for (int k = 0; k < 4; ++k) h.col(k) = testing::random_cvector(rng, 8);
  const RMatrix r = orthogonal_measure(h);
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k) {
      Complex ip = 0.0;
      for (int a = 0; a < 8; ++a) ip += std::conj(h(a, j)) * h(a, k);
      const double expected = std::norm(ip) / (h.col(j).squaredNorm() * h.col(k).squaredNorm());
      CHECK(std::abs(r(j, k) - expected) < 1e-12);
      CHECK(r(j, k) == r(k, j));
      CHECK(r(j, k) >= 0.0);
      CHECK(r(j, k) <= 1.0);
    }
  h.col(2).setZero();
  CHECK_THROWS_AS(orthogonal_measure(h), PreconditionError);
}

TEST_CASE("select_interferers") {
  // Five cells, one user each; UE of cell 0 hears BSs 2, 3, 4.
  RMatrix beta = RMatrix::Zero(5, 5);
  beta(2, 0) = 5.0;
  beta(3, 0) = 1.0;
  beta(4, 0) = 3.0;
  beta(0, 0) = 100.0;  // serving BS, never a candidate
  const auto m = table_metrics(beta);
  CHECK(select_interferers(m, 0, 0, 2, 1) == std::vector<int>{2, 4});
  CHECK(select_interferers(m, 0, 0, 4, 1) == std::vector<int>{2, 4, 3, 1});

  const auto flat = table_metrics(RMatrix::Constant(5, 5, 1.0));
  CHECK(select_interferers(flat, 3, 0, 2, 1) == std::vector<int>{0, 1});
  CHECK_THROWS_AS(select_interferers(flat, 0, 0, 5, 1), ConfigError);
}

TEST_CASE("select_interfered") {
  const auto two = table_metrics(RMatrix::Constant(2, 4, 0.5));
  CHECK(select_interfered(two, 0, 2, 2) == std::vector<int>{2, 3});
  CHECK(select_interfered(two, 1, 2, 2) == std::vector<int>{0, 1});
  CHECK_THROWS_AS(select_interfered(two, 0, 3, 2), ConfigError);

  RMatrix beta = RMatrix::Zero(3, 6);
  beta.row(1) << 0.2, 0.9, 9.0, 9.0, 0.4, 0.9;
  const auto m = table_metrics(beta);
  CHECK(select_interfered(m, 1, 4, 2) == std::vector<int>{1, 5, 4, 0});
}

TEST_CASE("state layout") {
  NetworkConfig full = small_net(7, 4, 8, 8);
  EnvConfig cfg;
  CHECK(state_size(full, cfg) == 804);
  CHECK(action_size(full, ActionMode::kStructured) == 4 + 1 + 28 + 1);
  CHECK(action_size(full, ActionMode::kPowerOnly) == 5);

  NetworkConfig desk = small_net(3, 2, 8, 1);
  EnvConfig dcfg;
  dcfg.num_interferers = 2;
  CHECK(state_size(desk, dcfg) == 134);

  Environment env(desk, desk_env());
  std::mt19937_64 rng(1);
  env.reset(random_channel(desk, rng));
  const auto [start, len] = delayed_range(desk, desk_env());
  for (const auto& s : env.states()) {
    CHECK(s.size() == env.state_dim());
    CHECK(s.segment(start, len).isZero(0.0));
    CHECK(s.allFinite());
  }
  std::vector<RVector> actions(3, RVector::Constant(env.action_dim(), 0.3));
  env.step(actions, random_channel(desk, rng));
  for (const auto& s : env.states()) {
    CHECK(s.size() == env.state_dim());
    CHECK(s.allFinite());
    CHECK((s.array().abs() <= 1.0 + 1e-12).all());
    CHECK_FALSE(s.segment(start, len).isZero(0.0));
  }
}

TEST_CASE("decode_action") {
  const NetworkConfig net = small_net(7, 4, 8, 8, 6.309573444801933, 7.943282347242822e-14);
  RVector a = RVector::Constant(action_size(net, ActionMode::kStructured), 0.5);
  a(4) = 1.0;
  const auto p = decode_action(a, net);
  for (int k = 0; k < 4; ++k) CHECK(p.q(k) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(p.mu == net.noise_power);
  CHECK(p.q_total == 1.0);
  CHECK(p.alpha.size() == 28);

  std::mt19937_64 rng(5);
  const auto ch = random_channel(net, rng, 0.3);
  const CMatrix beams = structured_beamformer(ch.local_csi(2), 2, 4, p, net.max_power);
  for (int k = 0; k < 4; ++k)
    CHECK(beams.col(k).squaredNorm() == doctest::Approx(net.max_power / 4).epsilon(1e-12));

  a(a.size() - 1) = 1.0;
  CHECK(decode_action(a, net).mu == doctest::Approx(1e3 * net.noise_power).epsilon(1e-12));
  a(a.size() - 1) = 0.0;
  CHECK(decode_action(a, net).mu == doctest::Approx(1e-3 * net.noise_power).epsilon(1e-12));

  a(0) = 1.2;
  CHECK_THROWS_AS(decode_action(a, net), PreconditionError);
  CHECK_THROWS_AS(decode_action(RVector::Zero(3), net), DimensionError);

  // Box soundness, including the all-zero corner.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    RVector r = RVector::NullaryExpr(a.size(), [&](Eigen::Index) { return u(rng); });
    if (t == 0) r.setZero();
    const auto d = decode_action(r, net);
    CHECK_NOTHROW(d.validate(28, 4));
    CHECK(d.q.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((d.q.array() > 0.0).all());
    CHECK(d.q_total > 0.0);
    CHECK(d.q_total <= 1.0);
  }
}

TEST_CASE("compute_reward") {
  // Two cells, one user each, sigma^2 = 1. BS 0 causes 3 of UE 1's 4 IPN.
  RMatrix beta = RMatrix::Zero(2, 2);
  beta(0, 1) = 3.0;
  SlotMetrics m = table_metrics(beta, 1.0);
  m.received_power(1) = 3.0;
  m.sinr(1) = 3.0 / 4.0;
  m.rate(1) = std::log2(1.75);
  const NetworkConfig net = small_net(2, 1, 1, 1, 1.0, 1.0);
  const auto r = compute_reward(0, m, {1}, net);
  CHECK(r.penalty == doctest::Approx(1.1926450779423958).epsilon(1e-15));
  CHECK(r.own_rate == m.rate(0));
  CHECK(r.reward == r.own_rate - r.penalty);

  const auto clean = compute_reward(1, m, {0}, net);
  CHECK(clean.penalty == 0.0);
  CHECK(clean.reward == m.rate(1));
  CHECK_THROWS_AS(compute_reward(0, m, {0}, net), IndexError);

  std::mt19937_64 rng(17);
  for (int t = 0; t < 100; ++t) {
    const auto n3 = small_net(3, 2, 4, 1, 1.0, 0.05);
    const auto ch = random_channel(n3, rng, 0.7);
    const auto b = random_beams(n3, rng, 0.8);
    const auto metrics = compute_metrics(ch, b, n3);
    for (int n = 0; n < 3; ++n) {
      const auto rec = compute_reward(n, metrics, select_interfered(metrics, n, 4, 2), n3);
      for (double term : rec.terms) CHECK(term >= 0.0);
      CHECK(rec.reward + rec.penalty == doctest::Approx(rec.own_rate).epsilon(1e-15));
    }
  }
}

TEST_CASE("step with max-SLNR-equivalent actions matches the benchmark") {
  const NetworkConfig net = small_net(3, 2, 4, 2, 2.0, 0.01);
  for (auto mode : {ActionMode::kStructured, ActionMode::kPowerOnly}) {
    EnvConfig cfg = desk_env();
    cfg.mode = mode;
    Environment env(net, cfg);
    std::mt19937_64 rng(4);
    const auto ch = random_channel(net, rng, 0.5);
    env.reset(ch);
    const std::vector<RVector> actions(3, mslnr_equivalent_action(net, mode));
    const auto result = env.step(actions, random_channel(net, rng));
    const auto bench = compute_metrics(ch, mslnr_equal_power(ch, net), net);
    CHECK(sum_rate(result.metrics) == doctest::Approx(sum_rate(bench)).epsilon(1e-10));
    for (int n = 0; n < 3; ++n) {
      const double own = result.metrics.rate(2 * n) + result.metrics.rate(2 * n + 1);
      CHECK(result.rewards[n].own_rate == own);
    }
  }
}

TEST_CASE("frozen channel and repeated actions give identical slots") {
  const NetworkConfig net = small_net(3, 2, 4, 1, 1.0, 0.1);
  Environment env(net, desk_env());
  std::mt19937_64 rng(8);
  const auto ch = random_channel(net, rng);
  env.reset(ch);
  std::vector<RVector> actions;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 3; ++n)
    actions.push_back(RVector::NullaryExpr(env.action_dim(), [&](Eigen::Index) { return u(rng); }));
  const auto first = env.step(actions, ch);
  const auto states = env.states();
  for (int t = 0; t < 4; ++t) {
    const auto again = env.step(actions, ch);
    CHECK(again.metrics.rate == first.metrics.rate);
    CHECK(env.states() == states);
  }
}

TEST_CASE("delayed blocks depend only on the previous slot") {
  const NetworkConfig net = small_net(3, 2, 4, 1, 1.0, 0.1);
  const EnvConfig cfg = desk_env();
  std::mt19937_64 rng(12);
  Environment env(net, cfg);
  env.reset(random_channel(net, rng));
  std::vector<RVector> actions(3, RVector::Constant(env.action_dim(), 0.4));
  const auto next = random_channel(net, rng);
  env.step(actions, next);
  const SlotRecord prev = *env.previous();
  const auto codebook = build_codebook(net.num_antennas(), cfg.codebook_size);
  const auto own = compress_own_links(next, codebook, cfg.compressed_size);

  // Mutate every slot-t cross-cell link: the state is unchanged.
  ChannelState mutated = next;
  for (int m = 0; m < 3; ++m)
    for (int n = 0; n < 3; ++n)
      if (m != n)
        for (int k = 0; k < 2; ++k) mutated.link(m, n, k) *= Complex(3.0, -1.0);
  const auto own_mutated = compress_own_links(mutated, codebook, cfg.compressed_size);
  const auto [start, len] = delayed_range(net, cfg);
  for (int n = 0; n < 3; ++n) {
    const RVector base = build_state(n, next, own, &prev, net, cfg);
    CHECK(base == env.states()[n]);
    CHECK(build_state(n, mutated, own_mutated, &prev, net, cfg) == base);
  }

  // Mutating the slot-(t-1) record does change the delayed blocks.
  SlotRecord altered = prev;
  altered.metrics.interference *= 2.0;
  altered.metrics.total_ipn.array() += 0.3;
  altered.metrics.rate *= 0.5;
  for (int n = 0; n < 3; ++n) {
    const RVector base = build_state(n, next, own, &prev, net, cfg);
    const RVector changed = build_state(n, next, own, &altered, net, cfg);
    CHECK(changed.head(start) == base.head(start));
    CHECK(changed.segment(start, len) != base.segment(start, len));
  }
}

TEST_CASE("environment state round-trips through save/load") {
  const NetworkConfig net = small_net(3, 2, 4, 1, 1.0, 0.1);
  Environment a(net, desk_env());
  std::mt19937_64 rng(2);
  a.reset(random_channel(net, rng));
  std::vector<RVector> actions(3, RVector::Constant(a.action_dim(), 0.7));
  a.step(actions, random_channel(net, rng));
  io::ByteWriter w;
  a.save_state(w);
  Environment b(net, desk_env());
  io::ByteReader r(w.bytes());
  b.load_state(r);
  CHECK(b.states() == a.states());
  const auto ch = random_channel(net, rng);
  const auto ra = a.step(actions, ch);
  const auto rb = b.step(actions, ch);
  CHECK(ra.metrics.rate == rb.metrics.rate);
  CHECK(ra.rewards[1].reward == rb.rewards[1].reward);
  CHECK(a.states() == b.states());
}

TEST_CASE("environment configuration checks") {
  const NetworkConfig net = small_net(3, 2, 4);
  EnvConfig cfg = desk_env();
  cfg.num_interferers = 3;
  CHECK_THROWS_AS(Environment(net, cfg), ConfigError);
  cfg = desk_env();
  cfg.compressed_size = 17;
  CHECK_THROWS_AS(Environment(net, cfg), ConfigError);
}
