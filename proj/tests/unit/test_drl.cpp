#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"

#include "ddcbf/drl.hpp"
#include "ddcbf/errors.hpp"

using namespace ddcbf;
using namespace ddcbf::drl;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = n(rng);
  return m;
}

/// Sum of upstream .* output, whose gradient is the quantity backward()
/// computes.
double contracted_output(const Mlp& net, const Matrix& x, const Matrix& upstream) {
  return (net.forward(x).array() * upstream.array()).sum();
}

bool close_relative(double analytic, double numeric, double tol) {
  return std::abs(analytic - numeric) <=
         tol * std::max(std::abs(analytic), std::abs(numeric)) + 1e-9;
}

/// Central finite-difference oracle for parameters and inputs.
void check_gradients(Mlp net, const Matrix& x, const Matrix& upstream) {
  const auto g = mlp_gradients(net, x, upstream);
  const double h = 1e-5;
  int checked = 0;
  for (Eigen::Index i = 0; i < net.params().size(); ++i) {
    const double saved = net.params()(i);
    net.params()(i) = saved + h;
    const double plus = contracted_output(net, x, upstream);
    net.params()(i) = saved - h;
    const double minus = contracted_output(net, x, upstream);
    net.params()(i) = saved;
    const double numeric = (plus - minus) / (2.0 * h);
    CHECK(close_relative(g.params(i), numeric, 1e-4));
    ++checked;
  }
  Matrix xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    const double plus = contracted_output(net, xp, upstream);
    xp(i) = x(i) - h;
    const double minus = contracted_output(net, xp, upstream);
    xp(i) = x(i);
    CHECK(close_relative(g.input(i), (plus - minus) / (2.0 * h), 1e-4));
  }
  CHECK(checked == net.params().size());
}

DdpgConfig small_config() {
  DdpgConfig cfg;
  cfg.hidden = {16, 8};
  cfg.replay_capacity = 64;
  cfg.batch_size = 8;
  cfg.lr_actor = 1e-3;
  cfg.lr_critic = 1e-3;
  cfg.seed = 11;
  return cfg;
}

Experience random_experience(Rng& rng, int s, int a) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Experience e;
  e.state = random_matrix(rng, s, 1).col(0);
  e.action = Vector::NullaryExpr(a, [&](Eigen::Index) { return u(rng); });
  e.reward = u(rng) * 3.0;
  e.next_state = random_matrix(rng, s, 1).col(0);
  return e;
}

double policy_value(const DdpgAgent& agent, const Matrix& states) {
  const Matrix actions = agent.actor().forward(states);
  Matrix joint(states.rows() + actions.rows(), states.cols());
  joint << states, actions;
  return agent.critic().forward(joint).mean();
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("ddcbf_" + name)).string();
}

}  // namespace

TEST_CASE("mlp_forward trivial cases") {
  Mlp zero({3, 4, 2}, OutputActivation::kIdentity);
  CHECK(zero.forward(Vector(Vector::Ones(3))).isZero(0.0));

  Mlp linear({3, 3}, OutputActivation::kIdentity);
  linear.weight(0) = Matrix::Identity(3, 3);
  Vector x(3);
  x << 1.5, -2.0, 0.25;
  CHECK(linear.forward(x) == x);

  Mlp logistic({3, 5, 4}, OutputActivation::kSigmoid);
  CHECK((logistic.forward(x).array() == 0.5).all());

  CHECK_THROWS_AS(linear.forward(Vector(Vector::Ones(2))), DimensionError);
  CHECK_THROWS_AS(Mlp({3}, OutputActivation::kIdentity), PreconditionError);
  CHECK(linear.params().size() == 12);
}

TEST_CASE("mlp_gradients match central finite differences") {
  Rng rng(5);
  for (auto act : {OutputActivation::kIdentity, OutputActivation::kSigmoid}) {
    Mlp net({5, 8, 6, 3}, act);
    net.initialize(rng);
    const Matrix x = random_matrix(rng, 5, 4);
    const Matrix up = random_matrix(rng, 3, 4);
    check_gradients(net, x, up);
  }
}

TEST_CASE("mlp_gradients trivial and hand-computed cases") {
  Rng rng(2);
  Mlp net({4, 6, 2}, OutputActivation::kSigmoid);
  net.initialize(rng);
  const Matrix x = random_matrix(rng, 4, 3);
  const auto zero = mlp_gradients(net, x, Matrix::Zero(2, 3));
  CHECK(zero.params.isZero(0.0));
  CHECK(zero.input.isZero(0.0));

  Mlp linear({3, 2}, OutputActivation::kIdentity);
  linear.initialize(rng);
  Vector in(3);
  in << 1.0, -2.0, 0.5;
  Vector up(2);
  up << 3.0, -1.0;
  const auto g = mlp_gradients(linear, in, up);
  const Matrix outer = up * in.transpose();
  CHECK(Eigen::Map<const Matrix>(g.params.data(), 2, 3) == outer);
  CHECK(g.params.tail(2) == up);
  CHECK(g.input.col(0).isApprox(linear.weight(0).transpose() * up, 1e-15));

  CHECK_THROWS_AS(mlp_gradients(linear, in, Vector::Ones(3)), DimensionError);
}

TEST_CASE("adam_step") {
  AdamState adam;
  adam.learning_rate = 0.1;
  Vector p = Vector::Zero(1);
  adam_step(adam, p, Vector::Ones(1));
  CHECK(p(0) == doctest::Approx(-0.09999999900000002).epsilon(1e-15));
  CHECK(adam.step == 1);

  AdamState still;
  still.learning_rate = 0.1;
  Vector q = Vector::Constant(3, 2.0);
  adam_step(still, q, Vector::Zero(3));
  CHECK(q == Vector::Constant(3, 2.0));

  AdamState twin;
  Vector pair = Vector::Constant(2, 0.7);
  Vector grads = Vector::Constant(2, -0.3);
  for (int i = 0; i < 5; ++i) adam_step(twin, pair, grads);
  CHECK(pair(0) == pair(1));

  Vector bad = Vector::Ones(2);
  bad(1) = std::nan("");
  const Vector before = pair;
  CHECK_THROWS_AS(adam_step(twin, pair, bad), NumericError);
  CHECK(pair == before);
  CHECK(twin.step == 5);
}

TEST_CASE("replay memory is a FIFO with uniform sampling") {
  ReplayMemory mem(4);
  for (int i = 0; i < 5; ++i) {
    Experience e;
    e.reward = i;
    mem.push(e);
  }
  CHECK(mem.size() == 4);
  CHECK(mem.at(0).reward == 1.0);
  CHECK(mem.at(3).reward == 4.0);
  CHECK_THROWS_AS(mem.at(4), IndexError);

  Rng rng(3);
  auto idx = mem.sample_indices(4, rng);
  std::sort(idx.begin(), idx.end());
  CHECK(idx == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK_THROWS_AS(mem.sample(5, rng), PreconditionError);

  ReplayMemory ten(10);
  for (int i = 0; i < 10; ++i) {
    Experience e;
    e.reward = i;
    ten.push(e);
  }
  const int draws = 100000;
  std::vector<int> counts(10, 0);
  for (int i = 0; i < draws; ++i) ++counts[ten.sample_indices(1, rng)[0]];
  const double expected = draws / 10.0;
  const double sd = std::sqrt(draws * 0.1 * 0.9);
  double chi2 = 0.0;
  for (int c : counts) {
    CHECK(std::abs(c - expected) <= 3.0 * sd);
    chi2 += (c - expected) * (c - expected) / expected;
  }
  CHECK(chi2 < 27.88);  // 99.9% quantile, 9 dof

  // Without replacement: no duplicates in a batch.
  for (int t = 0; t < 100; ++t) {
    auto s = ten.sample_indices(6, rng);
    std::sort(s.begin(), s.end());
    CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
  }

  CHECK_THROWS_AS(ReplayMemory(0).push(Experience{}), PreconditionError);
}

TEST_CASE("exploration noise schedule and action box") {
  DdpgConfig cfg = small_config();
  DdpgAgent agent(6, 3, cfg);
  CHECK(agent.noise_sigma() == 0.6);
  Rng rng(1);
  const Vector s = random_matrix(rng, 6, 1).col(0);
  const Vector greedy = agent.act(s, false);
  CHECK(agent.act(s, false) == greedy);
  CHECK(agent.noise_sigma() == 0.6);
  CHECK((greedy.array() >= 0.0).all());
  CHECK((greedy.array() <= 1.0).all());

  agent.act(s, true);
  CHECK(agent.noise_sigma() == doctest::Approx(0.6 / 1.001).epsilon(1e-15));

  double previous = agent.noise_sigma();
  for (int t = 0; t < 6000; ++t) {
    const Vector a = agent.act(s, true);
    CHECK((a.array() >= 0.0).all());
    CHECK((a.array() <= 1.0).all());
    CHECK(agent.noise_sigma() <= previous);
    CHECK(agent.noise_sigma() >= cfg.noise_min);
    previous = agent.noise_sigma();
  }
  CHECK(agent.noise_sigma() == cfg.noise_min);

  agent.set_noise_sigma(1e6);
  for (int t = 0; t < 50; ++t) {
    const Vector a = agent.act(s, true);
    CHECK((a.array() >= 0.0).all());
    CHECK((a.array() <= 1.0).all());
  }
  const Vector r = agent.random_action();
  CHECK(r.size() == 3);
  CHECK((r.array() >= 0.0).all());
  CHECK((r.array() <= 1.0).all());
}

TEST_CASE("soft_update") {
  DdpgAgent agent(3, 2, small_config());
  Rng rng(4);
  agent.actor().params() = random_matrix(rng, agent.actor().params().size(), 1).col(0);
  agent.critic().params() = random_matrix(rng, agent.critic().params().size(), 1).col(0);
  const Vector target_actor = agent.target_actor().params();

  agent.soft_update(0.0);
  CHECK(agent.target_actor().params() == target_actor);
  agent.soft_update(1.0);
  CHECK(agent.target_actor().params() == agent.actor().params());
  CHECK(agent.target_critic().params() == agent.critic().params());

  agent.actor().params().setConstant(2.0);
  agent.target_actor().params().setZero();
  agent.soft_update(0.5);
  CHECK((agent.target_actor().params().array() == 1.0).all());
  CHECK_THROWS_AS(agent.soft_update(1.5), PreconditionError);
}

TEST_CASE("target parameters are an exponential average of the online history") {
  DdpgConfig cfg;
  cfg.hidden = {};
  cfg.batch_size = 2;
  cfg.replay_capacity = 2;
  cfg.lr_actor = 0.05;
  cfg.lr_critic = 0.05;
  cfg.rho = 0.2;
  DdpgAgent agent(1, 1, cfg);
  Rng rng(9);
  const Vector theta0 = agent.target_critic().params();
  const Vector mu0 = agent.target_actor().params();
  std::vector<Vector> theta_hist, mu_hist;
  const int steps = 25;
  for (int t = 0; t < steps; ++t) {
    agent.train_on({random_experience(rng, 1, 1), random_experience(rng, 1, 1)});
    agent.soft_update(cfg.rho);
    theta_hist.push_back(agent.critic().params());
    mu_hist.push_back(agent.actor().params());
  }
  Vector theta = std::pow(1.0 - cfg.rho, steps) * theta0;
  Vector mu = std::pow(1.0 - cfg.rho, steps) * mu0;
  for (int i = 0; i < steps; ++i) {
    theta += cfg.rho * std::pow(1.0 - cfg.rho, i) * theta_hist[steps - 1 - i];
    mu += cfg.rho * std::pow(1.0 - cfg.rho, i) * mu_hist[steps - 1 - i];
  }
  CHECK((agent.target_critic().params() - theta).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((agent.target_actor().params() - mu).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("train_on with zero discount regresses on raw rewards") {
  DdpgConfig cfg = small_config();
  cfg.gamma = 0.0;
  DdpgAgent agent(4, 2, cfg);
  Rng rng(8);
  std::vector<Experience> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(random_experience(rng, 4, 2));
  double expected = 0.0;
  for (const auto& e : batch) {
    Vector joint(6);
    joint << e.state, e.action;
    const double q = agent.critic().forward(joint)(0);
    expected += (e.reward - q) * (e.reward - q);
  }
  expected /= 8.0;
  const auto stats = agent.train_on(batch);
  CHECK(stats.critic_loss == doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(agent.train_on({}), PreconditionError);
  CHECK_THROWS_AS(agent.train_step(), PreconditionError);
}

TEST_CASE("duplicating every experience leaves the update unchanged") {
  DdpgAgent a(4, 2, small_config());
  DdpgAgent b = a;
  Rng rng(12);
  std::vector<Experience> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(random_experience(rng, 4, 2));
  std::vector<Experience> doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  const auto sa = a.train_on(batch);
  const auto sb = b.train_on(doubled);
  CHECK(sa.critic_loss == doctest::Approx(sb.critic_loss).epsilon(1e-12));
  CHECK((a.critic().params() - b.critic().params()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.actor().params() - b.actor().params()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("critic action-gradient chain matches finite differences") {
  DdpgAgent agent(5, 3, small_config());
  Rng rng(21);
  const Matrix states = random_matrix(rng, 5, 4);

  // d/d(actor params) of mean_i Q(s_i, pi(s_i)) through the chain rule.
  Mlp::Tape tape;
  const Matrix actions = agent.actor().forward(states, &tape);
  const Matrix dq_da = agent.action_gradient(states, actions);
  Vector analytic;
  agent.actor().backward(tape, dq_da, &analytic);

  Mlp& actor = agent.actor();
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < actor.params().size(); ++i) {
    const double saved = actor.params()(i);
    actor.params()(i) = saved + h;
    const double plus = policy_value(agent, states);
    actor.params()(i) = saved - h;
    const double minus = policy_value(agent, states);
    actor.params()(i) = saved;
    CHECK(close_relative(analytic(i), (plus - minus) / (2.0 * h), 1e-4));
  }

  // Action gradient itself.
  Matrix a = actions;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    auto q_mean = [&](const Matrix& acts) {
      Matrix joint(8, 4);
      joint << states, acts;
      return agent.critic().forward(joint).mean();
    };
    a(i) = actions(i) + h;
    const double plus = q_mean(a);
    a(i) = actions(i) - h;
    const double minus = q_mean(a);
    a(i) = actions(i);
    CHECK(close_relative(dq_da(i), (plus - minus) / (2.0 * h), 1e-4));
  }
}

TEST_CASE("an actor step with a frozen critic raises mean Q") {
  DdpgConfig cfg = small_config();
  cfg.lr_actor = 1e-6;
  cfg.lr_critic = 1e-300;  // below the resolution of any parameter
  DdpgAgent agent(5, 3, cfg);
  Rng rng(31);
  std::vector<Experience> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(random_experience(rng, 5, 3));
  std::vector<const Vector*> cols;
  for (const auto& e : batch) cols.push_back(&e.state);
  const Matrix states = stack_columns(cols);
  const Vector critic_before = agent.critic().params();
  const double before = policy_value(agent, states);
  agent.train_on(batch);
  CHECK(agent.critic().params() == critic_before);
  CHECK(policy_value(agent, states) > before);
}

TEST_CASE("agents are deterministic and checkpoints resume bit-exactly") {
  auto run = [](DdpgAgent& agent, Rng& rng, int steps) {
    for (int t = 0; t < steps; ++t) {
      const Vector s = random_matrix(rng, 4, 1).col(0);
      Experience e;
      e.state = s;
      e.action = agent.ready() ? agent.act(s, true) : agent.random_action();
      e.reward = e.action.sum();
      e.next_state = random_matrix(rng, 4, 1).col(0);
      agent.remember(e);
      if (agent.ready()) {
        agent.train_step();
        agent.soft_update(agent.config().rho);
      }
    }
  };
  DdpgAgent a(4, 2, small_config());
  DdpgAgent b(4, 2, small_config());
  Rng ra(1), rb(1);
  run(a, ra, 30);
  run(b, rb, 30);
  CHECK(a.actor().params() == b.actor().params());
  CHECK(a.target_critic().params() == b.target_critic().params());

  const auto path = temp_path("agent.ckpt");
  save_agent(a, path);
  DdpgAgent c = load_agent(path);
  Rng rc = ra;
  run(a, ra, 20);
  run(c, rc, 20);
  CHECK(a.actor().params() == c.actor().params());
  CHECK(a.critic().params() == c.critic().params());
  CHECK(a.target_actor().params() == c.target_actor().params());
  CHECK(a.noise_sigma() == c.noise_sigma());
  CHECK(a.critic_optimizer().step == c.critic_optimizer().step);
  CHECK(a.replay().size() == c.replay().size());

  auto bytes = io::read_file(path);
  bytes[bytes.size() / 2] ^= 0xff;
  io::write_file(path, bytes);
  CHECK_THROWS_AS(load_agent(path), ChecksumError);
  std::filesystem::remove(path);
}

TEST_CASE("configuration validation") {
  DdpgConfig cfg = small_config();
  cfg.gamma = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.rho = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.batch_size = cfg.replay_capacity + 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_NOTHROW(DdpgConfig{}.validate());
}
