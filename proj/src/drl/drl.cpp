#include "ddcbf/drl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <utility>

#include "ddcbf/errors.hpp"

namespace ddcbf::drl {

namespace {

constexpr std::uint32_t kAgentVersion = 1;

Matrix sigmoid(const Matrix& z) {
  return z.unaryExpr([](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

void write_vector(io::ByteWriter& out, const Vector& v) { out.real_matrix(v); }

Vector read_vector(io::ByteReader& in) {
  const Matrix m = in.real_matrix();
  if (m.cols() != 1 && m.size() != 0)
    throw DimensionError("expected a column vector in checkpoint");
  return Eigen::Map<const Vector>(m.data(), m.size());
}

void write_adam(io::ByteWriter& out, const AdamState& a) {
  write_vector(out, a.m);
  write_vector(out, a.v);
  out.i64(a.step);
  out.f64(a.learning_rate);
  out.f64(a.beta1);
  out.f64(a.beta2);
  out.f64(a.epsilon);
}

AdamState read_adam(io::ByteReader& in) {
  AdamState a;
  a.m = read_vector(in);
  a.v = read_vector(in);
  a.step = in.i64();
  a.learning_rate = in.f64();
  a.beta1 = in.f64();
  a.beta2 = in.f64();
  a.epsilon = in.f64();
  return a;
}

Matrix concat_rows(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes, OutputActivation output)
    : sizes_(std::move(layer_sizes)), output_(output) {
  if (sizes_.size() < 2)
    throw PreconditionError("an MLP needs at least an input and an output layer");
  for (int s : sizes_)
    if (s <= 0) throw PreconditionError("layer sizes must be positive");
  Eigen::Index total = 0;
  for (int l = 0; l < num_layers(); ++l) {
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  params_ = Vector::Zero(total);
}

void Mlp::initialize(Rng& rng) {
  for (int l = 0; l < num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = weight(l);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = dist(rng);
    auto b = bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = dist(rng);
  }
}

void Mlp::set_params(const Vector& params) {
  if (params.size() != params_.size())
    throw DimensionError("parameter vector has " + std::to_string(params.size()) +
                         " entries, network needs " +
                         std::to_string(params_.size()));
  params_ = params;
}

Mlp::WeightMap Mlp::weight(int l) {
  return WeightMap(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
}
Mlp::ConstWeightMap Mlp::weight(int l) const {
  return ConstWeightMap(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
}
Mlp::BiasMap Mlp::bias(int l) {
  return BiasMap(params_.data() + offsets_[l] +
                     static_cast<Eigen::Index>(sizes_[l + 1]) * sizes_[l],
                 sizes_[l + 1]);
}
Mlp::ConstBiasMap Mlp::bias(int l) const {
  return ConstBiasMap(params_.data() + offsets_[l] +
                          static_cast<Eigen::Index>(sizes_[l + 1]) * sizes_[l],
                      sizes_[l + 1]);
}

Matrix Mlp::forward(const Matrix& input, Tape* tape) const {
  if (input.rows() != input_size())
    throw DimensionError("MLP input has " + std::to_string(input.rows()) +
                         " rows, expected " + std::to_string(input_size()));
  if (tape) {
    tape->activations.clear();
    tape->activations.push_back(input);
  }
  Matrix a = input;
  for (int l = 0; l < num_layers(); ++l) {
    Matrix z = weight(l) * a;
    z.colwise() += bias(l);
    if (l + 1 < num_layers())
      a = z.cwiseMax(0.0);
    else if (output_ == OutputActivation::kSigmoid)
      a = sigmoid(z);
    else
      a = std::move(z);
    if (tape) tape->activations.push_back(a);
  }
  return a;
}

Vector Mlp::forward(const Vector& input) const {
  return forward(Matrix(input)).col(0);
}

Matrix Mlp::backward(const Tape& tape, const Matrix& upstream,
                     Vector* param_grad) const {
  if (tape.activations.size() != sizes_.size())
    throw PreconditionError("tape does not belong to this network");
  const Matrix& out = tape.activations.back();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols())
    throw DimensionError("upstream gradient does not match network output");
  if (param_grad && param_grad->size() == 0) *param_grad = Vector::Zero(params_.size());
  if (param_grad && param_grad->size() != params_.size())
    throw DimensionError("gradient buffer does not match parameter count");

  Matrix delta = upstream;
  if (output_ == OutputActivation::kSigmoid)
    delta.array() *= out.array() * (1.0 - out.array());
  for (int l = num_layers() - 1; l >= 0; --l) {
    const Matrix& a_in = tape.activations[l];
    if (param_grad) {
      const Eigen::Index rows = sizes_[l + 1];
      const Eigen::Index cols = sizes_[l];
      Eigen::Map<Matrix>(param_grad->data() + offsets_[l], rows, cols).noalias() +=
          delta * a_in.transpose();
      Eigen::Map<Vector>(param_grad->data() + offsets_[l] + rows * cols, rows) +=
          delta.rowwise().sum();
    }
    Matrix prev = weight(l).transpose() * delta;
    if (l > 0) prev.array() *= (a_in.array() > 0.0).cast<double>();
    delta = std::move(prev);
  }
  return delta;
}

MlpGradients mlp_gradients(const Mlp& net, const Matrix& input,
                           const Matrix& upstream) {
  Mlp::Tape tape;
  net.forward(input, &tape);
  MlpGradients g;
  g.input = net.backward(tape, upstream, &g.params);
  return g;
}

void adam_step(AdamState& adam, Vector& params, const Vector& grads) {
  if (grads.size() != params.size())
    throw DimensionError("gradient and parameter sizes differ");
  if (!grads.allFinite())
    throw NumericError("non-finite gradient at Adam step " +
                       std::to_string(adam.step + 1));
  if (adam.m.size() == 0) adam.m = Vector::Zero(params.size());
  if (adam.v.size() == 0) adam.v = Vector::Zero(params.size());
  if (adam.m.size() != params.size() || adam.v.size() != params.size())
    throw DimensionError("Adam accumulators do not match parameters");
  ++adam.step;
  adam.m = adam.beta1 * adam.m + (1.0 - adam.beta1) * grads;
  adam.v = adam.beta2 * adam.v + (1.0 - adam.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.step));
  const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.step));
  params.array() -= adam.learning_rate * (adam.m.array() / c1) /
                    ((adam.v.array() / c2).sqrt() + adam.epsilon);
}

ReplayMemory::ReplayMemory(std::size_t capacity) : items_(capacity) {}

void ReplayMemory::push(Experience e) {
  if (items_.empty()) throw PreconditionError("replay memory has zero capacity");
  if (size_ < items_.size()) {
    items_[(head_ + size_) % items_.size()] = std::move(e);
    ++size_;
  } else {
    items_[head_] = std::move(e);
    head_ = (head_ + 1) % items_.size();
  }
}

const Experience& ReplayMemory::at(std::size_t i) const {
  if (i >= size_)
    throw IndexError("replay index " + std::to_string(i) + " out of range");
  return items_[(head_ + i) % items_.size()];
}

std::vector<std::size_t> ReplayMemory::sample_indices(std::size_t count,
                                                      Rng& rng) const {
  if (count > size_)
    throw PreconditionError("cannot sample " + std::to_string(count) +
                            " experiences from " + std::to_string(size_));
  std::vector<std::size_t> idx(size_);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, size_ - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

std::vector<Experience> ReplayMemory::sample(std::size_t count, Rng& rng) const {
  std::vector<Experience> batch;
  batch.reserve(count);
  for (std::size_t i : sample_indices(count, rng)) batch.push_back(at(i));
  return batch;
}

void ReplayMemory::save(io::ByteWriter& out) const {
  out.u64(items_.size());
  out.u64(size_);
  for (std::size_t i = 0; i < size_; ++i) {
    const Experience& e = at(i);
    write_vector(out, e.state);
    write_vector(out, e.action);
    out.f64(e.reward);
    write_vector(out, e.next_state);
  }
}

void ReplayMemory::load(io::ByteReader& in) {
  const auto capacity = in.u64();
  const auto size = in.u64();
  if (size > capacity) throw DimensionError("replay size exceeds capacity");
  if (capacity > in.remaining())
    throw DimensionError("replay capacity larger than checkpoint payload");
  ReplayMemory loaded(static_cast<std::size_t>(capacity));
  for (std::uint64_t i = 0; i < size; ++i) {
    Experience e;
    e.state = read_vector(in);
    e.action = read_vector(in);
    e.reward = in.f64();
    e.next_state = read_vector(in);
    loaded.push(std::move(e));
  }
  *this = std::move(loaded);
}

void DdpgConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw ConfigError("discount gamma must lie in [0, 1)");
  if (!(rho > 0.0 && rho <= 1.0))
    throw ConfigError("soft-update rate rho must lie in (0, 1]");
  if (!(lr_actor > 0.0) || !(lr_critic > 0.0))
    throw ConfigError("learning rates must be positive");
  if (batch_size == 0 || replay_capacity < batch_size)
    throw ConfigError("replay capacity must be at least the batch size (>= 1)");
  if (!(noise_init >= 0.0) || !(noise_min >= 0.0) || !(noise_decay >= 0.0))
    throw ConfigError("exploration noise parameters must be non-negative");
  for (int h : hidden)
    if (h <= 0) throw ConfigError("hidden layer sizes must be positive");
}

DdpgAgent::DdpgAgent(int state_dim, int action_dim, DdpgConfig cfg)
    : cfg_(std::move(cfg)), replay_(cfg_.replay_capacity),
      sigma_(cfg_.noise_init), rng_(cfg_.seed) {
  cfg_.validate();
  std::vector<int> actor_sizes{state_dim};
  actor_sizes.insert(actor_sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
  actor_sizes.push_back(action_dim);
  std::vector<int> critic_sizes{state_dim + action_dim};
  critic_sizes.insert(critic_sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
  critic_sizes.push_back(1);

  actor_ = Mlp(actor_sizes, OutputActivation::kSigmoid);
  critic_ = Mlp(critic_sizes, OutputActivation::kIdentity);
  actor_.initialize(rng_);
  critic_.initialize(rng_);
  target_actor_ = actor_;
  target_critic_ = critic_;
  actor_adam_.learning_rate = cfg_.lr_actor;
  critic_adam_.learning_rate = cfg_.lr_critic;
}

Vector DdpgAgent::act(const Vector& state, bool explore) {
  Vector a = actor_.forward(state);
  if (!explore) return a;
  if (sigma_ > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma_);
    for (Eigen::Index i = 0; i < a.size(); ++i)
      a(i) = std::clamp(a(i) + noise(rng_), 0.0, 1.0);
  }
  sigma_ = std::max(sigma_ / (1.0 + cfg_.noise_decay), cfg_.noise_min);
  return a;
}

Vector DdpgAgent::random_action() {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector a(action_dim());
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = unit(rng_);
  return a;
}

void DdpgAgent::remember(Experience e) {
  if (e.state.size() != state_dim() || e.next_state.size() != state_dim() ||
      e.action.size() != action_dim())
    throw DimensionError("experience does not match agent dimensions");
  replay_.push(std::move(e));
}

TrainStats DdpgAgent::train_step() {
  if (!ready())
    throw PreconditionError("replay holds " + std::to_string(replay_.size()) +
                            " experiences, batch needs " +
                            std::to_string(cfg_.batch_size));
  return train_on(replay_.sample(cfg_.batch_size, rng_));
}

Matrix stack_columns(const std::vector<const Vector*>& columns) {
  if (columns.empty()) return Matrix();
  Matrix out(columns.front()->size(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i]->size() != out.rows())
      throw DimensionError("columns have different lengths");
    out.col(static_cast<Eigen::Index>(i)) = *columns[i];
  }
  return out;
}

Matrix DdpgAgent::action_gradient(const Matrix& states,
                                  const Matrix& actions) const {
  Mlp::Tape tape;
  critic_.forward(concat_rows(states, actions), &tape);
  const Matrix upstream =
      Matrix::Constant(1, states.cols(), 1.0 / static_cast<double>(states.cols()));
  return critic_.backward(tape, upstream, nullptr).bottomRows(actions.rows());
}

TrainStats DdpgAgent::train_on(const std::vector<Experience>& batch) {
  if (batch.empty()) throw PreconditionError("empty training batch");
  const auto size = static_cast<Eigen::Index>(batch.size());
  std::vector<const Vector*> s, a, s2;
  Vector r(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    const Experience& e = batch[static_cast<std::size_t>(i)];
    if (e.state.size() != state_dim() || e.next_state.size() != state_dim() ||
        e.action.size() != action_dim())
      throw DimensionError("experience does not match agent dimensions");
    s.push_back(&e.state);
    a.push_back(&e.action);
    s2.push_back(&e.next_state);
    r(i) = e.reward;
  }
  const Matrix states = stack_columns(s);
  const Matrix actions = stack_columns(a);
  const Matrix next_states = stack_columns(s2);

  // y = r + gamma * Q'(s', pi'(s')).
  const Matrix next_actions = target_actor_.forward(next_states);
  const Vector next_q =
      target_critic_.forward(concat_rows(next_states, next_actions)).row(0).transpose();
  const Vector y = r + cfg_.gamma * next_q;

  Mlp::Tape tape;
  const Vector q =
      critic_.forward(concat_rows(states, actions), &tape).row(0).transpose();
  const Vector diff = q - y;
  TrainStats stats;
  stats.critic_loss = diff.squaredNorm() / static_cast<double>(size);
  stats.mean_q = q.mean();
  Vector critic_grad;
  critic_.backward(tape, (2.0 / static_cast<double>(size)) * diff.transpose(),
                   &critic_grad);
  adam_step(critic_adam_, critic_.params(), critic_grad);

  // Ascent on mean Q(s, pi(s)): descend its negation.
  Mlp::Tape actor_tape;
  const Matrix policy_actions = actor_.forward(states, &actor_tape);
  const Matrix dq_da = action_gradient(states, policy_actions);
  Vector actor_grad;
  actor_.backward(actor_tape, -dq_da, &actor_grad);
  adam_step(actor_adam_, actor_.params(), actor_grad);
  return stats;
}

void DdpgAgent::soft_update(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0))
    throw PreconditionError("soft-update rate must lie in [0, 1]");
  target_actor_.params() = rho * actor_.params() + (1.0 - rho) * target_actor_.params();
  target_critic_.params() =
      rho * critic_.params() + (1.0 - rho) * target_critic_.params();
}

void DdpgAgent::save(io::ByteWriter& out) const {
  out.u32(kAgentVersion);
  out.u64(cfg_.hidden.size());
  for (int h : cfg_.hidden) out.u32(static_cast<std::uint32_t>(h));
  out.f64(cfg_.gamma);
  out.f64(cfg_.rho);
  out.f64(cfg_.lr_actor);
  out.f64(cfg_.lr_critic);
  out.u64(cfg_.replay_capacity);
  out.u64(cfg_.batch_size);
  out.f64(cfg_.noise_init);
  out.f64(cfg_.noise_decay);
  out.f64(cfg_.noise_min);
  out.u64(cfg_.seed);
  out.u32(static_cast<std::uint32_t>(state_dim()));
  out.u32(static_cast<std::uint32_t>(action_dim()));
  write_vector(out, actor_.params());
  write_vector(out, critic_.params());
  write_vector(out, target_actor_.params());
  write_vector(out, target_critic_.params());
  write_adam(out, actor_adam_);
  write_adam(out, critic_adam_);
  out.f64(sigma_);
  out.str(rng_state(rng_));
  replay_.save(out);
}

void DdpgAgent::load(io::ByteReader& in) {
  const auto version = in.u32();
  if (version != kAgentVersion)
    throw IoError("unsupported agent checkpoint version " + std::to_string(version));
  DdpgConfig cfg;
  const auto layers = in.u64();
  if (layers > in.remaining()) throw DimensionError("corrupt hidden-layer count");
  cfg.hidden.clear();
  for (std::uint64_t i = 0; i < layers; ++i)
    cfg.hidden.push_back(static_cast<int>(in.u32()));
  cfg.gamma = in.f64();
  cfg.rho = in.f64();
  cfg.lr_actor = in.f64();
  cfg.lr_critic = in.f64();
  cfg.replay_capacity = in.u64();
  cfg.batch_size = in.u64();
  cfg.noise_init = in.f64();
  cfg.noise_decay = in.f64();
  cfg.noise_min = in.f64();
  cfg.seed = in.u64();
  const int state_dim = static_cast<int>(in.u32());
  const int action_dim = static_cast<int>(in.u32());

  DdpgAgent agent(state_dim, action_dim, cfg);
  agent.actor_.set_params(read_vector(in));
  agent.critic_.set_params(read_vector(in));
  agent.target_actor_.set_params(read_vector(in));
  agent.target_critic_.set_params(read_vector(in));
  agent.actor_adam_ = read_adam(in);
  agent.critic_adam_ = read_adam(in);
  agent.sigma_ = in.f64();
  restore_rng(agent.rng_, in.str());
  agent.replay_.load(in);
  if (agent.replay_.capacity() != cfg.replay_capacity)
    throw DimensionError("replay capacity does not match agent configuration");
  *this = std::move(agent);
}

void save_agent(const DdpgAgent& agent, const std::string& path) {
  io::ByteWriter w;
  w.raw(kAgentMagic);
  agent.save(w);
  io::write_checked_file(path, w);
}

DdpgAgent load_agent(const std::string& path) {
  const auto bytes = io::read_checked_file(path);
  io::ByteReader r(bytes);
  if (bytes.size() < kAgentMagic.size() || r.raw(kAgentMagic.size()) != kAgentMagic)
    throw IoError(path + " is not an agent checkpoint");
  DdpgAgent agent;
  agent.load(r);
  return agent;
}

}  // namespace ddcbf::drl
