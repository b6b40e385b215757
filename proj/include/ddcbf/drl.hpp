#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ddcbf/util/binary_io.hpp"
#include "ddcbf/util/rng.hpp"

namespace ddcbf::drl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class OutputActivation { kIdentity, kSigmoid };

/// Fully connected network with ReLU hidden layers. All weights and biases
/// live in one flat parameter vector so optimizers and target updates can
/// treat the network as a single array. Layer l stores its weight matrix
/// (out x in, column-major) followed by its bias.
class Mlp {
 public:
  using WeightMap = Eigen::Map<Matrix>;
  using ConstWeightMap = Eigen::Map<const Matrix>;
  using BiasMap = Eigen::Map<Vector>;
  using ConstBiasMap = Eigen::Map<const Vector>;

  /// Activations recorded by a forward pass, consumed by backward().
  struct Tape {
    std::vector<Matrix> activations;  // input, then each layer's output
  };

  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, OutputActivation output);

  /// Fan-in scaled uniform initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  void initialize(Rng& rng);

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  OutputActivation output_activation() const { return output_; }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }
  void set_params(const Vector& params);

  WeightMap weight(int layer);
  ConstWeightMap weight(int layer) const;
  BiasMap bias(int layer);
  ConstBiasMap bias(int layer) const;

  /// Batched forward pass; each column of `input` is one sample.
  Matrix forward(const Matrix& input, Tape* tape = nullptr) const;
  Vector forward(const Vector& input) const;

  /// Reverse pass for upstream gradient dL/d(output) (one column per
  /// sample). Adds the parameter gradient summed over samples into
  /// `param_grad` (resized and zeroed when empty) and returns dL/d(input).
  Matrix backward(const Tape& tape, const Matrix& upstream,
                  Vector* param_grad) const;

  bool same_architecture(const Mlp& other) const {
    return sizes_ == other.sizes_ && output_ == other.output_;
  }

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;
  OutputActivation output_ = OutputActivation::kIdentity;
  Vector params_;
};

struct MlpGradients {
  Vector params;
  Matrix input;
};

/// Forward then backward through `net` for the given batch.
MlpGradients mlp_gradients(const Mlp& net, const Matrix& input,
                           const Matrix& upstream);

struct AdamState {
  Vector m;
  Vector v;
  std::int64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam update of `params` (minimization). Throws
/// NumericError on a non-finite gradient without touching any state.
void adam_step(AdamState& adam, Vector& params, const Vector& grads);

struct Experience {
  Vector state;
  Vector action;
  double reward = 0.0;
  Vector next_state;
};

/// Fixed-capacity FIFO of experiences backed by a ring buffer.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity = 0);

  void push(Experience e);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return items_.size(); }
  /// Index 0 is the oldest stored experience.
  const Experience& at(std::size_t i) const;

  /// Uniform sample of `count` distinct positions (partial Fisher-Yates).
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;
  std::vector<Experience> sample(std::size_t count, Rng& rng) const;

  void save(io::ByteWriter& out) const;
  void load(io::ByteReader& in);

 private:
  std::vector<Experience> items_;
  std::size_t head_ = 0;  // position of the oldest item
  std::size_t size_ = 0;
};

struct DdpgConfig {
  std::vector<int> hidden{256, 128, 64};
  double gamma = 0.5;
  double rho = 0.01;
  double lr_actor = 5e-6;
  double lr_critic = 5e-5;
  std::size_t replay_capacity = 2000;
  std::size_t batch_size = 256;
  double noise_init = 0.6;
  double noise_decay = 0.001;
  double noise_min = 0.01;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainStats {
  double critic_loss = 0.0;
  double mean_q = 0.0;
};

/// One BS's DDPG learner: online and target actor/critic, their optimizers,
/// the local replay memory, and the exploration-noise schedule.
class DdpgAgent {
 public:
  DdpgAgent() = default;
  DdpgAgent(int state_dim, int action_dim, DdpgConfig cfg);

  int state_dim() const { return actor_.input_size(); }
  int action_dim() const { return actor_.output_size(); }
  const DdpgConfig& config() const { return cfg_; }

  /// Deterministic policy output, or clip(pi(s) + N(0, sigma^2), 0, 1) when
  /// exploring; each exploring call decays sigma.
  Vector act(const Vector& state, bool explore);
  /// Uniform action in [0,1]^A for the warm-up phase.
  Vector random_action();

  void remember(Experience e);
  bool ready() const { return replay_.size() >= cfg_.batch_size; }
  /// Samples a batch from the replay memory and runs train_on().
  TrainStats train_step();
  /// Critic then actor update on the given batch; targets are not touched.
  TrainStats train_on(const std::vector<Experience>& batch);
  void soft_update(double rho);

  double noise_sigma() const { return sigma_; }
  void set_noise_sigma(double sigma) { sigma_ = sigma; }

  const Mlp& actor() const { return actor_; }
  const Mlp& critic() const { return critic_; }
  const Mlp& target_actor() const { return target_actor_; }
  const Mlp& target_critic() const { return target_critic_; }
  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  Mlp& target_actor() { return target_actor_; }
  Mlp& target_critic() { return target_critic_; }
  const AdamState& actor_optimizer() const { return actor_adam_; }
  const AdamState& critic_optimizer() const { return critic_adam_; }
  const ReplayMemory& replay() const { return replay_; }

  /// Critic gradient of mean Q(s, a) over the batch with respect to the
  /// actions (one column per sample).
  Matrix action_gradient(const Matrix& states, const Matrix& actions) const;

  void save(io::ByteWriter& out) const;
  void load(io::ByteReader& in);

 private:
  DdpgConfig cfg_;
  Mlp actor_;
  Mlp critic_;
  Mlp target_actor_;
  Mlp target_critic_;
  AdamState actor_adam_;
  AdamState critic_adam_;
  ReplayMemory replay_;
  double sigma_ = 0.0;
  Rng rng_;
};

/// Stacks the given per-sample vectors as matrix columns.
Matrix stack_columns(const std::vector<const Vector*>& columns);

/// Standalone agent checkpoint: magic, version, agent payload, CRC32 footer.
void save_agent(const DdpgAgent& agent, const std::string& path);
DdpgAgent load_agent(const std::string& path);

inline constexpr std::string_view kAgentMagic = "DDCBF-AGENT-v01\n";

}  // namespace ddcbf::drl
