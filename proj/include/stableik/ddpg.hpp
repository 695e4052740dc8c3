#ifndef STABLEIK_DDPG_HPP_
#define STABLEIK_DDPG_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stableik/environment.hpp"
#include "stableik/neuralnet.hpp"

namespace stableik {

struct AgentConfig {
  double gamma = 0.99;
  double tau = 0.001;
  int batch_size = 64;
  int warmup = 640;  // buffer size before updates start
  double noise_sigma0_scale = 0.5;   // sigma0 = scale * action_bound
  double noise_decay = 0.9995;       // per episode
  double noise_floor_scale = 0.01;   // floor = scale * action_bound
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double critic_weight_decay = 1e-2;  // L2 on critic affine weights
  std::size_t buffer_capacity = 500000;
  std::vector<int> hidden = {400, 300};

  void validate() const;  // throws ConfigError
};

/// Ring buffer of transitions; when full the oldest entry is evicted.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }

  /// Entry by age: index 0 is the oldest retained transition.
  const Transition& at(std::size_t i) const;

  /// Uniform i.i.d. draw with replacement.
  std::vector<const Transition*> sample(int count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next write slot
  std::size_t size_ = 0;
  std::vector<Transition> storage_;
};

/// Mini-batch in matrix form, one transition per row.
struct Batch {
  Matrix s, a, r, s_next;       // r is (m, 1)
  std::vector<std::uint8_t> done;
  int size = 0;
};

Batch make_batch(const std::vector<const Transition*>& items);

struct EpisodeLog {
  int episode = 0;
  int steps = 0;
  double cum_reward = 0.0;
  double mean_q = 0.0;  // mean critic value over this episode's updates
  double final_error_cm = 0.0;
  bool success = false;
  double sigma = 0.0;
};

/// Actor-critic pair with target copies, optimizer state, exploration noise,
/// and the replay buffer.
class Agent {
 public:
  Agent(int state_dim, int action_dim, double action_bound, AgentConfig cfg,
        std::uint64_t init_seed);

  /// Re-seeds the exploration-noise and minibatch-sampling streams.
  void seed_streams(std::uint64_t noise_seed, std::uint64_t sampler_seed);

  /// Applies the exploration schedule sigma_t = max(floor, sigma0 * decay^t).
  void begin_episode(int episode_index);

  /// a = actor(s); explore adds N(0, sigma_t) per component; clipped.
  Eigen::VectorXd select_action(const Eigen::VectorXd& state, bool explore);

  /// y_i = r_i + gamma * Q'(s'_i, mu'(s'_i)), masked to y_i = r_i when done.
  Matrix critic_target(const Batch& batch);

  /// One Adam step on the critic minimizing mean (y - Q(s,a))^2 with y held
  /// constant, plus L2 weight decay on the affine weights. The decay enters
  /// the gradient only; the returned pre-update loss is the data MSE alone.
  double update_critic(const Batch& batch);

  /// One Adam ascent step on the actor along dQ/da backpropagated through
  /// mu(s). The critic is evaluated without being mutated. Returns mean Q.
  double update_actor(const Batch& batch);

  /// Gradient hook for update_actor: given states and the actor's actions,
  /// returns d(mean value)/d(action) and the mean value itself. Lets tests
  /// substitute an analytic critic.
  using ValueGradient =
      std::function<Matrix(const Matrix& states, const Matrix& actions,
                           double* mean_value)>;
  double update_actor_with(const Matrix& states, const ValueGradient& grad_fn);

  /// p' <- tau * p + (1 - tau) * p' over all target parameters and batch-norm
  /// running statistics.
  void soft_update();
  void soft_update(double tau);

  /// Uniform minibatch of config().batch_size from the replay buffer.
  Batch sample_batch();

  ReplayBuffer& buffer() { return buffer_; }
  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  Mlp& target_actor() { return target_actor_; }
  Mlp& target_critic() { return target_critic_; }
  const AgentConfig& config() const { return cfg_; }
  double sigma() const { return sigma_; }
  double action_bound() const { return action_bound_; }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }

  /// Writes a manifest plus one file per network and optimizer state next to
  /// it. `path` is the manifest file; companions derive from its stem.
  void save_checkpoint(const std::string& path, int episode) const;

  /// Restores networks, optimizer state, and the noise level.
  /// Returns the stored episode index.
  int load_checkpoint(const std::string& path);

 private:
  AgentConfig cfg_;
  int state_dim_;
  int action_dim_;
  double action_bound_;

  Mlp actor_, critic_, target_actor_, target_critic_;
  AdamState actor_adam_, critic_adam_;
  ReplayBuffer buffer_;
  Rng noise_rng_{0};
  Rng sampler_rng_{0};
  double sigma_ = 0.0;
  int episode_index_ = 0;
};

/// Runs episodes [first_episode, episodes) of environment interaction with
/// one critic/actor/target update per step once the buffer holds warmup
/// transitions. Deterministic for a fixed master seed; per-episode seeds are
/// derived from the episode index, so a resumed run visits the same start
/// and goal draws the uninterrupted run would have. Throws NumericalError if
/// any logged quantity turns non-finite.
std::vector<EpisodeLog> train(
    Environment& env, Agent& agent, int episodes, int max_steps,
    std::uint64_t master_seed,
    const std::function<void(const EpisodeLog&)>& on_episode = nullptr,
    int first_episode = 0);

/// Stream tags for the master-seed hierarchy (env, noise, sampler, init).
enum : std::uint64_t {
  kSeedStreamEnv = 0,
  kSeedStreamNoise = 1,
  kSeedStreamSampler = 2,
  kSeedStreamInit = 3,
  kSeedStreamEval = 4,
  kSeedStreamPairs = 5,
};

}  // namespace stableik

#endif  // STABLEIK_DDPG_HPP_
