#include "stableik/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>

#include "stableik/errors.hpp"
#include "stableik/text_format.hpp"

namespace stableik {
namespace {

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    throw NumericalError(std::string(what) + " is not finite");
  }
}

double matrix_mean(const Matrix& m) {
  double sum = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) sum += m.data()[i];
  return sum / static_cast<double>(m.size());
}

void copy_row(Matrix& dst, int row, const Eigen::VectorXd& v) {
  for (int j = 0; j < v.size(); ++j) dst(row, j) = v[j];
}

}  // namespace

void AgentConfig::validate() const {
  if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("gamma must be in (0, 1]");
  if (tau <= 0.0 || tau > 1.0) throw ConfigError("tau must be in (0, 1]");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (warmup < batch_size) {
    throw ConfigError("warmup must be at least batch_size");
  }
  if (critic_weight_decay < 0.0) {
    throw ConfigError("critic_weight_decay must be non-negative");
  }
  if (noise_sigma0_scale < 0.0 || noise_floor_scale < 0.0) {
    throw ConfigError("noise scales must be non-negative");
  }
  if (noise_decay <= 0.0 || noise_decay > 1.0) {
    throw ConfigError("noise_decay must be in (0, 1]");
  }
  if (actor_lr <= 0.0 || critic_lr <= 0.0) {
    throw ConfigError("learning rates must be positive");
  }
  if (buffer_capacity == 0) throw ConfigError("buffer_capacity must be positive");
  if (static_cast<std::size_t>(batch_size) > buffer_capacity) {
    throw ConfigError("batch_size exceeds buffer_capacity");
  }
  if (hidden.empty()) throw ConfigError("at least one hidden layer is required");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("hidden layer widths must be positive");
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (size_ < capacity_) {
    storage_.push_back(std::move(t));
    ++size_;
  } else {
    storage_[head_] = std::move(t);
  }
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw LookupError("replay buffer index out of range");
  const std::size_t oldest = (size_ == capacity_) ? head_ : 0;
  return storage_[(oldest + i) % capacity_];
}

std::vector<const Transition*> ReplayBuffer::sample(int count, Rng& rng) const {
  if (count < 1) throw ConfigError("sample count must be positive");
  if (size_ == 0) throw StatisticsError("cannot sample from an empty replay buffer");
  std::vector<const Transition*> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    out.push_back(&at(rng.uniform_index(size_)));
  }
  return out;
}

Batch make_batch(const std::vector<const Transition*>& items) {
  if (items.empty()) throw StatisticsError("cannot build an empty batch");
  const int m = static_cast<int>(items.size());
  const Eigen::VectorXd first_s = items[0]->s.vector();
  const int sdim = static_cast<int>(first_s.size());
  const int adim = static_cast<int>(items[0]->a.size());

  Batch b;
  b.size = m;
  b.s = Matrix(m, sdim);
  b.a = Matrix(m, adim);
  b.r = Matrix(m, 1);
  b.s_next = Matrix(m, sdim);
  b.done.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const Transition& t = *items[static_cast<std::size_t>(i)];
    const Eigen::VectorXd sv = t.s.vector();
    const Eigen::VectorXd nv = t.s_next.vector();
    if (sv.size() != sdim || nv.size() != sdim || t.a.size() != adim) {
      throw ShapeError("transitions in a batch must share dimensions");
    }
    copy_row(b.s, i, sv);
    copy_row(b.a, i, t.a);
    copy_row(b.s_next, i, nv);
    b.r(i, 0) = t.r;
    b.done[static_cast<std::size_t>(i)] = t.done ? 1 : 0;
  }
  return b;
}

namespace {

std::vector<LayerSpec> actor_specs(int state_dim, int action_dim,
                                   const std::vector<int>& hidden) {
  std::vector<LayerSpec> specs;
  int in = state_dim;
  for (int h : hidden) {
    specs.push_back({in, h, Activation::kCRelu, true});
    in = activation_width(specs.back());
  }
  specs.push_back({in, action_dim, Activation::kTanh, false});
  return specs;
}

// The action joins at layer 1; batch norm stays on the state-only pathway.
std::vector<LayerSpec> critic_specs(int state_dim, int action_dim,
                                    const std::vector<int>& hidden) {
  std::vector<LayerSpec> specs;
  specs.push_back({state_dim, hidden[0], Activation::kCRelu, true});
  int in = activation_width(specs.back()) + action_dim;
  for (std::size_t i = 1; i < hidden.size(); ++i) {
    specs.push_back({in, hidden[i], Activation::kCRelu, false});
    in = activation_width(specs.back());
  }
  specs.push_back({in, 1, Activation::kLinear, false});
  return specs;
}

}  // namespace

Agent::Agent(int state_dim, int action_dim, double action_bound,
             AgentConfig cfg, std::uint64_t init_seed)
    : cfg_(std::move(cfg)),
      state_dim_(state_dim),
      action_dim_(action_dim),
      action_bound_(action_bound),
      actor_(actor_specs(state_dim, action_dim, cfg_.hidden)),
      critic_(critic_specs(state_dim, action_dim, cfg_.hidden), 1, action_dim),
      target_actor_(actor_),
      target_critic_(critic_),
      buffer_(cfg_.buffer_capacity) {
  cfg_.validate();
  if (state_dim < 1 || action_dim < 1) {
    throw ConfigError("state and action dimensions must be positive");
  }
  if (action_bound <= 0.0) throw ConfigError("action_bound must be positive");

  Rng actor_rng(Rng::derive_seed(init_seed, 11));
  Rng critic_rng(Rng::derive_seed(init_seed, 12));
  actor_.init_params(actor_rng, 3e-3);
  actor_.output_scale = action_bound_;
  critic_.init_params(critic_rng);

  // Targets start as exact copies.
  target_actor_ = actor_;
  target_critic_ = critic_;

  actor_adam_.lr = cfg_.actor_lr;
  critic_adam_.lr = cfg_.critic_lr;
  sigma_ = cfg_.noise_sigma0_scale * action_bound_;
  seed_streams(Rng::derive_seed(init_seed, 13), Rng::derive_seed(init_seed, 14));
}

void Agent::seed_streams(std::uint64_t noise_seed, std::uint64_t sampler_seed) {
  noise_rng_ = Rng(noise_seed);
  sampler_rng_ = Rng(sampler_seed);
}

void Agent::begin_episode(int episode_index) {
  episode_index_ = episode_index;
  const double sigma0 = cfg_.noise_sigma0_scale * action_bound_;
  const double floor = cfg_.noise_floor_scale * action_bound_;
  sigma_ = std::max(floor, sigma0 * std::pow(cfg_.noise_decay, episode_index));
}

Eigen::VectorXd Agent::select_action(const Eigen::VectorXd& state, bool explore) {
  if (static_cast<int>(state.size()) != state_dim_) {
    throw ShapeError("state dimension mismatch in select_action");
  }
  Matrix s(1, state_dim_);
  copy_row(s, 0, state);
  const Matrix a = actor_.forward(s, ForwardMode::kInfer);
  Eigen::VectorXd out(action_dim_);
  for (int j = 0; j < action_dim_; ++j) {
    double v = a(0, j);
    if (explore) v += noise_rng_.normal(0.0, sigma_);
    out[j] = std::clamp(v, -action_bound_, action_bound_);
  }
  return out;
}

Matrix Agent::critic_target(const Batch& batch) {
  const Matrix next_a = target_actor_.forward(batch.s_next, ForwardMode::kInfer);
  const Matrix next_q =
      target_critic_.forward(batch.s_next, next_a, ForwardMode::kInfer);
  Matrix y(batch.size, 1);
  for (int i = 0; i < batch.size; ++i) {
    const double mask = batch.done[static_cast<std::size_t>(i)] ? 0.0 : 1.0;
    y(i, 0) = batch.r(i, 0) + cfg_.gamma * mask * next_q(i, 0);
  }
  return y;
}

double Agent::update_critic(const Batch& batch) {
  const Matrix y = critic_target(batch);
  ForwardCache cache;
  const Matrix q = critic_.forward(batch.s, batch.a, ForwardMode::kTrain, &cache);

  const double inv_m = 1.0 / static_cast<double>(batch.size);
  double loss = 0.0;
  Matrix dout(batch.size, 1);
  for (int i = 0; i < batch.size; ++i) {
    const double diff = q(i, 0) - y(i, 0);
    loss += diff * diff;
    dout(i, 0) = 2.0 * diff * inv_m;
  }
  loss *= inv_m;
  require_finite(loss, "critic loss");

  Gradients grads = critic_.backward(cache, dout);
  if (cfg_.critic_weight_decay > 0.0) {
    // Decay the affine weights only; biases and batch-norm parameters are
    // left free so the regularizer cannot fight the normalization.
    const std::vector<Matrix*> params = critic_.parameters();
    const std::vector<Matrix*> flat = grads.flat();
    std::size_t idx = 0;
    for (const Layer& layer : critic_.layers()) {
      Matrix& gw = *flat[idx];
      const Matrix& w = *params[idx];
      for (std::size_t i = 0; i < w.size(); ++i)
        gw.data()[i] += cfg_.critic_weight_decay * w.data()[i];
      idx += layer.spec.batch_norm ? 4 : 2;
    }
  }
  adam_update(critic_.parameters(), grads.flat(), critic_adam_);
  return loss;
}

double Agent::update_actor(const Batch& batch) {
  return update_actor_with(
      batch.s, [this](const Matrix& states, const Matrix& actions,
                      double* mean_value) -> Matrix {
        ForwardCache cache;
        const Matrix q = critic_.forward(states, actions,
                                         ForwardMode::kTrainFrozen, &cache);
        *mean_value = matrix_mean(q);
        Matrix dq(q.rows(), 1);
        dq.fill(1.0 / static_cast<double>(q.rows()));
        Gradients cg = critic_.backward(cache, dq);
        return cg.aux;  // d(mean Q)/d(action)
      });
}

double Agent::update_actor_with(const Matrix& states,
                                const ValueGradient& grad_fn) {
  ForwardCache actor_cache;
  const Matrix actions = actor_.forward(states, ForwardMode::kTrain, &actor_cache);

  double mean_value = 0.0;
  const Matrix dv_da = grad_fn(states, actions, &mean_value);
  if (!dv_da.same_shape(actions)) {
    throw ShapeError("value gradient shape does not match the action batch");
  }
  require_finite(mean_value, "actor objective");

  // Adam descends, so feed the gradient of -mean(V) to ascend.
  Matrix dout(actions.rows(), actions.cols());
  for (std::size_t i = 0; i < dout.size(); ++i) dout.data()[i] = -dv_da.data()[i];

  Gradients grads = actor_.backward(actor_cache, dout);
  adam_update(actor_.parameters(), grads.flat(), actor_adam_);
  return mean_value;
}

void Agent::soft_update() { soft_update(cfg_.tau); }

void Agent::soft_update(double tau) {
  // tau = 0 is the identity blend; only the config-level rate must be positive.
  if (tau < 0.0 || tau > 1.0) throw ConfigError("tau must be in [0, 1]");
  const auto blend = [tau](std::vector<Matrix*> src, std::vector<Matrix*> dst) {
    if (src.size() != dst.size()) {
      throw ShapeError("network/target block count mismatch");
    }
    for (std::size_t k = 0; k < src.size(); ++k) {
      Matrix& s = *src[k];
      Matrix& d = *dst[k];
      if (!s.same_shape(d)) throw ShapeError("network/target shape mismatch");
      for (std::size_t i = 0; i < s.size(); ++i) {
        d.data()[i] = tau * s.data()[i] + (1.0 - tau) * d.data()[i];
      }
    }
  };
  blend(actor_.parameters(), target_actor_.parameters());
  blend(actor_.running_stats(), target_actor_.running_stats());
  blend(critic_.parameters(), target_critic_.parameters());
  blend(critic_.running_stats(), target_critic_.running_stats());
}

Batch Agent::sample_batch() {
  return make_batch(buffer_.sample(cfg_.batch_size, sampler_rng_));
}

namespace {

void save_network_file(const std::filesystem::path& path, const Mlp& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  net.save(out);
  if (!out) throw IoError("failed writing " + path.string());
}

Mlp load_network_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return Mlp::load(in);
}

void save_adam_file(const std::filesystem::path& path, const AdamState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  state.save(out);
  if (!out) throw IoError("failed writing " + path.string());
}

AdamState load_adam_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return AdamState::load(in);
}

}  // namespace

void Agent::save_checkpoint(const std::string& path, int episode) const {
  const std::filesystem::path manifest(path);
  const std::string stem = manifest.stem().string();
  const std::filesystem::path dir = manifest.parent_path();

  const auto companion = [&](const char* tag, const char* ext) {
    return stem + "." + tag + ext;
  };
  const struct {
    const char* tag;
    const Mlp* net;
  } nets[] = {{"actor", &actor_},
              {"critic", &critic_},
              {"target_actor", &target_actor_},
              {"target_critic", &target_critic_}};

  std::ofstream out(manifest, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "stableik_checkpoint 1\n";
  out << "episode " << episode << "\n";
  out << "sigma " << format_double(sigma_) << "\n";
  for (const auto& n : nets) {
    const std::string name = companion(n.tag, ".mlp");
    save_network_file(dir / name, *n.net);
    out << n.tag << " " << name << "\n";
  }
  const std::string actor_adam_name = companion("actor", ".adam");
  const std::string critic_adam_name = companion("critic", ".adam");
  save_adam_file(dir / actor_adam_name, actor_adam_);
  save_adam_file(dir / critic_adam_name, critic_adam_);
  out << "actor_adam " << actor_adam_name << "\n";
  out << "critic_adam " << critic_adam_name << "\n";
  if (!out) throw IoError("failed writing " + path);
}

int Agent::load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  const std::filesystem::path dir = std::filesystem::path(path).parent_path();

  std::string line;
  if (!std::getline(in, line) || line != "stableik_checkpoint 1") {
    throw ParseError(path + ": not a checkpoint manifest");
  }
  int episode = 0;
  bool saw[6] = {};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key, value;
    ls >> key >> value;
    if (key.empty() || value.empty()) {
      throw ParseError(path + ": malformed manifest line: " + line);
    }
    if (key == "episode") {
      episode = std::stoi(value);
    } else if (key == "sigma") {
      sigma_ = parse_double(value, path);
    } else if (key == "actor") {
      actor_ = load_network_file(dir / value);
      saw[0] = true;
    } else if (key == "critic") {
      critic_ = load_network_file(dir / value);
      saw[1] = true;
    } else if (key == "target_actor") {
      target_actor_ = load_network_file(dir / value);
      saw[2] = true;
    } else if (key == "target_critic") {
      target_critic_ = load_network_file(dir / value);
      saw[3] = true;
    } else if (key == "actor_adam") {
      actor_adam_ = load_adam_file(dir / value);
      saw[4] = true;
    } else if (key == "critic_adam") {
      critic_adam_ = load_adam_file(dir / value);
      saw[5] = true;
    } else {
      throw ParseError(path + ": unknown manifest key: " + key);
    }
  }
  for (bool s : saw) {
    if (!s) throw ParseError(path + ": manifest is missing a section");
  }
  if (actor_.input_dim() != state_dim_ || actor_.output_dim() != action_dim_) {
    throw ShapeError("checkpoint actor does not match the agent dimensions");
  }
  episode_index_ = episode;
  return episode;
}

std::vector<EpisodeLog> train(
    Environment& env, Agent& agent, int episodes, int max_steps,
    std::uint64_t master_seed,
    const std::function<void(const EpisodeLog&)>& on_episode,
    int first_episode) {
  if (episodes < 1) throw ConfigError("episodes must be positive");
  if (max_steps < 1) throw ConfigError("max_steps must be positive");
  if (first_episode < 0 || first_episode >= episodes) {
    throw ConfigError("first_episode must lie in [0, episodes)");
  }
  if (env.state_dim() != agent.state_dim() ||
      env.action_dim() != agent.action_dim()) {
    throw ConfigError("environment and agent dimensions do not match");
  }

  agent.seed_streams(Rng::derive_seed(master_seed, kSeedStreamNoise),
                     Rng::derive_seed(master_seed, kSeedStreamSampler));
  const std::uint64_t env_stream = Rng::derive_seed(master_seed, kSeedStreamEnv);

  std::vector<EpisodeLog> logs;
  logs.reserve(static_cast<std::size_t>(episodes - first_episode));
  for (int ep = first_episode; ep < episodes; ++ep) {
    EnvState st = env.reset(Rng::derive_seed(env_stream, ep));
    agent.begin_episode(ep);

    double cum_reward = 0.0;
    double q_sum = 0.0;
    int q_count = 0;
    Eigen::VectorXd sv = st.vector();
    for (int step = 0; step < max_steps && env.episode_active(); ++step) {
      const Eigen::VectorXd a = agent.select_action(sv, true);
      Transition tr = env.step(a);
      // Only goal termination is a true zero-value terminal. Running out of
      // steps says nothing about s', so the buffered copy is stored as a
      // normal continuing transition: unmasked, and with the state's done
      // flag cleared so the target networks never see inputs that no
      // regression target ever constrains.
      const bool timeout = tr.done && !env.goal_reached();
      Transition buffered = tr;
      if (timeout) {
        buffered.done = false;
        buffered.s_next.done = false;
      }
      agent.buffer().push(buffered);
      cum_reward += tr.r;

      if (agent.buffer().size() >=
          static_cast<std::size_t>(agent.config().warmup)) {
        const Batch batch = agent.sample_batch();
        agent.update_critic(batch);
        q_sum += agent.update_actor(batch);
        agent.soft_update();
        ++q_count;
      }
      sv = tr.s_next.vector();
      if (tr.done) break;
    }

    EpisodeLog log;
    log.episode = ep;
    log.steps = env.steps_taken();
    log.cum_reward = cum_reward;
    log.mean_q = q_count > 0 ? q_sum / q_count : 0.0;
    log.final_error_cm = env.distance_cm();
    log.success = env.goal_reached();
    log.sigma = agent.sigma();
    require_finite(log.cum_reward, "episode reward");
    require_finite(log.mean_q, "episode mean Q");
    require_finite(log.final_error_cm, "episode final error");
    logs.push_back(log);
    if (on_episode) on_episode(log);
  }
  return logs;
}

}  // namespace stableik
