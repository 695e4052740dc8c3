#include "stableik/harness.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string_view>

#include "stableik/errors.hpp"
#include "stableik/stability.hpp"
#include "stableik/text_format.hpp"

namespace stableik {

namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

long parse_long(const std::string& text, const std::string& context) {
  long value = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(context + ": invalid integer '" + text + "'");
  }
  return value;
}

int parse_int(const std::string& text, const std::string& context) {
  const long v = parse_long(text, context);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ParseError(context + ": integer out of range '" + text + "'");
  }
  return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& text, const std::string& context) {
  std::uint64_t value = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(context + ": invalid unsigned integer '" + text + "'");
  }
  return value;
}

std::vector<int> parse_int_list(const std::string& text,
                                const std::string& context) {
  std::vector<int> out;
  std::string token;
  std::stringstream ss(text);
  while (std::getline(ss, token, ',')) {
    out.push_back(parse_int(trim(token), context));
  }
  if (out.empty()) throw ParseError(context + ": expected a comma-separated list");
  return out;
}

std::string join_ints(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::string method_name(IkMethod method) {
  switch (method) {
    case IkMethod::kPseudoInverse: return "pinv";
    case IkMethod::kTranspose: return "transpose";
    case IkMethod::kDls: return "dls";
  }
  throw ConfigError("unknown ik method value");
}

IkMethod parse_method(const std::string& text, const std::string& context) {
  if (text == "pinv") return IkMethod::kPseudoInverse;
  if (text == "transpose") return IkMethod::kTranspose;
  if (text == "dls") return IkMethod::kDls;
  throw ParseError(context + ": unknown ik method '" + text +
                   "' (expected pinv, transpose, or dls)");
}

std::ofstream open_out(const std::string& path, bool append = false) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

/// Quasi-static stability check straight against the stability module,
/// bypassing the environment: the re-verification side of every
/// violation count and accuracy report.
bool recheck_stable(const RobotModel& model, const SupportPolygon& polygon,
                    const Eigen::VectorXd& q_full, double threshold) {
  const Eigen::Vector3d com = center_of_mass(model, q_full);
  const Eigen::Vector2d p =
      zmp(com, model.total_mass(), model.gravity, MomentumState{});
  return polygon_margin(p, polygon) >= threshold;
}

int count_violations(const RobotModel& model, const SupportPolygon& polygon,
                     const std::vector<Eigen::VectorXd>& waypoints,
                     double threshold) {
  int violations = 0;
  for (const auto& q : waypoints) {
    if (!recheck_stable(model, polygon, q, threshold)) ++violations;
  }
  return violations;
}

Environment make_environment(const ExperimentConfig& cfg) {
  RobotModel model = load_robot_model(cfg.model_path);
  EnvConfig env_cfg = cfg.env;
  env_cfg.max_steps = cfg.max_steps;
  return Environment(std::move(model), env_cfg);
}

Agent make_agent(const Environment& env, const ExperimentConfig& cfg) {
  return Agent(env.state_dim(), env.action_dim(), env.config().action_bound,
               cfg.agent, Rng::derive_seed(cfg.seed, kSeedStreamInit));
}

void write_hash_comment(std::ofstream& out, const std::string& hash) {
  out << "# config_hash " << hash << "\n";
}

std::string training_row(const EpisodeLog& log) {
  std::string row = std::to_string(log.episode);
  row += ',' + std::to_string(log.steps);
  row += ',' + format_double(log.cum_reward);
  row += ',' + format_double(log.mean_q);
  row += ',' + format_double(log.final_error_cm);
  row += ',' + std::string(log.success ? "1" : "0");
  row += ',' + format_double(log.sigma);
  return row;
}

/// Reads the raw training CSV back (comments skipped, header required).
/// Normalized curves are computed from the file rather than from memory so
/// a resumed run's curves cover the whole history.
std::vector<EpisodeLog> read_training_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open training CSV: " + path);
  std::vector<EpisodeLog> logs;
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const std::string ctx = path + ":" + std::to_string(line_no);
    if (!saw_header) {
      if (text !=
          "episode,steps,cum_reward,mean_q,final_error_cm,success,sigma") {
        throw ParseError(ctx + ": unexpected training CSV header");
      }
      saw_header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) f.push_back(token);
    if (f.size() != 7) throw ParseError(ctx + ": expected 7 fields");
    EpisodeLog log;
    log.episode = parse_int(f[0], ctx);
    log.steps = parse_int(f[1], ctx);
    log.cum_reward = parse_double(f[2], ctx);
    log.mean_q = parse_double(f[3], ctx);
    log.final_error_cm = parse_double(f[4], ctx);
    log.success = parse_int(f[5], ctx) != 0;
    log.sigma = parse_double(f[6], ctx);
    logs.push_back(log);
  }
  if (!saw_header) throw ParseError(path + ": missing training CSV header");
  return logs;
}

void write_curve(const std::string& path, const std::string& hash,
                 const std::vector<EpisodeLog>& logs,
                 double (*value)(const EpisodeLog&)) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& log : logs) {
    lo = std::min(lo, value(log));
    hi = std::max(hi, value(log));
  }
  const double range = hi - lo;
  std::ofstream out = open_out(path);
  write_hash_comment(out, hash);
  out << "episode,value\n";
  for (const auto& log : logs) {
    const double v = range > 0.0 ? (value(log) - lo) / range : 0.0;
    out << log.episode << ',' << format_double(v) << "\n";
  }
}

std::string checkpoint_path(const ExperimentConfig& cfg, int episodes_done) {
  return (std::filesystem::path(cfg.out_dir) /
          ("checkpoint_ep" + std::to_string(episodes_done) + ".ckpt"))
      .string();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (model_path.empty()) throw ConfigError("model path must be set");
  if (out_dir.empty()) throw ConfigError("out_dir must be set");
  if (episodes < 1) throw ConfigError("episodes must be positive");
  if (max_steps < 1) throw ConfigError("max_steps must be positive");
  if (checkpoint_interval < 1) {
    throw ConfigError("checkpoint_interval must be positive");
  }
  if (eval_samples_per_seed < 1 || eval_seeds < 1) {
    throw ConfigError("eval counts must be at least 1");
  }
  if (compare_pairs < 1) throw ConfigError("compare.pairs must be positive");
  if (ik_max_restarts < 0) throw ConfigError("ik.max_restarts must be >= 0");
  env.validate();
  agent.validate();
  ik.validate();
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);

  ExperimentConfig cfg;
  bool saw_ik_end_effector = false;
  bool saw_ik_margin = false;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const std::string ctx = path + ":" + std::to_string(line_no);

    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError(ctx + ": expected key = value");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty()) throw ParseError(ctx + ": empty key");
    if (!seen.insert(key).second) throw ParseError(ctx + ": duplicate key '" + key + "'");

    if (key == "model") cfg.model_path = value;
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "episodes") cfg.episodes = parse_int(value, ctx);
    else if (key == "max_steps") cfg.max_steps = parse_int(value, ctx);
    else if (key == "seed") cfg.seed = parse_u64(value, ctx);
    else if (key == "checkpoint_interval") cfg.checkpoint_interval = parse_int(value, ctx);
    else if (key == "eval.samples_per_seed") cfg.eval_samples_per_seed = parse_int(value, ctx);
    else if (key == "eval.seeds") cfg.eval_seeds = parse_int(value, ctx);
    else if (key == "compare.pairs") cfg.compare_pairs = parse_int(value, ctx);
    else if (key == "env.alpha") cfg.env.alpha = parse_double(value, ctx);
    else if (key == "env.beta") cfg.env.beta = parse_double(value, ctx);
    else if (key == "env.kappa") cfg.env.kappa = parse_double(value, ctx);
    else if (key == "env.lambda") cfg.env.lambda = parse_double(value, ctx);
    else if (key == "env.action_bound") cfg.env.action_bound = parse_double(value, ctx);
    else if (key == "env.goal_tolerance") cfg.env.goal_tolerance = parse_double(value, ctx);
    else if (key == "env.margin_threshold") cfg.env.margin_threshold = parse_double(value, ctx);
    else if (key == "env.collision_clearance") cfg.env.collision_clearance = parse_double(value, ctx);
    else if (key == "env.collision_radius") cfg.env.collision_radius = parse_double(value, ctx);
    else if (key == "env.distance_scale") cfg.env.distance_scale = parse_double(value, ctx);
    else if (key == "env.step_dt") cfg.env.step_dt = parse_double(value, ctx);
    else if (key == "env.reset_max_attempts") cfg.env.reset_max_attempts = parse_int(value, ctx);
    else if (key == "env.end_effector") cfg.env.end_effector = value;
    else if (key == "env.max_steps") {
      throw ParseError(ctx + ": env.max_steps is set from the top-level max_steps key");
    }
    else if (key == "agent.gamma") cfg.agent.gamma = parse_double(value, ctx);
    else if (key == "agent.tau") cfg.agent.tau = parse_double(value, ctx);
    else if (key == "agent.batch_size") cfg.agent.batch_size = parse_int(value, ctx);
    else if (key == "agent.warmup") cfg.agent.warmup = parse_int(value, ctx);
    else if (key == "agent.noise_sigma0_scale") cfg.agent.noise_sigma0_scale = parse_double(value, ctx);
    else if (key == "agent.noise_decay") cfg.agent.noise_decay = parse_double(value, ctx);
    else if (key == "agent.noise_floor_scale") cfg.agent.noise_floor_scale = parse_double(value, ctx);
    else if (key == "agent.actor_lr") cfg.agent.actor_lr = parse_double(value, ctx);
    else if (key == "agent.critic_lr") cfg.agent.critic_lr = parse_double(value, ctx);
    else if (key == "agent.critic_weight_decay") cfg.agent.critic_weight_decay = parse_double(value, ctx);
    else if (key == "agent.buffer_capacity") {
      const long v = parse_long(value, ctx);
      if (v < 1) throw ParseError(ctx + ": buffer capacity must be positive");
      cfg.agent.buffer_capacity = static_cast<std::size_t>(v);
    }
    else if (key == "agent.hidden") cfg.agent.hidden = parse_int_list(value, ctx);
    else if (key == "ik.method") cfg.ik.method = parse_method(value, ctx);
    else if (key == "ik.lambda") cfg.ik.lambda = parse_double(value, ctx);
    else if (key == "ik.step_gain") cfg.ik.step_gain = parse_double(value, ctx);
    else if (key == "ik.max_iterations") cfg.ik.max_iterations = parse_int(value, ctx);
    else if (key == "ik.position_tolerance") cfg.ik.position_tolerance = parse_double(value, ctx);
    else if (key == "ik.end_effector") { cfg.ik.end_effector = value; saw_ik_end_effector = true; }
    else if (key == "ik.margin_threshold") { cfg.ik.margin_threshold = parse_double(value, ctx); saw_ik_margin = true; }
    else if (key == "ik.seed") cfg.ik.seed = parse_u64(value, ctx);
    else if (key == "ik.max_restarts") cfg.ik_max_restarts = parse_int(value, ctx);
    else throw ParseError(ctx + ": unknown key '" + key + "'");
  }

  // The baselines target the same end effector and stability margin as the
  // environment unless the config says otherwise.
  if (!saw_ik_end_effector) cfg.ik.end_effector = cfg.env.end_effector;
  if (!saw_ik_margin) cfg.ik.margin_threshold = cfg.env.margin_threshold;
  cfg.env.max_steps = cfg.max_steps;
  return cfg;
}

std::string canonical_config_text(const ExperimentConfig& cfg) {
  std::string t;
  const auto kv = [&t](const std::string& key, const std::string& value) {
    t += key + " = " + value + "\n";
  };
  kv("model", cfg.model_path);
  kv("out_dir", cfg.out_dir);
  kv("episodes", std::to_string(cfg.episodes));
  kv("max_steps", std::to_string(cfg.max_steps));
  kv("seed", std::to_string(cfg.seed));
  kv("checkpoint_interval", std::to_string(cfg.checkpoint_interval));
  kv("eval.samples_per_seed", std::to_string(cfg.eval_samples_per_seed));
  kv("eval.seeds", std::to_string(cfg.eval_seeds));
  kv("compare.pairs", std::to_string(cfg.compare_pairs));
  kv("env.alpha", format_double(cfg.env.alpha));
  kv("env.beta", format_double(cfg.env.beta));
  kv("env.kappa", format_double(cfg.env.kappa));
  kv("env.lambda", format_double(cfg.env.lambda));
  kv("env.action_bound", format_double(cfg.env.action_bound));
  kv("env.goal_tolerance", format_double(cfg.env.goal_tolerance));
  kv("env.margin_threshold", format_double(cfg.env.margin_threshold));
  kv("env.collision_clearance", format_double(cfg.env.collision_clearance));
  kv("env.collision_radius", format_double(cfg.env.collision_radius));
  kv("env.distance_scale", format_double(cfg.env.distance_scale));
  kv("env.step_dt", format_double(cfg.env.step_dt));
  kv("env.reset_max_attempts", std::to_string(cfg.env.reset_max_attempts));
  kv("env.end_effector", cfg.env.end_effector);
  kv("agent.gamma", format_double(cfg.agent.gamma));
  kv("agent.tau", format_double(cfg.agent.tau));
  kv("agent.batch_size", std::to_string(cfg.agent.batch_size));
  kv("agent.warmup", std::to_string(cfg.agent.warmup));
  kv("agent.noise_sigma0_scale", format_double(cfg.agent.noise_sigma0_scale));
  kv("agent.noise_decay", format_double(cfg.agent.noise_decay));
  kv("agent.noise_floor_scale", format_double(cfg.agent.noise_floor_scale));
  kv("agent.actor_lr", format_double(cfg.agent.actor_lr));
  kv("agent.critic_lr", format_double(cfg.agent.critic_lr));
  kv("agent.critic_weight_decay", format_double(cfg.agent.critic_weight_decay));
  kv("agent.buffer_capacity", std::to_string(cfg.agent.buffer_capacity));
  kv("agent.hidden", join_ints(cfg.agent.hidden));
  kv("ik.method", method_name(cfg.ik.method));
  kv("ik.lambda", format_double(cfg.ik.lambda));
  kv("ik.step_gain", format_double(cfg.ik.step_gain));
  kv("ik.max_iterations", std::to_string(cfg.ik.max_iterations));
  kv("ik.position_tolerance", format_double(cfg.ik.position_tolerance));
  kv("ik.end_effector", cfg.ik.end_effector);
  kv("ik.margin_threshold", format_double(cfg.ik.margin_threshold));
  kv("ik.seed", std::to_string(cfg.ik.seed));
  kv("ik.max_restarts", std::to_string(cfg.ik_max_restarts));
  return t;
}

void save_experiment_config(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream out = open_out(path);
  out << canonical_config_text(cfg);
  if (!out) throw IoError("write failed: " + path);
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = canonical_config_text(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::string hex(16, '0');
  for (int i = 15; i >= 0; --i) {
    hex[static_cast<std::size_t>(i)] = "0123456789abcdef"[h & 0xf];
    h >>= 4;
  }
  return hex;
}

void write_trajectory_csv(const std::string& path,
                          const std::vector<TrajectoryRow>& rows,
                          const std::string& hash) {
  std::ofstream out = open_out(path);
  write_hash_comment(out, hash);
  const int n = rows.empty() ? 0 : static_cast<int>(rows.front().q.size());
  out << "step";
  for (int j = 0; j < n; ++j) out << ",q" << j;
  out << ",ee_x,ee_y,ee_z,goal_x,goal_y,goal_z,reward,stable,done\n";
  for (const auto& row : rows) {
    if (row.q.size() != n) {
      throw ShapeError("trajectory rows disagree on joint count");
    }
    out << row.step;
    for (int j = 0; j < n; ++j) out << ',' << format_double(row.q[j]);
    for (int j = 0; j < 3; ++j) out << ',' << format_double(row.ee[j]);
    for (int j = 0; j < 3; ++j) out << ',' << format_double(row.goal[j]);
    out << ',' << format_double(row.reward);
    out << ',' << (row.stable ? 1 : 0);
    out << ',' << (row.done ? 1 : 0);
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<TrajectoryRow> read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory file: " + path);

  std::vector<TrajectoryRow> rows;
  std::string line;
  int line_no = 0;
  int n_joints = -1;
  std::size_t n_fields = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const std::string ctx = path + ":" + std::to_string(line_no);

    std::vector<std::string> f;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) f.push_back(token);

    if (n_joints < 0) {
      // Header: step, q0..q{n-1}, ee/goal coordinates, reward, stable, done.
      if (f.size() < 10 || f[0] != "step") {
        throw ParseError(ctx + ": expected trajectory header starting with 'step'");
      }
      std::size_t i = 1;
      while (i < f.size() && f[i] == "q" + std::to_string(i - 1)) ++i;
      n_joints = static_cast<int>(i - 1);
      const char* tail[] = {"ee_x", "ee_y", "ee_z", "goal_x", "goal_y",
                            "goal_z", "reward", "stable", "done"};
      if (f.size() != i + 9) {
        throw ParseError(ctx + ": malformed trajectory header");
      }
      for (std::size_t k = 0; k < 9; ++k) {
        if (f[i + k] != tail[k]) {
          throw ParseError(ctx + ": unexpected column '" + f[i + k] + "'");
        }
      }
      n_fields = f.size();
      continue;
    }

    if (f.size() != n_fields) {
      throw ParseError(ctx + ": expected " + std::to_string(n_fields) +
                       " fields, got " + std::to_string(f.size()));
    }
    TrajectoryRow row;
    row.step = parse_int(f[0], ctx);
    row.q.resize(n_joints);
    for (int j = 0; j < n_joints; ++j) {
      row.q[j] = parse_double(f[static_cast<std::size_t>(1 + j)], ctx);
    }
    const std::size_t base = static_cast<std::size_t>(1 + n_joints);
    for (int j = 0; j < 3; ++j) {
      row.ee[j] = parse_double(f[base + static_cast<std::size_t>(j)], ctx);
      row.goal[j] = parse_double(f[base + 3 + static_cast<std::size_t>(j)], ctx);
    }
    row.reward = parse_double(f[base + 6], ctx);
    row.stable = parse_int(f[base + 7], ctx) != 0;
    row.done = parse_int(f[base + 8], ctx) != 0;
    rows.push_back(row);
  }
  if (n_joints < 0) throw ParseError(path + ": missing trajectory header");
  if (rows.empty()) throw ParseError(path + ": no trajectory rows");
  return rows;
}

TrainResult cmd_train(const ExperimentConfig& cfg,
                      const std::string& resume_checkpoint) {
  cfg.validate();
  Environment env = make_environment(cfg);
  Agent agent = make_agent(env, cfg);

  int first_episode = 0;
  if (!resume_checkpoint.empty()) {
    first_episode = agent.load_checkpoint(resume_checkpoint);
    if (first_episode >= cfg.episodes) {
      throw ConfigError("checkpoint already covers all configured episodes");
    }
  }

  std::filesystem::create_directories(cfg.out_dir);
  const std::string hash = config_hash(cfg);
  save_experiment_config(
      (std::filesystem::path(cfg.out_dir) / "config.txt").string(), cfg);

  TrainResult result;
  result.training_csv =
      (std::filesystem::path(cfg.out_dir) / "training.csv").string();
  const bool append =
      first_episode > 0 && std::filesystem::exists(result.training_csv);
  std::ofstream csv = open_out(result.training_csv, append);
  if (!append) {
    write_hash_comment(csv, hash);
    csv << "episode,steps,cum_reward,mean_q,final_error_cm,success,sigma\n";
  }

  const auto on_episode = [&](const EpisodeLog& log) {
    csv << training_row(log) << "\n";
    csv.flush();
    if ((log.episode + 1) % cfg.checkpoint_interval == 0) {
      const std::string path = checkpoint_path(cfg, log.episode + 1);
      agent.save_checkpoint(path, log.episode + 1);
      result.checkpoints.push_back(path);
    }
  };

  result.logs = train(env, agent, cfg.episodes, cfg.max_steps, cfg.seed,
                      on_episode, first_episode);
  csv.close();

  if (cfg.episodes % cfg.checkpoint_interval != 0) {
    const std::string path = checkpoint_path(cfg, cfg.episodes);
    agent.save_checkpoint(path, cfg.episodes);
    result.checkpoints.push_back(path);
  }

  const std::vector<EpisodeLog> history = read_training_csv(result.training_csv);
  const auto out = [&cfg](const char* name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
  };
  write_curve(out("curve_q.csv"), hash, history,
              [](const EpisodeLog& l) { return l.mean_q; });
  write_curve(out("curve_reward.csv"), hash, history,
              [](const EpisodeLog& l) { return l.cum_reward; });
  write_curve(out("curve_error.csv"), hash, history,
              [](const EpisodeLog& l) { return l.final_error_cm; });
  return result;
}

AccuracyReport cmd_eval(const std::string& checkpoint,
                        const ExperimentConfig& cfg) {
  cfg.validate();
  Environment env = make_environment(cfg);
  Agent agent = make_agent(env, cfg);

  AccuracyReport report;
  report.episode = agent.load_checkpoint(checkpoint);

  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream csv =
      open_out((std::filesystem::path(cfg.out_dir) / "eval.csv").string());
  write_hash_comment(csv, config_hash(cfg));
  csv << "seed_index,episode,steps,final_error_cm,success,stable_steps,"
         "verified_stable_steps\n";

  const SupportPolygon polygon = support_polygon(env.model());
  const std::uint64_t eval_stream = Rng::derive_seed(cfg.seed, kSeedStreamEval);
  for (int k = 0; k < cfg.eval_seeds; ++k) {
    const std::uint64_t seed_k = Rng::derive_seed(eval_stream,
                                                  static_cast<std::uint64_t>(k));
    int successes = 0;
    for (int e = 0; e < cfg.eval_samples_per_seed; ++e) {
      env.reset(Rng::derive_seed(seed_k, static_cast<std::uint64_t>(e)));
      while (env.episode_active()) {
        const Eigen::VectorXd a =
            agent.select_action(env.state().vector(), false);
        env.step(a);
      }
      const bool success = env.goal_reached();
      if (success) ++successes;

      if (e == 0) {
        const std::string traj_path =
            (std::filesystem::path(cfg.out_dir) /
             ("trajectory_seed" + std::to_string(k) + ".csv"))
                .string();
        write_trajectory_csv(traj_path, env.trajectory(), config_hash(cfg));
      }

      long stable_steps = 0;
      long verified = 0;
      for (const TrajectoryRow& row : env.trajectory()) {
        if (!row.stable) continue;
        ++stable_steps;
        if (recheck_stable(env.model(), polygon, row.q,
                           cfg.env.margin_threshold)) {
          ++verified;
        }
      }
      report.stable_steps += stable_steps;
      report.verified_stable_steps += verified;

      csv << k << ',' << e << ',' << env.steps_taken() << ','
          << format_double(env.distance_cm()) << ',' << (success ? 1 : 0)
          << ',' << stable_steps << ',' << verified << "\n";
    }
    report.per_seed.push_back(static_cast<double>(successes) /
                              cfg.eval_samples_per_seed);
  }

  report.min = *std::min_element(report.per_seed.begin(), report.per_seed.end());
  report.max = *std::max_element(report.per_seed.begin(), report.per_seed.end());
  double sum = 0.0;
  for (double v : report.per_seed) sum += v;
  report.mean = sum / static_cast<double>(report.per_seed.size());
  return report;
}

std::vector<ComparePair> sample_compare_pairs(const ExperimentConfig& cfg,
                                              int count) {
  if (count < 1) throw ConfigError("pair count must be positive");
  Environment env = make_environment(cfg);
  Rng rng(Rng::derive_seed(cfg.seed, kSeedStreamPairs));
  std::vector<ComparePair> pairs;
  pairs.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    ComparePair pair;
    pair.q_start = env.sample_valid_config(rng);
    const Eigen::VectorXd q_goal = env.sample_valid_config(rng);
    pair.goal =
        forward_kinematics(env.model(), q_goal, cfg.env.end_effector).position;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

CompareResult cmd_compare(const std::string& checkpoint,
                          const ExperimentConfig& cfg,
                          const std::vector<ComparePair>& pairs) {
  cfg.validate();
  if (pairs.empty()) throw ConfigError("no comparison pairs");
  Environment env = make_environment(cfg);
  Agent agent = make_agent(env, cfg);
  agent.load_checkpoint(checkpoint);

  std::filesystem::create_directories(cfg.out_dir);
  CompareResult result;
  result.csv_path =
      (std::filesystem::path(cfg.out_dir) / "compare.csv").string();
  std::ofstream csv = open_out(result.csv_path);
  write_hash_comment(csv, config_hash(cfg));
  csv << "pair,learned_success,learned_steps,learned_violations,"
         "filtered_converged,filtered_iterations,filtered_restarts,"
         "filtered_violations,unfiltered_converged,unfiltered_iterations,"
         "unfiltered_violations\n";

  const RobotModel& model = env.model();
  const SupportPolygon polygon = support_polygon(model);
  const double threshold = cfg.env.margin_threshold;

  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CompareRow row;
    row.pair = static_cast<int>(i);

    env.reset_to(pairs[i].q_start, pairs[i].goal);
    while (env.episode_active()) {
      const Eigen::VectorXd a = agent.select_action(env.state().vector(), false);
      env.step(a);
    }
    row.learned_success = env.goal_reached();
    row.learned_steps = env.steps_taken();
    std::vector<Eigen::VectorXd> visited;
    for (const TrajectoryRow& r : env.trajectory()) visited.push_back(r.q);
    row.learned_violations = count_violations(model, polygon, visited, threshold);

    IkSolverConfig ik_cfg = cfg.ik;
    ik_cfg.seed = Rng::derive_seed(cfg.ik.seed, i);
    const IkResult filtered = solve_ik_stability_filtered(
        model, pairs[i].q_start, pairs[i].goal, ik_cfg, cfg.ik_max_restarts);
    row.filtered_converged = filtered.converged && filtered.stable;
    row.filtered_iterations = filtered.iterations;
    row.filtered_restarts = filtered.restarts;
    row.filtered_violations =
        count_violations(model, polygon, filtered.trajectory, threshold);

    const IkResult plain =
        solve_ik(model, pairs[i].q_start, pairs[i].goal, ik_cfg);
    row.unfiltered_converged = plain.converged;
    row.unfiltered_iterations = plain.iterations;
    row.unfiltered_violations =
        count_violations(model, polygon, plain.trajectory, threshold);

    csv << row.pair << ',' << (row.learned_success ? 1 : 0) << ','
        << row.learned_steps << ',' << row.learned_violations << ','
        << (row.filtered_converged ? 1 : 0) << ',' << row.filtered_iterations
        << ',' << row.filtered_restarts << ',' << row.filtered_violations
        << ',' << (row.unfiltered_converged ? 1 : 0) << ','
        << row.unfiltered_iterations << ',' << row.unfiltered_violations
        << "\n";
    result.rows.push_back(row);
  }
  return result;
}

CompareResult cmd_compare(const std::string& checkpoint,
                          const ExperimentConfig& cfg) {
  return cmd_compare(checkpoint, cfg,
                     sample_compare_pairs(cfg, cfg.compare_pairs));
}

ReplayResult cmd_replay(const std::string& trajectory_path,
                        const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<TrajectoryRow> rows = read_trajectory_csv(trajectory_path);
  const RobotModel model = load_robot_model(cfg.model_path);
  if (rows.front().q.size() != model.num_joints()) {
    throw ConfigError("trajectory has " + std::to_string(rows.front().q.size()) +
                      " joint columns but the model has " +
                      std::to_string(model.num_joints()) + " joints");
  }

  const int n = static_cast<int>(rows.size());
  const double dt = cfg.env.step_dt;
  const double mass = model.total_mass();
  const SupportPolygon polygon = support_polygon(model);

  std::vector<Eigen::Vector3d> com(static_cast<std::size_t>(n));
  std::vector<std::vector<Eigen::Vector3d>> links(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    com[static_cast<std::size_t>(t)] = center_of_mass(model, rows[static_cast<std::size_t>(t)].q);
    links[static_cast<std::size_t>(t)] =
        link_com_positions(model, rows[static_cast<std::size_t>(t)].q);
  }

  // Angular momentum about the base needs link velocities, so it exists only
  // where a central difference fits; its own derivative shrinks the window
  // once more. Outside [2, n-3] the robot is treated as quasi-static.
  std::vector<Eigen::Vector3d> angular(static_cast<std::size_t>(n),
                                       Eigen::Vector3d::Zero());
  for (int t = 1; t + 1 < n; ++t) {
    Eigen::Vector3d L = Eigen::Vector3d::Zero();
    for (int j = 0; j < model.num_joints(); ++j) {
      const Eigen::Vector3d v =
          (links[static_cast<std::size_t>(t + 1)][static_cast<std::size_t>(j)] -
           links[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(j)]) /
          (2.0 * dt);
      L += model.joints[static_cast<std::size_t>(j)].mass *
           links[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)].cross(v);
    }
    angular[static_cast<std::size_t>(t)] = L;
  }

  ReplayResult result;
  result.min_margin = std::numeric_limits<double>::infinity();
  for (int t = 0; t < n; ++t) {
    MomentumState momentum;  // zero rates outside the full stencil
    if (t >= 2 && t + 2 < n) {
      momentum = momentum_derivatives(
          {com[static_cast<std::size_t>(t - 1)], com[static_cast<std::size_t>(t)],
           com[static_cast<std::size_t>(t + 1)]},
          {angular[static_cast<std::size_t>(t - 1)],
           angular[static_cast<std::size_t>(t)],
           angular[static_cast<std::size_t>(t + 1)]},
          dt, mass);
    }
    const Eigen::Vector2d p =
        zmp(com[static_cast<std::size_t>(t)], mass, model.gravity, momentum);
    ZmpTraceRow trace;
    trace.step = rows[static_cast<std::size_t>(t)].step;
    trace.px = p.x();
    trace.py = p.y();
    trace.com_x = com[static_cast<std::size_t>(t)].x();
    trace.com_y = com[static_cast<std::size_t>(t)].y();
    trace.margin = polygon_margin(p, polygon);
    trace.stable = trace.margin >= cfg.env.margin_threshold;
    if (trace.margin < result.min_margin) {
      result.min_margin = trace.margin;
      result.min_margin_step = trace.step;
    }
    result.rows.push_back(trace);
  }

  std::filesystem::create_directories(cfg.out_dir);
  const std::string stem = std::filesystem::path(trajectory_path).stem().string();
  result.csv_path =
      (std::filesystem::path(cfg.out_dir) / (stem + "_zmp.csv")).string();
  std::ofstream csv = open_out(result.csv_path);
  write_hash_comment(csv, config_hash(cfg));
  csv << "step,px,py,com_x,com_y,stable,margin\n";
  for (const auto& trace : result.rows) {
    csv << trace.step << ',' << format_double(trace.px) << ','
        << format_double(trace.py) << ',' << format_double(trace.com_x) << ','
        << format_double(trace.com_y) << ',' << (trace.stable ? 1 : 0) << ','
        << format_double(trace.margin) << "\n";
  }
  if (!csv) throw IoError("write failed: " + result.csv_path);
  return result;
}

}  // namespace stableik
