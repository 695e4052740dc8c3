#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "stableik/errors.hpp"
#include "stableik/harness.hpp"
#include "stableik/stability.hpp"

using namespace stableik;

namespace {

const std::string kDeskModel =
    std::string(STABLEIK_REPO_DIR) + "/models/desk_reacher.model";
const std::string kHumanoidModel =
    std::string(STABLEIK_REPO_DIR) + "/models/reference_humanoid.model";

std::string fresh_dir(const std::string& name) {
  const auto dir =
      std::filesystem::temp_directory_path() / "stableik_harness_test" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header_skipped = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_skipped) {
      header_skipped = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string token;
    while (std::getline(ss, token, ',')) fields.push_back(token);
    rows.push_back(fields);
  }
  return rows;
}

ExperimentConfig smoke_config(const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.model_path = kDeskModel;
  cfg.out_dir = out_dir;
  cfg.episodes = 10;
  cfg.max_steps = 20;
  cfg.seed = 42;
  cfg.checkpoint_interval = 1000;
  cfg.eval_samples_per_seed = 5;
  cfg.eval_seeds = 2;
  cfg.compare_pairs = 3;
  cfg.env.action_bound = 0.1;
  cfg.env.collision_radius = 0.0;
  cfg.env.collision_clearance = 0.0;
  cfg.agent.hidden = {16, 12};
  cfg.agent.batch_size = 16;
  cfg.agent.warmup = 32;
  cfg.ik.position_tolerance = 0.02;
  cfg.ik.max_iterations = 200;
  return cfg;
}

std::vector<TrajectoryRow> constant_trajectory(const RobotModel& model,
                                               const Eigen::VectorXd& q,
                                               int steps) {
  std::vector<TrajectoryRow> rows;
  const Eigen::Vector3d ee = forward_kinematics(model, q, "hand").position;
  for (int t = 0; t < steps; ++t) {
    TrajectoryRow row;
    row.step = t;
    row.q = q;
    row.ee = ee;
    row.goal = ee;
    row.reward = 0.0;
    row.stable = true;
    row.done = t + 1 == steps;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("experiment config round trips through its canonical text") {
  const std::string dir = fresh_dir("config_roundtrip");
  ExperimentConfig cfg = smoke_config(dir);
  cfg.agent.hidden = {64, 48, 32};
  cfg.ik.method = IkMethod::kTranspose;
  cfg.env.end_effector = "hand";

  const std::string path = dir + "/experiment.cfg";
  save_experiment_config(path, cfg);
  const ExperimentConfig loaded = load_experiment_config(path);

  CHECK(canonical_config_text(loaded) == canonical_config_text(cfg));
  CHECK(config_hash(loaded) == config_hash(cfg));
  CHECK(loaded.agent.hidden == cfg.agent.hidden);
  CHECK(loaded.ik.method == IkMethod::kTranspose);
  CHECK(loaded.env.max_steps == cfg.max_steps);

  ExperimentConfig other = cfg;
  other.seed = 43;
  CHECK(config_hash(other) != config_hash(cfg));
}

TEST_CASE("config parsing reports the offending line") {
  const std::string dir = fresh_dir("config_errors");
  const auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir + "/" + name);
    out << body;
    out.close();
    return dir + "/" + name;
  };

  const std::string unknown =
      write("unknown.cfg", "episodes = 5\n# fine\nturbo = 9\n");
  try {
    load_experiment_config(unknown);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
    CHECK(std::string(e.what()).find("turbo") != std::string::npos);
  }

  CHECK_THROWS_AS(
      load_experiment_config(write("dup.cfg", "seed = 1\nseed = 2\n")),
      ParseError);
  CHECK_THROWS_AS(
      load_experiment_config(write("envsteps.cfg", "env.max_steps = 5\n")),
      ParseError);
  CHECK_THROWS_AS(
      load_experiment_config(write("badnum.cfg", "episodes = ten\n")),
      ParseError);
  CHECK_THROWS_AS(
      load_experiment_config(write("badmethod.cfg", "ik.method = newton\n")),
      ParseError);
  CHECK_THROWS_AS(load_experiment_config(dir + "/missing.cfg"), IoError);
}

TEST_CASE("baseline solver settings follow the environment unless overridden") {
  const std::string dir = fresh_dir("config_defaults");
  {
    std::ofstream out(dir + "/a.cfg");
    out << "env.end_effector = tip\nenv.margin_threshold = 0.02\n";
  }
  const ExperimentConfig a = load_experiment_config(dir + "/a.cfg");
  CHECK(a.ik.end_effector == "tip");
  CHECK(a.ik.margin_threshold == 0.02);

  {
    std::ofstream out(dir + "/b.cfg");
    out << "env.end_effector = tip\nik.end_effector = other\n";
  }
  const ExperimentConfig b = load_experiment_config(dir + "/b.cfg");
  CHECK(b.ik.end_effector == "other");
}

TEST_CASE("experiment config validation") {
  ExperimentConfig cfg = smoke_config("unused");
  CHECK_NOTHROW(cfg.validate());
  cfg.eval_seeds = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = smoke_config("unused");
  cfg.model_path.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = smoke_config("unused");
  cfg.checkpoint_interval = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = smoke_config("unused");
  cfg.episodes = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("trajectory files round trip bitwise") {
  const std::string dir = fresh_dir("trajectory_roundtrip");
  const RobotModel model = load_robot_model(kDeskModel);

  std::vector<TrajectoryRow> rows;
  Rng rng(9);
  Eigen::VectorXd q(3);
  for (int t = 0; t < 6; ++t) {
    for (int j = 0; j < 3; ++j) q[j] = rng.uniform(-2.5, 2.5);
    TrajectoryRow row;
    row.step = t;
    row.q = q;
    row.ee = forward_kinematics(model, q, "hand").position;
    row.goal = Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0);
    row.reward = rng.uniform(-20, 50);
    row.stable = t % 2 == 0;
    row.done = t == 5;
    rows.push_back(row);
  }

  const std::string path = dir + "/episode.csv";
  write_trajectory_csv(path, rows, "deadbeefdeadbeef");
  const std::vector<TrajectoryRow> back = read_trajectory_csv(path);

  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].step == rows[i].step);
    CHECK((back[i].q - rows[i].q).norm() == 0.0);
    CHECK((back[i].ee - rows[i].ee).norm() == 0.0);
    CHECK((back[i].goal - rows[i].goal).norm() == 0.0);
    CHECK(back[i].reward == rows[i].reward);
    CHECK(back[i].stable == rows[i].stable);
    CHECK(back[i].done == rows[i].done);
  }

  // The hash comment is the first line.
  CHECK(slurp(path).rfind("# config_hash deadbeefdeadbeef", 0) == 0);
}

TEST_CASE("trajectory parsing reports the offending line") {
  const std::string dir = fresh_dir("trajectory_errors");
  const auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir + "/" + name);
    out << body;
    return dir + "/" + name;
  };

  const std::string header =
      "step,q0,q1,q2,ee_x,ee_y,ee_z,goal_x,goal_y,goal_z,reward,stable,done\n";
  const std::string good = "0,0,0,0,0.7,0,0,0.5,0,0,-1,1,0\n";

  try {
    read_trajectory_csv(write("short.csv", header + good + "1,0,0\n"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }

  CHECK_THROWS_AS(read_trajectory_csv(write("noheader.csv", good)), ParseError);
  CHECK_THROWS_AS(read_trajectory_csv(write("empty.csv", header)), ParseError);
  CHECK_THROWS_AS(
      read_trajectory_csv(write("badfield.csv", header + "0,x,0,0,0.7,0,0,0.5,0,0,-1,1,0\n")),
      ParseError);
  CHECK_THROWS_AS(read_trajectory_csv(dir + "/missing.csv"), IoError);
}

TEST_CASE("training smoke run writes artifacts and is byte deterministic") {
  const std::string dir = fresh_dir("train_smoke");
  const ExperimentConfig cfg = smoke_config(dir);

  const TrainResult first = cmd_train(cfg);
  CHECK(first.logs.size() == 10);
  REQUIRE(first.checkpoints.size() == 1);  // interval 1000 -> final only
  CHECK(std::filesystem::exists(first.checkpoints[0]));
  CHECK(std::filesystem::exists(dir + "/config.txt"));

  const auto rows = csv_rows(first.training_csv);
  REQUIRE(rows.size() == 10);
  for (int i = 0; i < 10; ++i) {
    CHECK(rows[static_cast<std::size_t>(i)][0] == std::to_string(i));
    CHECK(rows[static_cast<std::size_t>(i)].size() == 7);
  }
  CHECK(slurp(first.training_csv).rfind("# config_hash " + config_hash(cfg), 0) == 0);

  for (const char* curve : {"curve_q.csv", "curve_reward.csv", "curve_error.csv"}) {
    const auto curve_rows = csv_rows(dir + "/" + curve);
    REQUIRE(curve_rows.size() == 10);
    for (const auto& r : curve_rows) {
      const double v = std::stod(r[1]);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }

  const std::string bytes_first = slurp(first.training_csv);
  const TrainResult second = cmd_train(cfg);
  CHECK(slurp(second.training_csv) == bytes_first);
}

TEST_CASE("training resumes from a checkpoint") {
  const std::string dir = fresh_dir("train_resume");
  ExperimentConfig cfg = smoke_config(dir);
  cfg.episodes = 6;
  cfg.checkpoint_interval = 3;

  const TrainResult head = cmd_train(cfg);
  REQUIRE(head.checkpoints.size() == 2);  // episodes 3 and 6
  CHECK(head.logs.size() == 6);

  cfg.episodes = 10;
  const TrainResult tail = cmd_train(cfg, head.checkpoints.back());
  CHECK(tail.logs.size() == 4);
  CHECK(tail.logs.front().episode == 6);
  REQUIRE(tail.checkpoints.size() == 2);  // episode 9 plus the final at 10

  const auto rows = csv_rows(tail.training_csv);
  REQUIRE(rows.size() == 10);
  for (int i = 0; i < 10; ++i) {
    CHECK(rows[static_cast<std::size_t>(i)][0] == std::to_string(i));
  }

  ExperimentConfig done = cfg;
  CHECK_THROWS_AS(cmd_train(done, tail.checkpoints.back()), ConfigError);
}

TEST_CASE("evaluation aggregates its per-episode file deterministically") {
  const std::string dir = fresh_dir("eval_smoke");
  const ExperimentConfig cfg = smoke_config(dir);
  const TrainResult trained = cmd_train(cfg);

  const AccuracyReport report = cmd_eval(trained.checkpoints.back(), cfg);
  CHECK(report.episode == 10);
  REQUIRE(report.per_seed.size() == 2);
  CHECK(report.min <= report.mean);
  CHECK(report.mean <= report.max);
  CHECK(report.min >= 0.0);
  CHECK(report.max <= 1.0);

  const auto rows = csv_rows(dir + "/eval.csv");
  REQUIRE(rows.size() == 10);  // 2 seeds x 5 episodes

  // Every report number must be recomputable from the file.
  for (int k = 0; k < 2; ++k) {
    int successes = 0;
    int count = 0;
    long stable = 0;
    long verified = 0;
    for (const auto& r : rows) {
      if (r[0] != std::to_string(k)) continue;
      ++count;
      successes += r[4] == "1" ? 1 : 0;
      stable += std::stol(r[5]);
      verified += std::stol(r[6]);
    }
    CHECK(count == 5);
    CHECK(report.per_seed[static_cast<std::size_t>(k)] ==
          doctest::Approx(successes / 5.0).epsilon(1e-15));
    // The environment's stability labels re-verify against the stability
    // module exactly.
    CHECK(stable == verified);
  }
  CHECK(report.verified_stable_steps == report.stable_steps);

  const std::string bytes = slurp(dir + "/eval.csv");
  cmd_eval(trained.checkpoints.back(), cfg);
  CHECK(slurp(dir + "/eval.csv") == bytes);

  // Each seed's first episode is exported and can be replayed as-is.
  for (int k = 0; k < 2; ++k) {
    const std::string traj =
        dir + "/trajectory_seed" + std::to_string(k) + ".csv";
    REQUIRE(std::filesystem::exists(traj));
    const ReplayResult replay = cmd_replay(traj, cfg);
    CHECK(replay.rows.size() == read_trajectory_csv(traj).size());
  }
}

TEST_CASE("comparison runs all three solvers on shared start goal pairs") {
  const std::string dir = fresh_dir("compare_smoke");
  ExperimentConfig cfg = smoke_config(dir);
  cfg.max_steps = 30;
  const TrainResult trained = cmd_train(cfg);

  const std::vector<ComparePair> pairs = sample_compare_pairs(cfg, 3);
  REQUIRE(pairs.size() == 3);
  CHECK((pairs[0].q_start - pairs[1].q_start).norm() > 0.0);

  const CompareResult result =
      cmd_compare(trained.checkpoints.back(), cfg, pairs);
  REQUIRE(result.rows.size() == 3);
  CHECK(csv_rows(result.csv_path).size() == 3);

  const RobotModel model = load_robot_model(cfg.model_path);
  const SupportPolygon polygon = support_polygon(model);
  for (const CompareRow& row : result.rows) {
    CHECK(row.learned_steps <= cfg.max_steps);
    CHECK(row.learned_violations >= 0);
    CHECK(row.unfiltered_iterations <= cfg.ik.max_iterations);
    if (row.filtered_converged) {
      // The filtered baseline promises stability along the whole path.
      CHECK(row.filtered_violations == 0);
    }
  }

  // Start configurations are valid by construction.
  Environment env(model, cfg.env);
  for (const ComparePair& pair : pairs) {
    CHECK(env.stable(pair.q_start));
    CHECK(env.collision_free(pair.q_start));
  }
}

TEST_CASE("replay of a stationary trajectory pins the quasi-static point") {
  const std::string dir = fresh_dir("replay_stationary");
  ExperimentConfig cfg = smoke_config(dir);
  const RobotModel model = load_robot_model(kDeskModel);

  Eigen::VectorXd q(3);
  q << 2.0, 1.0, 0.5;  // folded posture, CoM well inside the pads
  Environment env(model, cfg.env);
  REQUIRE(env.stable(q));

  const std::string traj_path = dir + "/stationary.csv";
  write_trajectory_csv(traj_path, constant_trajectory(model, q, 8),
                       config_hash(cfg));

  const ReplayResult replay = cmd_replay(traj_path, cfg);
  REQUIRE(replay.rows.size() == 8);
  CHECK(std::filesystem::exists(replay.csv_path));

  const Eigen::Vector3d com = center_of_mass(model, q);
  for (const ZmpTraceRow& row : replay.rows) {
    // Zero momentum reduces the ZMP to the CoM ground projection exactly,
    // for the finite-difference interior steps as well as the ends.
    CHECK(row.px == com.x());
    CHECK(row.py == com.y());
    CHECK(row.com_x == com.x());
    CHECK(row.com_y == com.y());
    CHECK(row.stable);
    CHECK(row.margin == replay.min_margin);
  }
  CHECK(replay.min_margin > 0.0);
}

TEST_CASE("replay flags a trajectory that leaves the support polygon") {
  const std::string dir = fresh_dir("replay_unstable");
  ExperimentConfig cfg = smoke_config(dir);
  const RobotModel model = load_robot_model(kDeskModel);

  // Fully stretched along +x: the CoM sits past the pad edge at x = 0.30.
  Eigen::VectorXd q = Eigen::VectorXd::Zero(3);
  const std::string traj_path = dir + "/stretched.csv";
  write_trajectory_csv(traj_path, constant_trajectory(model, q, 5),
                       config_hash(cfg));

  const ReplayResult replay = cmd_replay(traj_path, cfg);
  CHECK(replay.min_margin < 0.0);
  for (const ZmpTraceRow& row : replay.rows) CHECK_FALSE(row.stable);
}

TEST_CASE("replay round trips an exported episode") {
  const std::string dir = fresh_dir("replay_episode");
  ExperimentConfig cfg = smoke_config(dir);
  const RobotModel model = load_robot_model(kDeskModel);
  Environment env(model, cfg.env);

  env.reset(11);
  Rng rng(12);
  for (int t = 0; t < 10 && env.episode_active(); ++t) {
    Eigen::VectorXd a(3);
    for (int j = 0; j < 3; ++j) a[j] = rng.uniform(-0.1, 0.1);
    env.step(a);
  }
  const std::string traj_path = dir + "/episode.csv";
  write_trajectory_csv(traj_path, env.trajectory(), config_hash(cfg));

  const ReplayResult replay = cmd_replay(traj_path, cfg);
  REQUIRE(replay.rows.size() == env.trajectory().size());
  for (std::size_t i = 0; i < replay.rows.size(); ++i) {
    CHECK(replay.rows[i].step == env.trajectory()[i].step);
    CHECK(std::isfinite(replay.rows[i].margin));
  }
  // The environment's own stability labels agree with the quasi-static
  // boundary rows of the trace.
  CHECK(replay.rows.front().stable == env.trajectory().front().stable);
}

TEST_CASE("replay rejects a trajectory that does not fit the model") {
  const std::string dir = fresh_dir("replay_mismatch");
  ExperimentConfig cfg = smoke_config(dir);
  cfg.model_path = kHumanoidModel;  // 16 joints, trajectory has 3

  const RobotModel desk = load_robot_model(kDeskModel);
  Eigen::VectorXd q(3);
  q << 2.0, 1.0, 0.5;
  const std::string traj_path = dir + "/desk.csv";
  write_trajectory_csv(traj_path, constant_trajectory(desk, q, 4), "0");

  CHECK_THROWS_AS(cmd_replay(traj_path, cfg), ConfigError);
}

TEST_CASE("desk reacher model matches its declared geometry") {
  const RobotModel model = load_robot_model(kDeskModel);
  CHECK(model.num_joints() == 3);
  CHECK(model.num_actuated() == 3);
  CHECK(model.total_mass() == doctest::Approx(1.0).epsilon(1e-15));

  const Eigen::VectorXd q = Eigen::VectorXd::Zero(3);
  const Eigen::Vector3d hand = forward_kinematics(model, q, "hand").position;
  CHECK((hand - Eigen::Vector3d(0.7, 0.0, 0.0)).norm() < 1e-12);
  const Eigen::Vector3d com = center_of_mass(model, q);
  CHECK(com.x() == doctest::Approx(0.3275).epsilon(1e-12));
  CHECK(com.y() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("reference humanoid matches its declared geometry") {
  const RobotModel model = load_robot_model(kHumanoidModel);
  CHECK(model.num_joints() == 16);
  CHECK(model.num_actuated() == 13);
  CHECK(model.total_mass() == doctest::Approx(4.91).epsilon(1e-12));

  const Eigen::VectorXd q = Eigen::VectorXd::Zero(16);
  const Eigen::Vector3d hand = forward_kinematics(model, q, "hand").position;
  CHECK((hand - Eigen::Vector3d(0.0, -0.05, 0.39)).norm() < 1e-9);
  const Eigen::Vector3d left = forward_kinematics(model, q, "left_hand").position;
  CHECK((left - Eigen::Vector3d(0.0, 0.17, 0.39)).norm() < 1e-9);

  const Eigen::Vector3d com = center_of_mass(model, q);
  CHECK(std::abs(com.x()) < 1e-12);
  CHECK(com.y() == doctest::Approx(0.06).epsilon(1e-9));

  // Home posture stands 7.5 cm from the nearest support edge.
  const SupportPolygon polygon = support_polygon(model);
  const Eigen::Vector2d p =
      zmp(com, model.total_mass(), model.gravity, MomentumState{});
  CHECK(polygon_margin(p, polygon) == doctest::Approx(0.075).epsilon(1e-9));

  EnvConfig env_cfg;
  env_cfg.collision_radius = 0.025;
  env_cfg.collision_clearance = 0.005;
  Environment env(model, env_cfg);
  CHECK(env.state_dim() == 20);
  CHECK(env.action_dim() == 13);
  CHECK(env.collision_free(q));
  CHECK(env.stable(q));
  CHECK_NOTHROW(env.reset(3));

  // A healthy share of uniformly drawn postures is usable, so episode
  // resets stay cheap and the stability penalty still has teeth.
  Rng rng(42);
  int stable_count = 0;
  int valid_count = 0;
  const int n = 500;
  Eigen::VectorXd qs = Eigen::VectorXd::Zero(16);
  for (int i = 0; i < n; ++i) {
    for (int idx : model.actuated_indices()) {
      qs[idx] = rng.uniform(model.joints[static_cast<std::size_t>(idx)].lower,
                            model.joints[static_cast<std::size_t>(idx)].upper);
    }
    const bool s = env.stable(qs);
    stable_count += s ? 1 : 0;
    valid_count += (s && env.collision_free(qs)) ? 1 : 0;
  }
  CHECK(stable_count > n / 2);
  CHECK(stable_count < n);  // instability is reachable
  CHECK(valid_count > n / 5);
}
