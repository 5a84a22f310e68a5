#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ltlrl/error.hpp"
#include "ltlrl/harness.hpp"

using namespace ltlrl;

namespace {

// Steers to the centre of whichever region moves the automaton one hop closer; stops once
// accepting.
Controller waypoint_controller(const PrunedDra& dra) {
  return [&dra](const Environment& env, const ProductState& s) -> std::size_t {
    if (dra.is_accepting(s.q)) return 0;
    const Region* target = nullptr;
    for (const auto& r : env.regions)
      if (dra.distance(dra.step(s.q, dra.atoms().bit(r.name))) + 1 == dra.distance(s.q)) {
        target = &r;
        break;
      }
    if (!target) return 0;
    const Vec2 d = target->center - s.x.position();
    const double err = wrap_angle(std::atan2(d.y, d.x) - s.x.theta);
    const long k = std::clamp(std::lround(err / 0.364), -5L, 5L) + 5;
    return (std::abs(err) > 0.5 ? 1 : 12) + static_cast<std::size_t>(k);
  };
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Presets, Formulas) {
  ASSERT_EQ(task_presets().size(), 4u);
  EXPECT_EQ(task_preset("case1").formula, "F r1 & F r2 & F r3 & G !obs");
  EXPECT_EQ(task_preset("case1").reference_states, 9u);
  EXPECT_EQ(task_preset("case2").group, EnvGroup::B);
  EXPECT_EQ(task_preset("case3").reference_states, 13u);
  EXPECT_EQ(task_preset("case4").reference_states, 10u);
  EXPECT_THROW(task_preset("case9"), Error);
  for (const auto& p : task_presets()) EXPECT_NO_THROW(compile_task(p));
}

TEST(Presets, TaskFromJson) {
  const Task a = task_from_json(R"({"preset": "case3"})");
  EXPECT_EQ(a.formula_text, task_preset("case3").formula);
  const Task b = task_from_json(R"({"formula": "F r1 & G !obs", "atoms": ["r1", "obs"]})");
  EXPECT_EQ(b.atoms.size(), 2u);
  EXPECT_EQ(region_atoms(b.atoms), std::vector<std::string>{"r1"});
  EXPECT_THROW(task_from_json(R"({"formula": "F r7", "atoms": ["r1"]})"), Error);
}

TEST(Presets, DefaultRegions) {
  const auto r = default_regions({"r2", "r4"});
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].name, "r2");
  EXPECT_DOUBLE_EQ(r[0].center.x, 8.5 * 10 / 12);
  EXPECT_DOUBLE_EQ(r[0].center.y, 3.5 * 10 / 12);
  EXPECT_EQ(r[1].half_width, 0.35);
}

TEST(MovingAverage, ConstantAndPartial) {
  EXPECT_EQ(moving_average(std::vector<double>(250, 3.5), 100), std::vector<double>(250, 3.5));
  EXPECT_EQ(moving_average({1, 2, 3, 4}, 2), (std::vector<double>{1, 1.5, 2.5, 3.5}));
}

TEST(EpisodesToThreshold, Contract) {
  std::vector<double> r(10, 0.0);
  for (std::size_t i = 5; i < 10; ++i) r[i] = 100;
  EXPECT_EQ(episodes_to_threshold(r, 50, 4), 7u);
  EXPECT_EQ(episodes_to_threshold(r, 500, 4), std::nullopt);
  // A full window is required.
  EXPECT_EQ(episodes_to_threshold({100, 100}, 50, 4), std::nullopt);
}

TEST(Efficiency, MedianAndFailures) {
  EXPECT_EQ(median_with_infinity({3u, std::nullopt, 1u}), 3.0);
  EXPECT_EQ(median_with_infinity({std::nullopt, std::nullopt, 1u}), std::nullopt);
  EXPECT_EQ(median_with_infinity({2u, 4u}), 3.0);
  const std::vector<std::vector<double>> logs{std::vector<double>(20, 60.0), std::vector<double>(20, 0.0)};
  const auto c = compare_sample_efficiency(logs, logs, 50, 5);
  EXPECT_EQ(c.ours, c.baseline);
  EXPECT_EQ(c.failures_ours, 1u);
  EXPECT_EQ(c.ours[0], 5u);
  EXPECT_EQ(c.ours[1], std::nullopt);
}

TEST(Evaluate, ScriptedControllerSolvesObstacleFreeCaseOne) {
  const Task task = compile_task(task_preset("case1"));
  Environment env;
  env.id = "open";
  env.regions = default_regions({"r1", "r2", "r3"});
  EvalConfig cfg;
  cfg.n_starts = 40;
  const auto report = evaluate(waypoint_controller(task.dra), task.dra, {env}, cfg);
  EXPECT_EQ(report.runs, 40u);
  ASSERT_TRUE(report.accuracy());
  EXPECT_EQ(*report.accuracy(), 100.0);
}

TEST(Evaluate, RandomPolicyFailsGroupB) {
  const Task task = compile_task(task_preset("case2"));
  std::vector<Environment> envs;
  for (std::uint64_t s = 0; s < 2; ++s)
    envs.push_back(generate_environment(EnvGroup::B, s, default_regions({"r1", "r2", "r3"})));
  Rng rng(1);
  EvalConfig cfg;
  cfg.n_starts = 30;
  const auto report = evaluate(
      [&](const Environment&, const ProductState&) { return static_cast<std::size_t>(uniform_index(rng, kNumActions)); },
      task.dra, envs, cfg);
  EXPECT_EQ(report.runs, 60u);
  EXPECT_LE(*report.accuracy(), 5.0);
}

TEST(Evaluate, NoStartsLeavesAccuracyUndefined) {
  const Task task = compile_task(task_preset("case1"));
  Environment env;
  env.regions = default_regions({"r1", "r2", "r3"});
  EvalConfig cfg;
  cfg.n_starts = 0;
  const auto report = evaluate(waypoint_controller(task.dra), task.dra, {env}, cfg);
  EXPECT_EQ(report.runs, 0u);
  EXPECT_FALSE(report.accuracy());
  EXPECT_NE(report_to_json(report).find("\"accuracy_defined\": false"), std::string::npos);
}

TEST(Evaluate, FixedStartsAcrossCalls) {
  const Task task = compile_task(task_preset("case1"));
  Environment env;
  env.regions = default_regions({"r1", "r2", "r3"});
  EvalConfig cfg;
  cfg.n_starts = 5;
  std::vector<AgentState> first, second;
  cfg.on_trace = [&](std::size_t, std::size_t, const EpisodeTrace& t) { first.push_back(t.steps.front().state.x); };
  evaluate(waypoint_controller(task.dra), task.dra, {env}, cfg);
  cfg.on_trace = [&](std::size_t, std::size_t, const EpisodeTrace& t) { second.push_back(t.steps.front().state.x); };
  evaluate([](const Environment&, const ProductState&) { return std::size_t{0}; }, task.dra, {env}, cfg);
  EXPECT_EQ(first, second);
}

TEST(ExperimentConfig, JsonOverrides) {
  const auto cfg = experiment_from_json(
      R"({"task": "case3", "group": "B", "seeds": [4, 5], "episodes": 12,
          "dataset": {"M": 7}, "bias": {"hidden": [32]}, "train": {"lr": 0.01, "optimizer": "sgd"},
          "eval": {"n_starts": 3}})");
  EXPECT_EQ(cfg.task, "case3");
  EXPECT_EQ(cfg.group, EnvGroup::B);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{4, 5}));
  EXPECT_EQ(cfg.train.episodes, 12u);
  EXPECT_EQ(cfg.dataset.starts_per_env, 7u);
  EXPECT_EQ(cfg.bias.hidden, std::vector<std::size_t>{32});
  EXPECT_EQ(cfg.train.optimizer.kind, OptimizerKind::Sgd);
  EXPECT_EQ(cfg.train.optimizer.learning_rate, 0.01);
  EXPECT_EQ(cfg.eval.n_starts, 3u);
  EXPECT_THROW(experiment_from_json("{"), Error);
  const auto full = experiment_from_json(R"({"desk_scale": false})");
  EXPECT_EQ(full.train.episodes, full_scale_config().train.episodes);
}

TEST(RunExperiment, ArtifactsAndPlots) {
  auto cfg = desk_scale_config();
  cfg.train_envs = 1;
  cfg.test_envs = 1;
  cfg.seeds = {3};
  cfg.dataset.starts_per_env = 3;
  cfg.bias.hidden = {16};
  cfg.bias.epochs = 2;
  cfg.train.episodes = 4;
  cfg.train.horizon = 40;
  cfg.train.hidden = {16};
  cfg.train.checkpoint_every = 2;
  cfg.eval.n_starts = 2;
  cfg.eval.horizon = 40;
  cfg.moving_average_window = 2;
  const auto dir = std::filesystem::temp_directory_path() / "ltlrl_run";
  std::filesystem::remove_all(dir);
  std::vector<std::string> stages;
  run_experiment(cfg, dir, [&](const std::string& m) { stages.push_back(m); });
  for (const char* f : {"returns_ours.csv", "returns_eps.csv", "acc_train.csv", "acc_test.csv", "returns.svg",
                        "acc_train.svg", "acc_test.svg", "automaton.hoa", "dataset.csv", "bias.model"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  const auto returns = slurp(dir / "returns_ours.csv");
  EXPECT_EQ(returns.substr(0, returns.find('\n')), "seed,episode,return,moving_avg");
  EXPECT_EQ(std::count(returns.begin(), returns.end(), '\n'), 5);
  const auto acc = slurp(dir / "acc_test.csv");
  EXPECT_EQ(std::count(acc.begin(), acc.end(), '\n'), 5);
  EXPECT_NE(plot_run(dir).find("<svg"), std::string::npos);
  EXPECT_FALSE(stages.empty());
  std::filesystem::remove_all(dir);
}

TEST(RunExperiment, StageErrorsNameTheStage) {
  auto cfg = desk_scale_config();
  cfg.seeds.clear();
  EXPECT_THROW(run_experiment(cfg, std::filesystem::temp_directory_path() / "ltlrl_bad"), Error);
  cfg.seeds = {1};
  cfg.train_envs = 1;
  cfg.dataset.trials = 0;
  try {
    run_experiment(cfg, std::filesystem::temp_directory_path() / "ltlrl_bad");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("gen-dataset"), std::string::npos);
  }
  std::filesystem::remove_all(std::filesystem::temp_directory_path() / "ltlrl_bad");
}

TEST(ExperimentConfig, ShippedConfigsParse) {
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(LTLRL_SOURCE_DIR "/configs")) {
    const auto cfg = experiment_from_json(slurp(entry.path()));
    EXPECT_NO_THROW(task_preset(cfg.task)) << entry.path();
    ++n;
  }
  EXPECT_EQ(n, 8u);
}
