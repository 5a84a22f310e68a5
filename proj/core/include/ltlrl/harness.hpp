#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ltlrl/automaton.hpp"
#include "ltlrl/bias.hpp"
#include "ltlrl/learner.hpp"
#include "ltlrl/ltl.hpp"
#include "ltlrl/world.hpp"

namespace ltlrl {

struct TaskPreset {
  std::string name;
  std::string formula;
  std::vector<std::string> atoms;
  EnvGroup group = EnvGroup::A;
  // State and pair counts reported for the reference translator.
  std::size_t reference_states = 0;
  std::size_t reference_pairs = 1;
};

const std::vector<TaskPreset>& task_presets();
const TaskPreset& task_preset(std::string_view name);

// Regions r1..r4 centred in grid cells (3,3), (8,3), (3,8), (8,8) of a 12 × 12 grid on a
// 10 m workspace, half-width 0.35 m. Only the requested names are returned.
std::vector<Region> default_regions(const std::vector<std::string>& names, double width = 10.0, double height = 10.0,
                                    int grid_cells = 12);

struct Task {
  std::string formula_text;
  AtomTable atoms;
  Formula formula;
  PrunedDra dra;
};

Task compile_task(std::string_view formula, const std::vector<std::string>& atoms,
                  const std::optional<MutexGroups>& groups = std::nullopt);
Task compile_task(const TaskPreset& preset);
// {"formula": ..., "atoms": [...], "mutex_groups": [[...]]} or {"preset": "case1"}.
Task task_from_json(std::string_view text);

// Region names of a task: every atom except the obstacle atom.
std::vector<std::string> region_atoms(const AtomTable& atoms);

struct EvalConfig {
  std::size_t n_starts = 120;
  std::size_t horizon = 500;
  std::uint64_t seed = 0x6576616c;
  // Called with every finished rollout (environment index, start index, trace).
  std::function<void(std::size_t, std::size_t, const EpisodeTrace&)> on_trace;
};

struct EnvEval {
  std::string env_id;
  std::size_t successes = 0;
  std::size_t runs = 0;
};

struct EvalReport {
  std::vector<EnvEval> per_env;
  std::size_t successes = 0;
  std::size_t runs = 0;
  std::uint64_t seed = 0;
  std::string checkpoint;

  // Percentage of successful runs; empty when nothing was run.
  std::optional<double> accuracy() const;
};

using Controller = std::function<std::size_t(const Environment& env, const ProductState& s)>;

// Greedy rollouts from n_starts fixed initial states per environment.
EvalReport evaluate(const Controller& controller, const PrunedDra& dra, const std::vector<Environment>& envs,
                    const EvalConfig& cfg = {});
EvalReport evaluate(const TrainedPolicy& policy, const std::vector<Environment>& envs, const EvalConfig& cfg = {});

std::string report_to_json(const EvalReport& report);

// Trailing mean; the first window-1 entries average what is available.
std::vector<double> moving_average(const std::vector<double>& xs, std::size_t window);

// Number of episodes after which the mean of the last `window` returns first reaches the
// threshold; empty when it never does.
std::optional<std::size_t> episodes_to_threshold(const std::vector<double>& returns, double threshold,
                                                 std::size_t window = 100);

struct EfficiencyComparison {
  std::vector<std::optional<std::size_t>> ours;
  std::vector<std::optional<std::size_t>> baseline;
  std::optional<double> median_ours;  // empty means ∞
  std::optional<double> median_baseline;
  std::size_t failures_ours = 0;
  std::size_t failures_baseline = 0;
};

// Median treating "never reached" as +∞.
std::optional<double> median_with_infinity(std::vector<std::optional<std::size_t>> values);

EfficiencyComparison compare_sample_efficiency(const std::vector<std::vector<double>>& ours,
                                               const std::vector<std::vector<double>>& baseline, double threshold,
                                               std::size_t window = 100);

struct ExperimentConfig {
  std::string task = "case1";
  std::optional<EnvGroup> group;  // defaults to the preset's group
  std::vector<std::uint64_t> seeds{0};
  std::size_t train_envs = 2;
  std::size_t test_envs = 2;
  DatasetParams dataset;
  BiasTrainingConfig bias;
  TrainConfig train;
  EvalConfig eval;
  std::size_t moving_average_window = 100;
};

ExperimentConfig desk_scale_config();
ExperimentConfig full_scale_config();
// Starts from the desk or full defaults ("desk_scale") and applies the given overrides.
ExperimentConfig experiment_from_json(std::string_view text);

struct PreparedExperiment {
  TaskPreset preset;
  Task task;
  std::vector<Environment> train_envs;
  std::vector<Environment> test_envs;
};

// Environments are derived from the first seed.
PreparedExperiment prepare_experiment(const ExperimentConfig& cfg);

struct MethodRun {
  std::uint64_t seed = 0;
  std::vector<EpisodeLog> log;
  std::vector<std::pair<std::size_t, double>> acc_train;  // (episode, accuracy %)
  std::vector<std::pair<std::size_t, double>> acc_test;
};

// `dataset` feeds the replay bootstrap when cfg.train.bootstrap_replay is set.
MethodRun run_method(const ExperimentConfig& cfg, const PreparedExperiment& prep, const BiasModel* bias,
                     std::uint64_t seed, const BiasDataset* dataset = nullptr);

using StageLog = std::function<void(const std::string& message)>;

// gen-env → compile-automaton → gen-dataset → train-bias → train (ours, ε-greedy) → evaluate.
// Throws Error prefixed with the failing stage.
void run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, const StageLog& log = {});

// Combined three-panel SVG from the CSVs of a run directory.
std::string plot_run(const std::filesystem::path& run_dir);

}  // namespace ltlrl
