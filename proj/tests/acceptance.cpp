// Acceptance suite: one PASS/FAIL line per criterion. Arguments select criteria by number;
// no arguments runs all ten. Exit status is non-zero when any selected criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "ltlrl/error.hpp"
#include "ltlrl/harness.hpp"
#include "ltlrl/hoa.hpp"
#include "oracles.hpp"

#ifndef LTLRL_CLI_PATH
#define LTLRL_CLI_PATH "ltlrl"
#endif

using namespace ltlrl;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr std::size_t kRandomWords = 60;
constexpr double kWordSuiteSeconds = 10.0;
constexpr std::size_t kCaseOneInitialDistance = 3;
constexpr std::size_t kOracleTriples = 20;
constexpr double kZeta = 0.1;
constexpr double kGradientRelTol = 1e-4;
constexpr std::size_t kGradientParams = 100;
constexpr double kGradientSeconds = 30.0;
constexpr std::size_t kFrequencyDraws = 100000;
constexpr double kFrequencySigmas = 3.0;
constexpr double kThresholdReturn = 50.0;
constexpr std::size_t kThresholdWindow = 100;
constexpr std::size_t kEfficiencySeeds = 5;
constexpr std::size_t kEfficiencyEpisodes = 600;
constexpr std::size_t kBiasPoints = 1000;
constexpr double kBiasAccuracy = 0.85;
constexpr double kBiasSeconds = 300.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

Outcome automaton_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t words = 0, agree = 0, curated_ok = 0, curated = 0;
  for (const auto& preset : task_presets()) {
    const Task task = compile_task(preset);
    const Dra& dra = task.dra.dra();
    Rng rng(derive_seed(1, {words}));
    for (std::size_t i = 0; i < kRandomWords; ++i) {
      const LassoWord w = oracle::random_word(task.atoms, rng);
      ++words;
      agree += dra.accepts(w) == eval_lasso(task.formula, w, task.atoms);
    }
    const auto cw = oracle::curated_words(preset.name, task.atoms);
    if (cw.size() < 10) return {false, preset.name + " has fewer than 10 curated words"};
    for (const auto& c : cw) {
      ++words;
      ++curated;
      const bool d = dra.accepts(c.word);
      agree += d == eval_lasso(task.formula, c.word, task.atoms);
      curated_ok += d == c.expected;
    }
  }
  const double secs = seconds_since(t0);
  return {agree == words && curated_ok == curated && secs < kWordSuiteSeconds,
          std::to_string(agree) + "/" + std::to_string(words) + " words agree, curated verdicts " +
              std::to_string(curated_ok) + "/" + std::to_string(curated) + ", " + fmt(secs) + " s"};
}

Outcome distance_map() {
  std::size_t states = 0, equal = 0;
  std::uint32_t d0 = 0;
  for (const auto& preset : task_presets()) {
    const Task task = compile_task(preset);
    const auto expect = oracle::distances(task.dra.dra(), task.dra.mutex_groups());
    for (StateId q = 0; q < task.dra.num_states(); ++q) {
      ++states;
      equal += task.dra.distance(q) == expect[q];
    }
    if (preset.name == "case1") d0 = task.dra.distance(task.dra.initial());
  }
  return {equal == states && d0 == kCaseOneInitialDistance,
          std::to_string(equal) + "/" + std::to_string(states) + " states match, case1 d(q0) = " + std::to_string(d0)};
}

Outcome dataset_oracle() {
  const std::uint64_t seed = 2024;
  std::vector<Environment> envs;
  for (std::size_t i = 0; i < 4; ++i)
    envs.push_back(generate_environment(i % 2 ? EnvGroup::B : EnvGroup::A, derive_seed(seed, {i}),
                                        default_regions({"r1", "r2", "r3", "r4"})));
  DatasetParams params;
  params.starts_per_env = 5;
  params.trials = 20;
  params.zeta = kZeta;
  params.seed = seed;
  const BiasDataset ds = build_dataset(envs, params);
  std::vector<oracle::Alg2> oracles;
  for (const auto& e : envs) oracles.emplace_back(e, params.grid_cells);
  Rng pick(seed);
  std::size_t equal = 0;
  for (std::size_t k = 0; k < kOracleTriples; ++k) {
    const auto& pt = ds.points[uniform_index(pick, ds.points.size())];
    const auto& o = oracles[pt.env_index];
    const auto res = o.run(pt.start, o.cell(pt.goal.x, pt.goal.y), params.trials, params.zeta,
                           dataset_trial_rng(params.seed, pt.env_index, pt.start_index));
    equal += res.label == pt.action;
  }
  return {equal == kOracleTriples, std::to_string(equal) + "/" + std::to_string(kOracleTriples) + " labels equal"};
}

Outcome safe_set() {
  struct Fixture {
    std::vector<std::pair<std::size_t, double>> p;
    std::vector<std::size_t> expected;
  };
  const std::vector<Fixture> fixtures{
      {{{1, 1.0}, {2, 0.85}, {3, 0.40}}, {1}},
      {{{1, 1.0}, {2, 0.9}, {3, 0.95}, {4, 0.89}}, {1, 2, 3}},
      {{{0, 0.5}, {5, 0.45}, {9, 0.4}, {22, 0.35}}, {0, 5, 9}},
      {{{7, 0.05}}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22}},
      {{{3, 0.6}, {4, 0.6}, {18, 0.6}}, {3, 4, 18}},
  };
  std::size_t ok = 0;
  for (const auto& f : fixtures) {
    std::array<double, kNumActions> p{};
    for (auto [a, v] : f.p) p[a] = v;
    ok += safe_actions(p, kZeta) == f.expected;
  }
  // Randomized vectors on the Z = 20 lattice against the set definition.
  Rng rng(5);
  std::size_t random_ok = 0;
  const std::size_t n = 2000;
  for (std::size_t t = 0; t < n; ++t) {
    std::array<double, kNumActions> p{};
    for (auto& v : p) v = static_cast<double>(uniform_index(rng, 21)) / 20.0;
    const double pmax = *std::max_element(p.begin(), p.end());
    std::vector<std::size_t> expect;
    for (std::size_t a = 0; a < kNumActions; ++a)
      if (p[a] >= pmax - kZeta) expect.push_back(a);
    random_ok += safe_actions(p, kZeta) == expect;
  }
  return {ok == fixtures.size() && random_ok == n, std::to_string(ok) + "/" + std::to_string(fixtures.size()) +
                                                      " fixtures, " + std::to_string(random_ok) + "/" +
                                                      std::to_string(n) + " lattice vectors"};
}

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(31);
  auto random_batch = [&](std::size_t in, std::size_t out, std::size_t b) {
    Batch batch;
    batch.inputs = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(b),
                                                [&] { return 2 * uniform01(rng) - 1; });
    batch.target = Eigen::VectorXd::NullaryExpr(static_cast<Eigen::Index>(b), [&] { return 4 * uniform01(rng) - 2; });
    for (std::size_t i = 0; i < b; ++i) batch.index.push_back(uniform_index(rng, out));
    return batch;
  };
  double worst_td = 0, worst_ce = 0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const std::size_t in = 4 + uniform_index(rng, 6), h1 = 8 + uniform_index(rng, 16), h2 = 8 + uniform_index(rng, 16),
                      out = 3 + uniform_index(rng, 21);
    Mlp td = Mlp::init({in, h1, h2, out}, Head::Linear, 40 + s);
    Mlp ce = Mlp::init({in, h1, h2, out}, Head::Softmax, 50 + s);
    // Small non-zero biases keep ReLU kinks away from zero pre-activations.
    for (auto* net : {&td, &ce})
      for (auto& l : net->layers()) l.bias = Eigen::VectorXd::NullaryExpr(l.bias.size(), [&] { return 0.1 * uniform01(rng); });
    worst_td = std::max(worst_td, oracle::gradient_check(td, random_batch(in, out, 8), Loss::TdMse, kGradientParams, rng));
    worst_ce = std::max(worst_ce,
                        oracle::gradient_check(ce, random_batch(in, out, 8), Loss::CrossEntropy, kGradientParams, rng));
  }
  const double secs = seconds_since(t0);
  return {worst_td < kGradientRelTol && worst_ce < kGradientRelTol && secs < kGradientSeconds,
          "max rel err td-mse " + fmt(worst_td) + ", cross-entropy " + fmt(worst_ce) + ", " + fmt(secs) + " s"};
}

Outcome policy_accounting() {
  const Task task = compile_task(task_preset("case1"));
  const auto nq = task.dra.num_states();
  const Mlp q = make_q_network(nq, {16}, 1);
  const BiasModel bias(Mlp::init({9, 16, 23}, Head::Softmax, 2));
  const FeatureVector psi{1.2, 0.3, 2.0, -1.0, 4.0, 6.0, 0.5};
  Rng rng(7);
  std::array<double, 3> kinds{};
  for (std::size_t i = 0; i < kFrequencyDraws; ++i)
    ++kinds[static_cast<std::size_t>(sample_action(q, &bias, psi, 0, nq, Vec2{3, 3}, {1.0, 0.5, 0.5}, rng).kind)];
  const double n = kFrequencyDraws;
  const std::array<double, 3> expect{0.0, 0.5, 0.5};
  bool freq_ok = true;
  std::string freq;
  for (std::size_t k = 0; k < 3; ++k) {
    const double sigma = std::sqrt(n * expect[k] * (1 - expect[k]));
    freq_ok &= std::abs(kinds[k] - n * expect[k]) <= kFrequencySigmas * sigma;
    freq += (k ? "/" : "") + fmt(kinds[k] / n, 4);
  }

  // δ_b = 0 against the plain ε-greedy learner, same seed.
  const auto envs = std::vector<Environment>{generate_environment(EnvGroup::A, 11, default_regions({"r1", "r2", "r3"}))};
  TrainConfig cfg;
  cfg.episodes = 20;
  cfg.horizon = 100;
  cfg.batch_size = 32;
  cfg.learning_starts = 32;
  cfg.hidden = {32, 32};
  cfg.optimizer = {OptimizerKind::Adam, 1e-3};
  cfg.schedule.horizon = 20;
  cfg.schedule.delta_b0 = 0.0;
  cfg.seed = 99;
  const auto ours = train(cfg, task.dra, envs, &bias);
  cfg.use_bias = false;
  const auto base = train(cfg, task.dra, envs, nullptr);
  bool same = ours.log.size() == base.log.size() && ours.qnet == base.qnet;
  for (std::size_t k = 0; same && k < ours.log.size(); ++k) {
    const auto &a = ours.log[k], &b = base.log[k];
    same = a.discounted_return == b.discounted_return && a.steps == b.steps && a.greedy == b.greedy &&
           a.random == b.random && a.biased == 0;
  }
  return {freq_ok && same, "greedy/biased/random " + freq + ", delta_b = 0 run " +
                               (same ? "identical to" : "differs from") + " epsilon-greedy over " +
                               std::to_string(ours.log.size()) + " episodes"};
}

Outcome rewards_and_episodes() {
  const RewardConfig r;
  bool ok = r.goal == 100.0 && r.bad == 10.0 && r.other == -0.01 && r.deadlock == -100.0;
  const Task task = compile_task(task_preset("case1"));
  Environment env;
  env.regions = default_regions({"r1", "r2", "r3"});
  env.obstacles = {{{5, 1}, 0.5}, {{9, 9}, 0.5}};
  env.noise.enabled = false;
  const ProductMdp mdp(env, task.dra);
  Rng rng(0);
  const double g = 0.99;
  // Straight at full speed from x = 4.1: three clear steps, collision on the fourth.
  const auto crash = run_episode(mdp, [](const ProductState&) { return std::size_t{17}; }, {4.1, 1, 0}, 500, rng, g);
  ok &= crash.cause == Termination::Deadlock && crash.steps.size() == 4 && crash.steps.back().terminal &&
        crash.steps.back().reward == -100.0;
  ok &= crash.discounted_return == -0.01 * (1 + g + g * g) - 100 * g * g * g;
  const auto idle = run_episode(mdp, [](const ProductState&) { return std::size_t{0}; }, {2, 6, 0}, 500, rng, g);
  double expect = 0, w = 1;
  for (int t = 0; t < 500; ++t, w *= g) expect += w * -0.01;
  ok &= idle.cause == Termination::Horizon && idle.steps.size() == 500 && idle.discounted_return == expect;
  ok &= discounted_return({10, 100}, 0.5) == 60.0;
  // Reward class for every automaton state.
  for (StateId q = 0; q < task.dra.num_states(); ++q) {
    const double v = reward_of(task.dra, q);
    const double want = task.dra.is_accepting(q)             ? 100.0
                        : task.dra.is_deadlock(q)            ? -100.0
                        : task.dra.dra().in_bad(q)           ? 10.0
                                                             : -0.01;
    ok &= v == want;
  }
  return {ok, "crash after " + std::to_string(crash.steps.size()) + " steps, G = " + fmt(crash.discounted_return, 10) +
                  "; idle run capped at " + std::to_string(idle.steps.size()) + " steps"};
}

Outcome sample_efficiency() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = desk_scale_config();
  cfg.task = "case1";
  cfg.seeds = {1};
  const PreparedExperiment prep = prepare_experiment(cfg);
  DatasetParams dp = cfg.dataset;
  dp.seed = derive_seed(1, {0x6473});
  const BiasDataset ds = build_dataset(prep.train_envs, dp);
  BiasTrainingConfig bc = cfg.bias;
  bc.seed = derive_seed(1, {0x6273});
  BiasTrainingReport report;
  const BiasModel bias = train_bias_model(ds, bc, &report);
  std::cerr << "  bias model: " << ds.points.size() << " points, train accuracy " << fmt(report.train_accuracy)
            << ", " << fmt(seconds_since(t0)) << " s\n";

  std::vector<std::vector<double>> ours, base;
  for (std::uint64_t seed = 1; seed <= kEfficiencySeeds; ++seed) {
    for (bool use_bias : {true, false}) {
      TrainConfig tc = cfg.train;
      tc.episodes = kEfficiencyEpisodes;
      tc.seed = seed;
      tc.use_bias = use_bias;
      tc.stop_threshold = kThresholdReturn;
      tc.stop_window = kThresholdWindow;
      tc.checkpoint_every = 0;
      const auto res = train(tc, prep.task.dra, prep.train_envs, use_bias ? &bias : nullptr);
      std::vector<double> returns;
      for (const auto& e : res.log) returns.push_back(e.discounted_return);
      const auto hit = episodes_to_threshold(returns, kThresholdReturn, kThresholdWindow);
      std::cerr << "  seed " << seed << (use_bias ? " ours" : " eps ") << ": "
                << (hit ? std::to_string(*hit) : std::string("never")) << " (" << fmt(seconds_since(t0), 4) << " s)\n";
      (use_bias ? ours : base).push_back(std::move(returns));
    }
  }
  const auto c = compare_sample_efficiency(ours, base, kThresholdReturn, kThresholdWindow);
  auto med = [](const std::optional<double>& m) { return m ? fmt(*m, 6) : std::string("inf"); };
  const bool lower = c.median_ours && (!c.median_baseline || *c.median_ours < *c.median_baseline);
  return {lower && c.failures_baseline >= c.failures_ours,
          "median episodes ours " + med(c.median_ours) + " vs epsilon-greedy " + med(c.median_baseline) +
              ", failures " + std::to_string(c.failures_ours) + " vs " + std::to_string(c.failures_baseline) +
              ", " + fmt(seconds_since(t0) / 60, 3) + " min"};
}

Outcome bias_trainability() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = desk_scale_config();
  cfg.seeds = {3};
  const auto prep = prepare_experiment(cfg);
  DatasetParams dp = cfg.dataset;
  dp.starts_per_env = 10;
  dp.seed = 3;
  BiasDataset ds = build_dataset(prep.train_envs, dp);
  Rng rng(4);
  std::shuffle(ds.points.begin(), ds.points.end(), rng);
  ds.points.resize(kBiasPoints);
  BiasTrainingConfig bc;
  bc.hidden = {512, 256};
  bc.epochs = 50;
  bc.learning_rate = 1e-3;
  bc.batch_size = 32;
  bc.seed = 5;
  BiasTrainingReport report;
  train_bias_model(ds, bc, &report);
  const double secs = seconds_since(t0);
  return {report.train_accuracy >= kBiasAccuracy && secs < kBiasSeconds,
          "training accuracy " + fmt(100 * report.train_accuracy) + "% after " + std::to_string(bc.epochs) +
              " epochs, " + fmt(secs) + " s"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "ltlrl_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream cfg(root / "exp.json");
    cfg << R"({"task": "case1", "desk_scale": true, "episodes": 30, "train_envs": 1, "test_envs": 1,
  "dataset": {"M": 5}, "bias": {"hidden": [32], "epochs": 3},
  "train": {"hidden": [32, 32], "horizon": 100, "checkpoint_every": 10, "schedule_horizon": 20},
  "eval": {"n_starts": 4, "horizon": 100}})";
  }
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string("\"") + LTLRL_CLI_PATH + "\" run --config \"" + (root / "exp.json").string() +
                            "\" --seed 17 --out \"" + (root / run).string() + "\" > \"" +
                            (root / (std::string(run) + ".log")).string() + "\" 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, "CLI run failed: " + cmd};
  }
  std::size_t files = 0, equal = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    if (entry.path().extension() != ".csv") continue;
    ++files;
    const fs::path other = root / "b" / entry.path().filename();
    equal += fs::exists(other) && slurp(entry.path()) == slurp(other);
  }
  fs::remove_all(root);
  return {files == 6 && equal == files,
          std::to_string(equal) + "/" + std::to_string(files) + " CSV files bit-identical across two CLI runs"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"automaton correctness", automaton_correctness},
      {"distance map", distance_map},
      {"dataset oracle equivalence", dataset_oracle},
      {"safe-set semantics", safe_set},
      {"gradient correctness", gradients},
      {"policy probability accounting", policy_accounting},
      {"reward constants and episodes", rewards_and_episodes},
      {"sample efficiency (desk scale)", sample_efficiency},
      {"bias-model trainability", bias_trainability},
      {"end-to-end determinism", determinism},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoul(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && !selected.count(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
