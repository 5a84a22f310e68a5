#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "ltlrl/error.hpp"
#include "ltlrl/harness.hpp"
#include "ltlrl/learner.hpp"

using namespace ltlrl;

namespace {

struct World {
  Task task = compile_task(task_preset("case1"));
  std::vector<Environment> envs{generate_environment(EnvGroup::A, 4, default_regions({"r1", "r2", "r3"}))};
  BiasModel bias{Mlp::init({9, 16, 23}, Head::Softmax, 1)};
};

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.episodes = 6;
  cfg.horizon = 60;
  cfg.batch_size = 16;
  cfg.learning_starts = 16;
  cfg.hidden = {16, 16};
  cfg.optimizer = {OptimizerKind::Adam, 1e-3};
  cfg.schedule.horizon = 4;
  cfg.seed = 9;
  return cfg;
}

}  // namespace

TEST(Schedule, Values) {
  const ExplorationSchedule sch;
  auto v = schedule_at(sch, 0);
  EXPECT_EQ(v.epsilon, 1.0);
  EXPECT_EQ(v.delta_b, 0.5);
  EXPECT_EQ(v.delta_e, 0.5);
  v = schedule_at(sch, 200000);
  EXPECT_EQ(v.delta_b, 0.0);
  EXPECT_DOUBLE_EQ(v.delta_e, 0.1);
  EXPECT_DOUBLE_EQ(v.epsilon, 0.1);
  for (std::size_t k : {250000u, 300000u}) {
    v = schedule_at(sch, k);
    EXPECT_EQ(v.epsilon, 0.0);
    EXPECT_EQ(v.delta_b, 0.0);
    EXPECT_EQ(v.delta_e, 0.0);
  }
}

TEST(SampleAction, ZeroEpsilonIsGreedy) {
  const World s;
  const Mlp q = make_q_network(s.task.dra.num_states(), {8}, 3);
  const FeatureVector psi{1, 0.2, 2, -0.3, 4, 5, 0.1};
  Rng rng(1);
  const auto expected = greedy_action(q, q_input(psi, 0, s.task.dra.num_states()));
  for (int i = 0; i < 1000; ++i) {
    const auto c = sample_action(q, &s.bias, psi, 0, s.task.dra.num_states(), Vec2{3, 3}, {}, rng);
    EXPECT_EQ(c.kind, ActionKind::Greedy);
    EXPECT_EQ(c.action, expected);
  }
}

TEST(SampleAction, UniformWhenFullyRandom) {
  const World s;
  const Mlp q = make_q_network(s.task.dra.num_states(), {8}, 3);
  const FeatureVector psi{1, 0.2, 2, -0.3, 4, 5, 0.1};
  Rng rng(2);
  const int n = 100000;
  std::array<int, kNumActions> counts{};
  for (int i = 0; i < n; ++i)
    ++counts[sample_action(q, &s.bias, psi, 0, s.task.dra.num_states(), Vec2{3, 3}, {1.0, 0.0, 1.0}, rng).action];
  const double p = 1.0 / kNumActions, sigma = std::sqrt(n * p * (1 - p));
  for (int c : counts) EXPECT_LT(std::abs(c - n * p), 3 * sigma);
}

TEST(SampleAction, KindFrequencies) {
  const World s;
  const Mlp q = make_q_network(s.task.dra.num_states(), {8}, 3);
  const FeatureVector psi{1, 0.2, 2, -0.3, 4, 5, 0.1};
  Rng rng(3);
  const int n = 100000;
  std::array<int, 3> kinds{};
  for (int i = 0; i < n; ++i)
    ++kinds[static_cast<int>(
        sample_action(q, &s.bias, psi, 0, s.task.dra.num_states(), Vec2{3, 3}, {1.0, 0.5, 0.5}, rng).kind)];
  const double sigma = std::sqrt(n * 0.25);
  EXPECT_EQ(kinds[0], 0);
  EXPECT_LT(std::abs(kinds[1] - n / 2.0), 3 * sigma);
  EXPECT_LT(std::abs(kinds[2] - n / 2.0), 3 * sigma);
  // Without a goal the biased mass goes to random.
  for (int i = 0; i < 1000; ++i)
    EXPECT_NE(sample_action(q, &s.bias, psi, 0, s.task.dra.num_states(), std::nullopt, {1.0, 0.5, 0.5}, rng).kind,
              ActionKind::Biased);
}

TEST(SampleAction, NoBiasMatchesEpsilonGreedy) {
  const World s;
  const auto nq = s.task.dra.num_states();
  const Mlp q = make_q_network(nq, {8}, 3);
  const FeatureVector psi{1, 0.2, 2, -0.3, 4, 5, 0.1};
  Rng a(4), b(4);
  for (int i = 0; i < 5000; ++i) {
    const auto x = sample_action(q, &s.bias, psi, 1, nq, Vec2{3, 3}, {0.3, 0.0, 0.3}, a);
    const auto y = epsilon_greedy_action(q, q_input(psi, 1, nq), 0.3, b);
    EXPECT_EQ(x.action, y.action);
    EXPECT_EQ(x.kind, y.kind);
  }
}

TEST(GreedyAction, MatchesScanAndTieBreak) {
  const Mlp zero({9, 4, 23}, Head::Linear);
  EXPECT_EQ(greedy_action(zero, Eigen::VectorXd(Eigen::VectorXd::Ones(9))), 0u);
  const Mlp q = make_q_network(3, {16}, 5);
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    FeatureVector psi;
    for (auto& v : psi) v = 10 * uniform01(rng);
    const auto in = q_input(psi, i % 3, 3);
    const auto out = q.forward(in);
    std::size_t best = 0;
    for (std::size_t a = 1; a < kNumActions; ++a)
      if (out(a) > out(best)) best = a;
    EXPECT_EQ(greedy_action(q, in), best);
  }
}

TEST(QInput, OneHot) {
  const FeatureVector psi{1, 2, 3, 4, 5, 6, 7};
  const auto v = q_input(psi, 2, 4);
  ASSERT_EQ(v.size(), 11);
  EXPECT_EQ(v(6), 7.0);
  EXPECT_EQ(v.tail(4), Eigen::Vector4d(0, 0, 1, 0));
}

TEST(Replay, RingBufferAndDistinctSamples) {
  ReplayMemory m(5);
  for (int i = 0; i < 8; ++i) {
    ReplayItem it;
    it.reward = i;
    m.push(it);
  }
  EXPECT_EQ(m.size(), 5u);
  std::multiset<double> rewards;
  for (std::size_t i = 0; i < m.size(); ++i) rewards.insert(m[i].reward);
  EXPECT_EQ(rewards, (std::multiset<double>{3, 4, 5, 6, 7}));
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto idx = m.sample_indices(4, rng);
    EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 4u);
    for (auto i : idx) EXPECT_LT(i, 5u);
  }
  EXPECT_THROW(m.sample_indices(6, rng), Error);
  EXPECT_THROW(ReplayMemory(0), Error);
}

TEST(TdBatch, Targets) {
  const Mlp q = make_q_network(2, {8}, 2);
  ReplayMemory m(4);
  ReplayItem a;
  a.psi = {1, 0, 2, 0, 3, 3, 0};
  a.action = 5;
  a.reward = -0.01;
  a.psi_next = {1, 0.1, 2, 0, 3.1, 3, 0};
  a.q_next = 1;
  m.push(a);
  ReplayItem b = a;
  b.reward = -100;
  b.terminal = true;
  m.push(b);
  const auto batch = make_td_batch(q, m, {0, 1}, 2, 0.99);
  EXPECT_EQ(batch.index, (std::vector<std::size_t>{5, 5}));
  EXPECT_DOUBLE_EQ(batch.target(0), -0.01 + 0.99 * q.forward(q_input(a.psi_next, 1, 2)).maxCoeff());
  EXPECT_EQ(batch.target(1), -100.0);
  EXPECT_EQ(batch.inputs.col(0), q_input(a.psi, 0, 2));
}

TEST(Train, DeltaBZeroReproducesBaseline) {
  const World s;
  auto cfg = small_config();
  cfg.schedule.delta_b0 = 0.0;
  const auto ours = train(cfg, s.task.dra, s.envs, &s.bias);
  cfg.use_bias = false;
  const auto base = train(cfg, s.task.dra, s.envs, nullptr);
  ASSERT_EQ(ours.log.size(), base.log.size());
  for (std::size_t k = 0; k < ours.log.size(); ++k) {
    EXPECT_EQ(ours.log[k].discounted_return, base.log[k].discounted_return);
    EXPECT_EQ(ours.log[k].steps, base.log[k].steps);
    EXPECT_EQ(ours.log[k].biased, 0u);
  }
  EXPECT_TRUE(ours.qnet == base.qnet);
}

TEST(Train, DeterministicAndLogged) {
  const World s;
  const auto cfg = small_config();
  std::vector<std::size_t> ckpts;
  const auto a = train(cfg, s.task.dra, s.envs, &s.bias);
  auto cfg2 = cfg;
  cfg2.checkpoint_every = 3;
  const auto b = train(cfg2, s.task.dra, s.envs, &s.bias, nullptr,
                       [&](std::size_t k, const Mlp&) { ckpts.push_back(k); });
  EXPECT_TRUE(a.qnet == b.qnet);
  EXPECT_EQ(ckpts, (std::vector<std::size_t>{3, 6}));
  ASSERT_EQ(a.log.size(), 6u);
  EXPECT_GT(a.gradient_steps, 0u);
  std::size_t biased = 0;
  for (const auto& e : a.log) {
    EXPECT_LE(e.steps, cfg.horizon);
    EXPECT_EQ(e.greedy + e.biased + e.random, e.steps);
    biased += e.biased;
  }
  EXPECT_GT(biased, 0u);
  const auto file = std::filesystem::temp_directory_path() / "ltlrl_log.csv";
  save_training_log(a.log, file);
  const auto back = load_training_log(file);
  ASSERT_EQ(back.size(), a.log.size());
  EXPECT_EQ(back[3].discounted_return, a.log[3].discounted_return);
  EXPECT_EQ(back[3].greedy, a.log[3].greedy);
  std::filesystem::remove(file);
}

TEST(Train, BootstrapNeedsDataset) {
  const World s;
  auto cfg = small_config();
  cfg.bootstrap_replay = true;
  EXPECT_THROW(train(cfg, s.task.dra, s.envs, &s.bias), Error);
  DatasetParams dp;
  dp.starts_per_env = 1;
  const auto ds = build_dataset(s.envs, dp);
  cfg.episodes = 1;
  cfg.horizon = 1;
  cfg.batch_size = 16;
  // One environment step, but the bootstrapped buffer already allows a gradient step.
  EXPECT_EQ(train(cfg, s.task.dra, s.envs, &s.bias, &ds).gradient_steps, 1u);
}

TEST(Train, EarlyStop) {
  const World s;
  auto cfg = small_config();
  cfg.episodes = 50;
  cfg.stop_threshold = -1e9;
  cfg.stop_window = 4;
  EXPECT_EQ(train(cfg, s.task.dra, s.envs, &s.bias).log.size(), 4u);
}

TEST(TrainedPolicy, SaveLoadAct) {
  const World s;
  const TrainedPolicy p(make_q_network(s.task.dra.num_states(), {8}, 1), s.task.dra);
  const auto dir = std::filesystem::temp_directory_path() / "ltlrl_policy";
  std::filesystem::remove_all(dir);
  p.save(dir);
  const auto back = TrainedPolicy::load(dir);
  EXPECT_TRUE(back.qnet() == p.qnet());
  EXPECT_EQ(back.dra().distances(), p.dra().distances());
  const ProductState st{{2, 5, 0.3}, 0};
  EXPECT_EQ(back.act(s.envs[0], st), p.act(s.envs[0], st));
  std::filesystem::remove_all(dir);
}
