#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ltlrl/automaton.hpp"
#include "ltlrl/bias.hpp"
#include "ltlrl/neural.hpp"
#include "ltlrl/product.hpp"
#include "ltlrl/random.hpp"
#include "ltlrl/world.hpp"

namespace ltlrl {

// δ_b and δ_e decay linearly in the episode index; δ_b reaches zero after `horizon` episodes
// and δ_e after horizon · ratio.
struct ExplorationSchedule {
  double delta_b0 = 0.5;
  double delta_e0 = 0.5;
  double horizon = 200000.0;
  double ratio = 1.25;
};

struct ScheduleValues {
  double epsilon = 0.0;
  double delta_b = 0.0;
  double delta_e = 0.0;
};

ScheduleValues schedule_at(const ExplorationSchedule& sch, std::size_t episode);

enum class ActionKind { Greedy, Biased, Random };

struct ActionChoice {
  std::size_t action = 0;
  ActionKind kind = ActionKind::Greedy;
};

// Q-network input: ψ(x) followed by a one-hot encoding of q.
Eigen::VectorXd q_input(const FeatureVector& psi, StateId q, std::size_t num_states);
// Fixed affine scaling of the Q inputs for a workspace of the given size.
void set_q_input_transform(Mlp& qnet, double width, double height);

Mlp make_q_network(std::size_t num_states, const std::vector<std::size_t>& hidden, std::uint64_t seed);

// argmax_a Q(input, a), lowest index on ties.
std::size_t greedy_action(const Mlp& qnet, const Eigen::VectorXd& input);

// The (ε,δ)-greedy draw: greedy when u < 1 − ε, biased when u < 1 − ε + δ_b and a goal is
// available, uniform random otherwise.
ActionChoice sample_action(const Mlp& qnet, const BiasModel* bias, const FeatureVector& psi, StateId q,
                           std::size_t num_states, const std::optional<Vec2>& goal, const ScheduleValues& sch,
                           Rng& rng);

// Plain ε-greedy with the same draw order as sample_action.
ActionChoice epsilon_greedy_action(const Mlp& qnet, const Eigen::VectorXd& input, double epsilon, Rng& rng);

struct ReplayItem {
  FeatureVector psi{};
  StateId q = 0;
  std::size_t action = 0;
  double reward = 0.0;
  FeatureVector psi_next{};
  StateId q_next = 0;
  bool terminal = false;
};

// Bounded FIFO; the oldest transition is overwritten once full.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return items_.size(); }
  const ReplayItem& operator[](std::size_t i) const { return items_.at(i); }

  void push(const ReplayItem& item);
  // Distinct indices chosen uniformly (Floyd's algorithm).
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<ReplayItem> items_;
};

// TD regression batch: inputs ψ_P(s), taken actions, targets r + γ max_a' Q(ψ_P(s'), a') or r
// for terminal transitions, with Q evaluated by target_net.
Batch make_td_batch(const Mlp& target_net, const ReplayMemory& memory,
                    const std::vector<std::size_t>& indices, std::size_t num_states, double gamma);

struct TrainConfig {
  std::size_t episodes = 1000;
  std::size_t horizon = 500;
  double gamma = 0.99;
  std::size_t replay_capacity = 100000;
  std::size_t batch_size = 64;
  std::size_t learning_starts = 64;
  std::size_t train_every = 1;  // environment steps per gradient step
  std::vector<std::size_t> hidden{256, 256};
  OptimizerConfig optimizer{OptimizerKind::Sgd, 1e-3};
  ExplorationSchedule schedule;
  bool use_bias = true;
  RewardConfig rewards;
  std::uint64_t seed = 0;
  // Frozen target network refreshed every target_sync gradient steps; 0 uses θ itself.
  std::size_t target_sync = 0;
  // Pre-fill the replay memory with one simulated step per dataset point.
  bool bootstrap_replay = false;
  std::size_t bootstrap_limit = 20000;
  // Stop once the moving average of the last stop_window returns reaches stop_threshold.
  std::optional<double> stop_threshold;
  std::size_t stop_window = 100;
  std::size_t checkpoint_every = 0;
};

struct EpisodeLog {
  std::size_t episode = 0;
  double discounted_return = 0.0;
  std::size_t steps = 0;
  ScheduleValues schedule;
  double loss_mean = 0.0;
  std::size_t greedy = 0;
  std::size_t biased = 0;
  std::size_t random = 0;
};

// Q-network plus automaton; acting greedily while tracking q realizes the finite-memory policy.
class TrainedPolicy {
 public:
  TrainedPolicy(Mlp qnet, PrunedDra dra);

  const Mlp& qnet() const noexcept { return qnet_; }
  const PrunedDra& dra() const noexcept { return dra_; }

  std::size_t act(const Environment& env, const ProductState& s) const;

  // Writes qnet.model, automaton.hoa and policy.json into dir.
  void save(const std::filesystem::path& dir) const;
  static TrainedPolicy load(const std::filesystem::path& dir);

 private:
  Mlp qnet_;
  PrunedDra dra_;
};

struct TrainingResult {
  Mlp qnet;
  std::vector<EpisodeLog> log;
  std::size_t gradient_steps = 0;
};

using CheckpointFn = std::function<void(std::size_t episode, const Mlp& qnet)>;

// Deep Q-learning over the product MDP. `bias` may be null (ε-greedy); `bootstrap` is required
// when cfg.bootstrap_replay.
TrainingResult train(const TrainConfig& cfg, const PrunedDra& dra, const std::vector<Environment>& envs,
                     const BiasModel* bias, const BiasDataset* bootstrap = nullptr,
                     const CheckpointFn& on_checkpoint = {});

void save_training_log(const std::vector<EpisodeLog>& log, const std::filesystem::path& file);
std::vector<EpisodeLog> load_training_log(const std::filesystem::path& file);

}  // namespace ltlrl
