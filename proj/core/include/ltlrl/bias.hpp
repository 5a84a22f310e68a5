#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ltlrl/automaton.hpp"
#include "ltlrl/neural.hpp"
#include "ltlrl/random.hpp"
#include "ltlrl/world.hpp"

namespace ltlrl {

inline constexpr double kInfiniteCost = std::numeric_limits<double>::infinity();

// Uniform m × m discretization of the workspace. Cells touching an obstacle form V_avoid;
// the remaining cells are 4-connected with Euclidean center-to-center weights.
class GridGraph {
 public:
  GridGraph(const Environment& env, int cells_per_side);

  int cells_per_side() const noexcept { return m_; }
  std::size_t num_cells() const noexcept { return avoid_.size(); }
  double cell_width() const noexcept { return cell_w_; }
  double cell_height() const noexcept { return cell_h_; }

  // Cell index row * m + column; points on the upper boundary belong to the last cell.
  std::size_t cell_of(Vec2 p) const;
  Vec2 center(std::size_t cell) const;
  bool is_avoid(std::size_t cell) const { return avoid_.at(cell) != 0; }
  std::vector<std::size_t> free_cells() const;
  const std::vector<std::pair<std::size_t, double>>& neighbors(std::size_t cell) const { return adj_.at(cell); }

  // Shortest-path cost d_G; kInfiniteCost if either cell is avoided.
  double distance(std::size_t from, std::size_t to) const { return dist_[from * num_cells() + to]; }

 private:
  int m_;
  double cell_w_, cell_h_;
  std::vector<char> avoid_;
  std::vector<std::vector<std::pair<std::size_t, double>>> adj_;
  std::vector<double> dist_;
};

// Throws Error when the free cells are disconnected.
GridGraph build_grid_graph(const Environment& env, int cells_per_side);

struct DatasetParams {
  int grid_cells = 12;
  std::size_t starts_per_env = 500;  // M
  std::size_t trials = 20;           // Z
  double zeta = 0.1;
  std::uint64_t seed = 0;
};

// Outcomes of Z noisy one-step simulations of every action from one start. Trials that land
// in V_avoid only count against the survival rate.
struct StartRollouts {
  AgentState start;
  std::size_t trials = 0;
  std::array<std::vector<AgentState>, kNumActions> survivors;
};

StartRollouts simulate_start(const Environment& env, const GridGraph& grid, const AgentState& start,
                             std::size_t trials, Rng& rng);

// p(start, a) = n / Z.
std::array<double, kNumActions> safety_probabilities(const StartRollouts& r);

// A_safe = {a : p(a) >= max p − ζ}, ascending.
std::vector<std::size_t> safe_actions(const std::array<double, kNumActions>& p, double zeta);

// D̄_G averaged over surviving trials; +∞ for actions without survivors.
std::array<double, kNumActions> mean_goal_costs(const StartRollouts& r, const GridGraph& grid, std::size_t goal_cell);

// Straight-line time to reach `goal`: distance at full speed plus heading error at full turn rate.
double time_to_go(const AgentState& x, Vec2 goal);

// argmin of D̄_G over A_safe. Costs within 1e-9 tie; ties go to the smaller mean time_to_go over
// surviving trials, then to the lower index.
std::size_t select_label(const StartRollouts& r, const GridGraph& grid, std::size_t goal_cell,
                         const std::vector<std::size_t>& safe);

struct BiasDatapoint {
  FeatureVector psi{};
  Vec2 goal;
  std::size_t action = 0;
  // Provenance.
  std::size_t env_index = 0;
  std::size_t start_index = 0;  // draw index of the start within its environment
  AgentState start;
  std::size_t goal_cell = 0;
};

struct BiasDataset {
  std::vector<BiasDatapoint> points;
  std::size_t skipped_starts = 0;  // starts from which no action survived
};

// Substreams used by build_dataset: one for drawing starts in an environment, one for the
// rollouts of each drawn start.
Rng dataset_start_rng(std::uint64_t seed, std::size_t env_index);
Rng dataset_trial_rng(std::uint64_t seed, std::size_t env_index, std::size_t start_index);

BiasDataset build_dataset(const std::vector<Environment>& envs, const DatasetParams& params);

// CSV header "psi1,...,psi7,goal_x,goal_y,action".
void save_dataset_csv(const BiasDataset& ds, const std::filesystem::path& file);
BiasDataset load_dataset_csv(const std::filesystem::path& file);

// Network input [ψ(x), x_goal].
Eigen::VectorXd bias_input(const FeatureVector& psi, Vec2 goal);

struct BiasTrainingConfig {
  std::vector<std::size_t> hidden{2048, 1024};
  std::size_t epochs = 50;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct BiasTrainingReport {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;  // mean over the epoch's mini-batches
  double train_accuracy = 0.0;
};

class BiasModel {
 public:
  BiasModel() = default;
  explicit BiasModel(Mlp net);

  const Mlp& net() const noexcept { return net_; }
  Mlp& net() noexcept { return net_; }

  Eigen::VectorXd distribution(const FeatureVector& psi, Vec2 goal) const;
  // argmax of the distribution, lowest index on ties.
  std::size_t predict(const FeatureVector& psi, Vec2 goal) const;

  void save(const std::filesystem::path& file) const { net_.save(file); }
  static BiasModel load(const std::filesystem::path& file);

 private:
  Mlp net_;
};

// Mini-batch Adam on the mean cross-entropy; inputs standardized with dataset statistics.
BiasModel train_bias_model(const BiasDataset& ds, const BiasTrainingConfig& cfg, BiasTrainingReport* report = nullptr);

double accuracy(const BiasModel& model, const std::vector<BiasDatapoint>& points);

inline std::size_t biased_action(const BiasModel& g, const FeatureVector& psi, Vec2 goal) {
  return g.predict(psi, goal);
}

// Q_goal(q): feasible one-hop successors with d_φ one lower, ascending.
std::vector<StateId> goal_states(const PrunedDra& dra, StateId q);

struct GoalChoice {
  StateId q_goal = 0;
  std::size_t region = 0;  // index into env.regions
  Vec2 x_goal;
};

// Draws q_goal uniformly among the states of Q_goal that some region of the environment leads
// to, then one such region uniformly. Returns nothing when d_φ(q) is 0 or ∞ or no region helps.
std::optional<GoalChoice> select_goal(const PrunedDra& dra, StateId q, const Environment& env, Rng& rng);

}  // namespace ltlrl
