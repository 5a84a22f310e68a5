#include "ltlrl/bias.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <queue>
#include <sstream>

#include "ltlrl/error.hpp"

namespace ltlrl {

GridGraph::GridGraph(const Environment& env, int cells_per_side)
    : m_(cells_per_side), cell_w_(env.width / cells_per_side), cell_h_(env.height / cells_per_side) {
  if (cells_per_side < 2) throw Error("grid needs at least 2 cells per side");
  const auto n = static_cast<std::size_t>(m_) * static_cast<std::size_t>(m_);
  avoid_.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = static_cast<double>(i % m_) * cell_w_, y0 = static_cast<double>(i / m_) * cell_h_;
    for (const auto& o : env.obstacles)
      if (square_intersects_disk({x0, y0}, {x0 + cell_w_, y0 + cell_h_}, o)) avoid_[i] = 1;
  }
  adj_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (avoid_[i]) continue;
    const std::size_t r = i / m_, c = i % m_;
    auto link = [&](std::size_t j) {
      if (!avoid_[j]) adj_[i].emplace_back(j, (center(i) - center(j)).norm());
    };
    if (r > 0) link(i - m_);
    if (c > 0) link(i - 1);
    if (c + 1 < static_cast<std::size_t>(m_)) link(i + 1);
    if (r + 1 < static_cast<std::size_t>(m_)) link(i + m_);
  }

  dist_.assign(n * n, kInfiniteCost);
  using Item = std::pair<double, std::size_t>;
  for (std::size_t src = 0; src < n; ++src) {
    if (avoid_[src]) continue;
    double* d = &dist_[src * n];
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    d[src] = 0.0;
    pq.emplace(0.0, src);
    while (!pq.empty()) {
      auto [du, u] = pq.top();
      pq.pop();
      if (du > d[u]) continue;
      for (auto [v, w] : adj_[u]) {
        if (du + w < d[v]) {
          d[v] = du + w;
          pq.emplace(d[v], v);
        }
      }
    }
  }
  const auto free = free_cells();
  if (free.empty()) throw Error("grid has no free cells");
  for (auto j : free)
    if (distance(free.front(), j) == kInfiniteCost) throw Error("free space of the grid is disconnected");
}

std::size_t GridGraph::cell_of(Vec2 p) const {
  const int c = std::clamp(static_cast<int>(std::floor(p.x / cell_w_)), 0, m_ - 1);
  const int r = std::clamp(static_cast<int>(std::floor(p.y / cell_h_)), 0, m_ - 1);
  return static_cast<std::size_t>(r) * m_ + static_cast<std::size_t>(c);
}

Vec2 GridGraph::center(std::size_t cell) const {
  return {(static_cast<double>(cell % m_) + 0.5) * cell_w_, (static_cast<double>(cell / m_) + 0.5) * cell_h_};
}

std::vector<std::size_t> GridGraph::free_cells() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < avoid_.size(); ++i)
    if (!avoid_[i]) out.push_back(i);
  return out;
}

GridGraph build_grid_graph(const Environment& env, int cells_per_side) { return GridGraph(env, cells_per_side); }

StartRollouts simulate_start(const Environment& env, const GridGraph& grid, const AgentState& start,
                             std::size_t trials, Rng& rng) {
  if (trials == 0) throw Error("need at least one rollout per action");
  StartRollouts r;
  r.start = start;
  r.trials = trials;
  for (std::size_t a = 0; a < kNumActions; ++a) {
    for (std::size_t z = 0; z < trials; ++z) {
      const AgentState next = step_dynamics(env, start, a, rng);
      if (!grid.is_avoid(grid.cell_of(next.position()))) r.survivors[a].push_back(next);
    }
  }
  return r;
}

std::array<double, kNumActions> safety_probabilities(const StartRollouts& r) {
  std::array<double, kNumActions> p{};
  for (std::size_t a = 0; a < kNumActions; ++a)
    p[a] = static_cast<double>(r.survivors[a].size()) / static_cast<double>(r.trials);
  return p;
}

std::vector<std::size_t> safe_actions(const std::array<double, kNumActions>& p, double zeta) {
  const double threshold = *std::max_element(p.begin(), p.end()) - zeta;
  std::vector<std::size_t> out;
  for (std::size_t a = 0; a < kNumActions; ++a)
    if (p[a] >= threshold) out.push_back(a);
  return out;
}

std::array<double, kNumActions> mean_goal_costs(const StartRollouts& r, const GridGraph& grid, std::size_t goal_cell) {
  std::array<double, kNumActions> cost{};
  for (std::size_t a = 0; a < kNumActions; ++a) {
    const auto& s = r.survivors[a];
    if (s.empty()) {
      cost[a] = kInfiniteCost;
      continue;
    }
    double sum = 0.0;
    for (const auto& x : s) sum += grid.distance(grid.cell_of(x.position()), goal_cell);
    cost[a] = sum / static_cast<double>(s.size());
  }
  return cost;
}

double time_to_go(const AgentState& x, Vec2 goal) {
  const Vec2 d = goal - x.position();
  const double dist = d.norm();
  if (dist < 1e-12) return 0.0;
  const double heading_error = std::abs(wrap_angle(std::atan2(d.y, d.x) - x.theta));
  return dist / kMaxLinearVelocity + heading_error / kMaxAngularVelocity;
}

std::size_t select_label(const StartRollouts& r, const GridGraph& grid, std::size_t goal_cell,
                         const std::vector<std::size_t>& safe) {
  if (safe.empty()) throw Error("empty safe action set");
  const auto cost = mean_goal_costs(r, grid, goal_cell);
  double best = kInfiniteCost;
  for (auto a : safe) best = std::min(best, cost[a]);
  const Vec2 goal = grid.center(goal_cell);
  std::size_t label = kNumActions;
  double best_tie = kInfiniteCost;
  for (auto a : safe) {
    if (!(cost[a] <= best + 1e-9)) continue;
    double tie = 0.0;
    for (const auto& x : r.survivors[a]) tie += time_to_go(x, goal);
    tie = r.survivors[a].empty() ? kInfiniteCost : tie / static_cast<double>(r.survivors[a].size());
    if (label == kNumActions || tie < best_tie) {
      label = a;
      best_tie = tie;
    }
  }
  return label;
}

Rng dataset_start_rng(std::uint64_t seed, std::size_t env_index) { return make_rng(seed, {0x7374617274, env_index}); }

Rng dataset_trial_rng(std::uint64_t seed, std::size_t env_index, std::size_t start_index) {
  return make_rng(seed, {0x747269616c, env_index, start_index});
}

BiasDataset build_dataset(const std::vector<Environment>& envs, const DatasetParams& params) {
  if (params.trials == 0) throw Error("Z must be at least 1");
  if (params.zeta < 0.0 || params.zeta > 1.0) throw Error("zeta must lie in [0, 1]");
  BiasDataset ds;
  for (std::size_t e = 0; e < envs.size(); ++e) {
    const Environment& env = envs[e];
    const GridGraph grid(env, params.grid_cells);
    const auto goals = grid.free_cells();
    Rng start_rng = dataset_start_rng(params.seed, e);
    std::size_t accepted = 0, drawn = 0;
    while (accepted < params.starts_per_env) {
      if (drawn >= 100 * params.starts_per_env + 100)
        throw SamplingBudgetExceeded("too many starts without a surviving action in " + env.id);
      const AgentState start = sample_initial_state(env, start_rng);
      Rng trial_rng = dataset_trial_rng(params.seed, e, drawn);
      const std::size_t start_index = drawn++;
      const StartRollouts rollouts = simulate_start(env, grid, start, params.trials, trial_rng);
      const auto p = safety_probabilities(rollouts);
      if (*std::max_element(p.begin(), p.end()) == 0.0) {
        ++ds.skipped_starts;
        continue;
      }
      const auto safe = safe_actions(p, params.zeta);
      const FeatureVector psi = features(env, start);
      for (auto goal : goals) {
        BiasDatapoint pt;
        pt.psi = psi;
        pt.goal = grid.center(goal);
        pt.action = select_label(rollouts, grid, goal, safe);
        pt.env_index = e;
        pt.start_index = start_index;
        pt.start = start;
        pt.goal_cell = goal;
        ds.points.push_back(pt);
      }
      ++accepted;
    }
  }
  return ds;
}

void save_dataset_csv(const BiasDataset& ds, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << "psi1,psi2,psi3,psi4,psi5,psi6,psi7,goal_x,goal_y,action\n";
  out.precision(17);
  for (const auto& pt : ds.points) {
    for (double v : pt.psi) out << v << ',';
    out << pt.goal.x << ',' << pt.goal.y << ',' << pt.action << '\n';
  }
}

BiasDataset load_dataset_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read " + file.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("psi1,", 0) != 0) throw Error(file.string() + ": missing dataset header");
  BiasDataset ds;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(file.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (v.size() != 10) throw Error(file.string() + ":" + std::to_string(line_no) + ": expected 10 columns");
    BiasDatapoint pt;
    std::copy(v.begin(), v.begin() + 7, pt.psi.begin());
    pt.goal = {v[7], v[8]};
    if (v[9] < 0 || v[9] >= static_cast<double>(kNumActions)) throw Error("action label out of range");
    pt.action = static_cast<std::size_t>(v[9]);
    ds.points.push_back(pt);
  }
  return ds;
}

Eigen::VectorXd bias_input(const FeatureVector& psi, Vec2 goal) {
  Eigen::VectorXd v(9);
  for (std::size_t i = 0; i < 7; ++i) v(static_cast<Eigen::Index>(i)) = psi[i];
  v(7) = goal.x;
  v(8) = goal.y;
  return v;
}

BiasModel::BiasModel(Mlp net) : net_(std::move(net)) {
  if (net_.input_size() != 9 || net_.output_size() != kNumActions || net_.head() != Head::Softmax)
    throw Error("bias model must map 9 inputs to a softmax over 23 actions");
}

Eigen::VectorXd BiasModel::distribution(const FeatureVector& psi, Vec2 goal) const {
  return net_.forward(bias_input(psi, goal));
}

std::size_t BiasModel::predict(const FeatureVector& psi, Vec2 goal) const { return argmax(distribution(psi, goal)); }

BiasModel BiasModel::load(const std::filesystem::path& file) { return BiasModel(Mlp::load(file)); }

namespace {

Batch make_batch(const std::vector<BiasDatapoint>& points, const std::vector<std::size_t>& order, std::size_t begin,
                 std::size_t end) {
  Batch b;
  b.inputs.resize(9, static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i) {
    const auto& pt = points[order[i]];
    b.inputs.col(static_cast<Eigen::Index>(i - begin)) = bias_input(pt.psi, pt.goal);
    b.index.push_back(pt.action);
  }
  return b;
}

double mean_loss(const Mlp& net, const std::vector<BiasDatapoint>& points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  double total = 0.0;
  for (std::size_t b = 0; b < points.size(); b += 4096) {
    const std::size_t e = std::min(points.size(), b + 4096);
    total += batch_loss(net, make_batch(points, order, b, e), Loss::CrossEntropy) * static_cast<double>(e - b);
  }
  return total / static_cast<double>(points.size());
}

}  // namespace

BiasModel train_bias_model(const BiasDataset& ds, const BiasTrainingConfig& cfg, BiasTrainingReport* report) {
  if (ds.points.empty()) throw Error("empty bias dataset");
  if (cfg.batch_size == 0) throw Error("batch size must be positive");
  const auto n = ds.points.size();

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(9), sq = Eigen::VectorXd::Zero(9);
  for (const auto& pt : ds.points) {
    const Eigen::VectorXd v = bias_input(pt.psi, pt.goal);
    mean += v;
    sq += v.cwiseAbs2();
  }
  mean /= static_cast<double>(n);
  Eigen::VectorXd scale(9);
  for (Eigen::Index i = 0; i < 9; ++i) {
    const double var = std::max(0.0, sq(i) / static_cast<double>(n) - mean(i) * mean(i));
    scale(i) = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }

  std::vector<std::size_t> sizes{9};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(kNumActions);
  Mlp net = Mlp::init(sizes, Head::Softmax, derive_seed(cfg.seed, {0x6e6574}));
  net.set_input_transform(mean, scale);

  BiasTrainingReport local;
  local.initial_loss = mean_loss(net, ds.points);
  Optimizer opt({OptimizerKind::Adam, cfg.learning_rate});
  Rng rng = make_rng(cfg.seed, {0x73687566});
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < n; b += cfg.batch_size) {
      const Batch batch = make_batch(ds.points, order, b, std::min(n, b + cfg.batch_size));
      total += backward_and_step(net, batch, Loss::CrossEntropy, opt);
      ++batches;
    }
    local.epoch_loss.push_back(total / static_cast<double>(batches));
  }
  BiasModel model(std::move(net));
  local.train_accuracy = accuracy(model, ds.points);
  if (report) *report = std::move(local);
  return model;
}

double accuracy(const BiasModel& model, const std::vector<BiasDatapoint>& points) {
  if (points.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t b = 0; b < points.size(); b += 4096) {
    const std::size_t e = std::min(points.size(), b + 4096);
    Eigen::MatrixXd in(9, static_cast<Eigen::Index>(e - b));
    for (std::size_t i = b; i < e; ++i) in.col(static_cast<Eigen::Index>(i - b)) = bias_input(points[i].psi, points[i].goal);
    const Eigen::MatrixXd out = model.net().forward(in);
    for (std::size_t i = b; i < e; ++i)
      if (argmax(out.col(static_cast<Eigen::Index>(i - b))) == points[i].action) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(points.size());
}

std::vector<StateId> goal_states(const PrunedDra& dra, StateId q) {
  std::vector<StateId> out;
  const auto d = dra.distance(q);
  if (d == 0 || d == kInfiniteDistance) return out;
  for (const auto& [sym, next] : dra.feasible_transitions(q))
    if (dra.distance(next) == d - 1) out.push_back(next);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::optional<GoalChoice> select_goal(const PrunedDra& dra, StateId q, const Environment& env, Rng& rng) {
  const auto targets = goal_states(dra, q);
  std::vector<std::pair<StateId, std::vector<std::size_t>>> options;
  for (auto qg : targets) {
    std::vector<std::size_t> regions;
    for (std::size_t i = 0; i < env.regions.size(); ++i) {
      const auto bit = dra.atoms().index_of(env.regions[i].name);
      if (bit && dra.step(q, Symbol{1} << *bit) == qg) regions.push_back(i);
    }
    if (!regions.empty()) options.emplace_back(qg, std::move(regions));
  }
  if (options.empty()) return std::nullopt;
  const auto& [qg, regions] = options[uniform_index(rng, options.size())];
  const std::size_t region = regions[uniform_index(rng, regions.size())];
  return GoalChoice{qg, region, env.regions[region].center};
}

}  // namespace ltlrl
