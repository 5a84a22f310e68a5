#include "ltlrl/learner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ltlrl/error.hpp"
#include "ltlrl/hoa.hpp"

namespace ltlrl {

ScheduleValues schedule_at(const ExplorationSchedule& sch, std::size_t episode) {
  const double k = static_cast<double>(episode);
  ScheduleValues v;
  v.delta_b = sch.horizon > 0 ? sch.delta_b0 * std::max(0.0, 1.0 - k / sch.horizon) : 0.0;
  v.delta_e = sch.horizon > 0 ? sch.delta_e0 * std::max(0.0, 1.0 - k / (sch.horizon * sch.ratio)) : 0.0;
  v.epsilon = v.delta_b + v.delta_e;
  return v;
}

Eigen::VectorXd q_input(const FeatureVector& psi, StateId q, std::size_t num_states) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(7 + num_states));
  for (std::size_t i = 0; i < 7; ++i) v(static_cast<Eigen::Index>(i)) = psi[i];
  v(static_cast<Eigen::Index>(7 + q)) = 1.0;
  return v;
}

void set_q_input_transform(Mlp& qnet, double width, double height) {
  const auto n = static_cast<Eigen::Index>(qnet.input_size());
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(n), scale = Eigen::VectorXd::Ones(n);
  const double span = std::max(width, height);
  offset.head(7) << span / 8, 0.0, span / 4, 0.0, width / 2, height / 2, 0.0;
  scale.head(7) << 4 / span, 1 / kPi, 4 / span, 1 / kPi, 2 / width, 2 / height, 1 / kPi;
  qnet.set_input_transform(offset, scale);
}

Mlp make_q_network(std::size_t num_states, const std::vector<std::size_t>& hidden, std::uint64_t seed) {
  std::vector<std::size_t> sizes{7 + num_states};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(kNumActions);
  return Mlp::init(sizes, Head::Linear, seed);
}

std::size_t greedy_action(const Mlp& qnet, const Eigen::VectorXd& input) { return argmax(qnet.forward(input)); }

ActionChoice sample_action(const Mlp& qnet, const BiasModel* bias, const FeatureVector& psi, StateId q,
                           std::size_t num_states, const std::optional<Vec2>& goal, const ScheduleValues& sch,
                           Rng& rng) {
  const double u = uniform01(rng);
  if (u < 1.0 - sch.epsilon) return {greedy_action(qnet, q_input(psi, q, num_states)), ActionKind::Greedy};
  if (bias && goal && u < 1.0 - sch.epsilon + sch.delta_b) return {bias->predict(psi, *goal), ActionKind::Biased};
  return {static_cast<std::size_t>(uniform_index(rng, kNumActions)), ActionKind::Random};
}

ActionChoice epsilon_greedy_action(const Mlp& qnet, const Eigen::VectorXd& input, double epsilon, Rng& rng) {
  const double u = uniform01(rng);
  if (u < 1.0 - epsilon) return {greedy_action(qnet, input), ActionKind::Greedy};
  return {static_cast<std::size_t>(uniform_index(rng, kNumActions)), ActionKind::Random};
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error("replay capacity must be positive");
}

void ReplayMemory::push(const ReplayItem& item) {
  if (items_.size() < capacity_) {
    items_.push_back(item);
  } else {
    items_[next_] = item;
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayMemory::sample_indices(std::size_t n, Rng& rng) const {
  if (n > items_.size()) throw Error("not enough transitions to sample");
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t j = items_.size() - n; j < items_.size(); ++j) {
    const auto t = static_cast<std::size_t>(uniform_index(rng, j + 1));
    out.push_back(std::find(out.begin(), out.end(), t) == out.end() ? t : j);
  }
  return out;
}

Batch make_td_batch(const Mlp& target_net, const ReplayMemory& memory,
                    const std::vector<std::size_t>& indices, std::size_t num_states, double gamma) {
  const auto n = static_cast<Eigen::Index>(indices.size());
  const auto dim = static_cast<Eigen::Index>(7 + num_states);
  Batch b;
  b.inputs.resize(dim, n);
  Eigen::MatrixXd next(dim, n);
  b.target.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ReplayItem& it = memory[indices[static_cast<std::size_t>(i)]];
    b.inputs.col(i) = q_input(it.psi, it.q, num_states);
    next.col(i) = q_input(it.psi_next, it.q_next, num_states);
    b.index.push_back(it.action);
  }
  const Eigen::MatrixXd q_next = target_net.forward(next);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ReplayItem& it = memory[indices[static_cast<std::size_t>(i)]];
    b.target(i) = it.terminal ? it.reward : it.reward + gamma * q_next.col(i).maxCoeff();
  }
  return b;
}

TrainedPolicy::TrainedPolicy(Mlp qnet, PrunedDra dra) : qnet_(std::move(qnet)), dra_(std::move(dra)) {
  if (qnet_.input_size() != 7 + dra_.num_states() || qnet_.output_size() != kNumActions)
    throw Error("Q-network does not match the automaton");
}

std::size_t TrainedPolicy::act(const Environment& env, const ProductState& s) const {
  return greedy_action(qnet_, q_input(features(env, s.x), s.q, dra_.num_states()));
}

void TrainedPolicy::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  qnet_.save(dir / "qnet.model");
  {
    std::ofstream out(dir / "automaton.hoa");
    if (!out) throw Error("cannot write " + (dir / "automaton.hoa").string());
    out << export_hoa(dra_.dra());
  }
  nlohmann::json j;
  j["mutex_groups"] = dra_.mutex_groups();
  j["num_states"] = dra_.num_states();
  std::ofstream out(dir / "policy.json");
  out << j.dump(2) << "\n";
}

TrainedPolicy TrainedPolicy::load(const std::filesystem::path& dir) {
  std::ifstream hoa(dir / "automaton.hoa");
  std::ifstream meta(dir / "policy.json");
  if (!hoa || !meta) throw Error(dir.string() + " is not a policy directory");
  std::stringstream text;
  text << hoa.rdbuf();
  Dra dra = import_hoa(text.str());
  MutexGroups groups;
  try {
    groups = nlohmann::json::parse(meta).at("mutex_groups").get<MutexGroups>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid policy.json: ") + e.what());
  }
  return TrainedPolicy(Mlp::load(dir / "qnet.model"), prune(dra, groups));
}

namespace {

ReplayItem to_item(const Environment& env, const ProductState& s, std::size_t a, const StepResult& r) {
  return {features(env, s.x), s.q, a, r.reward, features(env, r.next.x), r.next.q, r.terminal};
}

}  // namespace

TrainingResult train(const TrainConfig& cfg, const PrunedDra& dra, const std::vector<Environment>& envs,
                     const BiasModel* bias, const BiasDataset* bootstrap, const CheckpointFn& on_checkpoint) {
  if (envs.empty()) throw Error("training needs at least one environment");
  if (cfg.horizon == 0 || cfg.batch_size == 0 || cfg.train_every == 0) throw Error("invalid training configuration");
  if (cfg.use_bias && !bias) throw Error("biased exploration needs a bias model");
  const std::size_t nq = dra.num_states();

  // Independent streams so that disabling one mechanism leaves the others untouched.
  Rng env_rng = make_rng(cfg.seed, {1});
  Rng start_rng = make_rng(cfg.seed, {2});
  Rng dyn_rng = make_rng(cfg.seed, {3});
  Rng policy_rng = make_rng(cfg.seed, {4});
  Rng goal_rng = make_rng(cfg.seed, {5});
  Rng replay_rng = make_rng(cfg.seed, {6});

  std::vector<ProductMdp> mdps;
  mdps.reserve(envs.size());
  for (const auto& env : envs) mdps.emplace_back(env, dra, cfg.rewards);

  TrainingResult result;
  result.qnet = make_q_network(nq, cfg.hidden, derive_seed(cfg.seed, {7}));
  set_q_input_transform(result.qnet, envs.front().width, envs.front().height);
  Mlp& qnet = result.qnet;
  Mlp target = qnet;
  Optimizer opt(cfg.optimizer);
  ReplayMemory memory(cfg.replay_capacity);

  if (cfg.bootstrap_replay) {
    if (!bootstrap) throw Error("replay bootstrap needs the bias dataset");
    Rng boot_rng = make_rng(cfg.seed, {8});
    const std::size_t n = std::min(bootstrap->points.size(), cfg.bootstrap_limit);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& pt = bootstrap->points[i * bootstrap->points.size() / n];
      if (pt.env_index >= envs.size()) throw Error("bootstrap point refers to an unknown environment");
      const ProductMdp& mdp = mdps[pt.env_index];
      const ProductState s = mdp.initial_state(pt.start);
      memory.push(to_item(envs[pt.env_index], s, pt.action, mdp.step(s, pt.action, boot_rng)));
    }
  }

  double window_sum = 0.0;
  for (std::size_t k = 0; k < cfg.episodes; ++k) {
    ScheduleValues sch = schedule_at(cfg.schedule, k);
    if (!cfg.use_bias) sch = {sch.epsilon, 0.0, sch.epsilon};
    const std::size_t e = static_cast<std::size_t>(uniform_index(env_rng, envs.size()));
    const Environment& env = envs[e];
    const ProductMdp& mdp = mdps[e];
    ProductState s = mdp.initial_state(sample_initial_state(env, start_rng));

    EpisodeLog log;
    log.episode = k;
    log.schedule = sch;
    double discount = 1.0, loss_sum = 0.0;
    std::size_t loss_count = 0;
    std::optional<Vec2> goal;
    std::optional<StateId> goal_for;
    FeatureVector psi = features(env, s.x);

    for (std::size_t t = 0; t < cfg.horizon; ++t) {
      if (cfg.use_bias && goal_for != s.q) {
        const auto choice = select_goal(dra, s.q, env, goal_rng);
        goal = choice ? std::optional<Vec2>(choice->x_goal) : std::nullopt;
        goal_for = s.q;
      }
      const ActionChoice choice = cfg.use_bias
                                      ? sample_action(qnet, bias, psi, s.q, nq, goal, sch, policy_rng)
                                      : epsilon_greedy_action(qnet, q_input(psi, s.q, nq), sch.epsilon, policy_rng);
      switch (choice.kind) {
        case ActionKind::Greedy: ++log.greedy; break;
        case ActionKind::Biased: ++log.biased; break;
        case ActionKind::Random: ++log.random; break;
      }
      const StepResult r = mdp.step(s, choice.action, dyn_rng);
      const FeatureVector psi_next = features(env, r.next.x);
      memory.push({psi, s.q, choice.action, r.reward, psi_next, r.next.q, r.terminal});
      log.discounted_return += discount * r.reward;
      discount *= cfg.gamma;
      ++log.steps;

      if (memory.size() >= std::max(cfg.learning_starts, cfg.batch_size) && log.steps % cfg.train_every == 0) {
        const auto idx = memory.sample_indices(cfg.batch_size, replay_rng);
        const Mlp& bootstrap_net = cfg.target_sync > 0 ? target : qnet;
        const Batch batch = make_td_batch(bootstrap_net, memory, idx, nq, cfg.gamma);
        double loss;
        try {
          loss = backward_and_step(qnet, batch, Loss::TdMse, opt);
        } catch (const DivergenceError& err) {
          throw DivergenceError(std::string(err.what()) + " at episode " + std::to_string(k) + ", step " +
                                std::to_string(t));
        }
        loss_sum += loss;
        ++loss_count;
        ++result.gradient_steps;
        if (cfg.target_sync > 0 && result.gradient_steps % cfg.target_sync == 0) target = qnet;
      }
      s = r.next;
      psi = psi_next;
      if (r.terminal) break;
    }
    log.loss_mean = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    result.log.push_back(log);

    if (on_checkpoint && cfg.checkpoint_every > 0 && (k + 1) % cfg.checkpoint_every == 0) on_checkpoint(k + 1, qnet);

    window_sum += log.discounted_return;
    if (result.log.size() > cfg.stop_window) window_sum -= result.log[result.log.size() - 1 - cfg.stop_window].discounted_return;
    if (cfg.stop_threshold && result.log.size() >= cfg.stop_window &&
        window_sum / static_cast<double>(cfg.stop_window) >= *cfg.stop_threshold)
      break;
  }
  return result;
}

void save_training_log(const std::vector<EpisodeLog>& log, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << "episode,return,steps,eps,delta_b,delta_e,loss_mean,greedy_ct,biased_ct,random_ct\n";
  out.precision(17);
  for (const auto& l : log)
    out << l.episode << ',' << l.discounted_return << ',' << l.steps << ',' << l.schedule.epsilon << ','
        << l.schedule.delta_b << ',' << l.schedule.delta_e << ',' << l.loss_mean << ',' << l.greedy << ','
        << l.biased << ',' << l.random << '\n';
}

std::vector<EpisodeLog> load_training_log(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read " + file.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("episode,return", 0) != 0) throw Error(file.string() + ": not a training log");
  std::vector<EpisodeLog> log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[10];
    for (auto& s : f) std::getline(ss, s, ',');
    try {
      EpisodeLog l;
      l.episode = std::stoul(f[0]);
      l.discounted_return = std::stod(f[1]);
      l.steps = std::stoul(f[2]);
      l.schedule = {std::stod(f[3]), std::stod(f[4]), std::stod(f[5])};
      l.loss_mean = std::stod(f[6]);
      l.greedy = std::stoul(f[7]);
      l.biased = std::stoul(f[8]);
      l.random = std::stoul(f[9]);
      log.push_back(l);
    } catch (const std::exception&) {
      throw Error(file.string() + ": malformed row '" + line + "'");
    }
  }
  return log;
}

}  // namespace ltlrl
