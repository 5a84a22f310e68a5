#include "ltlrl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ltlrl/error.hpp"
#include "ltlrl/hoa.hpp"
#include "ltlrl/plot.hpp"

namespace ltlrl {

using nlohmann::json;

const std::vector<TaskPreset>& task_presets() {
  static const std::vector<TaskPreset> presets = {
      {"case1", "F r1 & F r2 & F r3 & G !obs", {"r1", "r2", "r3", "obs"}, EnvGroup::A, 9, 1},
      {"case2", "F r1 & F r2 & F r3 & G !obs", {"r1", "r2", "r3", "obs"}, EnvGroup::B, 9, 1},
      {"case3", "F r1 & F r4 & (!r4 U r1) & F r2 & F r3 & G !obs", {"r1", "r2", "r3", "r4", "obs"}, EnvGroup::A, 13, 1},
      {"case4", "F r1 & F r4 & (!r4 U r1) & G F r2 & G F r3 & G !obs", {"r1", "r2", "r3", "r4", "obs"}, EnvGroup::A, 10,
       1},
  };
  return presets;
}

const TaskPreset& task_preset(std::string_view name) {
  for (const auto& p : task_presets())
    if (p.name == name) return p;
  throw Error("unknown task preset '" + std::string(name) + "'");
}

std::vector<Region> default_regions(const std::vector<std::string>& names, double width, double height,
                                    int grid_cells) {
  struct Slot {
    const char* name;
    int col, row;
  };
  static const Slot slots[] = {{"r1", 3, 3}, {"r2", 8, 3}, {"r3", 3, 8}, {"r4", 8, 8}};
  const double cw = width / grid_cells, ch = height / grid_cells;
  std::vector<Region> out;
  for (const auto& n : names) {
    const auto it = std::find_if(std::begin(slots), std::end(slots), [&](const Slot& s) { return n == s.name; });
    if (it == std::end(slots)) throw Error("no default placement for region '" + n + "'");
    const int col = it->col * grid_cells / 12, row = it->row * grid_cells / 12;
    out.push_back({n, {(col + 0.5) * cw, (row + 0.5) * ch}, 0.35});
  }
  return out;
}

std::vector<std::string> region_atoms(const AtomTable& atoms) {
  std::vector<std::string> out;
  for (const auto& n : atoms.names())
    if (n != kObstacleAtom) out.push_back(n);
  return out;
}

Task compile_task(std::string_view formula, const std::vector<std::string>& atoms,
                  const std::optional<MutexGroups>& groups) {
  AtomTable table(atoms);
  Formula f = parse(formula, table);
  Dra dra = compile_dra(f, table);
  PrunedDra pruned = prune(dra, groups ? *groups : default_mutex_groups(table, kObstacleAtom));
  return {std::string(formula), std::move(table), std::move(f), std::move(pruned)};
}

Task compile_task(const TaskPreset& preset) { return compile_task(preset.formula, preset.atoms); }

Task task_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.contains("preset")) return compile_task(task_preset(j["preset"].get<std::string>()));
    std::optional<MutexGroups> groups;
    if (j.contains("mutex_groups")) groups = j["mutex_groups"].get<MutexGroups>();
    return compile_task(j.at("formula").get<std::string>(), j.at("atoms").get<std::vector<std::string>>(), groups);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid task JSON: ") + e.what());
  }
}

std::optional<double> EvalReport::accuracy() const {
  if (runs == 0) return std::nullopt;
  return 100.0 * static_cast<double>(successes) / static_cast<double>(runs);
}

EvalReport evaluate(const Controller& controller, const PrunedDra& dra, const std::vector<Environment>& envs,
                    const EvalConfig& cfg) {
  EvalReport report;
  report.seed = cfg.seed;
  for (std::size_t e = 0; e < envs.size(); ++e) {
    const Environment& env = envs[e];
    const ProductMdp mdp(env, dra);
    Rng start_rng = make_rng(cfg.seed, {0x73, e});
    EnvEval ev;
    ev.env_id = env.id;
    for (std::size_t i = 0; i < cfg.n_starts; ++i) {
      const AgentState x0 = sample_initial_state(env, start_rng);
      Rng dyn = make_rng(cfg.seed, {0x64, e, i});
      const Policy policy = [&](const ProductState& s) { return controller(env, s); };
      const EpisodeTrace trace = run_episode(mdp, policy, x0, cfg.horizon, dyn);
      if (cfg.on_trace) cfg.on_trace(e, i, trace);
      if (classify_success(trace, dra)) ++ev.successes;
      ++ev.runs;
    }
    report.successes += ev.successes;
    report.runs += ev.runs;
    report.per_env.push_back(ev);
  }
  return report;
}

EvalReport evaluate(const TrainedPolicy& policy, const std::vector<Environment>& envs, const EvalConfig& cfg) {
  return evaluate([&](const Environment& env, const ProductState& s) { return policy.act(env, s); }, policy.dra(), envs,
                  cfg);
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["seed"] = report.seed;
  if (!report.checkpoint.empty()) j["checkpoint"] = report.checkpoint;
  j["successes"] = report.successes;
  j["runs"] = report.runs;
  const auto acc = report.accuracy();
  j["accuracy"] = acc ? json(*acc) : json(nullptr);
  j["accuracy_defined"] = acc.has_value();
  j["environments"] = json::array();
  for (const auto& ev : report.per_env)
    j["environments"].push_back({{"id", ev.env_id}, {"successes", ev.successes}, {"runs", ev.runs}});
  return j.dump(2);
}

std::vector<double> moving_average(const std::vector<double>& xs, std::size_t window) {
  if (window == 0) throw Error("moving-average window must be positive");
  std::vector<double> out(xs.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sum += xs[i];
    if (i >= window) sum -= xs[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

std::optional<std::size_t> episodes_to_threshold(const std::vector<double>& returns, double threshold,
                                                 std::size_t window) {
  if (window == 0) throw Error("moving-average window must be positive");
  double sum = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    sum += returns[i];
    if (i >= window) sum -= returns[i - window];
    if (i + 1 >= window && sum / static_cast<double>(window) >= threshold) return i + 1;
  }
  return std::nullopt;
}

std::optional<double> median_with_infinity(std::vector<std::optional<std::size_t>> values) {
  if (values.empty()) return std::nullopt;
  std::vector<double> v;
  for (const auto& x : values) v.push_back(x ? static_cast<double>(*x) : INFINITY);
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double m = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  if (std::isinf(m)) return std::nullopt;
  return m;
}

EfficiencyComparison compare_sample_efficiency(const std::vector<std::vector<double>>& ours,
                                               const std::vector<std::vector<double>>& baseline, double threshold,
                                               std::size_t window) {
  EfficiencyComparison c;
  for (const auto& r : ours) {
    c.ours.push_back(episodes_to_threshold(r, threshold, window));
    if (!c.ours.back()) ++c.failures_ours;
  }
  for (const auto& r : baseline) {
    c.baseline.push_back(episodes_to_threshold(r, threshold, window));
    if (!c.baseline.back()) ++c.failures_baseline;
  }
  c.median_ours = median_with_infinity(c.ours);
  c.median_baseline = median_with_infinity(c.baseline);
  return c;
}

ExperimentConfig desk_scale_config() {
  ExperimentConfig cfg;
  cfg.train_envs = 2;
  cfg.test_envs = 2;
  cfg.dataset.starts_per_env = 200;
  cfg.bias.hidden = {128, 64};
  cfg.train.episodes = 1000;
  cfg.train.schedule.horizon = 5000;
  cfg.train.hidden = {128, 64};
  cfg.train.optimizer = {OptimizerKind::Adam, 1e-3};
  cfg.train.checkpoint_every = 250;
  cfg.eval.n_starts = 30;
  return cfg;
}

ExperimentConfig full_scale_config() {
  ExperimentConfig cfg;
  cfg.train_envs = 8;
  cfg.test_envs = 8;
  cfg.train.episodes = 250000;
  cfg.train.checkpoint_every = 5000;
  return cfg;
}

namespace {

std::vector<std::size_t> sizes_from(const json& j) { return j.get<std::vector<std::size_t>>(); }

OptimizerKind optimizer_from(const std::string& s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::Adam;
  throw Error("unknown optimizer '" + s + "'");
}

EnvGroup group_from(const std::string& s) {
  if (s == "A") return EnvGroup::A;
  if (s == "B") return EnvGroup::B;
  throw Error("unknown environment group '" + s + "'");
}

}  // namespace

ExperimentConfig experiment_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    ExperimentConfig cfg = j.value("desk_scale", true) ? desk_scale_config() : full_scale_config();
    cfg.task = j.value("task", cfg.task);
    task_preset(cfg.task);
    if (j.contains("group")) cfg.group = group_from(j["group"].get<std::string>());
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (cfg.seeds.empty()) throw Error("at least one seed is required");
    if (j.contains("episodes")) cfg.train.episodes = j["episodes"].get<std::size_t>();
    cfg.train_envs = j.value("train_envs", cfg.train_envs);
    cfg.test_envs = j.value("test_envs", cfg.test_envs);
    cfg.moving_average_window = j.value("ma_window", cfg.moving_average_window);
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      cfg.dataset.grid_cells = d.value("grid", cfg.dataset.grid_cells);
      cfg.dataset.starts_per_env = d.value("M", cfg.dataset.starts_per_env);
      cfg.dataset.trials = d.value("Z", cfg.dataset.trials);
      cfg.dataset.zeta = d.value("zeta", cfg.dataset.zeta);
    }
    if (j.contains("bias")) {
      const auto& b = j["bias"];
      if (b.contains("hidden")) cfg.bias.hidden = sizes_from(b["hidden"]);
      cfg.bias.epochs = b.value("epochs", cfg.bias.epochs);
      cfg.bias.learning_rate = b.value("lr", cfg.bias.learning_rate);
      cfg.bias.batch_size = b.value("batch", cfg.bias.batch_size);
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      TrainConfig& tc = cfg.train;
      if (t.contains("hidden")) tc.hidden = sizes_from(t["hidden"]);
      if (t.contains("optimizer")) tc.optimizer.kind = optimizer_from(t["optimizer"].get<std::string>());
      tc.optimizer.learning_rate = t.value("lr", tc.optimizer.learning_rate);
      tc.schedule.horizon = t.value("schedule_horizon", tc.schedule.horizon);
      tc.schedule.delta_b0 = t.value("delta_b0", tc.schedule.delta_b0);
      tc.schedule.delta_e0 = t.value("delta_e0", tc.schedule.delta_e0);
      tc.horizon = t.value("horizon", tc.horizon);
      tc.gamma = t.value("gamma", tc.gamma);
      tc.batch_size = t.value("batch", tc.batch_size);
      tc.learning_starts = t.value("learning_starts", tc.learning_starts);
      tc.replay_capacity = t.value("replay", tc.replay_capacity);
      tc.train_every = t.value("train_every", tc.train_every);
      tc.target_sync = t.value("target_sync", tc.target_sync);
      tc.bootstrap_replay = t.value("bootstrap_replay", tc.bootstrap_replay);
      tc.checkpoint_every = t.value("checkpoint_every", tc.checkpoint_every);
      if (t.contains("stop_threshold")) tc.stop_threshold = t["stop_threshold"].get<double>();
    }
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      cfg.eval.n_starts = e.value("n_starts", cfg.eval.n_starts);
      cfg.eval.horizon = e.value("horizon", cfg.eval.horizon);
      cfg.eval.seed = e.value("seed", cfg.eval.seed);
    }
    return cfg;
  } catch (const json::exception& e) {
    throw Error(std::string("invalid experiment JSON: ") + e.what());
  }
}

PreparedExperiment prepare_experiment(const ExperimentConfig& cfg) {
  PreparedExperiment prep{task_preset(cfg.task), compile_task(task_preset(cfg.task)), {}, {}};
  const EnvGroup group = cfg.group.value_or(prep.preset.group);
  const auto regions = default_regions(region_atoms(prep.task.atoms));
  GenerationParams gp;
  gp.grid_cells = cfg.dataset.grid_cells;
  const std::uint64_t base = cfg.seeds.front();
  for (std::size_t i = 0; i < cfg.train_envs + cfg.test_envs; ++i) {
    Environment env = generate_environment(group, derive_seed(base, {0x656e76, i}), regions, gp);
    const bool is_train = i < cfg.train_envs;
    env.id = std::string(is_train ? "train-" : "test-") + std::to_string(is_train ? i : i - cfg.train_envs);
    (is_train ? prep.train_envs : prep.test_envs).push_back(std::move(env));
  }
  return prep;
}

MethodRun run_method(const ExperimentConfig& cfg, const PreparedExperiment& prep, const BiasModel* bias,
                     std::uint64_t seed, const BiasDataset* dataset) {
  MethodRun run;
  run.seed = seed;
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  tc.use_bias = bias != nullptr;
  const CheckpointFn checkpoint = [&](std::size_t episode, const Mlp& qnet) {
    const TrainedPolicy policy(qnet, prep.task.dra);
    run.acc_train.emplace_back(episode, evaluate(policy, prep.train_envs, cfg.eval).accuracy().value_or(0.0));
    run.acc_test.emplace_back(episode, evaluate(policy, prep.test_envs, cfg.eval).accuracy().value_or(0.0));
  };
  run.log = train(tc, prep.task.dra, prep.train_envs, bias, dataset, checkpoint).log;
  return run;
}

namespace {

void write_file(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << text;
}

std::string returns_csv(const std::vector<MethodRun>& runs, std::size_t window) {
  std::ostringstream out;
  out.precision(17);
  out << "seed,episode,return,moving_avg\n";
  for (const auto& r : runs) {
    std::vector<double> g;
    for (const auto& l : r.log) g.push_back(l.discounted_return);
    const auto ma = moving_average(g, window);
    for (std::size_t i = 0; i < g.size(); ++i) out << r.seed << ',' << i << ',' << g[i] << ',' << ma[i] << '\n';
  }
  return out.str();
}

void append_accuracy(std::ostringstream& out, const std::string& method, const std::vector<MethodRun>& runs,
                     bool train_group) {
  for (const auto& r : runs)
    for (const auto& [episode, acc] : train_group ? r.acc_train : r.acc_test)
      out << method << ',' << r.seed << ',' << episode << ',' << acc << '\n';
}

template <typename F>
auto stage(const std::string& name, const StageLog& log, F&& body) {
  if (log) log(name);
  try {
    return body();
  } catch (const std::exception& e) {
    throw Error("stage " + name + " failed: " + e.what());
  }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read " + file.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (first) {
      t.header = cells;
      first = false;
    } else {
      t.rows.push_back(cells);
    }
  }
  return t;
}

std::size_t column(const CsvTable& t, const std::string& name) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw Error("CSV lacks column '" + name + "'");
  return static_cast<std::size_t>(it - t.header.begin());
}

// Mean over seeds of the per-seed moving average, indexed by episode.
Series mean_curve(const CsvTable& t, const std::string& name) {
  const auto ce = column(t, "episode"), cm = column(t, "moving_avg");
  std::vector<double> sum, count;
  for (const auto& r : t.rows) {
    const auto e = std::stoul(r.at(ce));
    if (e >= sum.size()) sum.resize(e + 1, 0.0), count.resize(e + 1, 0.0);
    sum[e] += std::stod(r.at(cm));
    count[e] += 1;
  }
  Series s{name, {}, {}, {}};
  for (std::size_t e = 0; e < sum.size(); ++e) {
    s.x.push_back(static_cast<double>(e));
    s.y.push_back(count[e] > 0 ? sum[e] / count[e] : NAN);
  }
  return s;
}

std::vector<Series> accuracy_curves(const CsvTable& t) {
  const auto cm = column(t, "method"), ce = column(t, "episode"), ca = column(t, "accuracy");
  std::vector<std::string> methods;
  for (const auto& r : t.rows)
    if (std::find(methods.begin(), methods.end(), r.at(cm)) == methods.end()) methods.push_back(r.at(cm));
  std::vector<Series> out;
  for (const auto& m : methods) {
    std::vector<std::pair<double, std::pair<double, double>>> acc;  // episode -> (sum, count)
    for (const auto& r : t.rows) {
      if (r.at(cm) != m) continue;
      const double e = std::stod(r.at(ce));
      auto it = std::find_if(acc.begin(), acc.end(), [&](const auto& a) { return a.first == e; });
      if (it == acc.end()) acc.push_back({e, {0.0, 0.0}}), it = acc.end() - 1;
      it->second.first += std::stod(r.at(ca));
      it->second.second += 1;
    }
    std::sort(acc.begin(), acc.end());
    Series s{m == "ours" ? "Ours" : "DQN (eps-greedy)", {}, {}, {}};
    for (const auto& [e, sc] : acc) {
      s.x.push_back(e);
      s.y.push_back(sc.first / sc.second);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Chart> run_charts(const std::filesystem::path& dir) {
  Chart returns{"Return (moving average)", "episode", "discounted return", {}};
  returns.series.push_back(mean_curve(read_csv(dir / "returns_ours.csv"), "Ours"));
  returns.series.push_back(mean_curve(read_csv(dir / "returns_eps.csv"), "DQN (eps-greedy)"));
  Chart train{"Accuracy, training environments", "episode", "accuracy %", accuracy_curves(read_csv(dir / "acc_train.csv"))};
  Chart test{"Accuracy, unseen environments", "episode", "accuracy %", accuracy_curves(read_csv(dir / "acc_test.csv"))};
  return {returns, train, test};
}

}  // namespace

void run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, const StageLog& log) {
  if (cfg.seeds.empty()) throw Error("at least one seed is required");
  std::filesystem::create_directories(out_dir);

  const PreparedExperiment prep = stage("gen-env", log, [&] {
    PreparedExperiment p = prepare_experiment(cfg);
    for (const char* sub : {"envs/train", "envs/test"}) std::filesystem::create_directories(out_dir / sub);
    for (const auto& e : p.train_envs) save_environment(e, out_dir / "envs/train" / (e.id + ".json"));
    for (const auto& e : p.test_envs) save_environment(e, out_dir / "envs/test" / (e.id + ".json"));
    return p;
  });

  stage("compile-automaton", log, [&] {
    write_file(out_dir / "automaton.hoa", export_hoa(prep.task.dra.dra(), prep.preset.name));
    write_file(out_dir / "automaton.dot", prep.task.dra.dra().to_dot());
    return 0;
  });

  const BiasDataset dataset = stage("gen-dataset", log, [&] {
    DatasetParams dp = cfg.dataset;
    dp.seed = derive_seed(cfg.seeds.front(), {0x6473});
    BiasDataset ds = build_dataset(prep.train_envs, dp);
    save_dataset_csv(ds, out_dir / "dataset.csv");
    return ds;
  });

  const BiasModel bias = stage("train-bias", log, [&] {
    BiasTrainingConfig bc = cfg.bias;
    bc.seed = derive_seed(cfg.seeds.front(), {0x6273});
    BiasTrainingReport report;
    BiasModel model = train_bias_model(dataset, bc, &report);
    model.save(out_dir / "bias.model");
    std::ostringstream csv;
    csv.precision(17);
    csv << "epoch,loss\n0," << report.initial_loss << '\n';
    for (std::size_t i = 0; i < report.epoch_loss.size(); ++i) csv << i + 1 << ',' << report.epoch_loss[i] << '\n';
    write_file(out_dir / "bias_training.csv", csv.str());
    return model;
  });

  std::vector<MethodRun> ours, eps;
  stage("train", log, [&] {
    for (auto seed : cfg.seeds) {
      if (log) log("train ours seed " + std::to_string(seed));
      ours.push_back(run_method(cfg, prep, &bias, seed, &dataset));
      if (log) log("train eps-greedy seed " + std::to_string(seed));
      eps.push_back(run_method(cfg, prep, nullptr, seed, &dataset));
    }
    return 0;
  });

  stage("evaluate", log, [&] {
    write_file(out_dir / "returns_ours.csv", returns_csv(ours, cfg.moving_average_window));
    write_file(out_dir / "returns_eps.csv", returns_csv(eps, cfg.moving_average_window));
    for (bool train_group : {true, false}) {
      std::ostringstream out;
      out.precision(17);
      out << "method,seed,episode,accuracy\n";
      append_accuracy(out, "ours", ours, train_group);
      append_accuracy(out, "eps", eps, train_group);
      write_file(out_dir / (train_group ? "acc_train.csv" : "acc_test.csv"), out.str());
    }
    const auto charts = run_charts(out_dir);
    write_file(out_dir / "returns.svg", render_svg(charts[0]));
    write_file(out_dir / "acc_train.svg", render_svg(charts[1]));
    write_file(out_dir / "acc_test.svg", render_svg(charts[2]));
    return 0;
  });
}

std::string plot_run(const std::filesystem::path& run_dir) {
  return render_svg_row(run_charts(run_dir));
}

}  // namespace ltlrl
