#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ltlrl/automaton.hpp"
#include "ltlrl/bias.hpp"
#include "ltlrl/error.hpp"
#include "ltlrl/harness.hpp"
#include "ltlrl/hoa.hpp"
#include "ltlrl/learner.hpp"
#include "ltlrl/ltl.hpp"
#include "ltlrl/world.hpp"

namespace fs = std::filesystem;
using namespace ltlrl;

namespace {

std::string read_text(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << text;
}

// A file path, or the formula itself.
std::string formula_arg(const std::string& arg) {
  std::error_code ec;
  if (fs::is_regular_file(arg, ec)) return read_text(arg);
  return arg;
}

std::vector<std::string> infer_atoms(const std::string& formula) {
  static const std::set<std::string> keywords{"F", "G", "X", "U", "true", "false"};
  static const std::regex ident("[A-Za-z_][A-Za-z0-9_]*");
  std::vector<std::string> atoms;
  for (auto it = std::sregex_iterator(formula.begin(), formula.end(), ident); it != std::sregex_iterator(); ++it) {
    const std::string s = it->str();
    if (!keywords.count(s) && std::find(atoms.begin(), atoms.end(), s) == atoms.end()) atoms.push_back(s);
  }
  return atoms;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// A preset name, or a task JSON file.
Task load_task(const std::string& arg) {
  for (const auto& p : task_presets())
    if (p.name == arg) return compile_task(p);
  return task_from_json(read_text(arg));
}

std::string distance_text(std::uint32_t d) { return d == kInfiniteDistance ? "inf" : std::to_string(d); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep Q-learning with mission-driven exploration for LTL tasks"};
  app.require_subcommand(1);

  // compile-automaton
  auto* compile = app.add_subcommand("compile-automaton", "Compile an LTL formula to a pruned DRA");
  std::string formula, atoms_arg, hoa_out, dot_out, preset;
  compile->add_option("--formula", formula, "Formula text or a file containing it");
  compile->add_option("--preset", preset, "case1..case4 instead of --formula");
  compile->add_option("--atoms", atoms_arg, "Comma-separated atomic propositions (default: inferred)");
  compile->add_option("--hoa-out", hoa_out, "Write the automaton in HOA format");
  compile->add_option("--dot-out", dot_out, "Write a Graphviz rendering");

  // gen-env
  auto* gen_env = app.add_subcommand("gen-env", "Generate random environments");
  std::string group = "A", env_task = "case1", out_dir;
  std::size_t count = 8;
  std::uint64_t seed = 0;
  gen_env->add_option("--group", group, "A (3-5 obstacles) or B (10-12)")->check(CLI::IsMember({"A", "B"}));
  gen_env->add_option("--count", count, "Number of environments");
  gen_env->add_option("--seed", seed, "Root seed");
  gen_env->add_option("--task", env_task, "Preset whose regions are placed");
  gen_env->add_option("--out", out_dir, "Output directory")->required();

  // gen-dataset
  auto* gen_ds = app.add_subcommand("gen-dataset", "Build the biased-exploration dataset");
  std::string envs_dir, out_file;
  DatasetParams dp;
  gen_ds->add_option("--envs", envs_dir, "Directory of environment JSON files")->required();
  gen_ds->add_option("--grid", dp.grid_cells, "Cells per side");
  gen_ds->add_option("--M", dp.starts_per_env, "Start states per environment");
  gen_ds->add_option("--Z", dp.trials, "Rollouts per (start, action)");
  gen_ds->add_option("--zeta", dp.zeta, "Safety slack");
  gen_ds->add_option("--seed", dp.seed, "Root seed");
  gen_ds->add_option("--out", out_file, "Dataset CSV")->required();

  // train-bias
  auto* train_bias = app.add_subcommand("train-bias", "Train the biased-action classifier");
  std::string data_file, hidden_arg = "2048,1024";
  BiasTrainingConfig bc;
  train_bias->add_option("--data", data_file, "Dataset CSV")->required();
  train_bias->add_option("--epochs", bc.epochs, "Epochs");
  train_bias->add_option("--lr", bc.learning_rate, "Adam learning rate");
  train_bias->add_option("--batch", bc.batch_size, "Mini-batch size");
  train_bias->add_option("--hidden", hidden_arg, "Hidden layer widths, comma-separated");
  train_bias->add_option("--seed", bc.seed, "Seed");
  train_bias->add_option("--out", out_file, "Model file")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a Q-network on the product MDP");
  std::string task_arg, bias_file, q_hidden = "256,256", optimizer = "sgd";
  bool no_bias = false;
  TrainConfig tc;
  train_cmd->add_option("--task", task_arg, "Preset name or task JSON")->required();
  train_cmd->add_option("--envs", envs_dir, "Training environments")->required();
  train_cmd->add_option("--bias", bias_file, "Bias model");
  train_cmd->add_flag("--no-bias", no_bias, "Plain epsilon-greedy baseline");
  train_cmd->add_option("--episodes", tc.episodes, "Episodes");
  train_cmd->add_option("--seed", tc.seed, "Seed");
  train_cmd->add_option("--schedule-horizon", tc.schedule.horizon, "Episodes until delta_b reaches zero");
  train_cmd->add_option("--hidden", q_hidden, "Q-network hidden widths");
  train_cmd->add_option("--optimizer", optimizer, "sgd or adam")->check(CLI::IsMember({"sgd", "adam"}));
  train_cmd->add_option("--lr", tc.optimizer.learning_rate, "Learning rate");
  train_cmd->add_option("--batch", tc.batch_size, "Replay batch size");
  train_cmd->add_option("--train-every", tc.train_every, "Environment steps per gradient step");
  train_cmd->add_option("--target-sync", tc.target_sync, "Frozen target refresh period (0 = off)");
  train_cmd->add_flag("--bootstrap-replay", tc.bootstrap_replay,
                      "Pre-fill replay with transitions from a dataset built on --envs");
  std::size_t bootstrap_starts = 50;
  train_cmd->add_option("--bootstrap-M", bootstrap_starts, "Dataset starts per environment for --bootstrap-replay");
  train_cmd->add_option("--ckpt-every", tc.checkpoint_every, "Checkpoint period in episodes");
  train_cmd->add_option("--out", out_dir, "Run directory")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Greedy test-time accuracy of a policy");
  std::string policy_dir, traces_file;
  EvalConfig ec;
  eval_cmd->add_option("--policy", policy_dir, "Policy or checkpoint directory")->required();
  eval_cmd->add_option("--envs", envs_dir, "Environments")->required();
  eval_cmd->add_option("--n-starts", ec.n_starts, "Initial states per environment");
  eval_cmd->add_option("--horizon", ec.horizon, "Rollout length");
  eval_cmd->add_option("--seed", ec.seed, "Evaluation seed");
  eval_cmd->add_option("--dump-traces", traces_file, "Write every rollout as JSON lines");
  eval_cmd->add_option("--out", out_file, "Report JSON (default: stdout)");

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "Render the three metric panels of a run");
  std::string run_dir;
  plot_cmd->add_option("--run", run_dir, "Experiment directory")->required();
  plot_cmd->add_option("--out", out_file, "SVG file")->required();

  // run
  auto* run_cmd = app.add_subcommand("run", "Full experiment pipeline");
  std::string config_file;
  std::optional<std::uint64_t> run_seed;
  run_cmd->add_option("--config", config_file, "Experiment JSON")->required();
  run_cmd->add_option("--seed", run_seed, "Override the seed list with a single seed");
  run_cmd->add_option("--out", out_dir, "Output directory (default: runs/<task>)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*compile) {
      Task task = [&] {
        if (!preset.empty()) return compile_task(task_preset(preset));
        if (formula.empty()) throw Error("give --formula or --preset");
        const std::string text = formula_arg(formula);
        return compile_task(text, atoms_arg.empty() ? infer_atoms(text) : split_list(atoms_arg));
      }();
      const auto& dra = task.dra;
      std::cout << "formula: " << task.formula.to_string() << "\n"
                << "states: " << dra.num_states() << ", accepting pairs: " << dra.dra().pairs().size() << "\n";
      for (StateId q = 0; q < dra.num_states(); ++q)
        std::cout << "  q" << q << " \"" << dra.dra().state_name(q) << "\" d=" << distance_text(dra.distance(q))
                  << (dra.is_accepting(q) ? " accepting" : "") << (dra.is_deadlock(q) ? " deadlock" : "") << "\n";
      if (!hoa_out.empty()) write_text(hoa_out, export_hoa(dra.dra()));
      if (!dot_out.empty()) write_text(dot_out, dra.dra().to_dot());
    } else if (*gen_env) {
      const TaskPreset& p = task_preset(env_task);
      const auto regions = default_regions(region_atoms(AtomTable(p.atoms)));
      fs::create_directories(out_dir);
      for (std::size_t i = 0; i < count; ++i) {
        Environment env = generate_environment(group == "A" ? EnvGroup::A : EnvGroup::B,
                                               derive_seed(seed, {0x656e76, i}), regions);
        char name[32];
        std::snprintf(name, sizeof name, "env-%03zu", i);
        env.id = name;
        save_environment(env, fs::path(out_dir) / (env.id + ".json"));
        std::cout << env.id << ": " << env.obstacles.size() << " obstacles\n";
      }
    } else if (*gen_ds) {
      const auto envs = load_environments(envs_dir);
      const BiasDataset ds = build_dataset(envs, dp);
      save_dataset_csv(ds, out_file);
      std::cout << ds.points.size() << " datapoints from " << envs.size() << " environments (" << ds.skipped_starts
                << " starts skipped)\n";
    } else if (*train_bias) {
      bc.hidden.clear();
      for (const auto& s : split_list(hidden_arg)) bc.hidden.push_back(std::stoul(s));
      BiasTrainingReport report;
      const BiasModel model = train_bias_model(load_dataset_csv(data_file), bc, &report);
      model.save(out_file);
      std::cout << "initial loss " << report.initial_loss << ", final loss "
                << (report.epoch_loss.empty() ? report.initial_loss : report.epoch_loss.back())
                << ", training accuracy " << 100.0 * report.train_accuracy << "%\n";
    } else if (*train_cmd) {
      const Task task = load_task(task_arg);
      const auto envs = load_environments(envs_dir);
      tc.use_bias = !no_bias;
      tc.hidden.clear();
      for (const auto& s : split_list(q_hidden)) tc.hidden.push_back(std::stoul(s));
      tc.optimizer.kind = optimizer == "adam" ? OptimizerKind::Adam : OptimizerKind::Sgd;
      std::optional<BiasModel> bias;
      if (tc.use_bias) {
        if (bias_file.empty()) throw Error("--bias is required unless --no-bias is given");
        bias = BiasModel::load(bias_file);
      }
      std::optional<BiasDataset> boot;
      if (tc.bootstrap_replay) {
        DatasetParams params;
        params.starts_per_env = bootstrap_starts;
        params.seed = derive_seed(tc.seed, {0x626f6f74});
        boot = build_dataset(envs, params);
      }
      const fs::path out(out_dir);
      fs::create_directories(out);
      const CheckpointFn ckpt = [&](std::size_t episode, const Mlp& qnet) {
        TrainedPolicy(qnet, task.dra).save(out / ("ckpt-" + std::to_string(episode)));
      };
      const TrainingResult result = train(tc, task.dra, envs, bias ? &*bias : nullptr, boot ? &*boot : nullptr, ckpt);
      save_training_log(result.log, out / "train_log.csv");
      TrainedPolicy(result.qnet, task.dra).save(out / "policy");
      std::cout << result.log.size() << " episodes, " << result.gradient_steps << " gradient steps\n";
    } else if (*eval_cmd) {
      const TrainedPolicy policy = TrainedPolicy::load(policy_dir);
      const auto envs = load_environments(envs_dir);
      std::ofstream traces;
      if (!traces_file.empty()) {
        traces.open(traces_file);
        if (!traces) throw Error("cannot write " + traces_file);
        ec.on_trace = [&](std::size_t e, std::size_t i, const EpisodeTrace& t) {
          traces << "{\"env\":" << e << ",\"start\":" << i << "}\n" << trace_to_jsonl(t);
        };
      }
      EvalReport report = evaluate(policy, envs, ec);
      report.checkpoint = policy_dir;
      const std::string json = report_to_json(report);
      if (out_file.empty())
        std::cout << json << "\n";
      else
        write_text(out_file, json + "\n");
    } else if (*plot_cmd) {
      write_text(out_file, plot_run(run_dir));
    } else if (*run_cmd) {
      ExperimentConfig cfg = experiment_from_json(read_text(config_file));
      if (run_seed) cfg.seeds = {*run_seed};
      const fs::path out = out_dir.empty() ? fs::path("runs") / cfg.task : fs::path(out_dir);
      run_experiment(cfg, out, [](const std::string& m) { std::cerr << "[run] " << m << "\n"; });
      std::cout << "artifacts written to " << out.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
