#include <benchmark/benchmark.h>

#include "ltlrl/bias.hpp"
#include "ltlrl/harness.hpp"
#include "ltlrl/learner.hpp"

using namespace ltlrl;

namespace {

const Environment& bench_env() {
  static const Environment env = generate_environment(EnvGroup::B, 7, default_regions({"r1", "r2", "r3", "r4"}));
  return env;
}

void BM_CompileDra(benchmark::State& state) {
  const auto& preset = task_presets()[static_cast<std::size_t>(state.range(0))];
  for (auto _ : state) benchmark::DoNotOptimize(compile_task(preset));
  state.SetLabel(preset.name);
}
BENCHMARK(BM_CompileDra)->DenseRange(0, 3);

void BM_DraStep(benchmark::State& state) {
  const Task task = compile_task(task_preset("case4"));
  const auto& dra = task.dra;
  const auto& letters = dra.feasible_symbols();
  StateId q = dra.initial();
  std::size_t i = 0;
  for (auto _ : state) {
    q = dra.step(q, letters[i++ % letters.size()]);
    benchmark::DoNotOptimize(q);
  }
}
BENCHMARK(BM_DraStep);

void BM_StepDynamics(benchmark::State& state) {
  const auto& env = bench_env();
  Rng rng(1);
  AgentState x{5, 5, 0};
  std::size_t a = 0;
  for (auto _ : state) {
    x = step_dynamics(env, x, a++ % kNumActions, rng);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_StepDynamics);

void BM_Features(benchmark::State& state) {
  const auto& env = bench_env();
  const AgentState x{4, 6, 0.3};
  for (auto _ : state) benchmark::DoNotOptimize(features(env, x));
}
BENCHMARK(BM_Features);

void BM_GridGraph(benchmark::State& state) {
  const auto& env = bench_env();
  const int m = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(GridGraph(env, m));
}
BENCHMARK(BM_GridGraph)->Arg(12)->Arg(24)->Unit(benchmark::kMillisecond);

void BM_DatasetStart(benchmark::State& state) {
  DatasetParams params;
  params.starts_per_env = 1;
  const std::vector<Environment> envs{bench_env()};
  for (auto _ : state) benchmark::DoNotOptimize(build_dataset(envs, params));
}
BENCHMARK(BM_DatasetStart)->Unit(benchmark::kMillisecond);

void BM_MlpForward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  const Mlp net = Mlp::init({16, width, width / 2, 23}, Head::Linear, 1);
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(16);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_MlpForward)->Arg(128)->Arg(256)->Arg(2048);

void BM_TdStep(benchmark::State& state) {
  const auto batch_size = static_cast<Eigen::Index>(state.range(0));
  Mlp net = Mlp::init({16, 128, 64, 23}, Head::Linear, 1);
  Batch b;
  b.inputs = Eigen::MatrixXd::Random(16, batch_size);
  b.target = Eigen::VectorXd::Random(batch_size);
  for (Eigen::Index i = 0; i < batch_size; ++i) b.index.push_back(static_cast<std::size_t>(i) % 23);
  Optimizer opt({OptimizerKind::Adam, 1e-4});
  for (auto _ : state) benchmark::DoNotOptimize(backward_and_step(net, b, Loss::TdMse, opt));
  state.SetItemsProcessed(state.iterations() * batch_size);
}
BENCHMARK(BM_TdStep)->Arg(32)->Arg(64);

void BM_SampleAction(benchmark::State& state) {
  const Task task = compile_task(task_preset("case1"));
  const auto nq = task.dra.num_states();
  const Mlp q = make_q_network(nq, {128, 64}, 1);
  const BiasModel bias(Mlp::init({9, 128, 64, 23}, Head::Softmax, 2));
  const FeatureVector psi = features(bench_env(), {4, 6, 0.3});
  Rng rng(3);
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_action(q, &bias, psi, 0, nq, Vec2{3, 3}, {1.0, 0.5, 0.5}, rng));
}
BENCHMARK(BM_SampleAction);

}  // namespace

BENCHMARK_MAIN();
