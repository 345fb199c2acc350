// Microbenchmarks for the hot paths: taped network passes, the plain
// forward pass used during rollouts, environment stepping, and replay
// sampling.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dse/cartpole.hpp"
#include "dse/mlp.hpp"
#include "dse/params.hpp"
#include "dse/reacher.hpp"
#include "dse/replay.hpp"
#include "dse/rng.hpp"
#include "dse/tape.hpp"

namespace {

dse::MlpSpec bench_spec(int in, int hidden, int out) {
  dse::MlpSpec spec;
  spec.input_dim = in;
  spec.hidden = {{hidden, dse::Activation::kTanh}};
  spec.output_dim = out;
  return spec;
}

void BM_MlpForwardPlain(benchmark::State& state) {
  const auto spec = bench_spec(8, static_cast<int>(state.range(0)), 4);
  dse::ParamVector pv;
  std::mt19937_64 rng(1);
  dse::init_mlp_params(spec, pv, rng);
  std::vector<double> input(8, 0.3);
  dse::MlpScratch scratch;
  for (auto _ : state) {
    auto out = scratch.forward(spec, pv, input);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_MlpForwardPlain)->Arg(32)->Arg(100);

void BM_MlpTapedBackward(benchmark::State& state) {
  const auto spec = bench_spec(8, static_cast<int>(state.range(0)), 4);
  dse::ParamVector pv;
  std::mt19937_64 rng(1);
  dse::init_mlp_params(spec, pv, rng);
  for (auto _ : state) {
    dse::Tape tape;
    auto bound = dse::bind(tape, pv);
    std::vector<dse::Var> input;
    for (int k = 0; k < 8; ++k) input.push_back(tape.leaf(0.3));
    auto out = dse::mlp_forward_taped(spec, tape, bound, input);
    dse::Var loss = tape.sum(out);
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad(out[0]));
  }
}
BENCHMARK(BM_MlpTapedBackward)->Arg(32)->Arg(100);

void BM_CartpoleEpisode(benchmark::State& state) {
  dse::CartpoleEnv env(1.0, 0.0);
  for (auto _ : state) {
    env.reset(7);
    bool done = false;
    int a = 0;
    double total = 0.0;
    while (!done) {
      auto r = env.step(a);
      a = 1 - a;
      total += r.reward;
      done = r.done;
    }
    benchmark::DoNotOptimize(total);
  }
}
BENCHMARK(BM_CartpoleEpisode);

void BM_ReacherStep(benchmark::State& state) {
  dse::ReacherEnv env(0.1, 0.1, 0.1, 0.05);
  env.reset(3);
  const std::vector<double> torque{0.4, -0.2};
  int steps = 0;
  for (auto _ : state) {
    auto r = env.step(std::span<const double>(torque));
    if (r.done) env.reset(++steps);
    benchmark::DoNotOptimize(r.reward);
  }
}
BENCHMARK(BM_ReacherStep);

void BM_ReplaySample(benchmark::State& state) {
  dse::ReplayMemory replay(100000);
  dse::Transition t;
  t.s = {0.1, 0.2, 0.3, 0.4};
  t.a = {0.5};
  t.s_next = t.s;
  for (int k = 0; k < 100000; ++k) {
    t.reward = k;
    replay.push(t);
  }
  auto rng = dse::make_stream(5, 0, 0, 0, dse::RngPurpose::kReplay);
  for (auto _ : state) {
    auto idx = replay.sample_indices(128, rng);
    benchmark::DoNotOptimize(idx.data());
  }
}
BENCHMARK(BM_ReplaySample);

}  // namespace

BENCHMARK_MAIN();
