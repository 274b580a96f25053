// Serial reference vs OpenMP kernels on the workloads the experiments use.
#include <benchmark/benchmark.h>

#include "nncalc/kernels.hpp"
#include "nncalc/parallel.hpp"
#include "nncalc/states.hpp"

using namespace nncalc;

namespace {

const Dataset& data() {
    static const Dataset d = [] {
        DatasetSpec s;
        s.pattern = Pattern::spiral;
        s.npts = 5000;
        s.noise = 0.2;
        return generate(s);
    }();
    return d;
}

const Network& net() {
    static const Network n = init_network(NetworkConfig{}, 1);
    return n;
}

const FeatureSelection kSel = FeatureSelection::default_set();

template <class Fn>
void run_points(benchmark::State& state, Fn fn) {
    const auto pts = data().all_points();
    for (auto _ : state) benchmark::DoNotOptimize(fn(net(), pts, kSel));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pts.size()));
}

void BM_EvaluateSerial(benchmark::State& s) { run_points(s, serial::evaluate); }
void BM_EvaluateOmp(benchmark::State& s) { run_points(s, omp::evaluate); }
void BM_CaptureSerial(benchmark::State& s) { run_points(s, serial::capture_states); }
void BM_CaptureOmp(benchmark::State& s) { run_points(s, omp::capture_states); }

void BM_GridSerial(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(serial::predict_grid(net(), kSel, 100));
}
void BM_GridOmp(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(omp::predict_grid(net(), kSel, 100));
}

// Independent short trainings, the unit of work in the experiment drivers.
auto short_training = [](std::size_t i) {
    DatasetSpec s;
    s.npts = 200;
    s.seed = i;
    TrainingParams p;
    p.epochs = 10;
    p.seed = i;
    return train(init_network(NetworkConfig{}, i), generate(s), kSel, p).metrics.epochs.back().train_mse;
};

void BM_TrialsSerial(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(serial::run_trials(8, short_training));
}
void BM_TrialsOmp(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(omp::run_trials(8, short_training));
}

}  // namespace

BENCHMARK(BM_EvaluateSerial);
BENCHMARK(BM_EvaluateOmp);
BENCHMARK(BM_CaptureSerial);
BENCHMARK(BM_CaptureOmp);
BENCHMARK(BM_GridSerial);
BENCHMARK(BM_GridOmp);
BENCHMARK(BM_TrialsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrialsOmp)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
