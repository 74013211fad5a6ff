// Microbenchmarks for the hot paths: block forward/backward at the matched
// comparison config, raw matmul, and sampler steps.
#include <benchmark/benchmark.h>

#include "scdiff/baseline.hpp"
#include "scdiff/diffusion.hpp"
#include "scdiff/model.hpp"
#include "scdiff/rng.hpp"
#include "scdiff/tape.hpp"
#include "scdiff/train.hpp"
#include "scdiff/whitebox.hpp"

using namespace scdiff;

namespace {

ModelConfig matched_config(BlockKind kind) {
    ModelConfig cfg;
    cfg.n_genes = 256;
    cfg.patch = 16;
    cfg.dim = 128;
    cfg.depth = 6;
    cfg.heads = 4;
    cfg.subspace = 32;
    cfg.block = kind;
    return cfg;
}

void BM_Matmul(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    Rng rng(1);
    const Matrix a = rng.gaussian_matrix(d, d);
    const Matrix b = rng.gaussian_matrix(d, 16);
    for (auto _ : state) {
        benchmark::DoNotOptimize(matmul(a, b));
    }
    state.SetItemsProcessed(state.iterations() * 2LL * d * d * 16);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(256);

void BM_WhiteboxLayer(benchmark::State& state) {
    Rng rng(2);
    WhiteBoxBlockParams params;
    params.U.resize(4);
    for (auto& u : params.U) u = orthonormal_basis(128, 32, rng);
    params.D = scale(rng.gaussian_matrix(128, 128), 0.125);
    const CodingRateConfig cfg{0.5};
    const Matrix z = rng.gaussian_matrix(128, 16);
    for (auto _ : state) {
        benchmark::DoNotOptimize(whitebox_layer(z, params, cfg));
    }
}
BENCHMARK(BM_WhiteboxLayer);

void BM_BaselineLayer(benchmark::State& state) {
    Rng rng(3);
    BaselineBlockParams params;
    params.heads = 4;
    params.Wq = scale(rng.gaussian_matrix(128, 128), 0.09);
    params.Wk = scale(rng.gaussian_matrix(128, 128), 0.09);
    params.Wv = scale(rng.gaussian_matrix(128, 128), 0.09);
    params.Wo = scale(rng.gaussian_matrix(128, 128), 0.09);
    params.W1 = scale(rng.gaussian_matrix(512, 128), 0.125);
    params.W2 = scale(rng.gaussian_matrix(128, 512), 0.044);
    const Matrix z = rng.gaussian_matrix(128, 16);
    for (auto _ : state) {
        benchmark::DoNotOptimize(baseline_layer(z, params));
    }
}
BENCHMARK(BM_BaselineLayer);

void BM_TrainStep(benchmark::State& state) {
    const BlockKind kind = state.range(0) == 0 ? BlockKind::whitebox : BlockKind::baseline;
    Rng rng(4);
    Model model(matched_config(kind), rng);
    const NoiseSchedule schedule = make_linear_schedule(1000, 1e-4, 0.02);
    Matrix x0(8, 256);
    for (size_t i = 0; i < x0.size(); ++i) x0.data()[i] = 2.0 * rng.uniform() - 1.0;

    Tape tape;
    for (auto _ : state) {
        tape.reset();
        const Model::Binding binding = model.bind(tape);
        Rng draw(5);
        const Tape::NodeId loss = noise_prediction_loss(tape, model, binding, schedule, x0, draw);
        tape.backward(loss);
        benchmark::DoNotOptimize(tape.grad(binding.final_w));
    }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->ArgNames({"block"});

void BM_DdpmSample(benchmark::State& state) {
    Rng rng(6);
    ModelConfig cfg = matched_config(BlockKind::whitebox);
    cfg.n_genes = 32;
    cfg.patch = 4;
    cfg.dim = 32;
    cfg.depth = 2;
    cfg.subspace = 8;
    cfg.schedule_steps = 100;
    Model model(cfg, rng);
    const NoiseSchedule schedule = make_linear_schedule(100, 1e-4, 0.05);
    const NoisePredictor pred = model.predictor();
    uint64_t seed = 0;
    for (auto _ : state) {
        Rng sample_rng(++seed);
        benchmark::DoNotOptimize(ddpm_sample(schedule, pred, 32, 1, sample_rng));
    }
}
BENCHMARK(BM_DdpmSample);

}  // namespace

int main(int argc, char** argv) {
    ::benchmark::Initialize(&argc, argv);
    if (::benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    ::benchmark::RunSpecifiedBenchmarks();
    ::benchmark::Shutdown();
    return 0;
}
