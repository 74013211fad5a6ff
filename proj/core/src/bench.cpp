#include "scdiff/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "scdiff/checkpoint.hpp"
#include "scdiff/data.hpp"
#include "scdiff/error.hpp"

namespace scdiff {

namespace {

BenchSide run_side(BlockKind kind, const BenchSettings& settings, const Matrix& data,
                   const std::vector<TransformStep>& transforms,
                   const std::vector<std::string>& gene_names, const std::string& out_dir) {
    BenchSide side;
    side.kind = block_kind_name(kind);

    ModelConfig cfg = settings.arch;
    cfg.block = kind;
    cfg.n_genes = settings.genes;
    cfg.validate();

    Rng init_rng(settings.seed);
    Model model(cfg, init_rng);
    side.block_params = model.block_parameter_count();
    side.total_params = model.total_parameter_count();

    TrainConfig tc;
    tc.epochs = settings.epochs;
    tc.batch_size = settings.batch;
    tc.seed = settings.seed;
    const NoiseSchedule schedule =
        make_linear_schedule(cfg.schedule_steps, cfg.beta_start, cfg.beta_end);
    const TrainResult result = train(model, data, tc, schedule);
    if (!result.log.empty()) side.final_loss = result.log.back().loss;

    for (const auto& e : result.log) side.epoch_seconds.push_back(e.wall_seconds);
    // First-epoch allocation noise is excluded from the mean.
    if (side.epoch_seconds.size() > 1) {
        double mean = 0.0;
        const size_t n = side.epoch_seconds.size() - 1;
        for (size_t i = 1; i < side.epoch_seconds.size(); ++i) mean += side.epoch_seconds[i];
        mean /= n;
        double var = 0.0;
        for (size_t i = 1; i < side.epoch_seconds.size(); ++i) {
            const double d = side.epoch_seconds[i] - mean;
            var += d * d;
        }
        side.epoch_mean = mean;
        side.epoch_sd = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    } else if (!side.epoch_seconds.empty()) {
        side.epoch_mean = side.epoch_seconds.front();
    }

    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.model = model;
    ckpt.opt = result.opt;
    ckpt.transforms = transforms;
    ckpt.gene_names = gene_names;
    const std::string path = out_dir + "/" + side.kind + ".ckpt";
    save_checkpoint(path, ckpt);
    side.checkpoint_bytes = static_cast<uint64_t>(std::filesystem::file_size(path));

    const NoisePredictor predictor = model.predictor();
    {
        const auto t0 = std::chrono::steady_clock::now();
        sample_rows(schedule, predictor, settings.genes, settings.sample_count, SamplerKind::ddpm,
                    0, 0.0, settings.seed + 1, settings.threads);
        side.ddpm_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    {
        const auto t0 = std::chrono::steady_clock::now();
        sample_rows(schedule, predictor, settings.genes, settings.sample_count, SamplerKind::ddim,
                    settings.ddim_steps, 0.0, settings.seed + 1, settings.threads);
        side.ddim_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return side;
}

void print_side(std::ostringstream& os, const BenchSide& s) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "%s.epoch_mean_s=%.6f\n%s.epoch_sd_s=%.6f\n%s.block_params=%lld\n"
                  "%s.total_params=%lld\n%s.checkpoint_bytes=%llu\n%s.ddpm_s=%.6f\n"
                  "%s.ddim_s=%.6f\n%s.final_loss=%.9g\n",
                  s.kind.c_str(), s.epoch_mean, s.kind.c_str(), s.epoch_sd, s.kind.c_str(),
                  static_cast<long long>(s.block_params), s.kind.c_str(),
                  static_cast<long long>(s.total_params), s.kind.c_str(),
                  static_cast<unsigned long long>(s.checkpoint_bytes), s.kind.c_str(),
                  s.ddpm_seconds, s.kind.c_str(), s.ddim_seconds, s.kind.c_str(), s.final_loss);
    os << buf;
}

}  // namespace

std::string BenchReport::to_text() const {
    std::ostringstream os;
    os << "threads=" << threads << "\n";
    os << "epochs=" << epochs << "\n";
    os << "seed=" << seed << "\n";
    print_side(os, whitebox);
    print_side(os, baseline);
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch_time_ratio=%.6f\nparam_ratio=%.6f\ncheckpoint_ratio=%.6f\n",
                  baseline.epoch_mean > 0 ? whitebox.epoch_mean / baseline.epoch_mean : 0.0,
                  baseline.block_params > 0
                      ? static_cast<double>(whitebox.block_params) / baseline.block_params
                      : 0.0,
                  baseline.checkpoint_bytes > 0
                      ? static_cast<double>(whitebox.checkpoint_bytes) / baseline.checkpoint_bytes
                      : 0.0);
    os << buf;
    return os.str();
}

BenchReport run_bench(const BenchSettings& settings, const std::string& out_dir) {
    if (settings.epochs < 2) throw ConfigError("bench: need >= 2 epochs (warm-up is excluded)");
    std::filesystem::create_directories(out_dir);

    SyntheticSpec spec;
    spec.kind = MixtureKind::gaussian;
    spec.components = 2;
    spec.genes = settings.genes;
    spec.cells = settings.cells;
    spec.seed = settings.seed;
    ExpressionMatrix data = generate_synthetic(spec);
    preprocess(data, {TransformKind::minmax});

    BenchReport report;
    report.threads = settings.threads;
    report.epochs = settings.epochs;
    report.seed = settings.seed;
    report.whitebox = run_side(BlockKind::whitebox, settings, data.values, data.transform_record,
                               data.gene_names, out_dir);
    report.baseline = run_side(BlockKind::baseline, settings, data.values, data.transform_record,
                               data.gene_names, out_dir);
    return report;
}

}  // namespace scdiff
