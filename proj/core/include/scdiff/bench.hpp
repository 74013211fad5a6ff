#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scdiff/model.hpp"
#include "scdiff/train.hpp"

namespace scdiff {

/// Matched white-box vs baseline comparison: same data, seed, architecture
/// skeleton (patch, dim, depth, heads), thread count, and epoch budget.
struct BenchSettings {
    ModelConfig arch;  // block kind is overridden per side
    int epochs = 4;
    int cells = 48;
    int genes = 256;
    int batch = 16;
    int sample_count = 8;
    int ddim_steps = 100;
    int threads = 1;
    uint64_t seed = 17;
};

struct BenchSide {
    std::string kind;
    std::vector<double> epoch_seconds;
    double epoch_mean = 0.0;  // excluding the warm-up epoch
    double epoch_sd = 0.0;
    double final_loss = 0.0;
    int64_t block_params = 0;
    int64_t total_params = 0;
    uint64_t checkpoint_bytes = 0;
    double ddpm_seconds = 0.0;
    double ddim_seconds = 0.0;
};

struct BenchReport {
    BenchSide whitebox;
    BenchSide baseline;
    int threads = 1;
    int epochs = 0;
    uint64_t seed = 0;

    std::string to_text() const;
};

/// Runs both sides and writes a checkpoint per side under out_dir (their
/// byte sizes feed the report).
BenchReport run_bench(const BenchSettings& settings, const std::string& out_dir);

}  // namespace scdiff
