#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "scdiff/checkpoint.hpp"
#include "scdiff/diffusion.hpp"
#include "scdiff/model.hpp"
#include "scdiff/rng.hpp"
#include "scdiff/tape.hpp"

namespace scdiff {

struct TrainConfig {
    int epochs = 0;
    int batch_size = 64;
    double learning_rate = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip = 0.0;    // global-norm clip; 0 disables
    int checkpoint_every = 0;  // epochs between checkpoint sink calls; 0 = never
    uint64_t seed = 17;

    void validate() const;
};

/// Per-sample noising draws for one batch: t uniform in [1, T], eps ~ N(0, I),
/// x_t from the closed-form forward noising.
struct NoisedBatch {
    std::vector<int> t;
    std::vector<Matrix> eps;  // genes x 1 per sample
    std::vector<Matrix> x_t;
};

NoisedBatch make_noised_batch(const NoiseSchedule& schedule, const Matrix& x0_rows, Rng& rng);

/// Mean over batch and coordinates of (eps - predictor(x_t, t))^2 for an
/// arbitrary predictor (validation and oracle checks).
double noise_prediction_loss_value(const NoisePredictor& predictor, const NoisedBatch& batch);

/// The same loss built on the tape against the bound model; returns the 1x1
/// loss node.
Tape::NodeId noise_prediction_loss(Tape& tape, const Model& model, const Model::Binding& binding,
                                   const NoisedBatch& batch);

/// Convenience: draw a batch and build its loss in one call.
Tape::NodeId noise_prediction_loss(Tape& tape, const Model& model, const Model::Binding& binding,
                                   const NoiseSchedule& schedule, const Matrix& x0_rows, Rng& rng);

/// Bias-corrected Adam update of one parameter tensor (step is 1-based).
void adam_step(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, long step, double lr,
               double beta1, double beta2, double eps_opt);

struct EpochLog {
    int epoch = 0;
    double wall_seconds = 0.0;
    double loss = 0.0;
};

using CheckpointSink = std::function<void(int epoch, const Model& model, const OptimizerState&)>;

struct TrainResult {
    OptimizerState opt;
    std::vector<EpochLog> log;
};

/// Seeded mini-batch training. The whole trajectory is a deterministic
/// function of (data, configs, seed). A non-finite loss aborts with a
/// diagnostic naming the epoch, batch, and seed.
TrainResult train(Model& model, const Matrix& data_rows, const TrainConfig& cfg,
                  const NoiseSchedule& schedule, OptimizerState opt = {},
                  const CheckpointSink& sink = {});

void save_train_log(const std::string& path, const std::vector<EpochLog>& log);

}  // namespace scdiff
