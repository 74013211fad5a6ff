#include "scdiff/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "scdiff/error.hpp"

namespace scdiff {

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("train: learning_rate must be > 0");
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0)
        throw ConfigError("train: adam betas must be in [0, 1)");
    if (adam_eps <= 0.0) throw ConfigError("train: adam_eps must be > 0");
    if (grad_clip < 0.0) throw ConfigError("train: grad_clip must be >= 0");
}

NoisedBatch make_noised_batch(const NoiseSchedule& schedule, const Matrix& x0_rows, Rng& rng) {
    const int batch = x0_rows.rows();
    const int genes = x0_rows.cols();
    if (batch < 1) throw DataError("loss: empty batch");

    NoisedBatch out;
    out.t.reserve(batch);
    out.eps.reserve(batch);
    out.x_t.reserve(batch);
    for (int b = 0; b < batch; ++b) {
        Matrix x0(genes, 1);
        for (int j = 0; j < genes; ++j) x0(j, 0) = x0_rows(b, j);
        const int t = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(schedule.T)));
        Matrix eps = rng.gaussian_matrix(genes, 1);
        out.x_t.push_back(forward_noise(schedule, x0, t, eps));
        out.t.push_back(t);
        out.eps.push_back(std::move(eps));
    }
    return out;
}

double noise_prediction_loss_value(const NoisePredictor& predictor, const NoisedBatch& batch) {
    if (batch.t.empty()) throw DataError("loss: empty batch");
    double total = 0.0;
    size_t coords = 0;
    for (size_t b = 0; b < batch.t.size(); ++b) {
        const Matrix pred = predictor(batch.x_t[b], batch.t[b]);
        if (!pred.same_shape(batch.eps[b])) throw ShapeError("loss: predictor shape mismatch");
        for (size_t i = 0; i < pred.size(); ++i) {
            const double d = batch.eps[b].data()[i] - pred.data()[i];
            total += d * d;
        }
        coords += pred.size();
    }
    return total / static_cast<double>(coords);
}

Tape::NodeId noise_prediction_loss(Tape& tape, const Model& model, const Model::Binding& binding,
                                   const NoisedBatch& batch) {
    if (batch.t.empty()) throw DataError("loss: empty batch");
    const int genes = model.config().n_genes;
    if (batch.eps.front().rows() != genes) throw ShapeError("loss: gene count differs from model");

    Tape::NodeId total = -1;
    for (size_t b = 0; b < batch.t.size(); ++b) {
        const Tape::NodeId pred = model.forward_on_tape(tape, binding, batch.x_t[b], batch.t[b]);
        const Tape::NodeId target = tape.leaf(batch.eps[b]);
        const Tape::NodeId diff = tape.sub(target, pred);
        const Tape::NodeId sq = tape.hadamard(diff, diff);
        const Tape::NodeId s = tape.sum_all(sq);
        total = total < 0 ? s : tape.add(total, s);
    }
    return tape.scale(total, 1.0 / (static_cast<double>(batch.t.size()) * genes));
}

Tape::NodeId noise_prediction_loss(Tape& tape, const Model& model, const Model::Binding& binding,
                                   const NoiseSchedule& schedule, const Matrix& x0_rows,
                                   Rng& rng) {
    if (x0_rows.cols() != model.config().n_genes)
        throw ShapeError("loss: gene count differs from model");
    return noise_prediction_loss(tape, model, binding, make_noised_batch(schedule, x0_rows, rng));
}

void adam_step(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, long step, double lr,
               double beta1, double beta2, double eps_opt) {
    if (!param.same_shape(grad) || !param.same_shape(m) || !param.same_shape(v))
        throw ShapeError("adam_step: shape mismatch");
    if (step < 1) throw ConfigError("adam_step: step must be >= 1");
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (size_t i = 0; i < param.size(); ++i) {
        const double g = grad.data()[i];
        m.data()[i] = beta1 * m.data()[i] + (1.0 - beta1) * g;
        v.data()[i] = beta2 * v.data()[i] + (1.0 - beta2) * g * g;
        const double m_hat = m.data()[i] / bc1;
        const double v_hat = v.data()[i] / bc2;
        param.data()[i] -= lr * m_hat / (std::sqrt(v_hat) + eps_opt);
    }
}

TrainResult train(Model& model, const Matrix& data_rows, const TrainConfig& cfg,
                  const NoiseSchedule& schedule, OptimizerState opt, const CheckpointSink& sink) {
    cfg.validate();
    if (data_rows.rows() < 1) throw DataError("train: empty dataset");
    if (data_rows.cols() != model.config().n_genes)
        throw ShapeError("train: dataset gene count differs from model");

    // Parameter matrices in for_each_param order.
    std::vector<Matrix*> params;
    model.for_each_param([&params](const std::string&, Matrix& m) { params.push_back(&m); });
    if (opt.empty()) {
        for (const Matrix* p : params) {
            opt.m.emplace_back(p->rows(), p->cols());
            opt.v.emplace_back(p->rows(), p->cols());
        }
    } else if (opt.m.size() != params.size()) {
        throw ConfigError("train: optimizer state does not match model");
    }

    Rng rng(cfg.seed);
    TrainResult result;

    std::vector<int> order(data_rows.rows());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    Tape tape;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();

        // Seeded Fisher-Yates shuffle.
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
            const int j = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(i) + 1));
            std::swap(order[i], order[j]);
        }

        double epoch_loss = 0.0;
        int seen = 0;
        const int n = static_cast<int>(order.size());
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int count = std::min(cfg.batch_size, n - start);
            Matrix batch(count, data_rows.cols());
            for (int b = 0; b < count; ++b)
                for (int j = 0; j < data_rows.cols(); ++j)
                    batch(b, j) = data_rows(order[start + b], j);

            tape.reset();
            const Model::Binding binding = model.bind(tape);
            const Tape::NodeId loss = noise_prediction_loss(tape, model, binding, schedule, batch, rng);
            const double loss_value = tape.value(loss)(0, 0);
            if (!std::isfinite(loss_value)) {
                char msg[160];
                std::snprintf(msg, sizeof msg,
                              "train: non-finite loss at epoch %d batch %d (seed %llu)", epoch,
                              start / cfg.batch_size, static_cast<unsigned long long>(cfg.seed));
                throw NumericError(msg);
            }
            tape.backward(loss);

            const std::vector<Tape::NodeId> ids = model.binding_ids(binding);
            double clip_factor = 1.0;
            if (cfg.grad_clip > 0.0) {
                double sq = 0.0;
                for (const Tape::NodeId id : ids) {
                    const Matrix& g = tape.grad(id);
                    for (size_t i = 0; i < g.size(); ++i) sq += g.data()[i] * g.data()[i];
                }
                const double norm = std::sqrt(sq);
                if (norm > cfg.grad_clip) clip_factor = cfg.grad_clip / norm;
            }

            ++opt.step;
            for (size_t i = 0; i < params.size(); ++i) {
                const Matrix& g = tape.grad(ids[i]);
                if (clip_factor != 1.0) {
                    adam_step(*params[i], scale(g, clip_factor), opt.m[i], opt.v[i], opt.step,
                              cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
                } else {
                    adam_step(*params[i], g, opt.m[i], opt.v[i], opt.step, cfg.learning_rate,
                              cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
                }
            }

            epoch_loss += loss_value * count;
            seen += count;
        }

        const auto t1 = std::chrono::steady_clock::now();
        EpochLog entry;
        entry.epoch = epoch;
        entry.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
        entry.loss = epoch_loss / seen;
        result.log.push_back(entry);

        if (sink && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0)
            sink(epoch, model, opt);
    }

    result.opt = std::move(opt);
    return result;
}

void save_train_log(const std::string& path, const std::vector<EpochLog>& log) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "epoch,wall_seconds,loss\n";
    char buf[96];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof buf, "%d,%.6f,%.12g", e.epoch, e.wall_seconds, e.loss);
        out << buf << "\n";
    }
}

}  // namespace scdiff
