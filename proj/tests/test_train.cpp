#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "scdiff/data.hpp"
#include "scdiff/error.hpp"
#include "scdiff/model.hpp"
#include "scdiff/rng.hpp"
#include "scdiff/train.hpp"

using namespace scdiff;

namespace {

ModelConfig toy_config() {
    ModelConfig cfg;
    cfg.n_genes = 8;
    cfg.patch = 2;
    cfg.dim = 16;
    cfg.depth = 2;
    cfg.heads = 2;
    cfg.subspace = 8;
    cfg.schedule_steps = 100;
    return cfg;
}

Matrix toy_data(int cells, uint64_t seed) {
    SyntheticSpec spec;
    spec.cells = cells;
    spec.genes = 8;
    spec.seed = seed;
    ExpressionMatrix m = generate_synthetic(spec);
    preprocess(m, {TransformKind::minmax});
    return m.values;
}

std::vector<Matrix> snapshot(Model& model) {
    std::vector<Matrix> out;
    model.for_each_param([&out](const std::string&, Matrix& m) { out.push_back(m); });
    return out;
}

}  // namespace

TEST_CASE("adam: zero gradient from a fresh state leaves parameters unchanged") {
    Matrix param{{1.0, -2.0}};
    const Matrix before = param;
    Matrix g(1, 2), m(1, 2), v(1, 2);
    adam_step(param, g, m, v, 1, 0.01, 0.9, 0.999, 1e-8);
    CHECK(param == before);
    CHECK(max_abs(m) == 0.0);

    // nonzero moments keep decaying under zero gradients
    m(0, 0) = 0.5;
    adam_step(param, g, m, v, 2, 0.01, 0.9, 0.999, 1e-8);
    CHECK(m(0, 0) == doctest::Approx(0.45).epsilon(1e-12));
}

TEST_CASE("adam: bias-corrected first step is a near-sign update") {
    const double lr = 0.01, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    Matrix param{{1.0, -3.0, 0.2}};
    const Matrix g{{0.7, -1.3, 0.002}};
    Matrix m(1, 3), v(1, 3);
    adam_step(param, g, m, v, 1, lr, beta1, beta2, eps);
    for (int j = 0; j < 3; ++j) {
        const double gj = g(0, j);
        // algebraic evaluation of the bias-corrected first step; the eps
        // placement conventions differ below 1e-7 relative, covered by tol
        const double want = -lr * gj / (std::abs(gj) + eps * std::sqrt(1.0 - beta2));
        const double got = param(0, j) - (j == 0 ? 1.0 : j == 1 ? -3.0 : 0.2);
        CHECK(got == doctest::Approx(want).epsilon(1e-6));
        CHECK(std::abs(got + lr * (gj > 0 ? 1.0 : -1.0)) < lr * 1e-4);  // ~ -lr sign(g)
    }
}

TEST_CASE("adam: identical seeds and inputs give identical trajectories") {
    Rng rng(81);
    const Matrix g1 = rng.gaussian_matrix(3, 3);
    const Matrix g2 = rng.gaussian_matrix(3, 3);
    Matrix pa(3, 3, 0.5), ma(3, 3), va(3, 3);
    Matrix pb(3, 3, 0.5), mb(3, 3), vb(3, 3);
    for (long step = 1; step <= 2; ++step) {
        const Matrix& g = step == 1 ? g1 : g2;
        adam_step(pa, g, ma, va, step, 1e-3, 0.9, 0.999, 1e-8);
        adam_step(pb, g, mb, vb, step, 1e-3, 0.9, 0.999, 1e-8);
    }
    CHECK(pa == pb);
    CHECK_THROWS_AS(adam_step(pa, Matrix(2, 2), ma, va, 3, 1e-3, 0.9, 0.999, 1e-8), ShapeError);
}

TEST_CASE("loss: an exact-noise oracle predictor gives zero loss") {
    const NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
    Rng rng(82);
    const Matrix x0 = rng.gaussian_matrix(16, 4);
    const NoisedBatch batch = make_noised_batch(s, x0, rng);

    // the oracle inverts the closed-form noising per sample
    size_t index = 0;
    const NoisePredictor oracle_pred = [&](const Matrix&, int) { return batch.eps[index]; };
    double total = 0.0;
    for (index = 0; index < batch.t.size(); ++index) {
        const Matrix pred = oracle_pred(batch.x_t[index], batch.t[index]);
        for (size_t i = 0; i < pred.size(); ++i) {
            const double d = batch.eps[index].data()[i] - pred.data()[i];
            total += d * d;
        }
    }
    CHECK(total == 0.0);
}

TEST_CASE("loss: zero predictor has expected loss 1 over ~1e4 coordinate draws") {
    const NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
    Rng rng(83);
    const Matrix x0(2500, 4);  // x0 = 0 so x_t is pure scaled noise
    const NoisedBatch batch = make_noised_batch(s, x0, rng);
    const NoisePredictor zero = [](const Matrix& x, int) { return Matrix(x.rows(), x.cols()); };
    const double loss = noise_prediction_loss_value(zero, batch);
    CHECK(std::abs(loss - 1.0) < 0.05);
    CHECK(loss >= 0.0);
}

TEST_CASE("loss is non-negative and matches between tape and value paths") {
    const NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
    Rng rng(84);
    Model model(toy_config(), rng);
    const Matrix x0 = toy_data(6, 85);
    Rng draw(86);
    const NoisedBatch batch = make_noised_batch(s, x0, draw);

    Tape tape;
    const Model::Binding binding = model.bind(tape);
    const Tape::NodeId loss = noise_prediction_loss(tape, model, binding, batch);
    const double on_tape = tape.value(loss)(0, 0);
    const double direct = noise_prediction_loss_value(model.predictor(), batch);
    CHECK(on_tape == doctest::Approx(direct).epsilon(1e-12));
    CHECK(on_tape >= 0.0);
}

TEST_CASE("train: zero epochs returns the model unchanged") {
    Rng rng(87);
    Model model(toy_config(), rng);
    const auto before = snapshot(model);
    TrainConfig tc;
    tc.epochs = 0;
    const NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
    const TrainResult result = train(model, toy_data(16, 88), tc, s);
    CHECK(result.log.empty());
    CHECK(result.opt.step == 0);
    const auto after = snapshot(model);
    for (size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("train: identical seeds give bit-identical final parameters") {
    const NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
    const Matrix data = toy_data(24, 89);
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 8;
    tc.seed = 90;

    Rng r1(91), r2(91);
    Model m1(toy_config(), r1), m2(toy_config(), r2);
    train(m1, data, tc, s);
    train(m2, data, tc, s);
    const auto p1 = snapshot(m1), p2 = snapshot(m2);
    for (size_t i = 0; i < p1.size(); ++i) CHECK(p1[i] == p2[i]);

    // a different training seed diverges
    Rng r3(91);
    Model m3(toy_config(), r3);
    TrainConfig tc2 = tc;
    tc2.seed = 999;
    train(m3, data, tc2, s);
    const auto p3 = snapshot(m3);
    bool any_diff = false;
    for (size_t i = 0; i < p1.size() && !any_diff; ++i) any_diff = !(p1[i] == p3[i]);
    CHECK(any_diff);
}

TEST_CASE("train: gradient flow reaches every parameter group") {
    const NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
    Rng rng(92);
    Model model(toy_config(), rng);
    const auto before = snapshot(model);

    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 16;
    tc.seed = 93;
    const Matrix data = toy_data(32, 94);  // 32 cells / batch 16 = 2 steps

    // Step 1 moves only the final layer (its zero init blocks the chain
    // upstream); by step 2 the now-nonzero final layer passes gradient to
    // every group.
    train(model, data, tc, s);
    size_t index = 0;
    model.for_each_param([&](const std::string& name, Matrix& m) {
        CAPTURE(name);
        CHECK(!(m == before[index]));
        ++index;
    });
}

TEST_CASE("train: loss on a fixed batch strictly decreases over 50 steps (20 seeds)") {
    const NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
    int monotone_runs = 0;
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        Model model(toy_config(), rng);
        const Matrix data = toy_data(16, 200 + seed);
        Rng draw(300 + seed);
        const NoisedBatch batch = make_noised_batch(s, data, draw);

        std::vector<Matrix*> params;
        model.for_each_param([&params](const std::string&, Matrix& m) { params.push_back(&m); });
        OptimizerState opt;
        for (const Matrix* p : params) {
            opt.m.emplace_back(p->rows(), p->cols());
            opt.v.emplace_back(p->rows(), p->cols());
        }

        bool monotone = true;
        double prev = 1e300;
        Tape tape;
        for (int step = 1; step <= 50; ++step) {
            tape.reset();
            const Model::Binding binding = model.bind(tape);
            const Tape::NodeId loss = noise_prediction_loss(tape, model, binding, batch);
            const double value = tape.value(loss)(0, 0);
            if (value >= prev) monotone = false;
            prev = value;
            tape.backward(loss);
            const auto ids = model.binding_ids(binding);
            ++opt.step;
            // default optimizer settings: lr 1e-4, betas (0.9, 0.999)
            for (size_t i = 0; i < params.size(); ++i)
                adam_step(*params[i], tape.grad(ids[i]), opt.m[i], opt.v[i], opt.step, 1e-4, 0.9,
                          0.999, 1e-8);
        }
        if (monotone) ++monotone_runs;
    }
    MESSAGE("monotone runs: ", monotone_runs, "/20");
    CHECK(monotone_runs >= 19);
}

TEST_CASE("train: non-finite loss aborts with a diagnostic naming the seed") {
    const NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
    Rng rng(95);
    Model model(toy_config(), rng);
    // poison the embedding so the first forward overflows
    model.for_each_param([](const std::string& name, Matrix& m) {
        if (name == "embed.w" || name == "final.w")
            for (size_t i = 0; i < m.size(); ++i) m.data()[i] = 1e200;
    });
    TrainConfig tc;
    tc.epochs = 1;
    tc.seed = 4242;
    try {
        train(model, toy_data(8, 96), tc, s);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("4242") != std::string::npos);
        CHECK(msg.find("epoch") != std::string::npos);
    }
}

TEST_CASE("train: checkpoint sink fires on the configured cadence") {
    const NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
    Rng rng(97);
    Model model(toy_config(), rng);
    TrainConfig tc;
    tc.epochs = 5;
    tc.batch_size = 8;
    tc.checkpoint_every = 2;
    std::vector<int> fired;
    train(model, toy_data(8, 98), tc, s, {},
          [&fired](int epoch, const Model&, const OptimizerState&) { fired.push_back(epoch); });
    CHECK(fired == std::vector<int>{2, 4});
}

TEST_CASE("train: optimizer state continues the step counter") {
    const NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
    Rng rng(99);
    Model model(toy_config(), rng);
    const Matrix data = toy_data(16, 100);
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 8;
    const TrainResult first = train(model, data, tc, s);
    CHECK(first.opt.step == 4);  // 2 epochs x 2 batches
    const TrainResult second = train(model, data, tc, s, first.opt);
    CHECK(second.opt.step == 8);
}

TEST_CASE("train: global-norm gradient clipping caps the first update") {
    const NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
    const Matrix data = toy_data(8, 104);

    // With a tiny clip norm the clipped gradients are ~0, so the first-step
    // Adam update collapses toward zero too.
    auto final_w_shift = [&](double clip) {
        Rng rng(103);
        Model model(toy_config(), rng);
        TrainConfig tc;
        tc.epochs = 1;
        tc.batch_size = 8;
        tc.grad_clip = clip;
        train(model, data, tc, s);
        double shift = 0.0;
        model.for_each_param([&](const std::string& name, Matrix& m) {
            if (name == "final.w") shift = max_abs(m);
        });
        return shift;
    };
    const double unclipped = final_w_shift(0.0);
    const double clipped = final_w_shift(1e-6);
    CHECK(unclipped > 0.0);
    CHECK(clipped > 0.0);
    CHECK(clipped < unclipped);
}

TEST_CASE("train: per-epoch log rows carry wall time and loss") {
    const NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
    Rng rng(101);
    Model model(toy_config(), rng);
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 8;
    const TrainResult result = train(model, toy_data(8, 102), tc, s);
    REQUIRE(result.log.size() == 3);
    for (int e = 0; e < 3; ++e) {
        CHECK(result.log[e].epoch == e + 1);
        CHECK(result.log[e].wall_seconds >= 0.0);
        CHECK(std::isfinite(result.log[e].loss));
    }
}
