#include "scdiff/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "scdiff/error.hpp"

namespace scdiff {

namespace {

void require_step(const NoiseSchedule& s, int t) {
    if (t < 1 || t > s.T) {
        throw ShapeError("schedule: step " + std::to_string(t) + " outside [1, " + std::to_string(s.T) + "]");
    }
}

Matrix predict_checked(const NoisePredictor& predictor, const Matrix& x, int t) {
    Matrix eps = predictor(x, t);
    if (!eps.same_shape(x)) throw ShapeError("predictor: output shape differs from input");
    return eps;
}

}  // namespace

Matrix NoiseSchedule::posterior_mean(const Matrix& x_t, const Matrix& x0, int t) const {
    const double abar = alpha_bar_at(t);
    const double abar_prev = alpha_bar_at(t - 1);
    const double c0 = std::sqrt(abar_prev) * beta_at(t) / (1.0 - abar);
    const double ct = std::sqrt(alpha_at(t)) * (1.0 - abar_prev) / (1.0 - abar);
    return add(scale(x0, c0), scale(x_t, ct));
}

Matrix NoiseSchedule::mean_from_noise(const Matrix& x_t, const Matrix& eps, int t) const {
    const double a = alpha_at(t);
    const double abar = alpha_bar_at(t);
    const double coef = (1.0 - a) / std::sqrt(1.0 - abar);
    return scale(sub(x_t, scale(eps, coef)), 1.0 / std::sqrt(a));
}

NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw ConfigError("schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw ConfigError("schedule: need 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.T = T;
    s.beta.resize(T);
    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    s.sigma.resize(T);
    double prod = 1.0;
    for (int i = 0; i < T; ++i) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(i) / (T - 1);
        s.beta[i] = beta_start + frac * (beta_end - beta_start);
        s.alpha[i] = 1.0 - s.beta[i];
        prod *= s.alpha[i];
        s.alpha_bar[i] = prod;
        s.sigma[i] = std::sqrt(s.beta[i]);
    }
    return s;
}

Matrix forward_noise(const NoiseSchedule& schedule, const Matrix& x0, int t, const Matrix& eps) {
    require_step(schedule, t);
    if (!eps.same_shape(x0)) throw ShapeError("forward_noise: eps shape differs from x0");
    const double abar = schedule.alpha_bar_at(t);
    return add(scale(x0, std::sqrt(abar)), scale(eps, std::sqrt(1.0 - abar)));
}

Matrix ddpm_step(const NoiseSchedule& schedule, const NoisePredictor& predictor, const Matrix& x_t,
                 int t, Rng& rng) {
    require_step(schedule, t);
    const Matrix eps = predict_checked(predictor, x_t, t);
    Matrix mean = schedule.mean_from_noise(x_t, eps, t);
    if (t == 1) return mean;  // final step is deterministic
    Matrix z = rng.gaussian_matrix(x_t.rows(), x_t.cols());
    return add(std::move(mean), scale(z, schedule.sigma_at(t)));
}

Matrix ddpm_sample(const NoiseSchedule& schedule, const NoisePredictor& predictor, int rows,
                   int cols, Rng& rng) {
    Matrix x = rng.gaussian_matrix(rows, cols);
    for (int t = schedule.T; t >= 1; --t) x = ddpm_step(schedule, predictor, x, t, rng);
    return x;
}

std::vector<int> ddim_timesteps(int T, int steps) {
    if (steps < 1 || steps > T) throw ConfigError("ddim: steps must be in [1, T]");
    if (steps == 1) return {T};
    std::vector<int> taus(steps);
    for (int i = 0; i < steps; ++i) {
        const double pos = 1.0 + static_cast<double>(i) * (T - 1) / (steps - 1);
        taus[i] = static_cast<int>(std::lround(pos));
    }
    taus.front() = 1;
    taus.back() = T;
    return taus;  // strictly increasing since steps <= T
}

double ddim_sigma(const NoiseSchedule& schedule, int tau, int tau_prev, double eta) {
    const double abar = schedule.alpha_bar_at(tau);
    const double abar_prev = schedule.alpha_bar_at(tau_prev);
    return eta * std::sqrt((1.0 - abar_prev) / (1.0 - abar)) * std::sqrt(1.0 - abar / abar_prev);
}

Matrix ddim_sample_from(const NoiseSchedule& schedule, const NoisePredictor& predictor,
                        Matrix x_T, int steps, double eta, Rng& rng) {
    if (eta < 0.0 || eta > 1.0) throw ConfigError("ddim: eta must be in [0, 1]");
    const std::vector<int> taus = ddim_timesteps(schedule.T, steps);
    Matrix x = std::move(x_T);
    for (int i = static_cast<int>(taus.size()) - 1; i >= 0; --i) {
        const int tau = taus[i];
        const int tau_prev = i > 0 ? taus[i - 1] : 0;  // alpha_bar(0) = 1 ends the chain
        const double abar = schedule.alpha_bar_at(tau);
        const double abar_prev = schedule.alpha_bar_at(tau_prev);

        const Matrix eps = predict_checked(predictor, x, tau);
        // x0 prediction, then jump to tau_prev.
        Matrix x0_hat = scale(sub(x, scale(eps, std::sqrt(1.0 - abar))), 1.0 / std::sqrt(abar));
        const double sigma = ddim_sigma(schedule, tau, tau_prev, eta);
        const double dir_coef = std::sqrt(std::max(0.0, 1.0 - abar_prev - sigma * sigma));
        x = add(scale(std::move(x0_hat), std::sqrt(abar_prev)), scale(eps, dir_coef));
        if (sigma > 0.0) {
            x = add(std::move(x), scale(rng.gaussian_matrix(x.rows(), x.cols()), sigma));
        }
    }
    return x;
}

Matrix ddim_sample(const NoiseSchedule& schedule, const NoisePredictor& predictor, int rows,
                   int cols, int steps, double eta, Rng& rng) {
    Matrix x_T = rng.gaussian_matrix(rows, cols);
    return ddim_sample_from(schedule, predictor, std::move(x_T), steps, eta, rng);
}

SamplerKind sampler_kind_from_name(const std::string& name) {
    if (name == "ddpm") return SamplerKind::ddpm;
    if (name == "ddim") return SamplerKind::ddim;
    throw ConfigError("unknown sampler: " + name);
}

Matrix sample_rows(const NoiseSchedule& schedule, const NoisePredictor& predictor, int genes,
                   int count, SamplerKind sampler, int ddim_steps, double eta, uint64_t seed,
                   int threads) {
    if (count < 1) throw ConfigError("sample_rows: count must be >= 1");
    Matrix out(count, genes);
    const Rng base(seed);

    auto generate = [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            Rng cell_rng = base.derive(static_cast<uint64_t>(i));
            Matrix x = sampler == SamplerKind::ddpm
                           ? ddpm_sample(schedule, predictor, genes, 1, cell_rng)
                           : ddim_sample(schedule, predictor, genes, 1, ddim_steps, eta, cell_rng);
            for (int j = 0; j < genes; ++j) out(i, j) = x(j, 0);
        }
    };

    if (threads <= 1 || count == 1) {
        generate(0, count);
        return out;
    }
    const int workers = std::min(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const int chunk = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int begin = w * chunk;
        const int end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back(generate, begin, end);
    }
    for (auto& t : pool) t.join();
    return out;
}

}  // namespace scdiff
