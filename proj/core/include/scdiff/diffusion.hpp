#pragma once

#include <functional>
#include <vector>

#include "scdiff/matrix.hpp"
#include "scdiff/rng.hpp"

namespace scdiff {

/// Noise predictor: maps (x_t, t) to predicted noise of x_t's shape.
using NoisePredictor = std::function<Matrix(const Matrix& x_t, int t)>;

/// Per-step noise schedule. Steps are 1-based in the API (t in [1, T]);
/// vectors are stored 0-based, so beta[t-1] belongs to step t.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;       // beta_t
    std::vector<double> alpha;      // alpha_t = 1 - beta_t
    std::vector<double> alpha_bar;  // cumulative product of alpha
    std::vector<double> sigma;      // sigma_t, sigma_t^2 = beta_t

    double beta_at(int t) const { return beta[t - 1]; }
    double alpha_at(int t) const { return alpha[t - 1]; }
    double sigma_at(int t) const { return sigma[t - 1]; }
    /// alpha_bar at step t, with the empty-product convention alpha_bar(0) = 1.
    double alpha_bar_at(int t) const { return t == 0 ? 1.0 : alpha_bar[t - 1]; }

    /// Posterior variance of x_{t-1} given (x_t, x_0). Zero at t = 1.
    double beta_tilde(int t) const {
        return (1.0 - alpha_bar_at(t - 1)) / (1.0 - alpha_bar_at(t)) * beta_at(t);
    }

    /// Posterior mean from (x_t, x_0) in the x_0-coefficient form.
    Matrix posterior_mean(const Matrix& x_t, const Matrix& x0, int t) const;

    /// Posterior mean from (x_t, predicted noise) in the epsilon-coefficient form.
    Matrix mean_from_noise(const Matrix& x_t, const Matrix& eps, int t) const;
};

/// Linear beta ramp from beta_start to beta_end inclusive (constant at T = 1).
NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end);

/// Closed-form forward noising: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
Matrix forward_noise(const NoiseSchedule& schedule, const Matrix& x0, int t, const Matrix& eps);

/// One reverse step x_t -> x_{t-1}. The injected noise z is zero at t = 1 so
/// the returned sample is deterministic given the predictor output.
Matrix ddpm_step(const NoiseSchedule& schedule, const NoisePredictor& predictor, const Matrix& x_t,
                 int t, Rng& rng);

/// Full reverse chain from x_T ~ N(0, I).
Matrix ddpm_sample(const NoiseSchedule& schedule, const NoisePredictor& predictor, int rows,
                   int cols, Rng& rng);

/// Uniform-stride timestep subsequence for DDIM, ascending, endpoints 1 and T
/// included (steps >= 2; a single step uses {T}).
std::vector<int> ddim_timesteps(int T, int steps);

/// DDIM noise scale for the jump tau -> tau_prev at a given eta.
double ddim_sigma(const NoiseSchedule& schedule, int tau, int tau_prev, double eta);

/// DDIM sampling over `steps` timesteps. eta = 0 is deterministic in x_T:
/// the rng is never consumed when the noise scale is zero.
Matrix ddim_sample(const NoiseSchedule& schedule, const NoisePredictor& predictor, int rows,
                   int cols, int steps, double eta, Rng& rng);

/// Same chain starting from a caller-provided x_T (determinism checks).
Matrix ddim_sample_from(const NoiseSchedule& schedule, const NoisePredictor& predictor,
                        Matrix x_T, int steps, double eta, Rng& rng);

enum class SamplerKind { ddpm, ddim };

SamplerKind sampler_kind_from_name(const std::string& name);

/// Generate `count` cells of dimension `genes` as rows. Cell i uses an rng
/// derived from (seed, i), so the result is independent of thread count and
/// generation order. threads <= 1 runs serially.
Matrix sample_rows(const NoiseSchedule& schedule, const NoisePredictor& predictor, int genes,
                   int count, SamplerKind sampler, int ddim_steps, double eta, uint64_t seed,
                   int threads);

}  // namespace scdiff
