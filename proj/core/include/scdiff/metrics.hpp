#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scdiff/data.hpp"
#include "scdiff/matrix.hpp"

namespace scdiff {

/// Similarity metrics between two sample sets plus the estimator settings
/// used to produce them. mmd is sqrt(max(0, MMD^2)); the raw unbiased MMD^2
/// (which can dip below zero) is kept alongside.
struct MetricReport {
    double kl = 0.0;
    double wasserstein = 0.0;
    double mmd = 0.0;
    double mmd_sq_raw = 0.0;
    int bins = 50;
    double bandwidth = 0.0;
    uint64_t seed = 0;

    /// Flat key=value block.
    std::string to_text() const;
};

/// Mean over genes of the per-gene histogram KL(real || gen). Both samples
/// share `bins` equal-width bins on their union range, with one pseudocount
/// added to every bin.
double kl_divergence(const Matrix& real_rows, const Matrix& gen_rows, int bins);

/// Mean over genes of the exact per-gene 1-D W1 distance (quantile-function
/// integral; reduces to the mean |sorted difference| at equal sizes).
double wasserstein_distance(const Matrix& real_rows, const Matrix& gen_rows);

/// Exact W1 between two 1-D samples (any sizes).
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

struct MmdResult {
    double value = 0.0;        // sqrt(max(0, sq_unbiased))
    double sq_unbiased = 0.0;  // raw unbiased MMD^2
    double bandwidth = 0.0;    // kernel width actually used
};

/// Unbiased Gaussian-kernel MMD^2 over whole cell rows. bandwidth <= 0
/// selects the median pairwise distance of the pooled sample.
MmdResult mmd(const Matrix& real_rows, const Matrix& gen_rows, double bandwidth = 0.0);

/// Biased V-statistic variant; exactly 0 when both sets are the same rows.
double mmd_biased_sq(const Matrix& a_rows, const Matrix& b_rows, double bandwidth);

struct ScatterPoint {
    double x = 0.0;
    double y = 0.0;
    int label = 0;  // 0 = real, 1 = generated
};

/// PCA fit on the pooled rows (top-2 covariance eigenvectors), both sets
/// projected. Errors on rank-0 data.
std::vector<ScatterPoint> project_2d(const Matrix& real_rows, const Matrix& gen_rows);

void save_scatter_csv(const std::string& path, const std::vector<ScatterPoint>& points);

/// All three metrics with matching gene counts enforced.
MetricReport evaluate(const ExpressionMatrix& real, const ExpressionMatrix& gen, int bins,
                      double bandwidth, uint64_t seed);

}  // namespace scdiff
