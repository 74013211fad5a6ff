#include "scdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "scdiff/error.hpp"

namespace scdiff {

namespace {

std::vector<double> column(const Matrix& m, int j) {
    std::vector<double> v(m.rows());
    for (int i = 0; i < m.rows(); ++i) v[i] = m(i, j);
    return v;
}

void require_same_genes(const Matrix& a, const Matrix& b, const char* op) {
    if (a.cols() != b.cols())
        throw ShapeError(std::string(op) + ": gene counts differ (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.cols()) + ")");
}

double sq_dist(const Matrix& a, int i, const Matrix& b, int j) {
    double s = 0.0;
    for (int c = 0; c < a.cols(); ++c) {
        const double d = a(i, c) - b(j, c);
        s += d * d;
    }
    return s;
}

/// Median pairwise Euclidean distance of the pooled rows; 1.0 if degenerate.
double median_heuristic(const Matrix& a, const Matrix& b) {
    const int n = a.rows(), m = b.rows(), total = n + m;
    auto row_dist = [&](int i, int j) {
        const Matrix& mi = i < n ? a : b;
        const int ri = i < n ? i : i - n;
        const Matrix& mj = j < n ? a : b;
        const int rj = j < n ? j : j - n;
        return std::sqrt(sq_dist(mi, ri, mj, rj));
    };
    std::vector<double> dists;
    dists.reserve(static_cast<size_t>(total) * (total - 1) / 2);
    for (int i = 0; i < total; ++i)
        for (int j = i + 1; j < total; ++j) dists.push_back(row_dist(i, j));
    if (dists.empty()) return 1.0;
    const size_t mid = dists.size() / 2;
    std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
    const double med = dists[mid];
    return med > 0.0 ? med : 1.0;
}

double gauss_kernel(double sq, double bandwidth) {
    return std::exp(-sq / (2.0 * bandwidth * bandwidth));
}

}  // namespace

double kl_divergence(const Matrix& real_rows, const Matrix& gen_rows, int bins) {
    require_same_genes(real_rows, gen_rows, "kl_divergence");
    if (bins < 1) throw ConfigError("kl_divergence: bins must be >= 1");
    if (real_rows.rows() < 1 || gen_rows.rows() < 1) throw DataError("kl_divergence: empty sample");

    double total = 0.0;
    for (int j = 0; j < real_rows.cols(); ++j) {
        double lo = real_rows(0, j), hi = real_rows(0, j);
        for (int i = 0; i < real_rows.rows(); ++i) {
            lo = std::min(lo, real_rows(i, j));
            hi = std::max(hi, real_rows(i, j));
        }
        for (int i = 0; i < gen_rows.rows(); ++i) {
            lo = std::min(lo, gen_rows(i, j));
            hi = std::max(hi, gen_rows(i, j));
        }
        const double width = hi - lo;
        std::vector<double> p(bins, 1.0), q(bins, 1.0);  // add-one smoothing
        auto bin_of = [&](double x) {
            if (width <= 0.0) return 0;
            const int b = static_cast<int>((x - lo) / width * bins);
            return std::min(bins - 1, std::max(0, b));
        };
        for (int i = 0; i < real_rows.rows(); ++i) p[bin_of(real_rows(i, j))] += 1.0;
        for (int i = 0; i < gen_rows.rows(); ++i) q[bin_of(gen_rows(i, j))] += 1.0;
        double psum = 0.0, qsum = 0.0;
        for (int b = 0; b < bins; ++b) {
            psum += p[b];
            qsum += q[b];
        }
        double kl = 0.0;
        for (int b = 0; b < bins; ++b) {
            const double pb = p[b] / psum, qb = q[b] / qsum;
            kl += pb * std::log(pb / qb);
        }
        total += kl;
    }
    return total / real_rows.cols();
}

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw DataError("wasserstein: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const size_t n = a.size(), m = b.size();
    // Integrate |F_a^{-1}(u) - F_b^{-1}(u)| over u in (0, 1); both quantile
    // functions are step functions with breakpoints at i/n and j/m.
    double w = 0.0, u = 0.0;
    size_t ia = 0, ib = 0;
    while (ia < n && ib < m) {
        const double next_a = static_cast<double>(ia + 1) / n;
        const double next_b = static_cast<double>(ib + 1) / m;
        const double next = std::min(next_a, next_b);
        w += (next - u) * std::abs(a[ia] - b[ib]);
        u = next;
        if (next_a <= next) ++ia;
        if (next_b <= next) ++ib;
    }
    return w;
}

double wasserstein_distance(const Matrix& real_rows, const Matrix& gen_rows) {
    require_same_genes(real_rows, gen_rows, "wasserstein_distance");
    double total = 0.0;
    for (int j = 0; j < real_rows.cols(); ++j)
        total += wasserstein_1d(column(real_rows, j), column(gen_rows, j));
    return total / real_rows.cols();
}

MmdResult mmd(const Matrix& real_rows, const Matrix& gen_rows, double bandwidth) {
    require_same_genes(real_rows, gen_rows, "mmd");
    const int n = real_rows.rows(), m = gen_rows.rows();
    if (n < 2 || m < 2) throw DataError("mmd: need at least 2 samples per set");

    MmdResult result;
    result.bandwidth = bandwidth > 0.0 ? bandwidth : median_heuristic(real_rows, gen_rows);

    double kxx = 0.0, kyy = 0.0, kxy = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) kxx += gauss_kernel(sq_dist(real_rows, i, real_rows, j), result.bandwidth);
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) kyy += gauss_kernel(sq_dist(gen_rows, i, gen_rows, j), result.bandwidth);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) kxy += gauss_kernel(sq_dist(real_rows, i, gen_rows, j), result.bandwidth);

    result.sq_unbiased = 2.0 * kxx / (static_cast<double>(n) * (n - 1)) +
                         2.0 * kyy / (static_cast<double>(m) * (m - 1)) -
                         2.0 * kxy / (static_cast<double>(n) * m);
    result.value = std::sqrt(std::max(0.0, result.sq_unbiased));
    return result;
}

double mmd_biased_sq(const Matrix& a_rows, const Matrix& b_rows, double bandwidth) {
    require_same_genes(a_rows, b_rows, "mmd");
    const int n = a_rows.rows(), m = b_rows.rows();
    if (n < 1 || m < 1) throw DataError("mmd: empty sample");
    const double bw = bandwidth > 0.0 ? bandwidth : median_heuristic(a_rows, b_rows);
    double kxx = 0.0, kyy = 0.0, kxy = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) kxx += gauss_kernel(sq_dist(a_rows, i, a_rows, j), bw);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) kyy += gauss_kernel(sq_dist(b_rows, i, b_rows, j), bw);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) kxy += gauss_kernel(sq_dist(a_rows, i, b_rows, j), bw);
    return kxx / (static_cast<double>(n) * n) + kyy / (static_cast<double>(m) * m) -
           2.0 * kxy / (static_cast<double>(n) * m);
}

std::vector<ScatterPoint> project_2d(const Matrix& real_rows, const Matrix& gen_rows) {
    require_same_genes(real_rows, gen_rows, "project_2d");
    const int g = real_rows.cols();
    const int n = real_rows.rows(), m = gen_rows.rows();
    const int total = n + m;
    if (total < 2) throw DataError("project_2d: need at least 2 rows");

    std::vector<double> mean(g, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < g; ++j) mean[j] += real_rows(i, j);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < g; ++j) mean[j] += gen_rows(i, j);
    for (auto& v : mean) v /= total;

    Matrix cov(g, g);
    auto accumulate = [&](const Matrix& rows) {
        for (int i = 0; i < rows.rows(); ++i)
            for (int a = 0; a < g; ++a) {
                const double da = rows(i, a) - mean[a];
                for (int b = a; b < g; ++b) cov(a, b) += da * (rows(i, b) - mean[b]);
            }
    };
    accumulate(real_rows);
    accumulate(gen_rows);
    for (int a = 0; a < g; ++a)
        for (int b = a; b < g; ++b) {
            cov(a, b) /= (total - 1);
            cov(b, a) = cov(a, b);
        }

    const auto pairs = top_eigenpairs_sym(cov, 2);
    if (pairs.empty() || pairs[0].first <= 1e-12)
        throw NumericError("project_2d: rank-0 data, no principal direction");

    auto project = [&](const Matrix& rows, int label, std::vector<ScatterPoint>& out) {
        for (int i = 0; i < rows.rows(); ++i) {
            ScatterPoint pt;
            pt.label = label;
            for (int j = 0; j < g; ++j) {
                const double c = rows(i, j) - mean[j];
                pt.x += c * pairs[0].second[j];
                if (pairs.size() > 1) pt.y += c * pairs[1].second[j];
            }
            out.push_back(pt);
        }
    };
    std::vector<ScatterPoint> points;
    points.reserve(total);
    project(real_rows, 0, points);
    project(gen_rows, 1, points);
    return points;
}

void save_scatter_csv(const std::string& path, const std::vector<ScatterPoint>& points) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "x,y,label\n";
    char buf[80];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%s", p.x, p.y,
                      p.label == 0 ? "real" : "generated");
        out << buf << "\n";
    }
}

std::string MetricReport::to_text() const {
    char buf[384];
    std::snprintf(buf, sizeof buf,
                  "kl=%.9g\nwasserstein=%.9g\nmmd=%.9g\nmmd_sq_raw=%.9g\nbins=%d\nbandwidth=%.9g\nseed=%llu\n",
                  kl, wasserstein, mmd, mmd_sq_raw, bins, bandwidth,
                  static_cast<unsigned long long>(seed));
    return buf;
}

MetricReport evaluate(const ExpressionMatrix& real, const ExpressionMatrix& gen, int bins,
                      double bandwidth, uint64_t seed) {
    if (real.genes() != gen.genes()) throw ShapeError("evaluate: gene counts differ");
    MetricReport report;
    report.bins = bins;
    report.seed = seed;
    report.kl = kl_divergence(real.values, gen.values, bins);
    report.wasserstein = wasserstein_distance(real.values, gen.values);
    const MmdResult m = mmd(real.values, gen.values, bandwidth);
    report.mmd = m.value;
    report.mmd_sq_raw = m.sq_unbiased;
    report.bandwidth = m.bandwidth;
    return report;
}

}  // namespace scdiff
