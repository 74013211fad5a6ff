#include "scdiff/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace scdiff {

namespace {

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
    }
}

}  // namespace

Matrix::Matrix(int rows, int cols)
    : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, 0.0) {
    if (rows < 0 || cols < 0) throw ShapeError("Matrix: negative dimension");
}

Matrix::Matrix(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw ShapeError("Matrix: negative dimension");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    data_.reserve(static_cast<size_t>(rows_) * cols_);
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != cols_) throw ShapeError("Matrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out(a.rows(), a.cols());
    for (size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix out(a.rows(), a.cols());
    for (size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix out(a.rows(), a.cols());
    for (size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    return out;
}

Matrix scale(const Matrix& a, double c) {
    Matrix out(a.rows(), a.cols());
    for (size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * c;
    return out;
}

Matrix add_scalar(const Matrix& a, double c) {
    Matrix out(a.rows(), a.cols());
    for (size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + c;
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions " + shape_str(a) + " vs " + shape_str(b));
    }
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Matrix out(m, n);
    // i-k-j order: unit-stride inner loop, fixed summation order (deterministic).
    for (int i = 0; i < m; ++i) {
        double* crow = out.data() + static_cast<size_t>(i) * n;
        const double* arow = a.data() + static_cast<size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            const double* brow = b.data() + static_cast<size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix relu(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (size_t i = 0; i < m.size(); ++i) out.data()[i] = m.data()[i] > 0.0 ? m.data()[i] : 0.0;
    return out;
}

Matrix softmax_columns(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (int j = 0; j < m.cols(); ++j) {
        double colmax = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < m.rows(); ++i) colmax = std::max(colmax, m(i, j));
        double total = 0.0;
        for (int i = 0; i < m.rows(); ++i) {
            const double e = std::exp(m(i, j) - colmax);
            out(i, j) = e;
            total += e;
        }
        for (int i = 0; i < m.rows(); ++i) out(i, j) /= total;
    }
    return out;
}

double logdet_psd(const Matrix& m) {
    if (m.rows() != m.cols()) throw ShapeError("logdet_psd: matrix not square");
    const int n = m.rows();
    const double scale = std::max(1.0, max_abs(m));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(m(i, j) - m(j, i)) > 1e-9 * scale)
                throw ShapeError("logdet_psd: matrix not symmetric");

    // Cholesky m = L L^T; logdet = 2 sum log L_ii.
    Matrix l(n, n);
    double logdet = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = m(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 0.0 || !std::isfinite(s))
                    throw NumericError("logdet_psd: non-positive pivot at row " + std::to_string(i));
                l(i, i) = std::sqrt(s);
                logdet += std::log(s);  // log(L_ii^2)
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return logdet;
}

double sum(const Matrix& m) {
    double s = 0.0;
    for (size_t i = 0; i < m.size(); ++i) s += m.data()[i];
    return s;
}

double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (size_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
    return std::sqrt(s);
}

double max_abs(const Matrix& m) {
    double s = 0.0;
    for (size_t i = 0; i < m.size(); ++i) s = std::max(s, std::abs(m.data()[i]));
    return s;
}

bool is_finite(const Matrix& m) {
    for (size_t i = 0; i < m.size(); ++i)
        if (!std::isfinite(m.data()[i])) return false;
    return true;
}

int count_nonzero(const Matrix& m, double tol) {
    int n = 0;
    for (size_t i = 0; i < m.size(); ++i)
        if (std::abs(m.data()[i]) > tol) ++n;
    return n;
}

std::vector<std::pair<double, std::vector<double>>> top_eigenpairs_sym(const Matrix& m, int k) {
    if (m.rows() != m.cols()) throw ShapeError("top_eigenpairs_sym: matrix not square");
    const int n = m.rows();
    Matrix work = m;
    std::vector<std::pair<double, std::vector<double>>> pairs;

    for (int p = 0; p < k && p < n; ++p) {
        // Deterministic start vector, orthogonal-ish to previous directions.
        std::vector<double> v(n);
        for (int i = 0; i < n; ++i) v[i] = 1.0 + 0.013 * ((i * 7 + p * 3) % 11);
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;

        // Keep iterates orthogonal to the directions found so far.
        auto orthogonalize = [&pairs, n](std::vector<double>& x) {
            for (const auto& pr : pairs) {
                double dot = 0.0;
                for (int i = 0; i < n; ++i) dot += pr.second[i] * x[i];
                for (int i = 0; i < n; ++i) x[i] -= dot * pr.second[i];
            }
        };
        orthogonalize(v);
        norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            v.assign(n, 0.0);
            v[p % n] = 1.0;
            orthogonalize(v);
        } else {
            for (double& x : v) x /= norm;
        }

        for (int it = 0; it < 5000; ++it) {
            std::vector<double> w(n, 0.0);
            for (int i = 0; i < n; ++i) {
                double s = 0.0;
                for (int j = 0; j < n; ++j) s += work(i, j) * v[j];
                w[i] = s;
            }
            orthogonalize(w);
            double wn = 0.0;
            for (double x : w) wn += x * x;
            wn = std::sqrt(wn);
            if (wn < 1e-300) break;  // in the null space; keep the current direction
            for (double& x : w) x /= wn;
            double dot = 0.0;
            for (int i = 0; i < n; ++i) dot += w[i] * v[i];
            v = std::move(w);
            if (it > 20 && std::abs(std::abs(dot) - 1.0) < 1e-15) break;
        }
        // Rayleigh quotient (handles negative and near-zero eigenvalues).
        double lambda = 0.0;
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += work(i, j) * v[j];
            lambda += v[i] * s;
        }

        int imax = 0;
        for (int i = 1; i < n; ++i)
            if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
        if (v[imax] < 0.0)
            for (double& x : v) x = -x;

        pairs.emplace_back(lambda, v);
        // Deflate: work -= lambda v v^T.
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) work(i, j) -= lambda * v[i] * v[j];
    }
    return pairs;
}

}  // namespace scdiff
