#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "scdiff/error.hpp"

namespace scdiff {

/// Dense row-major matrix of 64-bit floats. The universal value type:
/// column vectors are n x 1, scalars 1 x 1.
class Matrix {
  public:
    Matrix() = default;
    Matrix(int rows, int cols);  // zero-filled
    Matrix(int rows, int cols, double fill);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(int n);

    double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool empty() const { return data_.empty(); }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// ---- elementwise and structural ops ----

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double c);
Matrix add_scalar(const Matrix& a, double c);
Matrix transpose(const Matrix& a);

/// Standard matrix product; requires a.cols == b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Elementwise max(0, x).
Matrix relu(const Matrix& m);

/// Column-wise softmax, stabilized by subtracting each column's max before
/// exponentiation. Every output column sums to 1.
Matrix softmax_columns(const Matrix& m);

/// log det of a symmetric positive-definite matrix via Cholesky.
/// Throws NumericError when a pivot is <= 0 (input not PD) and ShapeError
/// when the input is not square/symmetric.
double logdet_psd(const Matrix& m);

// ---- reductions and queries ----

double sum(const Matrix& m);
double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);
bool is_finite(const Matrix& m);

/// Number of entries with |x| > tol.
int count_nonzero(const Matrix& m, double tol);

/// Top eigenpairs of a symmetric matrix by power iteration with deflation.
/// Eigenvector sign is fixed so the entry of largest magnitude is positive.
/// Returns up to `k` (value, vector) pairs in descending eigenvalue order.
std::vector<std::pair<double, std::vector<double>>> top_eigenpairs_sym(const Matrix& m, int k);

}  // namespace scdiff
