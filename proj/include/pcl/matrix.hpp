#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pcl {

/// Dense row-major matrix of doubles. The only tensor type in the project;
/// batches are rows, features/classes are columns.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

    double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    std::span<double> row(int r) { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
    std::span<const double> row(int r) const { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }

    bool empty() const { return rows == 0 || cols == 0; }

    void set_row(int r, std::span<const double> values);

    /// All entries finite?
    bool finite() const;
};

/// Builds a matrix from nested initializer-style data (test convenience).
Matrix matrix_from(const std::vector<std::vector<double>>& rows);

/// C = A * B, A[m x k], B[k x n].
Matrix matmul(const Matrix& a, const Matrix& b);

/// C = A * B^T, A[m x k], B[n x k].
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// C = A^T * B, A[k x m], B[k x n].
Matrix matmul_tn(const Matrix& a, const Matrix& b);

/// Stacks b's rows below a's (column counts must match; empty operands allowed).
Matrix vstack(const Matrix& a, const Matrix& b);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace pcl
