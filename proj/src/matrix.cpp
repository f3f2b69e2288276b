#include "pcl/matrix.hpp"

#include <cmath>

#include "pcl/errors.hpp"

namespace pcl {

void Matrix::set_row(int r, std::span<const double> values) {
    if (static_cast<int>(values.size()) != cols)
        throw shape_error("set_row: value count does not match column count");
    auto dst = row(r);
    for (int c = 0; c < cols; ++c) dst[c] = values[c];
}

bool Matrix::finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix matrix_from(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int r = 0; r < m.rows; ++r) {
        if (static_cast<int>(rows[r].size()) != m.cols)
            throw shape_error("matrix_from: ragged rows");
        for (int c = 0; c < m.cols; ++c) m(r, c) = rows[r][c];
    }
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw shape_error("matmul: inner dimensions disagree");
    Matrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) throw shape_error("matmul_nt: inner dimensions disagree");
    Matrix c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const auto ai = a.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const auto bj = b.row(j);
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += ai[k] * bj[k];
            c(i, j) = s;
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw shape_error("matmul_tn: inner dimensions disagree");
    Matrix c(a.cols, b.cols);
    for (int k = 0; k < a.rows; ++k) {
        const auto ak = a.row(k);
        const auto bk = b.row(k);
        for (int i = 0; i < a.cols; ++i) {
            const double aki = ak[i];
            if (aki == 0.0) continue;
            for (int j = 0; j < b.cols; ++j) c(i, j) += aki * bk[j];
        }
    }
    return c;
}

Matrix vstack(const Matrix& a, const Matrix& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    if (a.cols != b.cols) throw shape_error("vstack: column counts disagree");
    Matrix c(a.rows + b.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), c.data.begin());
    std::copy(b.data.begin(), b.data.end(), c.data.begin() + a.data.size());
    return c;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw shape_error("squared_distance: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace pcl
