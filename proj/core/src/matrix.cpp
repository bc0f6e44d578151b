#include "biocl/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace biocl {

Matrix::Matrix(int rows, int cols, real fill)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) {
        throw std::invalid_argument("Matrix: negative dimensions");
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<real>> rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    Matrix m(r, c);
    int i = 0;
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != c) {
            throw std::invalid_argument("Matrix::from_rows: ragged rows");
        }
        std::copy(row.begin(), row.end(), m.row(i));
        ++i;
    }
    return m;
}

void Matrix::fill(real v) { std::fill(data_.begin(), data_.end(), v); }

Matrix& Matrix::operator+=(const Matrix& other) {
    if (!same_shape(other)) throw std::invalid_argument("Matrix+=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    if (!same_shape(other)) throw std::invalid_argument("Matrix-=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(real s) {
    for (auto& v : data_) v *= s;
    return *this;
}

void ensure_shape(const Matrix& m, int rows, int cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(rows) +
                                    "x" + std::to_string(cols) + ", got " +
                                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

void matmul_add(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
    if (c.rows() != a.rows() || c.cols() != b.cols()) {
        throw std::invalid_argument("matmul: output shape mismatch");
    }
    const int m = a.rows(), k = a.cols(), n = b.cols();
    // i-k-j order: streams over rows of b and c.
    for (int i = 0; i < m; ++i) {
        real* ci = c.row(i);
        const real* ai = a.row(i);
        for (int p = 0; p < k; ++p) {
            const real aip = ai[p];
            if (aip == real(0)) continue;
            const real* bp = b.row(p);
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    matmul_add(a, b, c);
    return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("matmul_at_b: row mismatch");
    const int m = a.cols(), k = a.rows(), n = b.cols();
    Matrix c(m, n);
    for (int p = 0; p < k; ++p) {
        const real* ap = a.row(p);
        const real* bp = b.row(p);
        for (int i = 0; i < m; ++i) {
            const real api = ap[i];
            if (api == real(0)) continue;
            real* ci = c.row(i);
            for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
    return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_a_bt: col mismatch");
    const int m = a.rows(), k = a.cols(), n = b.rows();
    Matrix c(m, n);
    for (int i = 0; i < m; ++i) {
        const real* ai = a.row(i);
        real* ci = c.row(i);
        for (int j = 0; j < n; ++j) {
            const real* bj = b.row(j);
            real acc = 0;
            for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
    return c;
}

Matrix affine(const Matrix& w, const Matrix& x, std::span<const real> b) {
    if (w.cols() != x.rows()) throw std::invalid_argument("affine: W.cols != x.rows");
    if (static_cast<int>(b.size()) != w.rows()) {
        throw std::invalid_argument("affine: bias length != W.rows");
    }
    Matrix z(w.rows(), x.cols());
    for (int i = 0; i < z.rows(); ++i) {
        real* zi = z.row(i);
        for (int j = 0; j < z.cols(); ++j) zi[j] = b[i];
    }
    matmul_add(w, x, z);
    return z;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i) {
        const real* ai = a.row(i);
        for (int j = 0; j < a.cols(); ++j) t(j, i) = ai[j];
    }
    return t;
}

real dot(std::span<const real> a, std::span<const real> b) {
    real acc = 0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

real l2_norm_squared(std::span<const real> a) {
    real acc = 0;
    for (real v : a) acc += v * v;
    return acc;
}

bool all_finite(const Matrix& a) {
    for (real v : a.flat()) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace biocl
