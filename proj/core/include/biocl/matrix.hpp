#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace biocl {

#ifdef BIOCL_REAL_FLOAT
using real = float;
#else
using real = double;
#endif

/// Dense row-major matrix. The substrate for activations, weights and
/// gradients throughout the library. All reductions run in sequential
/// index order, so results are deterministic for a given build.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, real fill = real(0));

    static Matrix from_rows(std::initializer_list<std::initializer_list<real>> rows);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    real& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    real operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

    real* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
    const real* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }

    std::span<real> flat() { return data_; }
    std::span<const real> flat() const { return data_; }

    void fill(real v);
    void set_zero() { fill(real(0)); }

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(real s);

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<real> data_;
};

/// c = a * b
Matrix matmul(const Matrix& a, const Matrix& b);
/// c = a^T * b
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
/// c = a * b^T
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);
/// c += a * b, without allocating
void matmul_add(const Matrix& a, const Matrix& b, Matrix& c);

/// w*x + b, bias added per output row and broadcast over columns.
/// Shapes: w (m x k), x (k x n), b length m. Throws on mismatch.
Matrix affine(const Matrix& w, const Matrix& x, std::span<const real> b);

Matrix transpose(const Matrix& a);

real dot(std::span<const real> a, std::span<const real> b);
real l2_norm_squared(std::span<const real> a);

bool all_finite(const Matrix& a);

void ensure_shape(const Matrix& m, int rows, int cols, const char* what);

}  // namespace biocl
