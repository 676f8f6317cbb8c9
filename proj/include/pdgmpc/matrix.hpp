#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdgmpc {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles with runtime dimensions.
///
/// Sizes in this library stay small (a few hundred rows at most), so all
/// operations are straightforward O(n^2)/O(n^3) loops over contiguous
/// storage.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

    Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> entries)
        : rows_(rows), cols_(cols), a_(entries) {
        if (a_.size() != rows * cols)
            throw std::invalid_argument("Matrix: initializer size does not match dimensions");
    }

    static Matrix identity(std::size_t n) {
        Matrix I(n, n);
        for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
        return I;
    }

    static Matrix diag(const Vector& d) {
        Matrix M(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) M(i, i) = d[i];
        return M;
    }

    static Matrix column(const Vector& v) {
        Matrix M(v.size(), 1);
        M.a_ = v;
        return M;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return a_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    const double* data() const { return a_.data(); }
    double* data() { return a_.data(); }
    const std::vector<double>& storage() const { return a_; }

    bool is_square() const { return rows_ == cols_; }

    bool all_finite() const {
        for (double v : a_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    Matrix transpose() const {
        Matrix T(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                T(j, i) = (*this)(i, j);
        return T;
    }

    /// Copies `B` into this matrix with its (0,0) entry at (r0, c0).
    void set_block(std::size_t r0, std::size_t c0, const Matrix& B) {
        if (r0 + B.rows_ > rows_ || c0 + B.cols_ > cols_)
            throw std::out_of_range("Matrix::set_block: block exceeds bounds");
        for (std::size_t i = 0; i < B.rows_; ++i)
            for (std::size_t j = 0; j < B.cols_; ++j)
                (*this)(r0 + i, c0 + j) = B(i, j);
    }

    Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
        if (r0 + nr > rows_ || c0 + nc > cols_)
            throw std::out_of_range("Matrix::block: block exceeds bounds");
        Matrix B(nr, nc);
        for (std::size_t i = 0; i < nr; ++i)
            for (std::size_t j = 0; j < nc; ++j)
                B(i, j) = (*this)(r0 + i, c0 + j);
        return B;
    }

    Matrix& operator+=(const Matrix& B) {
        check_same_shape(B, "+=");
        for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += B.a_[k];
        return *this;
    }
    Matrix& operator-=(const Matrix& B) {
        check_same_shape(B, "-=");
        for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= B.a_[k];
        return *this;
    }
    Matrix& operator*=(double s) {
        for (double& v : a_) v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix A, const Matrix& B) { return A += B; }
    friend Matrix operator-(Matrix A, const Matrix& B) { return A -= B; }
    friend Matrix operator*(Matrix A, double s) { return A *= s; }
    friend Matrix operator*(double s, Matrix A) { return A *= s; }

    friend Matrix operator*(const Matrix& A, const Matrix& B) {
        if (A.cols_ != B.rows_)
            throw std::invalid_argument("Matrix multiply: inner dimensions " +
                                        std::to_string(A.cols_) + " vs " + std::to_string(B.rows_));
        Matrix C(A.rows_, B.cols_);
        for (std::size_t i = 0; i < A.rows_; ++i) {
            for (std::size_t k = 0; k < A.cols_; ++k) {
                const double aik = A(i, k);
                if (aik == 0.0) continue;
                const double* brow = &B.a_[k * B.cols_];
                double* crow = &C.a_[i * B.cols_];
                for (std::size_t j = 0; j < B.cols_; ++j) crow[j] += aik * brow[j];
            }
        }
        return C;
    }

    friend Vector operator*(const Matrix& A, const Vector& x) {
        if (A.cols_ != x.size())
            throw std::invalid_argument("Matrix-vector multiply: dimensions " +
                                        std::to_string(A.cols_) + " vs " + std::to_string(x.size()));
        Vector y(A.rows_, 0.0);
        for (std::size_t i = 0; i < A.rows_; ++i) {
            const double* row = &A.a_[i * A.cols_];
            double s = 0.0;
            for (std::size_t j = 0; j < A.cols_; ++j) s += row[j] * x[j];
            y[i] = s;
        }
        return y;
    }

    /// A^T x without forming the transpose.
    Vector transpose_times(const Vector& x) const {
        if (rows_ != x.size())
            throw std::invalid_argument("transpose_times: dimensions " +
                                        std::to_string(rows_) + " vs " + std::to_string(x.size()));
        Vector y(cols_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) {
            const double xi = x[i];
            if (xi == 0.0) continue;
            const double* row = &a_[i * cols_];
            for (std::size_t j = 0; j < cols_; ++j) y[j] += row[j] * xi;
        }
        return y;
    }

    double one_norm() const {
        double best = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < rows_; ++i) s += std::abs((*this)(i, j));
            best = std::max(best, s);
        }
        return best;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double v : a_) s += v * v;
        return std::sqrt(s);
    }

    double max_abs() const {
        double best = 0.0;
        for (double v : a_) best = std::max(best, std::abs(v));
        return best;
    }

private:
    void check_same_shape(const Matrix& B, const char* op) const {
        if (rows_ != B.rows_ || cols_ != B.cols_)
            throw std::invalid_argument(std::string("Matrix ") + op + ": shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> a_;
};

inline Matrix sym_part(const Matrix& M) {
    if (!M.is_square()) throw std::invalid_argument("sym_part: matrix not square");
    Matrix S(M.rows(), M.cols());
    for (std::size_t i = 0; i < M.rows(); ++i)
        for (std::size_t j = 0; j < M.cols(); ++j)
            S(i, j) = 0.5 * (M(i, j) + M(j, i));
    return S;
}

// -- small vector helpers ----------------------------------------------------

inline double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

inline Vector operator+(Vector a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("vector +: length mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

inline Vector operator-(Vector a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("vector -: length mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    return a;
}

inline Vector operator*(double s, Vector a) {
    for (double& v : a) v *= s;
    return a;
}

inline void axpy(double s, const Vector& x, Vector& y) {
    if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

inline Vector concat(const Vector& a, const Vector& b) {
    Vector c;
    c.reserve(a.size() + b.size());
    c.insert(c.end(), a.begin(), a.end());
    c.insert(c.end(), b.begin(), b.end());
    return c;
}

inline Vector concat(const Vector& a, const Vector& b, const Vector& c) {
    return concat(concat(a, b), c);
}

inline bool all_finite(const Vector& a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

/// FNV-1a digest of raw matrix bytes, used to stamp reports.
inline std::string fnv1a_digest(std::initializer_list<const Matrix*> mats) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const unsigned char* p, std::size_t len) {
        for (std::size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (const Matrix* M : mats) {
        const auto r = static_cast<std::uint64_t>(M->rows());
        const auto c = static_cast<std::uint64_t>(M->cols());
        mix(reinterpret_cast<const unsigned char*>(&r), sizeof(r));
        mix(reinterpret_cast<const unsigned char*>(&c), sizeof(c));
        mix(reinterpret_cast<const unsigned char*>(M->data()), M->rows() * M->cols() * sizeof(double));
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

} // namespace pdgmpc
