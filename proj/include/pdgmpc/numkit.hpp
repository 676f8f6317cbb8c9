#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "pdgmpc/matrix.hpp"

namespace pdgmpc {

/// Eigenvalues of a symmetric matrix, sorted ascending.
struct SymEigResult {
    Vector eigenvalues;   // ascending
    double max_eigenvalue = 0.0;
};

namespace detail {

// Cyclic Jacobi with a threshold sweep strategy. Optionally accumulates the
// rotations into `V` (columns become eigenvectors). Quadratically convergent
// once off-diagonal mass is small; fine for the small matrices handled here.
inline Vector jacobi_eigenvalues(Matrix A, Matrix* V = nullptr) {
    const std::size_t n = A.rows();
    if (V) *V = Matrix::identity(n);
    if (n == 1) return {A(0, 0)};

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
        if (std::sqrt(2.0 * off) <= 1e-15 * std::max(1.0, A.max_abs())) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = A(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double app = A(p, p), aqq = A(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                // tan of the smaller rotation angle
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                if (V) {
                    for (std::size_t k = 0; k < n; ++k) {
                        const double vkp = (*V)(k, p), vkq = (*V)(k, q);
                        (*V)(k, p) = c * vkp - s * vkq;
                        (*V)(k, q) = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    Vector ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = A(i, i);
    return ev;
}

// Householder reduction to tridiagonal form followed by implicit-shift QL.
// Eigenvalues only. Used above the Jacobi size cutoff; the certificate
// pencils reach ~150 rows and Jacobi sweeps are too slow there for the
// repeated evaluations inside the delta search.
inline Vector tridiagonal_eigenvalues(Matrix A) {
    const std::size_t n = A.rows();
    Vector d(n, 0.0), e(n, 0.0);

    // tridiagonalize (working on the lower triangle)
    for (std::size_t i = n; i-- > 1;) {
        const std::size_t l = i - 1;
        double h = 0.0;
        if (l > 0) {
            double scale = 0.0;
            for (std::size_t k = 0; k <= l; ++k) scale += std::abs(A(i, k));
            if (scale == 0.0) {
                e[i] = A(i, l);
            } else {
                for (std::size_t k = 0; k <= l; ++k) {
                    A(i, k) /= scale;
                    h += A(i, k) * A(i, k);
                }
                double f = A(i, l);
                double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
                e[i] = scale * g;
                h -= f * g;
                A(i, l) = f - g;
                f = 0.0;
                for (std::size_t j = 0; j <= l; ++j) {
                    g = 0.0;
                    for (std::size_t k = 0; k <= j; ++k) g += A(j, k) * A(i, k);
                    for (std::size_t k = j + 1; k <= l; ++k) g += A(k, j) * A(i, k);
                    e[j] = g / h;
                    f += e[j] * A(i, j);
                }
                const double hh = f / (h + h);
                for (std::size_t j = 0; j <= l; ++j) {
                    f = A(i, j);
                    g = e[j] - hh * f;
                    e[j] = g;
                    for (std::size_t k = 0; k <= j; ++k)
                        A(j, k) -= f * e[k] + g * A(i, k);
                }
            }
        } else {
            e[i] = A(i, l);
        }
        d[i] = h;
    }
    for (std::size_t i = 0; i < n; ++i) d[i] = A(i, i);

    // implicit-shift QL on the tridiagonal (d, e)
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= std::numeric_limits<double>::epsilon() * dd) break;
            }
            if (m != l) {
                if (++iter == 50)
                    throw std::runtime_error("tridiagonal_eigenvalues: QL failed to converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                bool underflow = false;
                for (std::size_t i = m; i-- > l;) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        // rotation underflow: drop the shift and retry
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if (underflow) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
    return d;
}

// LU with partial pivoting, in place. Returns the permutation; throws on a
// pivot below tolerance, naming the offending column.
struct LuFactors {
    Matrix lu;
    std::vector<std::size_t> perm;
};

inline LuFactors lu_factor(Matrix A) {
    const std::size_t n = A.rows();
    if (!A.is_square()) throw std::invalid_argument("lu_factor: matrix not square");
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    const double scale = std::max(A.max_abs(), 1.0);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(A(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double v = std::abs(A(i, k));
            if (v > best) { best = v; piv = i; }
        }
        if (best <= 1e-14 * scale)
            throw std::runtime_error("solve_linear: matrix singular to machine precision at pivot " +
                                     std::to_string(k));
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(A(k, j), A(piv, j));
            std::swap(perm[k], perm[piv]);
        }
        const double akk = A(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = A(i, k) / akk;
            A(i, k) = f;
            if (f == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) A(i, j) -= f * A(k, j);
        }
    }
    return {std::move(A), std::move(perm)};
}

inline Vector lu_solve(const LuFactors& F, const Vector& b) {
    const std::size_t n = F.lu.rows();
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[F.perm[i]];
        for (std::size_t j = 0; j < i; ++j) s -= F.lu(i, j) * y[j];
        y[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = y[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= F.lu(i, j) * y[j];
        y[i] = s / F.lu(i, i);
    }
    return y;
}

} // namespace detail

/// Eigenvalues of (M + M^T)/2. Input must be square, finite, and symmetric to
/// a 1e-10 relative tolerance.
inline SymEigResult sym_eig_max(const Matrix& M) {
    if (!M.is_square())
        throw std::invalid_argument("sym_eig_max: matrix is " + std::to_string(M.rows()) + "x" +
                                    std::to_string(M.cols()) + ", expected square");
    if (!M.all_finite())
        throw std::invalid_argument("sym_eig_max: non-finite entries");
    const double scale = std::max(M.max_abs(), 1.0);
    for (std::size_t i = 0; i < M.rows(); ++i)
        for (std::size_t j = i + 1; j < M.cols(); ++j)
            if (std::abs(M(i, j) - M(j, i)) > 1e-10 * scale)
                throw std::invalid_argument("sym_eig_max: matrix not symmetric at (" +
                                            std::to_string(i) + "," + std::to_string(j) + ")");

    Matrix S = sym_part(M);
    // Jacobi for small matrices, tridiagonal QL above the cutoff.
    Vector ev = (S.rows() <= 64) ? detail::jacobi_eigenvalues(std::move(S))
                                 : detail::tridiagonal_eigenvalues(std::move(S));
    std::sort(ev.begin(), ev.end());
    SymEigResult r;
    r.max_eigenvalue = ev.back();
    r.eigenvalues = std::move(ev);
    return r;
}

/// Spectral norm via the symmetric eigenproblem on M^T M.
inline double spectral_norm(const Matrix& M) {
    const Matrix MtM = M.transpose() * M;
    const double l = sym_eig_max(MtM).max_eigenvalue;
    return std::sqrt(std::max(0.0, l));
}

/// Matrix exponential by scaling-and-squaring with the degree-13 Pade
/// approximant and 1-norm based scaling.
inline Matrix expm(const Matrix& M) {
    if (!M.is_square())
        throw std::invalid_argument("expm: matrix is " + std::to_string(M.rows()) + "x" +
                                    std::to_string(M.cols()) + ", expected square");
    if (!M.all_finite()) throw std::invalid_argument("expm: non-finite entries");

    const std::size_t n = M.rows();
    const double theta13 = 5.371920351148152;
    const double nrm = M.one_norm();
    int squarings = 0;
    if (nrm > theta13)
        squarings = static_cast<int>(std::ceil(std::log2(nrm / theta13)));

    Matrix A = M * std::pow(2.0, -squarings);

    static const double b[14] = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
        129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
        1323241920.0,        40840800.0,          960960.0,           16380.0,
        182.0,               1.0};

    const Matrix I = Matrix::identity(n);
    const Matrix A2 = A * A;
    const Matrix A4 = A2 * A2;
    const Matrix A6 = A4 * A2;

    Matrix U = A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) +
                    b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
    Matrix V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) +
               b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;

    // solve (V - U) R = (V + U)
    const Matrix lhs = V - U;
    const Matrix rhs = V + U;
    const auto F = detail::lu_factor(lhs);
    Matrix R(n, n);
    Vector col(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = rhs(i, j);
        const Vector x = detail::lu_solve(F, col);
        for (std::size_t i = 0; i < n; ++i) R(i, j) = x[i];
    }
    for (int s = 0; s < squarings; ++s) R = R * R;
    return R;
}

/// Solves A X = B for square nonsingular A by LU with partial pivoting.
inline Matrix solve_linear(const Matrix& A, const Matrix& B) {
    if (!A.is_square())
        throw std::invalid_argument("solve_linear: A is " + std::to_string(A.rows()) + "x" +
                                    std::to_string(A.cols()) + ", expected square");
    if (A.rows() != B.rows())
        throw std::invalid_argument("solve_linear: B has " + std::to_string(B.rows()) +
                                    " rows, expected " + std::to_string(A.rows()));
    if (!A.all_finite() || !B.all_finite())
        throw std::invalid_argument("solve_linear: non-finite entries");

    const auto F = detail::lu_factor(A);
    Matrix X(B.rows(), B.cols());
    Vector col(B.rows());
    for (std::size_t j = 0; j < B.cols(); ++j) {
        for (std::size_t i = 0; i < B.rows(); ++i) col[i] = B(i, j);
        const Vector x = detail::lu_solve(F, col);
        for (std::size_t i = 0; i < B.rows(); ++i) X(i, j) = x[i];
    }
    return X;
}

inline Vector solve_linear(const Matrix& A, const Vector& b) {
    if (!A.is_square() || A.rows() != b.size())
        throw std::invalid_argument("solve_linear: dimension mismatch");
    return detail::lu_solve(detail::lu_factor(A), b);
}

/// Golden-section minimization of a unimodal function on [lo, hi].
/// Returns (argmin, f(argmin)).
inline std::pair<double, double> golden_min(const std::function<double(double)>& f,
                                            double lo, double hi, double tol) {
    if (!(lo < hi)) throw std::invalid_argument("golden_min: requires lo < hi");
    if (!(tol > 0.0)) throw std::invalid_argument("golden_min: requires tol > 0");

    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c1 = b - gr * (b - a);
    double c2 = a + gr * (b - a);
    double f1 = f(c1), f2 = f(c2);
    while (b - a > tol) {
        if (f1 < f2) {
            b = c2; c2 = c1; f2 = f1;
            c1 = b - gr * (b - a);
            f1 = f(c1);
        } else {
            a = c1; c1 = c2; f1 = f2;
            c2 = a + gr * (b - a);
            f2 = f(c2);
        }
    }
    const double xm = 0.5 * (a + b);
    return {xm, f(xm)};
}

} // namespace pdgmpc
