#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdgmpc/matrix.hpp"
#include "pdgmpc/numkit.hpp"
#include "pdgmpc/ocp.hpp"

namespace pdgmpc {

struct QpSolution {
    Vector u_seq;
    std::vector<std::size_t> active_set;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
};

namespace detail {

// Solves the equality-constrained step of the active-set method through the
// bordered KKT system; returns the step p and the working-set multipliers.
inline void eqp_step(const Matrix& H, const Vector& grad, const Matrix& A,
                     const std::vector<std::size_t>& work, Vector& p, Vector& mult) {
    const std::size_t n = H.rows();
    const std::size_t k = work.size();
    Matrix KKT(n + k, n + k);
    KKT.set_block(0, 0, H);
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t j = 0; j < n; ++j) {
            KKT(n + r, j) = A(work[r], j);
            KKT(j, n + r) = A(work[r], j);
        }
    Vector rhs(n + k, 0.0);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = -grad[i];
    const Vector sol = solve_linear(KKT, rhs);
    p.assign(sol.begin(), sol.begin() + n);
    mult.assign(sol.begin() + n, sol.end());
}

} // namespace detail

/// Dense primal active-set solver for
///   min (1/2) u'Hu + q'u   s.t.  G_u u + g0_u <= 0,
/// started from a strictly feasible origin (g0_u < 0 in this problem family).
/// Ties break toward the lowest constraint index.
inline QpSolution qp_solve(const CondensedQp& qp, const Vector& x, double tol = 1e-10) {
    const std::size_t n = qp.H.rows();
    const std::size_t nc = qp.g0_u.size();
    const Vector q = qp.q_map * x;

    Vector u(n, 0.0);
    std::vector<std::size_t> work;
    std::vector<char> in_work(nc, 0);

    QpSolution sol;
    const int max_iters = 100 * static_cast<int>(nc + 1);
    Vector p, mult;

    for (int it = 0; it < max_iters; ++it) {
        sol.iterations = it + 1;
        Vector grad = qp.H * u;
        axpy(1.0, q, grad);
        detail::eqp_step(qp.H, grad, qp.G_u, work, p, mult);

        if (norm2(p) <= tol * std::max(1.0, norm2(u))) {
            // stationary on the working set; check multiplier signs
            double worst = -tol;
            std::size_t drop = work.size();
            for (std::size_t r = 0; r < work.size(); ++r) {
                if (mult[r] < worst) {   // strict: ties keep the lowest index
                    worst = mult[r];
                    drop = r;
                }
            }
            if (drop == work.size()) {
                sol.u_seq = u;
                sol.active_set = work;
                sol.objective = 0.5 * dot(u, qp.H * u) + dot(q, u);

                Vector stat = grad;
                for (std::size_t r = 0; r < work.size(); ++r)
                    for (std::size_t j = 0; j < n; ++j)
                        stat[j] += mult[r] * qp.G_u(work[r], j);
                double feas = 0.0, comp = 0.0;
                const Vector g = qp.G_u * u + qp.g0_u;
                for (std::size_t i = 0; i < nc; ++i) {
                    feas = std::max(feas, g[i]);
                    if (in_work[i]) comp = std::max(comp, std::abs(g[i]));
                }
                sol.kkt_residual = std::max({norm2(stat), feas, comp});
                return sol;
            }
            in_work[work[drop]] = 0;
            work.erase(work.begin() + static_cast<std::ptrdiff_t>(drop));
            continue;
        }

        // step length to the nearest blocking constraint
        double alpha = 1.0;
        std::size_t blocking = nc;
        const Vector Gp = qp.G_u * p;
        const Vector g = qp.G_u * u + qp.g0_u;
        for (std::size_t i = 0; i < nc; ++i) {
            if (in_work[i] || Gp[i] <= tol) continue;
            const double a = -g[i] / Gp[i];
            if (a < alpha - 1e-14) {
                alpha = std::max(a, 0.0);
                blocking = i;
            }
        }
        axpy(alpha, p, u);
        if (blocking != nc) {
            work.push_back(blocking);
            std::sort(work.begin(), work.end());
            in_work[blocking] = 1;
        }
    }

    std::string trace = "qp_solve: cycling guard tripped; working set:";
    for (std::size_t i : work) trace += " " + std::to_string(i);
    throw std::runtime_error(trace);
}

/// phi(a, b) = a + b - sqrt(a^2 + b^2); zero exactly on the complementarity
/// set {a >= 0, b >= 0, ab = 0}.
inline double fischer_burmeister(double a, double b) {
    return a + b - std::sqrt(a * a + b * b);
}

inline Vector fischer_burmeister(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("fischer_burmeister: length mismatch");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = fischer_burmeister(a[i], b[i]);
    return out;
}

/// Continuation/GMRES controller state on the condensed problem.
/// omega = [u_{0:N-1}; nu].
struct CgmresState {
    Vector omega;
    double xi = 1.0;          // continuation gain, set to the controller gain
    int gmres_iters = 1;      // fixed per-step GMRES iteration count
    double fd_step = 1e-6;    // relative forward-difference step
    bool warned = false;      // set on GMRES breakdown
};

/// Optimality residual F(omega; x) = [grad f + grad g nu; phi(-g, nu)].
inline Vector cgmres_residual(const CondensedQp& qp, const Vector& omega, const Vector& x) {
    const std::size_t n = qp.H.rows();
    const std::size_t nc = qp.g0_u.size();
    if (omega.size() != n + nc)
        throw std::invalid_argument("cgmres_residual: omega has length " +
                                    std::to_string(omega.size()) + ", expected " +
                                    std::to_string(n + nc));
    const Vector u(omega.begin(), omega.begin() + static_cast<std::ptrdiff_t>(n));
    const Vector nu(omega.begin() + static_cast<std::ptrdiff_t>(n), omega.end());

    Vector stat = qp.H * u;
    axpy(1.0, qp.q_map * x, stat);
    axpy(1.0, qp.G_u.transpose_times(nu), stat);

    const Vector g = qp.G_u * u + qp.g0_u;
    Vector comp(nc);
    for (std::size_t i = 0; i < nc; ++i) comp[i] = fischer_burmeister(-g[i], nu[i]);
    return concat(stat, comp);
}

namespace detail {

// Matrix-free GMRES with a fixed (small) iteration count, x0 = 0.
// Returns false on Arnoldi breakdown.
template <typename MatVec>
inline bool gmres_fixed(const MatVec& Av, const Vector& b, int iters, Vector& x) {
    const std::size_t n = b.size();
    x.assign(n, 0.0);
    const double beta0 = norm2(b);
    if (beta0 == 0.0) return true;

    const int kmax = iters;
    std::vector<Vector> Q;
    Q.reserve(kmax + 1);
    Q.push_back((1.0 / beta0) * b);
    Matrix Hh(kmax + 1, kmax);

    int k = 0;
    for (; k < kmax; ++k) {
        Vector v = Av(Q[k]);
        for (int i = 0; i <= k; ++i) {
            Hh(i, k) = dot(Q[i], v);
            axpy(-Hh(i, k), Q[i], v);
        }
        const double hn = norm2(v);
        Hh(k + 1, k) = hn;
        if (hn < 1e-14 * beta0) {
            // invariant subspace; only a zero operator is a true breakdown
            if (k == 0 && std::abs(Hh(0, 0)) < 1e-300) return false;
            ++k;
            break;
        }
        Q.push_back((1.0 / hn) * v);
    }

    // least squares on the (k+1) x k Hessenberg via Givens rotations
    Vector rhs(k + 1, 0.0);
    rhs[0] = beta0;
    for (int j = 0; j < k; ++j) {
        const double a = Hh(j, j), bb = Hh(j + 1, j);
        const double r = std::hypot(a, bb);
        if (r == 0.0) continue;
        const double cs = a / r, sn = bb / r;
        for (int col = j; col < k; ++col) {
            const double h1 = Hh(j, col), h2 = Hh(j + 1, col);
            Hh(j, col) = cs * h1 + sn * h2;
            Hh(j + 1, col) = -sn * h1 + cs * h2;
        }
        const double t = rhs[j];
        rhs[j] = cs * t + sn * rhs[j + 1];
        rhs[j + 1] = -sn * t + cs * rhs[j + 1];
    }
    Vector y(k, 0.0);
    for (int i = k - 1; i >= 0; --i) {
        double s = rhs[i];
        for (int j = i + 1; j < k; ++j) s -= Hh(i, j) * y[j];
        y[i] = (Hh(i, i) != 0.0) ? s / Hh(i, i) : 0.0;
    }
    for (int i = 0; i < k; ++i) axpy(y[i], Q[i], x);
    return true;
}

} // namespace detail

/// Initial continuation state: unconstrained condensed solution with zero
/// multipliers.
inline CgmresState cgmres_init(const CondensedQp& qp, const Vector& x0, int gmres_iters,
                               double xi) {
    if (gmres_iters < 1) throw std::invalid_argument("cgmres_init: gmres_iters must be >= 1");
    if (!(xi > 0.0)) throw std::invalid_argument("cgmres_init: xi must be > 0");
    CgmresState s;
    const Vector q = qp.q_map * x0;
    const Vector u = solve_linear(qp.H, (-1.0) * q);
    s.omega = concat(u, Vector(qp.g0_u.size(), 0.0));
    s.gmres_iters = gmres_iters;
    s.xi = xi;
    return s;
}

/// One continuation step: solves (dF/domega) omega' = -(xi F + dF/dt) with a
/// fixed number of matrix-free GMRES iterations and advances omega by
/// explicit Euler. dF/dt is a forward difference through the one-step state
/// prediction x_pred.
inline CgmresState cgmres_step(const CgmresState& state, const Vector& x, const Vector& x_pred,
                               double dt, const CondensedQp& qp) {
    CgmresState next = state;
    const Vector F0 = cgmres_residual(qp, state.omega, x);

    Vector dFdt = cgmres_residual(qp, state.omega, x_pred);
    axpy(-1.0, F0, dFdt);
    dFdt = (1.0 / dt) * dFdt;

    Vector rhs = (-state.xi) * F0;
    axpy(-1.0, dFdt, rhs);

    const double h = state.fd_step * (1.0 + norm2(state.omega));
    auto Av = [&](const Vector& v) {
        Vector pert = state.omega;
        axpy(h, v, pert);
        Vector Fv = cgmres_residual(qp, pert, x);
        axpy(-1.0, F0, Fv);
        return (1.0 / h) * Fv;
    };

    Vector omega_dot;
    if (!detail::gmres_fixed(Av, rhs, state.gmres_iters, omega_dot)) {
        next.warned = true;
        return next;   // leave omega unchanged on breakdown
    }
    axpy(dt, omega_dot, next.omega);
    next.warned = false;
    return next;
}

/// Applied input of the continuation controller: first m entries of omega.
inline Vector cgmres_input(const CgmresState& state, std::size_t m) {
    return Vector(state.omega.begin(), state.omega.begin() + static_cast<std::ptrdiff_t>(m));
}

} // namespace pdgmpc
