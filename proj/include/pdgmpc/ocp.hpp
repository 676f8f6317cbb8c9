#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <tuple>

#include "pdgmpc/matrix.hpp"
#include "pdgmpc/model.hpp"
#include "pdgmpc/numkit.hpp"

namespace pdgmpc {

/// Which block of the stacked decision vector w = [u_{0:N-1}; x_{1:N}]
/// receives the first objective weight. `physical` puts state_weight on the
/// state block; `literal` puts it on the input block instead.
enum class WeightOrder { physical, literal };

inline WeightOrder parse_weight_order(const std::string& s) {
    if (s == "physical") return WeightOrder::physical;
    if (s == "literal") return WeightOrder::literal;
    throw std::invalid_argument("weight_order must be 'literal' or 'physical', got '" + s + "'");
}

/// Finite-horizon problem in stacked matrix form over w = [u_{0:N-1}; x_{1:N}]:
///   minimize (1/2) w'Pw   s.t.  Gw + g0 <= 0,  Cw + Dx = 0,  u_0 = Ew.
struct OcpSpec {
    std::size_t N = 0;   // horizon length
    std::size_t n = 0;   // state dimension
    std::size_t m = 0;   // input dimension
    double dtau = 0.0;   // model time step inside the horizon

    Matrix P;            // (n+m)N square, symmetric positive definite
    Matrix G;            // n_mu x (n+m)N
    Vector g0;           // n_mu, strictly negative
    Matrix C;            // nN x (n+m)N, full row rank
    Matrix D;            // nN x n
    Matrix E;            // m x (n+m)N, picks u_0

    double sigma = 0.0;  // min eigenvalue of P
    double rho = 0.0;    // max eigenvalue of P

    std::size_t primal_dim() const { return (n + m) * N; }
    std::size_t ineq_dim() const { return g0.size(); }
    std::size_t eq_dim() const { return C.rows(); }

    Vector grad_f(const Vector& w) const { return P * w; }
    double objective(const Vector& w) const { return 0.5 * dot(w, P * w); }
    Vector ineq(const Vector& w) const { return G * w + g0; }
    Vector eq(const Vector& w, const Vector& x) const { return C * w + D * x; }
    Vector first_input(const Vector& w) const { return E * w; }
};

/// Closed-form projector onto { w : Cw + Dx = 0 }:  w_proj = Kw + Lx.
struct ProjectionPair {
    Matrix K;   // (n+m)N square, idempotent, CK = 0
    Matrix L;   // (n+m)N x n, CL = -D

    Vector apply(const Vector& w, const Vector& x) const { return K * w + L * x; }
};

/// Input-only condensed problem: states eliminated through the dynamics.
///   minimize (1/2) u'Hu + (q_map x)'u   s.t.  G_u u + g0_u <= 0.
struct CondensedQp {
    Matrix H;       // mN square positive definite
    Matrix q_map;   // mN x n
    Matrix G_u;     // n_mu x mN
    Vector g0_u;    // n_mu
};

/// Stacks the N dynamics residuals x_{k+1} - A_h x_k - B_h u_k into Cw + Dx.
inline std::pair<Matrix, Matrix> build_equality(const Matrix& A_h, const Matrix& B_h, std::size_t N) {
    if (!A_h.is_square()) throw std::invalid_argument("build_equality: A_h must be square");
    if (B_h.rows() != A_h.rows())
        throw std::invalid_argument("build_equality: B_h has " + std::to_string(B_h.rows()) +
                                    " rows, expected " + std::to_string(A_h.rows()));
    if (N < 1) throw std::invalid_argument("build_equality: N must be >= 1");

    const std::size_t n = A_h.rows();
    const std::size_t m = B_h.cols();
    Matrix C(n * N, (n + m) * N);
    Matrix D(n * N, n);
    for (std::size_t k = 0; k < N; ++k) {
        C.set_block(k * n, m * N + k * n, Matrix::identity(n));   // x_{k+1}
        C.set_block(k * n, k * m, (-1.0) * B_h);                  // u_k
        if (k == 0)
            D.set_block(0, 0, (-1.0) * A_h);
        else
            C.set_block(k * n, m * N + (k - 1) * n, (-1.0) * A_h); // x_k
    }
    return {C, D};
}

/// Upper bounds on each input in the horizon, already shifted into error
/// coordinates. Requires the shifted bound positive so that g(0) < 0.
inline std::pair<Matrix, Vector> build_inequality(const Vector& shifted_upper, std::size_t N,
                                                  std::size_t n) {
    if (N < 1) throw std::invalid_argument("build_inequality: N must be >= 1");
    const std::size_t m = shifted_upper.size();
    for (std::size_t i = 0; i < m; ++i)
        if (!(shifted_upper[i] > 0.0))
            throw std::invalid_argument(
                "build_inequality: shifted bound must be positive so that g(0) < 0; component " +
                std::to_string(i) + " is " + std::to_string(shifted_upper[i]));

    Matrix G(m * N, (n + m) * N);
    Vector g0(m * N);
    for (std::size_t k = 0; k < N; ++k) {
        for (std::size_t i = 0; i < m; ++i) {
            G(k * m + i, k * m + i) = 1.0;
            g0[k * m + i] = -shifted_upper[i];
        }
    }
    return {G, g0};
}

/// Diagonal objective weight over w. Physical order weights the state block
/// by state_weight; literal order swaps the roles of the two numbers.
inline Matrix build_objective(double state_weight, double input_weight, std::size_t N,
                              std::size_t n, std::size_t m, WeightOrder order,
                              double* sigma_out = nullptr, double* rho_out = nullptr) {
    if (!(state_weight > 0.0) || !(input_weight > 0.0))
        throw std::invalid_argument("build_objective: weights must be positive");

    const double wu = (order == WeightOrder::physical) ? input_weight : state_weight;
    const double wx = (order == WeightOrder::physical) ? state_weight : input_weight;

    Vector diag((n + m) * N);
    for (std::size_t i = 0; i < m * N; ++i) diag[i] = wu;
    for (std::size_t i = m * N; i < diag.size(); ++i) diag[i] = wx;
    if (sigma_out) *sigma_out = std::min(wu, wx);
    if (rho_out) *rho_out = std::max(wu, wx);
    return Matrix::diag(diag);
}

/// Selects u_0 from w.
inline Matrix build_extractor(std::size_t N, std::size_t n, std::size_t m) {
    Matrix E(m, (n + m) * N);
    for (std::size_t i = 0; i < m; ++i) E(i, i) = 1.0;
    return E;
}

/// K = I - C'(CC')^{-1}C,  L = -C'(CC')^{-1}D.
inline ProjectionPair build_projection(const Matrix& C, const Matrix& D) {
    const Matrix CCt = C * C.transpose();
    Matrix S;
    try {
        S = solve_linear(CCt, C);               // (CC')^{-1} C
    } catch (const std::runtime_error&) {
        throw std::runtime_error("build_projection: CC' is singular; C is rank deficient");
    }
    const Matrix CtS = C.transpose() * S;        // C'(CC')^{-1}C
    Matrix K = Matrix::identity(C.cols());
    K -= CtS;
    const Matrix L = (-1.0) * (C.transpose() * solve_linear(CCt, D));
    return ProjectionPair{K, L};
}

/// Appends extra linear equality rows to an assembled (C, D) pair.
inline void append_equality(Matrix& C, Matrix& D, const Matrix& C_extra, const Matrix& D_extra) {
    if (C_extra.cols() != C.cols() || D_extra.cols() != D.cols() || C_extra.rows() != D_extra.rows())
        throw std::invalid_argument("append_equality: extra rows have inconsistent dimensions");
    Matrix Cn(C.rows() + C_extra.rows(), C.cols());
    Matrix Dn(D.rows() + D_extra.rows(), D.cols());
    Cn.set_block(0, 0, C);
    Cn.set_block(C.rows(), 0, C_extra);
    Dn.set_block(0, 0, D);
    Dn.set_block(D.rows(), 0, D_extra);
    C = std::move(Cn);
    D = std::move(Dn);
}

/// Assembles the full OcpSpec for input-bounded tracking in error coordinates.
inline OcpSpec make_ocp(const Matrix& A_h, const Matrix& B_h, double dtau, std::size_t N,
                        double state_weight, double input_weight, WeightOrder order,
                        const Vector& shifted_upper) {
    OcpSpec spec;
    spec.N = N;
    spec.n = A_h.rows();
    spec.m = B_h.cols();
    spec.dtau = dtau;
    std::tie(spec.C, spec.D) = build_equality(A_h, B_h, N);
    std::tie(spec.G, spec.g0) = build_inequality(shifted_upper, N, spec.n);
    spec.P = build_objective(state_weight, input_weight, N, spec.n, spec.m, order,
                             &spec.sigma, &spec.rho);
    spec.E = build_extractor(N, spec.n, spec.m);
    return spec;
}

/// Forced-response maps of the horizon dynamics: x_{1:N} = Phi x0 + Gamma u.
inline std::pair<Matrix, Matrix> build_state_maps(const Matrix& A_h, const Matrix& B_h,
                                                  std::size_t N) {
    const std::size_t n = A_h.rows(), m = B_h.cols();
    Matrix Phi(n * N, n);
    Matrix Gamma(n * N, m * N);

    Matrix Apow = Matrix::identity(n);
    std::vector<Matrix> powers;   // A_h^0 .. A_h^{N-1}
    powers.reserve(N);
    for (std::size_t k = 0; k < N; ++k) {
        powers.push_back(Apow);
        Apow = A_h * Apow;
        Phi.set_block(k * n, 0, Apow);
    }
    for (std::size_t k = 0; k < N; ++k)
        for (std::size_t j = 0; j <= k; ++j)
            Gamma.set_block(k * n, j * m, powers[k - j] * B_h);
    return {Phi, Gamma};
}

/// Eliminates the state block through the dynamics, leaving a strictly
/// convex QP in the input sequence.
inline CondensedQp condense(const OcpSpec& spec, const Matrix& A_h, const Matrix& B_h) {
    const std::size_t N = spec.N, n = spec.n, m = spec.m;
    const auto [Phi, Gamma] = build_state_maps(A_h, B_h, N);

    const Matrix Pu = spec.P.block(0, 0, m * N, m * N);
    const Matrix Px = spec.P.block(m * N, m * N, n * N, n * N);

    CondensedQp qp;
    qp.H = Pu + Gamma.transpose() * Px * Gamma;
    qp.q_map = Gamma.transpose() * (Px * Phi);
    // inequality rows act on the input block only in this problem family
    qp.G_u = spec.G.block(0, 0, spec.ineq_dim(), m * N);
    qp.g0_u = spec.g0;
    return qp;
}

} // namespace pdgmpc
