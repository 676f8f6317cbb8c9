#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "pdgmpc/matrix.hpp"
#include "pdgmpc/model.hpp"
#include "pdgmpc/numkit.hpp"
#include "pdgmpc/ocp.hpp"
#include "pdgmpc/pdg.hpp"

namespace pdgmpc {

/// Quadratic supply-rate matrices for the plant side.
struct PlantSupply {
    Matrix H_P_c;   // continuous supply, (n+m) square
    Matrix H_P_d;   // discrete supply
    Matrix P_P_d;   // discrete quadratic correction, PSD
};

/// Supply/storage matrices for the controller side.
struct ControllerSupply {
    Matrix H_C_c;     // (n+m)N + n square
    Matrix Hbar_C_c;  // (n+m)N + n + n_lambda square
    Matrix X;         // maps z to tau*kappa*grad h*(lambda + beta*h)
    Matrix Pbar;      // smoothness bound, PSD
    Matrix Pbar_C_d;  // discrete correction, PSD
};

enum class CertificateKind { continuous, discrete, continuous_barred };

struct Certificate {
    double delta_star = 0.0;
    double lambda_max_star = 0.0;
    bool feasible = false;         // lambda_max_star < 0
    CertificateKind kind = CertificateKind::continuous;
    std::string matrices_hash;
    bool boundary_hit = false;     // delta search ended at a bound of [1e-6, 1e6]
};

struct CertifyOptions {
    bool use_P_variant = true;          // replace sigma*I by P in the controller supply
    bool quadratic_smoothness = true;   // quadratic-objective form of Pbar
    const ProjectionPair* projection = nullptr;   // projected W when set
};

/// Continuous plant supply [[Sym(A_c), B_c/2], [B_c'/2, 0]]. Requires
/// Sym(A_c) negative definite; otherwise pre-stabilize first.
inline Matrix plant_supply_ct(const ContinuousPlant& plant) {
    const std::size_t n = plant.state_dim(), m = plant.input_dim();
    const Matrix Sym = sym_part(plant.A_c);
    if (sym_eig_max(Sym).max_eigenvalue >= 0.0)
        throw std::runtime_error(
            "plant_supply_ct: Sym(A_c) is not negative definite; apply pre_stabilize first");
    Matrix H(n + m, n + m);
    H.set_block(0, 0, Sym);
    H.set_block(0, n, 0.5 * plant.B_c);
    H.set_block(n, 0, 0.5 * plant.B_c.transpose());
    return H;
}

/// Discrete supply pair of the sampled plant:
///   H_P_d = [[Sym(A_d)-I, B_d/2], [B_d'/2, 0]] / dt
///   P_P_d = V'V / (2 dt^2),  V = [A_d - I, B_d]
/// With these the stored-energy inequality holds with equality.
inline std::pair<Matrix, Matrix> plant_supply_dt(const DiscretePlant& plant_dt) {
    if (!(plant_dt.step > 0.0)) throw std::invalid_argument("plant_supply_dt: step must be > 0");
    const std::size_t n = plant_dt.A_d.rows(), m = plant_dt.B_d.cols();
    const double dt = plant_dt.step;

    Matrix Sym = sym_part(plant_dt.A_d);
    Sym -= Matrix::identity(n);
    if (sym_eig_max(Sym).max_eigenvalue >= 0.0)
        throw std::runtime_error("plant_supply_dt: Sym(A_d) - I is not negative definite");

    Matrix H(n + m, n + m);
    H.set_block(0, 0, (1.0 / dt) * Sym);
    H.set_block(0, n, (0.5 / dt) * plant_dt.B_d);
    H.set_block(n, 0, (0.5 / dt) * plant_dt.B_d.transpose());

    Matrix V(n, n + m);
    Matrix AmI = plant_dt.A_d;
    AmI -= Matrix::identity(n);
    V.set_block(0, 0, AmI);
    V.set_block(0, n, plant_dt.B_d);
    const Matrix P = (0.5 / (dt * dt)) * (V.transpose() * V);
    return {H, P};
}

/// Feedback gain making Sym(A_c + B_c K) negative definite, found by
/// subgradient descent on the convex map K -> lambda_max(Sym(A_c + B_c K)).
inline std::pair<Matrix, ContinuousPlant> pre_stabilize(const ContinuousPlant& plant,
                                                        double margin = 1e-2) {
    const std::size_t n = plant.state_dim(), m = plant.input_dim();
    Matrix K(m, n);

    auto top_pair = [&](const Matrix& Kc) {
        Matrix Acl = plant.A_c + plant.B_c * Kc;
        Matrix S = sym_part(Acl);
        Matrix V;
        Vector ev = detail::jacobi_eigenvalues(S, &V);
        std::size_t arg = 0;
        for (std::size_t i = 1; i < ev.size(); ++i)
            if (ev[i] > ev[arg]) arg = i;
        Vector v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = V(i, arg);
        return std::make_pair(ev[arg], v);
    };

    auto [lmax, v] = top_pair(K);
    if (lmax < 0.0) return {K, plant};   // already dissipative

    std::vector<double> tried;
    const int max_iters = 500;
    for (int it = 0; it < max_iters; ++it) {
        // subgradient of lambda_max wrt K is (B'v) v'
        const Vector Btv = plant.B_c.transpose_times(v);
        Matrix Gsub(m, n);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) Gsub(i, j) = Btv[i] * v[j];
        const double gn = Gsub.frobenius_norm();
        if (gn < 1e-14) break;   // no descent direction through B

        // backtracking on the step length
        double stepl = (std::abs(lmax) + 1.0) / (gn * gn);
        bool improved = false;
        for (int ls = 0; ls < 60; ++ls) {
            Matrix Kc = K - stepl * Gsub;
            auto [l2, v2] = top_pair(Kc);
            if (l2 < lmax - 1e-12 * std::max(1.0, std::abs(lmax))) {
                K = std::move(Kc);
                lmax = l2;
                v = std::move(v2);
                improved = true;
                break;
            }
            stepl *= 0.5;
        }
        tried.push_back(lmax);
        if (!improved) break;
        if (lmax < -margin) {
            Matrix Acl = plant.A_c + plant.B_c * K;
            return {K, ContinuousPlant(std::move(Acl), plant.B_c)};
        }
    }
    std::string msg = "pre_stabilize: could not reach Sym(A_c + B_c K) < 0; margins reached:";
    const std::size_t show = std::min<std::size_t>(tried.size(), 8);
    for (std::size_t i = 0; i < show; ++i) msg += " " + std::to_string(tried[i]);
    throw std::runtime_error(msg);
}

/// Controller supply matrices of the continuous analysis. With the P-variant
/// the sigma*I block is replaced by the full weight matrix P.
inline std::pair<Matrix, Matrix> controller_supply_ct(const OcpSpec& spec, const PdgParams& p,
                                                      bool use_P_variant) {
    const std::size_t nw = spec.primal_dim();
    const std::size_t n = spec.n;
    const std::size_t nl = spec.eq_dim();
    const double beta = p.beta, alpha = p.alpha;
    const double tau = p.tau(), kappa = p.kappa();

    const Matrix CtC = spec.C.transpose() * spec.C;
    const Matrix CtD = spec.C.transpose() * spec.D;
    const Matrix DtD = spec.D.transpose() * spec.D;

    Matrix H(nw + n, nw + n);
    {
        Matrix tl = (-beta) * CtC;
        if (use_P_variant)
            tl -= spec.P;
        else
            tl -= spec.sigma * Matrix::identity(nw);
        H.set_block(0, 0, tl);
    }
    H.set_block(0, nw, (-beta) * CtD);
    H.set_block(nw, 0, (-beta) * CtD.transpose());
    H.set_block(nw, nw, (tau / (4.0 * alpha)) * DtD);

    Matrix Hb(nw + n + nl, nw + n + nl);
    {
        Matrix tl = (-tau * kappa * beta) * CtC;
        if (use_P_variant)
            tl -= spec.P;
        else
            tl -= spec.sigma * Matrix::identity(nw);
        Hb.set_block(0, 0, tl);
    }
    Hb.set_block(0, nw, (-0.5 * tau * kappa * beta) * CtD);
    Hb.set_block(nw, 0, (-0.5 * tau * kappa * beta) * CtD.transpose());
    Hb.set_block(0, nw + n, (-tau * alpha * beta) * spec.C.transpose());
    Hb.set_block(nw + n, 0, (-tau * alpha * beta) * spec.C);
    Hb.set_block(nw, nw + n, (0.5 * tau) * spec.D.transpose());
    Hb.set_block(nw + n, nw, (0.5 * tau) * spec.D);
    Hb.set_block(nw + n, nw + n, (-tau * alpha) * Matrix::identity(nl));

    return {H, Hb};
}

/// Smoothness matrices: X with Xz = tau*kappa*C'(beta*Cw + beta*Dx + lambda),
/// the bound Pbar on |grad f + Xz|^2, and the discrete correction Pbar_C_d.
inline ControllerSupply smoothness_matrices(const OcpSpec& spec, const PdgParams& p,
                                            bool quadratic) {
    const std::size_t nw = spec.primal_dim();
    const std::size_t n = spec.n;
    const std::size_t nl = spec.eq_dim();
    const double tau = p.tau(), kappa = p.kappa();

    ControllerSupply cs;
    {
        Matrix stacked(nl, nw + n + nl);
        stacked.set_block(0, 0, p.beta * spec.C);
        stacked.set_block(0, nw, p.beta * spec.D);
        stacked.set_block(0, nw + n, Matrix::identity(nl));
        cs.X = (tau * kappa) * (spec.C.transpose() * stacked);
    }

    if (quadratic) {
        Matrix PX = cs.X;
        PX.set_block(0, 0, spec.P + cs.X.block(0, 0, nw, nw));
        cs.Pbar = PX.transpose() * PX;
    } else {
        const double xnorm = spectral_norm(cs.X);
        cs.Pbar = cs.X.transpose() * cs.X;
        const double shift = spec.rho * spec.rho + 2.0 * spec.rho * xnorm;
        for (std::size_t i = 0; i < cs.Pbar.rows(); ++i) cs.Pbar(i, i) += shift;
    }

    {
        Matrix CDa(nl, nw + n + nl);
        CDa.set_block(0, 0, spec.C);
        CDa.set_block(0, nw, spec.D);
        CDa.set_block(0, nw + n, (-p.alpha) * Matrix::identity(nl));
        cs.Pbar_C_d = 0.5 * (cs.Pbar + (tau * tau) * (CDa.transpose() * CDa));
    }
    return cs;
}

/// W maps [w; x] to [x; u]; the barred variant zero-pads the lambda columns.
/// With a projection the input row becomes u = E(Kw + Lx).
inline std::pair<Matrix, Matrix> build_W(const OcpSpec& spec, const ProjectionPair* proj) {
    const std::size_t nw = spec.primal_dim();
    const std::size_t n = spec.n, m = spec.m;
    const std::size_t nl = spec.eq_dim();

    Matrix W(n + m, nw + n);
    W.set_block(0, nw, Matrix::identity(n));
    if (proj) {
        W.set_block(n, 0, spec.E * proj->K);
        W.set_block(n, nw, spec.E * proj->L);
    } else {
        W.set_block(n, 0, spec.E);
    }

    Matrix Wbar(n + m, nw + n + nl);
    Wbar.set_block(0, 0, W);
    return {W, Wbar};
}

namespace detail {

struct Pencil {
    Matrix M0;
    Matrix M1;
};

// minimizes lambda_max(M0 + delta*M1) over log10(delta) in [-6, 6]
inline Certificate minimize_pencil(const Pencil& pencil, CertificateKind kind,
                                   double log_tol = 1e-6) {
    auto lmax_at = [&](double log_delta) {
        const double d = std::pow(10.0, log_delta);
        Matrix M = pencil.M0 + d * pencil.M1;
        return sym_eig_max(M).max_eigenvalue;
    };
    const auto [log_d, lmax] = golden_min(lmax_at, -6.0, 6.0, log_tol);

    Certificate cert;
    cert.delta_star = std::pow(10.0, log_d);
    cert.lambda_max_star = lmax;
    cert.feasible = lmax < 0.0;
    cert.kind = kind;
    cert.boundary_hit = (log_d < -6.0 + 1e-3) || (log_d > 6.0 - 1e-3);
    cert.matrices_hash = fnv1a_digest({&pencil.M0, &pencil.M1});
    return cert;
}

} // namespace detail

/// Pencil of the continuous condition H_c(delta) = H_C_c + delta W'H_P_c W.
inline detail::Pencil continuous_pencil(const OcpSpec& spec, const PdgParams& p,
                                        const ContinuousPlant& plant, const CertifyOptions& opt) {
    const auto [H_C_c, Hbar_C_c] = controller_supply_ct(spec, p, opt.use_P_variant);
    (void)Hbar_C_c;
    const Matrix H_P_c = plant_supply_ct(plant);
    const auto [W, Wbar] = build_W(spec, opt.projection);
    (void)Wbar;
    return {H_C_c, W.transpose() * H_P_c * W};
}

/// Pencil of the barred continuous condition (same sign as H_c by the Schur
/// argument, and the dt -> 0 limit of the discrete pencil).
inline detail::Pencil continuous_barred_pencil(const OcpSpec& spec, const PdgParams& p,
                                               const ContinuousPlant& plant,
                                               const CertifyOptions& opt) {
    const auto [H_C_c, Hbar_C_c] = controller_supply_ct(spec, p, opt.use_P_variant);
    (void)H_C_c;
    const Matrix H_P_c = plant_supply_ct(plant);
    const auto [W, Wbar] = build_W(spec, opt.projection);
    (void)W;
    return {Hbar_C_c, Wbar.transpose() * H_P_c * Wbar};
}

/// Pencil of the sampled-data condition
///   Hbar_d(delta) = Hbar_C_c + zeta*dt*Pbar_C_d + delta W'(H_P_d + dt P_P_d)W.
inline detail::Pencil discrete_pencil(const OcpSpec& spec, const PdgParams& p,
                                      const DiscretePlant& plant_dt, const CertifyOptions& opt) {
    const auto [H_C_c, Hbar_C_c] = controller_supply_ct(spec, p, opt.use_P_variant);
    (void)H_C_c;
    const ControllerSupply cs = smoothness_matrices(spec, p, opt.quadratic_smoothness);
    const auto [H_P_d, P_P_d] = plant_supply_dt(plant_dt);
    const auto [W, Wbar] = build_W(spec, opt.projection);
    (void)W;

    Matrix M0 = Hbar_C_c + (p.zeta * plant_dt.step) * cs.Pbar_C_d;
    Matrix M1 = Wbar.transpose() * ((H_P_d + plant_dt.step * P_P_d) * Wbar);
    return {std::move(M0), std::move(M1)};
}

/// Assembled Hbar_d at a fixed delta (used by the analytic gamma bound).
inline Matrix assemble_Hbar_d(const OcpSpec& spec, const PdgParams& p,
                              const DiscretePlant& plant_dt, double delta,
                              const CertifyOptions& opt) {
    const auto pencil = discrete_pencil(spec, p, plant_dt, opt);
    return pencil.M0 + delta * pencil.M1;
}

/// Continuous-time certificate (independent of zeta and dt).
inline Certificate certify_ct(const OcpSpec& spec, const PdgParams& p,
                              const ContinuousPlant& plant, const CertifyOptions& opt = {}) {
    return detail::minimize_pencil(continuous_pencil(spec, p, plant, opt),
                                   CertificateKind::continuous);
}

/// Barred continuous certificate; sign-equivalent to certify_ct and the
/// reference point for the dt -> 0 limit of certify_dt.
inline Certificate certify_ct_barred(const OcpSpec& spec, const PdgParams& p,
                                     const ContinuousPlant& plant, const CertifyOptions& opt = {}) {
    return detail::minimize_pencil(continuous_barred_pencil(spec, p, plant, opt),
                                   CertificateKind::continuous_barred);
}

/// Sampled-data certificate at the configured zeta and dt.
inline Certificate certify_dt(const OcpSpec& spec, const PdgParams& p,
                              const DiscretePlant& plant_dt, const CertifyOptions& opt = {}) {
    return detail::minimize_pencil(discrete_pencil(spec, p, plant_dt, opt),
                                   CertificateKind::discrete);
}

} // namespace pdgmpc
