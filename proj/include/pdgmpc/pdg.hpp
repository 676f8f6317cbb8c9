#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "pdgmpc/matrix.hpp"
#include "pdgmpc/model.hpp"
#include "pdgmpc/ocp.hpp"

namespace pdgmpc {

/// Controller constants. kappa and tau are always derived from alpha/beta.
struct PdgParams {
    double alpha = 0.2;   // > 0
    double beta = 0.1;    // >= 0
    double zeta = 1.0;    // > 0, overall controller gain
    double dt = 1e-3;     // > 0, sampling period
    double c = 0.5;       // in (0,1), backtracking factor

    double kappa() const { return 1.0 + 2.0 * alpha * beta; }
    double tau() const { return 1.0 / (1.0 + alpha * beta); }

    void validate() const {
        if (!(alpha > 0.0)) throw std::invalid_argument("PdgParams: alpha must be > 0");
        if (!(beta >= 0.0)) throw std::invalid_argument("PdgParams: beta must be >= 0");
        if (!(zeta > 0.0)) throw std::invalid_argument("PdgParams: zeta must be > 0");
        if (!(dt > 0.0)) throw std::invalid_argument("PdgParams: dt must be > 0");
        if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("PdgParams: c must be in (0,1)");
    }
};

/// Primal-dual iterate. mu stays componentwise nonnegative along any
/// trajectory started with mu >= 0.
struct PdgState {
    Vector w;
    Vector mu;
    Vector lambda;

    static PdgState zero(const OcpSpec& spec) {
        return PdgState{Vector(spec.primal_dim(), 0.0), Vector(spec.ineq_dim(), 0.0),
                        Vector(spec.eq_dim(), 0.0)};
    }

    double norm() const {
        return std::sqrt(dot(w, w) + dot(mu, mu) + dot(lambda, lambda));
    }
};

/// One-step increments of the controller state.
struct PdgDelta {
    Vector dw;
    Vector dmu;
    Vector dlambda;

    double norm() const {
        return std::sqrt(dot(dw, dw) + dot(dmu, dmu) + dot(dlambda, dlambda));
    }
};

struct StepOutcome {
    PdgState next;
    Vector u;            // applied input (error coordinates)
    double gamma = 1.0;
    int backtracks = 0;
    double delta_V = 0.0;
};

/// [a]_b^+ : componentwise a_i where b_i > 0, max(0, a_i) where b_i = 0.
inline Vector plus_op(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("plus_op: length mismatch");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (b[i] < 0.0)
            throw std::invalid_argument("plus_op: b must be nonnegative, component " +
                                        std::to_string(i) + " is " + std::to_string(b[i]));
        out[i] = (b[i] > 0.0) ? a[i] : std::max(0.0, a[i]);
    }
    return out;
}

/// Dual step-size vector of Definition 1 (before the gamma scaling).
/// Component i is 1 unless the unit step would drive mu_i negative, in which
/// case it is scaled to land exactly on zero.
inline Vector eta_bar(const Vector& mu, const Vector& gplus, double zeta_dt) {
    if (mu.size() != gplus.size()) throw std::invalid_argument("eta_bar: length mismatch");
    Vector eta(mu.size(), 1.0);
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (mu[i] < 0.0)
            throw std::invalid_argument("eta_bar: mu must be nonnegative, component " +
                                        std::to_string(i));
        if (mu[i] + zeta_dt * gplus[i] < 0.0)
            eta[i] = -mu[i] / (zeta_dt * gplus[i]);   // gplus[i] < 0 here
    }
    return eta;
}

/// Right-hand side of the continuous-time controller (w', mu', lambda').
inline PdgDelta cont_field(const PdgState& s, const Vector& x, const PdgParams& p,
                           const OcpSpec& spec) {
    const double zeta = p.zeta, kappa = p.kappa(), tau = p.tau();

    const Vector h = spec.eq(s.w, x);
    Vector dlambda = h;
    axpy(-p.alpha, s.lambda, dlambda);
    dlambda = (zeta * tau) * dlambda;                         // zeta*tau*(-alpha*lambda + h)

    const Vector dmu = zeta * plus_op(spec.ineq(s.w), s.mu);  // zeta*[g(w)]+_mu

    Vector inner = s.lambda;                                   // lambda + (beta/zeta)*lambda'
    axpy(p.beta / zeta, dlambda, inner);
    Vector dw = spec.grad_f(s.w);
    axpy(1.0, spec.G.transpose_times(s.mu), dw);
    axpy(kappa, spec.C.transpose_times(inner), dw);
    dw = (-zeta) * dw;

    return PdgDelta{std::move(dw), std::move(dmu), std::move(dlambda)};
}

/// Candidate discrete increments for a given gamma. The branch-two components
/// of the dual update land on -gamma*mu_i exactly, which keeps mu nonnegative
/// in floating point as well as in exact arithmetic.
inline PdgDelta candidate(const PdgState& s, const Vector& x, double gamma, const PdgParams& p,
                          const OcpSpec& spec) {
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw std::invalid_argument("candidate: gamma must be in (0,1]");
    const double zdt = p.zeta * p.dt;
    const double kappa = p.kappa(), tau = p.tau();

    const Vector h = spec.eq(s.w, x);
    const Vector gplus = plus_op(spec.ineq(s.w), s.mu);

    Vector dlambda = h;
    axpy(-p.alpha, s.lambda, dlambda);
    dlambda = (p.zeta * tau * p.dt) * dlambda;

    const Vector eb = eta_bar(s.mu, gplus, zdt);
    Vector dmu(s.mu.size());
    Vector eta_mu(s.mu.size());
    for (std::size_t i = 0; i < s.mu.size(); ++i) {
        const bool landing = s.mu[i] + zdt * gplus[i] < 0.0;
        dmu[i] = landing ? -gamma * s.mu[i] : zdt * gamma * eb[i] * gplus[i];
        eta_mu[i] = gamma * eb[i] * s.mu[i];
    }

    Vector inner = s.lambda;                       // lambda + beta*dlambda/(zeta*dt)
    axpy(p.beta / zdt, dlambda, inner);
    Vector dw = spec.grad_f(s.w);
    axpy(1.0, spec.G.transpose_times(eta_mu), dw);
    axpy(kappa, spec.C.transpose_times(inner), dw);
    dw = (-zdt) * dw;

    return PdgDelta{std::move(dw), std::move(dmu), std::move(dlambda)};
}

inline PdgState advance(const PdgState& s, const PdgDelta& d) {
    PdgState next = s;
    axpy(1.0, d.dw, next.w);
    axpy(1.0, d.dmu, next.mu);
    axpy(1.0, d.dlambda, next.lambda);
    for (double& v : next.mu) v = std::max(v, 0.0);   // guards roundoff only; see eta_bar
    return next;
}

/// Applied input under the configured control law.
inline Vector control_input(const PdgState& s, const Vector& x, const OcpSpec& spec,
                            const ProjectionPair* proj) {
    if (proj) return spec.first_input(proj->apply(s.w, x));
    return spec.first_input(s.w);
}

/// Lyapunov difference Delta V = Delta S^C + zeta * delta * Delta S^P for a
/// candidate step, with the plant advanced by the applied input.
inline double delta_V(const PdgState& s, const Vector& x, const PdgDelta& cand, double delta_star,
                      const PdgParams& p, const DiscretePlant& plant_dt, const OcpSpec& spec,
                      const ProjectionPair* proj) {
    const PdgState next = advance(s, cand);
    const double SC0 = 0.5 * (dot(s.w, s.w) + dot(s.mu, s.mu) + dot(s.lambda, s.lambda));
    const double SC1 = 0.5 * (dot(next.w, next.w) + dot(next.mu, next.mu) +
                              dot(next.lambda, next.lambda));

    const Vector u = control_input(s, x, spec, proj);
    Vector xn = plant_dt.A_d * x;
    axpy(1.0, plant_dt.B_d * u, xn);
    const double dSP = 0.5 * (dot(xn, xn) - dot(x, x));
    return (SC1 - SC0) + p.zeta * delta_star * dSP;
}

struct GammaResult {
    double gamma = 1.0;
    int backtracks = 0;
    PdgDelta delta;      // candidate at the returned gamma
    double delta_V = 0.0;
};

/// Backtracking step-size search: gamma = c^j for the smallest j with
/// Delta V < 0. The candidate is recomputed at every trial because eta
/// enters both the dual and the primal increments.
inline GammaResult find_gamma(const PdgState& s, const Vector& x, const PdgParams& p,
                              double delta_star, const DiscretePlant& plant_dt,
                              const OcpSpec& spec, const ProjectionPair* proj,
                              int max_backtracks = 200) {
    GammaResult r;
    const double scale = s.norm() + norm2(x);
    if (scale <= std::numeric_limits<double>::epsilon()) {
        // exact origin: any gamma keeps the state there
        r.gamma = 1.0;
        r.delta = candidate(s, x, 1.0, p, spec);
        r.delta_V = 0.0;
        return r;
    }

    double gamma = 1.0;
    for (int j = 0; j <= max_backtracks; ++j) {
        PdgDelta cand = candidate(s, x, gamma, p, spec);
        const double dV = delta_V(s, x, cand, delta_star, p, plant_dt, spec, proj);
        if (dV < 0.0) {
            r.gamma = gamma;
            r.backtracks = j;
            r.delta = std::move(cand);
            r.delta_V = dV;
            return r;
        }
        gamma *= p.c;
    }
    throw std::runtime_error(
        "find_gamma: no stable step size after " + std::to_string(max_backtracks) +
        " backtracks; the certificate condition is violated at this state");
}

/// Appendix-style analytic upper bound on admissible gamma: the positive root
/// of a*g^2 + b*g - |z|^2_{-Hbar_d} = 0 at the current state. Returns +inf
/// when every positive gamma is admissible.
inline double analytic_gamma(const PdgState& s, const Vector& x, const PdgParams& p,
                             const OcpSpec& spec, const Matrix& Hbar_d) {
    const double zdt = p.zeta * p.dt;
    const double kappa = p.kappa(), tau = p.tau();

    const Vector h = spec.eq(s.w, x);
    const Vector gplus = plus_op(spec.ineq(s.w), s.mu);
    const Vector eb = eta_bar(s.mu, gplus, zdt);

    Vector eb_mu(s.mu.size()), eb_gp(s.mu.size());
    for (std::size_t i = 0; i < s.mu.size(); ++i) {
        eb_mu[i] = eb[i] * s.mu[i];
        eb_gp[i] = eb[i] * gplus[i];
    }

    // b^I = (eb o mu)' ([g]+ - G w)
    const Vector Gw = spec.G * s.w;
    double bI = 0.0;
    for (std::size_t i = 0; i < eb_mu.size(); ++i) bI += eb_mu[i] * (gplus[i] - Gw[i]);

    // b^II = (eb o mu)' G (grad f + tau*kappa*C'(lambda + beta*h))
    Vector inner = s.lambda;
    axpy(p.beta, h, inner);
    Vector core = spec.grad_f(s.w);
    axpy(tau * kappa, spec.C.transpose_times(inner), core);
    const double bII = dot(eb_mu, spec.G * core);

    // a^II = (|eb o [g]+|^2 + |G'(mu o eb)|^2) / 2
    const Vector Gt_ebmu = spec.G.transpose_times(eb_mu);
    const double aII = 0.5 * (dot(eb_gp, eb_gp) + dot(Gt_ebmu, Gt_ebmu));

    const double a = zdt * aII;
    const double b = bI + zdt * bII;

    const Vector z = concat(s.w, x, s.lambda);
    const double z_quad = -dot(z, Hbar_d * z);   // |z|^2 in the -Hbar_d metric
    if (z_quad < 0.0)
        throw std::invalid_argument("analytic_gamma: Hbar_d is not negative definite at this z");

    if (a > 0.0)
        return (-b + std::sqrt(b * b + 4.0 * a * z_quad)) / (2.0 * a);
    if (b > 0.0)
        return z_quad / b;
    return std::numeric_limits<double>::infinity();
}

/// One controller step: find a stable gamma, apply the increments, emit the
/// input that was applied at this sample.
inline StepOutcome step(const PdgState& s, const Vector& x, const PdgParams& p, double delta_star,
                        const DiscretePlant& plant_dt, const OcpSpec& spec,
                        const ProjectionPair* proj, bool use_algorithm1 = true,
                        int max_backtracks = 200) {
    StepOutcome out;
    out.u = control_input(s, x, spec, proj);
    if (use_algorithm1) {
        GammaResult g = find_gamma(s, x, p, delta_star, plant_dt, spec, proj, max_backtracks);
        out.gamma = g.gamma;
        out.backtracks = g.backtracks;
        out.delta_V = g.delta_V;
        out.next = advance(s, g.delta);
    } else {
        PdgDelta cand = candidate(s, x, 1.0, p, spec);
        out.gamma = 1.0;
        out.delta_V = delta_V(s, x, cand, delta_star, p, plant_dt, spec, proj);
        out.next = advance(s, cand);
    }
    return out;
}

struct ProbeResult {
    PdgState state;
    int iterations = 0;
    bool converged = false;
    double increment_norm = 0.0;
    double ineq_max = 0.0;       // max component of g(w) at the fixed point
    double eq_residual = 0.0;    // |h(w;x) - alpha*lambda|
};

/// Iterates the controller with the plant state frozen until the increments
/// vanish. At the fixed point g(w) <= 0 and h(w;x) = alpha*lambda.
inline ProbeResult equilibrium_probe(const Vector& x_fixed, const PdgParams& p,
                                     const OcpSpec& spec, double tol, int max_iters) {
    ProbeResult r;
    r.state = PdgState::zero(spec);
    const double guard = 1e12;
    for (int it = 0; it < max_iters; ++it) {
        const PdgDelta d = candidate(r.state, x_fixed, 1.0, p, spec);
        r.state = advance(r.state, d);
        r.increment_norm = d.norm();
        r.iterations = it + 1;
        if (r.state.norm() > guard) break;
        if (r.increment_norm <= tol) {
            r.converged = true;
            break;
        }
    }
    const Vector g = spec.ineq(r.state.w);
    r.ineq_max = -std::numeric_limits<double>::infinity();
    for (double v : g) r.ineq_max = std::max(r.ineq_max, v);
    Vector res = spec.eq(r.state.w, x_fixed);
    axpy(-p.alpha, r.state.lambda, res);
    r.eq_residual = norm2(res);
    return r;
}

} // namespace pdgmpc
