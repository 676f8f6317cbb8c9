#pragma once

#include <stdexcept>
#include <string>

#include "pdgmpc/matrix.hpp"
#include "pdgmpc/numkit.hpp"

namespace pdgmpc {

/// Continuous-time linear plant  x' = A_c x + B_c u.
struct ContinuousPlant {
    Matrix A_c;
    Matrix B_c;

    ContinuousPlant(Matrix A, Matrix B) : A_c(std::move(A)), B_c(std::move(B)) {
        if (!A_c.is_square())
            throw std::invalid_argument("ContinuousPlant: A_c must be square");
        if (B_c.rows() != A_c.rows())
            throw std::invalid_argument("ContinuousPlant: B_c has " + std::to_string(B_c.rows()) +
                                        " rows, expected " + std::to_string(A_c.rows()));
        if (!A_c.all_finite() || !B_c.all_finite())
            throw std::invalid_argument("ContinuousPlant: non-finite entries");
    }

    std::size_t state_dim() const { return A_c.rows(); }
    std::size_t input_dim() const { return B_c.cols(); }
};

/// Zero-order-hold discretization of a plant at a fixed step.
struct DiscretePlant {
    Matrix A_d;
    Matrix B_d;
    double step = 0.0;
};

/// Steady state/input pair and the residual of the balance A_c x + B_c u = 0.
struct SteadyTarget {
    Vector x_ref;
    Vector u_ref;
    double residual = 0.0;
};

/// Exact ZOH discretization: A_d = e^{A_c h}, B_d from the augmented
/// exponential of [[A_c, B_c], [0, 0]] * h.
inline DiscretePlant discretize(const ContinuousPlant& plant, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("discretize: step must be positive");
    const std::size_t n = plant.state_dim();
    const std::size_t m = plant.input_dim();

    Matrix aug(n + m, n + m);
    aug.set_block(0, 0, plant.A_c * step);
    aug.set_block(0, n, plant.B_c * step);
    const Matrix E = expm(aug);

    DiscretePlant d;
    d.A_d = E.block(0, 0, n, n);
    d.B_d = E.block(0, n, n, m);
    d.step = step;
    return d;
}

/// Least-squares steady input for a target state: B_c u = -A_c x_ref, solved
/// via the normal equations (input dimension is small everywhere here).
inline SteadyTarget steady_input(const ContinuousPlant& plant, const Vector& x_ref, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("steady_input: tol must be positive");
    if (x_ref.size() != plant.state_dim())
        throw std::invalid_argument("steady_input: x_ref has length " + std::to_string(x_ref.size()) +
                                    ", expected " + std::to_string(plant.state_dim()));

    const Vector rhs_full = (-1.0) * (plant.A_c * x_ref);
    const Matrix BtB = plant.B_c.transpose() * plant.B_c;
    const Vector Btr = plant.B_c.transpose_times(rhs_full);
    const Vector u = solve_linear(BtB, Btr);

    Vector resid = plant.A_c * x_ref;
    axpy(1.0, plant.B_c * u, resid);
    const double r = norm2(resid);
    if (r > tol)
        throw std::runtime_error("steady_input: no steady input reaches x_ref, residual " +
                                 std::to_string(r) + " exceeds " + std::to_string(tol));

    return SteadyTarget{x_ref, u, r};
}

/// Shift into error coordinates around the steady target.
inline std::pair<Vector, Vector> to_error_coordinates(const Vector& x, const Vector& u,
                                                      const SteadyTarget& target) {
    if (x.size() != target.x_ref.size() || u.size() != target.u_ref.size())
        throw std::invalid_argument("to_error_coordinates: dimension mismatch");
    return {x - target.x_ref, u - target.u_ref};
}

inline std::pair<Vector, Vector> from_error_coordinates(const Vector& x_err, const Vector& u_err,
                                                        const SteadyTarget& target) {
    if (x_err.size() != target.x_ref.size() || u_err.size() != target.u_ref.size())
        throw std::invalid_argument("from_error_coordinates: dimension mismatch");
    return {x_err + target.x_ref, u_err + target.u_ref};
}

} // namespace pdgmpc
