#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pdgmpc/baselines.hpp"
#include "pdgmpc/model.hpp"
#include "pdgmpc/ocp.hpp"

using namespace pdgmpc;

namespace {

struct DcSetup {
    ContinuousPlant plant;
    DiscretePlant model;
    SteadyTarget target;
    OcpSpec spec;
};

DcSetup dc_setup() {
    ContinuousPlant plant(Matrix(2, 2, {-4.0, -0.03, 0.75, -10.0}), Matrix(2, 1, {2.0, 0.0}));
    DiscretePlant model = discretize(plant, 0.1);
    SteadyTarget target = steady_input(plant, {200.0 / 3.0, 5.0}, 1e-6);
    const Vector shifted = {160.0 - target.u_ref[0]};
    OcpSpec spec = make_ocp(model.A_d, model.B_d, 0.1, 30, 2.0, 0.2, WeightOrder::physical, shifted);
    return {std::move(plant), std::move(model), std::move(target), std::move(spec)};
}

// row rank by plain pivoted elimination (test-side oracle)
std::size_t rank_eliminate(Matrix A) {
    const std::size_t rows = A.rows(), cols = A.cols();
    std::size_t rank = 0;
    for (std::size_t c = 0; c < cols && rank < rows; ++c) {
        std::size_t piv = rank;
        for (std::size_t i = rank + 1; i < rows; ++i)
            if (std::abs(A(i, c)) > std::abs(A(piv, c))) piv = i;
        if (std::abs(A(piv, c)) < 1e-9) continue;
        for (std::size_t j = 0; j < cols; ++j) std::swap(A(rank, j), A(piv, j));
        for (std::size_t i = 0; i < rows; ++i) {
            if (i == rank) continue;
            const double f = A(i, c) / A(rank, c);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < cols; ++j) A(i, j) -= f * A(rank, j);
        }
        ++rank;
    }
    return rank;
}

// full-problem minimizer for tiny instances by enumerating active sets of the
// inequality rows, keeping the equality rows always active
Vector full_problem_argmin(const OcpSpec& spec, const Vector& x) {
    const std::size_t nw = spec.primal_dim();
    const std::size_t ni = spec.ineq_dim();
    const std::size_t ne = spec.eq_dim();
    REQUIRE(ni <= 12);

    Vector best;
    double best_obj = std::numeric_limits<double>::infinity();
    for (std::size_t mask = 0; mask < (1u << ni); ++mask) {
        std::vector<std::size_t> act;
        for (std::size_t i = 0; i < ni; ++i)
            if (mask & (1u << i)) act.push_back(i);

        const std::size_t rows = ne + act.size();
        Matrix KKT(nw + rows, nw + rows);
        KKT.set_block(0, 0, spec.P);
        Vector rhs(nw + rows, 0.0);
        for (std::size_t r = 0; r < ne; ++r) {
            for (std::size_t j = 0; j < nw; ++j) {
                KKT(nw + r, j) = spec.C(r, j);
                KKT(j, nw + r) = spec.C(r, j);
            }
            double dx = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) dx += spec.D(r, j) * x[j];
            rhs[nw + r] = -dx;
        }
        for (std::size_t a = 0; a < act.size(); ++a) {
            for (std::size_t j = 0; j < nw; ++j) {
                KKT(nw + ne + a, j) = spec.G(act[a], j);
                KKT(j, nw + ne + a) = spec.G(act[a], j);
            }
            rhs[nw + ne + a] = -spec.g0[act[a]];
        }

        Vector sol;
        try {
            sol = solve_linear(KKT, rhs);
        } catch (const std::runtime_error&) {
            continue;
        }
        const Vector w(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(nw));

        bool ok = true;
        const Vector g = spec.ineq(w);
        for (std::size_t i = 0; i < ni; ++i)
            if (g[i] > 1e-8) ok = false;
        for (std::size_t a = 0; a < act.size(); ++a)
            if (sol[nw + ne + a] < -1e-8) ok = false;
        if (!ok) continue;

        const double obj = spec.objective(w);
        if (obj < best_obj) {
            best_obj = obj;
            best = w;
        }
    }
    REQUIRE(!best.empty());
    return best;
}

} // namespace

TEST_CASE("build_equality single-step structure") {
    Matrix A(2, 2, {1.0, 2.0, 3.0, 4.0});
    Matrix B(2, 1, {5.0, 6.0});
    const auto [C, D] = build_equality(A, B, 1);
    REQUIRE(C.rows() == 2);
    REQUIRE(C.cols() == 3);
    CHECK(C(0, 0) == -5.0);
    CHECK(C(1, 0) == -6.0);
    CHECK(C(0, 1) == 1.0);
    CHECK(C(1, 2) == 1.0);
    CHECK((D - (-1.0) * A).max_abs() == 0.0);
}

TEST_CASE("build_equality two-step block bidiagonal structure") {
    Matrix A(2, 2, {1.0, 2.0, 3.0, 4.0});
    Matrix B(2, 1, {5.0, 6.0});
    const auto [C, D] = build_equality(A, B, 2);
    REQUIRE(C.rows() == 4);
    REQUIRE(C.cols() == 6);
    // second block row: -A on x_1 columns, I on x_2 columns
    CHECK(C(2, 2) == -1.0);
    CHECK(C(2, 3) == -2.0);
    CHECK(C(3, 2) == -3.0);
    CHECK(C(3, 3) == -4.0);
    CHECK(C(2, 4) == 1.0);
    CHECK(C(3, 5) == 1.0);
    // -B on u_1 column
    CHECK(C(2, 1) == -5.0);
    CHECK(C(3, 1) == -6.0);
    // D only feeds the first block row
    CHECK(D(2, 0) == 0.0);
    CHECK(D(3, 1) == 0.0);
}

TEST_CASE("DC-motor equality block has full row rank") {
    const DcSetup s = dc_setup();
    CHECK(rank_eliminate(s.spec.C) == 60);
}

TEST_CASE("build_inequality strict interior and dimensions") {
    const DcSetup s = dc_setup();
    CHECK(s.spec.ineq_dim() == 30);
    CHECK(s.spec.g0[0] == Catch::Approx(-26.6).margin(0.01));

    // g(0) = g0 < 0 componentwise
    const Vector g = s.spec.ineq(Vector(s.spec.primal_dim(), 0.0));
    for (double v : g) CHECK(v < 0.0);

    try {
        build_inequality({-0.5}, 3, 2);
        FAIL("expected assumption violation");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("g(0) < 0") != std::string::npos);
    }
}

TEST_CASE("build_objective weights, extremes, and gradient") {
    double sigma = 0.0, rho = 0.0;
    const Matrix P1 = build_objective(1.0, 1.0, 2, 2, 1, WeightOrder::physical, &sigma, &rho);
    CHECK((P1 - Matrix::identity(6)).max_abs() == 0.0);
    CHECK(sigma == 1.0);
    CHECK(rho == 1.0);

    const Matrix P = build_objective(1.0, 0.1, 30, 2, 1, WeightOrder::physical, &sigma, &rho);
    CHECK(sigma == Catch::Approx(0.1));
    CHECK(rho == Catch::Approx(1.0));
    CHECK(P(0, 0) == Catch::Approx(0.1));      // input block
    CHECK(P(30, 30) == Catch::Approx(1.0));    // state block

    const Matrix Pl = build_objective(1.0, 0.1, 30, 2, 1, WeightOrder::literal, &sigma, &rho);
    CHECK(Pl(0, 0) == Catch::Approx(1.0));
    CHECK(Pl(30, 30) == Catch::Approx(0.1));
    CHECK(sigma == Catch::Approx(0.1));

    CHECK_THROWS_AS(build_objective(0.0, 1.0, 2, 1, 1, WeightOrder::physical),
                    std::invalid_argument);

    // gradient of (1/2)|w|^2_P at e1 is the first column of P
    const DcSetup s = dc_setup();
    Vector e1(s.spec.primal_dim(), 0.0);
    e1[0] = 1.0;
    const Vector grad = s.spec.grad_f(e1);
    for (std::size_t i = 0; i < grad.size(); ++i)
        CHECK(grad[i] == s.spec.P(i, 0));

    // grad f(0) = 0
    CHECK(norm2(s.spec.grad_f(Vector(s.spec.primal_dim(), 0.0))) == 0.0);
}

TEST_CASE("build_projection closed form on a 1x2 constraint") {
    Matrix C(1, 2, {1.0, 0.0});
    Matrix D(1, 1, {0.0});
    const ProjectionPair pp = build_projection(C, D);
    CHECK(pp.K(0, 0) == Catch::Approx(0.0).margin(1e-14));
    CHECK(pp.K(1, 1) == Catch::Approx(1.0));
    CHECK(pp.K(0, 1) == Catch::Approx(0.0).margin(1e-14));
    CHECK(pp.L.max_abs() < 1e-14);
}

TEST_CASE("projection invariants on the DC motor") {
    const DcSetup s = dc_setup();
    const ProjectionPair pp = build_projection(s.spec.C, s.spec.D);

    CHECK((s.spec.C * pp.K).max_abs() < 1e-9);
    CHECK((s.spec.C * pp.L + s.spec.D).max_abs() < 1e-9);
    CHECK((pp.K * pp.K - pp.K).max_abs() < 1e-9);

    std::mt19937_64 rng(1);
    std::normal_distribution<double> dist(0.0, 10.0);
    for (int trial = 0; trial < 100; ++trial) {
        Vector w(s.spec.primal_dim());
        for (double& v : w) v = dist(rng);
        Vector x(2);
        for (double& v : x) v = dist(rng);
        const Vector wp = pp.apply(w, x);
        CHECK(norm2(s.spec.eq(wp, x)) < 1e-9);
    }
}

TEST_CASE("projection is the nearest feasible point") {
    // distance from w to any dynamics-consistent w' is at least |w - w_proj|
    const DcSetup s = dc_setup();
    const ProjectionPair pp = build_projection(s.spec.C, s.spec.D);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> dist(0.0, 5.0);
    const Vector x = {12.0, -4.0};
    for (int trial = 0; trial < 20; ++trial) {
        Vector w(s.spec.primal_dim());
        for (double& v : w) v = dist(rng);
        const Vector wp = pp.apply(w, x);

        // feasible point built by forward simulation from a random input sequence
        Vector useq(30);
        for (double& v : useq) v = dist(rng);
        Vector xs;
        Vector xk = x;
        for (int k = 0; k < 30; ++k) {
            Vector xn = s.model.A_d * xk;
            axpy(useq[static_cast<std::size_t>(k)], {s.model.B_d(0, 0), s.model.B_d(1, 0)}, xn);
            xs.insert(xs.end(), xn.begin(), xn.end());
            xk = xn;
        }
        const Vector wfeas = concat(useq, xs);
        REQUIRE(norm2(s.spec.eq(wfeas, x)) < 1e-8);
        CHECK(norm2(wp - w) <= norm2(wfeas - w) + 1e-9);
    }
}

TEST_CASE("condense single-step scalar example") {
    // scalar plant a=1, b=1, unit weights: H = 2, minimizer u0 = -x0/2
    Matrix A(1, 1, {1.0});
    Matrix B(1, 1, {1.0});
    OcpSpec spec = make_ocp(A, B, 1.0, 1, 1.0, 1.0, WeightOrder::physical, {1e6});
    const CondensedQp qp = condense(spec, A, B);
    REQUIRE(qp.H.rows() == 1);
    CHECK(qp.H(0, 0) == Catch::Approx(2.0));

    const double x0 = 3.0;
    const Vector q = qp.q_map * Vector{x0};
    const double u_star = -q[0] / qp.H(0, 0);
    CHECK(u_star == Catch::Approx(-x0 / 2.0));

    // grid check of the eliminated objective
    auto J = [&](double u) { return 0.5 * (u * u + (x0 + u) * (x0 + u)); };
    double best_u = -10.0, best = J(-10.0);
    for (int i = 0; i <= 4000; ++i) {
        const double u = -10.0 + 20.0 * i / 4000.0;
        if (J(u) < best) { best = J(u); best_u = u; }
    }
    CHECK(u_star == Catch::Approx(best_u).margin(0.01));

    // zero state gives a zero linear term
    CHECK(norm2(qp.q_map * Vector{0.0}) == 0.0);
}

TEST_CASE("condensed dimensions on the DC motor") {
    const DcSetup s = dc_setup();
    const CondensedQp qp = condense(s.spec, s.model.A_d, s.model.B_d);
    CHECK(qp.H.rows() == 30);
    CHECK(qp.H.cols() == 30);
    CHECK(qp.q_map.cols() == 2);
    CHECK(qp.g0_u.size() == 30);
    // Hessian is symmetric positive definite
    CHECK((qp.H - qp.H.transpose()).max_abs() < 1e-10);
    CHECK(sym_eig_max((-1.0) * qp.H).max_eigenvalue < 0.0);
}

TEST_CASE("condensed and full problems agree on small instances") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (std::size_t N : {1u, 2u, 3u}) {
        Matrix A(1, 1, {0.9});
        Matrix B(1, 1, {0.5});
        OcpSpec spec = make_ocp(A, B, 1.0, N, 1.0, 0.5, WeightOrder::physical, {1.5});
        const CondensedQp qp = condense(spec, A, B);

        for (int trial = 0; trial < 10; ++trial) {
            const Vector x = {unif(rng)};
            const Vector w_full = full_problem_argmin(spec, x);
            const QpSolution sol = qp_solve(qp, x);
            for (std::size_t k = 0; k < N; ++k)
                CHECK(sol.u_seq[k] == Catch::Approx(w_full[k]).margin(1e-7));
        }
    }
}

TEST_CASE("append_equality keeps shapes consistent") {
    const DcSetup s = dc_setup();
    Matrix C = s.spec.C;
    Matrix D = s.spec.D;
    Matrix Ce(1, C.cols());
    Ce(0, 0) = 1.0;
    Matrix De(1, D.cols());
    append_equality(C, D, Ce, De);
    CHECK(C.rows() == s.spec.C.rows() + 1);
    CHECK(D.rows() == s.spec.D.rows() + 1);
    CHECK(C(C.rows() - 1, 0) == 1.0);
    CHECK_THROWS_AS(append_equality(C, D, Matrix(1, 3), Matrix(1, 2)), std::invalid_argument);
}
