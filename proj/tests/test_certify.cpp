#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pdgmpc/certify.hpp"
#include "pdgmpc/model.hpp"
#include "pdgmpc/ocp.hpp"

using namespace pdgmpc;

namespace {

struct DcSetup {
    ContinuousPlant plant;
    DiscretePlant model;
    OcpSpec spec;
    ProjectionPair proj;
    PdgParams params;
};

DcSetup dc_setup(double zeta = 100.0, double dt = 1e-3) {
    ContinuousPlant plant(Matrix(2, 2, {-4.0, -0.03, 0.75, -10.0}), Matrix(2, 1, {2.0, 0.0}));
    DiscretePlant model = discretize(plant, 0.1);
    SteadyTarget target = steady_input(plant, {200.0 / 3.0, 5.0}, 1e-6);
    OcpSpec spec = make_ocp(model.A_d, model.B_d, 0.1, 30, 2.0, 0.2, WeightOrder::physical,
                            {160.0 - target.u_ref[0]});
    ProjectionPair proj = build_projection(spec.C, spec.D);
    PdgParams params;
    params.zeta = zeta;
    params.dt = dt;
    return {std::move(plant), std::move(model), std::move(spec), std::move(proj), params};
}

} // namespace

TEST_CASE("plant_supply_ct structure and storage inequality") {
    const DcSetup s = dc_setup();
    const Matrix H = plant_supply_ct(s.plant);

    CHECK(H(0, 0) == Catch::Approx(-4.0));
    CHECK(H(0, 1) == Catch::Approx(0.36));
    CHECK(H(1, 0) == Catch::Approx(0.36));
    CHECK(H(1, 1) == Catch::Approx(-10.0));
    CHECK(H(0, 2) == Catch::Approx(1.0));   // B_c/2
    CHECK(H(2, 2) == 0.0);

    const Matrix Q = H.block(0, 0, 2, 2);
    CHECK(sym_eig_max(Q).max_eigenvalue < 0.0);

    // d/dt (x'x/2) = x'(A x + B u) equals the supply quadratic form here
    std::mt19937_64 rng(3);
    std::normal_distribution<double> dist(0.0, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        Vector x(2), u(1);
        for (double& v : x) v = dist(rng);
        for (double& v : u) v = dist(rng);
        Vector xdot = s.plant.A_c * x;
        axpy(1.0, s.plant.B_c * u, xdot);
        const double lhs = dot(x, xdot);
        const Vector xu = concat(x, u);
        const double rhs = dot(xu, H * xu);
        CHECK(lhs <= rhs + 1e-9 * std::max(1.0, std::abs(rhs)));
    }
}

TEST_CASE("plant_supply_ct rejects non-dissipative A") {
    ContinuousPlant unstable(Matrix(1, 1, {1.0}), Matrix(1, 1, {1.0}));
    CHECK_THROWS_AS(plant_supply_ct(unstable), std::runtime_error);
}

TEST_CASE("pre_stabilize leaves dissipative plants alone") {
    const DcSetup s = dc_setup();
    const auto [K, shifted] = pre_stabilize(s.plant);
    CHECK(K.max_abs() == 0.0);
    CHECK((shifted.A_c - s.plant.A_c).max_abs() == 0.0);
}

TEST_CASE("pre_stabilize on a scalar unstable plant") {
    ContinuousPlant p(Matrix(1, 1, {1.0}), Matrix(1, 1, {1.0}));
    const auto [K, shifted] = pre_stabilize(p);
    CHECK(sym_eig_max(sym_part(shifted.A_c)).max_eigenvalue < 0.0);
    CHECK(1.0 + K(0, 0) < 0.0);
}

TEST_CASE("pre_stabilize on a fully actuated double integrator") {
    ContinuousPlant p(Matrix(2, 2, {0.0, 1.0, 0.0, 0.0}), Matrix::identity(2));
    const auto [K, shifted] = pre_stabilize(p);
    Matrix Acl = p.A_c + p.B_c * K;
    CHECK(sym_eig_max(sym_part(Acl)).max_eigenvalue < 0.0);
}

TEST_CASE("pre_stabilize reports failure when the symmetric part cannot be shaped") {
    // with B = [0;1] the (1,1) entry of Sym(A+BK) stays 0 for every K
    ContinuousPlant p(Matrix(2, 2, {0.0, 1.0, 0.0, 0.0}), Matrix(2, 1, {0.0, 1.0}));
    try {
        pre_stabilize(p);
        FAIL("expected failure");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("margins") != std::string::npos);
    }
}

TEST_CASE("plant_supply_dt limits, positive semidefiniteness, exact storage") {
    const DcSetup s = dc_setup();

    const DiscretePlant tiny = discretize(s.plant, 1e-8);
    const auto [H_small, P_small] = plant_supply_dt(tiny);
    const Matrix H_ct = plant_supply_ct(s.plant);
    CHECK((H_small - H_ct).max_abs() < 1e-5);

    const DiscretePlant d = discretize(s.plant, 1e-3);
    const auto [H_P_d, P_P_d] = plant_supply_dt(d);
    CHECK(sym_eig_max((-1.0) * P_P_d).max_eigenvalue < 1e-12);   // PSD

    // the discrete stored-energy identity holds with equality for the exact
    // one-step update
    std::mt19937_64 rng(5);
    std::normal_distribution<double> dist(0.0, 10.0);
    for (int trial = 0; trial < 50; ++trial) {
        Vector x(2), u(1);
        for (double& v : x) v = dist(rng);
        for (double& v : u) v = dist(rng);
        Vector xn = d.A_d * x;
        axpy(1.0, d.B_d * u, xn);
        const double dSP = 0.5 * (dot(xn, xn) - dot(x, x));
        const Vector xu = concat(x, u);
        Matrix M = H_P_d + d.step * P_P_d;
        const double rhs = d.step * dot(xu, M * xu);
        CHECK(dSP == Catch::Approx(rhs).epsilon(1e-10).margin(1e-10));
    }
}

TEST_CASE("controller supply at beta = 0") {
    DcSetup s = dc_setup();
    PdgParams p = s.params;
    p.beta = 0.0;
    const auto [H, Hb] = controller_supply_ct(s.spec, p, /*use_P_variant=*/false);

    const std::size_t nw = s.spec.primal_dim();
    // upper-left is -sigma I
    for (std::size_t i = 0; i < nw; ++i)
        CHECK(H(i, i) == Catch::Approx(-s.spec.sigma));
    CHECK(H.block(0, nw, nw, 2).max_abs() == 0.0);
    const Matrix DtD = s.spec.D.transpose() * s.spec.D;
    // tau = 1 at beta = 0
    CHECK((H.block(nw, nw, 2, 2) - (1.0 / (4.0 * p.alpha)) * DtD).max_abs() < 1e-12);

    // dimensions of the barred matrix: (n+m)N + n + n_lambda
    CHECK(Hb.rows() == 90 + 2 + 60);
    CHECK(Hb.rows() == 152);
}

TEST_CASE("Schur complement of the barred matrix reproduces the plain one") {
    const DcSetup s = dc_setup();
    const auto [H, Hb] = controller_supply_ct(s.spec, s.params, true);
    const std::size_t top = s.spec.primal_dim() + s.spec.n;
    const std::size_t nl = s.spec.eq_dim();

    const Matrix A11 = Hb.block(0, 0, top, top);
    const Matrix A13 = Hb.block(0, top, top, nl);
    const Matrix A33 = Hb.block(top, top, nl, nl);
    const Matrix schur = A11 - A13 * solve_linear(A33, A13.transpose());
    CHECK((schur - H).max_abs() < 1e-10);
}

TEST_CASE("smoothness matrices: identity, bound, and conservatism order") {
    const DcSetup s = dc_setup();
    const ControllerSupply quad = smoothness_matrices(s.spec, s.params, true);
    const ControllerSupply gen = smoothness_matrices(s.spec, s.params, false);

    std::mt19937_64 rng(7);
    std::normal_distribution<double> dist(0.0, 3.0);
    const std::size_t nz = s.spec.primal_dim() + s.spec.n + s.spec.eq_dim();
    const double tk = s.params.tau() * s.params.kappa();

    for (int trial = 0; trial < 200; ++trial) {
        Vector z(nz);
        for (double& v : z) v = dist(rng);
        const Vector w(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(s.spec.primal_dim()));
        const Vector x(z.begin() + static_cast<std::ptrdiff_t>(s.spec.primal_dim()),
                       z.begin() + static_cast<std::ptrdiff_t>(s.spec.primal_dim() + s.spec.n));
        const Vector lambda(z.begin() + static_cast<std::ptrdiff_t>(s.spec.primal_dim() + s.spec.n),
                            z.end());

        // X z = tau*kappa*C'(lambda + beta h)
        const Vector h = s.spec.eq(w, x);
        Vector inner = lambda;
        axpy(s.params.beta, h, inner);
        const Vector direct = tk * s.spec.C.transpose_times(inner);
        CHECK(norm2(quad.X * z - direct) < 1e-9 * std::max(1.0, norm2(direct)));

        // |grad f + X z|^2 <= z' Pbar z for both variants
        Vector gf = s.spec.grad_f(w);
        axpy(1.0, quad.X * z, gf);
        const double lhs = dot(gf, gf);
        CHECK(lhs <= dot(z, quad.Pbar * z) + 1e-8 * std::max(1.0, lhs));
        CHECK(lhs <= dot(z, gen.Pbar * z) + 1e-8 * std::max(1.0, lhs));
    }

    // quadratic form is at most the generic one in the semidefinite order
    const Matrix diff = gen.Pbar - quad.Pbar;
    Matrix neg = (-1.0) * diff;
    CHECK(sym_eig_max(neg).max_eigenvalue < 1e-9);
}

TEST_CASE("build_W plain and projected forms") {
    const DcSetup s = dc_setup();
    const auto [W, Wbar] = build_W(s.spec, nullptr);

    std::mt19937_64 rng(11);
    std::normal_distribution<double> dist(0.0, 2.0);
    Vector w(s.spec.primal_dim());
    for (double& v : w) v = dist(rng);
    const Vector x = {3.0, -1.5};

    const Vector wx = concat(w, x);
    const Vector xu = W * wx;
    CHECK(xu[0] == Catch::Approx(x[0]));
    CHECK(xu[1] == Catch::Approx(x[1]));
    CHECK(xu[2] == Catch::Approx(w[0]));   // u = E w = first input entry

    const auto [Wp, Wbp] = build_W(s.spec, &s.proj);
    const Vector xup = Wp * wx;
    const Vector wproj = s.proj.apply(w, x);
    CHECK(xup[2] == Catch::Approx(wproj[0]).epsilon(1e-12));

    // the barred variant zero-pads the lambda columns
    const Vector z = concat(w, x, Vector(s.spec.eq_dim(), 1.7));
    const Vector a = Wbar * z;
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == Catch::Approx(xu[i]));
}

TEST_CASE("continuous certificate reproduces the reference stability measures") {
    const DcSetup s = dc_setup();
    CertifyOptions opt;
    opt.projection = &s.proj;

    const Certificate c = certify_ct(s.spec, s.params, s.plant, opt);
    CHECK(c.feasible);
    CHECK(c.delta_star == Catch::Approx(0.2850).epsilon(0.05));
    CHECK(c.lambda_max_star == Catch::Approx(-0.0870).epsilon(0.05));
    CHECK(!c.boundary_hit);
    CHECK(c.kind == CertificateKind::continuous);
    CHECK(!c.matrices_hash.empty());
}

TEST_CASE("continuous certificate is independent of the controller gain") {
    CertifyOptions opt;
    Certificate ref;
    bool first = true;
    for (double zeta : {1.0, 10.0, 100.0, 1000.0}) {
        const DcSetup s = dc_setup(zeta);
        opt.projection = &s.proj;
        const Certificate c = certify_ct(s.spec, s.params, s.plant, opt);
        if (first) {
            ref = c;
            first = false;
        } else {
            CHECK(c.delta_star == Catch::Approx(ref.delta_star).epsilon(1e-9));
            CHECK(c.lambda_max_star == Catch::Approx(ref.lambda_max_star).epsilon(1e-9));
        }
    }
}

TEST_CASE("discrete certificates reproduce the reference case table") {
    struct Row {
        double zeta, dt, delta, lmax;
    };
    // zeta, dt, expected delta*, expected lambda_max*
    const Row rows[] = {
        {1.0, 1e-3, 0.3662, -0.0537},
        {10.0, 1e-3, 0.3713, -0.0512},
        {100.0, 1e-3, 0.4586, -0.0116},
        {1000.0, 1e-3, 14.7560, 3.2423},
        {1000.0, 1e-4, 0.4578, -0.0116},
    };
    for (const Row& r : rows) {
        const DcSetup s = dc_setup(r.zeta, r.dt);
        CertifyOptions opt;
        opt.projection = &s.proj;
        const DiscretePlant d = discretize(s.plant, r.dt);
        const Certificate c = certify_dt(s.spec, s.params, d, opt);
        CHECK(c.delta_star == Catch::Approx(r.delta).epsilon(0.10));
        CHECK(c.lambda_max_star == Catch::Approx(r.lmax).epsilon(0.10));
        CHECK(c.feasible == (r.lmax < 0.0));
    }
}

TEST_CASE("equal zeta*dt gives matching certificates to three significant figures") {
    const DcSetup s3 = dc_setup(100.0, 1e-3);
    const DcSetup s5 = dc_setup(1000.0, 1e-4);
    CertifyOptions o3, o5;
    o3.projection = &s3.proj;
    o5.projection = &s5.proj;
    const Certificate c3 = certify_dt(s3.spec, s3.params, discretize(s3.plant, 1e-3), o3);
    const Certificate c5 = certify_dt(s5.spec, s5.params, discretize(s5.plant, 1e-4), o5);
    CHECK(c5.delta_star == Catch::Approx(c3.delta_star).epsilon(5e-3));
    CHECK(c5.lambda_max_star == Catch::Approx(c3.lambda_max_star).epsilon(5e-3));
}

TEST_CASE("discrete pencil approaches the barred continuous one as dt vanishes") {
    const DcSetup s = dc_setup(1.0, 1e-9);
    CertifyOptions opt;
    opt.projection = &s.proj;
    const Certificate barred = certify_ct_barred(s.spec, s.params, s.plant, opt);
    const Certificate disc = certify_dt(s.spec, s.params, discretize(s.plant, 1e-9), opt);
    CHECK(disc.lambda_max_star == Catch::Approx(barred.lambda_max_star).margin(1e-4));

    // the barred and plain pencils agree in sign over a sweep of delta
    const auto plain = continuous_pencil(s.spec, s.params, s.plant, opt);
    const auto bar = continuous_barred_pencil(s.spec, s.params, s.plant, opt);
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> logd(-2.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        const double d = std::pow(10.0, logd(rng));
        Matrix Mp = plain.M0 + d * plain.M1;
        Matrix Mb = bar.M0 + d * bar.M1;
        const double lp = sym_eig_max(Mp).max_eigenvalue;
        const double lb = sym_eig_max(Mb).max_eigenvalue;
        CHECK((lp < 0.0) == (lb < 0.0));
    }
}

TEST_CASE("pencil grows unbounded for large delta") {
    const DcSetup s = dc_setup();
    CertifyOptions opt;
    opt.projection = &s.proj;
    const auto pencil = continuous_pencil(s.spec, s.params, s.plant, opt);
    Matrix M = pencil.M0 + 1e6 * pencil.M1;
    CHECK(sym_eig_max(M).max_eigenvalue > 1e3);
}
