#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdgmpc/baselines.hpp"
#include "pdgmpc/certify.hpp"
#include "pdgmpc/matrix.hpp"
#include "pdgmpc/model.hpp"
#include "pdgmpc/ocp.hpp"
#include "pdgmpc/pdg.hpp"

namespace pdgmpc {

enum class ControllerKind { pdg, pdg_proj, cgmres1, cgmres2, mpc_oracle };

inline std::string to_string(ControllerKind k) {
    switch (k) {
        case ControllerKind::pdg: return "pdg";
        case ControllerKind::pdg_proj: return "pdg_proj";
        case ControllerKind::cgmres1: return "cgmres1";
        case ControllerKind::cgmres2: return "cgmres2";
        case ControllerKind::mpc_oracle: return "mpc_oracle";
    }
    return "unknown";
}

inline ControllerKind parse_controller_kind(const std::string& s) {
    if (s == "pdg") return ControllerKind::pdg;
    if (s == "pdg_proj") return ControllerKind::pdg_proj;
    if (s == "cgmres1") return ControllerKind::cgmres1;
    if (s == "cgmres2") return ControllerKind::cgmres2;
    if (s == "mpc_oracle") return ControllerKind::mpc_oracle;
    throw std::invalid_argument("unknown controller kind '" + s + "'");
}

/// Everything fixed about one control scenario, in error coordinates.
struct Problem {
    ContinuousPlant plant;
    SteadyTarget target;
    OcpSpec spec;
    ProjectionPair projection;
    CondensedQp condensed;
    Matrix Phi;            // state reconstruction x_{1:N} = Phi x + Gamma u
    Matrix Gamma;
    Vector shifted_upper;  // input bound in error coordinates
    double state_weight = 1.0;
    double input_weight = 1.0;
};

struct SimConfig {
    std::string case_name = "case";
    double duration = 3.0;
    Vector x0;                       // initial state, error coordinates
    ControllerKind kind = ControllerKind::pdg;
    PdgParams params;
    unsigned seed = 1;
    bool use_algorithm1 = true;      // gamma fixed to 1 when false
    bool unsafe = false;             // allow running without a feasible certificate
    int max_backtracks = 200;
};

/// Closed-loop time series. States and inputs are stored in error
/// coordinates; the steady target is kept alongside so exports can restore
/// physical units.
struct SimLog {
    std::string case_name;
    std::string controller;
    std::string status = "completed";   // completed | diverged | cert_violated
    long event_step = -1;

    Vector times;
    std::vector<Vector> states;     // error coordinates
    std::vector<Vector> inputs;     // error coordinates
    Vector gammas;
    std::vector<int> backtracks;    // pdg: extra Algorithm-1 iterations; others: solver iterations
    Vector V_values;
    Vector horizon_objectives;
    Vector horizon_violations;

    Vector x_ref;
    Vector u_ref;
    Vector shifted_upper;
    double state_weight = 1.0;
    double input_weight = 1.0;

    std::size_t size() const { return times.size(); }
};

/// Four Table-style performance sums plus their normalizations against a
/// baseline run. Objective sums are weighted with the scenario's stage
/// weights; 0/0 normalizes to 1.
struct Metrics {
    double actual_obj = 0.0;
    double actual_con = 0.0;
    double horizon_obj = 0.0;
    double horizon_con = 0.0;

    double norm_actual_obj = 1.0;
    double norm_actual_con = 1.0;
    double norm_horizon_obj = 1.0;
    double norm_horizon_con = 1.0;
    std::string baseline_name;
};

namespace detail {

inline double storage_plant(const Vector& x) { return 0.5 * dot(x, x); }

struct HorizonSample {
    double objective = 0.0;
    double violation = 0.0;
};

inline HorizonSample horizon_measures(const Problem& prob, const Vector& w_m, const Vector& x) {
    HorizonSample h;
    h.objective = prob.spec.objective(w_m);
    const Vector g = prob.spec.ineq(w_m);
    double gv = 0.0;
    for (double v : g) gv += std::max(0.0, v) * std::max(0.0, v);
    const Vector hres = prob.spec.eq(w_m, x);
    h.violation = gv + dot(hres, hres);
    return h;
}

inline Vector lift_condensed(const Problem& prob, const Vector& u_seq, const Vector& x) {
    Vector xs = prob.Phi * x;
    axpy(1.0, prob.Gamma * u_seq, xs);
    return concat(u_seq, xs);
}

} // namespace detail

/// Runs the sampled-data loop: controller output, zero-order hold, exact
/// discrete plant update. Logs duration/dt + 1 samples.
inline SimLog simulate(const SimConfig& cfg, const Problem& prob, const Certificate* cert) {
    cfg.params.validate();
    if (!(cfg.duration > 0.0)) throw std::invalid_argument("simulate: duration must be > 0");
    if (cfg.x0.size() != prob.spec.n)
        throw std::invalid_argument("simulate: x0 has length " + std::to_string(cfg.x0.size()) +
                                    ", expected " + std::to_string(prob.spec.n));

    const bool is_pdg = cfg.kind == ControllerKind::pdg || cfg.kind == ControllerKind::pdg_proj;
    if (is_pdg && !cfg.unsafe && (!cert || !cert->feasible))
        throw std::runtime_error("simulate: certificate is not feasible; pass unsafe to override");

    const double dt = cfg.params.dt;
    const DiscretePlant plant_dt = discretize(prob.plant, dt);
    const std::size_t steps = static_cast<std::size_t>(std::llround(cfg.duration / dt));
    const double delta_star = cert ? cert->delta_star : 0.0;
    const ProjectionPair* proj =
        (cfg.kind == ControllerKind::pdg_proj) ? &prob.projection : nullptr;

    SimLog log;
    log.case_name = cfg.case_name;
    log.controller = to_string(cfg.kind);
    log.x_ref = prob.target.x_ref;
    log.u_ref = prob.target.u_ref;
    log.shifted_upper = prob.shifted_upper;
    log.state_weight = prob.state_weight;
    log.input_weight = prob.input_weight;
    log.times.reserve(steps + 1);

    Vector x = cfg.x0;
    PdgState pdg_state = PdgState::zero(prob.spec);
    CgmresState cg_state;
    if (cfg.kind == ControllerKind::cgmres1)
        cg_state = cgmres_init(prob.condensed, x, 1, cfg.params.zeta);
    else if (cfg.kind == ControllerKind::cgmres2)
        cg_state = cgmres_init(prob.condensed, x, 2, cfg.params.zeta);

    for (std::size_t k = 0; k <= steps; ++k) {
        Vector u;
        double gamma = 1.0, V = 0.0;
        int iters = 0;
        Vector w_m;

        PdgState pdg_next = pdg_state;
        CgmresState cg_next = cg_state;
        bool cert_violated = false;

        switch (cfg.kind) {
            case ControllerKind::pdg:
            case ControllerKind::pdg_proj: {
                try {
                    const StepOutcome out = step(pdg_state, x, cfg.params, delta_star, plant_dt,
                                                 prob.spec, proj, cfg.use_algorithm1,
                                                 cfg.max_backtracks);
                    u = out.u;
                    gamma = out.gamma;
                    iters = out.backtracks;
                    pdg_next = out.next;
                } catch (const std::runtime_error&) {
                    cert_violated = true;
                    u = control_input(pdg_state, x, prob.spec, proj);
                }
                w_m = proj ? prob.projection.apply(pdg_state.w, x) : pdg_state.w;
                V = 0.5 * (dot(pdg_state.w, pdg_state.w) + dot(pdg_state.mu, pdg_state.mu) +
                           dot(pdg_state.lambda, pdg_state.lambda)) +
                    delta_star * cfg.params.zeta * detail::storage_plant(x);
                break;
            }
            case ControllerKind::cgmres1:
            case ControllerKind::cgmres2: {
                u = cgmres_input(cg_state, prob.spec.m);
                const Vector u_seq(cg_state.omega.begin(),
                                   cg_state.omega.begin() +
                                       static_cast<std::ptrdiff_t>(prob.condensed.H.rows()));
                w_m = detail::lift_condensed(prob, u_seq, x);
                iters = cg_state.gmres_iters;
                V = detail::storage_plant(x);

                Vector x_pred = plant_dt.A_d * x;
                axpy(1.0, plant_dt.B_d * u, x_pred);
                cg_next = cgmres_step(cg_state, x, x_pred, dt, prob.condensed);
                break;
            }
            case ControllerKind::mpc_oracle: {
                const QpSolution sol = qp_solve(prob.condensed, x);
                u = Vector(sol.u_seq.begin(),
                           sol.u_seq.begin() + static_cast<std::ptrdiff_t>(prob.spec.m));
                w_m = detail::lift_condensed(prob, sol.u_seq, x);
                iters = sol.iterations;
                V = detail::storage_plant(x);
                break;
            }
        }

        const detail::HorizonSample hs = detail::horizon_measures(prob, w_m, x);
        log.times.push_back(static_cast<double>(k) * dt);
        log.states.push_back(x);
        log.inputs.push_back(u);
        log.gammas.push_back(gamma);
        log.backtracks.push_back(iters);
        log.V_values.push_back(V);
        log.horizon_objectives.push_back(hs.objective);
        log.horizon_violations.push_back(hs.violation);

        if (cert_violated) {
            log.status = "cert_violated";
            log.event_step = static_cast<long>(k);
            break;
        }
        if (k == steps) break;

        Vector xn = plant_dt.A_d * x;
        axpy(1.0, plant_dt.B_d * u, xn);
        x = std::move(xn);
        pdg_state = std::move(pdg_next);
        cg_state = std::move(cg_next);

        if (norm2(x) > 1e9) {
            log.status = "diverged";
            log.event_step = static_cast<long>(k + 1);
            break;
        }
    }
    return log;
}

/// Table-style sums over a log, normalized against a baseline run on the
/// same grid.
inline Metrics metrics(const SimLog& log, const SimLog& baseline) {
    if (log.size() != baseline.size())
        throw std::invalid_argument("metrics: logs have different grid lengths");
    for (std::size_t k = 0; k < log.size(); ++k)
        if (std::abs(log.times[k] - baseline.times[k]) > 1e-12)
            throw std::invalid_argument("metrics: logs are on different time grids");

    auto sums = [](const SimLog& l) {
        Metrics m;
        for (std::size_t k = 0; k < l.size(); ++k) {
            m.actual_obj += l.state_weight * dot(l.states[k], l.states[k]) +
                            l.input_weight * dot(l.inputs[k], l.inputs[k]);
            for (std::size_t i = 0; i < l.inputs[k].size(); ++i) {
                const double over = std::max(0.0, l.inputs[k][i] - l.shifted_upper[i]);
                m.actual_con += over * over;
            }
            m.horizon_obj += l.horizon_objectives[k];
            m.horizon_con += l.horizon_violations[k];
        }
        return m;
    };

    Metrics m = sums(log);
    const Metrics b = sums(baseline);
    auto normalize = [](double v, double d) {
        if (d == 0.0) return (v == 0.0) ? 1.0 : std::numeric_limits<double>::infinity();
        return v / d;
    };
    m.norm_actual_obj = normalize(m.actual_obj, b.actual_obj);
    m.norm_actual_con = normalize(m.actual_con, b.actual_con);
    m.norm_horizon_obj = normalize(m.horizon_obj, b.horizon_obj);
    m.norm_horizon_con = normalize(m.horizon_con, b.horizon_con);
    m.baseline_name = baseline.controller;
    return m;
}

struct BenchRow {
    std::string method;
    double mean_step_seconds = 0.0;
    double per_iteration_seconds = 0.0;
    double estimated_max_seconds = 0.0;
    int iter_max = 0;
    double iter_mean = 0.0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    int repetitions = 0;
};

/// Times the controller calls of each configuration over the closed loop.
/// The first repetition is a warm-up and is discarded.
inline BenchReport bench(const std::vector<SimConfig>& configs, const Problem& prob,
                         const Certificate* cert, int repetitions) {
    if (repetitions < 10) throw std::invalid_argument("bench: need at least 10 repetitions");
    using clock = std::chrono::steady_clock;

    BenchReport report;
    report.repetitions = repetitions;
    for (const SimConfig& cfg : configs) {
        double total_seconds = 0.0;
        long total_steps = 0;
        long total_iters = 0;
        int iter_max = 0;

        for (int rep = 0; rep < repetitions + 1; ++rep) {
            const auto t0 = clock::now();
            const SimLog log = simulate(cfg, prob, cert);
            const auto t1 = clock::now();
            if (rep == 0) continue;   // warm-up
            total_seconds += std::chrono::duration<double>(t1 - t0).count();
            total_steps += static_cast<long>(log.size());
            const bool is_pdg = cfg.kind == ControllerKind::pdg ||
                                cfg.kind == ControllerKind::pdg_proj;
            for (int it : log.backtracks) {
                const int solver_iters = is_pdg ? it + 1 : it;
                total_iters += solver_iters;
                iter_max = std::max(iter_max, solver_iters);
            }
        }

        BenchRow row;
        row.method = to_string(cfg.kind);
        row.mean_step_seconds = total_seconds / static_cast<double>(total_steps);
        row.iter_max = iter_max;
        row.iter_mean = static_cast<double>(total_iters) / static_cast<double>(total_steps);
        row.per_iteration_seconds = row.mean_step_seconds / row.iter_mean;
        row.estimated_max_seconds =
            row.mean_step_seconds * static_cast<double>(iter_max) / row.iter_mean;
        report.rows.push_back(row);
    }
    return report;
}

// -- file export --------------------------------------------------------------

namespace detail {

inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

/// CSV export in physical units: t, x1..xn, u1..um, gamma, backtracks, V,
/// h_obj, h_con. Header always present.
inline void export_csv(const SimLog& log, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("export_csv: cannot open '" + path + "' for writing");

    const std::size_t n = log.x_ref.size(), m = log.u_ref.size();
    f << "t";
    for (std::size_t i = 1; i <= n; ++i) f << ",x" << i;
    for (std::size_t i = 1; i <= m; ++i) f << ",u" << i;
    f << ",gamma,backtracks,V,h_obj,h_con\n";

    for (std::size_t k = 0; k < log.size(); ++k) {
        f << detail::fmt17(log.times[k]);
        for (std::size_t i = 0; i < n; ++i)
            f << "," << detail::fmt17(log.states[k][i] + log.x_ref[i]);
        for (std::size_t i = 0; i < m; ++i)
            f << "," << detail::fmt17(log.inputs[k][i] + log.u_ref[i]);
        f << "," << detail::fmt17(log.gammas[k]) << "," << log.backtracks[k] << ","
          << detail::fmt17(log.V_values[k]) << "," << detail::fmt17(log.horizon_objectives[k])
          << "," << detail::fmt17(log.horizon_violations[k]) << "\n";
    }
    if (!f.good()) throw std::runtime_error("export_csv: write to '" + path + "' failed");
}

inline nlohmann::json to_json(const SimLog& log) {
    nlohmann::json j;
    j["case_name"] = log.case_name;
    j["controller"] = log.controller;
    j["status"] = log.status;
    j["event_step"] = log.event_step;
    j["times"] = log.times;
    j["states"] = log.states;
    j["inputs"] = log.inputs;
    j["gammas"] = log.gammas;
    j["backtracks"] = log.backtracks;
    j["V_values"] = log.V_values;
    j["horizon_objectives"] = log.horizon_objectives;
    j["horizon_violations"] = log.horizon_violations;
    j["x_ref"] = log.x_ref;
    j["u_ref"] = log.u_ref;
    j["shifted_upper"] = log.shifted_upper;
    j["state_weight"] = log.state_weight;
    j["input_weight"] = log.input_weight;
    return j;
}

inline SimLog simlog_from_json(const nlohmann::json& j) {
    SimLog log;
    log.case_name = j.at("case_name").get<std::string>();
    log.controller = j.at("controller").get<std::string>();
    log.status = j.at("status").get<std::string>();
    log.event_step = j.at("event_step").get<long>();
    log.times = j.at("times").get<Vector>();
    log.states = j.at("states").get<std::vector<Vector>>();
    log.inputs = j.at("inputs").get<std::vector<Vector>>();
    log.gammas = j.at("gammas").get<Vector>();
    log.backtracks = j.at("backtracks").get<std::vector<int>>();
    log.V_values = j.at("V_values").get<Vector>();
    log.horizon_objectives = j.at("horizon_objectives").get<Vector>();
    log.horizon_violations = j.at("horizon_violations").get<Vector>();
    log.x_ref = j.at("x_ref").get<Vector>();
    log.u_ref = j.at("u_ref").get<Vector>();
    log.shifted_upper = j.at("shifted_upper").get<Vector>();
    log.state_weight = j.at("state_weight").get<double>();
    log.input_weight = j.at("input_weight").get<double>();
    return log;
}

inline void export_json(const SimLog& log, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("export_json: cannot open '" + path + "' for writing");
    f << to_json(log).dump(2) << "\n";
    if (!f.good()) throw std::runtime_error("export_json: write to '" + path + "' failed");
}

inline SimLog import_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("import_json: cannot open '" + path + "'");
    nlohmann::json j;
    f >> j;
    return simlog_from_json(j);
}

} // namespace pdgmpc
