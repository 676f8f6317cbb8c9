#pragma once

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "pdgmpc/harness.hpp"
#include "pdgmpc/matrix.hpp"
#include "pdgmpc/model.hpp"
#include "pdgmpc/ocp.hpp"
#include "pdgmpc/pdg.hpp"

namespace pdgmpc {

/// Parsed run configuration. One JSON document drives every subcommand.
struct RunConfig {
    Matrix A_c, B_c;
    Vector x_ref, u_upper;

    std::size_t N = 0;
    double dtau = 0.0;
    double state_weight = 1.0;
    double input_weight = 1.0;
    WeightOrder weight_order = WeightOrder::physical;

    PdgParams params;
    bool projection = true;
    bool use_P_variant = true;
    bool algorithm1 = true;

    double duration = 3.0;
    Vector x0_physical;
    unsigned seed = 1;
    std::string output_dir = "out";
    std::string case_name = "case";

    std::string digest;   // FNV-1a of the canonical document
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& allowed,
                           const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument("config: unknown key '" + where + "." + it.key() + "'");
}

inline const nlohmann::json& need(const nlohmann::json& obj, const std::string& key,
                                  const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw std::invalid_argument("config: missing key '" + where + "." + key + "'");
    return *it;
}

inline Matrix parse_matrix(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw std::invalid_argument("config: '" + where + "' must be a 2-D array");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    Matrix M(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw std::invalid_argument("config: '" + where + "' has ragged rows");
        for (std::size_t k = 0; k < cols; ++k) M(i, k) = j[i][k].get<double>();
    }
    return M;
}

inline std::string digest_of(const nlohmann::json& j) {
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
    using detail::need;
    using detail::reject_unknown;

    if (!j.is_object()) throw std::invalid_argument("config: document must be an object");
    reject_unknown(j, {"plant", "target", "ocp", "controller", "run"}, "");

    RunConfig cfg;
    cfg.digest = detail::digest_of(j);

    const auto& plant = need(j, "plant", "");
    reject_unknown(plant, {"A_c", "B_c"}, "plant");
    cfg.A_c = detail::parse_matrix(need(plant, "A_c", "plant"), "plant.A_c");
    cfg.B_c = detail::parse_matrix(need(plant, "B_c", "plant"), "plant.B_c");
    if (cfg.A_c.rows() != cfg.A_c.cols())
        throw std::invalid_argument("config: 'plant.A_c' must be square");
    if (cfg.B_c.rows() != cfg.A_c.rows())
        throw std::invalid_argument("config: 'plant.B_c' row count must match plant.A_c");
    const std::size_t n = cfg.A_c.rows();
    const std::size_t m = cfg.B_c.cols();

    const auto& target = need(j, "target", "");
    reject_unknown(target, {"x_ref", "u_upper"}, "target");
    cfg.x_ref = need(target, "x_ref", "target").get<Vector>();
    cfg.u_upper = need(target, "u_upper", "target").get<Vector>();
    if (cfg.x_ref.size() != n)
        throw std::invalid_argument("config: 'target.x_ref' must have length " + std::to_string(n));
    if (cfg.u_upper.size() != m)
        throw std::invalid_argument("config: 'target.u_upper' must have length " + std::to_string(m));

    const auto& ocp = need(j, "ocp", "");
    reject_unknown(ocp, {"N", "dtau", "state_weight", "input_weight", "weight_order"}, "ocp");
    cfg.N = need(ocp, "N", "ocp").get<std::size_t>();
    cfg.dtau = need(ocp, "dtau", "ocp").get<double>();
    cfg.state_weight = need(ocp, "state_weight", "ocp").get<double>();
    cfg.input_weight = need(ocp, "input_weight", "ocp").get<double>();
    if (ocp.contains("weight_order"))
        cfg.weight_order = parse_weight_order(ocp["weight_order"].get<std::string>());
    if (cfg.N < 1) throw std::invalid_argument("config: 'ocp.N' must be >= 1");
    if (!(cfg.dtau > 0.0)) throw std::invalid_argument("config: 'ocp.dtau' must be > 0");
    if (!(cfg.state_weight > 0.0) || !(cfg.input_weight > 0.0))
        throw std::invalid_argument("config: 'ocp' weights must be > 0");

    const auto& ctrl = need(j, "controller", "");
    reject_unknown(ctrl, {"alpha", "beta", "zeta", "dt", "c", "projection", "variant", "algorithm1"},
                   "controller");
    cfg.params.alpha = need(ctrl, "alpha", "controller").get<double>();
    cfg.params.beta = need(ctrl, "beta", "controller").get<double>();
    cfg.params.zeta = need(ctrl, "zeta", "controller").get<double>();
    cfg.params.dt = need(ctrl, "dt", "controller").get<double>();
    if (ctrl.contains("c")) cfg.params.c = ctrl["c"].get<double>();
    if (ctrl.contains("projection")) cfg.projection = ctrl["projection"].get<bool>();
    if (ctrl.contains("algorithm1")) cfg.algorithm1 = ctrl["algorithm1"].get<bool>();
    if (ctrl.contains("variant")) {
        const std::string v = ctrl["variant"].get<std::string>();
        if (v == "P") cfg.use_P_variant = true;
        else if (v == "sigma") cfg.use_P_variant = false;
        else throw std::invalid_argument("config: 'controller.variant' must be 'sigma' or 'P'");
    }
    cfg.params.validate();

    const auto& run = need(j, "run", "");
    reject_unknown(run, {"duration", "x0", "seed", "output_dir", "case_name"}, "run");
    cfg.duration = need(run, "duration", "run").get<double>();
    cfg.x0_physical = need(run, "x0", "run").get<Vector>();
    if (run.contains("seed")) cfg.seed = run["seed"].get<unsigned>();
    if (run.contains("output_dir")) cfg.output_dir = run["output_dir"].get<std::string>();
    if (run.contains("case_name")) cfg.case_name = run["case_name"].get<std::string>();
    if (!(cfg.duration > 0.0)) throw std::invalid_argument("config: 'run.duration' must be > 0");
    if (cfg.x0_physical.size() != n)
        throw std::invalid_argument("config: 'run.x0' must have length " + std::to_string(n));

    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("config: '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

/// Builds the full scenario from a parsed configuration.
inline Problem build_problem(const RunConfig& cfg) {
    ContinuousPlant plant(cfg.A_c, cfg.B_c);
    SteadyTarget target = steady_input(plant, cfg.x_ref, 1e-6);

    Vector shifted(cfg.u_upper.size());
    for (std::size_t i = 0; i < shifted.size(); ++i)
        shifted[i] = cfg.u_upper[i] - target.u_ref[i];

    const DiscretePlant model = discretize(plant, cfg.dtau);
    OcpSpec spec = make_ocp(model.A_d, model.B_d, cfg.dtau, cfg.N, cfg.state_weight,
                            cfg.input_weight, cfg.weight_order, shifted);
    ProjectionPair proj = build_projection(spec.C, spec.D);
    CondensedQp qp = condense(spec, model.A_d, model.B_d);
    auto [Phi, Gamma] = build_state_maps(model.A_d, model.B_d, cfg.N);

    return Problem{std::move(plant), std::move(target), std::move(spec), std::move(proj),
                   std::move(qp), std::move(Phi), std::move(Gamma), std::move(shifted),
                   cfg.state_weight, cfg.input_weight};
}

inline SimConfig make_sim_config(const RunConfig& cfg, const Problem& prob, ControllerKind kind) {
    SimConfig sc;
    sc.case_name = cfg.case_name;
    sc.duration = cfg.duration;
    sc.x0 = cfg.x0_physical - prob.target.x_ref;   // into error coordinates
    sc.kind = kind;
    sc.params = cfg.params;
    sc.seed = cfg.seed;
    sc.use_algorithm1 = cfg.algorithm1;
    return sc;
}

} // namespace pdgmpc
