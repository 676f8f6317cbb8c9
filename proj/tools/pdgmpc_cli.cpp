// Command-line front end: certify / simulate / compare / bench over a single
// JSON configuration document.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pdgmpc/pdgmpc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string output_dir;        // overrides run.output_dir when set
    std::string variant;           // sigma | P
    std::string weight_order;      // literal | physical
    bool unsafe = false;
    bool require_feasible = false;
    bool gamma1 = false;           // disable the step-size search
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config_path, "JSON configuration file")->required();
    cmd->add_option("--output", a.output_dir, "output directory (overrides run.output_dir)");
    cmd->add_option("--variant", a.variant, "controller supply variant: sigma | P")
        ->check(CLI::IsMember({"sigma", "P"}));
    cmd->add_option("--weight-order", a.weight_order, "objective weight order: literal | physical")
        ->check(CLI::IsMember({"literal", "physical"}));
    cmd->add_flag("--unsafe", a.unsafe, "run even without a feasible certificate");
    cmd->add_flag("--require-feasible", a.require_feasible,
                  "exit nonzero when the certificate is infeasible");
    cmd->add_flag("--gamma1", a.gamma1, "fix the step-size coefficient to 1");
}

pdgmpc::RunConfig load_with_overrides(const CommonArgs& a) {
    pdgmpc::RunConfig cfg = pdgmpc::load_config(a.config_path);
    if (!a.output_dir.empty()) cfg.output_dir = a.output_dir;
    if (!a.variant.empty()) cfg.use_P_variant = (a.variant == "P");
    if (!a.weight_order.empty()) cfg.weight_order = pdgmpc::parse_weight_order(a.weight_order);
    if (a.gamma1) cfg.algorithm1 = false;
    return cfg;
}

json certificate_json(const pdgmpc::Certificate& c) {
    json j;
    j["delta_star"] = c.delta_star;
    j["lambda_max_star"] = c.lambda_max_star;
    j["feasible"] = c.feasible;
    j["kind"] = (c.kind == pdgmpc::CertificateKind::continuous
                     ? "continuous"
                     : (c.kind == pdgmpc::CertificateKind::discrete ? "discrete"
                                                                    : "continuous_barred"));
    j["matrices_hash"] = c.matrices_hash;
    j["boundary_hit"] = c.boundary_hit;
    return j;
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    f << j.dump(2) << "\n";
}

int cmd_certify(const CommonArgs& args) {
    const pdgmpc::RunConfig cfg = load_with_overrides(args);
    const pdgmpc::Problem prob = pdgmpc::build_problem(cfg);
    const pdgmpc::DiscretePlant plant_dt = pdgmpc::discretize(prob.plant, cfg.params.dt);

    pdgmpc::CertifyOptions opt;
    opt.use_P_variant = cfg.use_P_variant;

    json report;
    report["config_digest"] = cfg.digest;
    report["case_name"] = cfg.case_name;
    report["variant"] = cfg.use_P_variant ? "P" : "sigma";
    report["weight_order"] = cfg.weight_order == pdgmpc::WeightOrder::physical ? "physical" : "literal";

    bool any_infeasible = false;
    for (const bool projected : {false, true}) {
        opt.projection = projected ? &prob.projection : nullptr;
        const auto ct = pdgmpc::certify_ct(prob.spec, cfg.params, prob.plant, opt);
        const auto dt = pdgmpc::certify_dt(prob.spec, cfg.params, plant_dt, opt);
        const std::string tag = projected ? "projected_W" : "plain_W";
        report[tag]["continuous"] = certificate_json(ct);
        report[tag]["discrete"] = certificate_json(dt);

        std::printf("[%s] continuous: delta*=%.4f  lambda_max*=%.4f  %s\n", tag.c_str(),
                    ct.delta_star, ct.lambda_max_star, ct.feasible ? "feasible" : "infeasible");
        std::printf("[%s] discrete:   delta*=%.4f  lambda_max*=%.4f  %s\n", tag.c_str(),
                    dt.delta_star, dt.lambda_max_star, dt.feasible ? "feasible" : "infeasible");
        if (projected == (cfg.projection)) any_infeasible |= !dt.feasible || !ct.feasible;
    }

    fs::create_directories(cfg.output_dir);
    const fs::path out = fs::path(cfg.output_dir) / (cfg.case_name + "_certificates.json");
    write_json(report, out);
    std::printf("report written to %s\n", out.string().c_str());

    if (args.require_feasible && any_infeasible) return 2;
    return 0;
}

pdgmpc::Certificate certify_for_run(const pdgmpc::RunConfig& cfg, const pdgmpc::Problem& prob) {
    pdgmpc::CertifyOptions opt;
    opt.use_P_variant = cfg.use_P_variant;
    opt.projection = cfg.projection ? &prob.projection : nullptr;
    const pdgmpc::DiscretePlant plant_dt = pdgmpc::discretize(prob.plant, cfg.params.dt);
    return pdgmpc::certify_dt(prob.spec, cfg.params, plant_dt, opt);
}

int cmd_simulate(const CommonArgs& args) {
    const pdgmpc::RunConfig cfg = load_with_overrides(args);
    const pdgmpc::Problem prob = pdgmpc::build_problem(cfg);
    const pdgmpc::Certificate cert = certify_for_run(cfg, prob);

    if (!cert.feasible && !args.unsafe) {
        std::fprintf(stderr,
                     "certificate infeasible (lambda_max*=%.4f); pass --unsafe to run anyway\n",
                     cert.lambda_max_star);
        return 2;
    }

    pdgmpc::SimConfig sc = pdgmpc::make_sim_config(
        cfg, prob, cfg.projection ? pdgmpc::ControllerKind::pdg_proj : pdgmpc::ControllerKind::pdg);
    sc.unsafe = args.unsafe;
    const pdgmpc::SimLog log = pdgmpc::simulate(sc, prob, &cert);

    fs::create_directories(cfg.output_dir);
    const fs::path csv = fs::path(cfg.output_dir) / (cfg.case_name + "_sim.csv");
    const fs::path js = fs::path(cfg.output_dir) / (cfg.case_name + "_sim.json");
    pdgmpc::export_csv(log, csv.string());
    pdgmpc::export_json(log, js.string());

    const pdgmpc::Vector& xe = log.states.back();
    const double rel = pdgmpc::norm2(xe) / std::max(pdgmpc::norm2(log.x_ref), 1e-12);
    std::printf("status: %s", log.status.c_str());
    if (log.event_step >= 0) std::printf(" (step %ld)", log.event_step);
    std::printf("\nfinal relative state error: %.3e\n", rel);
    std::printf("logs written to %s and %s\n", csv.string().c_str(), js.string().c_str());
    return 0;
}

int cmd_compare(const CommonArgs& args) {
    const pdgmpc::RunConfig cfg = load_with_overrides(args);
    const pdgmpc::Problem prob = pdgmpc::build_problem(cfg);
    const pdgmpc::Certificate cert = certify_for_run(cfg, prob);
    if (!cert.feasible && !args.unsafe) {
        std::fprintf(stderr,
                     "certificate infeasible (lambda_max*=%.4f); pass --unsafe to run anyway\n",
                     cert.lambda_max_star);
        return 2;
    }

    const std::vector<pdgmpc::ControllerKind> kinds = {
        pdgmpc::ControllerKind::pdg, pdgmpc::ControllerKind::pdg_proj,
        pdgmpc::ControllerKind::cgmres1, pdgmpc::ControllerKind::cgmres2,
        pdgmpc::ControllerKind::mpc_oracle};

    std::vector<pdgmpc::SimLog> logs;
    for (const auto kind : kinds) {
        pdgmpc::SimConfig sc = pdgmpc::make_sim_config(cfg, prob, kind);
        sc.unsafe = args.unsafe;
        logs.push_back(pdgmpc::simulate(sc, prob, &cert));
    }
    const pdgmpc::SimLog& baseline = logs.back();   // mpc_oracle

    fs::create_directories(cfg.output_dir);
    json report;
    report["config_digest"] = cfg.digest;
    report["baseline"] = "mpc_oracle";

    std::printf("%-12s %12s %12s %12s %12s\n", "method", "actual_obj", "actual_con",
                "horizon_obj", "horizon_con");
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const pdgmpc::Metrics m = pdgmpc::metrics(logs[i], baseline);
        std::printf("%-12s %12.4f %12.4g %12.4f %12.4g\n", logs[i].controller.c_str(),
                    m.norm_actual_obj, m.norm_actual_con, m.norm_horizon_obj, m.norm_horizon_con);
        json row;
        row["actual_obj"] = m.actual_obj;
        row["actual_con"] = m.actual_con;
        row["horizon_obj"] = m.horizon_obj;
        row["horizon_con"] = m.horizon_con;
        row["norm_actual_obj"] = m.norm_actual_obj;
        row["norm_actual_con"] = m.norm_actual_con;
        row["norm_horizon_obj"] = m.norm_horizon_obj;
        row["norm_horizon_con"] = m.norm_horizon_con;
        report["methods"][logs[i].controller] = row;
    }
    const fs::path out = fs::path(cfg.output_dir) / (cfg.case_name + "_compare.json");
    write_json(report, out);
    std::printf("report written to %s\n", out.string().c_str());
    return 0;
}

int cmd_bench(const CommonArgs& args, int repetitions) {
    const pdgmpc::RunConfig cfg = load_with_overrides(args);
    const pdgmpc::Problem prob = pdgmpc::build_problem(cfg);
    const pdgmpc::Certificate cert = certify_for_run(cfg, prob);
    if (!cert.feasible && !args.unsafe) {
        std::fprintf(stderr, "certificate infeasible; pass --unsafe to bench anyway\n");
        return 2;
    }

    std::vector<pdgmpc::SimConfig> configs;
    for (const auto kind :
         {pdgmpc::ControllerKind::pdg, pdgmpc::ControllerKind::pdg_proj,
          pdgmpc::ControllerKind::cgmres1, pdgmpc::ControllerKind::cgmres2,
          pdgmpc::ControllerKind::mpc_oracle}) {
        pdgmpc::SimConfig sc = pdgmpc::make_sim_config(cfg, prob, kind);
        sc.unsafe = args.unsafe;
        configs.push_back(sc);
    }
    const pdgmpc::BenchReport report = pdgmpc::bench(configs, prob, &cert, repetitions);

    fs::create_directories(cfg.output_dir);
    const fs::path csv = fs::path(cfg.output_dir) / (cfg.case_name + "_bench.csv");
    std::ofstream f(csv);
    f << "method,mean_step_us,per_iter_us,est_max_us,iter_max,iter_mean\n";
    json jreport;
    jreport["config_digest"] = cfg.digest;
    jreport["repetitions"] = report.repetitions;
    std::printf("%-12s %14s %14s %14s %9s %9s\n", "method", "mean_step[us]", "per_iter[us]",
                "est_max[us]", "iter_max", "iter_mean");
    for (const auto& row : report.rows) {
        std::printf("%-12s %14.3f %14.3f %14.3f %9d %9.3f\n", row.method.c_str(),
                    1e6 * row.mean_step_seconds, 1e6 * row.per_iteration_seconds,
                    1e6 * row.estimated_max_seconds, row.iter_max, row.iter_mean);
        f << row.method << "," << 1e6 * row.mean_step_seconds << ","
          << 1e6 * row.per_iteration_seconds << "," << 1e6 * row.estimated_max_seconds << ","
          << row.iter_max << "," << row.iter_mean << "\n";
        json jrow;
        jrow["mean_step_us"] = 1e6 * row.mean_step_seconds;
        jrow["per_iter_us"] = 1e6 * row.per_iteration_seconds;
        jrow["est_max_us"] = 1e6 * row.estimated_max_seconds;
        jrow["iter_max"] = row.iter_max;
        jrow["iter_mean"] = row.iter_mean;
        jreport["methods"][row.method] = jrow;
    }
    write_json(jreport, fs::path(cfg.output_dir) / (cfg.case_name + "_bench.json"));
    std::printf("reports written to %s\n", cfg.output_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sampled-data primal-dual gradient MPC: certify, simulate, compare, bench"};
    app.require_subcommand(1);

    CommonArgs certify_args, simulate_args, compare_args, bench_args;
    int repetitions = 10;

    CLI::App* certify = app.add_subcommand("certify", "stability certificates for a scenario");
    add_common(certify, certify_args);
    CLI::App* simulate = app.add_subcommand("simulate", "closed-loop run with CSV/JSON logs");
    add_common(simulate, simulate_args);
    CLI::App* compare = app.add_subcommand("compare", "all controllers on one scenario");
    add_common(compare, compare_args);
    CLI::App* bench = app.add_subcommand("bench", "per-step timing of each controller");
    add_common(bench, bench_args);
    bench->add_option("--repetitions", repetitions, "timed repetitions (min 10)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (certify->parsed()) return cmd_certify(certify_args);
        if (simulate->parsed()) return cmd_simulate(simulate_args);
        if (compare->parsed()) return cmd_compare(compare_args);
        if (bench->parsed()) return cmd_bench(bench_args, repetitions);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
