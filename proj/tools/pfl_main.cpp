#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "pfl/config.hpp"
#include "pfl/engine.hpp"
#include "pfl/hecost.hpp"
#include "pfl/node.hpp"
#include "pfl/problem.hpp"
#include "pfl/sched.hpp"
#include "pfl/transport.hpp"

namespace fs = std::filesystem;
using namespace pfl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitAuth = 4;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::int64_t seed_override = -1;
    std::string precision_override;
    std::string listen;
    std::string connect;
    int client_id = -1;
    std::string port_file;
    bool dump_iterates = false;
    std::string export_problem;
    std::string problem_file;
};

GenParams gen_params_from(const Config& cfg, const CommonArgs& args) {
    GenParams gp;
    gp.d = cfg.get_i64("problem.d", 100);
    gp.n = cfg.get_i64("problem.n", 10);
    gp.n_i = cfg.get_i64("problem.n_i", 5);
    gp.l_target = cfg.get_f64("problem.l_target", 10.0);
    gp.seed = cfg.get_u64("problem.seed", 1);
    gp.interpolation = cfg.get_bool("problem.interpolation", true);
    const std::string spectrum = cfg.get_str("problem.spectrum", "scaled_uniform");
    if (spectrum == "scaled_uniform")
        gp.spectrum = SpectrumMode::scaled_uniform;
    else if (spectrum == "exact")
        gp.spectrum = SpectrumMode::exact;
    else
        throw ConfigError("problem.spectrum must be scaled_uniform or exact");
    if (args.seed_override >= 0) gp.seed = std::uint64_t(args.seed_override);
    return gp;
}

RunConfig run_config_from(const Config& cfg, const CommonArgs& args) {
    RunConfig rc;
    const std::string alg = cfg.get_str("run.algorithm", "gd");
    if (!algorithm_from_string(alg, rc.algorithm))
        throw ConfigError("unknown run.algorithm " + alg);
    rc.gamma = cfg.get_f64("run.gamma", 0.1);
    rc.rounds = cfg.get_i64("run.rounds", 100);
    std::string prec = cfg.get_str("run.precision", "fp64");
    if (!args.precision_override.empty()) prec = args.precision_override;
    if (!precision_from_string(prec, rc.precision))
        throw ConfigError("unknown precision " + prec);
    rc.randk_k = cfg.get_i64("run.randk_k", 0);
    rc.compressor_seed = cfg.get_u64("run.compressor_seed", 1);
    rc.x0_seed = cfg.get_u64("run.x0_seed", 2);
    if (cfg.has("run.key_seed")) rc.key_seed = cfg.get_u64("run.key_seed", 3);
    rc.fedavg_local_steps = cfg.get_i64("run.fedavg_local_steps", 1);
    rc.fedavg_local_gamma = cfg.get_f64("run.fedavg_local_gamma", 0.0);
    rc.divergence_factor = cfg.get_f64("run.divergence_factor", 1e12);
    rc.record_iterates = args.dump_iterates;
    if (rc.rounds < 1) throw ConfigError("run.rounds must be >= 1");
    if (!(rc.gamma > 0.0)) throw ConfigError("run.gamma must be positive");
    return rc;
}

Config effective_config(const Config& cfg, const GenParams& gp, const RunConfig& rc) {
    Config out = cfg;
    out.set("problem.d", std::to_string(gp.d));
    out.set("problem.n", std::to_string(gp.n));
    out.set("problem.n_i", std::to_string(gp.n_i));
    out.set("problem.seed", std::to_string(gp.seed));
    out.set("problem.interpolation", gp.interpolation ? "true" : "false");
    out.set("problem.spectrum",
            gp.spectrum == SpectrumMode::exact ? "exact" : "scaled_uniform");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", gp.l_target);
    out.set("problem.l_target", buf);
    out.set("run.algorithm", to_string(rc.algorithm));
    std::snprintf(buf, sizeof buf, "%.17g", rc.gamma);
    out.set("run.gamma", buf);
    out.set("run.rounds", std::to_string(rc.rounds));
    out.set("run.precision", to_string(rc.precision));
    out.set("run.compressor_seed", std::to_string(rc.compressor_seed));
    out.set("run.x0_seed", std::to_string(rc.x0_seed));
    if (rc.key_seed) out.set("run.key_seed", std::to_string(*rc.key_seed));
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_summary(const fs::path& path, const RunResult& r) {
    char buf[512];
    std::int64_t up = 0, down = 0;
    for (const auto& m : r.rounds) up += m.up_bytes_total, down += m.down_bytes_total;
    std::snprintf(buf, sizeof buf,
                  "rounds_executed %zu\nfinal_fx %.17g\nfinal_grad_norm_sq %.17g\n"
                  "diverged %d\nup_bytes_total %lld\ndown_bytes_total %lld\n",
                  r.rounds.size(), r.final_fx, r.final_grad_norm_sq, int(r.diverged),
                  (long long)up, (long long)down);
    write_text(path, buf);
}

std::pair<std::string, std::uint16_t> split_hostport(const std::string& s) {
    const std::size_t colon = s.rfind(':');
    if (colon == std::string::npos) throw ConfigError("expected host:port, got " + s);
    return {s.substr(0, colon), std::uint16_t(std::stoi(s.substr(colon + 1)))};
}

int cmd_run(const CommonArgs& args) {
    const Config cfg =
        args.config_path.empty() ? Config::parse_string("") : Config::parse_file(args.config_path);
    const GenParams gp = gen_params_from(cfg, args);
    const RunConfig rc = run_config_from(cfg, args);
    fs::create_directories(args.out_dir);

    // multi-process roles
    if (!args.listen.empty()) {
        const auto [host, port] = split_hostport(args.listen);
        TcpHub hub(host, port, {int(gp.n), rc.rounds, true});
        if (!args.port_file.empty()) write_text(args.port_file, std::to_string(hub.port()) + "\n");
        std::cout << "hub listening on " << host << ":" << hub.port() << "\n";
        hub.serve();
        char buf[160];
        std::snprintf(buf, sizeof buf, "hub_bytes_up %lld\nhub_bytes_down %lld\n",
                      (long long)hub.bytes_up(), (long long)hub.bytes_down());
        write_text(fs::path(args.out_dir) / "hub_summary.txt", buf);
        return kExitOk;
    }

    const Problem problem =
        args.problem_file.empty() ? generate_problem(gp) : load_problem(args.problem_file);
    if (!args.export_problem.empty()) save_problem(problem, args.export_problem);

    if (!args.connect.empty()) {
        if (args.client_id < 0) throw ConfigError("--connect requires --client-id");
        const auto [host, port] = split_hostport(args.connect);
        TcpClient conn(host, port);
        ClientOptions opt;
        opt.run = rc;
        opt.client_id = std::uint32_t(args.client_id);
        const RunResult r = run_permk_aes_client(problem, opt, conn);
        const std::string tag = "client" + std::to_string(args.client_id);
        write_metrics_csv((fs::path(args.out_dir) / (tag + "_metrics.csv")).string(), r.rounds);
        if (args.dump_iterates)
            write_iterates_csv((fs::path(args.out_dir) / (tag + "_iterates.csv")).string(),
                               r.iterates);
        write_summary(fs::path(args.out_dir) / (tag + "_summary.txt"), r);
        return r.diverged ? kExitDiverged : kExitOk;
    }

    const RunResult r = run(problem, rc);
    write_metrics_csv((fs::path(args.out_dir) / "metrics.csv").string(), r.rounds);
    if (args.dump_iterates)
        write_iterates_csv((fs::path(args.out_dir) / "iterates.csv").string(), r.iterates);
    write_summary(fs::path(args.out_dir) / "summary.txt", r);
    write_text(fs::path(args.out_dir) / "config_used.ini",
               effective_config(cfg, gp, rc).serialize());
    return r.diverged ? kExitDiverged : kExitOk;
}

int cmd_tune(const CommonArgs& args) {
    const Config cfg = Config::parse_file(args.config_path);
    const GenParams gp = gen_params_from(cfg, args);
    RunConfig rc = run_config_from(cfg, args);
    if (!cfg.has("run.algorithm")) rc.algorithm = Algorithm::dcgd_permk;
    rc.rounds = cfg.get_i64("tune.rounds", rc.rounds);
    const std::vector<double> grid = cfg.get_f64_list("tune.gamma_grid");
    const std::vector<std::uint64_t> seeds = cfg.get_u64_list("tune.seeds");
    fs::create_directories(args.out_dir);

    const Problem problem = generate_problem(gp);
    const TuneReport rep = tune_step_size(problem, rc, grid, seeds);

    std::string csv = "gamma,seed,diverged,final_grad_norm_sq\n";
    char buf[160];
    for (const TuneEntry& e : rep.entries) {
        std::snprintf(buf, sizeof buf, "%.17g,%llu,%d,%.17g\n", e.gamma,
                      (unsigned long long)e.seed, int(e.diverged), e.final_grad_norm_sq);
        csv += buf;
    }
    write_text(fs::path(args.out_dir) / "tuning_report.csv", csv);
    std::snprintf(buf, sizeof buf, "best_gamma %.17g\n", rep.best_gamma);
    std::string summary = buf;
    for (double g : rep.diverged_gammas) {
        std::snprintf(buf, sizeof buf, "diverged_gamma %.17g\n", g);
        summary += buf;
    }
    write_text(fs::path(args.out_dir) / "tuning_summary.txt", summary);
    std::cout << "best gamma " << rep.best_gamma << "\n";
    return kExitOk;
}

int cmd_sweep_dim(const CommonArgs& args) {
    const Config cfg = Config::parse_file(args.config_path);
    const CommonArgs base = args;
    const std::vector<std::int64_t> d_list = cfg.get_i64_list("sweep.d_list");
    std::vector<std::string> algs{"gd", "dcgd_permk", "dcgd_permk_aes"};
    if (cfg.has("sweep.algorithms")) algs = cfg.get_str_list("sweep.algorithms");
    fs::create_directories(args.out_dir);

    std::string joined =
        "d,algorithm,rounds,final_fx,final_grad_norm_sq,up_bytes_per_client,"
        "nominal_up_bytes_per_client,ckks_up_bytes,ckks_down_bytes,ckks_key_bytes,"
        "aes_envelope_bytes,ckks_to_aes_ratio\n";
    const CkksParams params = aes128_equivalent_params();
    for (std::int64_t d : d_list) {
        for (const std::string& alg : algs) {
            GenParams gp = gen_params_from(cfg, base);
            gp.d = d;
            RunConfig rc = run_config_from(cfg, base);
            if (!algorithm_from_string(alg, rc.algorithm))
                throw ConfigError("unknown sweep algorithm " + alg);
            rc.rounds = cfg.get_i64("sweep.rounds", 50);
            const Problem problem = generate_problem(gp);
            const RunResult r = run(problem, rc);
            const std::string name =
                "sweep_d" + std::to_string(d) + "_" + alg + ".csv";
            write_metrics_csv((fs::path(args.out_dir) / name).string(), r.rounds);

            const std::int64_t ckks_up = ciphertext_bytes(d, params);
            const std::int64_t aes_bytes =
                aes_envelope_bytes(d, wire_bytes_per_scalar(rc.precision));
            char buf[360];
            std::snprintf(buf, sizeof buf, "%lld,%s,%zu,%.17g,%.17g,%.17g,%.17g,%lld,%lld,%lld,%lld,%.6g\n",
                          (long long)d, alg.c_str(), r.rounds.size(), r.final_fx,
                          r.final_grad_norm_sq,
                          r.rounds.empty() ? 0.0 : r.rounds.back().up_bytes_per_client,
                          r.rounds.empty() ? 0.0 : r.rounds.back().nominal_up_bytes_per_client,
                          (long long)ckks_up, (long long)ckks_up,
                          (long long)key_size_bytes(params), (long long)aes_bytes,
                          double(ckks_up) / double(aes_bytes));
            joined += buf;
        }
    }
    write_text(fs::path(args.out_dir) / "sweep_comparison.csv", joined);
    return kExitOk;
}

int cmd_schedule(const CommonArgs& args) {
    const Config cfg = Config::parse_file(args.config_path);
    SchedScenario sc;
    const std::string alg = cfg.get_str("schedule.algorithm", "gd");
    if (alg == "gd")
        sc.algorithm = SchedAlgorithm::gd;
    else if (alg == "dcgd_permk_aes")
        sc.algorithm = SchedAlgorithm::dcgd_permk_aes;
    else
        throw ConfigError("schedule.algorithm must be gd or dcgd_permk_aes");
    sc.n = cfg.get_i64("schedule.n", 4);
    sc.d = cfg.get_i64("schedule.d", 10000000);
    sc.rounds = cfg.get_i64("schedule.rounds", 4);
    if (cfg.has("schedule.n_i")) {
        sc.n_i = cfg.get_i64_list("schedule.n_i");
    } else {
        sc.n_i.assign(std::size_t(sc.n), 11000);
        if (!sc.n_i.empty()) sc.n_i[0] = 55000;
    }
    if (std::int64_t(sc.n_i.size()) != sc.n)
        throw ConfigError("schedule.n_i must list one sample count per client");

    ResourceModel m;
    m.cores = std::int32_t(cfg.get_i64("schedule.cores", 10));
    m.frequency_hz = cfg.get_f64("schedule.frequency_ghz", 3.2) * 1e9;
    m.flops_peak = cfg.get_f64("schedule.flops_peak_gflops", 238.41) * 1e9;
    if (cfg.has("schedule.bandwidth_mbits_per_s"))
        m.bandwidth_up_bytes_per_s = cfg.get_f64("schedule.bandwidth_mbits_per_s") * 1e6 / 8.0;
    else
        m.bandwidth_up_bytes_per_s = cfg.get_f64("schedule.bandwidth_mbytes_per_s", 41.54) * 1e6;
    m.bandwidth_down_bytes_per_s = m.bandwidth_up_bytes_per_s;
    m.rtt_s = cfg.get_f64("schedule.rtt_ms", 28.0) / 1e3;
    m.bpp = int(cfg.get_i64("schedule.bpp", 32));
    m.aes_cycles_per_byte = cfg.get_f64("schedule.aes_cycles_per_byte", 1.5);
    const int max_iters = int(cfg.get_i64("schedule.max_iters", 50));
    const double eps_rel = cfg.get_f64("schedule.eps_rel", 1e-3);

    fs::create_directories(args.out_dir);
    const TaskGraph g = build_task_graph(sc, m);
    const Schedule naive = schedule_cpm(g, naive_durations(g, m));
    const Schedule refined = refine_schedule(g, m, max_iters, eps_rel);

    write_text(fs::path(args.out_dir) / (alg + "_naive.dot"), export_dot(g, naive));
    write_text(fs::path(args.out_dir) / (alg + "_refined.dot"), export_dot(g, refined));
    std::string csv = "iteration,makespan_s\n";
    char buf[128];
    for (std::size_t i = 0; i < refined.iteration_makespans.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, refined.iteration_makespans[i]);
        csv += buf;
    }
    write_text(fs::path(args.out_dir) / (alg + "_makespans.csv"), csv);
    std::snprintf(buf, sizeof buf,
                  "naive_makespan_s %.6f\nrefined_makespan_s %.6f\nspeedup %.4f\nconverged %d\n",
                  naive.makespan, refined.makespan, naive.makespan / refined.makespan,
                  int(refined.converged));
    write_text(fs::path(args.out_dir) / (alg + "_schedule_summary.txt"), buf);
    std::cout << buf;
    return kExitOk;
}

int cmd_ckks_model(const CommonArgs& args, const std::vector<std::int64_t>& d_list_arg) {
    std::vector<std::int64_t> d_list = d_list_arg;
    bool strict = false;
    if (!args.config_path.empty()) {
        const Config cfg = Config::parse_file(args.config_path);
        if (d_list.empty() && cfg.has("ckks.d_list")) d_list = cfg.get_i64_list("ckks.d_list");
        strict = cfg.get_bool("ckks.strict", false);
    }
    if (d_list.empty()) d_list = {1000, 8192, 8193, 100000, 1000000};
    const CkksParams p = aes128_equivalent_params(strict);
    fs::create_directories(args.out_dir);

    std::string csv = "d,N,q_bits,up_bytes,down_bytes,key_bytes,aes_envelope_bytes,ratio\n";
    char buf[256];
    for (std::int64_t d : d_list) {
        const CkksTraffic t = ckks_traffic_per_round(d, p);
        const std::int64_t aes = aes_envelope_bytes(d);
        std::snprintf(buf, sizeof buf, "%lld,%lld,%lld,%lld,%lld,%lld,%lld,%.6g\n", (long long)d,
                      (long long)p.poly_degree, (long long)p.q_bits,
                      (long long)t.up_bytes_per_client, (long long)t.down_bytes_per_client,
                      (long long)t.one_time_key_bytes, (long long)aes,
                      double(t.up_bytes_per_client) / double(aes));
        csv += buf;
    }
    write_text(fs::path(args.out_dir) / "ckks_model.csv", csv);
    std::cout << csv;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"secure federated learning experiments: compressed gradient descent with "
                 "permutation compressors and authenticated encryption"};
    app.require_subcommand(1);

    CommonArgs args;
    std::vector<std::int64_t> ckks_d_list;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "configuration file");
        sub->add_option("--out-dir", args.out_dir, "output directory");
        sub->add_option("--seed", args.seed_override, "problem seed override");
        sub->add_option("--precision", args.precision_override, "fp16|fp32|fp64 override");
    };

    CLI::App* runc = app.add_subcommand("run", "execute one configured experiment");
    add_common(runc);
    runc->add_option("--listen", args.listen, "host:port, run as the concatenate-and-forward hub");
    runc->add_option("--connect", args.connect, "host:port, run as one protocol client");
    runc->add_option("--client-id", args.client_id, "client index for --connect");
    runc->add_option("--port-file", args.port_file, "write the bound hub port here");
    runc->add_flag("--dump-iterates", args.dump_iterates, "write exact per-round iterates");
    runc->add_option("--export-problem", args.export_problem, "save the generated problem");
    runc->add_option("--problem-file", args.problem_file, "load a problem instead of generating");

    CLI::App* tune = app.add_subcommand("tune", "step-size grid search");
    add_common(tune);
    CLI::App* sweep = app.add_subcommand("sweep-dim", "dimension sweep with model columns");
    add_common(sweep);
    CLI::App* sched = app.add_subcommand("schedule", "build, schedule and refine a task graph");
    add_common(sched);
    CLI::App* ckks = app.add_subcommand("ckks-model", "emit the CKKS size model table");
    add_common(ckks);
    ckks->add_option("--d", ckks_d_list, "vector lengths to tabulate");

    CLI11_PARSE(app, argc, argv);

    try {
        if (runc->parsed()) return cmd_run(args);
        if (tune->parsed()) return cmd_tune(args);
        if (sweep->parsed()) return cmd_sweep_dim(args);
        if (sched->parsed()) return cmd_schedule(args);
        if (ckks->parsed()) return cmd_ckks_model(args, ckks_d_list);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const TuningError& e) {
        std::cerr << "tuning failed: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const ProtocolError& e) {
        std::cerr << "protocol failure: " << e.what() << "\n";
        return kExitAuth;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
