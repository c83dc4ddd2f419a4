// Command-line front end: runs estimator x benchmark x tolerance matrices
// from a JSON config, validates configs, and summarizes raw CSV output.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "subsetsim/experiment.hpp"

namespace {

using namespace subsetsim;

int cmd_validate(const std::string& path) {
    try {
        parse_config(path);
    } catch (const ConfigError& e) {
        for (const auto& d : e.details) std::cerr << "error: " << d << '\n';
        return 1;
    }
    std::cout << "config ok\n";
    return 0;
}

int cmd_run(const std::string& path, int workers_override, std::optional<std::uint64_t> seed_override,
            const std::string& out_override) {
    ExperimentConfig cfg;
    try {
        cfg = parse_config(path);
    } catch (const ConfigError& e) {
        for (const auto& d : e.details) std::cerr << "error: " << d << '\n';
        return 1;
    }
    if (workers_override > 0) cfg.workers = workers_override;
    if (seed_override) cfg.seed = *seed_override;
    const std::string out_dir = out_override.empty() ? cfg.output_dir : out_override;

    try {
        RunResult result = run_experiment(cfg);
        for (const auto& msg : result.abort_messages) std::cerr << "abort: " << msg << '\n';
        if (result.rows.empty()) {
            std::cerr << "error: every replicate aborted\n";
            return 2;
        }
        emit_results(cfg, result, out_dir);
        std::cout << "wrote " << out_dir << "/raw.csv and " << out_dir << "/summary.json\n";
        for (const auto& g : result.groups) {
            std::printf("%-10s tol %-6g mean_p %.4e cov %.3f cost %.4g", g.estimator.c_str(), g.tol, g.mean_p,
                        g.mean_cov_hat, g.mean_cost);
            if (!std::isnan(g.empirical_delta)) std::printf(" delta %.3f", g.empirical_delta);
            if (g.projected) std::printf(" [projected]");
            std::printf("\n");
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

int cmd_summarize(const std::string& csv_path, std::optional<double> ref, const std::string& out_path) {
    std::ifstream in(csv_path);
    if (!in) {
        std::cerr << "error: cannot open " << csv_path << '\n';
        return 1;
    }
    std::string header;
    std::getline(in, header);
    if (header != kCsvHeader) {
        std::cerr << "error: unexpected CSV header\n";
        return 1;
    }
    struct Acc {
        long n = 0;
        double sum = 0, sum2 = 0, cost = 0, cov = 0, rmse2 = 0;
    };
    std::map<std::pair<std::string, double>, Acc> groups;
    std::string line;
    std::string benchmark;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> f;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (f.size() != 8) {
            std::cerr << "error: malformed row: " << line << '\n';
            return 1;
        }
        benchmark = f[2];
        const double tol = std::stod(f[3]);
        const double p = std::stod(f[4]);
        Acc& a = groups[{f[1], tol}];
        ++a.n;
        a.sum += p;
        a.sum2 += p * p;
        a.cov += std::stod(f[5]);
        a.cost += std::stod(f[6]);
        if (ref) {
            const double rel = (p - *ref) / *ref;
            a.rmse2 += rel * rel;
        }
    }
    json out;
    out["benchmark"] = benchmark;
    if (ref) out["reference_probability"] = *ref;
    json jgroups = json::array();
    for (const auto& [key, a] : groups) {
        const double n = static_cast<double>(a.n);
        json g{{"estimator", key.first},
               {"tol", key.second},
               {"replicates", a.n},
               {"mean_p_hat", a.sum / n},
               {"std_p_hat", a.n > 1 ? std::sqrt(std::max(0.0, (a.sum2 - a.sum * a.sum / n) / (n - 1.0))) : 0.0},
               {"mean_cov_hat", a.cov / n},
               {"mean_total_cost", a.cost / n}};
        if (ref) g["empirical_delta"] = std::sqrt(a.rmse2 / n);
        jgroups.push_back(std::move(g));
    }
    out["groups"] = jgroups;
    if (out_path.empty()) {
        std::cout << out.dump(2) << '\n';
    } else {
        std::ofstream os(out_path, std::ios::binary);
        if (!os) {
            std::cerr << "error: cannot write " << out_path << '\n';
            return 2;
        }
        os << out.dump(2) << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rare-event estimation experiments: standard MC, subset simulation, "
                 "selective refinement and adaptive multilevel subset simulation"};
    app.require_subcommand(1);

    std::string config_path, csv_path, out_dir;
    int workers = 0;
    std::uint64_t seed_value = 0;
    double ref_value = 0.0;

    auto* run = app.add_subcommand("run", "run the experiment matrix from a JSON config");
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("--workers", workers, "worker threads (default: hardware)");
    auto* seed_opt = run->add_option("--seed", seed_value, "override the config seed");
    run->add_option("--out", out_dir, "output directory (overrides config)");

    auto* validate = app.add_subcommand("validate", "validate a config and report every error");
    validate->add_option("config", config_path, "experiment config (JSON)")->required();

    auto* summarize = app.add_subcommand("summarize", "aggregate a raw.csv produced by run");
    summarize->add_option("raw", csv_path, "raw CSV file")->required();
    auto* ref_opt = summarize->add_option("--ref", ref_value, "reference probability for empirical delta");
    summarize->add_option("--out", out_dir, "write summary JSON here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed())
        return cmd_run(config_path, workers,
                       seed_opt->count() > 0 ? std::optional<std::uint64_t>(seed_value) : std::nullopt, out_dir);
    if (validate->parsed()) return cmd_validate(config_path);
    if (summarize->parsed())
        return cmd_summarize(csv_path, ref_opt->count() > 0 ? std::optional<double>(ref_value) : std::nullopt,
                             out_dir);
    return 1;
}
