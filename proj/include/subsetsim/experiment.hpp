#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "subsetsim/estimators.hpp"
#include "subsetsim/models/brownian.hpp"
#include "subsetsim/models/darcy.hpp"
#include "subsetsim/models/toy.hpp"

namespace subsetsim {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> errors)
        : std::runtime_error(join(errors)), details(std::move(errors)) {}
    std::vector<std::string> details;

private:
    static std::string join(const std::vector<std::string>& errs) {
        std::string out = "configuration invalid:";
        for (const auto& e : errs) out += "\n  - " + e;
        return out;
    }
};

enum class Benchmark { Toy, Brownian, Darcy };
enum class EstimatorKind { Mc, Sus, SusSr, MlSusSr };

inline std::string to_string(Benchmark b) {
    switch (b) {
        case Benchmark::Toy: return "toy";
        case Benchmark::Brownian: return "brownian";
        default: return "darcy";
    }
}
inline std::string to_string(EstimatorKind e) {
    switch (e) {
        case EstimatorKind::Mc: return "mc";
        case EstimatorKind::Sus: return "sus";
        case EstimatorKind::SusSr: return "sus-sr";
        default: return "ml-sus-sr";
    }
}

struct ExperimentConfig {
    Benchmark benchmark = Benchmark::Toy;
    std::vector<EstimatorKind> estimators;
    std::vector<double> tolerances;
    long replicates = 1;
    std::uint64_t seed = 1;
    std::optional<double> reference_probability;
    std::string output_dir = "out";
    int workers = 0;  // 0 = hardware concurrency

    // estimator parameters
    double p0 = 0.2;
    double eta = 0.6;
    int s = 2;
    long n_min = 100;
    long n_max = 4000000;
    long n_chains = 0;
    bool check_subset_property = true;
    bool mc_projected = true;
    std::optional<double> p1_estimate;
    std::vector<double> sus_thresholds;  // fixed intermediate thresholds; empty = adaptive p0
    std::vector<int> ml_levels;          // empty = per-benchmark rule

    // model parameters
    ToyModelConfig toy;
    BrownianModelConfig brownian;
    DarcyModelConfig darcy;

    // per-benchmark accuracy level for a given tolerance
    int finest_level(double tol) const {
        switch (benchmark) {
            case Benchmark::Toy:
                return std::max(2, static_cast<int>(std::ceil(2.0 + std::log2(1.0 / tol))));
            case Benchmark::Brownian:
                return std::max(5, static_cast<int>(std::ceil(2.0 * std::log2(1.0 / tol))) + 2);
            default:
                return darcy.max_level;
        }
    }

    std::vector<int> multilevel_levels(double tol) const {
        if (!ml_levels.empty()) return ml_levels;
        const int L = finest_level(tol);
        std::vector<int> levels;
        switch (benchmark) {
            case Benchmark::Toy:
                for (int j = 1; j <= L; ++j) levels.push_back(j);
                break;
            case Benchmark::Brownian: {
                const int K = std::max(L - 1, 8);
                for (int j = 1; j <= K; ++j) levels.push_back(std::clamp(std::max(4, L - K + j), 4, L));
                break;
            }
            default:
                levels = {2, 2, 2, 3, 4};
                break;
        }
        return levels;
    }
};

namespace detail {

inline void expect_keys(const json& obj, const std::set<std::string>& known, const std::string& where,
                        std::vector<std::string>& errors) {
    for (const auto& [key, _] : obj.items())
        if (!known.count(key)) errors.push_back(where + ": unknown key '" + key + "'");
}

template <typename T>
void read_field(const json& obj, const char* key, T& out, std::vector<std::string>& errors, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        errors.push_back(where + ": field '" + std::string(key) + "' has the wrong type");
    }
}

}  // namespace detail

inline ExperimentConfig parse_config_json(const json& root) {
    std::vector<std::string> errors;
    ExperimentConfig cfg;

    detail::expect_keys(root,
                        {"benchmark", "estimators", "tolerances", "replicates", "seed", "reference_probability",
                         "output_dir", "workers", "estimator_params", "model"},
                        "config", errors);

    if (!root.contains("benchmark")) {
        errors.push_back("config: missing required key 'benchmark'");
    } else {
        std::string b = root.at("benchmark").is_string() ? root.at("benchmark").get<std::string>() : "";
        if (b == "toy") cfg.benchmark = Benchmark::Toy;
        else if (b == "brownian") cfg.benchmark = Benchmark::Brownian;
        else if (b == "darcy") cfg.benchmark = Benchmark::Darcy;
        else errors.push_back("config: benchmark must be one of toy|brownian|darcy");
    }

    if (root.contains("estimators")) {
        if (!root.at("estimators").is_array() || root.at("estimators").empty()) {
            errors.push_back("config: estimators must be a non-empty array");
        } else {
            for (const auto& e : root.at("estimators")) {
                std::string s = e.is_string() ? e.get<std::string>() : "";
                if (s == "mc") cfg.estimators.push_back(EstimatorKind::Mc);
                else if (s == "sus") cfg.estimators.push_back(EstimatorKind::Sus);
                else if (s == "sus-sr") cfg.estimators.push_back(EstimatorKind::SusSr);
                else if (s == "ml-sus-sr") cfg.estimators.push_back(EstimatorKind::MlSusSr);
                else errors.push_back("config: unknown estimator '" + s + "'");
            }
        }
    } else {
        errors.push_back("config: missing required key 'estimators'");
    }

    detail::read_field(root, "tolerances", cfg.tolerances, errors, "config");
    if (cfg.tolerances.empty()) errors.push_back("config: tolerances must be a non-empty array of positive reals");
    for (double t : cfg.tolerances)
        if (!(t > 0.0)) errors.push_back("config: tolerances must be strictly positive");

    detail::read_field(root, "replicates", cfg.replicates, errors, "config");
    if (cfg.replicates < 1) errors.push_back("config: replicates must be >= 1");
    detail::read_field(root, "seed", cfg.seed, errors, "config");
    if (root.contains("reference_probability")) {
        double p = 0.0;
        detail::read_field(root, "reference_probability", p, errors, "config");
        if (!(p > 0.0 && p < 1.0)) errors.push_back("config: reference_probability must lie in (0,1)");
        cfg.reference_probability = p;
    }
    detail::read_field(root, "output_dir", cfg.output_dir, errors, "config");
    detail::read_field(root, "workers", cfg.workers, errors, "config");

    if (root.contains("estimator_params")) {
        const json& ep = root.at("estimator_params");
        detail::expect_keys(ep,
                            {"p0", "eta", "s", "n_min", "n_max", "n_chains", "check_subset_property", "mc_projected",
                             "p1_estimate", "sus_thresholds", "ml_levels"},
                            "estimator_params", errors);
        detail::read_field(ep, "p0", cfg.p0, errors, "estimator_params");
        detail::read_field(ep, "eta", cfg.eta, errors, "estimator_params");
        detail::read_field(ep, "s", cfg.s, errors, "estimator_params");
        detail::read_field(ep, "n_min", cfg.n_min, errors, "estimator_params");
        detail::read_field(ep, "n_max", cfg.n_max, errors, "estimator_params");
        detail::read_field(ep, "n_chains", cfg.n_chains, errors, "estimator_params");
        detail::read_field(ep, "check_subset_property", cfg.check_subset_property, errors, "estimator_params");
        detail::read_field(ep, "mc_projected", cfg.mc_projected, errors, "estimator_params");
        if (ep.contains("p1_estimate")) {
            double p = 0.0;
            detail::read_field(ep, "p1_estimate", p, errors, "estimator_params");
            cfg.p1_estimate = p;
        }
        detail::read_field(ep, "sus_thresholds", cfg.sus_thresholds, errors, "estimator_params");
        detail::read_field(ep, "ml_levels", cfg.ml_levels, errors, "estimator_params");
        if (!(cfg.p0 > 0.0 && cfg.p0 < 1.0)) errors.push_back("estimator_params: p0 must lie in (0,1)");
        if (!(cfg.eta >= 0.0 && cfg.eta <= 1.0)) errors.push_back("estimator_params: eta must lie in [0,1]");
        if (cfg.s != 1 && cfg.s != 2) errors.push_back("estimator_params: s must be 1 or 2");
    }

    if (root.contains("model")) {
        const json& m = root.at("model");
        switch (cfg.benchmark) {
            case Benchmark::Toy:
                detail::expect_keys(m, {"gamma", "q", "barrier", "dim", "kappa_per_level"}, "model", errors);
                detail::read_field(m, "gamma", cfg.toy.gamma, errors, "model");
                detail::read_field(m, "q", cfg.toy.q, errors, "model");
                detail::read_field(m, "barrier", cfg.toy.barrier, errors, "model");
                detail::read_field(m, "dim", cfg.toy.dim, errors, "model");
                detail::read_field(m, "kappa_per_level", cfg.toy.kappa_per_level, errors, "model");
                break;
            case Benchmark::Brownian:
                detail::expect_keys(m, {"kl_terms", "barrier", "gamma", "q"}, "model", errors);
                detail::read_field(m, "kl_terms", cfg.brownian.kl_terms, errors, "model");
                detail::read_field(m, "barrier", cfg.brownian.barrier, errors, "model");
                detail::read_field(m, "gamma", cfg.brownian.gamma, errors, "model");
                detail::read_field(m, "q", cfg.brownian.q, errors, "model");
                break;
            default:
                detail::expect_keys(m,
                                    {"tau", "alpha", "kl_max_index", "gamma", "q", "max_level", "y_crit", "box_x0",
                                     "box_x1", "box_y0", "box_y1", "level_costs", "est_const"},
                                    "model", errors);
                detail::read_field(m, "tau", cfg.darcy.tau, errors, "model");
                detail::read_field(m, "alpha", cfg.darcy.alpha, errors, "model");
                detail::read_field(m, "kl_max_index", cfg.darcy.kl_max_index, errors, "model");
                detail::read_field(m, "gamma", cfg.darcy.gamma, errors, "model");
                detail::read_field(m, "q", cfg.darcy.q, errors, "model");
                detail::read_field(m, "max_level", cfg.darcy.max_level, errors, "model");
                detail::read_field(m, "y_crit", cfg.darcy.y_crit, errors, "model");
                detail::read_field(m, "box_x0", cfg.darcy.box_x0, errors, "model");
                detail::read_field(m, "box_x1", cfg.darcy.box_x1, errors, "model");
                detail::read_field(m, "box_y0", cfg.darcy.box_y0, errors, "model");
                detail::read_field(m, "box_y1", cfg.darcy.box_y1, errors, "model");
                detail::read_field(m, "level_costs", cfg.darcy.level_costs, errors, "model");
                detail::read_field(m, "est_const", cfg.darcy.est_const, errors, "model");
                break;
        }
    }

    for (EstimatorKind e : cfg.estimators) {
        if (e == EstimatorKind::Mc && cfg.mc_projected && !cfg.reference_probability)
            errors.push_back("config: projected mc needs reference_probability");
    }

    if (!errors.empty()) throw ConfigError(std::move(errors));
    return cfg;
}

inline ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot open config file '" + path + "'"});
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw ConfigError({std::string("JSON parse error: ") + e.what()});
    }
    return parse_config_json(root);
}

// one CSV row; the schema is a stable contract
struct RawRow {
    long replicate;
    std::string estimator;
    std::string benchmark;
    double tol;
    double p_hat;
    double cov_hat;
    double total_cost;
    std::uint64_t seed;
};

struct ReplicateDetail {
    EstimateReport report;
    double wall_seconds = 0.0;
    bool projected = false;
};

struct GroupSummary {
    std::string estimator;
    double tol = 0.0;
    long replicates = 0;
    double mean_p = 0.0;
    double std_p = 0.0;
    double empirical_delta = std::numeric_limits<double>::quiet_NaN();  // rel. RMSE vs reference
    double spread_delta = std::numeric_limits<double>::quiet_NaN();     // replicate sample c.o.v.
    double mean_cov_hat = 0.0;
    double mean_cost = 0.0;
    double mean_wall_seconds = 0.0;
    bool projected = false;
    long aborted = 0;
    long subset_violations = 0;
    std::map<int, double> mean_level_counts;
    std::map<int, double> mean_level_cost;
    std::vector<double> mean_subset_p;
    std::vector<double> mean_acceptance;
};

struct RunResult {
    std::vector<RawRow> rows;
    std::vector<GroupSummary> groups;
    std::vector<std::string> abort_messages;
};

namespace detail {

struct ModelSet {
    std::unique_ptr<LimitStateModel> model;
    int finest = 1;
};

inline ModelSet build_model(const ExperimentConfig& cfg, double tol) {
    ModelSet out;
    out.finest = cfg.finest_level(tol);
    switch (cfg.benchmark) {
        case Benchmark::Toy: {
            ToyModelConfig mc = cfg.toy;
            mc.max_level = out.finest;
            mc.seed = 0x746F79;  // model-internal randomness stream, fixed across replicates
            out.model = std::make_unique<ToyModel>(mc);
            break;
        }
        case Benchmark::Brownian: {
            BrownianModelConfig mc = cfg.brownian;
            mc.max_level = out.finest;
            out.model = std::make_unique<BrownianModel>(mc);
            break;
        }
        default: {
            out.model = std::make_unique<DarcyModel>(cfg.darcy);
            out.finest = cfg.darcy.max_level;
            break;
        }
    }
    return out;
}

inline EstimatorConfig estimator_config(const ExperimentConfig& cfg, double tol, std::uint64_t replicate_seed) {
    EstimatorConfig ec;
    ec.tol = tol;
    ec.p0 = cfg.p0;
    ec.eta = cfg.eta;
    ec.s = cfg.s;
    ec.n_min = cfg.n_min;
    ec.n_max = cfg.n_max;
    ec.n_chains = cfg.n_chains;
    ec.seed = replicate_seed;
    ec.check_subset_property = cfg.check_subset_property;
    ec.p1_estimate = cfg.p1_estimate;
    return ec;
}

inline int expected_subsets(const ExperimentConfig& cfg) {
    if (!cfg.reference_probability) return 5;
    return std::max(1, static_cast<int>(std::ceil(std::log(*cfg.reference_probability) / std::log(cfg.p0))));
}

inline ReplicateDetail run_one(const ExperimentConfig& cfg, const LimitStateModel& model, int finest,
                               EstimatorKind kind, double tol, std::uint64_t replicate_seed) {
    ReplicateDetail out;
    EstimatorConfig ec = estimator_config(cfg, tol, replicate_seed);
    const auto t0 = std::chrono::steady_clock::now();

    switch (kind) {
        case EstimatorKind::Mc: {
            if (cfg.mc_projected) {
                // N = TOL^-2 / P with every sample at the finest level
                const double p = *cfg.reference_probability;
                const double n = 1.0 / (tol * tol * p);
                out.projected = true;
                out.report.p_hat = p;
                out.report.cov_hat = tol;
                out.report.seed = replicate_seed;
                out.report.ledger.charge(finest, n * model.level_cost(finest), static_cast<std::int64_t>(n));
                out.report.per_subset.push_back(
                    SubsetReport{0.0, finest, p, static_cast<long>(n), std::numeric_limits<double>::quiet_NaN(), 0.0,
                                 tol, false});
            } else {
                double p_guess = cfg.reference_probability.value_or(0.01);
                long n = static_cast<long>(std::ceil(1.0 / (tol * tol * p_guess)));
                out.report = standard_mc(model, finest, std::min(n, cfg.n_max), ec);
            }
            break;
        }
        case EstimatorKind::Sus:
        case EstimatorKind::SusSr: {
            ec.selective = (kind == EstimatorKind::SusSr);
            if (!cfg.sus_thresholds.empty()) {
                auto sched = classical_fixed_schedule(model.schedule(), cfg.sus_thresholds, finest);
                out.report = run_sus(model, ec, sched);
            } else {
                // no fixed thresholds configured: adaptive p0 at the finest
                // level; selective refinement needs thresholds known a
                // priori, so both variants run plain here
                out.report = run_sus_adaptive(model, ec, finest, expected_subsets(cfg));
            }
            break;
        }
        case EstimatorKind::MlSusSr: {
            ec.selective = true;
            auto sched = threshold_schedule_lemma(model.schedule(), cfg.multilevel_levels(tol));
            out.report = run_ml_sus(model, ec, sched);
            break;
        }
    }
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace detail

// Executes the estimator x tolerance x replicate matrix with deterministic
// per-replicate seeds fold(seed, replicate). Replicates run concurrently;
// rows are gathered and sorted by (estimator, tolerance, replicate).
inline RunResult run_experiment(const ExperimentConfig& cfg) {
    struct Task {
        EstimatorKind kind;
        double tol;
        long replicate;
    };
    std::vector<Task> tasks;
    for (EstimatorKind e : cfg.estimators)
        for (double tol : cfg.tolerances)
            for (long r = 0; r < cfg.replicates; ++r) tasks.push_back({e, tol, r});

    struct Slot {
        bool ok = false;
        ReplicateDetail detail;
        std::string abort_message;
    };
    std::vector<Slot> slots(tasks.size());

    // models are immutable and shared across threads; one per tolerance
    std::map<double, detail::ModelSet> models;
    for (double tol : cfg.tolerances) models.emplace(tol, detail::build_model(cfg, tol));

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers =
        cfg.workers > 0 ? static_cast<unsigned>(cfg.workers) : std::min<unsigned>(hw, static_cast<unsigned>(tasks.size()));

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const Task& t = tasks[i];
            const auto& ms = models.at(t.tol);
            const std::uint64_t rseed = rng::fold(cfg.seed, static_cast<std::uint64_t>(t.replicate));
            try {
                slots[i].detail = detail::run_one(cfg, *ms.model, ms.finest, t.kind, t.tol, rseed);
                slots[i].ok = true;
            } catch (const std::exception& e) {
                slots[i].abort_message = to_string(t.kind) + " tol " + std::to_string(t.tol) + " replicate " +
                                         std::to_string(t.replicate) + ": " + e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    RunResult result;
    std::map<std::pair<std::string, double>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const Task& t = tasks[i];
        if (!slots[i].ok) {
            result.abort_messages.push_back(slots[i].abort_message);
            continue;
        }
        const auto& d = slots[i].detail;
        result.rows.push_back(RawRow{t.replicate, to_string(t.kind), to_string(cfg.benchmark), t.tol,
                                     d.report.p_hat, d.report.cov_hat, d.report.ledger.total_cost,
                                     rng::fold(cfg.seed, static_cast<std::uint64_t>(t.replicate))});
        groups[{to_string(t.kind), t.tol}].push_back(i);
    }

    std::sort(result.rows.begin(), result.rows.end(), [](const RawRow& a, const RawRow& b) {
        return std::tie(a.estimator, a.tol, a.replicate) < std::tie(b.estimator, b.tol, b.replicate);
    });

    for (const auto& [key, indices] : groups) {
        GroupSummary g;
        g.estimator = key.first;
        g.tol = key.second;
        g.replicates = static_cast<long>(indices.size());
        double sum = 0.0, sum2 = 0.0, rmse2 = 0.0;
        std::size_t max_subsets = 0;
        for (std::size_t i : indices) {
            const auto& d = slots[i].detail;
            sum += d.report.p_hat;
            sum2 += d.report.p_hat * d.report.p_hat;
            g.mean_cov_hat += d.report.cov_hat / static_cast<double>(indices.size());
            g.mean_cost += d.report.ledger.total_cost / static_cast<double>(indices.size());
            g.mean_wall_seconds += d.wall_seconds / static_cast<double>(indices.size());
            g.projected = g.projected || d.projected;
            g.subset_violations += d.report.subset_violations;
            for (const auto& [lvl, c] : d.report.ledger.per_level_counts)
                g.mean_level_counts[lvl] += static_cast<double>(c) / static_cast<double>(indices.size());
            for (const auto& [lvl, c] : d.report.ledger.per_level_cost)
                g.mean_level_cost[lvl] += c / static_cast<double>(indices.size());
            max_subsets = std::max(max_subsets, d.report.per_subset.size());
            if (cfg.reference_probability) {
                const double rel = (d.report.p_hat - *cfg.reference_probability) / *cfg.reference_probability;
                rmse2 += rel * rel;
            }
        }
        const double n = static_cast<double>(indices.size());
        g.mean_p = sum / n;
        g.std_p = n > 1 ? std::sqrt(std::max(0.0, (sum2 - n * g.mean_p * g.mean_p) / (n - 1.0))) : 0.0;
        if (g.mean_p > 0.0) g.spread_delta = g.std_p / g.mean_p;
        if (cfg.reference_probability) g.empirical_delta = std::sqrt(rmse2 / n);
        g.mean_subset_p.assign(max_subsets, 0.0);
        g.mean_acceptance.assign(max_subsets, 0.0);
        std::vector<long> alpha_counts(max_subsets, 0), p_counts(max_subsets, 0);
        for (std::size_t i : indices) {
            const auto& subs = slots[i].detail.report.per_subset;
            for (std::size_t j = 0; j < subs.size(); ++j) {
                g.mean_subset_p[j] += subs[j].p_hat;
                ++p_counts[j];
                if (!std::isnan(subs[j].acceptance)) {
                    g.mean_acceptance[j] += subs[j].acceptance;
                    ++alpha_counts[j];
                }
            }
        }
        for (std::size_t j = 0; j < max_subsets; ++j) {
            g.mean_subset_p[j] = p_counts[j] ? g.mean_subset_p[j] / static_cast<double>(p_counts[j]) : 0.0;
            g.mean_acceptance[j] =
                alpha_counts[j] ? g.mean_acceptance[j] / static_cast<double>(alpha_counts[j])
                                : std::numeric_limits<double>::quiet_NaN();
        }
        const long expected = cfg.replicates;
        g.aborted = expected - g.replicates;
        result.groups.push_back(std::move(g));
    }
    return result;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline constexpr const char* kCsvHeader = "replicate,estimator,benchmark,tol,p_hat,cov_hat,total_cost,seed";

inline std::string rows_to_csv(const std::vector<RawRow>& rows) {
    std::string out = kCsvHeader;
    out += '\n';
    for (const auto& r : rows) {
        out += std::to_string(r.replicate);
        out += ',';
        out += r.estimator;
        out += ',';
        out += r.benchmark;
        out += ',';
        out += format_double(r.tol);
        out += ',';
        out += format_double(r.p_hat);
        out += ',';
        out += format_double(r.cov_hat);
        out += ',';
        out += format_double(r.total_cost);
        out += ',';
        out += std::to_string(r.seed);
        out += '\n';
    }
    return out;
}

inline json summary_to_json(const ExperimentConfig& cfg, const RunResult& result) {
    json groups = json::array();
    for (const auto& g : result.groups) {
        json jg{{"estimator", g.estimator},
                {"tol", g.tol},
                {"replicates", g.replicates},
                {"aborted", g.aborted},
                {"mean_p_hat", g.mean_p},
                {"std_p_hat", g.std_p},
                {"mean_cov_hat", g.mean_cov_hat},
                {"mean_total_cost", g.mean_cost},
                {"mean_wall_seconds", g.mean_wall_seconds},
                {"projected", g.projected},
                {"subset_violations", g.subset_violations}};
        if (!std::isnan(g.empirical_delta)) jg["empirical_delta"] = g.empirical_delta;
        if (!std::isnan(g.spread_delta)) jg["spread_delta"] = g.spread_delta;
        json lvl = json::object();
        for (const auto& [l, c] : g.mean_level_counts) lvl[std::to_string(l)] = c;
        jg["mean_level_counts"] = lvl;
        json lvc = json::object();
        for (const auto& [l, c] : g.mean_level_cost) lvc[std::to_string(l)] = c;
        jg["mean_level_cost"] = lvc;
        jg["mean_subset_p"] = g.mean_subset_p;
        json acc = json::array();
        for (double a : g.mean_acceptance) {
            if (std::isnan(a)) acc.push_back(nullptr);
            else acc.push_back(a);
        }
        jg["mean_acceptance"] = acc;
        groups.push_back(std::move(jg));
    }
    json out{{"benchmark", to_string(cfg.benchmark)},
             {"seed", cfg.seed},
             {"replicates", cfg.replicates},
             {"groups", groups}};
    if (cfg.reference_probability) out["reference_probability"] = *cfg.reference_probability;
    if (!result.abort_messages.empty()) out["aborts"] = result.abort_messages;
    return out;
}

// Writes raw.csv and summary.json under `dir`.
inline void emit_results(const ExperimentConfig& cfg, const RunResult& result, const std::string& dir) {
    if (result.rows.empty() && result.abort_messages.empty())
        throw std::runtime_error("emit_results: nothing to write");
    std::filesystem::create_directories(dir);
    {
        std::ofstream csv(dir + "/raw.csv", std::ios::binary);
        if (!csv) throw std::runtime_error("emit_results: cannot write " + dir + "/raw.csv");
        csv << rows_to_csv(result.rows);
    }
    {
        std::ofstream js(dir + "/summary.json", std::ios::binary);
        if (!js) throw std::runtime_error("emit_results: cannot write " + dir + "/summary.json");
        js << summary_to_json(cfg, result).dump(2) << '\n';
    }
}

}  // namespace subsetsim
