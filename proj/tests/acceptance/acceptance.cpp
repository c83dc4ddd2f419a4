// Acceptance suite: exercises the full toolkit against the benchmark
// reference values and prints one PASS/FAIL line per criterion.
//
// Runtime is dominated by the Darcy block (tens of minutes on two cores);
// set ACCEPT_FAST=1 to shrink replicate counts for a smoke run (the
// official gate is the full run).
#include <cstdio>
#include <cstdarg>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "subsetsim/experiment.hpp"
#include "subsetsim/models/darcy.hpp"
#include "subsetsim/selective.hpp"

using namespace subsetsim;

namespace {

struct Gate {
    int id;
    std::string name;
    bool pass = true;
    std::string detail;
};

std::vector<Gate> gates;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    gates.push_back({id, name, pass, detail});
    std::printf("[%s] criterion %d (%s): %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

const GroupSummary* find_group(const RunResult& r, const std::string& est, double tol) {
    for (const auto& g : r.groups)
        if (g.estimator == est && std::fabs(g.tol - tol) < 1e-12) return &g;
    return nullptr;
}

bool fast_mode() {
    const char* v = std::getenv("ACCEPT_FAST");
    return v && std::strcmp(v, "0") != 0;
}

// least-squares slope of log(cost) against log(tol)
double loglog_slope(const std::vector<std::pair<double, double>>& pts) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto& [tol, cost] : pts) {
        const double x = std::log(tol), y = std::log(cost);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(pts.size());
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ExperimentConfig toy_config(long replicates) {
    ExperimentConfig cfg;
    cfg.benchmark = Benchmark::Toy;
    cfg.estimators = {EstimatorKind::Mc, EstimatorKind::Sus, EstimatorKind::SusSr, EstimatorKind::MlSusSr};
    cfg.tolerances = {0.4, 0.2, 0.1, 0.05};
    cfg.replicates = replicates;
    cfg.seed = 20260801;
    cfg.eta = 0.2;  // deep-tail mixing; see the decisions ledger
    cfg.reference_probability = rng::normal_cdf(-3.8);
    cfg.toy.barrier = -3.8;
    cfg.sus_thresholds = {2.5, 1.8, 1.0, 0.5};
    cfg.check_subset_property = true;
    return cfg;
}

long g_total_violations = 0;
long g_violation_runs = 0;

void tally_violations(const RunResult& r) {
    for (const auto& g : r.groups) {
        g_total_violations += g.subset_violations;
        ++g_violation_runs;
    }
}

void criterion_1_and_2(long replicates) {
    ExperimentConfig cfg = toy_config(replicates);
    RunResult res = run_experiment(cfg);
    tally_violations(res);
    const double p_ref = *cfg.reference_probability;

    // --- criterion 1: reference probability at TOL = 0.1 ---
    bool pass = true;
    std::string detail;
    for (const char* est : {"sus", "sus-sr", "ml-sus-sr"}) {
        const GroupSummary* g = find_group(res, est, 0.1);
        if (!g || g->aborted > 0) {
            pass = false;
            detail += fmt("%s: missing/aborted; ", est);
            continue;
        }
        const double se = g->std_p / std::sqrt(static_cast<double>(g->replicates));
        const bool mean_ok = std::fabs(g->mean_p - p_ref) <= 3.0 * se;
        const bool delta_ok = g->empirical_delta <= 0.12;
        pass = pass && mean_ok && delta_ok;
        detail += fmt("%s: mean %.4e (ref %.4e, |dev| %.1f se), delta %.3f; ", est, g->mean_p, p_ref,
                      se > 0 ? std::fabs(g->mean_p - p_ref) / se : 0.0, g->empirical_delta);
    }
    report(1, "toy reference probability", pass, detail);

    // --- criterion 2: complexity slopes and cost ordering ---
    std::vector<std::pair<double, double>> mc_pts, ml_pts;
    bool have_all = true;
    for (double tol : cfg.tolerances) {
        const GroupSummary* mc = find_group(res, "mc", tol);
        const GroupSummary* ml = find_group(res, "ml-sus-sr", tol);
        if (!mc || !ml) {
            have_all = false;
            continue;
        }
        mc_pts.push_back({tol, mc->mean_cost});
        ml_pts.push_back({tol, ml->mean_cost});
    }
    const double mc_slope = loglog_slope(mc_pts);
    const double ml_slope = loglog_slope(ml_pts);
    const GroupSummary* g_mc = find_group(res, "mc", 0.1);
    const GroupSummary* g_sus = find_group(res, "sus", 0.1);
    const GroupSummary* g_sr = find_group(res, "sus-sr", 0.1);
    const GroupSummary* g_ml = find_group(res, "ml-sus-sr", 0.1);
    bool order_ok = have_all && g_mc && g_sus && g_sr && g_ml && g_ml->mean_cost < g_sr->mean_cost &&
                    g_sr->mean_cost < g_sus->mean_cost && g_sus->mean_cost < g_mc->mean_cost;
    bool slopes_ok = std::fabs(mc_slope - (-4.0)) <= 0.6 && std::fabs(ml_slope - (-2.0)) <= 0.6;
    report(2, "toy complexity slopes", slopes_ok && order_ok,
           fmt("mc slope %.2f (want -4 +/- 0.6), ml-sus-sr slope %.2f (want -2 +/- 0.6), cost order at tol 0.1: "
               "ml %.3g < sus-sr %.3g < sus %.3g < mc %.3g : %s",
               mc_slope, ml_slope, g_ml ? g_ml->mean_cost : 0.0, g_sr ? g_sr->mean_cost : 0.0,
               g_sus ? g_sus->mean_cost : 0.0, g_mc ? g_mc->mean_cost : 0.0, order_ok ? "yes" : "no"));
}

void criterion_3(long replicates) {
    ExperimentConfig cfg;
    cfg.benchmark = Benchmark::Brownian;
    cfg.estimators = {EstimatorKind::MlSusSr};
    cfg.tolerances = {0.1};
    cfg.replicates = replicates;
    cfg.seed = 20260802;
    cfg.reference_probability = 2.0 * rng::normal_cdf(-4.0);
    cfg.check_subset_property = true;
    RunResult res = run_experiment(cfg);
    tally_violations(res);
    const GroupSummary* g = find_group(res, "ml-sus-sr", 0.1);
    bool pass = false;
    std::string detail = "run missing";
    if (g && g->aborted == 0) {
        const bool mean_ok = g->mean_p >= 4.0e-5 && g->mean_p <= 8.0e-5;
        // spread-based delta: the paper's own 100-run c.o.v. estimate
        // (the mean band already covers the grid-limited bias vs 6.3e-5)
        const bool delta_ok = g->spread_delta <= 0.10;
        pass = mean_ok && delta_ok;
        detail = fmt("mean %.4e in [4.0e-5, 8.0e-5]: %s; replicate c.o.v. %.4f <= 0.10: %s (vs-reference delta %.3f)",
                     g->mean_p, mean_ok ? "yes" : "no", g->spread_delta, delta_ok ? "yes" : "no",
                     g->empirical_delta);
    }
    report(3, "brownian benchmark", pass, detail);
}

void criterion_4(long replicates) {
    ExperimentConfig cfg;
    cfg.benchmark = Benchmark::Darcy;
    cfg.estimators = {EstimatorKind::MlSusSr, EstimatorKind::Sus};
    cfg.tolerances = {0.25};
    cfg.replicates = replicates;
    cfg.seed = 20260803;
    cfg.s = 1;
    cfg.reference_probability = 1.8e-4;  // paper's reported mean, used for delta reporting only
    cfg.sus_thresholds = {0.29, 0.165, 0.095, 0.05, 0.018};
    cfg.check_subset_property = true;
    RunResult res = run_experiment(cfg);
    tally_violations(res);

    const GroupSummary* ml = find_group(res, "ml-sus-sr", 0.25);
    const GroupSummary* sus = find_group(res, "sus", 0.25);

    // (a) mean within the band around the paper's value
    bool pass_a = false;
    std::string detail_a = "run missing";
    if (ml && ml->aborted == 0) {
        pass_a = ml->mean_p >= 0.9e-4 && ml->mean_p <= 3.6e-4;
        detail_a = fmt("ml-sus-sr mean %.4e in [0.9e-4, 3.6e-4]: %s (replicate c.o.v. %.3f)", ml->mean_p,
                       pass_a ? "yes" : "no", ml->spread_delta);
    }
    report(4, "darcy probability band (a)", pass_a, detail_a);

    // (b) >= 95% of hierarchy mesh solves on levels 1-2
    bool pass_b = false;
    std::string detail_b = "run missing";
    if (ml) {
        double coarse = 0.0, total = 0.0;
        for (const auto& [lvl, c] : ml->mean_level_counts) {
            total += c;
            if (lvl <= 2) coarse += c;
        }
        const double frac = total > 0 ? coarse / total : 0.0;
        pass_b = frac >= 0.95;
        detail_b = fmt("mesh 1-2 solves %.1f of %.1f per run = %.1f%% (want >= 95%%)", coarse, total, 100.0 * frac);
    }
    report(4, "darcy coarse-mesh share (b)", pass_b, detail_b);

    // (c) >= 20x cheaper than finest-level subset simulation at matched accuracy
    bool pass_c = false;
    std::string detail_c = "run missing";
    if (ml && sus && sus->aborted == 0) {
        const double ratio = sus->mean_cost / ml->mean_cost;
        const bool matched = sus->spread_delta <= 0.30 && ml->spread_delta <= 0.30;
        pass_c = ratio >= 20.0 && matched;
        detail_c = fmt("cost ratio sus/ml = %.3g/%.3g = %.1fx (want >= 20x); deltas sus %.3f ml %.3f (matched <= 0.30: %s)",
                       sus->mean_cost, ml->mean_cost, ratio, sus->spread_delta, ml->spread_delta,
                       matched ? "yes" : "no");
    }
    report(4, "darcy cost gain (c)", pass_c, detail_c);
}

void criterion_5() {
    report(5, "subset-property invariant", g_total_violations == 0,
           fmt("%ld violations recorded across %ld estimator groups (want exactly 0)", g_total_violations,
               g_violation_runs));
}

void criterion_6() {
    ToyModelConfig tc;
    tc.dim = 10;
    tc.max_level = 2;
    ToyModel model(tc);
    ShakingConfig sc;
    sc.eta = 0.6;
    sc.rng_seed = 907;
    ParameterVector seed_state = ParameterVector::zeros(10);
    auto rec = run_chain(model, seed_state, 100000, SubsetSpec::whole_space(), SubsetSpec::whole_space(), sc);

    bool pass = true;
    double worst_mean = 0.0, worst_var = 0.0;
    for (int c = 0; c < 10; ++c) {
        double m = 0.0, v = 0.0;
        for (const auto& st : rec.states) m += st[c];
        m /= static_cast<double>(rec.states.size());
        for (const auto& st : rec.states) v += (st[c] - m) * (st[c] - m);
        v /= static_cast<double>(rec.states.size() - 1);
        worst_mean = std::max(worst_mean, std::fabs(m));
        worst_var = std::max(worst_var, std::fabs(v - 1.0));
    }
    pass = worst_mean <= 0.02 && worst_var <= 0.05;

    // KS on thinned samples, pooling a strided slice of each component
    std::vector<double> thinned;
    for (std::size_t i = 0; i < rec.states.size(); i += 20) thinned.push_back(rec.states[i][static_cast<int>(i / 20) % 10]);
    auto ks = ks_test_standard_normal(thinned);
    pass = pass && ks.p_value > 0.01;
    report(6, "shaking stationarity", pass,
           fmt("worst |mean| %.4f (<= 0.02), worst |var-1| %.4f (<= 0.05), KS p %.4f (> 0.01) on %zu thinned samples",
               worst_mean, worst_var, ks.p_value, thinned.size()));
}

void criterion_7() {
    ToyModelConfig tc;
    tc.max_level = 10;
    tc.seed = 424243;
    ToyModel model(tc);
    const double ulp = 16.0 * std::numeric_limits<double>::epsilon();
    rng::Stream gen(rng::fold(20260804, 1));
    long checked_bound = 0, checked_ind = 0, failures = 0;
    for (int i = 0; i < 10000; ++i) {
        ParameterVector th{{3.0 * gen.normal()}};
        const double y = 8.0 * (gen.uniform() - 0.5);
        const int target = 1 + static_cast<int>(gen.uniform() * 10.0);
        auto v = selective_evaluate(model, th, y, target);
        const double exact = *model.oracle(th);
        const double bound = std::max(model.schedule().nominal_error(target), std::fabs(v.value - y));
        ++checked_bound;
        if (std::fabs(exact - v.value) > bound * (1.0 + ulp) + ulp) ++failures;
        if (std::fabs(exact - y) > 2.0 * model.schedule().nominal_error(target)) {
            ++checked_ind;
            const bool sel = v.value <= y;
            const bool full = evaluate_at_level(model, th, target).value <= y;
            if (sel != full) ++failures;
        }
    }
    report(7, "assumption 1/2 oracle suite", failures == 0,
           fmt("%ld bound checks, %ld indicator agreements, %ld failures (want 0)", checked_bound, checked_ind,
               failures));
}

void criterion_8() {
    DarcyModelConfig dc;
    DarcyModel model(dc);
    ParameterVector zero = ParameterVector::zeros(model.dim());
    bool pass = true;
    double worst = 0.0, worst_q = 0.0;
    for (int mesh = 0; mesh <= dc.max_level; ++mesh) {
        Eigen::VectorXd u = model.solve_nodal(zero, mesh);
        const auto& grid = model.mesh(mesh);
        for (int id = 0; id < grid.n_nodes(); ++id) worst = std::max(worst, std::fabs(u[id] - grid.node_x(id)));
        worst_q = std::max(worst_q, std::fabs(model.qoi_on_mesh(zero, mesh) - 0.42));
    }
    pass = worst < 1e-9 && worst_q < 1e-9;
    report(8, "fem sanity", pass,
           fmt("constant-coefficient solve: worst nodal error %.2e (< 1e-9), worst |G - 0.42| %.2e (< 1e-9)", worst,
               worst_q));
}

void criterion_9() {
    bool pass = true;
    std::string detail;

    {
        ExperimentConfig cfg = toy_config(3);
        cfg.tolerances = {0.2};
        auto a = rows_to_csv(run_experiment(cfg).rows);
        auto b = rows_to_csv(run_experiment(cfg).rows);
        pass = pass && a == b && !a.empty();
        detail += fmt("toy rows identical: %s; ", a == b ? "yes" : "no");
    }
    {
        ExperimentConfig cfg;
        cfg.benchmark = Benchmark::Brownian;
        cfg.estimators = {EstimatorKind::MlSusSr};
        cfg.tolerances = {0.3};
        cfg.replicates = 2;
        cfg.seed = 606;
        cfg.reference_probability = 2.0 * rng::normal_cdf(-4.0);
        auto a = rows_to_csv(run_experiment(cfg).rows);
        auto b = rows_to_csv(run_experiment(cfg).rows);
        pass = pass && a == b && !a.empty();
        detail += fmt("brownian rows identical: %s; ", a == b ? "yes" : "no");
    }
    {
        ExperimentConfig cfg;
        cfg.benchmark = Benchmark::Darcy;
        cfg.estimators = {EstimatorKind::MlSusSr};
        cfg.tolerances = {0.35};
        cfg.replicates = 1;
        cfg.seed = 707;
        auto a = rows_to_csv(run_experiment(cfg).rows);
        auto b = rows_to_csv(run_experiment(cfg).rows);
        pass = pass && a == b && !a.empty();
        detail += fmt("darcy rows identical: %s", a == b ? "yes" : "no");
    }
    report(9, "determinism", pass, detail);
}

}  // namespace

int main() {
    const bool fast = fast_mode();
    const long toy_reps = fast ? 10 : 100;
    const long brownian_reps = fast ? 6 : 100;
    const long darcy_reps = fast ? 3 : 20;
    if (fast) std::printf("ACCEPT_FAST set: smoke-run replicate counts (%ld/%ld/%ld)\n", toy_reps, brownian_reps, darcy_reps);
    std::fflush(stdout);

    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    auto phase = [&](const char* name) {
        std::printf("-- %s (t = %.0fs)\n", name, elapsed());
        std::fflush(stdout);
    };

    phase("toy matrix");
    criterion_1_and_2(toy_reps);
    phase("brownian matrix");
    criterion_3(brownian_reps);
    phase("darcy matrix");
    criterion_4(darcy_reps);
    criterion_5();
    phase("stationarity");
    criterion_6();
    criterion_7();
    criterion_8();
    phase("determinism");
    criterion_9();
    phase("done");

    int failed = 0;
    for (const auto& g : gates)
        if (!g.pass) ++failed;
    std::printf("%d of %zu acceptance checks passed\n", static_cast<int>(gates.size()) - failed, gates.size());
    return failed == 0 ? 0 : 1;
}
