#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "subsetsim/diagnostics.hpp"
#include "subsetsim/schedule.hpp"
#include "subsetsim/shaking.hpp"

namespace subsetsim {

struct EstimatorConfig {
    double tol = 0.1;
    double p0 = 0.2;   // adaptive intermediate-probability target, also sets the chain count
    int s = 2;         // 1 = per-subset estimators treated as uncorrelated, 2 = fully correlated
    long n_min = 100;  // samples per subset before the first c.o.v. check
    long n_max = 4000000;
    bool selective = false;
    long n_chains = 0;  // 0 = max(1, floor(p0 * n_min))
    double eta = 0.6;
    std::uint64_t seed = 0;
    bool check_subset_property = false;
    double first_subset_sus_below = 0.05;  // ML mode: coarse SuS when Pr(F_1) is below this
    int max_adaptive_subsets = 25;
    std::optional<double> p1_estimate;  // configured estimate of Pr(F_1), pilot-run when absent

    void validate() const {
        if (!(tol > 0.0)) throw std::invalid_argument("EstimatorConfig: tol must be > 0");
        if (!(p0 > 0.0 && p0 < 1.0)) throw std::invalid_argument("EstimatorConfig: p0 outside (0,1)");
        if (s != 1 && s != 2) throw std::invalid_argument("EstimatorConfig: s must be 1 or 2");
        if (n_min < 2 || n_max < n_min) throw std::invalid_argument("EstimatorConfig: need 2 <= n_min <= n_max");
        if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("EstimatorConfig: eta outside [0,1]");
    }
    long chains() const { return n_chains > 0 ? n_chains : std::max<long>(1, static_cast<long>(p0 * static_cast<double>(n_min))); }
};

struct SubsetReport {
    double y = 0.0;
    int level = 0;
    double p_hat = 0.0;
    long n = 0;
    double acceptance = std::numeric_limits<double>::quiet_NaN();  // NaN for i.i.d. stages
    double phi = 0.0;
    double cov = 0.0;
    bool hit_sample_cap = false;
};

struct EstimateReport {
    double p_hat = 0.0;
    std::vector<SubsetReport> per_subset;
    double cov_hat = 0.0;
    bool cov_infinite = false;
    CostLedger ledger;
    CostLedger audit_ledger;   // subset-property audit work, kept out of the run cost
    long subset_violations = 0;
    long uncertified_evals = 0;
    std::uint64_t seed = 0;

    void finalize(int s_mode) {
        p_hat = 1.0;
        std::vector<double> covs;
        for (const auto& r : per_subset) {
            p_hat *= r.p_hat;
            covs.push_back(r.cov);
        }
        cov_hat = combine_cov(covs, s_mode);
    }
};

// Thrown when a subset shows zero members after the sample cap.
class SubsetAbortError : public std::runtime_error {
public:
    SubsetAbortError(int subset, const std::string& what) : std::runtime_error(what), subset_index(subset) {}
    int subset_index;
};

namespace detail {

inline std::uint64_t stage_key(std::uint64_t seed, int stage) {
    return rng::fold(rng::fold(seed, 0x53544147ull), static_cast<std::uint64_t>(stage));
}

inline ParameterVector iid_theta(int dim, std::uint64_t sample_base, long i) {
    ParameterVector th = ParameterVector::zeros(dim);
    std::uint64_t k = rng::fold(sample_base, static_cast<std::uint64_t>(i));
    for (int c = 0; c < dim; ++c) th[c] = rng::keyed_normal(rng::fold(k, static_cast<std::uint64_t>(c)));
    return th;
}

struct StageOutcome {
    SubsetReport report;
    CostLedger ledger;
    CostLedger audit_ledger;
    long violations = 0;
    std::vector<SessionPtr> inner_pool;
    SessionPtr first_inner;
};

// i.i.d. first stage: unconditional estimate of Pr(next).
inline StageOutcome run_iid_stage(const LimitStateModel& model, const SubsetSpec& next, double budget_cov2,
                                  const EstimatorConfig& cfg, std::uint64_t key, long forced_n = 0) {
    StageOutcome out;
    const std::uint64_t sample_base = rng::fold(key, 1);
    constexpr long kPoolCap = 4096;
    long n = 0, inner = 0;
    long target = forced_n > 0 ? forced_n : std::min(cfg.n_min, cfg.n_max);
    double p_hat = 0.0, cov = std::numeric_limits<double>::infinity();
    while (true) {
        for (; n < target; ++n) {
            auto s = make_session(model, iid_theta(model.dim(), sample_base, n));
            bool in = next.member(*s);
            out.ledger.merge(s->take_charges());
            if (in) {
                if (!out.first_inner) out.first_inner = s;
                if (static_cast<long>(out.inner_pool.size()) < kPoolCap) {
                    out.inner_pool.push_back(s);
                } else {
                    std::uint64_t r = rng::mix64(rng::fold(key ^ 0xF00Du, static_cast<std::uint64_t>(inner)));
                    std::uint64_t slot = r % static_cast<std::uint64_t>(inner + 1);
                    if (slot < kPoolCap) out.inner_pool[static_cast<std::size_t>(slot)] = s;
                }
                ++inner;
            }
        }
        p_hat = static_cast<double>(inner) / static_cast<double>(n);
        if (forced_n > 0) {
            cov = inner > 0 ? estimate_cov(p_hat, n, 0.0) : std::numeric_limits<double>::infinity();
            break;
        }
        if (inner == 0) {
            if (n >= cfg.n_max) break;
            target = std::min(cfg.n_max, 2 * n);
            continue;
        }
        cov = estimate_cov(p_hat, n, 0.0);
        if (cov * cov <= budget_cov2 || n >= cfg.n_max) break;
        double needed = (1.0 - p_hat) / (p_hat * budget_cov2);
        target = std::min(cfg.n_max, std::max(static_cast<long>(needed * 1.1) + 1, n + n / 2));
    }
    out.report = SubsetReport{next.y, next.level, p_hat, n, std::numeric_limits<double>::quiet_NaN(), 0.0, cov,
                              n >= cfg.n_max && cov * cov > budget_cov2};
    return out;
}

// Conditional stage: several POP chains confined to `current`, scoring
// membership in `next`; chain count follows the p0 rule and seeds come from
// the previous stage's inner samples (chain 0 continues from the first
// inner sample, the POP handoff).
inline StageOutcome run_chain_stage(const LimitStateModel& model, const SubsetSpec& current, const SubsetSpec& next,
                                    const std::optional<SubsetSpec>& audit, double budget_cov2,
                                    const EstimatorConfig& cfg, std::uint64_t key,
                                    const std::vector<SessionPtr>& seed_pool, const SessionPtr& first_seed) {
    if (!first_seed && seed_pool.empty())
        throw std::invalid_argument("run_chain_stage: no seed states available");

    long n_chains = std::min<long>(cfg.chains(), static_cast<long>(seed_pool.size()) + (first_seed ? 1 : 0));
    n_chains = std::max<long>(1, n_chains);

    // deterministic seed pick: chain 0 gets the handoff, the rest draw
    // distinct states uniformly from the pool
    std::vector<SessionPtr> seeds;
    seeds.reserve(static_cast<std::size_t>(n_chains));
    seeds.push_back(first_seed ? first_seed : seed_pool.front());
    if (n_chains > 1) {
        std::vector<std::size_t> order(seed_pool.size());
        std::iota(order.begin(), order.end(), 0u);
        rng::Stream shuffler(rng::fold(key, 3));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(shuffler.next_u64() % i);
            std::swap(order[i - 1], order[j]);
        }
        for (std::size_t idx : order) {
            if (static_cast<long>(seeds.size()) >= n_chains) break;
            const SessionPtr& cand = seed_pool[idx];
            if (std::find(seeds.begin(), seeds.end(), cand) == seeds.end()) seeds.push_back(cand);
        }
        for (std::size_t i = 0; static_cast<long>(seeds.size()) < n_chains; ++i)
            seeds.push_back(seed_pool[i % seed_pool.size()]);
    }
    n_chains = static_cast<long>(seeds.size());

    const long reservoir_cap = std::max<long>(16, 1024 / n_chains);
    std::vector<PopChain> chains;
    chains.reserve(static_cast<std::size_t>(n_chains));
    for (long c = 0; c < n_chains; ++c) {
        chains.emplace_back(seeds[static_cast<std::size_t>(c)], current, next, cfg.eta,
                            rng::fold(rng::fold(key, 2), static_cast<std::uint64_t>(c)), reservoir_cap);
        if (audit && cfg.check_subset_property) chains.back().audit_against(*audit);
    }

    long target = std::min(cfg.n_min, cfg.n_max);
    double p_hat = 0.0, phi = 0.0, cov = std::numeric_limits<double>::infinity();
    long n = 0;
    while (true) {
        const long len = (target + n_chains - 1) / n_chains;
        for (auto& ch : chains) ch.advance(len);
        n = n_chains * len;
        long inner = 0;
        for (auto& ch : chains)
            for (char b : ch.indicators()) inner += b;
        p_hat = static_cast<double>(inner) / static_cast<double>(n);
        if (inner == 0) {
            if (n >= cfg.n_max) break;
            target = std::min(cfg.n_max, 2 * n);
            continue;
        }
        std::vector<std::vector<char>> seqs;
        seqs.reserve(chains.size());
        for (auto& ch : chains) seqs.push_back(ch.indicators());
        phi = estimate_autocorrelation(seqs).phi;
        cov = estimate_cov(p_hat, n, phi);
        if (cov * cov <= budget_cov2 || n >= cfg.n_max) break;
        double needed = (1.0 - p_hat) * (1.0 + phi) / (p_hat * budget_cov2);
        target = std::min(cfg.n_max, std::max(static_cast<long>(needed * 1.1) + 1, n + n / 2));
    }

    StageOutcome out;
    long proposals = 0, accepted = 0;
    for (auto& ch : chains) {
        out.ledger.merge(ch.costs());
        out.audit_ledger.merge(ch.audit_costs());
        out.violations += ch.audit_violations();
        proposals += ch.proposals();
        accepted += ch.accepted();
        for (const auto& s : ch.inner_reservoir()) out.inner_pool.push_back(s);
        if (!out.first_inner && ch.first_inner_session()) out.first_inner = ch.first_inner_session();
    }
    if (chains.front().first_inner_session()) out.first_inner = chains.front().first_inner_session();

    double alpha = proposals > 0 ? static_cast<double>(accepted) / static_cast<double>(proposals)
                                 : std::numeric_limits<double>::quiet_NaN();
    bool capped = n >= cfg.n_max && cov * cov > budget_cov2;
    out.report = SubsetReport{next.y, next.level, p_hat, n, alpha, phi, cov, capped};
    return out;
}

}  // namespace detail

// Standard Monte Carlo at a fixed accuracy level. Zero hits produce a
// report with the infinite-c.o.v. flag rather than an exception.
inline EstimateReport standard_mc(const LimitStateModel& model, int level, long n, const EstimatorConfig& cfg) {
    cfg.validate();
    if (n < 1) throw std::invalid_argument("standard_mc: n must be >= 1");
    if (level < 1 || level > model.schedule().max_level) throw std::invalid_argument("standard_mc: level out of range");
    SubsetSpec target{0.0, level, cfg.selective};
    auto stage = detail::run_iid_stage(model, target, cfg.tol * cfg.tol, cfg, detail::stage_key(cfg.seed, 1), n);
    EstimateReport rep;
    rep.seed = cfg.seed;
    rep.ledger = stage.ledger;
    rep.per_subset.push_back(stage.report);
    rep.finalize(cfg.s);
    rep.cov_infinite = !(stage.report.p_hat > 0.0);
    return rep;
}

namespace detail {

struct AdaptiveSusResult {
    std::vector<SubsetReport> reports;
    CostLedger ledger;
    CostLedger audit_ledger;
    long violations = 0;
    std::vector<SessionPtr> final_pool;
    SessionPtr final_first;
};

// Classical subset simulation with thresholds chosen on the fly as p0
// quantiles of the observed limit-state values, run at one fixed accuracy
// level. Used standalone (mode classical-adaptive-p0) and to estimate the
// first multilevel subset. Values are computed plainly at `level`; one
// evaluation per proposal serves membership, scoring and the quantile.
inline AdaptiveSusResult run_adaptive_sus(const LimitStateModel& model, const EstimatorConfig& cfg, int level,
                                          double final_y, double per_stage_budget_cov2, std::uint64_t base_key,
                                          int stage_key_offset) {
    AdaptiveSusResult res;
    constexpr long kPoolCap = 8192;

    // growing value/session reservoir shared by both stage kinds
    struct Reservoir {
        std::vector<std::pair<SessionPtr, double>> entries;
        long seen = 0;
        void offer(const SessionPtr& s, double v, std::uint64_t key) {
            if (static_cast<long>(entries.size()) < kPoolCap) {
                entries.emplace_back(s, v);
            } else {
                std::uint64_t r = rng::mix64(rng::fold(key, static_cast<std::uint64_t>(seen)));
                std::uint64_t slot = r % static_cast<std::uint64_t>(seen + 1);
                if (slot < kPoolCap) entries[static_cast<std::size_t>(slot)] = {s, v};
            }
            ++seen;
        }
    };

    double prev_y = std::numeric_limits<double>::infinity();
    std::vector<SessionPtr> seed_pool;
    SessionPtr first_seed;

    for (int stage = 1; stage <= cfg.max_adaptive_subsets; ++stage) {
        const std::uint64_t key = stage_key(base_key, stage_key_offset + stage);
        std::vector<double> values;
        Reservoir reservoir;
        double y_j = final_y, p_hat = 0.0, phi = 0.0;
        double cov = std::numeric_limits<double>::infinity();
        bool is_final = false;
        long n = 0;
        double alpha = std::numeric_limits<double>::quiet_NaN();

        if (stage == 1) {
            const std::uint64_t sample_base = rng::fold(key, 1);
            long target = std::min(cfg.n_min, cfg.n_max);
            while (true) {
                for (; n < target; ++n) {
                    auto s = make_session(model, iid_theta(model.dim(), sample_base, n));
                    double v = s->at_level(level).value;
                    res.ledger.merge(s->take_charges());
                    values.push_back(v);
                    reservoir.offer(s, v, key ^ 0xF00Du);
                }
                auto th = adaptive_thresholds_p0(values, cfg.p0, final_y);
                y_j = th.y;
                is_final = th.final_subset;
                long inner = static_cast<long>(std::count_if(values.begin(), values.end(),
                                                             [&](double v) { return v <= y_j; }));
                if (inner == 0) {
                    if (n >= cfg.n_max) break;
                    target = std::min(cfg.n_max, 2 * n);
                    continue;
                }
                p_hat = static_cast<double>(inner) / static_cast<double>(n);
                cov = estimate_cov(p_hat, n, 0.0);
                if (cov * cov <= per_stage_budget_cov2 || n >= cfg.n_max) break;
                double needed = (1.0 - p_hat) / (p_hat * per_stage_budget_cov2);
                target = std::min(cfg.n_max, std::max(static_cast<long>(needed * 1.1) + 1, n + n / 2));
            }
        } else {
            SubsetSpec current{prev_y, level, false};
            long n_chains = std::min<long>(cfg.chains(), static_cast<long>(seed_pool.size()));
            n_chains = std::max<long>(1, n_chains);
            std::vector<PopChain> chains;
            std::vector<std::vector<double>> chain_values(static_cast<std::size_t>(n_chains));
            for (long c = 0; c < n_chains; ++c) {
                SessionPtr seed = (c == 0 && first_seed) ? first_seed
                                                         : seed_pool[static_cast<std::size_t>(c) % seed_pool.size()];
                chains.emplace_back(seed, current, SubsetSpec::whole_space(), cfg.eta,
                                    rng::fold(rng::fold(key, 2), static_cast<std::uint64_t>(c)),
                                    /*reservoir_cap=*/1);
            }
            long target = std::min(cfg.n_min, cfg.n_max);
            while (true) {
                const long len = (target + n_chains - 1) / n_chains;
                for (long c = 0; c < n_chains; ++c) {
                    auto& ch = chains[static_cast<std::size_t>(c)];
                    auto& vals = chain_values[static_cast<std::size_t>(c)];
                    ch.advance(len, [&](const SessionPtr& st) {
                        // one plain eval per distinct state; repeats hit the cache
                        double v = st->at_level(level).value;
                        res.ledger.merge(st->take_charges());
                        vals.push_back(v);
                        reservoir.offer(st, v, key ^ 0xF00Du);
                    });
                }
                n = 0;
                values.clear();
                for (auto& vals : chain_values) {
                    n += static_cast<long>(vals.size());
                    values.insert(values.end(), vals.begin(), vals.end());
                }
                auto th = adaptive_thresholds_p0(values, cfg.p0, final_y);
                y_j = th.y;
                is_final = th.final_subset;
                long inner = static_cast<long>(std::count_if(values.begin(), values.end(),
                                                             [&](double v) { return v <= y_j; }));
                if (inner == 0) {
                    if (n >= cfg.n_max) break;
                    target = std::min(cfg.n_max, 2 * n);
                    continue;
                }
                p_hat = static_cast<double>(inner) / static_cast<double>(n);
                std::vector<std::vector<char>> seqs;
                for (auto& vals : chain_values) {
                    std::vector<char> s(vals.size());
                    for (std::size_t i = 0; i < vals.size(); ++i) s[i] = vals[i] <= y_j ? 1 : 0;
                    seqs.push_back(std::move(s));
                }
                phi = estimate_autocorrelation(seqs).phi;
                cov = estimate_cov(p_hat, n, phi);
                if (cov * cov <= per_stage_budget_cov2 || n >= cfg.n_max) break;
                double needed = (1.0 - p_hat) * (1.0 + phi) / (p_hat * per_stage_budget_cov2);
                target = std::min(cfg.n_max, std::max(static_cast<long>(needed * 1.1) + 1, n + n / 2));
            }
            long proposals = 0, accepted = 0;
            for (auto& ch : chains) {
                res.ledger.merge(ch.costs());
                proposals += ch.proposals();
                accepted += ch.accepted();
            }
            alpha = proposals > 0 ? static_cast<double>(accepted) / static_cast<double>(proposals)
                                  : std::numeric_limits<double>::quiet_NaN();
        }

        if (p_hat == 0.0)
            throw SubsetAbortError(stage, "adaptive subset " + std::to_string(stage) +
                                              " has zero members after the sample cap (y = " + std::to_string(y_j) +
                                              ")");
        res.reports.push_back(SubsetReport{y_j, level, p_hat, n, alpha, phi, cov,
                                           n >= cfg.n_max && cov * cov > per_stage_budget_cov2});

        // inner states for the next stage's seeds
        seed_pool.clear();
        first_seed.reset();
        for (auto& [s, v] : reservoir.entries)
            if (v <= y_j) seed_pool.push_back(s);
        if (!seed_pool.empty()) first_seed = seed_pool.front();

        prev_y = y_j;
        if (is_final) break;
        if (stage == cfg.max_adaptive_subsets)
            throw SubsetAbortError(stage, "adaptive subset simulation did not reach the final threshold within " +
                                              std::to_string(cfg.max_adaptive_subsets) + " subsets");
    }
    res.final_pool = seed_pool;
    res.final_first = first_seed;
    return res;
}

}  // namespace detail

// Classical subset simulation at a fixed finest level: either with a
// supplied threshold schedule (selective refinement optional) or with
// adaptive p0 thresholds (plain evaluation; thresholds are not known in
// advance, so each proposal is evaluated once at the stage level).
inline EstimateReport run_sus(const LimitStateModel& model, const EstimatorConfig& cfg,
                              const ThresholdSchedule& schedule) {
    cfg.validate();
    schedule.validate(model.schedule());
    if (cfg.selective && !schedule.selective_spacing_ok(model.schedule()))
        throw std::invalid_argument("run_sus: schedule spacing too tight for selective refinement");

    const int K = schedule.subsets();
    const double budget = cfg.tol * cfg.tol / std::pow(static_cast<double>(K), cfg.s);

    EstimateReport rep;
    rep.seed = cfg.seed;
    std::vector<SessionPtr> pool;
    SessionPtr first;
    for (int j = 1; j <= K; ++j) {
        SubsetSpec next{schedule.y(j), schedule.level(j), cfg.selective};
        detail::StageOutcome stage;
        if (j == 1) {
            stage = detail::run_iid_stage(model, next, budget, cfg, detail::stage_key(cfg.seed, 1));
        } else {
            SubsetSpec current{schedule.y(j - 1), schedule.level(j - 1), cfg.selective};
            std::optional<SubsetSpec> audit;
            if (j >= 3) audit = SubsetSpec{schedule.y(j - 2), schedule.level(j - 2), cfg.selective};
            stage = detail::run_chain_stage(model, current, next, audit, budget, cfg,
                                            detail::stage_key(cfg.seed, j), pool, first);
        }
        rep.ledger.merge(stage.ledger);
        rep.audit_ledger.merge(stage.audit_ledger);
        rep.subset_violations += stage.violations;
        rep.per_subset.push_back(stage.report);
        if (!(stage.report.p_hat > 0.0))
            throw SubsetAbortError(j, "subset " + std::to_string(j) + " (y = " + std::to_string(schedule.y(j)) +
                                          ") has zero members after the sample cap");
        pool = std::move(stage.inner_pool);
        first = stage.first_inner;
    }
    rep.finalize(cfg.s);
    return rep;
}

// Adaptive-p0 variant: thresholds computed during the run at fixed level.
inline EstimateReport run_sus_adaptive(const LimitStateModel& model, const EstimatorConfig& cfg, int level,
                                       int expected_subsets) {
    cfg.validate();
    if (level < 1 || level > model.schedule().max_level)
        throw std::invalid_argument("run_sus_adaptive: level out of range");
    const double k_est = std::max(1, expected_subsets);
    const double budget = cfg.tol * cfg.tol / std::pow(k_est, cfg.s);
    auto res = detail::run_adaptive_sus(model, cfg, level, 0.0, budget, cfg.seed, 0);
    EstimateReport rep;
    rep.seed = cfg.seed;
    rep.ledger = res.ledger;
    rep.audit_ledger = res.audit_ledger;
    rep.subset_violations = res.violations;
    rep.per_subset = res.reports;
    rep.finalize(cfg.s);
    return rep;
}

// Adaptive multilevel subset simulation over a lemma-mode schedule:
// coarse levels early, finest level on the final subset. The first subset
// is estimated by plain MC, or by classical subset simulation at the first
// subset's level when Pr(F_1) is small.
inline EstimateReport run_ml_sus(const LimitStateModel& model, const EstimatorConfig& cfg,
                                 const ThresholdSchedule& schedule) {
    cfg.validate();
    if (schedule.mode != ScheduleMode::MultilevelLemma)
        throw std::invalid_argument("run_ml_sus: schedule must be in multilevel-lemma mode");
    schedule.validate(model.schedule());

    const int K = schedule.subsets();
    const int L = schedule.levels.back();
    // budget divisor: the spec prescribes L^-s; floor at K so the combined
    // c.o.v. stays within tol when a schedule uses more than L subsets
    const double divisor = static_cast<double>(std::max(K, L));
    const double budget = cfg.tol * cfg.tol / std::pow(divisor, cfg.s);

    EstimateReport rep;
    rep.seed = cfg.seed;
    std::vector<SessionPtr> pool;
    SessionPtr first;

    // --- first subset: plain MC, or coarse classical SuS when rare ---
    SubsetSpec first_subset{schedule.y(1), schedule.level(1), cfg.selective};
    double p1_est;
    std::optional<detail::StageOutcome> pilot;
    if (cfg.p1_estimate) {
        p1_est = *cfg.p1_estimate;
    } else {
        pilot = detail::run_iid_stage(model, first_subset, budget, cfg, detail::stage_key(cfg.seed, 1),
                                      std::min(cfg.n_min, cfg.n_max));
        p1_est = pilot->report.p_hat;
    }

    if (p1_est >= cfg.first_subset_sus_below) {
        // The adaptive stage regenerates the pilot draws from the same keys,
        // so only the stage's charges count.
        auto stage = detail::run_iid_stage(model, first_subset, budget, cfg, detail::stage_key(cfg.seed, 1));
        rep.ledger.merge(stage.ledger);
        rep.per_subset.push_back(stage.report);
        if (!(stage.report.p_hat > 0.0)) throw SubsetAbortError(1, "first multilevel subset has zero members");
        pool = std::move(stage.inner_pool);
        first = stage.first_inner;
    } else {
        if (pilot) rep.ledger.merge(pilot->ledger);  // route-decision work, not reused below
        int k1 = static_cast<int>(
            std::ceil(std::log(std::max(p1_est, 0.5 / static_cast<double>(cfg.n_min))) / std::log(cfg.p0)));
        k1 = std::clamp(k1, 1, cfg.max_adaptive_subsets);
        const double sub_budget = budget / std::pow(static_cast<double>(k1 + 1), cfg.s);
        auto res = detail::run_adaptive_sus(model, cfg, schedule.level(1), schedule.y(1), sub_budget, cfg.seed, 100);
        rep.ledger.merge(res.ledger);
        double p1 = 1.0;
        std::vector<double> covs;
        long n1 = 0;
        for (const auto& r : res.reports) {
            p1 *= r.p_hat;
            covs.push_back(r.cov);
            n1 += r.n;
        }
        rep.per_subset.push_back(SubsetReport{schedule.y(1), schedule.level(1), p1, n1,
                                              std::numeric_limits<double>::quiet_NaN(), 0.0,
                                              combine_cov(covs, cfg.s), false});
        if (!(p1 > 0.0)) throw SubsetAbortError(1, "first multilevel subset has zero members");
        // The sub-run classifies by plain level values; later stages test
        // membership with the configured (possibly selective) rule. Screen
        // the seed pool through that rule so every chain precondition holds
        // even where the two classifications disagree pathwise.
        for (const auto& s : res.final_pool) {
            bool member = first_subset.member(*s);
            rep.ledger.merge(s->take_charges());
            if (member) {
                pool.push_back(s);
                if (!first) first = s;
            }
        }
        if (res.final_first && first_subset.member(*res.final_first)) first = res.final_first;
        if (pool.empty())
            throw SubsetAbortError(1, "no first-subset seed survives the configured membership rule");
    }

    // --- conditional subsets at increasing accuracy ---
    for (int j = 2; j <= K; ++j) {
        SubsetSpec current{schedule.y(j - 1), schedule.level(j - 1), cfg.selective};
        SubsetSpec next{schedule.y(j), schedule.level(j), cfg.selective};
        std::optional<SubsetSpec> audit;
        if (j >= 3) audit = SubsetSpec{schedule.y(j - 2), schedule.level(j - 2), cfg.selective};
        auto stage = detail::run_chain_stage(model, current, next, audit, budget, cfg, detail::stage_key(cfg.seed, j),
                                             pool, first);
        rep.ledger.merge(stage.ledger);
        rep.audit_ledger.merge(stage.audit_ledger);
        rep.subset_violations += stage.violations;
        rep.per_subset.push_back(stage.report);
        if (!(stage.report.p_hat > 0.0))
            throw SubsetAbortError(j, "multilevel subset " + std::to_string(j) + " (y = " +
                                          std::to_string(schedule.y(j)) + ") has zero members after the sample cap");
        pool = std::move(stage.inner_pool);
        first = stage.first_inner;
    }
    rep.finalize(cfg.s);
    return rep;
}

}  // namespace subsetsim
