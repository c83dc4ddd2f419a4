#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "subsetsim/hierarchy.hpp"
#include "subsetsim/rng.hpp"
#include "subsetsim/selective.hpp"

namespace subsetsim {

struct ShakingConfig {
    double eta = 0.6;
    std::uint64_t rng_seed = 0;
    int dim = 1;

    void validate() const {
        if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("ShakingConfig: eta must be in [0,1]");
    }
};

// Nested-subset membership rule: 1{G <= y} with G evaluated at `level`,
// either plainly or via selective refinement against y. y = +inf is the
// whole space and costs nothing to test.
struct SubsetSpec {
    double y = std::numeric_limits<double>::infinity();
    int level = 1;
    bool selective = false;

    static SubsetSpec whole_space() { return SubsetSpec{}; }
    bool is_whole_space() const { return std::isinf(y) && y > 0.0; }

    bool member(EvalSession& s) const {
        if (is_whole_space()) return true;
        if (selective) return indicator_selective(s, y, level);
        return s.at_level(level).value <= y;
    }
};

// Gaussian shaking transformation: sqrt(1 - eta^2) x + eta y, the pCN
// proposal; preserves N(0, I) and is exchangeable in (x, S(x,y)).
inline ParameterVector shake(const ParameterVector& theta, const ParameterVector& noise, double eta) {
    if (theta.dim() != noise.dim()) throw std::invalid_argument("shake: dimension mismatch");
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("shake: eta must be in [0,1]");
    const double keep = std::sqrt(1.0 - eta * eta);
    ParameterVector out = theta;
    for (int i = 0; i < out.dim(); ++i) out[i] = keep * theta[i] + eta * noise[i];
    return out;
}

inline ParameterVector gaussian_noise(int dim, std::uint64_t key) {
    ParameterVector out = ParameterVector::zeros(dim);
    for (int i = 0; i < dim; ++i) out[i] = rng::keyed_normal(rng::fold(key, static_cast<std::uint64_t>(i)));
    return out;
}

struct RejectionOutcome {
    SessionPtr state;  // proposal if accepted, the input state otherwise
    bool accepted = false;
    double cost = 0.0;
};

// M_j(x, y) = S(x,y) if S(x,y) stays in the subset, else x.
inline RejectionOutcome rejection_step(const SessionPtr& state, const ParameterVector& noise,
                                       const SubsetSpec& subset, double eta, CostLedger& ledger) {
    SessionPtr proposal = make_session(state->model(), shake(state->theta(), noise, eta));
    bool inside = subset.member(*proposal);
    CostLedger charged = proposal->take_charges();
    double cost = charged.total_cost;
    ledger.merge(charged);
    return RejectionOutcome{inside ? proposal : state, inside, cost};
}

inline RejectionOutcome rejection_step(const LimitStateModel& model, const ParameterVector& theta,
                                       const ParameterVector& noise, const SubsetSpec& subset, double eta) {
    CostLedger scratch;
    return rejection_step(make_session(model, theta), noise, subset, eta, scratch);
}

// One POP chain: a single path confined to `current`, scoring membership of
// each visited state in `next`. The seed is the first recorded state; a
// record of length n holds the seed plus n-1 accept/reject transitions.
struct ChainRecord {
    std::vector<ParameterVector> states;
    std::vector<char> indicators;
    long accepted = 0;
    CostLedger costs;
    std::optional<long> first_inner_index;

    double estimate() const {
        if (indicators.empty()) return 0.0;
        double s = 0.0;
        for (char b : indicators) s += b;
        return s / static_cast<double>(indicators.size());
    }
};

// Incremental driver used by the estimators: supports growth in rounds,
// a capped reservoir of inner-state sessions for seeding the next subset,
// and an optional subset-property audit against the previous subset.
class PopChain {
public:
    using SampleObserver = std::function<void(const SessionPtr&)>;

    PopChain(SessionPtr seed, SubsetSpec current, SubsetSpec next, double eta, std::uint64_t noise_key,
             long reservoir_cap = 4096)
        : current_(current), next_(next), eta_(eta), noise_key_(noise_key),
          reservoir_cap_(std::max<long>(1, reservoir_cap)), state_(std::move(seed)) {
        if (!current_.member(*state_))
            throw std::invalid_argument("PopChain: seed state is not a member of the current subset");
        costs_.merge(state_->take_charges());
    }

    void keep_states(bool on) { keep_states_ = on; }
    void audit_against(SubsetSpec previous) { audit_ = previous; }

    // Extends the record to `target_len` samples; `observer` sees each
    // recorded state once (repeats included) and may refine the session
    // further, draining any charges it causes itself.
    void advance(long target_len, const SampleObserver& observer = {}) {
        while (static_cast<long>(indicators_.size()) < target_len) {
            if (!indicators_.empty()) {
                ParameterVector noise =
                    gaussian_noise(state_->theta().dim(), rng::fold(noise_key_, static_cast<std::uint64_t>(steps_)));
                ++steps_;
                auto out = rejection_step(state_, noise, current_, eta_, costs_);
                if (out.accepted) {
                    ++accepted_;
                    state_ = out.state;
                    audit_state();
                }
            } else {
                audit_state();  // seed
            }
            bool inner = next_.member(*state_);
            costs_.merge(state_->take_charges());
            indicators_.push_back(inner ? 1 : 0);
            if (inner) record_inner();
            if (keep_states_) states_.push_back(state_->theta());
            if (observer) observer(state_);
        }
    }

    long length() const { return static_cast<long>(indicators_.size()); }
    long proposals() const { return steps_; }
    long accepted() const { return accepted_; }
    const std::vector<char>& indicators() const { return indicators_; }
    const CostLedger& costs() const { return costs_; }
    const CostLedger& audit_costs() const { return audit_costs_; }
    long audit_violations() const { return audit_violations_; }
    std::optional<long> first_inner_index() const { return first_inner_index_; }
    SessionPtr first_inner_session() const { return first_inner_; }
    const std::vector<SessionPtr>& inner_reservoir() const { return inner_reservoir_; }
    long inner_count() const { return inner_count_; }
    SessionPtr last_state() const { return state_; }

    ChainRecord to_record() const {
        ChainRecord r;
        r.states = states_;
        r.indicators = indicators_;
        r.accepted = accepted_;
        r.costs = costs_;
        r.first_inner_index = first_inner_index_;
        return r;
    }

private:
    void record_inner() {
        if (!first_inner_) {
            first_inner_ = state_;
            first_inner_index_ = static_cast<long>(indicators_.size()) - 1;
        }
        // Deterministic reservoir sample of inner sessions, capped for memory.
        if (static_cast<long>(inner_reservoir_.size()) < reservoir_cap_) {
            inner_reservoir_.push_back(state_);
        } else {
            std::uint64_t r = rng::mix64(rng::fold(noise_key_ ^ 0xABCDu, static_cast<std::uint64_t>(inner_count_)));
            std::uint64_t slot = r % static_cast<std::uint64_t>(inner_count_ + 1);
            if (slot < static_cast<std::uint64_t>(reservoir_cap_))
                inner_reservoir_[static_cast<std::size_t>(slot)] = state_;
        }
        ++inner_count_;
    }

    void audit_state() {
        if (!audit_ || audit_->is_whole_space()) return;
        // Fresh session so the audit neither reuses nor pollutes the sample's
        // cached levels; its cost is tracked separately from the run ledger.
        EvalSession probe(state_->model(), state_->theta());
        if (!audit_->member(probe)) ++audit_violations_;
        audit_costs_.merge(probe.take_charges());
    }

    SubsetSpec current_, next_;
    double eta_;
    std::uint64_t noise_key_;
    long reservoir_cap_;
    SessionPtr state_;
    std::vector<char> indicators_;
    std::vector<ParameterVector> states_;
    bool keep_states_ = false;
    long steps_ = 0;
    long accepted_ = 0;
    CostLedger costs_;
    std::optional<SubsetSpec> audit_;
    long audit_violations_ = 0;
    CostLedger audit_costs_;
    SessionPtr first_inner_;
    std::optional<long> first_inner_index_;
    std::vector<SessionPtr> inner_reservoir_;
    long inner_count_ = 0;
};

// Spec-level operation: run one chain of n samples (seed included) and
// return its full record.
inline ChainRecord run_chain(const LimitStateModel& model, const ParameterVector& seed_state, long n_samples,
                             const SubsetSpec& current, const SubsetSpec& next, const ShakingConfig& config) {
    if (n_samples < 1) throw std::invalid_argument("run_chain: n_samples must be >= 1");
    config.validate();
    PopChain chain(make_session(model, seed_state), current, next, config.eta,
                   rng::fold(config.rng_seed, 0x636861696Eull));
    chain.keep_states(true);
    chain.advance(n_samples);
    return chain.to_record();
}

}  // namespace subsetsim
