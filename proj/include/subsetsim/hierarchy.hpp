#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "subsetsim/cost_ledger.hpp"

namespace subsetsim {

// Hierarchy of limit-state approximations: level l carries nominal error
// bound gamma^l at nominal cost gamma^(-l*q).
struct AccuracySchedule {
    double gamma = 0.5;
    double q = 2.0;
    int max_level = 1;

    AccuracySchedule() = default;
    AccuracySchedule(double gamma_, double q_, int max_level_)
        : gamma(gamma_), q(q_), max_level(max_level_) {
        validate();
    }

    void validate() const {
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("AccuracySchedule: gamma must be in (0,1)");
        if (!(q >= 0.0)) throw std::invalid_argument("AccuracySchedule: q must be >= 0");
        if (max_level < 1) throw std::invalid_argument("AccuracySchedule: max_level must be >= 1");
    }

    double nominal_error(int level) const { return std::pow(gamma, level); }
    double nominal_cost(int level) const { return std::pow(gamma, -level * q); }
};

// A point in the d-dimensional standard-Gaussian parameter space.
struct ParameterVector {
    std::vector<double> coords;

    ParameterVector() = default;
    explicit ParameterVector(std::vector<double> c) : coords(std::move(c)) {}

    static ParameterVector zeros(int dim) { return ParameterVector(std::vector<double>(static_cast<std::size_t>(dim), 0.0)); }

    int dim() const { return static_cast<int>(coords.size()); }
    double operator[](int i) const { return coords[static_cast<std::size_t>(i)]; }
    double& operator[](int i) { return coords[static_cast<std::size_t>(i)]; }

    bool all_finite() const {
        for (double x : coords)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

// One evaluation of the limit state at some accuracy level.
struct LevelledValue {
    double value = 0.0;
    int level = 0;
    double error_bound = 0.0;  // certified bound on |G - value|
    double cost = 0.0;         // work units charged by the call that produced this
    bool certified = true;     // false when the hierarchy was exhausted before certification
};

namespace detail {
struct LevelEval {
    double value;
    double error_bound;
};
}  // namespace detail

class EvalSession;

// Abstract model capability: deterministic per-(theta, level) evaluation
// plus declared work units per level. Implementations may tighten the
// nominal gamma^l error bound with an a-posteriori estimate using the
// lower-level values already computed for the same sample.
class LimitStateModel {
public:
    virtual ~LimitStateModel() = default;

    int dim() const { return dim_; }
    const AccuracySchedule& schedule() const { return schedule_; }

    virtual double level_cost(int level) const { return schedule_.nominal_cost(level); }

    // `lower` holds this sample's previously computed levels (index level-1);
    // entries may be absent.
    virtual detail::LevelEval compute_level(const ParameterVector& theta, int level,
                                            const std::vector<std::optional<detail::LevelEval>>& lower) const = 0;

    // Exact limit state, when the model provides one (testing oracle).
    virtual std::optional<double> oracle(const ParameterVector&) const { return std::nullopt; }

    virtual std::string name() const { return "model"; }

protected:
    LimitStateModel(int dim, AccuracySchedule schedule) : dim_(dim), schedule_(std::move(schedule)) {
        if (dim_ < 1) throw std::invalid_argument("LimitStateModel: dim must be >= 1");
        schedule_.validate();
    }

private:
    int dim_;
    AccuracySchedule schedule_;
};

// Per-sample evaluation cache. Each accuracy level of a given sample is
// computed and charged exactly once, however often estimators revisit the
// sample (rejected MCMC proposals, indicator re-tests, refinement resumes).
class EvalSession {
public:
    EvalSession(const LimitStateModel& model, ParameterVector theta)
        : model_(&model), theta_(std::move(theta)), levels_(static_cast<std::size_t>(model.schedule().max_level)) {
        if (theta_.dim() != model.dim())
            throw std::invalid_argument("EvalSession: theta dimension does not match model");
        if (!theta_.all_finite()) throw std::invalid_argument("EvalSession: non-finite coordinates");
    }

    const LimitStateModel& model() const { return *model_; }
    const ParameterVector& theta() const { return theta_; }

    bool has_level(int level) const {
        return level >= 1 && level <= max_level() && levels_[static_cast<std::size_t>(level - 1)].has_value();
    }

    const detail::LevelEval& at_level(int level) {
        if (level < 1 || level > max_level())
            throw std::invalid_argument("EvalSession: level " + std::to_string(level) + " out of range");
        auto& slot = levels_[static_cast<std::size_t>(level - 1)];
        if (!slot) {
            slot = model_->compute_level(theta_, level, levels_);
            charges_.charge(level, model_->level_cost(level));
        }
        return *slot;
    }

    int max_level() const { return model_->schedule().max_level; }

    // Deepest level computed so far, 0 if none.
    int deepest_level() const {
        for (int l = max_level(); l >= 1; --l)
            if (levels_[static_cast<std::size_t>(l - 1)]) return l;
        return 0;
    }

    // Best available approximation of G for this sample (deepest level).
    double best_value() {
        int l = deepest_level();
        return at_level(l == 0 ? 1 : l).value;
    }

    const CostLedger& charges() const { return charges_; }

    // Drains accumulated charges; used by callers that account work as it occurs.
    CostLedger take_charges() {
        CostLedger out = std::move(charges_);
        charges_ = CostLedger{};
        return out;
    }

private:
    const LimitStateModel* model_;
    ParameterVector theta_;
    std::vector<std::optional<detail::LevelEval>> levels_;
    CostLedger charges_;
};

using SessionPtr = std::shared_ptr<EvalSession>;

inline SessionPtr make_session(const LimitStateModel& model, ParameterVector theta) {
    return std::make_shared<EvalSession>(model, std::move(theta));
}

}  // namespace subsetsim
