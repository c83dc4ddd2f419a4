#pragma once

#include <cmath>
#include <cstdlib>

#include "subsetsim/hierarchy.hpp"

namespace subsetsim {

// Plain level-l evaluation. Cost reported is what this call newly charged
// to the sample (a level already cached in the session is free).
inline LevelledValue evaluate_at_level(EvalSession& s, int level) {
    double before = s.charges().total_cost;
    const auto& e = s.at_level(level);
    return LevelledValue{e.value, level, e.error_bound, s.charges().total_cost - before, true};
}

inline LevelledValue evaluate_at_level(const LimitStateModel& model, const ParameterVector& theta, int level) {
    EvalSession s(model, theta);
    return evaluate_at_level(s, level);
}

// Selective refinement: walk the hierarchy from the coarsest level and stop
// as soon as either the error bound certifies the target accuracy
// (bound <= gamma^target) or the failure indicator relative to y is
// certified (|value - y| strictly exceeds the bound). Ties at
// |value - y| == bound keep refining: the sign of value - y is not yet
// guaranteed to match the exact limit state, since failure is inclusive.
// Returns the finest-level value flagged uncertified when the hierarchy is
// exhausted before either criterion holds.
inline LevelledValue selective_evaluate(EvalSession& s, double y, int target_level) {
    const auto& sched = s.model().schedule();
    if (target_level < 1 || target_level > sched.max_level)
        throw std::invalid_argument("selective_evaluate: target_level out of range");
    const double tol = sched.nominal_error(target_level);
    const double before = s.charges().total_cost;

    for (int j = 1; j <= sched.max_level; ++j) {
        const auto& e = s.at_level(j);
        const bool full_accuracy = e.error_bound <= tol;
        const bool indicator_certified = std::fabs(e.value - y) > e.error_bound;
        if (full_accuracy || indicator_certified || j == sched.max_level) {
            return LevelledValue{e.value, j, e.error_bound, s.charges().total_cost - before,
                                 full_accuracy || indicator_certified};
        }
    }
    std::abort();  // unreachable
}

inline LevelledValue selective_evaluate(const LimitStateModel& model, const ParameterVector& theta, double y,
                                        int target_level) {
    EvalSession s(model, theta);
    return selective_evaluate(s, y, target_level);
}

// 1 iff the selectively refined value falls at or below y.
inline bool indicator_selective(EvalSession& s, double y, int target_level) {
    return selective_evaluate(s, y, target_level).value <= y;
}

inline bool indicator_selective(const LimitStateModel& model, const ParameterVector& theta, double y,
                                int target_level) {
    EvalSession s(model, theta);
    return indicator_selective(s, y, target_level);
}

}  // namespace subsetsim
