#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "subsetsim/hierarchy.hpp"

namespace subsetsim {

enum class ScheduleMode { ClassicalFixed, ClassicalAdaptiveP0, MultilevelLemma };

// Failure thresholds y_0 = inf > y_1 > ... > y_K = 0 with the accuracy
// level attached to each subset.
struct ThresholdSchedule {
    std::vector<double> thresholds;  // size K+1, thresholds[0] = +inf, thresholds[K] = 0
    std::vector<int> levels;         // size K, levels[j-1] is the accuracy level of subset j
    ScheduleMode mode = ScheduleMode::ClassicalFixed;

    int subsets() const { return static_cast<int>(levels.size()); }
    double y(int j) const { return thresholds[static_cast<std::size_t>(j)]; }
    int level(int j) const { return levels[static_cast<std::size_t>(j - 1)]; }

    void validate(const AccuracySchedule& acc) const {
        const int K = subsets();
        if (K < 1) throw std::invalid_argument("ThresholdSchedule: needs at least one subset");
        if (thresholds.size() != static_cast<std::size_t>(K) + 1)
            throw std::invalid_argument("ThresholdSchedule: thresholds/levels size mismatch");
        if (!(std::isinf(thresholds[0]) && thresholds[0] > 0.0))
            throw std::invalid_argument("ThresholdSchedule: y_0 must be +inf");
        if (thresholds.back() != 0.0) throw std::invalid_argument("ThresholdSchedule: y_K must be 0");
        for (int j = 1; j <= K; ++j) {
            if (!(y(j - 1) > y(j))) throw std::invalid_argument("ThresholdSchedule: thresholds must strictly decrease");
            if (level(j) < 1 || level(j) > acc.max_level)
                throw std::invalid_argument("ThresholdSchedule: level out of range");
            if (j > 1 && level(j) < level(j - 1))
                throw std::invalid_argument("ThresholdSchedule: levels must be non-decreasing");
        }
        if (levels.back() > acc.max_level) throw std::invalid_argument("ThresholdSchedule: l_K exceeds max_level");
        if (mode == ScheduleMode::MultilevelLemma) {
            for (int j = K - 1; j >= 1; --j) {
                const double want = y(j + 1) + acc.nominal_error(level(j)) + acc.nominal_error(level(j + 1));
                if (std::fabs(y(j) - want) > 1e-12 * std::max(1.0, want))
                    throw std::invalid_argument("ThresholdSchedule: lemma spacing violated at subset " +
                                                std::to_string(j));
            }
        }
    }

    // Lemma 3.1 hypothesis applied levelwise: selective membership keeps the
    // subset property when consecutive thresholds are at least 2 gamma^l_j apart.
    bool selective_spacing_ok(const AccuracySchedule& acc) const {
        for (int j = 2; j <= subsets(); ++j)
            if (y(j - 1) - y(j) < 2.0 * acc.nominal_error(level(j))) return false;
        return true;
    }
};

// Backward recursion y_K = 0, y_j = y_{j+1} + gamma^{l_j} + gamma^{l_{j+1}}.
inline ThresholdSchedule threshold_schedule_lemma(const AccuracySchedule& acc, const std::vector<int>& subset_levels) {
    if (subset_levels.empty()) throw std::invalid_argument("threshold_schedule_lemma: empty level list");
    const int K = static_cast<int>(subset_levels.size());
    ThresholdSchedule sched;
    sched.mode = ScheduleMode::MultilevelLemma;
    sched.levels = subset_levels;
    sched.thresholds.assign(static_cast<std::size_t>(K) + 1, 0.0);
    sched.thresholds[static_cast<std::size_t>(K)] = 0.0;
    for (int j = K - 1; j >= 1; --j) {
        sched.thresholds[static_cast<std::size_t>(j)] =
            sched.thresholds[static_cast<std::size_t>(j + 1)] +
            acc.nominal_error(subset_levels[static_cast<std::size_t>(j - 1)]) +
            acc.nominal_error(subset_levels[static_cast<std::size_t>(j)]);
    }
    sched.thresholds[0] = std::numeric_limits<double>::infinity();
    sched.validate(acc);
    return sched;
}

// Fixed-threshold classical schedule at a single accuracy level.
inline ThresholdSchedule classical_fixed_schedule(const AccuracySchedule& acc, std::vector<double> intermediate,
                                                  int level) {
    ThresholdSchedule sched;
    sched.mode = ScheduleMode::ClassicalFixed;
    std::sort(intermediate.begin(), intermediate.end(), std::greater<>());
    sched.thresholds.push_back(std::numeric_limits<double>::infinity());
    for (double v : intermediate) sched.thresholds.push_back(v);
    if (sched.thresholds.back() != 0.0) sched.thresholds.push_back(0.0);
    sched.levels.assign(sched.thresholds.size() - 1, level);
    sched.validate(acc);
    return sched;
}

struct AdaptiveThreshold {
    double y = 0.0;
    bool final_subset = false;  // quantile fell at or below the target, clamped
};

// Classical Au-Beck intermediate threshold: the ceil(p0 N)-th smallest
// limit-state sample, clamped to `target` (default 0) for the final subset.
inline AdaptiveThreshold adaptive_thresholds_p0(std::vector<double> samples, double p0, double target = 0.0) {
    if (samples.empty()) throw std::invalid_argument("adaptive_thresholds_p0: empty sample list");
    if (!(p0 > 0.0 && p0 < 1.0)) throw std::invalid_argument("adaptive_thresholds_p0: p0 outside (0,1)");
    const auto n = samples.size();
    auto rank = static_cast<std::size_t>(std::ceil(p0 * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(rank - 1), samples.end());
    const double q = samples[rank - 1];
    if (q <= target) return {target, true};
    return {q, false};
}

}  // namespace subsetsim
