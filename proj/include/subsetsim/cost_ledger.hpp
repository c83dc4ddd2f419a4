#pragma once

#include <cstdint>
#include <map>

namespace subsetsim {

// Per-level accounting of evaluation counts and abstract work units.
// Work units are the normative cost measure; wall-clock is tracked by the
// experiment layer only for reporting.
struct CostLedger {
    std::map<int, std::int64_t> per_level_counts;
    std::map<int, double> per_level_cost;
    double total_cost = 0.0;

    void charge(int level, double cost, std::int64_t count = 1) {
        per_level_counts[level] += count;
        per_level_cost[level] += cost;
        total_cost += cost;
    }

    void merge(const CostLedger& other) {
        for (const auto& [lvl, n] : other.per_level_counts) per_level_counts[lvl] += n;
        for (const auto& [lvl, c] : other.per_level_cost) per_level_cost[lvl] += c;
        total_cost += other.total_cost;
    }

    std::int64_t count_at(int level) const {
        auto it = per_level_counts.find(level);
        return it == per_level_counts.end() ? 0 : it->second;
    }
    double cost_at(int level) const {
        auto it = per_level_cost.find(level);
        return it == per_level_cost.end() ? 0.0 : it->second;
    }
    bool empty() const { return per_level_counts.empty() && total_cost == 0.0; }
};

inline CostLedger ledger_merge(const CostLedger& a, const CostLedger& b) {
    CostLedger out = a;
    out.merge(b);
    return out;
}

}  // namespace subsetsim
