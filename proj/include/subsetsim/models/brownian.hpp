#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "subsetsim/hierarchy.hpp"

namespace subsetsim {

// Brownian-motion minimum: G_l(theta) = min over the dyadic grid
// T_l = {i / 2^l} of B_t(theta) + 4, with the path generated from a
// truncated Karhunen-Loeve expansion
//   B_t = sum_i xi_i phi_i(t),  xi_i ~ N(0, (i - 1/2)^-2),
//   phi_i(t) = (sqrt(2)/pi) sin((i - 1/2) pi t).
// Standard-normal coordinates enter as xi_i = theta_i / (i - 1/2).
// Grids are nested, so G_l decreases monotonically with l.
struct BrownianModelConfig {
    int kl_terms = 256;
    int max_level = 10;
    double barrier = -4.0;  // failure: min B_t <= barrier
    double gamma = std::sqrt(0.5);
    double q = 2.0;
};

class BrownianModel final : public LimitStateModel {
public:
    explicit BrownianModel(BrownianModelConfig cfg)
        : LimitStateModel(cfg.kl_terms, AccuracySchedule(cfg.gamma, cfg.q, cfg.max_level)), cfg_(cfg) {
        if (cfg.kl_terms < 1) throw std::invalid_argument("BrownianModel: kl_terms must be >= 1");
        tables_.resize(static_cast<std::size_t>(cfg.max_level));
        for (int l = 1; l <= cfg.max_level; ++l) build_table(l);
    }

    detail::LevelEval compute_level(const ParameterVector& theta, int level,
                                    const std::vector<std::optional<detail::LevelEval>>&) const override {
        const auto& table = tables_[static_cast<std::size_t>(level - 1)];
        const std::size_t terms = static_cast<std::size_t>(cfg_.kl_terms);
        double min_b = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < table.size() / terms; ++p) {
            const double* row = table.data() + p * terms;
            double b = 0.0;
            for (std::size_t i = 0; i < terms; ++i) b += row[i] * theta.coords[i];
            min_b = std::min(min_b, b);
        }
        return {min_b - cfg_.barrier, schedule().nominal_error(level)};
    }

    // one work unit per grid point evaluated
    double level_cost(int level) const override { return static_cast<double>((1 << level) + 1); }

    std::string name() const override { return "brownian"; }
    const BrownianModelConfig& config() const { return cfg_; }

private:
    void build_table(int level) {
        const long pts = (1L << level) + 1;
        const int terms = cfg_.kl_terms;
        auto& table = tables_[static_cast<std::size_t>(level - 1)];
        table.resize(static_cast<std::size_t>(pts) * static_cast<std::size_t>(terms));
        const double scale = std::numbers::sqrt2 / std::numbers::pi;
        for (long p = 0; p < pts; ++p) {
            const double t = static_cast<double>(p) / static_cast<double>(1L << level);
            for (int i = 1; i <= terms; ++i) {
                const double freq = (static_cast<double>(i) - 0.5);
                table[static_cast<std::size_t>(p) * static_cast<std::size_t>(terms) +
                      static_cast<std::size_t>(i - 1)] = scale * std::sin(freq * std::numbers::pi * t) / freq;
            }
        }
    }

    BrownianModelConfig cfg_;
    std::vector<std::vector<double>> tables_;  // per level: [point][term]
};

}  // namespace subsetsim
