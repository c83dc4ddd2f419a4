#pragma once

#include <cstring>
#include <optional>

#include "subsetsim/hierarchy.hpp"
#include "subsetsim/rng.hpp"

namespace subsetsim {

// Gaussian toy problem: exact limit state G(theta) = theta_1 - barrier,
// perturbed per level by kappa * gamma^l with kappa uniform on {-1, +1}.
// kappa is keyed by (model seed, theta bits, level), so re-evaluating the
// same sample at the same level is idempotent while distinct samples and
// levels draw independently.
struct ToyModelConfig {
    double gamma = 0.5;
    double q = 2.0;
    int max_level = 10;
    double barrier = 0.0;  // failure G <= 0 means theta_1 <= barrier
    int dim = 1;
    std::uint64_t seed = 0;
    int forced_kappa = 0;        // 0 = random; +1/-1 pins kappa at every level (tests)
    bool kappa_per_level = false;  // draw kappa independently per level instead of per sample
};

class ToyModel final : public LimitStateModel {
public:
    explicit ToyModel(ToyModelConfig cfg)
        : LimitStateModel(cfg.dim, AccuracySchedule(cfg.gamma, cfg.q, cfg.max_level)), cfg_(cfg) {}

    detail::LevelEval compute_level(const ParameterVector& theta, int level,
                                    const std::vector<std::optional<detail::LevelEval>>&) const override {
        const double g = theta[0] - cfg_.barrier;
        const double k = kappa(theta, level);
        const double bound = schedule().nominal_error(level);
        return {g + k * bound, bound};
    }

    std::optional<double> oracle(const ParameterVector& theta) const override { return theta[0] - cfg_.barrier; }

    std::string name() const override { return "toy"; }

    double kappa(const ParameterVector& theta, int level) const {
        if (cfg_.forced_kappa != 0) return cfg_.forced_kappa;
        std::uint64_t key = rng::fold(cfg_.seed, 0x746f79u);
        for (double c : theta.coords) {
            std::uint64_t bits;
            std::memcpy(&bits, &c, sizeof bits);
            key = rng::fold(key, bits);
        }
        if (cfg_.kappa_per_level) key = rng::fold(key, static_cast<std::uint64_t>(level));
        return (rng::mix64(key) & 1u) ? 1.0 : -1.0;
    }

    const ToyModelConfig& config() const { return cfg_; }

private:
    ToyModelConfig cfg_;
};

}  // namespace subsetsim
