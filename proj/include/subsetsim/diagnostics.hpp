#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "subsetsim/rng.hpp"

namespace subsetsim {

// Chain-aware c.o.v. of a conditional-probability estimate:
// delta^2 = (1 - p) (1 + phi) / (n p). Zero estimates flag +inf.
inline double estimate_cov(double p_hat, long n, double phi) {
    if (n < 1) throw std::invalid_argument("estimate_cov: n must be >= 1");
    if (phi < 0.0) throw std::invalid_argument("estimate_cov: phi must be >= 0");
    if (p_hat < 0.0 || p_hat > 1.0) throw std::invalid_argument("estimate_cov: p_hat outside [0,1]");
    if (p_hat == 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt((1.0 - p_hat) * (1.0 + phi) / (static_cast<double>(n) * p_hat));
}

// Combined c.o.v. across subsets: root-sum-square when the per-subset
// estimators are uncorrelated (s = 1), plain sum when fully correlated
// (s = 2, the bound from the double sum).
inline double combine_cov(const std::vector<double>& per_subset, int s) {
    if (s != 1 && s != 2) throw std::invalid_argument("combine_cov: s must be 1 or 2");
    double acc = 0.0;
    for (double d : per_subset) {
        if (d < 0.0) throw std::invalid_argument("combine_cov: negative c.o.v.");
        acc += (s == 1) ? d * d : d;
    }
    return (s == 1) ? std::sqrt(acc) : acc;
}

struct AutocorrelationResult {
    double phi = 0.0;
    bool degenerate = false;  // zero-variance chains (all 0s or all 1s)
    bool too_short = false;
};

// Au & Beck style lag-window estimator from multiple equal-length chains:
// phi = 2 sum_k (1 - k/n) rho(k), with rho(k) the cross-chain-averaged
// lag-k autocorrelation, truncated at the first non-positive rho.
inline AutocorrelationResult estimate_autocorrelation(const std::vector<std::vector<char>>& chains) {
    if (chains.empty()) throw std::invalid_argument("estimate_autocorrelation: no chains");
    const std::size_t n = chains.front().size();
    for (const auto& c : chains)
        if (c.size() != n) throw std::invalid_argument("estimate_autocorrelation: chains must have equal length");
    if (n < 2) return {0.0, false, true};

    const double nc = static_cast<double>(chains.size());
    double mean = 0.0;
    for (const auto& c : chains)
        for (char b : c) mean += b;
    mean /= (nc * static_cast<double>(n));

    // indicators are 0/1, so var = mean - mean^2
    const double var = mean - mean * mean;
    if (var <= 0.0) return {0.0, true, false};

    double phi = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        double r = 0.0;
        for (const auto& c : chains) {
            double s = 0.0;
            for (std::size_t i = 0; i + k < n; ++i) s += static_cast<double>(c[i]) * static_cast<double>(c[i + k]);
            r += s / static_cast<double>(n - k);
        }
        r = r / nc - mean * mean;
        const double rho = r / var;
        if (rho <= 0.0) break;
        phi += 2.0 * (1.0 - static_cast<double>(k) / static_cast<double>(n)) * rho;
    }
    return {phi, false, false};
}

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// One-sample Kolmogorov-Smirnov test against the standard normal cdf,
// asymptotic p-value via the Kolmogorov distribution.
inline KsResult ks_test_standard_normal(std::vector<double> samples) {
    if (samples.empty()) throw std::invalid_argument("ks_test: empty sample");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = rng::normal_cdf(samples[i]);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d = std::max({d, std::fabs(cdf - lo), std::fabs(hi - cdf)});
    }
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = 2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * lambda * lambda);
        p += term;
        if (std::fabs(term) < 1e-12) break;
    }
    return {d, std::clamp(p, 0.0, 1.0)};
}

}  // namespace subsetsim
