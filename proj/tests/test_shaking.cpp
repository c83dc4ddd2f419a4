#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "subsetsim/models/toy.hpp"
#include "subsetsim/shaking.hpp"

using namespace subsetsim;

namespace {
ToyModel make_toy(int max_level = 8, int dim = 1, std::uint64_t seed = 11) {
    ToyModelConfig cfg;
    cfg.max_level = max_level;
    cfg.dim = dim;
    cfg.seed = seed;
    return ToyModel(cfg);
}
}  // namespace

TEST_CASE("shake arithmetic") {
    ParameterVector a{{1.0, 0.0}}, b{{0.0, 1.0}};
    SECTION("eta = 0 keeps theta") {
        auto r = shake(a, b, 0.0);
        CHECK(r[0] == 1.0);
        CHECK(r[1] == 0.0);
    }
    SECTION("eta = 1 returns the noise") {
        auto r = shake(a, b, 1.0);
        CHECK(r[0] == 0.0);
        CHECK(r[1] == 1.0);
    }
    SECTION("eta = 0.6 mixes with sqrt(1 - 0.36) = 0.8") {
        auto r = shake(a, b, 0.6);
        CHECK(r[0] == Catch::Approx(0.8));
        CHECK(r[1] == Catch::Approx(0.6));
    }
    SECTION("dimension mismatch throws") {
        CHECK_THROWS_AS(shake(a, ParameterVector{{1.0}}, 0.5), std::invalid_argument);
    }
}

TEST_CASE("shake preserves the standard normal in distribution") {
    rng::Stream gen(rng::fold(7, 7));
    double m = 0.0, m2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        ParameterVector x{{gen.normal()}}, y{{gen.normal()}};
        double v = shake(x, y, 0.6)[0];
        m += v;
        m2 += v * v;
    }
    m /= n;
    m2 /= n;
    CHECK(std::fabs(m) < 0.01);
    CHECK(std::fabs(m2 - 1.0) < 0.02);
}

TEST_CASE("rejection step") {
    ToyModel toy = make_toy();

    SECTION("whole space always accepts") {
        auto out = rejection_step(toy, ParameterVector{{0.3}}, ParameterVector{{2.5}},
                                  SubsetSpec::whole_space(), 0.6);
        CHECK(out.accepted);
        CHECK(out.cost == 0.0);
    }
    SECTION("proposal outside the subset is rejected, state kept") {
        // current theta_1 = -1 inside {G <= 0}; noise pushes the proposal to +0.5-ish
        SubsetSpec subset{0.0, 8, false};
        ParameterVector theta{{-1.0}};
        ParameterVector noise{{2.0}};
        auto prop = shake(theta, noise, 0.6);
        REQUIRE(prop[0] > 0.1);  // well outside, perturbation can't flip it
        auto out = rejection_step(toy, theta, noise, subset, 0.6);
        CHECK_FALSE(out.accepted);
        CHECK(out.state->theta()[0] == -1.0);
        CHECK(out.cost > 0.0);
    }
    SECTION("member proposal is accepted") {
        SubsetSpec subset{0.0, 8, false};
        auto out = rejection_step(toy, ParameterVector{{-1.0}}, ParameterVector{{-2.0}}, subset, 0.6);
        CHECK(out.accepted);
        CHECK(out.state->theta()[0] < 0.0);
    }
}

TEST_CASE("run_chain basics") {
    ToyModel toy = make_toy();
    ShakingConfig cfg;
    cfg.eta = 0.6;
    cfg.rng_seed = 99;

    SECTION("next equal to current gives estimate 1") {
        SubsetSpec sub{0.0, 8, false};
        auto rec = run_chain(toy, ParameterVector{{-0.5}}, 200, sub, sub, cfg);
        CHECK(rec.estimate() == 1.0);
        REQUIRE(rec.first_inner_index.has_value());
        CHECK(*rec.first_inner_index == 0);
    }
    SECTION("single sample with seed already inner") {
        auto rec = run_chain(toy, ParameterVector{{-2.0}}, 1, SubsetSpec::whole_space(), SubsetSpec{0.0, 8, false},
                             cfg);
        CHECK(rec.indicators.size() == 1);
        CHECK(rec.estimate() == 1.0);
        CHECK(*rec.first_inner_index == 0);
    }
    SECTION("seed outside current subset is a precondition error") {
        CHECK_THROWS_AS(run_chain(toy, ParameterVector{{1.0}}, 10, SubsetSpec{0.0, 8, false},
                                  SubsetSpec{0.0, 8, false}, cfg),
                        std::invalid_argument);
    }
    SECTION("states stay inside the current subset") {
        SubsetSpec current{0.5, 8, false};
        auto rec = run_chain(toy, ParameterVector{{0.0}}, 2000, current, SubsetSpec{0.0, 8, false}, cfg);
        for (const auto& st : rec.states) {
            EvalSession probe(toy, st);
            REQUIRE(probe.at_level(8).value <= 0.5);
        }
    }
}

TEST_CASE("chain over the whole space estimates a symmetric half space") {
    ToyModel toy = make_toy(8);
    ShakingConfig cfg;
    cfg.eta = 0.6;
    cfg.rng_seed = 1234;
    const long n = 10000;
    auto rec = run_chain(toy, ParameterVector{{0.3}}, n, SubsetSpec::whole_space(), SubsetSpec{0.0, 8, false}, cfg);
    // exact probability 1/2 by symmetry; allow 3 chain-aware standard errors
    double p = rec.estimate();
    // pCN lag-1 correlation is sqrt(1-eta^2); crude inflation factor
    double se = std::sqrt(0.25 / n * (1.0 + 0.8) / (1.0 - 0.8));
    CHECK(std::fabs(p - 0.5) < 3.0 * se + 0.01);
}

TEST_CASE("whole-space chain matches fresh normal moments") {
    ToyModel toy = make_toy(4, 3, 5);
    ShakingConfig cfg;
    cfg.eta = 0.6;
    cfg.rng_seed = 31337;
    auto rec = run_chain(toy, ParameterVector{{0.1, -0.2, 0.4}}, 100000, SubsetSpec::whole_space(),
                         SubsetSpec::whole_space(), cfg);
    for (int c = 0; c < 3; ++c) {
        double m = 0.0, v = 0.0;
        for (const auto& st : rec.states) m += st[c];
        m /= static_cast<double>(rec.states.size());
        for (const auto& st : rec.states) v += (st[c] - m) * (st[c] - m);
        v /= static_cast<double>(rec.states.size() - 1);
        CHECK(std::fabs(m) < 0.02);
        CHECK(std::fabs(v - 1.0) < 0.05);
    }
}
