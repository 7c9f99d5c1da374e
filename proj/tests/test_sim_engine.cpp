#include "blab/errors.hpp"
#include "blab/sim_engine.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

using namespace blab;

namespace {

McSettings mc(std::uint64_t reps, std::uint64_t seed = 11, unsigned threads = 1) {
    return {reps, seed, threads};
}

UserProfile profile_from_bits(unsigned bits, std::size_t n) {
    UserProfile p;
    for (std::size_t i = 0; i < n; ++i) p.assignments.push_back((bits >> i) & 1u ? 2 : 1);
    return p;
}

} // namespace

TEST(RunEpisode, AlwaysSafeIsDeterministic) {
    auto cfg = oracle::discrete_config(3, 4, 1.0);
    cfg.s = 0.5;
    const auto never = Policy::cutoff(1.1);
    for (unsigned bits = 0; bits < 8; ++bits)
        for (auto mode : {DataMode::separate, DataMode::shared}) {
            const auto ep = run_episode(cfg, never, never, profile_from_bits(bits, 3), mode, 5, bits);
            for (double r : ep.rewards) EXPECT_EQ(r, 2.0);
        }
    const auto est = estimate_utility(cfg, never, never, UserProfile::all(3, 1), DataMode::separate, 1, mc(1000));
    EXPECT_EQ(est.mean, 2.0);
    EXPECT_EQ(est.half_width, 0.0);
    EXPECT_TRUE(est.exact);
}

TEST(RunEpisode, BitwiseDeterministic) {
    const auto cfg = oracle::discrete_config(3);
    const auto p = profile_from_bits(5, 3);
    for (auto mode : {DataMode::separate, DataMode::shared}) {
        const auto a = run_episode(cfg, Policy::thompson(), Policy::epsilon_thompson(0.3), p, mode, 99, 12);
        const auto b = run_episode(cfg, Policy::thompson(), Policy::epsilon_thompson(0.3), p, mode, 99, 12);
        ASSERT_EQ(a.rewards.size(), b.rewards.size());
        EXPECT_EQ(std::memcmp(a.rewards.data(), b.rewards.data(), a.rewards.size() * sizeof(double)), 0);
        EXPECT_EQ(a.path, b.path);
        EXPECT_EQ(a.path.size(), 5u);
    }
}

TEST(RunEpisode, SharedModeHasOneState) {
    const auto cfg = oracle::discrete_config(3);
    const auto ep = run_episode(cfg, Policy::thompson(), Policy::epsilon_thompson(0.5), profile_from_bits(2, 3),
                                DataMode::shared, 3, 1);
    for (const auto& st : ep.path) EXPECT_EQ(st[0], st[1]);
}

TEST(RunEpisode, ContinuousModeUnsupported) {
    const auto cfg = oracle::gap_config();
    EXPECT_THROW(run_episode(cfg, Policy::thompson(), Policy::thompson(), UserProfile::all(2, 1), DataMode::shared, 1),
                 UnsupportedMode);
}

TEST(EstimateUtility, InputErrors) {
    const auto cfg = oracle::discrete_config(2);
    const auto p = UserProfile::all(2, 1);
    EXPECT_THROW(estimate_utility(cfg, Policy::thompson(), Policy::thompson(), p, DataMode::separate, 2, mc(100)),
                 InvalidInput);
    EXPECT_THROW(estimate_utility(cfg, Policy::thompson(), Policy::thompson(), p, DataMode::separate, 0, mc(1)),
                 InvalidInput);
}

TEST(EstimateUtility, SingleStepFormula) {
    auto cfg = oracle::discrete_config(4, 1, 1.0);
    const auto a = Policy::epsilon_thompson(0.3);
    const double f = a(cfg.p0);
    const double expected = cfg.s + f * (cfg.p0 * cfg.h + (1.0 - cfg.p0) * cfg.l - cfg.s);
    const auto curve = estimate_reward_curve(cfg, a, mc(200000));
    for (int n = 1; n <= 4; ++n) {
        EXPECT_EQ(curve.at(n), curve.at(1));
        EXPECT_NEAR(curve.at(n), expected, 3.0 * curve.std_errors[n - 1]);
    }
}

TEST(EstimateUtility, TwoStepQuadratureOracle) {
    // T = 2, N = 1, Thompson sampling: integrate the single intermediate
    // observation by trapezoid rule.
    auto cfg = oracle::discrete_config(1, 2, 1.0);
    const double h = cfg.h, l = cfg.l, s = cfg.s, p0 = cfg.p0;
    auto one_step = [&](double p, double theta) { return p * theta + (1.0 - p) * s; };
    double expected = 0.0;
    for (double theta : {h, l}) {
        const double prior = theta == h ? p0 : 1.0 - p0;
        double second = 0.0;
        const int m = 20001;
        const double lo = theta - 12.0, hi = theta + 12.0, dx = (hi - lo) / (m - 1);
        for (int i = 0; i < m; ++i) {
            const double x = lo + i * dx;
            const double w = (i == 0 || i == m - 1) ? 0.5 : 1.0;
            const double dens = std::exp(-0.5 * (x - theta) * (x - theta)) / std::sqrt(2.0 * M_PI);
            const double p1 = posterior_update({p0}, x, h, l, 1.0).p;
            second += w * dx * dens * one_step(p1, theta);
        }
        expected += prior * (one_step(p0, theta) + p0 * second + (1.0 - p0) * one_step(p0, theta));
    }
    const auto est = estimate_utility(cfg, Policy::thompson(), Policy::thompson(), UserProfile::all(1, 1),
                                      DataMode::separate, 0, mc(100000));
    EXPECT_NEAR(est.mean, expected, 3.0 * est.std_error);
}

TEST(EstimateUtility, MatchesExactRecursion) {
    const auto cfg = oracle::discrete_config(2, 4, 0.9);
    for (const auto& pol : {Policy::thompson(), Policy::epsilon_thompson(0.3)}) {
        const auto curve = estimate_reward_curve(cfg, pol, mc(200000, 4));
        for (int n = 1; n <= 2; ++n) {
            const oracle::ExactSharedEvaluator exact(cfg, std::vector<Policy>(n, pol));
            EXPECT_NEAR(curve.at(n), exact.value(0, cfg.p0), 3.5 * curve.std_errors[n - 1]) << pol.key() << " n=" << n;
        }
    }
}

TEST(EstimateUtility, ExactRecursionConverged) {
    const auto cfg = oracle::discrete_config(2, 4, 0.9);
    const oracle::ExactSharedEvaluator a(cfg, {Policy::thompson(), Policy::thompson()}, 20);
    const oracle::ExactSharedEvaluator b(cfg, {Policy::thompson(), Policy::thompson()}, 32);
    EXPECT_NEAR(a.value(0, 0.5), b.value(0, 0.5), 1e-6);
}

TEST(EstimateUtility, ThreadCountDoesNotChangeResult) {
    const auto cfg = oracle::discrete_config(3);
    const auto p = profile_from_bits(3, 3);
    const auto a = estimate_utility(cfg, Policy::thompson(), Policy::epsilon_thompson(0.2), p, DataMode::separate, 2,
                                    mc(30000, 8, 1));
    const auto b = estimate_utility(cfg, Policy::thompson(), Policy::epsilon_thompson(0.2), p, DataMode::separate, 2,
                                    mc(30000, 8, 4));
    EXPECT_EQ(std::memcmp(&a.mean, &b.mean, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&a.half_width, &b.half_width, sizeof(double)), 0);
}

TEST(EstimateUtility, ProfileSwapSymmetry) {
    const auto cfg = oracle::discrete_config(3);
    const auto a1 = Policy::thompson(), a2 = Policy::epsilon_thompson(0.4);
    const UserProfile p{{1, 2, 1}}, q{{2, 1, 1}};
    const auto u = estimate_utility(cfg, a1, a2, p, DataMode::shared, 0, mc(100000, 1));
    const auto v = estimate_utility(cfg, a1, a2, q, DataMode::shared, 1, mc(100000, 2));
    EXPECT_NEAR(u.mean, v.mean, u.half_width + v.half_width);
}

TEST(EstimateUtility, SharedModeSamePolicyIsProfileFree) {
    const auto cfg = oracle::discrete_config(3);
    const auto a = Policy::epsilon_thompson(0.2);
    const auto curve = estimate_reward_curve(cfg, a, mc(100000, 21));
    for (unsigned bits = 0; bits < 8; ++bits)
        for (std::size_t user = 0; user < 3; ++user) {
            const auto u = estimate_utility(cfg, a, a, profile_from_bits(bits, 3), DataMode::shared, user,
                                            mc(100000, 30 + bits));
            EXPECT_NEAR(u.mean, curve.at(3), u.half_width + curve.hw(3)) << bits << "/" << user;
        }
}

TEST(EstimateUtility, SeparateModeDependsOnOwnPlatformCount) {
    const auto cfg = oracle::discrete_config(3);
    const auto a1 = Policy::thompson(), a2 = Policy::epsilon_thompson(0.6);
    const auto u = estimate_utility(cfg, a1, a2, UserProfile{{1, 1, 2}}, DataMode::separate, 0, mc(100000, 1));
    const auto v = estimate_utility(cfg, a1, a2, UserProfile{{2, 1, 1}}, DataMode::separate, 2, mc(100000, 2));
    EXPECT_NEAR(u.mean, v.mean, u.half_width + v.half_width);
    const auto curve = estimate_reward_curve(cfg, a1, mc(100000, 3));
    EXPECT_NEAR(u.mean, curve.at(2), u.half_width + curve.hw(2));
}

TEST(EstimateUtility, DiscountTruncationBound) {
    auto cfg = oracle::discrete_config(2, 8, 0.8);
    auto short_cfg = cfg;
    const int t_short = 3;
    short_cfg.horizon = t_short;
    const auto a = Policy::thompson();
    const auto full = estimate_reward_curve(cfg, a, mc(20000, 5));
    const auto cut = estimate_reward_curve(short_cfg, a, mc(20000, 5));
    const double bound = std::max({std::abs(cfg.h), std::abs(cfg.l), std::abs(cfg.s)}) *
                         std::pow(cfg.beta, t_short + 1) / (1.0 - cfg.beta);
    for (int n = 1; n <= 2; ++n) EXPECT_LE(std::abs(full.at(n) - cut.at(n)), bound);
}

TEST(RewardCurve, NeverExploreIsConstant) {
    const auto cfg = oracle::discrete_config(4);
    const auto curve = estimate_reward_curve(cfg, Policy::cutoff(1.1), mc(1000));
    for (int n = 1; n <= 4; ++n) EXPECT_EQ(curve.at(n), curve.at(1));
    EXPECT_TRUE(curve.exact);
}

TEST(RewardCurve, ThompsonGainsFromSecondUser) {
    const auto cfg = oracle::discrete_config(2, 4, 0.9);
    PairedScenario two{{Policy::thompson(), Policy::thompson()}, UserProfile::all(2, 1), DataMode::separate, 0};
    PairedScenario one{{Policy::thompson(), Policy::thompson()}, UserProfile::all(1, 1), DataMode::separate, 0};
    const auto d = estimate_paired(cfg, two, one, mc(1000000, 6))[2];
    EXPECT_GT(d.mean - 2.576 * d.std_error, 0.0);
}

TEST(RewardCurve, BackgroundDataMatchesExactRecursion) {
    auto cfg = oracle::discrete_config(2, 3, 0.95);
    cfg.sigma_b = 1.5;
    cfg.background_at_t0 = true;
    const auto pol = Policy::epsilon_thompson(0.1);
    const auto curve = estimate_reward_curve(cfg, pol, mc(200000, 14));
    for (int n = 1; n <= 2; ++n) {
        const oracle::ExactSharedEvaluator exact(cfg, std::vector<Policy>(n, pol));
        EXPECT_NEAR(curve.at(n), exact.value(0, cfg.p0), 3.5 * curve.std_errors[n - 1]);
    }
}
