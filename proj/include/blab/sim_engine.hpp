#pragma once

#include "blab/bandit_core.hpp"
#include "blab/rng.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace blab {

enum class DataMode { separate, shared };

// Platform (1 or 2) chosen by each user.
struct UserProfile {
    std::vector<int> assignments;

    std::size_t size() const { return assignments.size(); }
    int count(int platform) const;
    // Same profile with user i moved to the other platform.
    UserProfile switched(std::size_t i) const;
    std::string str() const;

    static UserProfile all(std::size_t n, int platform);
    void validate() const;

    friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

struct UtilityEstimate {
    double mean = 0.0;
    double half_width = 0.0; // 95% normal-approximation radius
    double std_error = 0.0;
    std::uint64_t replications = 1;
    bool exact = false;

    static UtilityEstimate exact_value(double v, double err = 0.0) {
        return {v, err, err / 1.96, 1, err == 0.0};
    }
};

enum class CurveShape { unknown, strictly_increasing, constant };

struct RewardCurve {
    std::string policy_id;
    std::vector<double> values;      // R(1..N)
    std::vector<double> half_widths;
    std::vector<double> std_errors;
    bool exact = false;
    CurveShape shape = CurveShape::unknown;

    double at(int n) const { return values.at(static_cast<std::size_t>(n - 1)); }
    double hw(int n) const { return half_widths.at(static_cast<std::size_t>(n - 1)); }
    std::size_t size() const { return values.size(); }
    UtilityEstimate estimate(int n) const;
    void validate() const;
};

struct McSettings {
    std::uint64_t replications = 100000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct EpisodeResult {
    std::vector<double> rewards;                // per user, discounted
    std::vector<std::array<double, 2>> path;    // per step start (plus final), per platform
    Truth truth = Truth::low;
};

EpisodeResult run_episode(const RiskySafeConfig& cfg, const Policy& a1, const Policy& a2,
                          const UserProfile& profile, DataMode mode, std::uint64_t seed,
                          std::uint64_t replication = 0);

// Lower-level episode driver: fixed truth and starting posterior, no path
// recording. `rewards` must have one slot per user.
struct EpisodeSetup {
    const RiskySafeConfig* cfg = nullptr;
    std::array<const Policy*, 2> policies{};
    std::span<const int> platform_of; // 0/1 per user
    DataMode mode = DataMode::separate;
};

void simulate_episode(const EpisodeSetup& setup, const CounterRng& rng, std::uint32_t replication,
                      Truth truth, double start_p, std::span<double> rewards,
                      std::vector<std::array<double, 2>>* path = nullptr);

Truth draw_truth(const CounterRng& rng, std::uint32_t replication, double p0);

// Generic replicated estimator. `sample(rep, out)` fills `k` outputs for one
// replication; moments are merged in fixed-size chunks in index order, so
// results do not depend on the thread count.
std::vector<UtilityEstimate> monte_carlo(std::size_t k, const McSettings& mc,
                                         const std::function<void(std::uint32_t, std::span<double>)>& sample);

UtilityEstimate estimate_utility(const RiskySafeConfig& cfg, const Policy& a1, const Policy& a2,
                                 const UserProfile& profile, DataMode mode, std::size_t user,
                                 const McSettings& mc);

RewardCurve estimate_reward_curve(const RiskySafeConfig& cfg, const Policy& a, const McSettings& mc);

// Utility of `user` under two scenarios on common random numbers; returns
// {first, second, first - second}.
struct PairedScenario {
    std::array<Policy, 2> policies;
    UserProfile profile;
    DataMode mode = DataMode::separate;
    std::size_t user = 0;
};

std::array<UtilityEstimate, 3> estimate_paired(const RiskySafeConfig& cfg, const PairedScenario& first,
                                               const PairedScenario& second, const McSettings& mc);

} // namespace blab
