#pragma once

#include "blab/bandit_core.hpp"
#include "blab/closed_form.hpp"
#include "blab/sim_engine.hpp"

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace blab {

enum class EquilibriumMethod { brute_force, characterization };

struct EquilibriumSet {
    std::vector<UserProfile> profiles;
    std::vector<UserProfile> undecidable; // neither confirmed nor refuted at tau
    EquilibriumMethod method = EquilibriumMethod::brute_force;
    double tau = 0.0;

    bool contains(const UserProfile& p) const;
};

// Supplies user utilities with confidence radii. Implementations must be
// safe to call from several threads.
class UtilityOracle {
public:
    virtual ~UtilityOracle() = default;
    virtual DataMode mode() const = 0;
    virtual int users() const = 0;
    virtual UtilityEstimate utility(const Policy& a1, const Policy& a2, const UserProfile& profile,
                                    std::size_t user) const = 0;
    // R_a(n): n users on one platform running a (pooled data).
    virtual UtilityEstimate reward(const Policy& a, int n) const = 0;
};

// Separate-mode oracle backed by precomputed reward curves.
class CurveTableOracle : public UtilityOracle {
public:
    explicit CurveTableOracle(int users) : users_(users) {}
    void add(const Policy& a, RewardCurve curve);

    DataMode mode() const override { return DataMode::separate; }
    int users() const override { return users_; }
    UtilityEstimate utility(const Policy& a1, const Policy& a2, const UserProfile& profile,
                            std::size_t user) const override;
    UtilityEstimate reward(const Policy& a, int n) const override;
    const RewardCurve& curve(const Policy& a) const;

private:
    int users_;
    std::map<std::string, RewardCurve> curves_;
};

// Monte-Carlo oracle. Every estimate uses the same seed, so comparisons
// between profiles run on common random numbers. Results are cached by
// canonical profile (counts per platform and the user's side).
class MonteCarloOracle : public UtilityOracle {
public:
    MonteCarloOracle(RiskySafeConfig cfg, DataMode mode, McSettings mc);

    DataMode mode() const override { return mode_; }
    int users() const override { return cfg_.users; }
    UtilityEstimate utility(const Policy& a1, const Policy& a2, const UserProfile& profile,
                            std::size_t user) const override;
    UtilityEstimate reward(const Policy& a, int n) const override;
    RewardCurve curve(const Policy& a) const;
    const RiskySafeConfig& config() const { return cfg_; }
    const McSettings& settings() const { return mc_; }

private:
    RiskySafeConfig cfg_;
    DataMode mode_;
    McSettings mc_;
    mutable std::mutex mu_;
    mutable std::map<std::string, RewardCurve> curves_;
    mutable std::map<std::string, UtilityEstimate> shared_;
};

// Exact oracle for the undiscounted continuous-time problem; radii are
// quadrature error estimates.
class ClosedFormOracle : public UtilityOracle {
public:
    ClosedFormOracle(RiskySafeConfig cfg, DataMode mode, QuadratureSpec quad = {});

    DataMode mode() const override { return mode_; }
    int users() const override { return cfg_.users; }
    UtilityEstimate utility(const Policy& a1, const Policy& a2, const UserProfile& profile,
                            std::size_t user) const override;
    UtilityEstimate reward(const Policy& a, int n) const override;

private:
    UtilityEstimate payoff(const Policy& own, const std::vector<Policy>& others) const;

    RiskySafeConfig cfg_;
    DataMode mode_;
    QuadratureSpec quad_;
    mutable std::mutex mu_;
    mutable std::map<std::string, UtilityEstimate> cache_;
};

enum class Comparison { profitable, not_profitable, undecidable };

// Deviation gain d with combined radius w against tolerance tau.
Comparison classify_gain(double gain, double radius, double tau);

EquilibriumSet user_equilibria_brute(const Policy& a1, const Policy& a2, const UtilityOracle& oracle, double tau);

// Herd-profile characterization for information-monotone curves.
EquilibriumSet user_equilibria_characterized(const RewardCurve& curve1, const RewardCurve& curve2);

// Tags a curve from its values: strictly increasing or constant when every
// step is resolved beyond the radii, unknown otherwise.
CurveShape classify_shape(const RewardCurve& curve);

struct Deviation {
    int platform = 1;
    Policy policy;
    double gain = 0.0;
};

struct PlatformOutcome {
    int v1 = 0;
    int v2 = 0;
    bool is_equilibrium = false;
    std::optional<Deviation> best_deviation;
};

PlatformOutcome platform_utilities(const EquilibriumSet& eq_set);

// Bounds on a platform's user count over the ways the undecidable profiles
// could resolve. low == high when the count is determined.
struct UtilityRange {
    int low = 0;
    int high = 0;
};

UtilityRange platform_utility_range(const EquilibriumSet& eq_set, int platform);

// A deviation is reported only when it is profitable under every resolution
// of undecidable profiles; InconclusiveError when none is certain but some
// could be. v1, v2 are the lower ends of the base ranges.

PlatformOutcome platform_equilibrium_check(const std::vector<Policy>& grid, const Policy& a1, const Policy& a2,
                                           const UtilityOracle& oracle, double tau);

struct QualityReport {
    double Q = 0.0;
    double Q_half_width = 0.0;
    double lower_bench = 0.0; // max over grid of R(1)
    double upper_bench = 0.0; // max over grid of R(N)
    double lower_half_width = 0.0;
    double upper_half_width = 0.0;
    UserProfile witness_profile;
    std::size_t witness_user = 0;
};

QualityReport quality_level(const Policy& a1, const Policy& a2, const EquilibriumSet& eq_set,
                            const UtilityOracle& oracle, const std::vector<Policy>& grid);

// One-parameter policy family, parameter in [0,1].
struct PolicyFamily {
    std::string name;
    std::function<Policy(double)> make;

    static PolicyFamily epsilon_thompson();
    static PolicyFamily uniform_mixture(const Policy& base);
    static PolicyFamily cutoffs();
};

struct RealizedQuality {
    Policy policy;
    double parameter = 0.0;
    UtilityEstimate achieved;          // R_A(N)
    double lower_bench = 0.0;          // max R(1) over the sweep
    double upper_bench = 0.0;          // max R(N) over the sweep
    bool envelope_ok = true;
    int evaluations = 0;
};

struct RealizationOptions {
    int sweep_points = 21;
    int max_bisections = 60;
    // Horizon and discount used by the total-variation envelope; the
    // envelope is skipped when unset.
    std::optional<RiskySafeConfig> envelope_config;
};

RealizedQuality find_equilibrium_with_quality(double alpha, const PolicyFamily& family,
                                              const UtilityOracle& oracle, double tol,
                                              const RealizationOptions& opts = {});

// (max r - min r) over a whole discounted episode times
// 1 - (1 - |d_eps|)^{N T}.
double tv_envelope(const RiskySafeConfig& cfg, double d_eps);

} // namespace blab
