#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace blab {

enum class TimeMode { discrete, continuous_undiscounted };

struct RiskySafeConfig {
    double h = 1.0;
    double l = 0.0;
    double s = 0.5;
    double p0 = 0.5;
    double sigma = 1.0;
    double sigma_b = std::numeric_limits<double>::infinity(); // inf = no background data
    int users = 1;                                            // N
    std::optional<int> horizon = 1;                           // T; nullopt = infinite
    double beta = 1.0;
    TimeMode time_mode = TimeMode::discrete;
    bool background_at_t0 = false;

    // Throws InvalidInput naming the first violated invariant.
    void validate() const;

    bool has_background() const { return std::isfinite(sigma_b); }
    // sigma^2 / sigma_b^2, zero without background data.
    double kb() const;
    // Sum of beta^t for t = 1..T.
    double discount_mass() const;
};

struct InformationState {
    double p = 0.5;
};

enum class Arm { safe, risky };
enum class Truth { low, high };

InformationState posterior_update(InformationState state, double observation, double h, double l,
                                  double sigma_eff);

// Log-likelihood ratio of one observation, high vs low, clamped to +-700.
double llr_increment(double observation, double h, double l, double sigma_eff);

// Log-odds form used by the simulator; +-inf encode certainty.
double log_odds(double p);
double from_log_odds(double lo);

enum class PolicyKind { thompson, greedy, epsilon_thompson, cutoff, uniform_mixture, grid };

class Policy {
public:
    Policy() : kind_(PolicyKind::thompson) {}
    static Policy thompson();
    static Policy greedy(double h, double l, double s);
    static Policy greedy(const RiskySafeConfig& cfg) { return greedy(cfg.h, cfg.l, cfg.s); }
    static Policy epsilon_thompson(double eps);
    static Policy cutoff(double c);
    static Policy uniform_mixture(const Policy& base, double eps);
    // Values on a uniform grid over [0,1], linearly interpolated.
    static Policy grid(std::vector<double> values);
    // Samples any policy onto a uniform grid of `knots` points.
    static Policy sampled(const Policy& p, int knots = 1001);

    PolicyKind kind() const { return kind_; }
    double param() const { return param_; }
    const Policy* base() const { return base_.get(); }
    const std::vector<double>& grid_values() const;

    double operator()(double p) const;

    // Points in (0,1) where f may jump.
    std::vector<double> breakpoints() const;

    // f(0) = 0, f(1) = 1 and continuous at both ends.
    bool in_continuous_class() const;

    // Canonical identity; equal keys mean equal maps.
    std::string key() const;
    std::string kind_name() const;

    friend bool operator==(const Policy& a, const Policy& b) { return a.key() == b.key(); }

private:
    Policy(PolicyKind k) : kind_(k) {}

    PolicyKind kind_;
    double param_ = 0.0;
    double h_ = 0.0, l_ = 0.0, s_ = 0.0;
    std::shared_ptr<const Policy> base_;
    std::shared_ptr<const std::vector<double>> values_;
};

double policy_eval(const Policy& policy, InformationState state);

class CounterRng;
struct StreamKey;

double sample_reward(Arm arm, Truth truth, const RiskySafeConfig& cfg, const CounterRng& rng,
                     const StreamKey& key);

std::string format_double(double v);

} // namespace blab
