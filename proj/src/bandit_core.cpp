#include "blab/bandit_core.hpp"

#include "blab/errors.hpp"
#include "blab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>

namespace blab {

namespace {

constexpr double llr_clamp = 700.0;

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 1099511628211ull;
    }
    return h;
}

void require(bool ok, const char* what) {
    if (!ok) throw InvalidInput(what);
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void RiskySafeConfig::validate() const {
    require(std::isfinite(h) && std::isfinite(l) && std::isfinite(s), "h, l, s must be finite");
    require(l < s && s < h, "invariant l < s < h violated");
    require(p0 >= 0.0 && p0 <= 1.0, "p0 must lie in [0,1]");
    require(std::isfinite(sigma) && sigma > 0.0, "sigma must be positive and finite");
    require(sigma_b > 0.0 && !std::isnan(sigma_b), "sigma_b must lie in (0, inf]");
    require(users >= 1, "N (users) must be at least 1");
    if (time_mode == TimeMode::discrete) {
        require(horizon.has_value() && *horizon >= 1, "discrete mode needs a finite horizon T >= 1");
        require(beta > 0.0 && beta <= 1.0, "discrete mode needs beta in (0,1]");
    } else {
        require(beta == 0.0, "continuous-undiscounted mode needs beta = 0");
        require(std::abs(h * p0 + s * (1.0 - p0)) <= 1e-12,
                "continuous-undiscounted mode needs the normalization h*p0 + s*(1-p0) = 0");
    }
}

double RiskySafeConfig::kb() const {
    if (!has_background()) return 0.0;
    return (sigma * sigma) / (sigma_b * sigma_b);
}

double RiskySafeConfig::discount_mass() const {
    if (!horizon) throw UnsupportedMode("discount mass needs a finite horizon");
    double total = 0.0, w = 1.0;
    for (int t = 1; t <= *horizon; ++t) {
        w *= beta;
        total += w;
    }
    return total;
}

double llr_increment(double x, double h, double l, double sigma_eff) {
    if (!std::isfinite(x)) throw InvalidInput("non-finite observation");
    if (!(sigma_eff > 0.0)) throw InvalidInput("sigma_eff must be positive");
    // log phi((x-h)/s) - log phi((x-l)/s)
    const double inc = (h - l) * (x - 0.5 * (h + l)) / (sigma_eff * sigma_eff);
    return std::clamp(inc, -llr_clamp, llr_clamp);
}

double log_odds(double p) {
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    return std::log(p) - std::log1p(-p);
}

double from_log_odds(double lo) {
    if (lo >= 0.0) return 1.0 / (1.0 + std::exp(-lo));
    const double e = std::exp(lo);
    return e / (1.0 + e);
}

InformationState posterior_update(InformationState state, double x, double h, double l, double sigma_eff) {
    if (!(state.p >= 0.0 && state.p <= 1.0)) throw InvalidInput("posterior must lie in [0,1]");
    const double inc = llr_increment(x, h, l, sigma_eff);
    if (state.p == 0.0 || state.p == 1.0) return state;
    return {from_log_odds(log_odds(state.p) + inc)};
}

Policy Policy::thompson() { return Policy(PolicyKind::thompson); }

Policy Policy::greedy(double h, double l, double s) {
    if (!(l < s && s < h)) throw InvalidInput("greedy needs l < s < h");
    Policy p(PolicyKind::greedy);
    p.h_ = h;
    p.l_ = l;
    p.s_ = s;
    p.param_ = (s - l) / (h - l);
    return p;
}

Policy Policy::epsilon_thompson(double eps) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw InvalidInput("epsilon must lie in [0,1]");
    Policy p(PolicyKind::epsilon_thompson);
    p.param_ = eps;
    return p;
}

Policy Policy::cutoff(double c) {
    if (std::isnan(c)) throw InvalidInput("cutoff must be a number");
    Policy p(PolicyKind::cutoff);
    p.param_ = c;
    return p;
}

Policy Policy::uniform_mixture(const Policy& base, double eps) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw InvalidInput("epsilon must lie in [0,1]");
    Policy p(PolicyKind::uniform_mixture);
    p.param_ = eps;
    p.base_ = std::make_shared<const Policy>(base);
    return p;
}

Policy Policy::grid(std::vector<double> values) {
    if (values.empty()) throw ConfigError("grid policy needs at least one value");
    for (double v : values)
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("grid policy values must lie in [0,1]");
    Policy p(PolicyKind::grid);
    p.values_ = std::make_shared<const std::vector<double>>(std::move(values));
    return p;
}

Policy Policy::sampled(const Policy& src, int knots) {
    if (knots < 2) throw InvalidInput("grid needs at least two knots");
    std::vector<double> v(knots);
    for (int i = 0; i < knots; ++i) v[i] = src(static_cast<double>(i) / (knots - 1));
    return grid(std::move(v));
}

const std::vector<double>& Policy::grid_values() const {
    if (kind_ != PolicyKind::grid) throw InvalidInput("not a grid policy");
    return *values_;
}

double Policy::operator()(double p) const {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("posterior must lie in [0,1]");
    switch (kind_) {
    case PolicyKind::thompson:
        return p;
    case PolicyKind::greedy:
        return p * h_ + (1.0 - p) * l_ >= s_ ? 1.0 : 0.0;
    case PolicyKind::epsilon_thompson:
        return param_ + (1.0 - param_) * p;
    case PolicyKind::cutoff:
        return p >= param_ ? 1.0 : 0.0;
    case PolicyKind::uniform_mixture:
        return 0.5 * param_ + (1.0 - param_) * (*base_)(p);
    case PolicyKind::grid: {
        const auto& v = *values_;
        if (v.size() == 1) return v[0];
        const double x = p * static_cast<double>(v.size() - 1);
        const std::size_t i = std::min(static_cast<std::size_t>(x), v.size() - 2);
        const double w = x - static_cast<double>(i);
        return v[i] + w * (v[i + 1] - v[i]);
    }
    }
    return 0.0;
}

std::vector<double> Policy::breakpoints() const {
    switch (kind_) {
    case PolicyKind::greedy:
    case PolicyKind::cutoff:
        if (param_ > 0.0 && param_ < 1.0) return {param_};
        return {};
    case PolicyKind::uniform_mixture:
        return param_ < 1.0 ? base_->breakpoints() : std::vector<double>{};
    default:
        return {};
    }
}

bool Policy::in_continuous_class() const {
    switch (kind_) {
    case PolicyKind::thompson:
    case PolicyKind::greedy:
        return true;
    case PolicyKind::epsilon_thompson:
        return param_ == 0.0;
    case PolicyKind::cutoff:
        return param_ > 0.0 && param_ < 1.0;
    case PolicyKind::uniform_mixture:
        return param_ == 0.0 && base_->in_continuous_class();
    case PolicyKind::grid:
        return values_->size() >= 2 && values_->front() == 0.0 && values_->back() == 1.0;
    }
    return false;
}

std::string Policy::kind_name() const {
    switch (kind_) {
    case PolicyKind::thompson: return "ThompsonSampling";
    case PolicyKind::greedy: return "Greedy";
    case PolicyKind::epsilon_thompson: return "EpsilonThompson";
    case PolicyKind::cutoff: return "Cutoff";
    case PolicyKind::uniform_mixture: return "UniformMixture";
    case PolicyKind::grid: return "GridFunction";
    }
    return "?";
}

std::string Policy::key() const {
    switch (kind_) {
    case PolicyKind::thompson:
        return "ts";
    case PolicyKind::greedy:
        return "greedy(" + format_double(h_) + "," + format_double(l_) + "," + format_double(s_) + ")";
    case PolicyKind::epsilon_thompson:
        return "eps_ts(" + format_double(param_) + ")";
    case PolicyKind::cutoff:
        return "cutoff(" + format_double(param_) + ")";
    case PolicyKind::uniform_mixture:
        return "mix(" + base_->key() + "," + format_double(param_) + ")";
    case PolicyKind::grid: {
        const auto& v = *values_;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(fnv1a(v.data(), v.size() * sizeof(double))));
        return "grid(" + std::to_string(v.size()) + "," + buf + ")";
    }
    }
    return "?";
}

double policy_eval(const Policy& policy, InformationState state) { return policy(state.p); }

double sample_reward(Arm arm, Truth truth, const RiskySafeConfig& cfg, const CounterRng& rng,
                     const StreamKey& key) {
    if (arm == Arm::safe) return cfg.s;
    const double mean = truth == Truth::high ? cfg.h : cfg.l;
    return mean + cfg.sigma * rng.normal(key);
}

} // namespace blab
