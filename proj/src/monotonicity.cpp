#include "blab/monotonicity.hpp"

#include "blab/errors.hpp"
#include "blab/rng.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>

namespace blab {

namespace {

// Two-sided normal radius multiplier for `m` simultaneous comparisons.
double bonferroni_z(double alpha, std::size_t m) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("significance must lie in (0,1)");
    const boost::math::normal_distribution<double> std_normal;
    return boost::math::quantile(std_normal, 1.0 - alpha / (2.0 * static_cast<double>(std::max<std::size_t>(m, 1))));
}

PairwiseEvidence from_mc(std::string label, const UtilityEstimate& e, double z) {
    return {std::move(label), e.mean, e.exact ? 0.0 : z * e.std_error, e.exact};
}

void require_mode(const RiskySafeConfig& cfg, EvaluationPath path) {
    const bool continuous = cfg.time_mode == TimeMode::continuous_undiscounted;
    if (path == EvaluationPath::closed_form && !continuous)
        throw UnsupportedMode("closed-form path needs continuous-undiscounted mode");
    if (path == EvaluationPath::monte_carlo && continuous)
        throw UnsupportedMode("Monte Carlo path needs discrete time");
}

std::vector<int> zero_platforms(std::size_t n) { return std::vector<int>(n, 0); }

} // namespace

std::string to_string(MonotonicityKind k) {
    switch (k) {
    case MonotonicityKind::strict_IM: return "strict_IM";
    case MonotonicityKind::info_constant: return "info_constant";
    case MonotonicityKind::side_IM: return "side_IM";
    case MonotonicityKind::increased_info: return "increased_info";
    }
    return "?";
}

MonotonicityVerdict check_strict_IM(const Policy& a, const RiskySafeConfig& cfg, const MonotonicityOptions& opts) {
    cfg.validate();
    if (cfg.users < 2) throw PreconditionError("information monotonicity needs N >= 2");
    require_mode(cfg, opts.path);
    const auto n_max = static_cast<std::size_t>(cfg.users);

    MonotonicityVerdict out;
    if (opts.path == EvaluationPath::closed_form) {
        const auto curve = reward_curve_closed_form(a, cfg, opts.quad);
        for (std::size_t n = 1; n < n_max; ++n)
            out.evidence.push_back({"R(" + std::to_string(n + 1) + ") - R(" + std::to_string(n) + ")",
                                    curve.values[n] - curve.values[n - 1],
                                    curve.half_widths[n] + curve.half_widths[n - 1], true});
    } else {
        const CounterRng rng(opts.mc.seed);
        const auto platforms = zero_platforms(n_max);
        const auto est = monte_carlo(n_max - 1, opts.mc, [&](std::uint32_t rep, std::span<double> diff) {
            std::vector<double> rewards(n_max), first(n_max);
            const Truth truth = draw_truth(rng, rep, cfg.p0);
            for (std::size_t n = 1; n <= n_max; ++n) {
                const EpisodeSetup setup{&cfg, {&a, &a}, std::span<const int>(platforms.data(), n), DataMode::separate};
                simulate_episode(setup, rng, rep, truth, cfg.p0, std::span<double>(rewards.data(), n));
                first[n - 1] = rewards[0];
            }
            for (std::size_t n = 1; n < n_max; ++n) diff[n - 1] = first[n] - first[n - 1];
        });
        const double z = bonferroni_z(opts.significance, n_max - 1);
        for (std::size_t n = 1; n < n_max; ++n)
            out.evidence.push_back(
                from_mc("R(" + std::to_string(n + 1) + ") - R(" + std::to_string(n) + ")", est[n - 1], z));
    }

    const auto& ev = out.evidence;
    auto all = [&](auto pred) { return std::all_of(ev.begin(), ev.end(), pred); };
    auto any = [&](auto pred) { return std::any_of(ev.begin(), ev.end(), pred); };
    if (all([](const PairwiseEvidence& e) { return e.tie(); })) {
        out.kind = MonotonicityKind::info_constant;
        out.verdict = Verdict::holds;
    } else if (any([](const PairwiseEvidence& e) { return e.significantly_negative(); }) ||
               any([](const PairwiseEvidence& e) { return e.exact && e.radius == 0.0 && e.difference == 0.0; })) {
        out.verdict = Verdict::fails;
    } else if (all([](const PairwiseEvidence& e) { return e.significantly_positive(); })) {
        out.verdict = Verdict::holds;
    } else {
        out.verdict = Verdict::inconclusive;
    }
    return out;
}

MonotonicityVerdict check_side_IM(const Policy& a, const std::vector<Policy>& adversaries,
                                  const RiskySafeConfig& cfg, const std::vector<int>& n_values,
                                  const MonotonicityOptions& opts) {
    cfg.validate();
    require_mode(cfg, opts.path);
    if (adversaries.empty() || n_values.empty()) throw InvalidInput("need at least one adversary and one n");
    for (int n : n_values)
        if (n < 1) throw InvalidInput("n must be positive");

    MonotonicityVerdict out;
    out.kind = MonotonicityKind::side_IM;
    for (const auto& f : adversaries) out.adversaries.push_back(f.key());
    const double z = bonferroni_z(opts.significance, adversaries.size() * n_values.size());

    std::optional<PayoffResult> solo;
    if (opts.path == EvaluationPath::closed_form) solo = payoff_undiscounted(cfg.p0, a, {}, cfg, opts.quad);

    for (const auto& f : adversaries) {
        for (int n : n_values) {
            const std::string label = "U(1; A vs " + std::to_string(n) + " x " + f.key() + ") - R_A(1)";
            if (solo) {
                const auto r = payoff_undiscounted(cfg.p0, a, std::vector<Policy>(static_cast<std::size_t>(n), f),
                                                   cfg, opts.quad);
                out.evidence.push_back({label, r.value - solo->value, r.error_estimate + solo->error_estimate, true});
            } else {
                UserProfile with(std::vector<int>(static_cast<std::size_t>(n) + 1, 2));
                with.assignments[0] = 1;
                const PairedScenario side{{a, f}, with, DataMode::shared, 0};
                const PairedScenario alone{{a, a}, UserProfile::all(1, 1), DataMode::separate, 0};
                out.evidence.push_back(from_mc(label, estimate_paired(cfg, side, alone, opts.mc)[2], z));
            }
        }
    }

    const auto& ev = out.evidence;
    if (std::any_of(ev.begin(), ev.end(), [](const PairwiseEvidence& e) { return e.significantly_negative(); }))
        out.verdict = Verdict::fails;
    else if (std::all_of(ev.begin(), ev.end(),
                         [](const PairwiseEvidence& e) { return e.significantly_positive() || e.tie(); }))
        out.verdict = Verdict::holds;
    else
        out.verdict = Verdict::inconclusive;
    return out;
}

InformativenessResult check_increased_informativeness(const RiskySafeConfig& cfg, const Policy& policy,
                                                      const MonotonicityOptions& opts) {
    cfg.validate();
    if (cfg.time_mode != TimeMode::discrete) throw UnsupportedMode("increased informativeness is checked in discrete time");

    InformativenessResult out;
    out.verdict.kind = MonotonicityKind::increased_info;
    if (cfg.p0 == 0.0 || cfg.p0 == 1.0) {
        out.verdict.degenerate = true;
        out.verdict.verdict = Verdict::inconclusive;
        out.gain = UtilityEstimate::exact_value(0.0);
        out.verdict.evidence.push_back({"E[K(p')] - K(p)", 0.0, 0.0, true});
        return out;
    }

    const CounterRng rng(opts.mc.seed);
    const std::vector<int> platform{0};
    const EpisodeSetup setup{&cfg, {&policy, &policy}, platform, DataMode::separate};
    const auto est = monte_carlo(1, opts.mc, [&](std::uint32_t rep, std::span<double> diff) {
        double informed = 0.0, plain = 0.0;
        const Truth truth = draw_truth(rng, rep, cfg.p0);
        const double mean = truth == Truth::high ? cfg.h : cfg.l;
        const double x = mean + cfg.sigma * rng.normal({rep, no_user, 0, Purpose::extra_observation});
        const double p_after = posterior_update({cfg.p0}, x, cfg.h, cfg.l, cfg.sigma).p;
        simulate_episode(setup, rng, rep, truth, p_after, std::span<double>(&informed, 1));
        simulate_episode(setup, rng, rep, truth, cfg.p0, std::span<double>(&plain, 1));
        diff[0] = informed - plain;
    });
    out.gain = est[0];
    out.verdict.evidence.push_back(from_mc("E[K(p')] - K(p)", est[0], bonferroni_z(opts.significance, 1)));

    if (cfg.horizon && *cfg.horizon == 1 && !(cfg.has_background() && cfg.background_at_t0)) {
        // One decision: K(q) = beta * (f(q) R(q) + (1 - f(q)) s).
        auto k1 = [&](double q) {
            const double f = policy(q);
            return cfg.beta * (f * (q * cfg.h + (1.0 - q) * cfg.l) + (1.0 - f) * cfg.s);
        };
        double total = 0.0, err = 0.0;
        for (Truth t : {Truth::high, Truth::low}) {
            const double w = t == Truth::high ? cfg.p0 : 1.0 - cfg.p0;
            const double mu = t == Truth::high ? cfg.h : cfg.l;
            auto integrand = [&](double z) {
                const double x = mu + cfg.sigma * z;
                return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI) *
                       k1(posterior_update({cfg.p0}, x, cfg.h, cfg.l, cfg.sigma).p);
            };
            double e = 0.0;
            total += w * boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, -12.0, 12.0, 15,
                                                                                       1e-12, &e);
            err += w * e;
        }
        const double gain = total - k1(cfg.p0);
        out.exact_t1 = UtilityEstimate::exact_value(gain, err + 1e-14);
        out.verdict.evidence.push_back({"exact T=1 gain", gain, err + 1e-14, true});
    }

    const auto& ev = out.verdict.evidence;
    if (std::any_of(ev.begin(), ev.end(), [](const PairwiseEvidence& e) { return e.significantly_negative(); }))
        out.verdict.verdict = Verdict::fails;
    else if (std::all_of(ev.begin(), ev.end(), [](const PairwiseEvidence& e) { return e.significantly_positive(); }))
        out.verdict.verdict = Verdict::holds;
    else
        out.verdict.verdict = Verdict::inconclusive;
    return out;
}

RichnessVerdict check_utility_richness(const PolicyFamily& family, const RiskySafeConfig& cfg,
                                       const RichnessOptions& opts) {
    cfg.validate();
    if (opts.points < 2) throw InvalidInput("need at least two sweep points");
    const bool continuous = cfg.time_mode == TimeMode::continuous_undiscounted;
    const int n = cfg.users;

    RichnessVerdict out;
    for (int i = 0; i < opts.points; ++i) {
        const double eps = static_cast<double>(i) / (opts.points - 1);
        const Policy a = family.make(eps);
        // Same seed for every member: common random numbers along the sweep.
        RewardCurve curve;
        if (!continuous) {
            curve = estimate_reward_curve(cfg, a, opts.mc);
        } else {
            try {
                curve = reward_curve_closed_form(a, cfg, opts.quad);
            } catch (const ConvergenceError&) {
                out.divergent.push_back(eps);
                continue;
            }
        }
        out.sweep.push_back({eps, curve.estimate(1), curve.estimate(n)});
    }

    if (out.sweep.empty()) throw ConvergenceError("every family member diverges", 0.0, 0.0);
    double max_r1 = -std::numeric_limits<double>::infinity();
    out.range_low = std::numeric_limits<double>::infinity();
    out.range_high = -std::numeric_limits<double>::infinity();
    for (const auto& pt : out.sweep) {
        max_r1 = std::max(max_r1, pt.r1.mean);
        out.range_low = std::min(out.range_low, pt.rN.mean);
        out.range_high = std::max(out.range_high, pt.rN.mean);
    }
    out.low_anchor_ok = out.range_low <= max_r1;

    out.envelope_applicable = opts.check_envelope && !continuous;
    for (std::size_t i = 0; i + 1 < out.sweep.size(); ++i) {
        const auto& a = out.sweep[i];
        const auto& b = out.sweep[i + 1];
        const double step = std::abs(b.rN.mean - a.rN.mean);
        out.max_step = std::max(out.max_step, step);
        if (out.envelope_applicable &&
            step > tv_envelope(cfg, b.parameter - a.parameter) + a.rN.half_width + b.rN.half_width)
            out.continuity_envelope_ok = false;
    }
    return out;
}

} // namespace blab
