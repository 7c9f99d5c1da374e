#include "blab/equilibrium.hpp"

#include "blab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace blab {

namespace {

void check_profile(const UserProfile& profile, std::size_t user, int users) {
    profile.validate();
    if (static_cast<int>(profile.size()) != users) throw InvalidInput("profile length must equal N");
    if (user >= profile.size()) throw InvalidInput("user index out of range");
}

UserProfile profile_from_bits(unsigned bits, int n) {
    UserProfile p;
    for (int i = 0; i < n; ++i) p.assignments.push_back((bits >> i) & 1u ? 2 : 1);
    return p;
}

const Policy& policy_of(const Policy& a1, const Policy& a2, int platform) { return platform == 1 ? a1 : a2; }

} // namespace

bool EquilibriumSet::contains(const UserProfile& p) const {
    return std::find(profiles.begin(), profiles.end(), p) != profiles.end();
}

void CurveTableOracle::add(const Policy& a, RewardCurve curve) {
    curve.validate();
    if (static_cast<int>(curve.size()) != users_) throw InvalidInput("curve length must equal N");
    curves_[a.key()] = std::move(curve);
}

const RewardCurve& CurveTableOracle::curve(const Policy& a) const {
    const auto it = curves_.find(a.key());
    if (it == curves_.end()) throw InvalidInput("no reward curve for policy " + a.key());
    return it->second;
}

UtilityEstimate CurveTableOracle::utility(const Policy& a1, const Policy& a2, const UserProfile& profile,
                                          std::size_t user) const {
    check_profile(profile, user, users_);
    const int k = profile.assignments[user];
    return reward(policy_of(a1, a2, k), profile.count(k));
}

UtilityEstimate CurveTableOracle::reward(const Policy& a, int n) const {
    if (n < 1 || n > users_) throw InvalidInput("user count out of range");
    return curve(a).estimate(n);
}

MonteCarloOracle::MonteCarloOracle(RiskySafeConfig cfg, DataMode mode, McSettings mc)
    : cfg_(std::move(cfg)), mode_(mode), mc_(mc) {
    cfg_.validate();
    if (cfg_.time_mode != TimeMode::discrete) throw UnsupportedMode("Monte-Carlo oracle needs discrete time");
}

RewardCurve MonteCarloOracle::curve(const Policy& a) const {
    const std::string key = a.key();
    {
        std::lock_guard lock(mu_);
        const auto it = curves_.find(key);
        if (it != curves_.end()) return it->second;
    }
    auto c = estimate_reward_curve(cfg_, a, mc_);
    std::lock_guard lock(mu_);
    return curves_.emplace(key, std::move(c)).first->second;
}

UtilityEstimate MonteCarloOracle::reward(const Policy& a, int n) const {
    if (n < 1 || n > cfg_.users) throw InvalidInput("user count out of range");
    return curve(a).estimate(n);
}

UtilityEstimate MonteCarloOracle::utility(const Policy& a1, const Policy& a2, const UserProfile& profile,
                                          std::size_t user) const {
    check_profile(profile, user, cfg_.users);
    const int side = profile.assignments[user];
    if (mode_ == DataMode::separate) return reward(policy_of(a1, a2, side), profile.count(side));

    const int n1 = profile.count(1);
    const std::string key = a1.key() + "|" + a2.key() + "|" + std::to_string(n1) + "|" + std::to_string(side);
    {
        std::lock_guard lock(mu_);
        const auto it = shared_.find(key);
        if (it != shared_.end()) return it->second;
    }
    UserProfile canonical;
    for (int i = 0; i < cfg_.users; ++i) canonical.assignments.push_back(i < n1 ? 1 : 2);
    const std::size_t canonical_user = side == 1 ? 0 : static_cast<std::size_t>(n1);
    const auto est = estimate_utility(cfg_, a1, a2, canonical, DataMode::shared, canonical_user, mc_);
    std::lock_guard lock(mu_);
    return shared_.emplace(key, est).first->second;
}

ClosedFormOracle::ClosedFormOracle(RiskySafeConfig cfg, DataMode mode, QuadratureSpec quad)
    : cfg_(std::move(cfg)), mode_(mode), quad_(quad) {
    cfg_.validate();
    if (cfg_.time_mode != TimeMode::continuous_undiscounted)
        throw UnsupportedMode("closed-form oracle needs continuous-undiscounted mode");
}

UtilityEstimate ClosedFormOracle::payoff(const Policy& own, const std::vector<Policy>& others) const {
    std::vector<std::string> keys;
    for (const auto& o : others) keys.push_back(o.key());
    std::sort(keys.begin(), keys.end());
    std::string key = own.key();
    for (const auto& k : keys) key += "|" + k;
    {
        std::lock_guard lock(mu_);
        const auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    const auto r = payoff_undiscounted(cfg_.p0, own, others, cfg_, quad_);
    UtilityEstimate e = UtilityEstimate::exact_value(r.value, r.error_estimate);
    e.exact = true;
    std::lock_guard lock(mu_);
    return cache_.emplace(key, e).first->second;
}

UtilityEstimate ClosedFormOracle::reward(const Policy& a, int n) const {
    if (n < 1 || n > cfg_.users) throw InvalidInput("user count out of range");
    return payoff(a, std::vector<Policy>(static_cast<std::size_t>(n - 1), a));
}

UtilityEstimate ClosedFormOracle::utility(const Policy& a1, const Policy& a2, const UserProfile& profile,
                                          std::size_t user) const {
    check_profile(profile, user, cfg_.users);
    const int side = profile.assignments[user];
    if (mode_ == DataMode::separate) return reward(policy_of(a1, a2, side), profile.count(side));
    std::vector<Policy> others;
    for (std::size_t i = 0; i < profile.size(); ++i)
        if (i != user) others.push_back(policy_of(a1, a2, profile.assignments[i]));
    return payoff(policy_of(a1, a2, side), others);
}

Comparison classify_gain(double gain, double radius, double tau) {
    if (gain - radius > tau) return Comparison::profitable;
    if (gain + radius <= tau) return Comparison::not_profitable;
    return Comparison::undecidable;
}

EquilibriumSet user_equilibria_brute(const Policy& a1, const Policy& a2, const UtilityOracle& oracle, double tau) {
    const int n = oracle.users();
    if (n > 12) throw PreconditionError("brute-force enumeration supports N <= 12");
    if (!(tau >= 0.0)) throw InvalidInput("tau must be nonnegative");

    const unsigned count = 1u << n;
    std::vector<std::vector<UtilityEstimate>> u(count, std::vector<UtilityEstimate>(n));
    double max_hw = 0.0;
    for (unsigned bits = 0; bits < count; ++bits) {
        const auto p = profile_from_bits(bits, n);
        for (int i = 0; i < n; ++i) {
            u[bits][i] = oracle.utility(a1, a2, p, static_cast<std::size_t>(i));
            max_hw = std::max(max_hw, u[bits][i].half_width);
        }
    }
    if (max_hw > 0.0 && !(tau > 2.0 * max_hw))
        throw StatisticalPowerError("tau_eq = " + format_double(tau) + " must exceed twice the oracle half-width " +
                                    format_double(max_hw));

    EquilibriumSet out;
    out.method = EquilibriumMethod::brute_force;
    out.tau = tau;
    for (unsigned bits = 0; bits < count; ++bits) {
        bool refuted = false, open = false;
        for (int i = 0; i < n && !refuted; ++i) {
            const auto& stay = u[bits][i];
            const auto& move = u[bits ^ (1u << i)][i];
            switch (classify_gain(move.mean - stay.mean, move.half_width + stay.half_width, tau)) {
            case Comparison::profitable: refuted = true; break;
            case Comparison::undecidable: open = true; break;
            case Comparison::not_profitable: break;
            }
        }
        if (refuted) continue;
        (open ? out.undecidable : out.profiles).push_back(profile_from_bits(bits, n));
    }
    return out;
}

CurveShape classify_shape(const RewardCurve& curve) {
    curve.validate();
    bool increasing = true, constant = true;
    for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
        const double d = curve.values[i + 1] - curve.values[i];
        if (!(d > curve.half_widths[i] + curve.half_widths[i + 1])) increasing = false;
        if (d != 0.0) constant = false;
    }
    if (increasing) return CurveShape::strictly_increasing;
    if (constant) return CurveShape::constant;
    return CurveShape::unknown;
}

EquilibriumSet user_equilibria_characterized(const RewardCurve& c1, const RewardCurve& c2) {
    c1.validate();
    c2.validate();
    if (c1.size() != c2.size()) throw InvalidInput("curves must have equal length");
    if (c1.shape == CurveShape::unknown || c2.shape == CurveShape::unknown)
        throw PreconditionError("curves must be tagged strictly increasing or constant");
    if (c1.shape != CurveShape::strictly_increasing && c2.shape != CurveShape::strictly_increasing)
        throw PreconditionError("at least one curve must be strictly increasing");

    const int n = static_cast<int>(c1.size());
    EquilibriumSet out;
    out.method = EquilibriumMethod::characterization;
    if (c1.at(n) >= c2.at(1)) out.profiles.push_back(UserProfile::all(n, 1));
    if (c2.at(n) >= c1.at(1)) out.profiles.push_back(UserProfile::all(n, 2));
    return out;
}

PlatformOutcome platform_utilities(const EquilibriumSet& eq) {
    if (eq.profiles.empty() && eq.undecidable.empty())
        throw ModelViolation("empty user-equilibrium set; pure equilibria must exist");
    if (eq.profiles.empty()) {
        std::vector<std::string> items;
        for (const auto& p : eq.undecidable) items.push_back(p.str());
        throw InconclusiveError("no user equilibrium could be confirmed", items);
    }
    PlatformOutcome out;
    out.v1 = out.v2 = std::numeric_limits<int>::max();
    for (const auto& p : eq.profiles) {
        out.v1 = std::min(out.v1, p.count(1));
        out.v2 = std::min(out.v2, p.count(2));
    }
    std::vector<std::string> blocking;
    for (const auto& p : eq.undecidable)
        if (p.count(1) < out.v1 || p.count(2) < out.v2) blocking.push_back(p.str());
    if (!blocking.empty())
        throw InconclusiveError("undecidable user profiles could lower a platform utility", blocking);
    return out;
}

UtilityRange platform_utility_range(const EquilibriumSet& eq, int platform) {
    if (eq.profiles.empty() && eq.undecidable.empty())
        throw ModelViolation("empty user-equilibrium set; pure equilibria must exist");
    UtilityRange r{std::numeric_limits<int>::max(), std::numeric_limits<int>::max()};
    for (const auto& p : eq.profiles) r.low = r.high = std::min(r.high, p.count(platform));
    int undecided_max = 0;
    for (const auto& p : eq.undecidable) {
        r.low = std::min(r.low, p.count(platform));
        undecided_max = std::max(undecided_max, p.count(platform));
    }
    // With nothing confirmed, some undecidable profile is a true equilibrium.
    if (eq.profiles.empty()) r.high = undecided_max;
    return r;
}

PlatformOutcome platform_equilibrium_check(const std::vector<Policy>& grid, const Policy& a1, const Policy& a2,
                                           const UtilityOracle& oracle, double tau) {
    auto in_grid = [&](const Policy& a) { return std::find(grid.begin(), grid.end(), a) != grid.end(); };
    if (!in_grid(a1) || !in_grid(a2)) throw PreconditionError("both platform policies must belong to the grid");

    const auto base_eq = user_equilibria_brute(a1, a2, oracle, tau);
    const UtilityRange base[2] = {platform_utility_range(base_eq, 1), platform_utility_range(base_eq, 2)};
    PlatformOutcome out;
    out.v1 = base[0].low;
    out.v2 = base[1].low;

    // A deviation counts only when it pays under every resolution of the
    // undecidable profiles; one that might pay leaves the check open.
    std::optional<Deviation> best;
    std::vector<std::string> open;
    for (int platform : {1, 2}) {
        const auto& b = base[platform - 1];
        for (const auto& alt : grid) {
            if (alt == (platform == 1 ? a1 : a2)) continue;
            const auto eq = platform == 1 ? user_equilibria_brute(alt, a2, oracle, tau)
                                          : user_equilibria_brute(a1, alt, oracle, tau);
            const auto dev = platform_utility_range(eq, platform);
            if (dev.low > b.high) {
                const double gain = dev.low - b.high;
                if (!best || gain > best->gain) best = Deviation{platform, alt, gain};
            } else if (dev.high > b.low) {
                open.push_back("platform " + std::to_string(platform) + " -> " + alt.key());
            }
        }
    }
    if (!best && !open.empty())
        throw InconclusiveError("undecidable user profiles leave platform deviations unresolved", open);
    out.is_equilibrium = !best.has_value();
    out.best_deviation = best;
    return out;
}

QualityReport quality_level(const Policy& a1, const Policy& a2, const EquilibriumSet& eq,
                            const UtilityOracle& oracle, const std::vector<Policy>& grid) {
    if (eq.profiles.empty()) {
        if (eq.undecidable.empty()) throw ModelViolation("empty user-equilibrium set");
        std::vector<std::string> items;
        for (const auto& p : eq.undecidable) items.push_back(p.str());
        throw InconclusiveError("no user equilibrium could be confirmed", items);
    }
    QualityReport r;
    r.Q = std::numeric_limits<double>::infinity();
    for (const auto& p : eq.profiles)
        for (std::size_t i = 0; i < p.size(); ++i) {
            const auto u = oracle.utility(a1, a2, p, i);
            if (u.mean < r.Q) {
                r.Q = u.mean;
                r.Q_half_width = u.half_width;
                r.witness_profile = p;
                r.witness_user = i;
            }
        }
    std::vector<std::string> blocking;
    for (const auto& p : eq.undecidable)
        for (std::size_t i = 0; i < p.size(); ++i)
            if (oracle.utility(a1, a2, p, i).mean < r.Q) {
                blocking.push_back(p.str());
                break;
            }
    if (!blocking.empty()) throw InconclusiveError("undecidable user profiles could lower Q", blocking);

    const std::vector<Policy> bench = grid.empty() ? std::vector<Policy>{a1, a2} : grid;
    const int n = oracle.users();
    r.lower_bench = r.upper_bench = -std::numeric_limits<double>::infinity();
    for (const auto& a : bench) {
        const auto lo = oracle.reward(a, 1), hi = oracle.reward(a, n);
        if (lo.mean > r.lower_bench) {
            r.lower_bench = lo.mean;
            r.lower_half_width = lo.half_width;
        }
        if (hi.mean > r.upper_bench) {
            r.upper_bench = hi.mean;
            r.upper_half_width = hi.half_width;
        }
    }
    return r;
}

PolicyFamily PolicyFamily::epsilon_thompson() {
    return {"epsilon-thompson", [](double e) { return Policy::epsilon_thompson(e); }};
}

PolicyFamily PolicyFamily::uniform_mixture(const Policy& base) {
    return {"uniform-mixture:" + base.key(), [base](double e) { return Policy::uniform_mixture(base, e); }};
}

PolicyFamily PolicyFamily::cutoffs() {
    return {"cutoff", [](double c) { return Policy::cutoff(c); }};
}

double tv_envelope(const RiskySafeConfig& cfg, double d_eps) {
    const double range = (std::max(cfg.h, cfg.s) - std::min(cfg.l, cfg.s)) * cfg.discount_mass();
    const double steps = static_cast<double>(cfg.users) * static_cast<double>(*cfg.horizon);
    return range * (1.0 - std::pow(1.0 - std::abs(d_eps), steps));
}

RealizedQuality find_equilibrium_with_quality(double alpha, const PolicyFamily& family, const UtilityOracle& oracle,
                                              double tol, const RealizationOptions& opts) {
    if (!(tol > 0.0)) throw InvalidInput("tolerance must be positive");
    if (opts.sweep_points < 2) throw InvalidInput("need at least two sweep points");
    const int n = oracle.users();

    struct Point {
        double eps;
        UtilityEstimate rn;
    };
    std::vector<Point> seen;
    auto eval = [&](double e) {
        Point pt{e, oracle.reward(family.make(e), n)};
        seen.push_back(pt);
        return pt;
    };

    RealizedQuality out;
    out.lower_bench = out.upper_bench = -std::numeric_limits<double>::infinity();
    std::vector<Point> sweep;
    for (int j = 0; j < opts.sweep_points; ++j) {
        const double e = static_cast<double>(j) / (opts.sweep_points - 1);
        sweep.push_back(eval(e));
        out.lower_bench = std::max(out.lower_bench, oracle.reward(family.make(e), 1).mean);
        out.upper_bench = std::max(out.upper_bench, sweep.back().rn.mean);
    }
    if (alpha < out.lower_bench - tol || alpha > out.upper_bench + tol)
        throw RangeError("target " + format_double(alpha) + " outside [" + format_double(out.lower_bench) + ", " +
                         format_double(out.upper_bench) + "]");

    auto finish = [&](const Point& pt) {
        out.policy = family.make(pt.eps);
        out.parameter = pt.eps;
        out.achieved = pt.rn;
        out.evaluations = static_cast<int>(seen.size());
        if (opts.envelope_config) {
            auto pts = seen;
            std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.eps < b.eps; });
            for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
                const double slack = pts[i].rn.half_width + pts[i + 1].rn.half_width;
                const double step = std::abs(pts[i + 1].rn.mean - pts[i].rn.mean);
                if (step > tv_envelope(*opts.envelope_config, pts[i + 1].eps - pts[i].eps) + slack)
                    out.envelope_ok = false;
            }
        }
        return out;
    };

    // Endpoints first, then any sweep point already on target.
    for (std::size_t j : {std::size_t{0}, sweep.size() - 1})
        if (std::abs(sweep[j].rn.mean - alpha) <= tol) return finish(sweep[j]);

    std::optional<std::size_t> bracket;
    for (std::size_t j = 0; j + 1 < sweep.size() && !bracket; ++j) {
        const double a = sweep[j].rn.mean - alpha, b = sweep[j + 1].rn.mean - alpha;
        if ((a <= 0.0 && b >= 0.0) || (a >= 0.0 && b <= 0.0)) bracket = j;
    }
    if (!bracket) {
        for (const auto& pt : sweep)
            if (std::abs(pt.rn.mean - alpha) <= tol) return finish(pt);
        throw RichnessViolation("family sweep does not bracket the target " + format_double(alpha));
    }

    // Bisect until well inside the tolerance; a collapsed bracket is
    // accepted anywhere within it.
    Point lo = sweep[*bracket], hi = sweep[*bracket + 1];
    Point best = std::abs(lo.rn.mean - alpha) < std::abs(hi.rn.mean - alpha) ? lo : hi;
    for (int it = 0; it < opts.max_bisections && hi.eps - lo.eps > 1e-12; ++it) {
        if (std::abs(best.rn.mean - alpha) <= 0.25 * tol) break;
        const Point mid = eval(0.5 * (lo.eps + hi.eps));
        if (std::abs(mid.rn.mean - alpha) < std::abs(best.rn.mean - alpha)) best = mid;
        const bool same_side_as_lo = (mid.rn.mean - alpha >= 0.0) == (lo.rn.mean - alpha >= 0.0);
        (same_side_as_lo ? lo : hi) = mid;
    }
    if (std::abs(best.rn.mean - alpha) > tol)
        throw RichnessViolation("R(N) jumps across the target " + format_double(alpha) + " within the family");
    return finish(best);
}

} // namespace blab
