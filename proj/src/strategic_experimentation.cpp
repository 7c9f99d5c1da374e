#include "blab/strategic_experimentation.hpp"

#include "blab/equilibrium.hpp"
#include "blab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace blab {

namespace {

void check_continuous(const RiskySafeConfig& cfg) {
    cfg.validate();
    if (cfg.time_mode != TimeMode::continuous_undiscounted)
        throw UnsupportedMode("needs continuous-undiscounted mode");
}

double cutoff_payoff(const RiskySafeConfig& cfg, int n, double c, const QuadratureSpec& quad, double* err = nullptr) {
    const auto f = Policy::cutoff(c);
    const auto r = payoff_undiscounted(cfg.p0, f, std::vector<Policy>(static_cast<std::size_t>(n - 1), f), cfg, quad);
    if (err) *err = r.error_estimate;
    return r.value;
}

} // namespace

double best_response_sign(double q, double others_sum, const RiskySafeConfig& cfg) {
    if (!(q > 0.0 && q < 1.0)) throw InvalidInput("q must lie in (0,1)");
    if (cfg.time_mode != TimeMode::continuous_undiscounted)
        throw UnsupportedMode("pointwise best response needs continuous-undiscounted mode");
    const double kb = cfg.kb();
    if (kb == 0.0 && others_sum == 0.0) throw SingularityError("zero information rate: k_b = 0 and others play safe");
    const double r = q * cfg.h + (1.0 - q) * cfg.l;
    return (r - cfg.s) * (kb + others_sum) + q * (cfg.h - cfg.s);
}

BestResponse pointwise_best_response(double q, double others_sum, const RiskySafeConfig& cfg, double tau_ind) {
    const double v = best_response_sign(q, others_sum, cfg);
    if (std::abs(v) <= tau_ind) return BestResponse::indifferent;
    return v > 0.0 ? BestResponse::risky : BestResponse::safe;
}

double symmetric_root(double q, const RiskySafeConfig& cfg) {
    if (cfg.users < 2) throw PreconditionError("symmetric interior root needs N >= 2");
    const double r = q * cfg.h + (1.0 - q) * cfg.l;
    if (r >= cfg.s) return std::numeric_limits<double>::infinity();
    return (q * (cfg.h - cfg.s) / (cfg.s - r) - cfg.kb()) / (cfg.users - 1);
}

EquilibriumPolicy solve_symmetric_equilibrium(const RiskySafeConfig& cfg, int grid_size, double tau_ind) {
    check_continuous(cfg);
    if (!cfg.has_background()) throw PreconditionError("symmetric equilibrium needs sigma_b < inf");
    if (grid_size < 3) throw InvalidInput("grid needs at least 3 points");
    const int n = cfg.users;

    std::vector<double> v(static_cast<std::size_t>(grid_size));
    v.front() = 0.0;
    v.back() = 1.0;
    for (int i = 1; i + 1 < grid_size; ++i) {
        const double q = static_cast<double>(i) / (grid_size - 1);
        if (n == 1) {
            v[i] = best_response_sign(q, 0.0, cfg) >= 0.0 ? 1.0 : 0.0;
        } else {
            v[i] = std::clamp(symmetric_root(q, cfg), 0.0, 1.0);
        }
    }

    // A posteriori check of every grid point against the sign condition.
    for (int i = 1; i + 1 < grid_size; ++i) {
        const double q = static_cast<double>(i) / (grid_size - 1);
        const double x = v[i];
        const double sign = best_response_sign(q, (n - 1) * x, cfg);
        const bool ok = (x > 0.0 && x < 1.0) ? std::abs(sign) <= tau_ind
                        : x == 0.0           ? sign <= tau_ind
                                             : sign >= -tau_ind;
        if (!ok)
            throw InternalInconsistency("equilibrium check failed at q = " + format_double(q) +
                                        " (f = " + format_double(x) + ", sign = " + format_double(sign) + ")");
        if (v[i] < v[i - 1]) throw InternalInconsistency("equilibrium policy is not monotone");
    }

    EquilibriumPolicy out;
    out.grid_size = grid_size;
    int z = 0;
    while (z + 1 < grid_size && v[z + 1] == 0.0) ++z;
    int o = grid_size - 1;
    while (o > 0 && v[o - 1] == 1.0) --o;
    out.zero_region_end = static_cast<double>(z) / (grid_size - 1);
    out.one_region_start = static_cast<double>(o) / (grid_size - 1);
    out.f_star = Policy::grid(std::move(v));
    return out;
}

Policy best_response_dynamics(const RiskySafeConfig& cfg, const Policy& initial, int grid_size, int iterations) {
    check_continuous(cfg);
    if (grid_size < 3) throw InvalidInput("grid needs at least 3 points");
    const int n = cfg.users;
    std::vector<double> f(static_cast<std::size_t>(grid_size));
    for (int i = 0; i < grid_size; ++i) f[i] = initial(static_cast<double>(i) / (grid_size - 1));
    f.front() = 0.0;
    f.back() = 1.0;
    for (int k = 1; k <= iterations; ++k) {
        const double step = 1.0 / (k + 1);
        for (int i = 1; i + 1 < grid_size; ++i) {
            const double q = static_cast<double>(i) / (grid_size - 1);
            double br = f[i];
            switch (pointwise_best_response(q, (n - 1) * f[i], cfg)) {
            case BestResponse::risky: br = 1.0; break;
            case BestResponse::safe: br = 0.0; break;
            case BestResponse::indifferent: break;
            }
            f[i] += step * (br - f[i]);
        }
    }
    return Policy::grid(std::move(f));
}

TeamOptimum solve_team_optimum(const RiskySafeConfig& cfg, int n, const QuadratureSpec& quad) {
    check_continuous(cfg);
    if (n < 1) throw InvalidInput("need at least one player");
    TeamOptimum out;
    if (cfg.p0 == 0.0 || cfg.p0 == 1.0) {
        out.cutoff = (cfg.s - cfg.l) / (cfg.h - cfg.l);
        return out;
    }

    const double lo = 1e-4, hi = 1.0 - 1e-4;
    auto sample = [&](int m) {
        std::vector<std::pair<double, double>> pts;
        for (int j = 0; j < m; ++j) {
            const double c = lo + (hi - lo) * j / (m - 1);
            pts.emplace_back(c, cutoff_payoff(cfg, n, c, quad));
        }
        return pts;
    };
    auto pts = sample(101);
    auto best = std::max_element(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.second < b.second; });
    std::size_t j = static_cast<std::size_t>(best - pts.begin());

    const double slack = 1e-10;
    bool unimodal = true;
    for (std::size_t i = 1; i <= j; ++i)
        if (pts[i].second < pts[i - 1].second - slack) unimodal = false;
    for (std::size_t i = j + 1; i < pts.size(); ++i)
        if (pts[i].second > pts[i - 1].second + slack) unimodal = false;
    if (!unimodal) {
        out.dense_fallback = true;
        out.warnings.push_back("sampled objective is not unimodal; using a dense grid");
        pts = sample(2001);
        best = std::max_element(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.second < b.second; });
        j = static_cast<std::size_t>(best - pts.begin());
    }

    // Golden-section refinement between the neighbours of the best sample.
    double a = pts[j == 0 ? 0 : j - 1].first;
    double b = pts[std::min(j + 1, pts.size() - 1)].first;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = cutoff_payoff(cfg, n, x1, quad), f2 = cutoff_payoff(cfg, n, x2, quad);
    while (b - a > 1e-10) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = cutoff_payoff(cfg, n, x2, quad);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = cutoff_payoff(cfg, n, x1, quad);
        }
    }
    out.cutoff = 0.5 * (a + b);
    out.value = cutoff_payoff(cfg, n, out.cutoff, quad, &out.error_estimate);
    if (best->second > out.value) { // refinement never loses to the sampled optimum
        out.cutoff = best->first;
        out.value = cutoff_payoff(cfg, n, out.cutoff, quad, &out.error_estimate);
    }
    return out;
}

GameCheck game_G_equilibrium_check(const Policy& a, const std::vector<Policy>& grid, const RiskySafeConfig& cfg,
                                   const GameCheckOptions& opts) {
    cfg.validate();
    if (!(opts.tau >= 0.0)) throw InvalidInput("tau must be nonnegative");
    const int n = cfg.users;
    GameCheck out;
    bool open = false;

    auto consider = [&](const Policy& dev, double gain, double radius) {
        switch (classify_gain(gain, radius, opts.tau)) {
        case Comparison::profitable:
            if (!out.witness || gain > out.witness->gain) out.witness = GameWitness{dev, gain, radius};
            break;
        case Comparison::undecidable:
            open = true;
            break;
        case Comparison::not_profitable:
            break;
        }
    };

    if (cfg.time_mode == TimeMode::continuous_undiscounted) {
        const std::vector<Policy> rest(static_cast<std::size_t>(n - 1), a);
        const auto base = payoff_undiscounted(cfg.p0, a, rest, cfg, opts.quad);
        out.base_value = base.value;
        for (const auto& dev : grid) {
            const auto r = payoff_undiscounted(cfg.p0, dev, rest, cfg, opts.quad);
            consider(dev, r.value - base.value, r.error_estimate + base.error_estimate);
        }
    } else {
        UserProfile lone = UserProfile::all(static_cast<std::size_t>(n), 2);
        lone.assignments[0] = 1;
        const PairedScenario together{{a, a}, UserProfile::all(static_cast<std::size_t>(n), 1), DataMode::shared, 0};
        for (const auto& dev : grid) {
            const PairedScenario deviating{{dev, a}, lone, DataMode::shared, 0};
            const auto est = estimate_paired(cfg, deviating, together, opts.mc);
            out.base_value = est[1].mean;
            consider(dev, est[2].mean, est[2].half_width);
        }
    }

    out.is_equilibrium = !out.witness.has_value();
    out.verdict = out.witness ? Verdict::fails : open ? Verdict::inconclusive : Verdict::holds;
    return out;
}

bool explores_less(const Policy& a, const Policy& b, int grid) {
    bool strict = false;
    for (int i = 0; i < grid; ++i) {
        const double q = static_cast<double>(i) / (grid - 1);
        const double fa = a(q), fb = b(q);
        if (fa > fb) return false;
        if (fa < fb) strict = true;
    }
    return strict;
}

GapReport alpha_star_report(const RiskySafeConfig& cfg, int grid_size, const QuadratureSpec& quad) {
    check_continuous(cfg);
    if (cfg.users < 2) throw PreconditionError("the equilibrium gap needs N >= 2");
    GapReport out;
    if (cfg.p0 == 0.0 || cfg.p0 == 1.0) {
        out.degenerate = true;
        return out;
    }
    const int n = cfg.users;

    auto eq_value = [&](int g, double* err) {
        auto eq = solve_symmetric_equilibrium(cfg, g);
        const std::vector<Policy> rest(static_cast<std::size_t>(n - 1), eq.f_star);
        const auto r = payoff_undiscounted(cfg.p0, eq.f_star, rest, cfg, quad);
        *err = r.error_estimate;
        return std::make_pair(r.value, eq);
    };
    double err_fine = 0.0, err_coarse = 0.0;
    auto [alpha, eq] = eq_value(grid_size, &err_fine);
    const double alpha_coarse = eq_value((grid_size + 1) / 2, &err_coarse).first;

    const auto single = solve_team_optimum(cfg, 1, quad);
    const auto team = solve_team_optimum(cfg, n, quad);

    out.alpha_star = alpha;
    out.equilibrium = eq;
    out.single_opt = single.value;
    out.team_opt = team.value;
    out.single_cutoff = single.cutoff;
    out.team_cutoff = team.cutoff;
    out.margin_low = alpha - single.value;
    out.margin_high = team.value - alpha;
    out.error_budget = err_fine + std::abs(alpha - alpha_coarse) + single.error_estimate + team.error_estimate;

    if (out.margin_low <= out.error_budget || out.margin_high <= out.error_budget)
        throw TheoremViolation("equilibrium utility not strictly inside (single optimum, team optimum): margins " +
                               format_double(out.margin_low) + ", " + format_double(out.margin_high) +
                               " vs error budget " + format_double(out.error_budget));
    return out;
}

} // namespace blab
