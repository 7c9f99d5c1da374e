#include "blab/closed_form.hpp"

#include "blab/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace blab {

namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr std::size_t max_knot_breaks = 4097;

void check_kernel_config(const RiskySafeConfig& cfg) {
    if (!(cfg.sigma > 0.0) || !(cfg.h > cfg.l)) throw InvalidInput("kernel needs sigma > 0 and h > l");
}

void check_continuous(const RiskySafeConfig& cfg) {
    cfg.validate();
    if (cfg.time_mode != TimeMode::continuous_undiscounted)
        throw UnsupportedMode("closed form applies to continuous-undiscounted mode only");
}

void collect_breaks(const Policy& f, std::vector<double>& out) {
    for (double b : f.breakpoints()) out.push_back(b);
    if (f.kind() == PolicyKind::grid && f.grid_values().size() <= max_knot_breaks) {
        const std::size_t n = f.grid_values().size();
        for (std::size_t i = 1; i + 1 < n; ++i) out.push_back(static_cast<double>(i) / (n - 1));
    }
}

struct Segment {
    double a, b, value, error, l1;
    unsigned depth;
};

template <class F>
Segment gk_segment(F& f, double a, double b, unsigned depth) {
    double e = 0.0, n1 = 0.0;
    const double v = gauss_kronrod<double, 15>::integrate(f, a, b, 0, 0.0, &e, &n1);
    // Kronrod-minus-Gauss cannot resolve anything below roundoff in the sums.
    e = std::max(e, 50.0 * std::numeric_limits<double>::epsilon() * n1);
    return {a, b, v, e, n1, depth};
}

struct Integral {
    double value = 0.0, error = 0.0, l1 = 0.0;
};

// Globally adaptive GK15 over the pieces between consecutive knots: the
// segment with the largest error is bisected until the total error meets
// the tolerance. Segments at the depth limit are left alone.
template <class F>
Integral integrate_global(F& f, const std::vector<double>& knots, const QuadratureSpec& quad) {
    constexpr std::size_t max_segments = 1u << 16;
    std::vector<Segment> segs;
    std::priority_queue<std::pair<double, std::size_t>> heap;
    Integral run;
    auto place = [&](const Segment& s, std::size_t at) {
        if (at == segs.size()) segs.push_back(s);
        else segs[at] = s;
        run.value += s.value;
        run.error += s.error;
        run.l1 += s.l1;
        if (s.depth < quad.max_subdivisions) heap.emplace(s.error, at);
    };
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) place(gk_segment(f, knots[i], knots[i + 1], 0), segs.size());

    while (!heap.empty() && segs.size() < max_segments &&
           run.error > std::max(quad.abs_tol, quad.rel_tol * run.l1)) {
        const std::size_t i = heap.top().second;
        heap.pop();
        const Segment s = segs[i];
        run.value -= s.value;
        run.error -= s.error;
        run.l1 -= s.l1;
        const double m = 0.5 * (s.a + s.b);
        place(gk_segment(f, s.a, m, s.depth + 1), i);
        place(gk_segment(f, m, s.b, s.depth + 1), segs.size());
    }

    Integral out; // re-sum to shed drift from the running updates
    for (const auto& s : segs) {
        out.value += s.value;
        out.error += s.error;
        out.l1 += s.l1;
    }
    return out;
}

} // namespace

void QuadratureSpec::validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw InvalidInput("quadrature tolerances must be positive");
    if (!(endpoint_exclusion > 0.0 && endpoint_exclusion <= 1e-3))
        throw InvalidInput("endpoint exclusion must lie in (0, 1e-3]");
    if (max_subdivisions == 0) throw InvalidInput("max_subdivisions must be positive");
}

KernelBranches kernel_branches(double p, double q, const RiskySafeConfig& cfg, KernelConvention conv) {
    check_kernel_config(cfg);
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("p must lie in [0,1]");
    if (!(q > 0.0 && q < 1.0)) throw SingularityError("kernel is singular at q in {0,1}");
    const double d = cfg.h - cfg.l;
    const double c = cfg.sigma * cfg.sigma / (d * d);
    KernelBranches b;
    b.le = 2.0 * c * p / (q * q * (1.0 - q));
    const double ge_factor = conv == KernelConvention::corrected ? 2.0 : 1.0;
    b.ge = ge_factor * c * (1.0 - p) / (q * (1.0 - q) * (1.0 - q));
    b.gap = b.le - b.ge;
    return b;
}

double kernel_G(double p, double q, const RiskySafeConfig& cfg, KernelConvention conv) {
    const auto b = kernel_branches(p, q, cfg, conv);
    return p <= q ? b.le : b.ge;
}

double diffusion_phi(double p, const RiskySafeConfig& cfg) {
    const double v = p * (1.0 - p) * (cfg.h - cfg.l) / cfg.sigma;
    return v * v;
}

PayoffResult payoff_undiscounted(double p0, const Policy& f1, const std::vector<Policy>& others,
                                 const RiskySafeConfig& cfg, const QuadratureSpec& quad) {
    check_continuous(cfg);
    quad.validate();
    if (!(p0 >= 0.0 && p0 <= 1.0)) throw InvalidInput("p0 must lie in [0,1]");

    PayoffResult out;
    if (p0 == 0.0 || p0 == 1.0) return out;
    out.branch_gap = kernel_branches(p0, p0, cfg, quad.convention).gap;

    const double kb = cfg.kb();
    const double h = cfg.h, l = cfg.l, s = cfg.s;
    const double delta = quad.endpoint_exclusion;

    auto denominator = [&](double q) {
        double d = kb + f1(q);
        for (const auto& f : others) d += f(q);
        return d;
    };
    auto integrand = [&](double q) {
        const double x = f1(q);
        // Flow regret against full information, written without cancellation
        // so it stays accurate as q approaches 0 or 1.
        const double u = -(1.0 - x) * q * (h - s) + x * (1.0 - q) * (l - s);
        const double d = denominator(q);
        if (d <= 0.0) throw IllPosedError("information rate vanishes: sigma_b = inf and all policies play safe");
        return kernel_G(p0, q, cfg, quad.convention) * u / d;
    };

    if (kb == 0.0) {
        constexpr int probes = 4096;
        for (int i = 0; i < probes; ++i) {
            const double q = delta + (1.0 - 2.0 * delta) * (i + 0.5) / probes;
            if (denominator(q) <= 0.0)
                throw IllPosedError("information rate vanishes on a set of positive measure");
        }
    }

    std::vector<double> pts{delta, 1.0 - delta, p0};
    collect_breaks(f1, pts);
    for (const auto& f : others) collect_breaks(f, pts);
    // Decade knots near the ends keep each piece's integrand within a
    // bounded dynamic range when it grows like 1/q or 1/(1-q). A knot is
    // skipped when a policy break already sits nearby, to avoid slivers.
    const std::size_t hard = pts.size();
    for (double t = 10.0 * delta; t < 0.1; t *= 10.0) {
        for (double knot : {t, 1.0 - t}) {
            bool clear = true;
            for (std::size_t i = 0; i < hard; ++i)
                if (std::abs(pts[i] - knot) < 0.5 * t) clear = false;
            if (clear) pts.push_back(knot);
        }
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::remove_if(pts.begin(), pts.end(), [&](double x) { return x < delta || x > 1.0 - delta; }),
              pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    const auto [quad_value, err, l1] = integrate_global(integrand, pts, quad);
    double value = quad_value;

    // Tails [0, delta] and [1 - delta, 1]: the integrand stays bounded there
    // for policies with f(0) = 0, f(1) = 1. The midpoint value is added; its
    // error is bounded by delta times the spread of I over the tail.
    double tail_bound = 0.0;
    for (double a : {0.0, 1.0 - delta}) {
        const double mid = integrand(a + 0.5 * delta);
        double spread = 0.0;
        for (double w : {0.01, 0.25, 0.75, 0.99}) spread = std::max(spread, std::abs(integrand(a + w * delta) - mid));
        value += delta * mid;
        tail_bound += delta * spread;
    }

    if (!std::isfinite(value) || err > std::max(quad.abs_tol, quad.rel_tol * l1))
        throw ConvergenceError("quadrature tolerance not reached", value, err + tail_bound);

    out.value = value;
    out.error_estimate = err + tail_bound;
    return out;
}

RewardCurve reward_curve_closed_form(const Policy& f, const RiskySafeConfig& cfg, const QuadratureSpec& quad) {
    check_continuous(cfg);
    RewardCurve curve;
    curve.policy_id = f.key();
    curve.exact = true;
    std::vector<Policy> others;
    for (int n = 1; n <= cfg.users; ++n) {
        const auto r = payoff_undiscounted(cfg.p0, f, others, cfg, quad);
        curve.values.push_back(r.value);
        curve.half_widths.push_back(r.error_estimate);
        curve.std_errors.push_back(r.error_estimate);
        others.push_back(f);
    }
    return curve;
}

} // namespace blab
