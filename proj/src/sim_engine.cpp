#include "blab/sim_engine.hpp"

#include "blab/errors.hpp"
#include "blab/parallel.hpp"

#include <cmath>
#include <limits>

namespace blab {

namespace {

constexpr std::uint64_t chunk_size = 4096;

struct Moments {
    double n = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        n += 1.0;
        const double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }

    void merge(const Moments& b) {
        if (b.n == 0.0) return;
        if (n == 0.0) {
            *this = b;
            return;
        }
        const double total = n + b.n;
        const double d = b.mean - mean;
        mean += d * (b.n / total);
        m2 += b.m2 + d * d * (n * b.n / total);
        n = total;
    }
};

void check_discrete(const RiskySafeConfig& cfg) {
    cfg.validate();
    if (cfg.time_mode != TimeMode::discrete)
        throw UnsupportedMode("the simulator needs discrete time; use closed_form for continuous mode");
}

void check_mc(const McSettings& mc) {
    if (mc.replications < 2) throw InvalidInput("need at least 2 replications");
    if (mc.replications > std::numeric_limits<std::uint32_t>::max())
        throw InvalidInput("replication count exceeds 2^32 - 1");
}

std::vector<int> zero_based(const UserProfile& profile) {
    std::vector<int> v(profile.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = profile.assignments[i] - 1;
    return v;
}

} // namespace

int UserProfile::count(int platform) const {
    int c = 0;
    for (int a : assignments) c += a == platform;
    return c;
}

UserProfile UserProfile::switched(std::size_t i) const {
    UserProfile p = *this;
    p.assignments.at(i) = 3 - p.assignments[i];
    return p;
}

std::string UserProfile::str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (i) s += ' ';
        s += std::to_string(assignments[i]);
    }
    return s + "]";
}

UserProfile UserProfile::all(std::size_t n, int platform) {
    return {std::vector<int>(n, platform)};
}

void UserProfile::validate() const {
    if (assignments.empty()) throw InvalidInput("profile must contain at least one user");
    for (int a : assignments)
        if (a != 1 && a != 2) throw InvalidInput("profile entries must be 1 or 2");
}

UtilityEstimate RewardCurve::estimate(int n) const {
    const auto i = static_cast<std::size_t>(n - 1);
    UtilityEstimate e;
    e.mean = values.at(i);
    e.half_width = half_widths.at(i);
    e.std_error = std_errors.empty() ? half_widths[i] / 1.96 : std_errors[i];
    e.exact = exact;
    return e;
}

void RewardCurve::validate() const {
    if (values.empty()) throw InvalidInput("reward curve is empty");
    if (half_widths.size() != values.size()) throw InvalidInput("reward curve radii do not match values");
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isfinite(values[i]) || !(half_widths[i] >= 0.0))
            throw InvalidInput("reward curve entries must be finite with nonnegative radii");
}

Truth draw_truth(const CounterRng& rng, std::uint32_t replication, double p0) {
    return rng.uniform({replication, no_user, 0, Purpose::truth}) < p0 ? Truth::high : Truth::low;
}

void simulate_episode(const EpisodeSetup& setup, const CounterRng& rng, std::uint32_t rep, Truth truth,
                      double start_p, std::span<double> rewards, std::vector<std::array<double, 2>>* path) {
    const RiskySafeConfig& cfg = *setup.cfg;
    const int horizon = *cfg.horizon;
    const std::size_t n = setup.platform_of.size();
    const bool shared = setup.mode == DataMode::shared;
    const double theta = truth == Truth::high ? cfg.h : cfg.l;
    const bool background = cfg.has_background();

    std::fill(rewards.begin(), rewards.end(), 0.0);
    double lo[2];
    lo[0] = lo[1] = log_odds(start_p);

    auto apply_background = [&](std::uint32_t t) {
        const double x = theta + cfg.sigma_b * rng.normal({rep, no_user, t, Purpose::background});
        const double inc = llr_increment(x, cfg.h, cfg.l, cfg.sigma_b);
        lo[0] += inc;
        lo[1] += inc;
    };
    if (background && cfg.background_at_t0) apply_background(0);

    double w = 1.0;
    for (int t = 1; t <= horizon; ++t) {
        const auto step = static_cast<std::uint32_t>(t);
        w *= cfg.beta;
        double p[2];
        p[0] = from_log_odds(lo[0]);
        p[1] = shared ? p[0] : from_log_odds(lo[1]);
        if (path) path->push_back({p[0], p[1]});

        double inc[2] = {0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            const int k = setup.platform_of[i];
            const int state = shared ? 0 : k;
            const double f = (*setup.policies[k])(p[state]);
            const auto user = static_cast<std::uint32_t>(i);
            const bool risky = f >= 1.0 || (f > 0.0 && rng.uniform({rep, user, step, Purpose::arm}) < f);
            if (risky) {
                rewards[i] += w * theta;
                const double x = theta + cfg.sigma * rng.normal({rep, user, step, Purpose::reward_noise});
                inc[state] += llr_increment(x, cfg.h, cfg.l, cfg.sigma);
            } else {
                rewards[i] += w * cfg.s;
            }
        }
        if (shared) {
            lo[0] += inc[0];
            lo[1] = lo[0];
        } else {
            lo[0] += inc[0];
            lo[1] += inc[1];
        }
        if (background) apply_background(step);
    }
    if (path) path->push_back({from_log_odds(lo[0]), from_log_odds(lo[1])});
}

EpisodeResult run_episode(const RiskySafeConfig& cfg, const Policy& a1, const Policy& a2,
                          const UserProfile& profile, DataMode mode, std::uint64_t seed,
                          std::uint64_t replication) {
    check_discrete(cfg);
    profile.validate();
    if (static_cast<int>(profile.size()) != cfg.users) throw InvalidInput("profile length must equal N");
    if (replication > std::numeric_limits<std::uint32_t>::max()) throw InvalidInput("replication index too large");

    const CounterRng rng(seed);
    const auto rep = static_cast<std::uint32_t>(replication);
    const auto platforms = zero_based(profile);
    EpisodeSetup setup{&cfg, {&a1, &a2}, platforms, mode};

    EpisodeResult out;
    out.truth = draw_truth(rng, rep, cfg.p0);
    out.rewards.assign(profile.size(), 0.0);
    simulate_episode(setup, rng, rep, out.truth, cfg.p0, out.rewards, &out.path);
    return out;
}

std::vector<UtilityEstimate> monte_carlo(std::size_t k, const McSettings& mc,
                                         const std::function<void(std::uint32_t, std::span<double>)>& sample) {
    check_mc(mc);
    const std::uint64_t reps = mc.replications;
    const std::size_t chunks = static_cast<std::size_t>((reps + chunk_size - 1) / chunk_size);
    std::vector<std::vector<Moments>> partial(chunks, std::vector<Moments>(k));

    parallel_for(chunks, mc.threads, [&](std::size_t c) {
        std::vector<double> out(k);
        auto& acc = partial[c];
        const std::uint64_t begin = c * chunk_size;
        const std::uint64_t end = std::min(reps, begin + chunk_size);
        for (std::uint64_t r = begin; r < end; ++r) {
            sample(static_cast<std::uint32_t>(r), out);
            for (std::size_t j = 0; j < k; ++j) acc[j].add(out[j]);
        }
    });

    std::vector<Moments> total(k);
    for (const auto& chunk : partial)
        for (std::size_t j = 0; j < k; ++j) total[j].merge(chunk[j]);

    std::vector<UtilityEstimate> est(k);
    for (std::size_t j = 0; j < k; ++j) {
        auto& e = est[j];
        e.mean = total[j].mean;
        e.replications = reps;
        e.exact = total[j].m2 == 0.0;
        e.std_error = e.exact ? 0.0 : std::sqrt(total[j].m2 / (total[j].n - 1.0) / total[j].n);
        e.half_width = 1.96 * e.std_error;
    }
    return est;
}

UtilityEstimate estimate_utility(const RiskySafeConfig& cfg, const Policy& a1, const Policy& a2,
                                 const UserProfile& profile, DataMode mode, std::size_t user,
                                 const McSettings& mc) {
    check_discrete(cfg);
    profile.validate();
    if (static_cast<int>(profile.size()) != cfg.users) throw InvalidInput("profile length must equal N");
    if (user >= profile.size()) throw InvalidInput("user index out of range");

    const CounterRng rng(mc.seed);
    const auto platforms = zero_based(profile);
    const EpisodeSetup setup{&cfg, {&a1, &a2}, platforms, mode};
    return monte_carlo(1, mc, [&](std::uint32_t rep, std::span<double> out) {
        std::vector<double> rewards(platforms.size());
        simulate_episode(setup, rng, rep, draw_truth(rng, rep, cfg.p0), cfg.p0, rewards);
        out[0] = rewards[user];
    })[0];
}

RewardCurve estimate_reward_curve(const RiskySafeConfig& cfg, const Policy& a, const McSettings& mc) {
    check_discrete(cfg);
    const auto n_max = static_cast<std::size_t>(cfg.users);
    const CounterRng rng(mc.seed);
    const std::vector<int> platforms(n_max, 0);

    auto est = monte_carlo(n_max, mc, [&](std::uint32_t rep, std::span<double> out) {
        std::vector<double> rewards(n_max);
        const Truth truth = draw_truth(rng, rep, cfg.p0);
        for (std::size_t n = 1; n <= n_max; ++n) {
            const EpisodeSetup setup{&cfg, {&a, &a}, std::span<const int>(platforms.data(), n), DataMode::separate};
            simulate_episode(setup, rng, rep, truth, cfg.p0, std::span<double>(rewards.data(), n));
            out[n - 1] = rewards[0];
        }
    });

    RewardCurve curve;
    curve.policy_id = a.key();
    curve.exact = true;
    for (const auto& e : est) {
        curve.values.push_back(e.mean);
        curve.half_widths.push_back(e.half_width);
        curve.std_errors.push_back(e.std_error);
        curve.exact = curve.exact && e.exact;
    }
    return curve;
}

std::array<UtilityEstimate, 3> estimate_paired(const RiskySafeConfig& cfg, const PairedScenario& first,
                                               const PairedScenario& second, const McSettings& mc) {
    check_discrete(cfg);
    for (const auto* sc : {&first, &second}) {
        sc->profile.validate();
        if (sc->user >= sc->profile.size()) throw InvalidInput("user index out of range");
    }
    const CounterRng rng(mc.seed);
    const auto pa = zero_based(first.profile);
    const auto pb = zero_based(second.profile);
    const EpisodeSetup sa{&cfg, {&first.policies[0], &first.policies[1]}, pa, first.mode};
    const EpisodeSetup sb{&cfg, {&second.policies[0], &second.policies[1]}, pb, second.mode};

    auto est = monte_carlo(3, mc, [&](std::uint32_t rep, std::span<double> out) {
        std::vector<double> ra(pa.size()), rb(pb.size());
        const Truth truth = draw_truth(rng, rep, cfg.p0);
        simulate_episode(sa, rng, rep, truth, cfg.p0, ra);
        simulate_episode(sb, rng, rep, truth, cfg.p0, rb);
        out[0] = ra[first.user];
        out[1] = rb[second.user];
        out[2] = ra[first.user] - rb[second.user];
    });
    return {est[0], est[1], est[2]};
}

} // namespace blab
