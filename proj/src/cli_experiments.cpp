#include "blab/cli_experiments.hpp"

#include "blab/closed_form.hpp"
#include "blab/equilibrium.hpp"
#include "blab/errors.hpp"
#include "blab/monotonicity.hpp"
#include "blab/strategic_experimentation.hpp"

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#ifndef BLAB_VERSION
#define BLAB_VERSION "0.0.0"
#endif

namespace blab {

namespace {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- parsing

class Reader {
public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
        const auto m = at.Mark();
        std::ostringstream os;
        os << source_;
        if (!m.is_null()) os << ':' << m.line + 1 << ':' << m.column + 1;
        os << ": " << msg;
        throw ConfigError(os.str());
    }

    void require_map(const YAML::Node& n, const std::string& what) const {
        if (!n.IsMap()) fail(n, what + " must be a mapping");
    }

    void only_keys(const YAML::Node& n, const std::string& what, std::initializer_list<const char*> allowed) const {
        for (const auto& kv : n) {
            const auto key = kv.first.as<std::string>();
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
                fail(kv.first, "unknown key '" + key + "' in " + what);
        }
    }

    template <class T>
    T scalar(const YAML::Node& n, const std::string& field) const {
        if (!n.IsScalar()) fail(n, "field '" + field + "' must be a scalar");
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            fail(n, "field '" + field + "' has the wrong type");
        }
    }

    double number(const YAML::Node& n, const std::string& field) const {
        if (n.IsScalar()) {
            auto text = n.Scalar();
            std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
            if (text == "inf" || text == "infinity" || text == ".inf" || text == "+inf")
                return std::numeric_limits<double>::infinity();
        }
        return scalar<double>(n, field);
    }

    template <class T>
    void maybe(const YAML::Node& parent, const char* key, T& out) const {
        if (const auto n = parent[key]) out = scalar<T>(n, key);
    }

    void maybe_number(const YAML::Node& parent, const char* key, double& out) const {
        if (const auto n = parent[key]) out = number(n, key);
    }

    const std::string& source() const { return source_; }

private:
    std::string source_;
};

Policy parse_policy(const Reader& r, const YAML::Node& n, const RiskySafeConfig& problem, std::string* name) {
    r.require_map(n, "policy");
    const auto kind_node = n["kind"];
    if (!kind_node) r.fail(n, "policy needs a 'kind'");
    const auto kind = r.scalar<std::string>(kind_node, "kind");
    if (name) r.maybe(n, "name", *name);
    auto number = [&](const char* key) {
        const auto v = n[key];
        if (!v) r.fail(n, kind + " needs '" + key + "'");
        return r.number(v, key);
    };
    try {
        if (kind == "ThompsonSampling") {
            r.only_keys(n, "policy", {"kind", "name"});
            return Policy::thompson();
        }
        if (kind == "Greedy") {
            r.only_keys(n, "policy", {"kind", "name"});
            return Policy::greedy(problem);
        }
        if (kind == "EpsilonThompson") {
            r.only_keys(n, "policy", {"kind", "name", "epsilon"});
            return Policy::epsilon_thompson(number("epsilon"));
        }
        if (kind == "Cutoff") {
            r.only_keys(n, "policy", {"kind", "name", "c"});
            return Policy::cutoff(number("c"));
        }
        if (kind == "UniformMixture") {
            r.only_keys(n, "policy", {"kind", "name", "epsilon", "base"});
            const auto base = n["base"];
            if (!base) r.fail(n, "UniformMixture needs 'base'");
            return Policy::uniform_mixture(parse_policy(r, base, problem, nullptr), number("epsilon"));
        }
        if (kind == "GridFunction") {
            r.only_keys(n, "policy", {"kind", "name", "values"});
            const auto v = n["values"];
            if (!v || !v.IsSequence()) r.fail(n, "GridFunction needs a 'values' list");
            std::vector<double> values;
            for (const auto& x : v) values.push_back(r.number(x, "values"));
            return Policy::grid(std::move(values));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        r.fail(n, e.what());
    }
    r.fail(kind_node, "unknown policy kind '" + kind + "'");
}

ExperimentKind parse_kind(const Reader& r, const YAML::Node& n) {
    static const std::map<std::string, ExperimentKind> kinds{
        {"reward-curve", ExperimentKind::reward_curve}, {"user-eq", ExperimentKind::user_eq},
        {"platform-eq", ExperimentKind::platform_eq},   {"shared-eq", ExperimentKind::shared_eq},
        {"monotonicity", ExperimentKind::monotonicity}, {"richness", ExperimentKind::richness},
        {"table1", ExperimentKind::table1},             {"alpha-star", ExperimentKind::alpha_star}};
    const auto name = r.scalar<std::string>(n, "kind");
    const auto it = kinds.find(name);
    if (it == kinds.end()) r.fail(n, "unknown experiment '" + name + "'");
    return it->second;
}

OutputFormat parse_format(const std::string& f) {
    if (f == "csv") return OutputFormat::csv;
    if (f == "json") return OutputFormat::json;
    if (f == "both") return OutputFormat::both;
    throw ConfigError("output format must be csv, json or both (got '" + f + "')");
}

void parse_problem(const Reader& r, const YAML::Node& n, RiskySafeConfig& c) {
    r.require_map(n, "problem");
    r.only_keys(n, "problem",
                {"h", "l", "s", "p0", "sigma", "sigma_b", "users", "horizon", "beta", "time_mode", "background_at_t0"});
    if (const auto m = n["time_mode"]) {
        const auto mode = r.scalar<std::string>(m, "time_mode");
        if (mode == "discrete") c.time_mode = TimeMode::discrete;
        else if (mode == "continuous") c.time_mode = TimeMode::continuous_undiscounted;
        else r.fail(m, "time_mode must be 'discrete' or 'continuous'");
    }
    if (c.time_mode == TimeMode::continuous_undiscounted) {
        c.beta = 0.0;
        c.horizon.reset();
    }
    r.maybe_number(n, "h", c.h);
    r.maybe_number(n, "l", c.l);
    r.maybe_number(n, "s", c.s);
    r.maybe_number(n, "p0", c.p0);
    r.maybe_number(n, "sigma", c.sigma);
    r.maybe_number(n, "sigma_b", c.sigma_b);
    r.maybe(n, "users", c.users);
    r.maybe_number(n, "beta", c.beta);
    r.maybe(n, "background_at_t0", c.background_at_t0);
    if (const auto t = n["horizon"]) c.horizon = r.scalar<int>(t, "horizon");
    try {
        c.validate();
    } catch (const Error& e) {
        r.fail(n, e.what());
    }
}

json policy_json(const Policy& p) {
    json j;
    j["kind"] = p.kind_name();
    switch (p.kind()) {
    case PolicyKind::epsilon_thompson:
        j["epsilon"] = p.param();
        break;
    case PolicyKind::cutoff:
        j["c"] = p.param();
        break;
    case PolicyKind::uniform_mixture:
        j["epsilon"] = p.param();
        j["base"] = policy_json(*p.base());
        break;
    case PolicyKind::grid:
        j["values"] = p.grid_values();
        break;
    default:
        break;
    }
    return j;
}

std::string kind_token(ExperimentKind k) { return to_string(k); }

// ---------------------------------------------------------------- experiments

struct Context {
    const ScenarioConfig& sc;
    RunOutcome& out;
    std::string name;

    void row(std::string quantity, double value, double hw, int n, std::string policy, std::string tags = "") {
        out.rows.push_back({name, std::move(quantity), value, hw, n, std::move(policy), std::move(tags)});
    }
    void row(std::string quantity, const UtilityEstimate& e, int n, std::string policy, std::string tags = "") {
        row(std::move(quantity), e.mean, e.half_width, n, std::move(policy), std::move(tags));
    }
};

bool continuous(const RiskySafeConfig& c) { return c.time_mode == TimeMode::continuous_undiscounted; }

double verdict_value(Verdict v) {
    switch (v) {
    case Verdict::holds: return 1.0;
    case Verdict::fails: return 0.0;
    case Verdict::inconclusive: return -1.0;
    }
    return -1.0;
}

std::vector<Policy> grid_of(const ScenarioConfig& sc) {
    std::vector<Policy> g;
    for (const auto& p : sc.policies) g.push_back(p.policy);
    return g;
}

std::unique_ptr<UtilityOracle> make_oracle(const ScenarioConfig& sc, DataMode mode) {
    if (continuous(sc.problem)) return std::make_unique<ClosedFormOracle>(sc.problem, mode);
    return std::make_unique<MonteCarloOracle>(sc.problem, mode, sc.mc());
}

// Largest R(n) half-width over the grid; drives the default tolerance.
double max_half_width(const UtilityOracle& oracle, const std::vector<Policy>& grid) {
    double w = 0.0;
    for (const auto& a : grid)
        for (int n = 1; n <= oracle.users(); ++n) w = std::max(w, oracle.reward(a, n).half_width);
    return w;
}

double equilibrium_tau(const ScenarioConfig& sc, const UtilityOracle& oracle, const std::vector<Policy>& grid) {
    if (sc.experiment.tau) return *sc.experiment.tau;
    const double w = max_half_width(oracle, grid);
    return w > 0.0 ? 5.0 * w : 1e-9;
}

PolicyFamily family_of(const ScenarioConfig& sc) {
    const auto& f = sc.experiment.family;
    if (f == "epsilon_thompson") return PolicyFamily::epsilon_thompson();
    if (f == "uniform_mixture") return PolicyFamily::uniform_mixture(sc.experiment.family_base);
    if (f == "cutoffs") return PolicyFamily::cutoffs();
    throw ConfigError("unknown policy family '" + f + "'");
}

const std::string& name_of(const ScenarioConfig& sc, std::size_t i) { return sc.policies[i].name; }

void run_reward_curve(Context& cx) {
    const auto& cfg = cx.sc.problem;
    for (const auto& np : cx.sc.policies) {
        const auto curve = continuous(cfg) ? reward_curve_closed_form(np.policy, cfg)
                                           : estimate_reward_curve(cfg, np.policy, cx.sc.mc());
        const auto shape = classify_shape(curve);
        const std::string tag = shape == CurveShape::strictly_increasing ? "shape=strictly_increasing"
                                : shape == CurveShape::constant          ? "shape=constant"
                                                                         : "shape=unknown";
        for (int n = 1; n <= cfg.users; ++n) cx.row("R", curve.estimate(n), n, np.name, tag);
    }
}

void run_user_eq(Context& cx) {
    const auto grid = grid_of(cx.sc);
    const auto oracle = make_oracle(cx.sc, DataMode::separate);
    const double tau = equilibrium_tau(cx.sc, *oracle, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t j = i; j < grid.size(); ++j) {
            const auto eq = user_equilibria_brute(grid[i], grid[j], *oracle, tau);
            const std::string pair = name_of(cx.sc, i) + "|" + name_of(cx.sc, j);
            for (const auto& p : eq.profiles)
                cx.row("user_equilibrium", p.count(1), 0.0, cx.sc.problem.users, pair, "profile=" + p.str());
            for (const auto& p : eq.undecidable)
                cx.row("undecidable_profile", p.count(1), 0.0, cx.sc.problem.users, pair, "profile=" + p.str());
            if (!eq.undecidable.empty()) cx.out.inconclusive = true;
        }
    }
    cx.row("tau", tau, 0.0, 0, "", "");
}

void platform_pairs(Context& cx, DataMode mode, const std::string& label) {
    const auto grid = grid_of(cx.sc);
    const auto oracle = make_oracle(cx.sc, mode);
    const double tau = equilibrium_tau(cx.sc, *oracle, grid);
    const std::string mode_tag = mode == DataMode::shared ? "mode=shared" : "mode=separate";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t j = i; j < grid.size(); ++j) {
            const std::string pair = name_of(cx.sc, i) + "|" + name_of(cx.sc, j);
            try {
                const auto outcome = platform_equilibrium_check(grid, grid[i], grid[j], *oracle, tau);
                std::string tags = mode_tag;
                if (outcome.best_deviation)
                    tags += ";deviation=" + std::to_string(outcome.best_deviation->platform) + ":" +
                            outcome.best_deviation->policy.key() +
                            ";gain=" + format_double(outcome.best_deviation->gain);
                cx.row(label, outcome.is_equilibrium ? 1.0 : 0.0, 0.0, cx.sc.problem.users, pair, tags);
                if (outcome.is_equilibrium) {
                    const auto eq = user_equilibria_brute(grid[i], grid[j], *oracle, tau);
                    const auto q = quality_level(grid[i], grid[j], eq, *oracle, grid);
                    cx.row("Q", q.Q, q.Q_half_width, cx.sc.problem.users, pair,
                           mode_tag + ";lower_bench=" + format_double(q.lower_bench) +
                               ";upper_bench=" + format_double(q.upper_bench));
                }
            } catch (const InconclusiveError& e) {
                cx.out.inconclusive = true;
                cx.row(label, -1.0, 0.0, cx.sc.problem.users, pair, mode_tag + ";verdict=inconclusive");
            }
        }
    }
    cx.row("tau", tau, 0.0, 0, "", mode_tag);
}

void run_shared_eq(Context& cx) {
    platform_pairs(cx, DataMode::shared, "platform_equilibrium");
    const auto grid = grid_of(cx.sc);
    GameCheckOptions opts;
    opts.mc = cx.sc.mc();
    const auto oracle = make_oracle(cx.sc, DataMode::shared);
    opts.tau = equilibrium_tau(cx.sc, *oracle, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto check = game_G_equilibrium_check(grid[i], grid, cx.sc.problem, opts);
        if (check.verdict == Verdict::inconclusive) cx.out.inconclusive = true;
        std::string tags = "verdict=" + to_string(check.verdict);
        if (check.witness) tags += ";witness=" + check.witness->policy.key() + ";gain=" + format_double(check.witness->gain);
        cx.row("game_G_equilibrium", verdict_value(check.verdict), 0.0, cx.sc.problem.users, name_of(cx.sc, i), tags);
    }
}

void monotonicity_rows(Context& cx, const std::string& policy, const MonotonicityVerdict& v) {
    const std::string kind = to_string(v.kind);
    for (const auto& e : v.evidence) cx.row(kind + ":" + e.label, e.difference, e.radius, 0, policy);
    cx.row(kind, verdict_value(v.verdict), 0.0, 0, policy, "verdict=" + to_string(v.verdict));
    if (v.verdict == Verdict::inconclusive) cx.out.inconclusive = true;
}

void run_monotonicity(Context& cx) {
    const auto& cfg = cx.sc.problem;
    MonotonicityOptions opts;
    opts.path = continuous(cfg) ? EvaluationPath::closed_form : EvaluationPath::monte_carlo;
    opts.significance = cx.sc.experiment.significance;
    opts.mc = cx.sc.mc();
    const auto grid = grid_of(cx.sc);
    std::vector<int> n_values;
    for (int n = 1; n < cfg.users; ++n) n_values.push_back(n);

    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& name = name_of(cx.sc, i);
        if (cfg.users >= 2) {
            monotonicity_rows(cx, name, check_strict_IM(grid[i], cfg, opts));
            monotonicity_rows(cx, name, check_side_IM(grid[i], grid, cfg, n_values, opts));
        }
        if (!continuous(cfg)) {
            const auto info = check_increased_informativeness(cfg, grid[i], opts);
            if (info.verdict.degenerate) cx.out.notes.push_back("degenerate prior: increased informativeness skipped");
            monotonicity_rows(cx, name, info.verdict);
        }
    }
}

void run_richness(Context& cx) {
    RichnessOptions opts;
    opts.points = cx.sc.experiment.family_points;
    opts.mc = cx.sc.mc();
    opts.check_envelope = cx.sc.experiment.family != "cutoffs";
    const auto family = family_of(cx.sc);
    const auto r = check_utility_richness(family, cx.sc.problem, opts);
    const int n = cx.sc.problem.users;
    for (const auto& pt : r.sweep) {
        const std::string tag = "parameter=" + format_double(pt.parameter);
        cx.row("R", pt.r1, 1, family.name, tag);
        cx.row("R", pt.rN, n, family.name, tag);
    }
    for (double d : r.divergent) cx.row("divergent_member", d, 0.0, n, family.name);
    cx.row("range_low", r.range_low, 0.0, n, family.name);
    cx.row("range_high", r.range_high, 0.0, n, family.name);
    cx.row("max_step", r.max_step, 0.0, n, family.name);
    cx.row("continuity_envelope_ok", r.continuity_envelope_ok ? 1.0 : 0.0, 0.0, n, family.name,
           r.envelope_applicable ? "applicable=1" : "applicable=0");
    cx.row("low_anchor_ok", r.low_anchor_ok ? 1.0 : 0.0, 0.0, n, family.name);
}

void run_alpha_star(Context& cx) {
    const auto r = alpha_star_report(cx.sc.problem, cx.sc.experiment.grid_size);
    const int n = cx.sc.problem.users;
    const std::string tag = r.degenerate ? "degenerate=1" : "";
    cx.row("alpha_star", r.alpha_star, r.error_budget, n, "f*", tag);
    cx.row("single_opt", r.single_opt, 0.0, 1, "cutoff", tag);
    cx.row("team_opt", r.team_opt, 0.0, n, "cutoff", tag);
    cx.row("margin_low", r.margin_low, r.error_budget, n, "", tag);
    cx.row("margin_high", r.margin_high, r.error_budget, n, "", tag);
    cx.row("single_cutoff", r.single_cutoff, 0.0, 1, "cutoff", tag);
    cx.row("team_cutoff", r.team_cutoff, 0.0, n, "cutoff", tag);
}

void table1_single_user(Context& cx) {
    const auto grid = grid_of(cx.sc);
    for (DataMode mode : {DataMode::separate, DataMode::shared}) {
        const auto oracle = make_oracle(cx.sc, mode);
        const double tau = equilibrium_tau(cx.sc, *oracle, grid);
        const std::string label = mode == DataMode::shared ? "single-user, shared" : "single-user, separate";
        double bench = -std::numeric_limits<double>::infinity(), bench_hw = 0.0;
        for (const auto& a : grid) {
            const auto r1 = oracle->reward(a, 1);
            if (r1.mean > bench) bench = r1.mean, bench_hw = r1.half_width;
        }
        double worst = std::numeric_limits<double>::infinity(), worst_hw = 0.0;
        int equilibria = 0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            for (std::size_t j = i; j < grid.size(); ++j) {
                try {
                    const auto outcome = platform_equilibrium_check(grid, grid[i], grid[j], *oracle, tau);
                    if (!outcome.is_equilibrium) continue;
                    const auto eq = user_equilibria_brute(grid[i], grid[j], *oracle, tau);
                    const auto q = quality_level(grid[i], grid[j], eq, *oracle, grid);
                    ++equilibria;
                    cx.row("Q", q.Q, q.Q_half_width, 1, name_of(cx.sc, i) + "|" + name_of(cx.sc, j), label);
                    if (q.Q < worst) worst = q.Q, worst_hw = q.Q_half_width;
                } catch (const InconclusiveError&) {
                    cx.out.inconclusive = true;
                }
            }
        }
        cx.row("max R(1)", bench, bench_hw, 1, "", label);
        if (equilibria > 0) cx.row(label, worst, worst_hw, 1, "", "equilibria=" + std::to_string(equilibria));
        else cx.out.notes.push_back(label + ": no platform equilibrium on the grid");
    }
}

void table1_multi_user(Context& cx) {
    const auto& cfg = cx.sc.problem;
    const int n = cfg.users;
    const auto family = family_of(cx.sc);
    const int points = cx.sc.experiment.family_points;
    std::vector<Policy> sweep;
    for (int i = 0; i < points; ++i) sweep.push_back(family.make(static_cast<double>(i) / (points - 1)));

    // Separate data: realizability of every target in [max R(1), max R(N)].
    const auto oracle = make_oracle(cx.sc, DataMode::separate);
    double lo = -std::numeric_limits<double>::infinity(), hi = lo;
    for (const auto& a : sweep) {
        lo = std::max(lo, oracle->reward(a, 1).mean);
        hi = std::max(hi, oracle->reward(a, n).mean);
    }
    const double w = max_half_width(*oracle, sweep);
    const double tau = cx.sc.experiment.tau.value_or(w > 0.0 ? 5.0 * w : 1e-9);
    // Bisect to twice the narrowest R(N) interval so the realized policy
    // meets the target within its own 2 half-widths.
    double w_n = std::numeric_limits<double>::infinity();
    for (const auto& a : sweep) w_n = std::min(w_n, oracle->reward(a, n).half_width);
    const double tol = w_n > 0.0 ? 2.0 * w_n : 1e-6;
    cx.row("max R(1)", lo, 0.0, 1, family.name, "multi-user, separate");
    cx.row("max R(N)", hi, 0.0, n, family.name, "multi-user, separate");
    RealizationOptions ropts;
    ropts.sweep_points = points;
    if (!continuous(cfg)) ropts.envelope_config = cfg;
    const int targets = std::max(1, cx.sc.experiment.targets);
    for (int k = 0; k < targets; ++k) {
        const double alpha = targets == 1 ? lo : lo + (hi - lo) * k / (targets - 1);
        const std::string tag = "target=" + format_double(alpha);
        try {
            const auto r = find_equilibrium_with_quality(alpha, family, *oracle, tol, ropts);
            auto grid = sweep;
            if (std::find(grid.begin(), grid.end(), r.policy) == grid.end()) grid.push_back(r.policy);
            const auto outcome = platform_equilibrium_check(grid, r.policy, r.policy, *oracle, tau);
            cx.row("multi-user, separate", r.achieved, n, r.policy.key(),
                   tag + ";parameter=" + format_double(r.parameter) +
                       ";equilibrium=" + (outcome.is_equilibrium ? "1" : "0"));
        } catch (const InconclusiveError&) {
            cx.out.inconclusive = true;
            cx.out.notes.push_back("target " + format_double(alpha) + " inconclusive");
        }
    }

    // Shared data.
    if (continuous(cfg)) {
        const auto r = alpha_star_report(cfg, cx.sc.experiment.grid_size);
        cx.row("multi-user, shared", r.alpha_star, r.error_budget, n, "f*",
               "single_opt=" + format_double(r.single_opt) + ";team_opt=" + format_double(r.team_opt));
        return;
    }
    GameCheckOptions gopts;
    gopts.tau = tau;
    gopts.mc = cx.sc.mc();
    for (const auto& a : sweep) {
        const auto check = game_G_equilibrium_check(a, sweep, cfg, gopts);
        if (check.verdict == Verdict::inconclusive) cx.out.inconclusive = true;
        if (check.verdict != Verdict::holds) continue;
        cx.row("multi-user, shared", oracle->reward(a, n), n, a.key(), "verdict=holds");
    }
}

void run_table1(Context& cx) {
    if (cx.sc.problem.users == 1) table1_single_user(cx);
    else table1_multi_user(cx);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write " + p.string());
    f << text;
}

} // namespace

std::string to_string(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::reward_curve: return "reward-curve";
    case ExperimentKind::user_eq: return "user-eq";
    case ExperimentKind::platform_eq: return "platform-eq";
    case ExperimentKind::shared_eq: return "shared-eq";
    case ExperimentKind::monotonicity: return "monotonicity";
    case ExperimentKind::richness: return "richness";
    case ExperimentKind::table1: return "table1";
    case ExperimentKind::alpha_star: return "alpha-star";
    }
    return "?";
}

std::string to_string(OutputFormat f) {
    switch (f) {
    case OutputFormat::csv: return "csv";
    case OutputFormat::json: return "json";
    case OutputFormat::both: return "both";
    }
    return "?";
}

ScenarioConfig parse_scenario(const std::string& text, const std::string& source) {
    const Reader r(source);
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                          ": " + e.msg);
    }
    r.require_map(root, "scenario");
    r.only_keys(root, "scenario", {"problem", "policies", "experiment", "seeds", "output"});

    ScenarioConfig sc;
    const auto problem = root["problem"];
    if (!problem) r.fail(root, "missing 'problem'");
    parse_problem(r, problem, sc.problem);

    if (const auto ps = root["policies"]) {
        if (!ps.IsSequence()) r.fail(ps, "'policies' must be a list");
        std::set<std::string> names;
        for (const auto& p : ps) {
            std::string name;
            const Policy policy = parse_policy(r, p, sc.problem, &name);
            if (name.empty()) name = policy.key();
            if (!names.insert(name).second) r.fail(p, "duplicate policy name '" + name + "'");
            sc.policies.push_back({name, policy});
        }
    }

    const auto ex = root["experiment"];
    if (!ex) r.fail(root, "missing 'experiment'");
    r.require_map(ex, "experiment");
    r.only_keys(ex, "experiment",
                {"kind", "tau", "family", "family_base", "family_points", "targets", "significance", "grid_size"});
    if (!ex["kind"]) r.fail(ex, "experiment needs a 'kind'");
    sc.experiment.kind = parse_kind(r, ex["kind"]);
    if (const auto t = ex["tau"]) sc.experiment.tau = r.number(t, "tau");
    r.maybe(ex, "family", sc.experiment.family);
    if (const auto b = ex["family_base"]) sc.experiment.family_base = parse_policy(r, b, sc.problem, nullptr);
    r.maybe(ex, "family_points", sc.experiment.family_points);
    r.maybe(ex, "targets", sc.experiment.targets);
    r.maybe_number(ex, "significance", sc.experiment.significance);
    r.maybe(ex, "grid_size", sc.experiment.grid_size);
    if (sc.experiment.family != "epsilon_thompson" && sc.experiment.family != "uniform_mixture" &&
        sc.experiment.family != "cutoffs")
        r.fail(ex["family"], "family must be epsilon_thompson, uniform_mixture or cutoffs");
    if (sc.experiment.family_points < 2) r.fail(ex, "family_points must be at least 2");
    if (sc.experiment.targets < 1) r.fail(ex, "targets must be at least 1");
    if (!(sc.experiment.significance > 0.0 && sc.experiment.significance < 1.0))
        r.fail(ex, "significance must lie in (0,1)");
    if (sc.experiment.tau && !(*sc.experiment.tau > 0.0)) r.fail(ex["tau"], "tau must be positive");

    const auto kind = sc.experiment.kind;
    const bool needs_grid = kind != ExperimentKind::richness && kind != ExperimentKind::alpha_star &&
                            !(kind == ExperimentKind::table1 && sc.problem.users > 1);
    if (needs_grid && sc.policies.empty()) r.fail(root, "experiment '" + to_string(kind) + "' needs a policy list");
    if (kind == ExperimentKind::alpha_star && !continuous(sc.problem))
        r.fail(problem, "alpha-star needs time_mode: continuous");

    if (const auto s = root["seeds"]) {
        r.require_map(s, "seeds");
        r.only_keys(s, "seeds", {"master", "replications", "threads"});
        r.maybe(s, "master", sc.seeds.master);
        r.maybe(s, "replications", sc.seeds.replications);
        r.maybe(s, "threads", sc.seeds.threads);
        if (sc.seeds.replications < 2) r.fail(s, "replications must be at least 2");
    }
    if (const auto o = root["output"]) {
        r.require_map(o, "output");
        r.only_keys(o, "output", {"directory", "format"});
        r.maybe(o, "directory", sc.output.directory);
        if (const auto f = o["format"]) {
            try {
                sc.output.format = parse_format(r.scalar<std::string>(f, "format"));
            } catch (const ConfigError& e) {
                r.fail(f, e.what());
            }
        }
    }
    return sc;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError(path + ": cannot open file");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_scenario(ss.str(), path);
}

std::string resolved_config_json(const ScenarioConfig& sc) {
    const auto& c = sc.problem;
    json j;
    json p;
    p["h"] = c.h;
    p["l"] = c.l;
    p["s"] = c.s;
    p["p0"] = c.p0;
    p["sigma"] = c.sigma;
    if (c.has_background()) p["sigma_b"] = c.sigma_b;
    else p["sigma_b"] = "inf";
    p["users"] = c.users;
    if (c.horizon) p["horizon"] = *c.horizon;
    p["beta"] = c.beta;
    p["time_mode"] = continuous(c) ? "continuous" : "discrete";
    p["background_at_t0"] = c.background_at_t0;
    j["problem"] = p;
    json pols = json::array();
    for (const auto& np : sc.policies) {
        auto pj = policy_json(np.policy);
        pj["name"] = np.name;
        pols.push_back(pj);
    }
    j["policies"] = pols;
    json e;
    e["kind"] = kind_token(sc.experiment.kind);
    if (sc.experiment.tau) e["tau"] = *sc.experiment.tau;
    e["family"] = sc.experiment.family;
    e["family_base"] = policy_json(sc.experiment.family_base);
    e["family_points"] = sc.experiment.family_points;
    e["targets"] = sc.experiment.targets;
    e["significance"] = sc.experiment.significance;
    e["grid_size"] = sc.experiment.grid_size;
    j["experiment"] = e;
    j["seeds"] = {{"master", sc.seeds.master}, {"replications", sc.seeds.replications}, {"threads", sc.seeds.threads}};
    j["output"] = {{"directory", sc.output.directory}, {"format", to_string(sc.output.format)}};
    return j.dump(2) + "\n";
}

RunOutcome run_experiment(const ScenarioConfig& sc) {
    RunOutcome out;
    Context cx{sc, out, to_string(sc.experiment.kind)};
    switch (sc.experiment.kind) {
    case ExperimentKind::reward_curve: run_reward_curve(cx); break;
    case ExperimentKind::user_eq: run_user_eq(cx); break;
    case ExperimentKind::platform_eq: platform_pairs(cx, DataMode::separate, "platform_equilibrium"); break;
    case ExperimentKind::shared_eq: run_shared_eq(cx); break;
    case ExperimentKind::monotonicity: run_monotonicity(cx); break;
    case ExperimentKind::richness: run_richness(cx); break;
    case ExperimentKind::table1: run_table1(cx); break;
    case ExperimentKind::alpha_star: run_alpha_star(cx); break;
    }
    return out;
}

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
    std::string s = "experiment,quantity,value,half_width,n,policy,tags\n";
    for (const auto& r : rows) {
        s += csv_field(r.experiment) + ',' + csv_field(r.quantity) + ',' + format_double(r.value) + ',' +
             format_double(r.half_width) + ',' + std::to_string(r.n) + ',' + csv_field(r.policy) + ',' +
             csv_field(r.tags) + '\n';
    }
    return s;
}

std::string rows_to_json(const std::vector<ResultRow>& rows, const std::string& experiment) {
    json j;
    j["experiment"] = experiment;
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back({{"experiment", r.experiment},
                       {"quantity", r.quantity},
                       {"value", r.value},
                       {"half_width", r.half_width},
                       {"n", r.n},
                       {"policy", r.policy},
                       {"tags", r.tags}});
    j["rows"] = arr;
    return j.dump(2) + "\n";
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

int run_scenario(const std::string& path, const RunOverrides& ov, std::ostream& log, std::ostream& err) {
    const auto start = std::chrono::steady_clock::now();
    ScenarioConfig sc;
    try {
        sc = load_scenario(path);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    if (ov.seed) sc.seeds.master = *ov.seed;
    if (ov.replications) sc.seeds.replications = *ov.replications;
    if (ov.threads) sc.seeds.threads = *ov.threads;
    if (ov.out_dir) sc.output.directory = *ov.out_dir;
    if (ov.format) sc.output.format = *ov.format;

    RunOutcome outcome;
    try {
        outcome = run_experiment(sc);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }

    const std::string resolved = resolved_config_json(sc);
    const std::string experiment = to_string(sc.experiment.kind);
    const int code = outcome.inconclusive ? 2 : 0;
    try {
        const std::filesystem::path dir(sc.output.directory);
        std::filesystem::create_directories(dir);
        if (sc.output.format != OutputFormat::json) write_file(dir / "results.csv", rows_to_csv(outcome.rows));
        if (sc.output.format != OutputFormat::csv) write_file(dir / "results.json", rows_to_json(outcome.rows, experiment));
        write_file(dir / "resolved_config.json", resolved);

        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        char hash[17];
        std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(resolved)));
        json rec;
        rec["config_hash"] = hash;
        rec["version"] = BLAB_VERSION;
        rec["experiment"] = experiment;
        rec["wall_clock_seconds"] = wall;
        rec["rows"] = outcome.rows.size();
        rec["exit_code"] = code;
        rec["notes"] = outcome.notes;
        write_file(dir / "run_record.json", rec.dump(2) + "\n");
        log << experiment << ": " << outcome.rows.size() << " rows written to " << dir.string() << '\n';
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    for (const auto& n : outcome.notes) log << "note: " << n << '\n';
    if (outcome.inconclusive) log << "some verdicts are inconclusive\n";
    return code;
}

int validate_scenario(const std::string& path, std::ostream& log, std::ostream& err) {
    try {
        const auto sc = load_scenario(path);
        log << path << ": ok (" << to_string(sc.experiment.kind) << ", " << sc.policies.size() << " policies)\n";
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

std::vector<PolicyKindInfo> list_policies() {
    return {
        {"ThompsonSampling", "", "f(p) = p"},
        {"Greedy", "", "risky iff p h + (1-p) l >= s (threshold from the problem block)"},
        {"EpsilonThompson", "epsilon in [0,1]", "f(p) = epsilon + (1-epsilon) p"},
        {"Cutoff", "c", "risky iff p >= c"},
        {"UniformMixture", "epsilon in [0,1], base policy", "f(p) = epsilon/2 + (1-epsilon) base(p)"},
        {"GridFunction", "values: list of f on a uniform grid over [0,1]", "piecewise-linear interpolation"},
    };
}

} // namespace blab
