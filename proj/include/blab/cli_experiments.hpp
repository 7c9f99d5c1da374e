#pragma once

#include "blab/bandit_core.hpp"
#include "blab/sim_engine.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace blab {

enum class ExperimentKind { reward_curve, user_eq, platform_eq, shared_eq, monotonicity, richness, table1, alpha_star };
enum class OutputFormat { csv, json, both };

std::string to_string(ExperimentKind k);
std::string to_string(OutputFormat f);

struct NamedPolicy {
    std::string name;
    Policy policy;
};

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::reward_curve;
    std::optional<double> tau;      // equilibrium tolerance; derived from the CIs when unset
    std::string family = "epsilon_thompson"; // epsilon_thompson | uniform_mixture | cutoffs
    Policy family_base = Policy::thompson();  // base of the uniform_mixture family
    int family_points = 21;         // parameter sweep for richness / table1
    int targets = 11;               // quality targets for table1 realizability
    double significance = 0.01;
    int grid_size = 2001;           // alpha-star equilibrium grid
};

struct SeedSpec {
    std::uint64_t master = 0;
    std::uint64_t replications = 100000;
    unsigned threads = 1;
};

struct OutputSpec {
    std::string directory = "out";
    OutputFormat format = OutputFormat::both;
};

struct ScenarioConfig {
    RiskySafeConfig problem;
    std::vector<NamedPolicy> policies;
    ExperimentSpec experiment;
    SeedSpec seeds;
    OutputSpec output;

    McSettings mc() const { return {seeds.replications, seeds.master, seeds.threads}; }
};

// YAML (or JSON, which the same reader accepts). Unknown keys, bad types and
// violated model invariants raise ConfigError as "source:line:col: message".
ScenarioConfig parse_scenario(const std::string& text, const std::string& source = "<input>");
ScenarioConfig load_scenario(const std::string& path);

// Fully resolved configuration (defaults filled in) as pretty JSON.
std::string resolved_config_json(const ScenarioConfig& cfg);

struct ResultRow {
    std::string experiment;
    std::string quantity;
    double value = 0.0;
    double half_width = 0.0;
    int n = 0;
    std::string policy;
    std::string tags;
};

struct RunOutcome {
    std::vector<ResultRow> rows;
    bool inconclusive = false;
    std::vector<std::string> notes;
};

RunOutcome run_experiment(const ScenarioConfig& cfg);

std::string rows_to_csv(const std::vector<ResultRow>& rows);
std::string rows_to_json(const std::vector<ResultRow>& rows, const std::string& experiment);

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> replications;
    std::optional<unsigned> threads;
    std::optional<std::string> out_dir;
    std::optional<OutputFormat> format;
};

// Loads, runs and writes results.{csv,json}, resolved_config.json and
// run_record.json. Returns 0 on success, 2 when a verdict is inconclusive,
// 1 on any error (reported on `err`).
int run_scenario(const std::string& path, const RunOverrides& overrides, std::ostream& log, std::ostream& err);

// Returns 0 when the file parses and satisfies every invariant, 1 otherwise.
int validate_scenario(const std::string& path, std::ostream& log, std::ostream& err);

struct PolicyKindInfo {
    std::string kind;
    std::string parameters;
    std::string description;
};

std::vector<PolicyKindInfo> list_policies();

std::uint64_t fnv1a64(const std::string& data);

} // namespace blab
