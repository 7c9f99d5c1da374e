#pragma once

#include "blab/bandit_core.hpp"
#include "blab/closed_form.hpp"
#include "blab/equilibrium.hpp"
#include "blab/sim_engine.hpp"
#include "blab/verdict.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace blab {

enum class EvaluationPath { monte_carlo, closed_form };
enum class MonotonicityKind { strict_IM, info_constant, side_IM, increased_info };

std::string to_string(MonotonicityKind k);

// One signed comparison "left - right". `radius` is the Bonferroni-adjusted
// normal radius for MC evidence, or the numerical error for closed form.
struct PairwiseEvidence {
    std::string label;
    double difference = 0.0;
    double radius = 0.0;
    bool exact = false;

    bool significantly_positive() const { return difference - radius > 0.0; }
    bool significantly_negative() const { return difference + radius < 0.0; }
    // Deterministic evidence that cannot separate the two sides.
    bool tie() const { return exact && std::abs(difference) <= radius; }
};

struct MonotonicityVerdict {
    MonotonicityKind kind = MonotonicityKind::strict_IM;
    Verdict verdict = Verdict::inconclusive;
    std::vector<PairwiseEvidence> evidence;
    std::vector<std::string> adversaries; // side-IM certificates name their family
    bool degenerate = false;
};

struct MonotonicityOptions {
    EvaluationPath path = EvaluationPath::closed_form;
    double significance = 0.01; // family-wise, Bonferroni across comparisons
    McSettings mc;
    QuadratureSpec quad;
};

// R_A(n+1) - R_A(n) for n = 1..N-1. All differences identically zero gives
// an info_constant verdict instead of strict_IM.
MonotonicityVerdict check_strict_IM(const Policy& a, const RiskySafeConfig& cfg, const MonotonicityOptions& opts);

// U_shared(1; one user on A, n users on f) - R_A(1) >= 0 for every adversary
// f in the family and every n in n_values. The family only approximates the
// quantifier over all f, hence the adversary list in the verdict.
MonotonicityVerdict check_side_IM(const Policy& a, const std::vector<Policy>& adversaries,
                                  const RiskySafeConfig& cfg, const std::vector<int>& n_values,
                                  const MonotonicityOptions& opts);

struct InformativenessResult {
    MonotonicityVerdict verdict;
    UtilityEstimate gain;                    // E[K(p')] - K(p)
    std::optional<UtilityEstimate> exact_t1; // exact one-step gain when T = 1
};

// Single user running `policy` alone: value after one free risky-arm
// observation against the value from the prior.
InformativenessResult check_increased_informativeness(const RiskySafeConfig& cfg, const Policy& policy,
                                                      const MonotonicityOptions& opts);

struct RichnessPoint {
    double parameter = 0.0;
    UtilityEstimate r1;
    UtilityEstimate rN;
};

struct RichnessVerdict {
    double range_low = 0.0;
    double range_high = 0.0;
    bool envelope_applicable = false;
    bool continuity_envelope_ok = true;
    bool low_anchor_ok = false; // some member has R(N) <= max over the family of R(1)
    double max_step = 0.0;
    std::vector<RichnessPoint> sweep;
    std::vector<double> divergent; // members whose closed-form payoff diverges
};

struct RichnessOptions {
    int points = 101;
    bool check_envelope = true; // only meaningful for mixture-style families
    McSettings mc;
    QuadratureSpec quad;
};

// Sweeps the family parameter over [0,1]. In discrete mode every step is
// checked against the total-variation envelope with the two CIs as slack.
// Continuous-mode members with divergent payoff are listed, not swept.
RichnessVerdict check_utility_richness(const PolicyFamily& family, const RiskySafeConfig& cfg,
                                       const RichnessOptions& opts);

} // namespace blab
