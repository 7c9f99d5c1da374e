#pragma once

#include "blab/bandit_core.hpp"
#include "blab/closed_form.hpp"
#include "blab/sim_engine.hpp"
#include "blab/verdict.hpp"

#include <optional>
#include <string>
#include <vector>

namespace blab {

enum class BestResponse { safe, risky, indifferent };

// (R(q) - s)(k_b + S) + q(h - s), with S the other players' total
// exploration at q. Its sign is the sign of the marginal value of exploring
// at q, whatever the player's own rate.
double best_response_sign(double q, double others_sum, const RiskySafeConfig& cfg);

BestResponse pointwise_best_response(double q, double others_sum, const RiskySafeConfig& cfg,
                                     double tau_ind = 1e-9);

struct EquilibriumPolicy {
    Policy f_star;
    double zero_region_end = 0.0;
    double one_region_start = 1.0;
    int grid_size = 0;
};

// Symmetric interior root at q (before clipping to [0,1]); needs N >= 2.
double symmetric_root(double q, const RiskySafeConfig& cfg);

EquilibriumPolicy solve_symmetric_equilibrium(const RiskySafeConfig& cfg, int grid_size = 2001,
                                              double tau_ind = 1e-9);

// Damped best-response (fictitious play) iteration on a posterior grid,
// starting from `initial`; returns the averaged policy.
Policy best_response_dynamics(const RiskySafeConfig& cfg, const Policy& initial, int grid_size, int iterations);

struct TeamOptimum {
    double cutoff = 0.0;
    double value = 0.0;
    double error_estimate = 0.0;
    bool dense_fallback = false;
    std::vector<std::string> warnings;
};

TeamOptimum solve_team_optimum(const RiskySafeConfig& cfg, int n_players, const QuadratureSpec& quad = {});

struct GameWitness {
    Policy policy;
    double gain = 0.0;
    double radius = 0.0;
};

struct GameCheck {
    Verdict verdict = Verdict::holds;
    bool is_equilibrium = true;
    double base_value = 0.0;
    std::optional<GameWitness> witness; // most profitable deviation
};

struct GameCheckOptions {
    double tau = 0.0;
    QuadratureSpec quad;
    McSettings mc;
};

// Symmetric equilibrium test of A in the shared-state game against a finite
// deviation grid: closed form in continuous mode, paired Monte Carlo in
// discrete mode.
GameCheck game_G_equilibrium_check(const Policy& a, const std::vector<Policy>& deviation_grid,
                                   const RiskySafeConfig& cfg, const GameCheckOptions& opts = {});

// a <= b everywhere on a dense grid and a < b somewhere.
bool explores_less(const Policy& a, const Policy& b, int grid = 10001);

struct GapReport {
    double alpha_star = 0.0;
    double single_opt = 0.0;
    double team_opt = 0.0;
    double margin_low = 0.0;  // alpha_star - single_opt
    double margin_high = 0.0; // team_opt - alpha_star
    double error_budget = 0.0;
    double single_cutoff = 0.0;
    double team_cutoff = 0.0;
    bool degenerate = false;
    std::optional<EquilibriumPolicy> equilibrium;
};

GapReport alpha_star_report(const RiskySafeConfig& cfg, int grid_size = 2001, const QuadratureSpec& quad = {});

} // namespace blab
