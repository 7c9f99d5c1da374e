#pragma once

#include "blab/bandit_core.hpp"
#include "blab/sim_engine.hpp"

#include <vector>

namespace blab {

// Which formula is used on q < p. `printed` keeps the published p >= q branch
// without its factor 2; `corrected` restores the factor, which makes G
// continuous at p = q (see README, "Kernel convention").
enum class KernelConvention { corrected, printed };

struct QuadratureSpec {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    unsigned max_subdivisions = 20; // bisection depth per segment
    double endpoint_exclusion = 1e-6;
    KernelConvention convention = KernelConvention::corrected;

    void validate() const;
};

struct KernelBranches {
    double le = 0.0;  // p <= q formula
    double ge = 0.0;  // p >= q formula under the chosen convention
    double gap = 0.0; // le - ge
};

struct PayoffResult {
    double value = 0.0;
    double error_estimate = 0.0;
    double branch_gap = 0.0; // kernel jump at q = p0
};

double kernel_G(double p, double q, const RiskySafeConfig& cfg,
                KernelConvention conv = KernelConvention::corrected);
KernelBranches kernel_branches(double p, double q, const RiskySafeConfig& cfg,
                               KernelConvention conv = KernelConvention::corrected);

// Instantaneous variance of the posterior per unit of information rate.
double diffusion_phi(double p, const RiskySafeConfig& cfg);

// K(p0; f1, others...): player 1's payoff in excess of the full-information
// payoff, undiscounted continuous time.
PayoffResult payoff_undiscounted(double p0, const Policy& f1, const std::vector<Policy>& others,
                                 const RiskySafeConfig& cfg, const QuadratureSpec& quad = {});

// R_f(n) = K(p0; f, ..., f) for n = 1..N.
RewardCurve reward_curve_closed_form(const Policy& f, const RiskySafeConfig& cfg,
                                     const QuadratureSpec& quad = {});

} // namespace blab
