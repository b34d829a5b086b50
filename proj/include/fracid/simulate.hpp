#pragma once

#include <cstdint>
#include <vector>

#include "fracid/fracops.hpp"
#include "fracid/signals.hpp"

namespace fracid {

// ---------------------------------------------------------------------------
// Forward data generation: stress from strain for the three-parameter
// viscoelastic model sigma = E0*eps + E1*D^alpha eps, boundary response of the
// diffusion-wave transfer operator at its closed-form orders, and a
// deterministic test-signal library.
// ---------------------------------------------------------------------------

struct VoigtParams {
    double E0 = 0.0;
    double E1 = 0.0;
    double alpha = 0.5;  // in (0, 1)
    DerivConvention convention = DerivConvention::RiemannLiouville;
    // Initial-value data: eps(0) for Caputo; the fractional initial value
    // J^{1-alpha} eps (0) for Riemann-Liouville. Empty means homogeneous.
    std::vector<double> init;
};

// The discretized power mode t^(alpha-1)/Gamma(alpha) carrying a unit
// fractional initial value J^{1-alpha}(mode)(0) = 1. The t = 0 sample is
// regularized so the first trapezoid panel of its running integral is exact.
SampledSignal rl_singular_mode(double dt, std::size_t n, double alpha);

// sigma = E0*eps + E1 * D^alpha eps under the chosen convention.
// Riemann-Liouville with a nonzero init value c expects `eps` to already
// contain c * rl_singular_mode(...); the derivative is applied to the regular
// remainder (the mode itself has vanishing derivative). Caputo requires
// init = {eps(0)}.
SampledSignal voigt_forward(const SampledSignal& eps, const VoigtParams& p);

struct WaveParams {
    double alpha = 2.0;  // forward simulation supports exactly 1 or 2
    double c = 1.0;      // transit ratio (distance / speed), > 0
};

// Boundary response g of the transfer operator exp(-c * s^(alpha/2)):
// alpha = 2 -> pure delay g(t) = h(t - c) (zero-padded; c should be
// grid-aligned within 1e-9, otherwise the nearest sample is used and a
// warning goes to stderr); alpha = 1 -> g = h * k_c with the analytic kernel
// k_c(t) = c / (2 sqrt(pi t^3)) * exp(-c^2 / (4 t)), k_c(0) = 0.
SampledSignal diffusion_wave_forward(const SampledSignal& h,
                                     const WaveParams& p);

enum class TestSignalKind { Ramp, Sine, SmoothStep, PrbsSmoothed };

struct TestSignalParams {
    double amplitude = 1.0;
    double frequency = 1.0;   // rad/s (sine)
    double rise_time = -1.0;  // smooth-step; negative means T/2
    int chips = 31;           // prbs-smoothed chip count
    std::uint64_t seed = 1;   // prbs-smoothed register seed
};

// Deterministic closed-form signals with f(0) = 0 on the grid t = 0..T step
// dt (T/dt must be an integer >= 2 within 1e-9 relative).
SampledSignal test_signal(TestSignalKind kind, double T, double dt,
                          const TestSignalParams& params = {});

// Shared grid builder/validator: returns the sample count T/dt + 1.
std::size_t grid_samples(double T, double dt);

}  // namespace fracid
