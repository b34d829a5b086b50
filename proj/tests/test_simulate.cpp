#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "fracid/fracops.hpp"
#include "fracid/signals.hpp"
#include "fracid/simulate.hpp"

using namespace fracid;

TEST_CASE("grid builder validates and counts samples") {
    CHECK(grid_samples(1.0, 0.25) == 5);
    CHECK(grid_samples(5.0, 0.00125) == 4001);
    CHECK_THROWS_AS((void)grid_samples(1.0, 0.3), std::invalid_argument);
    CHECK_THROWS_AS((void)grid_samples(1.0, -0.1), std::invalid_argument);
    CHECK_THROWS_AS((void)grid_samples(0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS((void)grid_samples(0.1, 0.1), std::invalid_argument);
}

TEST_CASE("test signals are deterministic, start at zero, and have the "
          "advertised shapes") {
    const double T = 2.0, dt = 0.01;
    const std::size_t n = grid_samples(T, dt);

    SUBCASE("ramp") {
        TestSignalParams p;
        p.amplitude = 3.0;
        const SampledSignal s = test_signal(TestSignalKind::Ramp, T, dt, p);
        for (std::size_t i = 0; i < n; i += 50)
            CHECK(s.values[i] == doctest::Approx(3.0 * i * dt).epsilon(1e-14));
    }
    SUBCASE("sine") {
        TestSignalParams p;
        p.frequency = 4.0;
        const SampledSignal s = test_signal(TestSignalKind::Sine, T, dt, p);
        CHECK(s.values[0] == 0.0);
        CHECK(s.values[100] == doctest::Approx(std::sin(4.0)).epsilon(1e-14));
    }
    SUBCASE("smooth step saturates at the amplitude") {
        TestSignalParams p;
        p.amplitude = 2.0;
        p.rise_time = 0.5;
        const SampledSignal s =
            test_signal(TestSignalKind::SmoothStep, T, dt, p);
        CHECK(s.values[0] == 0.0);
        CHECK(s.values[n - 1] == doctest::Approx(2.0).epsilon(1e-14));
        CHECK(s.values[n - 50] == doctest::Approx(2.0).epsilon(1e-14));
    }
    SUBCASE("smoothed binary sequence is seeded and reproducible") {
        TestSignalParams p;
        p.seed = 11;
        const SampledSignal a =
            test_signal(TestSignalKind::PrbsSmoothed, T, dt, p);
        const SampledSignal b =
            test_signal(TestSignalKind::PrbsSmoothed, T, dt, p);
        p.seed = 12;
        const SampledSignal c =
            test_signal(TestSignalKind::PrbsSmoothed, T, dt, p);
        CHECK(a.values == b.values);
        CHECK(a.values != c.values);
        CHECK(a.values[0] == 0.0);
        CHECK_THROWS_AS((void)test_signal(TestSignalKind::PrbsSmoothed, T, dt,
                                          TestSignalParams{1, 1, -1, 0, 1}),
                        std::invalid_argument);
    }
}

TEST_CASE("viscoelastic forward response matches the ramp closed form") {
    // For eps = t: sigma = E0 t + E1 t^(1-a)/Gamma(2-a). With E0 = 2, E1 = 1,
    // a = 0.5: sigma(1) = 2 + 2/sqrt(pi) = 3.1283791670955126.
    const std::size_t n = 2001;
    const double dt = 1.0 / static_cast<double>(n - 1);
    const SampledSignal eps =
        sample_function(dt, n, [](double t) { return t; });
    VoigtParams p;
    p.E0 = 2.0;
    p.E1 = 1.0;
    p.alpha = 0.5;
    const SampledSignal sig = voigt_forward(eps, p);
    const double truth = 2.0 + 2.0 / std::sqrt(std::numbers::pi);
    CHECK(sig.values[n - 1] == doctest::Approx(truth).epsilon(2e-3));

    SUBCASE("order outside (0,1) is rejected") {
        p.alpha = 1.0;
        CHECK_THROWS_AS((void)voigt_forward(eps, p), std::invalid_argument);
    }
}

TEST_CASE("initial-value convention shifts pass through exactly") {
    // Caputo derivative ignores the constant offset: the stress of
    // eps = c + f equals E0*c plus the stress of f (for f(0) = 0).
    const std::size_t n = 1001;
    const double dt = 0.002;
    const SampledSignal f =
        sample_function(dt, n, [](double t) { return std::sin(t); });
    const double c = 0.7;
    const SampledSignal eps = sample_function(
        dt, n, [c](double t) { return c + std::sin(t); });

    VoigtParams base;
    base.E0 = 2.0;
    base.E1 = 1.0;
    base.alpha = 0.5;
    base.convention = DerivConvention::Caputo;
    base.init = {0.0};
    const SampledSignal sig_f = voigt_forward(f, base);

    VoigtParams shifted = base;
    shifted.init = {c};
    const SampledSignal sig = voigt_forward(eps, shifted);
    for (std::size_t i = 0; i < n; i += 100)
        CHECK(sig.values[i] ==
              doctest::Approx(sig_f.values[i] + 2.0 * c).epsilon(1e-12));

    SUBCASE("missing start value is rejected") {
        VoigtParams bad = base;
        bad.init = {};
        CHECK_THROWS_AS((void)voigt_forward(eps, bad), std::invalid_argument);
    }
}

TEST_CASE("singular start mode carries a unit fractional initial value") {
    const double dt = 0.001;
    const std::size_t n = 2001;
    const double alpha = 0.5;
    const SampledSignal mode = rl_singular_mode(dt, n, alpha);

    SUBCASE("first trapezoid panel integrates the power law exactly") {
        const double panel = dt * (mode.values[0] + mode.values[1]) / 2.0;
        const double truth =
            std::pow(dt, alpha) / (alpha * std::tgamma(alpha));
        CHECK(panel == doctest::Approx(truth).epsilon(1e-12));
    }
    SUBCASE("complementary integral is constant one") {
        // J^(1-a) of t^(a-1)/Gamma(a) is identically 1.
        const SampledSignal j = frac_integral(mode, FracOrder(1.0 - alpha));
        CHECK(j.values[n / 2] == doctest::Approx(1.0).epsilon(2e-2));
        CHECK(j.values[n - 1] == doctest::Approx(1.0).epsilon(2e-2));
    }
    SUBCASE("order outside (0,1) is rejected") {
        CHECK_THROWS_AS((void)rl_singular_mode(dt, n, 1.0),
                        std::invalid_argument);
    }
}

TEST_CASE("singular-mode initial value is differentiated away") {
    // With eps = c*mode + f the stress must be E0*eps + E1*D^a f: the mode
    // itself contributes only through the elastic term.
    const double dt = 0.001;
    const std::size_t n = 2001;
    const double c = 0.25;
    const SampledSignal mode = rl_singular_mode(dt, n, 0.5);
    const SampledSignal f =
        sample_function(dt, n, [](double t) { return std::sin(2.0 * t); });
    SampledSignal eps = f;
    for (std::size_t i = 0; i < n; ++i) eps.values[i] += c * mode.values[i];

    VoigtParams p;
    p.E0 = 2.0;
    p.E1 = 1.0;
    p.alpha = 0.5;
    p.init = {c};
    const SampledSignal sig = voigt_forward(eps, p);

    const SampledSignal df =
        frac_derivative(f, FracOrder(0.5), DerivConvention::RiemannLiouville);
    for (std::size_t i = 0; i < n; i += 200)
        CHECK(sig.values[i] ==
              doctest::Approx(2.0 * eps.values[i] + df.values[i])
                  .epsilon(1e-12));
}

TEST_CASE("boundary map: order two is a pure grid delay") {
    const double T = 10.0, dt = 0.0025;
    const std::size_t n = grid_samples(T, dt);
    const SampledSignal h = sample_function(dt, n, [](double t) {
        return t < 2.0 ? 0.5 * (1.0 - std::cos(std::numbers::pi * t)) : 0.0;
    });
    WaveParams p;
    p.alpha = 2.0;
    p.c = 0.5;
    const SampledSignal g = diffusion_wave_forward(h, p);
    const std::size_t shift = 200;  // 0.5 / 0.0025
    for (std::size_t i = 0; i < n; ++i) {
        if (i < shift)
            CHECK(g.values[i] == 0.0);
        else
            CHECK(g.values[i] == h.values[i - shift]);
    }
}

TEST_CASE("boundary map: order one uses the analytic kernel") {
    const double T = 40.0, dt = 0.01;
    const std::size_t n = grid_samples(T, dt);
    const SampledSignal h = sample_function(dt, n, [](double t) {
        return t < 2.0 ? 0.5 * (1.0 - std::cos(std::numbers::pi * t)) : 0.0;
    });
    WaveParams p;
    p.alpha = 1.0;
    p.c = 0.5;
    const SampledSignal g = diffusion_wave_forward(h, p);

    // The kernel has total mass erfc(c / (2 sqrt(T))) -> 1, so the response
    // mass approaches the input mass; at T = 40 the deficit is below 5%.
    double mh = 0.0, mg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mh += h.values[i];
        mg += g.values[i];
    }
    mh *= dt;
    mg *= dt;
    CHECK(mg > 0.90 * mh);
    CHECK(mg < 1.001 * mh);
    // Smoothing: the delayed response peak is strictly below the input peak.
    double ph = 0.0, pg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ph = std::max(ph, h.values[i]);
        pg = std::max(pg, g.values[i]);
    }
    CHECK(pg < ph);
    CHECK(pg > 0.1 * ph);

    SUBCASE("other orders have no closed-form kernel") {
        p.alpha = 1.5;
        CHECK_THROWS_AS((void)diffusion_wave_forward(h, p),
                        std::invalid_argument);
    }
    SUBCASE("transit ratio must be positive") {
        p.alpha = 1.0;
        p.c = 0.0;
        CHECK_THROWS_AS((void)diffusion_wave_forward(h, p),
                        std::invalid_argument);
    }
}
