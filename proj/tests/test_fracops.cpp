#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "fracid/fracops.hpp"
#include "fracid/signals.hpp"

using namespace fracid;

namespace {

SampledSignal ramp(double dt, std::size_t n) {
    return sample_function(dt, n, [](double t) { return t; });
}

}  // namespace

TEST_CASE("order bracketing: smallest integer nu with nu-1 < alpha <= nu") {
    CHECK(FracOrder(0.0).nu == 0);
    CHECK(FracOrder(0.3).nu == 1);
    CHECK(FracOrder(1.0).nu == 1);
    CHECK(FracOrder(1.2).nu == 2);
    CHECK(FracOrder(2.0).nu == 2);
    CHECK_THROWS_AS(FracOrder(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(FracOrder(std::nan("")), std::invalid_argument);
}

TEST_CASE("quadrature weights follow the one-term recursion") {
    SUBCASE("first integral weights at order one half") {
        const GLWeights w = gl_weights(0.5, 4);
        REQUIRE(w.coefficients.size() == 4);
        CHECK(w.coefficients[0] == 1.0);
        CHECK(w.coefficients[1] == 0.5);
        CHECK(w.coefficients[2] == 0.375);
        CHECK(w.coefficients[3] == doctest::Approx(0.3125).epsilon(1e-15));
    }
    SUBCASE("order one degenerates to the rectangle rule") {
        const GLWeights w = gl_weights(1.0, 6);
        for (double c : w.coefficients) CHECK(c == 1.0);
    }
    SUBCASE("differentiation weights (negated order) truncate") {
        // At alpha = -1 the recursion gives 1, -1, 0, 0, ...: the classical
        // backward difference.
        const GLWeights w = gl_weights(-1.0, 5);
        CHECK(w.coefficients[0] == 1.0);
        CHECK(w.coefficients[1] == -1.0);
        CHECK(w.coefficients[2] == 0.0);
        CHECK(w.coefficients[3] == 0.0);
    }
    SUBCASE("empty request rejected") {
        CHECK_THROWS_AS((void)gl_weights(0.5, 0), std::invalid_argument);
    }
}

TEST_CASE("half-order integral of a ramp matches the power law") {
    // J^0.5 t = t^1.5 / Gamma(2.5); at t = 1 this is 0.75225277806367504.
    const std::size_t n = 1001;
    const double dt = 1.0 / static_cast<double>(n - 1);
    const SampledSignal f = ramp(dt, n);
    const SampledSignal j = frac_integral(f, FracOrder(0.5));
    const double truth = 1.0 / std::tgamma(2.5);
    CHECK(j.values[n - 1] == doctest::Approx(truth).epsilon(5e-3));

    SUBCASE("error shrinks with the step") {
        const std::size_t n2 = 4001;
        const double dt2 = 1.0 / static_cast<double>(n2 - 1);
        const SampledSignal j2 = frac_integral(ramp(dt2, n2), FracOrder(0.5));
        CHECK(std::abs(j2.values[n2 - 1] - truth) <
              std::abs(j.values[n - 1] - truth));
    }
}

TEST_CASE("integer-order integral reduces to the rectangle rule") {
    const std::size_t n = 101;
    const double dt = 0.01;
    const SampledSignal f = ramp(dt, n);
    const SampledSignal j = frac_integral(f, FracOrder(1.0));
    // Right-endpoint rectangles on f = t give (t^2 + t*dt)/2 exactly.
    for (std::size_t i = 10; i < n; i += 30) {
        const double t = i * dt;
        CHECK(j.values[i] ==
              doctest::Approx((t * t + t * dt) / 2.0).epsilon(1e-12));
    }
}

TEST_CASE("half-order derivative of a ramp matches the power law") {
    // D^0.5 t = t^0.5 / Gamma(1.5); at t = 1 this is 2/sqrt(pi).
    const std::size_t n = 1001;
    const double dt = 1.0 / static_cast<double>(n - 1);
    const SampledSignal f = ramp(dt, n);
    const double truth = 2.0 / std::sqrt(std::numbers::pi);
    const SampledSignal drl =
        frac_derivative(f, FracOrder(0.5), DerivConvention::RiemannLiouville);
    CHECK(drl.values[n - 1] == doctest::Approx(truth).epsilon(5e-3));
}

TEST_CASE("half-order derivative of a constant distinguishes conventions") {
    const std::size_t n = 1001;
    const double dt = 1.0 / static_cast<double>(n - 1);
    const SampledSignal one =
        sample_function(dt, n, [](double) { return 1.0; });

    SUBCASE("unbounded-history convention gives t^-0.5/Gamma(0.5)") {
        const SampledSignal d = frac_derivative(
            one, FracOrder(0.5), DerivConvention::RiemannLiouville);
        const double truth = 1.0 / std::sqrt(std::numbers::pi);
        CHECK(d.values[n - 1] == doctest::Approx(truth).epsilon(1e-2));
    }
    SUBCASE("initial-value convention annihilates its own start value") {
        const SampledSignal d = frac_derivative(
            one, FracOrder(0.5), DerivConvention::Caputo, {1.0});
        for (std::size_t i = 0; i < n; i += 100)
            CHECK(d.values[i] == 0.0);
    }
    SUBCASE("initial-value convention requires the start values") {
        CHECK_THROWS_AS((void)frac_derivative(one, FracOrder(0.5),
                                              DerivConvention::Caputo),
                        std::invalid_argument);
    }
}

TEST_CASE("conventions coincide on signals vanishing at the origin") {
    const std::size_t n = 501;
    const double dt = 0.002;
    const SampledSignal f =
        sample_function(dt, n, [](double t) { return std::sin(3.0 * t); });
    const SampledSignal a =
        frac_derivative(f, FracOrder(0.7), DerivConvention::RiemannLiouville);
    const SampledSignal b =
        frac_derivative(f, FracOrder(0.7), DerivConvention::Caputo, {0.0});
    CHECK(a.values == b.values);
}

TEST_CASE("integral and derivative compose to the identity") {
    const std::size_t n = 2001;
    const double dt = 1.0 / static_cast<double>(n - 1);
    const SampledSignal f = sample_function(
        dt, n, [](double t) { return t * t * (3.0 - 2.0 * t); });
    const SampledSignal j = frac_integral(f, FracOrder(0.5));
    const SampledSignal back = frac_derivative(
        j, FracOrder(0.5), DerivConvention::RiemannLiouville);
    double maxerr = 0.0;
    for (std::size_t i = n / 4; i < n; ++i)
        maxerr = std::max(maxerr, std::abs(back.values[i] - f.values[i]));
    CHECK(maxerr < 5e-3);
}

TEST_CASE("zero integral order is rejected") {
    const SampledSignal f = ramp(0.01, 101);
    CHECK_THROWS_AS((void)frac_integral(f, FracOrder(0.0)),
                    std::invalid_argument);
}
