#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "fracid/signals.hpp"

using namespace fracid;
namespace fs = std::filesystem;

namespace {

SampledSignal constant_one(double dt, std::size_t n) {
    return sample_function(dt, n, [](double) { return 1.0; });
}

SampledSignal identity_ramp(double dt, std::size_t n) {
    return sample_function(dt, n, [](double t) { return t; });
}

}  // namespace

TEST_CASE("convolution of unit constants is the running time") {
    const double dt = 0.01;
    const std::size_t n = 201;
    const SampledSignal one = constant_one(dt, n);
    const SampledSignal c = convolve(one, one);
    // Trapezoid integration of a constant is exact.
    for (std::size_t i = 0; i < n; ++i)
        CHECK(c.values[i] == doctest::Approx(i * dt).epsilon(1e-12));
}

TEST_CASE("convolution of ramps matches the cubic closed form") {
    // (t * t)(T) = integral_0^T s (T - s) ds = T^3/6; at T = 2 this is 8/6.
    const double dt = 0.002;
    const std::size_t n = 1001;
    const SampledSignal r = identity_ramp(dt, n);
    const SampledSignal c = convolve(r, r);
    CHECK(c.values[n - 1] ==
          doctest::Approx(8.0 / 6.0).epsilon(10.0 * dt * dt));
}

TEST_CASE("convolution is commutative bit-for-bit") {
    const double dt = 0.01;
    const std::size_t n = 301;
    const SampledSignal f =
        sample_function(dt, n, [](double t) { return std::sin(3.0 * t) + t; });
    const SampledSignal g = sample_function(
        dt, n, [](double t) { return std::exp(-t) * std::cos(7.0 * t); });
    const SampledSignal fg = convolve(f, g);
    const SampledSignal gf = convolve(g, f);
    CHECK(fg.dt == gf.dt);
    CHECK(fg.values == gf.values);
}

TEST_CASE("convolution error decays at second order") {
    // Halving dt must cut the endpoint error of (t * t)(2) by about 4.
    auto endpoint_error = [](std::size_t n) {
        const double dt = 2.0 / static_cast<double>(n - 1);
        const SampledSignal r = identity_ramp(dt, n);
        const SampledSignal c = convolve(r, r);
        return std::abs(c.values[n - 1] - 8.0 / 6.0);
    };
    const double e1 = endpoint_error(101);
    const double e2 = endpoint_error(201);
    CHECK(e1 > 0.0);
    CHECK(e2 > 0.0);
    CHECK(e1 / e2 > 3.4);
    CHECK(e1 / e2 < 4.6);
}

TEST_CASE("repeated integral matches closed forms") {
    const double dt = 0.001;
    const std::size_t n = 1001;
    const SampledSignal one = constant_one(dt, n);
    const SampledSignal r = identity_ramp(dt, n);

    SUBCASE("single integral of a ramp is t^2/2 (trapezoid-exact)") {
        const SampledSignal j = repeated_integral(r, 1);
        for (std::size_t i = 0; i < n; i += 100) {
            const double t = i * dt;
            CHECK(j.values[i] == doctest::Approx(t * t / 2.0).epsilon(1e-12));
        }
    }
    SUBCASE("double integral of 1 is t^2/2") {
        const SampledSignal j = repeated_integral(one, 2);
        const double t = (n - 1) * dt;
        CHECK(j.values[n - 1] ==
              doctest::Approx(t * t / 2.0).epsilon(10.0 * dt * dt));
    }
    SUBCASE("nesting agrees with the single-kernel form") {
        const SampledSignal f =
            sample_function(dt, n, [](double t) { return std::sin(2.0 * t); });
        const SampledSignal nested =
            repeated_integral(repeated_integral(f, 1), 1);
        const SampledSignal direct = repeated_integral(f, 2);
        double maxd = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            maxd = std::max(maxd,
                            std::abs(nested.values[i] - direct.values[i]));
            scale = std::max(scale, std::abs(direct.values[i]));
        }
        CHECK(maxd <= 10.0 * dt * dt * std::max(scale, 1.0));
    }
    SUBCASE("order must be positive") {
        CHECK_THROWS_AS((void)repeated_integral(r, 0), std::invalid_argument);
    }
}

TEST_CASE("cauchy kernel realizes t^(k-1)/(k-1)!") {
    const double dt = 0.25;
    const std::size_t n = 9;
    const SampledSignal k1 = cauchy_kernel(dt, n, 1);
    const SampledSignal k3 = cauchy_kernel(dt, n, 3);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = i * dt;
        CHECK(k1.values[i] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(k3.values[i] == doctest::Approx(t * t / 2.0).epsilon(1e-15));
    }
}

TEST_CASE("t-weighting applies exact (-t)^j samples") {
    const double dt = 0.5;
    const std::size_t n = 5;
    const SampledSignal f =
        sample_function(dt, n, [](double t) { return 1.0 + t; });
    const SampledSignal w1 = t_weight(f, 1);
    const SampledSignal w2 = t_weight(f, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = i * dt;
        CHECK(w1.values[i] == -t * f.values[i]);
        CHECK(w2.values[i] == t * t * f.values[i]);
    }
    CHECK(t_weight(f, 0).values == f.values);
}

TEST_CASE("pointwise arithmetic and grid checks") {
    const SampledSignal a(0.1, {0.0, 1.0, 2.0});
    const SampledSignal b(0.1, {1.0, 1.0, 1.0});
    CHECK((a + b).values == std::vector<double>{1.0, 2.0, 3.0});
    CHECK((a - b).values == std::vector<double>{-1.0, 0.0, 1.0});
    CHECK((2.0 * a).values == std::vector<double>{0.0, 2.0, 4.0});
    const SampledSignal c(0.2, {1.0, 1.0, 1.0});
    CHECK_FALSE(a.same_grid(c));
    CHECK_THROWS_AS((void)(a + c), std::invalid_argument);
    CHECK_THROWS_AS((void)convolve(a, c), std::invalid_argument);
}

TEST_CASE("white noise is seed-deterministic and hits the requested SNR") {
    const double dt = 0.001;
    const std::size_t n = 5001;
    const SampledSignal f =
        sample_function(dt, n, [](double t) { return std::sin(2.0 * t); });

    const SampledSignal n1 = add_white_noise(f, 40.0, 123);
    const SampledSignal n2 = add_white_noise(f, 40.0, 123);
    const SampledSignal n3 = add_white_noise(f, 40.0, 124);
    CHECK(n1.values == n2.values);
    CHECK(n1.values != n3.values);

    double ps = 0.0, pn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ps += f.values[i] * f.values[i];
        const double d = n1.values[i] - f.values[i];
        pn += d * d;
    }
    const double snr_db = 10.0 * std::log10(ps / pn);
    CHECK(snr_db > 39.0);
    CHECK(snr_db < 41.0);

    const SampledSignal clean =
        add_white_noise(f, std::numeric_limits<double>::infinity(), 7);
    CHECK(clean.values == f.values);
}

TEST_CASE("csv io round-trips bit-exactly and validates the grid") {
    const fs::path dir = fs::temp_directory_path() / "fracid_signals_test";
    fs::create_directories(dir);
    const std::string path = (dir / "sig.csv").string();

    const SampledSignal f = sample_function(
        0.001, 101, [](double t) { return std::sin(t) * 1e-7 + t; });
    write_signal_csv(path, f);
    const SampledSignal g = read_signal_csv(path);
    CHECK(g.dt == doctest::Approx(f.dt).epsilon(1e-12));
    REQUIRE(g.size() == f.size());
    CHECK(g.values == f.values);

    SUBCASE("missing file") {
        CHECK_THROWS((void)read_signal_csv((dir / "absent.csv").string()));
    }
    SUBCASE("non-uniform step rejected") {
        const std::string bad = (dir / "bad.csv").string();
        std::ofstream out(bad);
        out << "t,value\n0,1\n0.1,1\n0.3,1\n";
        out.close();
        CHECK_THROWS((void)read_signal_csv(bad));
    }
    SUBCASE("nonzero start rejected") {
        const std::string bad = (dir / "bad2.csv").string();
        std::ofstream out(bad);
        out << "t,value\n0.5,1\n0.6,1\n0.7,1\n";
        out.close();
        CHECK_THROWS((void)read_signal_csv(bad));
    }
}
