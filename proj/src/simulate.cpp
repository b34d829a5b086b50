#include "fracid/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace fracid {

std::size_t grid_samples(double T, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw std::invalid_argument("invalid grid: dt must be positive");
    if (!(T > 0.0) || !std::isfinite(T))
        throw std::invalid_argument("invalid grid: horizon must be positive");
    const double ratio = T / dt;
    const double k = std::round(ratio);
    if (std::abs(ratio - k) > 1e-9 * std::max(1.0, ratio))
        throw std::invalid_argument(
            "invalid grid: horizon is not an integer multiple of dt");
    if (k < 2.0)
        throw std::invalid_argument("invalid grid: need at least 2 steps");
    return static_cast<std::size_t>(k) + 1;
}

SampledSignal rl_singular_mode(double dt, std::size_t n, double alpha) {
    if (!(dt > 0.0) || n < 2)
        throw std::invalid_argument("rl_singular_mode: invalid grid");
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw std::invalid_argument(
            "rl_singular_mode: order must lie in (0, 1)");
    const double g = std::tgamma(alpha);
    std::vector<double> v(n);
    // Exact first trapezoid panel: dt*(v0 + v1)/2 = integral of the mode over
    // [0, dt] = dt^alpha / (alpha * Gamma(alpha)).
    v[0] = std::pow(dt, alpha - 1.0) * (2.0 - alpha) / (alpha * g);
    for (std::size_t i = 1; i < n; ++i)
        v[i] = std::pow(i * dt, alpha - 1.0) / g;
    return SampledSignal(dt, std::move(v));
}

SampledSignal voigt_forward(const SampledSignal& eps, const VoigtParams& p) {
    if (!(p.alpha > 0.0) || !(p.alpha < 1.0))
        throw std::invalid_argument("voigt_forward: order must lie in (0, 1)");
    if (!std::isfinite(p.E0) || !std::isfinite(p.E1))
        throw std::invalid_argument("voigt_forward: moduli must be finite");
    const FracOrder order(p.alpha);

    SampledSignal deriv;
    if (p.convention == DerivConvention::Caputo) {
        if (p.init.empty())
            throw std::invalid_argument(
                "voigt_forward: Caputo convention requires init = {eps(0)}");
        deriv = frac_derivative(eps, order, DerivConvention::Caputo, p.init);
    } else {
        const double c = p.init.empty() ? 0.0 : p.init[0];
        if (c != 0.0) {
            const SampledSignal mode =
                rl_singular_mode(eps.dt, eps.size(), p.alpha);
            SampledSignal regular = eps;
            for (std::size_t i = 0; i < regular.size(); ++i)
                regular.values[i] -= c * mode.values[i];
            deriv = frac_derivative(regular, order,
                                    DerivConvention::RiemannLiouville);
        } else {
            deriv = frac_derivative(eps, order,
                                    DerivConvention::RiemannLiouville);
        }
    }

    std::vector<double> out(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i)
        out[i] = p.E0 * eps.values[i] + p.E1 * deriv.values[i];
    return SampledSignal(eps.dt, std::move(out));
}

SampledSignal diffusion_wave_forward(const SampledSignal& h,
                                     const WaveParams& p) {
    if (!(p.c > 0.0) || !std::isfinite(p.c))
        throw std::invalid_argument(
            "diffusion_wave_forward: transit ratio must be positive");
    const std::size_t n = h.size();

    if (std::abs(p.alpha - 2.0) < 1e-12) {
        const double ratio = p.c / h.dt;
        double m = std::round(ratio);
        if (std::abs(ratio - m) > 1e-9 * std::max(1.0, ratio))
            std::fprintf(stderr,
                         "diffusion_wave_forward: delay %.17g is not "
                         "grid-aligned; using nearest sample %.17g\n",
                         p.c, m * h.dt);
        const std::size_t shift = static_cast<std::size_t>(m);
        std::vector<double> out(n, 0.0);
        for (std::size_t i = shift; i < n; ++i)
            out[i] = h.values[i - shift];
        return SampledSignal(h.dt, std::move(out));
    }

    if (std::abs(p.alpha - 1.0) < 1e-12) {
        std::vector<double> kv(n, 0.0);
        const double c2 = p.c * p.c;
        for (std::size_t i = 1; i < n; ++i) {
            const double t = static_cast<double>(i) * h.dt;
            kv[i] = p.c / (2.0 * std::sqrt(std::numbers::pi * t * t * t)) *
                    std::exp(-c2 / (4.0 * t));
        }
        return convolve(h, SampledSignal(h.dt, std::move(kv)));
    }

    throw std::invalid_argument(
        "diffusion_wave_forward: only orders 1 and 2 have closed-form "
        "kernels");
}

namespace {

// 16-bit Galois linear-feedback shift register (taps 0xB400), one bit per
// step; deterministic chip sequence for the smoothed binary test signal.
class Lfsr16 {
  public:
    explicit Lfsr16(std::uint64_t seed)
        : state_(static_cast<std::uint16_t>(seed & 0xFFFFu)) {
        if (state_ == 0) state_ = 0xACE1u;
    }
    int next_bit() {
        const int out = state_ & 1u;
        state_ >>= 1;
        if (out) state_ ^= 0xB400u;
        return out;
    }

  private:
    std::uint16_t state_;
};

}  // namespace

SampledSignal test_signal(TestSignalKind kind, double T, double dt,
                          const TestSignalParams& params) {
    const std::size_t n = grid_samples(T, dt);
    const double A = params.amplitude;
    std::vector<double> v(n, 0.0);

    switch (kind) {
        case TestSignalKind::Ramp:
            for (std::size_t i = 0; i < n; ++i) v[i] = A * (i * dt);
            break;
        case TestSignalKind::Sine:
            for (std::size_t i = 0; i < n; ++i)
                v[i] = A * std::sin(params.frequency * (i * dt));
            break;
        case TestSignalKind::SmoothStep: {
            const double rise =
                params.rise_time > 0.0 ? params.rise_time : T / 2.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double x = std::min(i * dt / rise, 1.0);
                v[i] = A * x * x * (3.0 - 2.0 * x);
            }
            break;
        }
        case TestSignalKind::PrbsSmoothed: {
            if (params.chips < 1)
                throw std::invalid_argument(
                    "test_signal: chip count must be >= 1");
            const double chip_len = T / params.chips;
            Lfsr16 reg(params.seed);
            std::vector<double> levels(
                static_cast<std::size_t>(params.chips));
            for (auto& lv : levels) lv = reg.next_bit() ? A : -A;
            std::vector<double> raw(n);
            for (std::size_t i = 0; i < n; ++i) {
                auto idx = static_cast<std::size_t>(i * dt / chip_len);
                if (idx >= levels.size()) idx = levels.size() - 1;
                raw[i] = levels[idx];
            }
            // Unit-mass triangular kernel of base 2*chip_len: the smoothing
            // keeps the spectrum broadband while giving f(0) = 0 and a
            // continuous derivative.
            std::vector<double> kern(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double t = i * dt;
                if (t < chip_len)
                    kern[i] = t / (chip_len * chip_len);
                else if (t < 2.0 * chip_len)
                    kern[i] = (2.0 * chip_len - t) / (chip_len * chip_len);
            }
            return convolve(SampledSignal(dt, std::move(raw)),
                            SampledSignal(dt, std::move(kern)));
        }
    }
    return SampledSignal(dt, std::move(v));
}

}  // namespace fracid
