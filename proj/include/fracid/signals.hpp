#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace fracid {

// Uniformly sampled real-valued time function on [0, T], sample i at t = i*dt.
// The universal numeric currency of the toolkit: every symbolic expression is
// eventually lowered to convolutions, repeated integrals and t-power weightings
// of these.
struct SampledSignal {
    double dt = 0.0;
    std::vector<double> values;

    SampledSignal() = default;
    SampledSignal(double dt_, std::vector<double> values_);

    std::size_t size() const { return values.size(); }
    double time_at(std::size_t i) const { return dt * static_cast<double>(i); }
    double duration() const { return time_at(values.size() - 1); }

    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }

    bool same_grid(const SampledSignal& other) const;
};

// Builds a signal by sampling f on the grid {0, dt, ..., (n-1)*dt}.
SampledSignal sample_function(double dt, std::size_t n,
                              const std::function<double(double)>& f);

// Pointwise arithmetic (grids must match).
SampledSignal operator+(const SampledSignal& a, const SampledSignal& b);
SampledSignal operator-(const SampledSignal& a, const SampledSignal& b);
SampledSignal operator*(double c, const SampledSignal& a);

// Trapezoidal convolution (f * g)(t) = integral_0^t f(s) g(t-s) ds on the
// shared grid. The accumulation is arranged symmetrically in f and g, so
// convolve(f, g) == convolve(g, f) bit-exactly.
SampledSignal convolve(const SampledSignal& f, const SampledSignal& g);

// k-fold integral realized as a single kernel integral
//   integral_0^t (t-tau)^(k-1)/(k-1)! y(tau) dtau,   k >= 1.
SampledSignal repeated_integral(const SampledSignal& y, int k);

// The kernel t^(k-1)/(k-1)! on the given grid (the time-domain realization of
// s^(-k) applied to the operational constant 1).
SampledSignal cauchy_kernel(double dt, std::size_t n, int k);

// Sample i becomes (-i*dt)^j * f(i*dt), exactly: the time-domain realization
// of the j-th derivative with respect to s.
SampledSignal t_weight(const SampledSignal& f, int j);

// Adds seeded Gaussian white noise. snr_db = 10*log10(signal power / noise
// power); pass +infinity to return f unchanged. Deterministic for fixed seed.
SampledSignal add_white_noise(const SampledSignal& f, double snr_db,
                              std::uint64_t seed);

// CSV I/O, format: header "t,value", rows with strictly increasing t at a
// constant step (relative tolerance 1e-9 on the step), starting at t = 0.
void write_signal_csv(const std::string& path, const SampledSignal& s);
SampledSignal read_signal_csv(const std::string& path);

}  // namespace fracid
