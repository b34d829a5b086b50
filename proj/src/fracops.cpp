#include "fracid/fracops.hpp"

#include <cmath>
#include <stdexcept>

namespace fracid {

FracOrder::FracOrder(double a) : alpha(a) {
    if (!(a >= 0.0) || !std::isfinite(a))
        throw std::invalid_argument("FracOrder: alpha must be finite and >= 0");
    const double fl = std::floor(a);
    nu = (a == fl) ? static_cast<int>(fl) : static_cast<int>(std::ceil(a));
}

GLWeights gl_weights(double alpha, std::size_t N) {
    if (N < 1) throw std::invalid_argument("gl_weights: N must be >= 1");
    GLWeights w;
    w.alpha = alpha;
    w.coefficients.resize(N);
    w.coefficients[0] = 1.0;
    for (std::size_t k = 1; k < N; ++k)
        w.coefficients[k] = (static_cast<double>(k) - 1.0 + alpha) /
                            static_cast<double>(k) * w.coefficients[k - 1];
    return w;
}

SampledSignal frac_integral(const SampledSignal& f, const FracOrder& alpha) {
    if (!(alpha.alpha > 0.0))
        throw std::invalid_argument(
            "frac_integral: alpha must be > 0 (order 0 is the identity; apply it "
            "explicitly at the call site)");
    const std::size_t n = f.values.size();
    if (n < 2 || !(f.dt > 0.0))
        throw std::invalid_argument("frac_integral: invalid signal");
    const GLWeights w = gl_weights(alpha.alpha, n);
    const double scale = std::pow(f.dt, alpha.alpha);
    const double* A = w.coefficients.data();
    const double* fv = f.values.data();
    SampledSignal out(f.dt, std::vector<double>(n, 0.0));
    for (std::size_t i = 1; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < i; ++k) acc += A[k] * fv[i - k];
        out.values[i] = scale * acc;
    }
    return out;
}

SampledSignal frac_derivative(const SampledSignal& f, const FracOrder& alpha,
                              DerivConvention convention,
                              const std::vector<double>& init) {
    const std::size_t n = f.values.size();
    if (n < 2 || !(f.dt > 0.0))
        throw std::invalid_argument("frac_derivative: invalid signal");

    SampledSignal work = f;
    if (convention == DerivConvention::Caputo && alpha.nu > 0) {
        if (init.size() < static_cast<std::size_t>(alpha.nu))
            throw std::invalid_argument(
                "frac_derivative: Caputo needs f(0), ..., f^(nu-1)(0); got fewer "
                "initial values than nu");
        for (std::size_t i = 0; i < n; ++i) {
            const double t = f.time_at(i);
            double term = 1.0;  // t^k / k!
            double p = 0.0;
            for (int k = 0; k < alpha.nu; ++k) {
                p += init[static_cast<std::size_t>(k)] * term;
                term *= t / static_cast<double>(k + 1);
            }
            work.values[i] -= p;
        }
    }

    // Differentiation weights are the integral recursion at -alpha:
    // w_0 = 1, w_k = w_{k-1} (k - 1 - alpha)/k. Integer alpha degenerates to
    // the classical backward-difference stencil automatically.
    const GLWeights w = gl_weights(-alpha.alpha, n);
    const double scale = std::pow(f.dt, -alpha.alpha);
    const double* W = w.coefficients.data();
    const double* fv = work.values.data();
    SampledSignal out(f.dt, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k <= i; ++k) acc += W[k] * fv[i - k];
        out.values[i] = scale * acc;
    }
    return out;
}

}  // namespace fracid
