#pragma once

#include <cstddef>
#include <vector>

#include "fracid/signals.hpp"

namespace fracid {

// A fractional order alpha >= 0 together with the smallest integer nu with
// nu - 1 < alpha <= nu (nu = alpha for integer alpha, nu = 0 for alpha = 0).
struct FracOrder {
    double alpha = 0.0;
    int nu = 0;

    FracOrder() = default;
    explicit FracOrder(double a);
};

// Grunwald-Letnikov quadrature weights: coefficients[k] holds A_{k+1} with
// A_1 = 1 and A_{k+1} = ((k - 1 + alpha)/k) * A_k.
struct GLWeights {
    double alpha = 0.0;
    std::vector<double> coefficients;
};

GLWeights gl_weights(double alpha, std::size_t N);

// Fractional integral of order alpha > 0: at t = i*dt applies the
// Grunwald-Letnikov sum dt^alpha * sum_{k=0}^{i-1} A_{k+1} f((i-k)*dt).
SampledSignal frac_integral(const SampledSignal& f, const FracOrder& alpha);

enum class DerivConvention { RiemannLiouville, Caputo };

// Fractional derivative of order alpha via the Grunwald-Letnikov difference
// scheme. For the Caputo convention, init must supply f(0), ..., f^(nu-1)(0);
// the Taylor polynomial built from them is subtracted before differencing,
// which realizes exactly the operational initial-value correction.
SampledSignal frac_derivative(const SampledSignal& f, const FracOrder& alpha,
                              DerivConvention convention,
                              const std::vector<double>& init = {});

}  // namespace fracid
