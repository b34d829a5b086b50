#include "fracid/signals.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fracid {

namespace {

void require_valid(const SampledSignal& s) {
    if (!(s.dt > 0.0))
        throw std::invalid_argument("SampledSignal: dt must be positive");
    if (s.values.size() < 2)
        throw std::invalid_argument("SampledSignal: need at least 2 samples");
}

void require_same_grid(const SampledSignal& a, const SampledSignal& b) {
    if (!a.same_grid(b))
        throw std::invalid_argument("signal grid mismatch");
}

}  // namespace

SampledSignal::SampledSignal(double dt_, std::vector<double> values_)
    : dt(dt_), values(std::move(values_)) {
    require_valid(*this);
}

bool SampledSignal::same_grid(const SampledSignal& other) const {
    return dt == other.dt && values.size() == other.values.size();
}

SampledSignal sample_function(double dt, std::size_t n,
                              const std::function<double(double)>& f) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = f(dt * static_cast<double>(i));
    return SampledSignal(dt, std::move(v));
}

SampledSignal operator+(const SampledSignal& a, const SampledSignal& b) {
    require_same_grid(a, b);
    SampledSignal out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += b.values[i];
    return out;
}

SampledSignal operator-(const SampledSignal& a, const SampledSignal& b) {
    require_same_grid(a, b);
    SampledSignal out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= b.values[i];
    return out;
}

SampledSignal operator*(double c, const SampledSignal& a) {
    SampledSignal out = a;
    for (double& v : out.values) v *= c;
    return out;
}

SampledSignal convolve(const SampledSignal& f, const SampledSignal& g) {
    require_valid(f);
    require_same_grid(f, g);
    const std::size_t n = f.values.size();
    const double dt = f.dt;
    const double* fv = f.values.data();
    const double* gv = g.values.data();
    SampledSignal out(dt, std::vector<double>(n, 0.0));
    for (std::size_t i = 1; i < n; ++i) {
        // Trapezoid sum dt * [ (f0 gi + fi g0)/2 + sum_{0<j<i} fj g_{i-j} ],
        // accumulated pairwise (j with i-j) so swapping f and g reorders only
        // the operands of IEEE + and *, which commute: bit-exact symmetry.
        double acc = 0.5 * (fv[0] * gv[i] + fv[i] * gv[0]);
        for (std::size_t j = 1; 2 * j < i; ++j)
            acc += fv[j] * gv[i - j] + fv[i - j] * gv[j];
        if (i % 2 == 0) acc += fv[i / 2] * gv[i / 2];
        out.values[i] = dt * acc;
    }
    return out;
}

SampledSignal cauchy_kernel(double dt, std::size_t n, int k) {
    if (k < 1) throw std::invalid_argument("cauchy_kernel: k must be >= 1");
    double fact = 1.0;
    for (int m = 2; m < k; ++m) fact *= static_cast<double>(m);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (k == 1) {
            v[i] = 1.0;
        } else {
            double t = dt * static_cast<double>(i);
            double p = 1.0;
            for (int m = 0; m < k - 1; ++m) p *= t;
            v[i] = p / fact;
        }
    }
    return SampledSignal(dt, std::move(v));
}

SampledSignal repeated_integral(const SampledSignal& y, int k) {
    require_valid(y);
    if (k < 1)
        throw std::invalid_argument(
            "repeated_integral: k must be >= 1 (use the signal itself for k = 0)");
    return convolve(y, cauchy_kernel(y.dt, y.values.size(), k));
}

SampledSignal t_weight(const SampledSignal& f, int j) {
    require_valid(f);
    if (j < 0) throw std::invalid_argument("t_weight: j must be >= 0");
    if (j == 0) return f;
    SampledSignal out = f;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        const double mt = -f.time_at(i);
        double w = 1.0;
        for (int m = 0; m < j; ++m) w *= mt;
        out.values[i] *= w;
    }
    return out;
}

SampledSignal add_white_noise(const SampledSignal& f, double snr_db,
                              std::uint64_t seed) {
    require_valid(f);
    if (std::isinf(snr_db) && snr_db > 0) return f;
    double power = 0.0;
    for (double v : f.values) power += v * v;
    power /= static_cast<double>(f.values.size());
    if (power == 0.0)
        throw std::invalid_argument("add_white_noise: zero-power signal");
    const double sd = std::sqrt(power * std::pow(10.0, -snr_db / 10.0));

    // Box-Muller over the fully specified mt19937_64 stream: the standard
    // library's normal_distribution has an implementation-defined sequence,
    // which would break byte-determinism across toolchains.
    std::mt19937_64 rng(seed);
    auto uniform = [&rng]() {
        return static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
    };
    SampledSignal out = f;
    const double two_pi = 6.283185307179586476925286766559;
    double cached = 0.0;
    bool has_cached = false;
    for (double& v : out.values) {
        double z;
        if (has_cached) {
            z = cached;
            has_cached = false;
        } else {
            const double u1 = 1.0 - uniform();  // (0, 1]
            const double u2 = uniform();
            const double r = std::sqrt(-2.0 * std::log(u1));
            z = r * std::cos(two_pi * u2);
            cached = r * std::sin(two_pi * u2);
            has_cached = true;
        }
        v += sd * z;
    }
    return out;
}

void write_signal_csv(const std::string& path, const SampledSignal& s) {
    require_valid(s);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "t,value\n";
    char line[80];
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        std::snprintf(line, sizeof line, "%.17g,%.17g\n", s.time_at(i),
                      s.values[i]);
        out << line;
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

SampledSignal read_signal_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty signal file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t,value")
        throw std::runtime_error("bad CSV header (expected \"t,value\"): " + path);

    std::vector<double> ts, vs;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("bad CSV row at line " +
                                     std::to_string(lineno) + ": " + path);
        std::size_t pos1 = 0, pos2 = 0;
        double t, v;
        try {
            t = std::stod(line.substr(0, comma), &pos1);
            v = std::stod(line.substr(comma + 1), &pos2);
        } catch (const std::exception&) {
            throw std::runtime_error("unparsable CSV row at line " +
                                     std::to_string(lineno) + ": " + path);
        }
        ts.push_back(t);
        vs.push_back(v);
    }
    if (ts.size() < 2)
        throw std::runtime_error("signal needs at least 2 samples: " + path);

    const double dt = ts[1] - ts[0];
    if (!(dt > 0.0))
        throw std::runtime_error("time column must be strictly increasing: " + path);
    const double tol = 1e-9 * dt;
    if (std::abs(ts[0]) > tol)
        throw std::runtime_error("signal must start at t = 0: " + path);
    for (std::size_t i = 1; i + 1 < ts.size(); ++i) {
        const double step = ts[i + 1] - ts[i];
        if (std::abs(step - dt) > tol)
            throw std::runtime_error("non-uniform time grid near line " +
                                     std::to_string(i + 3) + ": " + path);
    }
    return SampledSignal(dt, std::move(vs));
}

}  // namespace fracid
