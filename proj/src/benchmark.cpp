#include "fracid/benchmark.hpp"

#include <chrono>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "fracid/estimators.hpp"
#include "fracid/fracops.hpp"
#include "fracid/opcalc.hpp"
#include "fracid/signals.hpp"
#include "fracid/simulate.hpp"

namespace fracid {

namespace {

double rel_err(double est, double truth) {
    return std::abs(est - truth) / std::abs(truth);
}

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

// Reference homogeneous viscoelastic data set: (alpha, E0, E1) = (0.5, 2, 1),
// sine strain, T = 5 s, N = 4001.
struct VoigtData {
    SampledSignal eps;
    SampledSignal sigma;
};

VoigtData make_voigt_data() {
    VoigtData d;
    d.eps = test_signal(TestSignalKind::Sine, 5.0, 5.0 / 4000.0);
    VoigtParams p;
    p.E0 = 2.0;
    p.E1 = 1.0;
    p.alpha = 0.5;
    p.convention = DerivConvention::RiemannLiouville;
    d.sigma = voigt_forward(d.eps, p);
    return d;
}

CriterionResult c1_voigt_roundtrip(double scale) {
    CriterionResult r{1, "voigt-roundtrip", false, "", 0.0};
    VoigtData d = make_voigt_data();
    const auto t0 = std::chrono::steady_clock::now();
    IdentResult res = identify_voigt_hom(d.eps, d.sigma);
    const auto t1 = std::chrono::steady_clock::now();
    const double secs = std::chrono::duration<double>(t1 - t0).count();
    const double ea = rel_err(res.final_estimates.at("alpha"), 0.5);
    const double e0 = rel_err(res.final_estimates.at("E0"), 2.0);
    const double e1 = rel_err(res.final_estimates.at("E1"), 1.0);
    const double worst = std::max({ea, e0, e1});
    const bool runtime_ok = secs < 10.0;
    r.pass = worst <= 0.01 * scale && runtime_ok;
    r.seconds = secs;
    r.detail = "alpha=" + num(res.final_estimates.at("alpha")) +
               " E0=" + num(res.final_estimates.at("E0")) +
               " E1=" + num(res.final_estimates.at("E1")) +
               " max_rel_err=" + num(worst) +
               " runtime_ok=" + (runtime_ok ? std::string("yes")
                                            : std::string("no"));
    return r;
}

CriterionResult c2_voigt_noise(double scale) {
    CriterionResult r{2, "voigt-noise-40dB", false, "", 0.0};
    VoigtData d = make_voigt_data();
    const SampledSignal eps_n = add_white_noise(d.eps, 40.0, 21);
    const SampledSignal sig_n = add_white_noise(d.sigma, 40.0, 22);
    IdentResult res = identify_voigt_hom(eps_n, sig_n);
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t k = 0; k < res.eval_times.size(); ++k) {
        if (res.eval_times[k] <= 3.0) continue;
        ++checked;
        worst = std::max(worst,
                         rel_err(res.trajectories.at("alpha")[k], 0.5));
        worst =
            std::max(worst, rel_err(res.trajectories.at("E0")[k], 2.0));
        worst =
            std::max(worst, rel_err(res.trajectories.at("E1")[k], 1.0));
    }
    r.pass = checked > 0 && worst <= 0.02 * scale;
    r.detail = "times_checked=" + std::to_string(checked) +
               " worst_rel_err=" + num(worst);
    return r;
}

CriterionResult c3_gl_quadrature(double scale) {
    CriterionResult r{3, "gl-quadrature", false, "", 0.0};
    const double truth = 1.0 / std::tgamma(2.5);
    std::vector<double> errs;
    for (std::size_t n : {std::size_t{251}, std::size_t{1001},
                          std::size_t{4001}}) {
        const double dt = 1.0 / static_cast<double>(n - 1);
        SampledSignal f = sample_function(dt, n, [](double t) { return t; });
        SampledSignal jf = frac_integral(f, FracOrder(0.5));
        errs.push_back(rel_err(jf.values[n - 1], truth));
    }
    const bool monotone = errs[0] > errs[1] && errs[1] > errs[2];
    r.pass = monotone && errs[2] <= 0.005 * scale;
    r.detail = "err_N251=" + num(errs[0]) + " err_N1001=" + num(errs[1]) +
               " err_N4001=" + num(errs[2]) +
               " monotone=" + (monotone ? std::string("yes")
                                        : std::string("no"));
    return r;
}

CriterionResult c4_oracle_equivalence(double scale) {
    CriterionResult r{4, "oracle-equivalence", false, "", 0.0};
    const ModelSpec spec =
        voigt_model_spec(DerivConvention::RiemannLiouville,
                         InitRegime::Homogeneous);
    VoigtParams p;
    p.E0 = 2.0;
    p.E1 = 1.0;
    p.alpha = 0.5;

    double worst = 0.0;
    for (int input = 0; input < 2; ++input) {
        SampledSignal eps;
        if (input == 0) {
            eps = test_signal(TestSignalKind::Sine, 5.0, 5.0 / 4000.0);
        } else {
            TestSignalParams tp;
            tp.seed = 7;
            eps = test_signal(TestSignalKind::PrbsSmoothed, 5.0, 5.0 / 4000.0,
                              tp);
        }
        SampledSignal sigma = voigt_forward(eps, p);
        auto hand = voigt_hom_equations(eps, sigma, 2);
        auto gen = general_equations(spec, eps, sigma, 2);
        if (hand.size() != gen.size())
            throw std::logic_error("equation count mismatch");
        for (std::size_t j = 0; j < hand.size(); ++j) {
            if (hand[j].size() != gen[j].size())
                throw std::logic_error("monomial set mismatch");
            for (const auto& [m, hsig] : hand[j]) {
                auto it = gen[j].find(m);
                if (it == gen[j].end())
                    throw std::logic_error("missing monomial " + m.str());
                double diff = 0.0, denom = 0.0;
                for (std::size_t i = 0; i < hsig.size(); ++i) {
                    diff = std::max(
                        diff, std::abs(hsig.values[i] - it->second.values[i]));
                    denom = std::max(denom, std::abs(hsig.values[i]));
                }
                worst = std::max(worst, diff / std::max(denom, 1e-300));
            }
        }
    }
    r.pass = worst <= 1e-9 * scale;
    r.detail = "worst_rel_diff=" + num(worst);
    return r;
}

CriterionResult c5_elimination_residual(double scale) {
    CriterionResult r{5, "elimination-residual", false, "", 0.0};
    VoigtData d = make_voigt_data();
    const ModelSpec spec =
        voigt_model_spec(DerivConvention::RiemannLiouville,
                         InitRegime::Homogeneous);
    auto eqs = general_equations(spec, d.eps, d.sigma, 0);
    const auto& base = eqs.front();
    const std::size_t i = d.eps.size() - 1;  // t = 5 s
    const std::map<Monomial, double> truth_vals{
        {Monomial::symbol("alpha"), 0.5},
        {Monomial::symbol("alpha").times(Monomial::symbol("E0")), 1.0}};
    double resid = 0.0, maxent = 0.0;
    for (const auto& [m, sig] : base) {
        const double v = sig.values[i];
        maxent = std::max(maxent, std::abs(v));
        if (m.is_one())
            resid += v;
        else
            resid += truth_vals.at(m) * v;
    }
    const double ratio = std::abs(resid) / std::max(maxent, 1e-300);
    r.pass = ratio <= 1e-3 * scale;
    r.detail = "residual_ratio=" + num(ratio);
    return r;
}

CriterionResult c6_caputo_inhomogeneous(double scale) {
    CriterionResult r{6, "caputo-inhomogeneous", false, "", 0.0};
    const double dt = 5.0 / 4000.0;
    const std::size_t n = 4001;

    // eps(0) = 0.3 on top of a smooth sine.
    SampledSignal eps = sample_function(
        dt, n, [](double t) { return 0.3 + std::sin(t); });
    VoigtParams p;
    p.E0 = 2.0;
    p.E1 = 1.0;
    p.alpha = 0.5;
    p.convention = DerivConvention::Caputo;
    p.init = {0.3};
    SampledSignal sigma = voigt_forward(eps, p);

    IdentResult idf =
        identify_voigt_inhom_caputo(eps, sigma, InitHandling::IdentifyInit);
    const double e_ia = rel_err(idf.final_estimates.at("alpha"), 0.5);
    const double e_i0 = rel_err(idf.final_estimates.at("E0"), 2.0);
    const double e_ix = rel_err(idf.final_estimates.at("eps0"), 0.3);

    IdentResult elm =
        identify_voigt_inhom_caputo(eps, sigma, InitHandling::EliminateInit);
    const double e_ea = rel_err(elm.final_estimates.at("alpha"), 0.5);
    const double e_e0 = rel_err(elm.final_estimates.at("E0"), 2.0);

    // Zero initial strain: both modes must agree with the homogeneous path.
    SampledSignal eps0 = test_signal(TestSignalKind::Sine, 5.0, dt);
    VoigtParams p0 = p;
    p0.init = {0.0};
    SampledSignal sigma0 = voigt_forward(eps0, p0);
    IdentResult hom = identify_voigt_hom(eps0, sigma0);
    IdentResult idf0 =
        identify_voigt_inhom_caputo(eps0, sigma0, InitHandling::IdentifyInit);
    IdentResult elm0 =
        identify_voigt_inhom_caputo(eps0, sigma0, InitHandling::EliminateInit);
    double agree = 0.0;
    for (const char* name : {"alpha", "E0"}) {
        const double h = hom.final_estimates.at(name);
        agree = std::max(agree,
                         rel_err(idf0.final_estimates.at(name), h));
        agree = std::max(agree,
                         rel_err(elm0.final_estimates.at(name), h));
    }

    const double worst =
        std::max({e_ia, e_i0, e_ix, e_ea, e_e0, agree});
    r.pass = worst <= 0.01 * scale;
    r.detail = "identify(alpha,E0,eps0)=(" + num(e_ia) + "," + num(e_i0) +
               "," + num(e_ix) + ") eliminate(alpha,E0)=(" + num(e_ea) + "," +
               num(e_e0) + ") zero_init_agreement=" + num(agree);
    return r;
}

CriterionResult c7_diffusion_wave(double scale) {
    CriterionResult r{7, "diffusion-wave", false, "", 0.0};
    const double T = 10.0;
    const std::size_t n = 4001;
    const double dt = T / static_cast<double>(n - 1);
    // Smooth compact pulse on [0, 2].
    SampledSignal h = sample_function(dt, n, [](double t) {
        return t < 2.0 ? 0.5 * (1.0 - std::cos(std::numbers::pi * t)) : 0.0;
    });

    WaveParams wp2;
    wp2.alpha = 2.0;
    wp2.c = 0.5;
    SampledSignal g2 = diffusion_wave_forward(h, wp2);
    IdentResult res2 =
        identify_diffusion_wave(h, g2, KnownWaveQuantity::RatioOnly);
    const double e2a = rel_err(res2.final_estimates.at("alpha"), 2.0);
    const double e2c = rel_err(res2.final_estimates.at("c"), 0.5);

    WaveParams wp1;
    wp1.alpha = 1.0;
    wp1.c = 0.5;
    SampledSignal g1 = diffusion_wave_forward(h, wp1);
    IdentResult res1 =
        identify_diffusion_wave(h, g1, KnownWaveQuantity::RatioOnly);
    const double e1a = rel_err(res1.final_estimates.at("alpha"), 1.0);

    r.pass = e2a <= 0.01 * scale && e2c <= 0.01 * scale && e1a <= 0.02 * scale;
    r.detail = "alpha2_err=" + num(e2a) + " c_err=" + num(e2c) +
               " alpha1_err=" + num(e1a);
    return r;
}

CriterionResult c8_property_suites(double scale) {
    CriterionResult r{8, "property-suites", false, "", 0.0};
    VoigtData d = make_voigt_data();

    // (a) convolution commutativity, bit-exact.
    const auto same_bits = [](const SampledSignal& a, const SampledSignal& b) {
        return a.dt == b.dt && a.values == b.values;
    };
    bool commut =
        same_bits(convolve(d.eps, d.sigma), convolve(d.sigma, d.eps));
    {
        TestSignalParams tp;
        tp.seed = 3;
        SampledSignal a =
            test_signal(TestSignalKind::PrbsSmoothed, 5.0, 5.0 / 4000.0, tp);
        SampledSignal b = test_signal(TestSignalKind::SmoothStep, 5.0,
                                      5.0 / 4000.0);
        commut = commut && same_bits(convolve(a, b), convolve(b, a));
    }

    // (b) lowering homomorphism: lower(s^-1 e) == I(lower(e)) entry-wise.
    double homo = 0.0;
    {
        OpExpr e = OpExpr::term(ParamPoly::constant(1), 0,
                                {FactorKey{"eps", 0}, FactorKey{"sig", 1}}) +
                   OpExpr::term(ParamPoly::symbol("alpha"), 0,
                                {FactorKey{"eps", 0}, FactorKey{"eps", 0}});
        const std::map<std::string, SampledSignal> bind{{"eps", d.eps},
                                                        {"sig", d.sigma}};
        auto lhs = lower(e.shifted_s(-1), bind);
        auto rhs_base = lower(e, bind);
        for (const auto& [m, sig] : rhs_base) {
            SampledSignal ri = repeated_integral(sig, 1);
            const auto& ls = lhs.at(m);
            double diff = 0.0, denom = 0.0;
            for (std::size_t i = 0; i < ri.size(); ++i) {
                diff = std::max(diff, std::abs(ri.values[i] - ls.values[i]));
                denom = std::max(denom, std::abs(ls.values[i]));
            }
            homo = std::max(homo, diff / std::max(denom, 1e-300));
        }
    }

    // (c) d/ds derivation law, structural equality.
    bool dds_ok = true;
    {
        OpExpr e1 = OpExpr::term(ParamPoly::symbol("alpha"), 1,
                                 {FactorKey{"eps", 0}, FactorKey{"eps", 0}});
        OpExpr e2 = OpExpr::term(ParamPoly::constant(1), -2,
                                 {FactorKey{"sig", 1}});
        dds_ok = dds_ok &&
                 ((e1 * e2).dds() == e1.dds() * e2 + e1 * e2.dds());
        OpExpr c3 = OpExpr::constant(ParamPoly::constant(1), 3);
        dds_ok = dds_ok && (c3.dds() == OpExpr::constant(ParamPoly::constant(3), 2));
    }

    // (d) Cauchy-kernel nesting within quadrature tolerance.
    double cauchy = 0.0;
    double cauchy_tol;
    {
        const std::size_t n = 1001;
        const double dt = 2.0 / static_cast<double>(n - 1);
        SampledSignal k2 = cauchy_kernel(dt, n, 2);
        SampledSignal k4 = cauchy_kernel(dt, n, 4);
        SampledSignal nested = convolve(k2, k2);
        double maxk = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            cauchy = std::max(cauchy,
                              std::abs(nested.values[i] - k4.values[i]));
            maxk = std::max(maxk, std::abs(k4.values[i]));
        }
        cauchy_tol = 10.0 * dt * dt * maxk;
    }

    // (e) GL weight recursion exact on the first 10 weights.
    bool gl_ok = true;
    {
        GLWeights w = gl_weights(0.5, 10);
        double A = 1.0;
        for (std::size_t k = 0; k < 10; ++k) {
            if (w.coefficients[k] != A) gl_ok = false;
            A *= (static_cast<double>(k) + 0.5) /
                 (static_cast<double>(k) + 1.0);
        }
    }

    // (f) scaling equivariance of the homogeneous estimates.
    double equiv = 0.0;
    {
        IdentResult a = identify_voigt_hom(d.eps, d.sigma);
        IdentResult b =
            identify_voigt_hom(4.0 * d.eps, 4.0 * d.sigma);
        for (const char* nm : {"alpha", "E0", "E1"})
            equiv = std::max(equiv, rel_err(b.final_estimates.at(nm),
                                            a.final_estimates.at(nm)));
    }

    const bool pass = commut && homo <= 1e-12 * scale && dds_ok &&
                      cauchy <= cauchy_tol * scale && gl_ok &&
                      equiv <= 1e-9 * scale;
    r.pass = pass;
    r.detail = std::string("commutativity=") + (commut ? "exact" : "BROKEN") +
               " homomorphism=" + num(homo) + " dds_law=" +
               (dds_ok ? "ok" : "BROKEN") + " cauchy_nesting=" + num(cauchy) +
               " gl_weights=" + (gl_ok ? "exact" : "BROKEN") +
               " scaling_equivariance=" + num(equiv);
    return r;
}

}  // namespace

CriterionResult run_criterion(int index, double tolerance_scale) {
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    switch (index) {
        case 1: r = c1_voigt_roundtrip(tolerance_scale); break;
        case 2: r = c2_voigt_noise(tolerance_scale); break;
        case 3: r = c3_gl_quadrature(tolerance_scale); break;
        case 4: r = c4_oracle_equivalence(tolerance_scale); break;
        case 5: r = c5_elimination_residual(tolerance_scale); break;
        case 6: r = c6_caputo_inhomogeneous(tolerance_scale); break;
        case 7: r = c7_diffusion_wave(tolerance_scale); break;
        case 8: r = c8_property_suites(tolerance_scale); break;
        default:
            throw std::invalid_argument("criterion index must be 1..8");
    }
    const auto t1 = std::chrono::steady_clock::now();
    if (r.seconds == 0.0)
        r.seconds = std::chrono::duration<double>(t1 - t0).count();
    return r;
}

std::vector<CriterionResult> run_benchmark_suite(
    const std::vector<int>& indices, double tolerance_scale) {
    if (indices.empty())
        throw std::invalid_argument("empty benchmark case selection");
    std::vector<CriterionResult> out;
    out.reserve(indices.size());
    for (int i : indices) out.push_back(run_criterion(i, tolerance_scale));
    return out;
}

std::string benchmark_report(const std::vector<CriterionResult>& results) {
    std::ostringstream os;
    std::size_t passed = 0;
    for (const auto& r : results) {
        os << "criterion " << r.index << " [" << r.name << "]: "
           << (r.pass ? "PASS" : "FAIL") << " — " << r.detail << "\n";
        if (r.pass) ++passed;
    }
    os << "passed " << passed << "/" << results.size() << "\n";
    return os.str();
}

}  // namespace fracid
