#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracid/fracops.hpp"
#include "fracid/opcalc.hpp"
#include "fracid/signals.hpp"

namespace fracid {

// ---------------------------------------------------------------------------
// End-to-end identification pipelines. Every estimate is obtained from linear
// (least-squares) problems whose entries are convolutions and integrals of
// the measured signals — no numerical differentiation anywhere.
// ---------------------------------------------------------------------------

// Laurent polynomial in s with parameter-polynomial coefficients; the
// coefficient functions a_j(s), b_j(s) of an exponent group.
struct LaurentPoly {
    std::map<int, ParamPoly> terms;  // s-power -> coefficient

    static LaurentPoly zero() { return {}; }
    static LaurentPoly single(int power, const ParamPoly& c);
    bool is_zero() const;
    int max_power() const;  // 0 for the zero polynomial
};

// One exponent group (a(s)·y - b(s)·u) · s^tag of the grouped model form.
struct ModelGroup {
    Tag tag;
    LaurentPoly a;  // acts on the output signal
    LaurentPoly b;  // acts on the input signal
};

enum class InitRegime {
    Homogeneous,             // all initial values zero by assumption
    InhomogeneousEliminate,  // initial values removed algebraically
    InhomogeneousIdentify,   // initial values joined to the unknowns
};

struct ModelSpec {
    DerivConvention convention = DerivConvention::RiemannLiouville;
    InitRegime regime = InitRegime::Homogeneous;
    std::vector<ModelGroup> groups;
    // Unknown partition: theta1 survives the determinant elimination (orders
    // and coefficients inside group expressions); theta2 holds symbols that
    // only appear as common factors of whole groups and are recovered in the
    // second stage.
    std::set<std::string> theta1;
    std::set<std::string> theta2;
    int nu_bound = 0;  // integer upper bound on all orders (inhomogeneous)
    std::string y_id = "y";
    std::string u_id = "u";

    // Throws std::invalid_argument when structurally unusable: no groups, no
    // known exponent anchor, overlapping unknown sets, missing order bound in
    // an inhomogeneous regime, or a symbolic exponent missing from theta1.
    void validate() const;
};

struct IdentOpts {
    // Extra integrated copies of the identification equation; negative means
    // (number of unknown monomials) + 2.
    int n_extra = -1;
    // Evaluation-time sweep: negative start means 0.4 * horizon.
    double eval_start = -1.0;
    int eval_points = 25;
    // Smallest singular value (of the row-scaled regressor) below which a
    // time is treated as ill-conditioned.
    double sv_threshold = 1e-10;
    // Monomial-coherence level above which the result is flagged.
    double coherence_threshold = 1e-2;
};

// A stacked linear system: rows = generated equations x evaluation times,
// columns = unknown parameter monomials.
struct RegressorSystem {
    std::vector<Monomial> labels;
    std::vector<std::vector<double>> matrix;
    std::vector<double> rhs;
    std::vector<double> row_times;  // evaluation time of each row
};

struct IdentResult {
    std::vector<std::string> param_names;
    std::vector<double> eval_times;
    // Estimate trajectory per parameter, one value per evaluation time.
    std::map<std::string, std::vector<double>> trajectories;
    std::map<std::string, double> final_estimates;
    std::vector<double> sv_trajectory;
    std::vector<double> coherence_trajectory;
    double min_singular_value = 0.0;  // at the final selected time
    double coherence = 0.0;           // at the final selected time
    double final_time = 0.0;          // last well-conditioned evaluation time
    std::vector<std::string> flags;   // warnings (range checks, skips)

    // One row per evaluation time: t, parameters, coherence, smallest
    // singular value.
    void write_csv(const std::string& path) const;
};

// Raised when the regressor is singular/ill-conditioned at every evaluation
// time (e.g. zero signals).
class SingularSystemError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class InitHandling { IdentifyInit, EliminateInit };

// The three-parameter viscoelastic model as a ModelSpec (output "sig",
// input "eps"; theta1 = {alpha, E0}, theta2 = {E1}, order bound 1).
ModelSpec voigt_model_spec(DerivConvention convention, InitRegime regime);

// Hand-coded lowered identification equations for the homogeneous
// viscoelastic model (the independent oracle for the mechanized pipeline):
// equation 0 entries are
//   known: eps*(-t sig) - sig*(-t eps),  alpha: -I(eps*sig),
//   alpha*E0: +I(eps*eps)
// and equation j integrates entry-wise j times.
std::vector<std::map<Monomial, SampledSignal>> voigt_hom_equations(
    const SampledSignal& eps, const SampledSignal& sigma, int n_extra);

// Mechanized lowered equations for an arbitrary grouped model: group fold,
// initial-value handling, operator-matrix determinant, normalization,
// lowering, and integral stacking.
std::vector<std::map<Monomial, SampledSignal>> general_equations(
    const ModelSpec& model, const SampledSignal& u, const SampledSignal& y,
    int n_extra);

// The normalized determinant-elimination operator equation of a model — the
// symbolic object whose numeric lowering produces `general_equations`.
OpExpr elimination_equation(const ModelSpec& model);

// The fixed scalar elimination equation of the diffusion-wave estimator,
// linear in the order symbol "alpha" (boundary signals "g" and "h").
OpExpr diffusion_elimination_equation();

IdentResult identify_voigt_hom(const SampledSignal& eps,
                               const SampledSignal& sigma,
                               const IdentOpts& opts = {});

IdentResult identify_voigt_inhom_rl(const SampledSignal& eps,
                                    const SampledSignal& sigma,
                                    InitHandling mode,
                                    const IdentOpts& opts = {});

IdentResult identify_voigt_inhom_caputo(const SampledSignal& eps,
                                        const SampledSignal& sigma,
                                        InitHandling mode,
                                        const IdentOpts& opts = {});

IdentResult identify_general(const ModelSpec& model, const SampledSignal& u,
                             const SampledSignal& y,
                             const IdentOpts& opts = {});

// Second stage: substitutes the first-stage estimates, multiplies the model
// equation by s^-nu so every term becomes a (fractional) integral, and solves
// the stacked linear system for theta2. theta1_hat must hold every
// first-stage unknown (including identified initial values).
std::map<std::string, double> recover_theta2(
    const ModelSpec& model, const std::map<std::string, double>& theta1_hat,
    const SampledSignal& u, const SampledSignal& y,
    const IdentOpts& opts = {});

enum class KnownWaveQuantity { Distance, Speed, RatioOnly };

// Boundary-signal estimator for the diffusion-wave transfer operator: the
// order alpha from the scalar linear equation obtained by eliminating the
// exponential and s^(alpha/2), then the transit ratio c from the first-order
// relation. `known_value` is L (Distance) or v (Speed); ignored for
// RatioOnly.
IdentResult identify_diffusion_wave(const SampledSignal& h,
                                    const SampledSignal& g,
                                    KnownWaveQuantity known,
                                    double known_value = 0.0,
                                    const IdentOpts& opts = {});

}  // namespace fracid
