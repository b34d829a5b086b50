#include "fracid/estimators.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <utility>

namespace fracid {

namespace {

double rat_to_double(const Rational& r) { return r.convert_to<double>(); }

bool tag_is_integer(const Tag& t) {
    return t.is_known && boost::multiprecision::denominator(t.value) == 1;
}

int tag_as_int(const Tag& t) {
    return boost::multiprecision::numerator(t.value).convert_to<int>();
}

SampledSignal times_t(const SampledSignal& f) {
    return (-1.0) * t_weight(f, 1);
}

// Grunwald-Letnikov fractional integral of order alpha > 0 evaluated at one
// sample index, O(i) without allocating the weight table.
double gl_integral_at(const SampledSignal& f, double alpha, std::size_t i) {
    double acc = 0.0;
    double A = 1.0;  // A_{k+1}, starting at A_1 = 1
    for (std::size_t k = 0; k < i; ++k) {
        acc += A * f.values[i - k];
        A *= (static_cast<double>(k) + alpha) / (static_cast<double>(k) + 1.0);
    }
    return std::pow(f.dt, alpha) * acc;
}

// Trapezoidal k-fold integral (kernel form) at one sample index, k >= 0.
double repeated_integral_at(const SampledSignal& f, int k, std::size_t i) {
    if (k == 0) return f.values[i];
    const double dt = f.dt;
    double acc = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
        const double tau = dt * static_cast<double>(i - j);
        const double kern =
            (k == 1) ? 1.0 : std::pow(tau, k - 1) / std::tgamma(k);
        const double w = (j == 0 || j == i) ? 0.5 : 1.0;
        acc += w * f.values[j] * kern;
    }
    return dt * acc;
}

// t^(m-1)/Gamma(m) at t = i*dt (the lowering of a factor-free s^-m, m >= 1
// possibly fractional).
double power_kernel_at(double m, double dt, std::size_t i) {
    const double t = dt * static_cast<double>(i);
    if (t == 0.0) return std::abs(m - 1.0) < 1e-12 ? 1.0 : 0.0;
    return std::pow(t, m - 1.0) / std::tgamma(m);
}

std::vector<std::size_t> eval_indices(std::size_t n, double dt,
                                      const IdentOpts& opts) {
    const double T = dt * static_cast<double>(n - 1);
    double start = opts.eval_start < 0.0 ? 0.4 * T : opts.eval_start;
    start = std::min(std::max(start, dt), T);
    const int points = std::max(1, opts.eval_points);
    std::vector<std::size_t> idx;
    for (int k = 0; k < points; ++k) {
        const double frac =
            points == 1 ? 1.0
                        : static_cast<double>(k) / static_cast<double>(points - 1);
        const double t = start + frac * (T - start);
        auto i = static_cast<std::size_t>(std::llround(t / dt));
        i = std::min(std::max<std::size_t>(i, 1), n - 1);
        if (idx.empty() || idx.back() < i) idx.push_back(i);
    }
    return idx;
}

// ---------------------------------------------------------------------------
// Shared first-stage solver: per evaluation time, row-scaled least squares on
// the generated equations, then back-substitution of the parameter monomials.
// ---------------------------------------------------------------------------

struct BackSolveOut {
    std::map<std::string, double> phys;
    double coherence = 0.0;
    bool ok = false;
};

BackSolveOut back_solve(const std::vector<Monomial>& labels,
                        const Eigen::VectorXd& theta,
                        const std::set<std::string>& symbols) {
    BackSolveOut out;
    std::map<Monomial, double> est;
    for (std::size_t c = 0; c < labels.size(); ++c)
        est[labels[c]] = theta(static_cast<Eigen::Index>(c));

    double scale = 0.0;
    for (const auto& [m, v] : est) scale = std::max(scale, std::abs(v));
    const double tiny = 1e-14 * std::max(1.0, scale);

    bool progress = true;
    while (progress) {
        progress = false;
        for (const auto& [m, v] : est) {  // ascending: lowest degree first
            std::string unsolved;
            int unsolved_power = 0;
            int n_unsolved = 0;
            double rest = 1.0;
            for (const auto& [name, p] : m.powers) {
                auto it = out.phys.find(name);
                if (it == out.phys.end()) {
                    unsolved = name;
                    unsolved_power = p;
                    ++n_unsolved;
                } else {
                    rest *= std::pow(it->second, p);
                }
            }
            if (n_unsolved == 1 && unsolved_power == 1 &&
                std::abs(rest) > tiny) {
                out.phys[unsolved] = v / rest;
                progress = true;
            }
        }
    }

    out.ok = true;
    for (const auto& s : symbols)
        if (!out.phys.count(s)) out.ok = false;

    if (out.ok) {
        double maxres = 0.0;
        for (const auto& [m, v] : est) {
            double pred = 1.0;
            bool full = true;
            for (const auto& [name, p] : m.powers) {
                auto it = out.phys.find(name);
                if (it == out.phys.end()) {
                    full = false;
                    break;
                }
                pred *= std::pow(it->second, p);
            }
            if (full) maxres = std::max(maxres, std::abs(v - pred));
        }
        out.coherence = maxres / std::max(scale, 1e-300);
    }
    return out;
}

struct SweepCore {
    std::vector<Monomial> labels;
    std::set<std::string> symbols;
    std::vector<std::size_t> idx;
    std::vector<double> times;
    std::vector<Eigen::VectorXd> theta;
    std::vector<double> sv;
    std::vector<double> coherence;
    std::vector<std::map<std::string, double>> phys;
    std::vector<char> ok;
    int final_k = -1;
    double dt = 0.0;
};

SweepCore run_sweep(const std::vector<std::map<Monomial, SampledSignal>>& eqs,
                    const IdentOpts& opts) {
    if (eqs.empty()) throw std::invalid_argument("no equations to solve");
    SweepCore core;
    const SampledSignal* known0 = nullptr;
    for (const auto& [m, sig] : eqs.front()) {
        if (m.is_one())
            known0 = &sig;
        else
            core.labels.push_back(m);
    }
    if (known0 == nullptr)
        throw std::invalid_argument(
            "lowered equation has no known-signal part to regress against");
    if (core.labels.empty())
        throw std::invalid_argument("model has no first-stage unknowns");
    for (const auto& m : core.labels)
        for (const auto& [name, p] : m.powers) core.symbols.insert(name);

    const std::size_t rows = eqs.size();
    const std::size_t cols = core.labels.size();
    if (rows < cols)
        throw std::invalid_argument(
            "fewer generated equations than unknown monomials — increase "
            "n_extra");

    // Dense views in label order.
    std::vector<const SampledSignal*> knowns(rows);
    std::vector<std::vector<const SampledSignal*>> colsig(
        rows, std::vector<const SampledSignal*>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        auto itk = eqs[r].find(Monomial::one());
        if (itk == eqs[r].end())
            throw std::invalid_argument("equation lost its known part");
        knowns[r] = &itk->second;
        for (std::size_t c = 0; c < cols; ++c) {
            auto it = eqs[r].find(core.labels[c]);
            if (it == eqs[r].end())
                throw std::invalid_argument(
                    "generated equations disagree on the monomial set");
            colsig[r][c] = &it->second;
        }
    }

    core.dt = known0->dt;
    const std::size_t n = known0->size();
    core.idx = eval_indices(n, core.dt, opts);
    double worst_sv = std::numeric_limits<double>::infinity();

    for (std::size_t i : core.idx) {
        core.times.push_back(core.dt * static_cast<double>(i));
        Eigen::MatrixXd A(rows, cols);
        Eigen::VectorXd b(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            double s = std::abs(knowns[r]->values[i]);
            for (std::size_t c = 0; c < cols; ++c)
                s = std::max(s, std::abs(colsig[r][c]->values[i]));
            if (s == 0.0) s = 1.0;
            for (std::size_t c = 0; c < cols; ++c)
                A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    colsig[r][c]->values[i] / s;
            b(static_cast<Eigen::Index>(r)) = -knowns[r]->values[i] / s;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(
            A, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const double sv_min =
            svd.singularValues()(svd.singularValues().size() - 1);
        worst_sv = std::min(worst_sv, sv_min);
        Eigen::VectorXd th = svd.solve(b);
        core.theta.push_back(th);
        core.sv.push_back(sv_min);
        bool cond_ok = sv_min >= opts.sv_threshold;
        BackSolveOut bs;
        if (cond_ok) bs = back_solve(core.labels, th, core.symbols);
        core.phys.push_back(bs.phys);
        core.coherence.push_back(bs.coherence);
        core.ok.push_back(cond_ok && bs.ok ? 1 : 0);
    }

    for (std::size_t k = 0; k < core.ok.size(); ++k)
        if (core.ok[k]) core.final_k = static_cast<int>(k);
    if (core.final_k < 0) {
        std::ostringstream msg;
        msg << "identification system is singular or unsolvable at every "
               "evaluation time (smallest singular value "
            << worst_sv << ")";
        throw SingularSystemError(msg.str());
    }
    return core;
}

IdentResult result_from_sweep(const SweepCore& core) {
    IdentResult res;
    res.eval_times = core.times;
    res.sv_trajectory = core.sv;
    res.coherence_trajectory = core.coherence;
    for (const auto& s : core.symbols) res.param_names.push_back(s);
    bool incomplete = false;
    for (const auto& name : res.param_names) {
        std::vector<double> tr(core.times.size(), 0.0);
        for (std::size_t k = 0; k < core.times.size(); ++k) {
            auto it = core.phys[k].find(name);
            if (it != core.phys[k].end())
                tr[k] = it->second;
            else
                incomplete = true;
        }
        res.trajectories[name] = std::move(tr);
    }
    const auto fk = static_cast<std::size_t>(core.final_k);
    for (const auto& name : res.param_names)
        res.final_estimates[name] = core.phys[fk].at(name);
    res.min_singular_value = core.sv[fk];
    res.coherence = core.coherence[fk];
    res.final_time = core.times[fk];
    if (incomplete)
        res.flags.push_back(
            "some evaluation times were ill-conditioned; trajectory entries "
            "there are zero");
    return res;
}

void flag_coherence(IdentResult& res, const IdentOpts& opts) {
    if (res.coherence > opts.coherence_threshold) {
        std::ostringstream msg;
        msg << "monomial coherence residual " << res.coherence
            << " exceeds threshold " << opts.coherence_threshold;
        res.flags.push_back(msg.str());
    }
}

void flag_order_range(IdentResult& res, const std::string& name,
                      double upper) {
    auto it = res.final_estimates.find(name);
    if (it == res.final_estimates.end()) return;
    if (!(it->second > 0.0) || it->second > upper) {
        std::ostringstream msg;
        msg << "estimated order " << name << " = " << it->second
            << " lies outside (0, " << upper << "]";
        res.flags.push_back(msg.str());
    }
}

void rename_param(IdentResult& res, const std::string& from,
                  const std::string& to) {
    for (auto& n : res.param_names)
        if (n == from) n = to;
    auto itf = res.final_estimates.find(from);
    if (itf != res.final_estimates.end()) {
        res.final_estimates[to] = itf->second;
        res.final_estimates.erase(itf);
    }
    auto itt = res.trajectories.find(from);
    if (itt != res.trajectories.end()) {
        res.trajectories[to] = std::move(itt->second);
        res.trajectories.erase(itt);
    }
}

// ---------------------------------------------------------------------------
// Model assembly: groups -> FracOpExpr, integer-tag folding, second-stage
// factor stripping, initial-value handling.
// ---------------------------------------------------------------------------

OpExpr laurent_to_opexpr(const LaurentPoly& p, const std::string& id) {
    OpExpr e;
    for (const auto& [power, coeff] : p.terms) {
        if (coeff.is_zero()) continue;
        e = e + OpExpr::term(coeff, power, {FactorKey{id, 0}});
    }
    return e;
}

struct BuiltStage1 {
    bool use_columns = false;
    FracOpExpr F;  // when !use_columns
    std::vector<std::pair<Tag, OpExpr>> columns;
    std::vector<std::string> injected;  // initial-value symbols (identify)
};

std::string injected_rl_name(int k) { return "c" + std::to_string(k); }
std::string injected_cap_name(std::size_t group, int k) {
    return "xi_" + std::to_string(group) + "_" + std::to_string(k);
}

void check_injection_name(const ModelSpec& model, const std::string& name) {
    if (model.theta1.count(name) || model.theta2.count(name))
        throw std::invalid_argument(
            "model symbol '" + name +
            "' collides with a generated initial-value symbol");
}

BuiltStage1 build_stage1(const ModelSpec& model) {
    model.validate();
    BuiltStage1 out;

    FracOpExpr folded;
    for (const auto& g : model.groups) {
        OpExpr e = laurent_to_opexpr(g.a, model.y_id) -
                   laurent_to_opexpr(g.b, model.u_id);
        if (e.is_zero())
            throw std::invalid_argument(
                "model group expression is identically zero");
        if (tag_is_integer(g.tag))
            folded.add(Tag::zero(), e.shifted_s(tag_as_int(g.tag)));
        else
            folded.add(g.tag, e);
    }

    // Strip the second-stage symbols: they must be common factors of whole
    // group expressions (invisible to the determinant).
    FracOpExpr stripped;
    for (const auto& [tag, E] : folded.slots()) {
        OpExpr Es = E;
        for (const auto& sym : model.theta2)
            while (Es.common_symbols().count(sym))
                Es = Es.stripped_of_symbol(sym);
        for (const auto& sym : model.theta2)
            if (Es.symbols().count(sym))
                throw std::invalid_argument(
                    "second-stage symbol '" + sym +
                    "' does not factor out of its exponent group");
        stripped.add(tag, Es);
    }

    const int nu = model.nu_bound;
    if (model.regime == InitRegime::Homogeneous) {
        out.F = stripped;
        return out;
    }

    if (model.convention == DerivConvention::RiemannLiouville) {
        if (model.regime == InitRegime::InhomogeneousIdentify) {
            // General inhomogeneous form: the initial values contribute a
            // polynomial sum_{k=0}^{nu-1} c_k s^k to the exponent-free slot.
            FracOpExpr F = stripped;
            for (int k = 0; k < nu; ++k) {
                const std::string name = injected_rl_name(k);
                check_injection_name(model, name);
                F.add(Tag::zero(),
                      OpExpr::constant(ParamPoly::symbol(name), k));
                out.injected.push_back(name);
            }
            out.F = F;
        } else {
            // d/ds applied nu times kills every polynomial initial-value
            // term exactly; no symbols are introduced.
            FracOpExpr F = stripped;
            for (int r = 0; r < nu; ++r) F = F.dds();
            out.F = F;
        }
        return out;
    }

    // Caputo: each fractional group carries its own correction
    // sum_{k=1}^{nu} xi_{i,k} s^-k inside the group; an integer part of
    // classical order d contributes a polynomial of degree d-1 to slot 0.
    FracOpExpr F = stripped;
    int dmax = 0;
    for (std::size_t i = 0; i < model.groups.size(); ++i) {
        const auto& g = model.groups[i];
        if (tag_is_integer(g.tag)) {
            const int d = tag_as_int(g.tag) +
                          std::max(g.a.max_power(), g.b.max_power());
            dmax = std::max(dmax, d);
            continue;
        }
        for (int k = 1; k <= nu; ++k) {
            const std::string name = injected_cap_name(i, k);
            check_injection_name(model, name);
            F.add(g.tag, OpExpr::constant(ParamPoly::symbol(name), -k));
            out.injected.push_back(name);
        }
    }
    for (int k = 0; k < dmax; ++k) {
        const std::string name = injected_rl_name(k);
        check_injection_name(model, name);
        F.add(Tag::zero(), OpExpr::constant(ParamPoly::symbol(name), k));
        out.injected.push_back(name);
    }

    if (model.regime == InitRegime::InhomogeneousIdentify) {
        out.F = F;
        return out;
    }

    // Eliminate-init: every injected symbol becomes its own elimination
    // column (sharing the exponent of its slot), so it cancels from the
    // determinant without ever being estimated.
    out.use_columns = true;
    std::set<std::string> injset(out.injected.begin(), out.injected.end());
    for (const auto& [tag, E] : F.slots()) {
        OpExpr base;
        std::map<std::string, OpExpr> per_sym;
        for (const auto& [tk, coeff] : E.terms()) {
            for (const auto& [mono, c] : coeff.terms()) {
                std::string hit;
                int hits = 0;
                for (const auto& [name, p] : mono.powers)
                    if (injset.count(name)) {
                        hit = name;
                        hits += p;
                    }
                const ParamPoly piece = ParamPoly::monomial(
                    hits == 0 ? mono : mono.divided_by(hit), c);
                OpExpr t = OpExpr::term(piece, tk.s_power, tk.factors);
                if (hits == 0)
                    base = base + t;
                else if (hits == 1)
                    per_sym[hit] = per_sym[hit] + t;
                else
                    throw std::invalid_argument(
                        "initial-value symbol appears nonlinearly");
            }
        }
        if (!base.is_zero()) out.columns.emplace_back(tag, base);
        for (auto& [name, col] : per_sym)
            if (!col.is_zero()) out.columns.emplace_back(tag, col);
    }
    out.injected.clear();  // eliminated, not identified
    return out;
}

std::map<Monomial, SampledSignal> lower_stage1(const ModelSpec& model,
                                               const SampledSignal& u,
                                               const SampledSignal& y) {
    return lower(elimination_equation(model),
                 {{model.y_id, y}, {model.u_id, u}});
}

// ---------------------------------------------------------------------------
// Second stage: numeric lowering of the original (unstripped) equation with
// fractional exponents bound to their first-stage estimates.
// ---------------------------------------------------------------------------

struct Stage2Term {
    Tag tag;
    int s_power = 0;
    bool factor_free = true;
    const SampledSignal* chain = nullptr;
    ParamPoly coeff;
};

struct Stage2System {
    std::vector<Stage2Term> terms;
    std::map<std::vector<FactorKey>, SampledSignal> chains;
    double dt = 0.0;
    std::size_t n = 0;

    void add_expr(const Tag& tag, const OpExpr& e,
                  const std::map<std::string, SampledSignal>& bindings) {
        for (const auto& [tk, coeff] : e.terms()) {
            Stage2Term t;
            t.tag = tag;
            t.s_power = tk.s_power;
            t.coeff = coeff;
            if (!tk.factors.empty()) {
                auto it = chains.find(tk.factors);
                if (it == chains.end()) {
                    SampledSignal cur;
                    bool first = true;
                    for (const auto& f : tk.factors) {
                        auto bit = bindings.find(f.id);
                        if (bit == bindings.end())
                            throw std::invalid_argument("unbound signal id: " +
                                                        f.id);
                        SampledSignal w = t_weight(bit->second, f.ds_order);
                        cur = first ? w : convolve(cur, w);
                        first = false;
                    }
                    it = chains.emplace(tk.factors, std::move(cur)).first;
                }
                t.chain = &it->second;
                t.factor_free = false;
            }
            terms.push_back(std::move(t));
        }
    }
};

double resolve_tag(const Tag& tag,
                   const std::map<std::string, double>& theta1_hat) {
    if (tag.is_known) return rat_to_double(tag.value);
    auto it = theta1_hat.find(tag.name);
    if (it == theta1_hat.end())
        throw std::invalid_argument(
            "second stage: first-stage estimate for exponent '" + tag.name +
            "' is missing");
    return it->second;
}

// Splits a coefficient into a numeric part and theta2-linear columns under
// the first-stage binding.
void split_coeff(const ParamPoly& coeff, const std::set<std::string>& theta2,
                 const std::map<std::string, double>& binding,
                 double& known_out, std::map<std::string, double>& cols_out) {
    for (const auto& [mono, c] : coeff.terms()) {
        double val = rat_to_double(c);
        std::string t2sym;
        int t2deg = 0;
        for (const auto& [name, p] : mono.powers) {
            if (theta2.count(name)) {
                t2sym = name;
                t2deg += p;
                continue;
            }
            auto it = binding.find(name);
            if (it == binding.end())
                throw std::invalid_argument(
                    "second stage: first-stage estimate for symbol '" + name +
                    "' is missing");
            val *= std::pow(it->second, p);
        }
        if (t2deg == 0)
            known_out += val;
        else if (t2deg == 1)
            cols_out[t2sym] += val;
        else
            throw std::invalid_argument(
                "second-stage unknowns must appear linearly in the model");
    }
}

Stage2System build_stage2(const ModelSpec& model,
                          const std::map<std::string, double>& theta1_hat,
                          const SampledSignal& u, const SampledSignal& y) {
    model.validate();
    if (model.theta2.empty())
        throw std::invalid_argument("model has no second-stage unknowns");
    if (model.regime == InitRegime::InhomogeneousEliminate &&
        model.convention == DerivConvention::Caputo)
        throw std::invalid_argument(
            "second stage is unavailable after Caputo eliminate-init: the "
            "initial-value coefficients were removed without being "
            "estimated; use the identify-init regime");

    const std::map<std::string, SampledSignal> bindings{{model.y_id, y},
                                                        {model.u_id, u}};
    const int nu = model.nu_bound;

    FracOpExpr F;
    for (std::size_t i = 0; i < model.groups.size(); ++i) {
        const auto& g = model.groups[i];
        OpExpr e = laurent_to_opexpr(g.a, model.y_id) -
                   laurent_to_opexpr(g.b, model.u_id);

        // The stage-1 injected coefficients were estimated relative to the
        // group stripped of its theta2 factors, so the reconstructed
        // initial-value terms are scaled back by those factors.
        ParamPoly strip_factor = ParamPoly::constant(1);
        {
            OpExpr Es = e;
            for (const auto& sym : model.theta2)
                while (Es.common_symbols().count(sym)) {
                    Es = Es.stripped_of_symbol(sym);
                    strip_factor = strip_factor * ParamPoly::symbol(sym);
                }
        }

        OpExpr inject;
        if (model.regime == InitRegime::InhomogeneousIdentify) {
            if (model.convention == DerivConvention::Caputo &&
                !tag_is_integer(g.tag)) {
                for (int k = 1; k <= nu; ++k) {
                    auto it = theta1_hat.find(
                        injected_cap_name(i, k));
                    if (it == theta1_hat.end())
                        throw std::invalid_argument(
                            "second stage: estimate for initial-value symbol "
                            "'" +
                            injected_cap_name(i, k) + "' is missing");
                    inject =
                        inject +
                        OpExpr::constant(
                            strip_factor.scaled(Rational(it->second)), -k);
                }
            }
        }
        FracOpExpr slot;
        slot.add(tag_is_integer(g.tag) ? Tag::zero() : g.tag,
                 tag_is_integer(g.tag) ? (e + inject).shifted_s(tag_as_int(g.tag))
                                       : (e + inject));
        for (const auto& [tag, E] : slot.slots()) F.add(tag, E);
    }

    if (model.regime == InitRegime::InhomogeneousIdentify &&
        model.convention == DerivConvention::RiemannLiouville) {
        for (int k = 0; k < nu; ++k) {
            auto it = theta1_hat.find(injected_rl_name(k));
            if (it == theta1_hat.end())
                throw std::invalid_argument(
                    "second stage: estimate for initial-value symbol '" +
                    injected_rl_name(k) + "' is missing");
            F.add(Tag::zero(),
                  OpExpr::constant(
                      ParamPoly::constant(Rational(it->second)), k));
        }
    }
    if (model.regime == InitRegime::InhomogeneousEliminate) {
        // Riemann-Liouville: differentiating nu times with respect to s
        // removes the polynomial initial-value terms before lowering.
        for (int r = 0; r < nu; ++r) F = F.dds();
    }

    Stage2System sys;
    sys.dt = y.dt;
    sys.n = y.size();
    for (const auto& [tag, E] : F.slots()) sys.add_expr(tag, E, bindings);
    if (sys.terms.empty())
        throw std::invalid_argument("second-stage equation is empty");
    return sys;
}

std::map<std::string, double> solve_stage2(
    Stage2System& sys, const ModelSpec& model,
    const std::map<std::string, double>& theta1_hat,
    const std::vector<std::size_t>& indices, int n_extra) {
    // Uniform extra integration depth making every term a (possibly
    // fractional) integral, including factor-free terms whose kernels must
    // stay bounded at t = 0.
    int nu2 = 0;
    for (const auto& t : sys.terms) {
        const double a = resolve_tag(t.tag, theta1_hat) +
                         static_cast<double>(t.s_power);
        const int need =
            t.factor_free
                ? static_cast<int>(std::ceil(a + 1.0 - 1e-12))
                : static_cast<int>(std::floor(a + 1e-12)) + 1;
        nu2 = std::max(nu2, need);
    }

    std::vector<std::string> names(model.theta2.begin(), model.theta2.end());
    const std::size_t cols = names.size();
    const std::size_t rows = indices.size() * static_cast<std::size_t>(n_extra + 1);
    if (rows < cols)
        throw std::invalid_argument(
            "second stage: fewer equations than unknowns");

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, cols);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
    std::size_t r = 0;
    for (int j = 0; j <= n_extra; ++j) {
        for (std::size_t i : indices) {
            double known = 0.0;
            std::map<std::string, double> colvals;
            for (const auto& t : sys.terms) {
                const double a = resolve_tag(t.tag, theta1_hat);
                const double e =
                    a + static_cast<double>(t.s_power) -
                    static_cast<double>(nu2) - static_cast<double>(j);
                const double m = -e;
                double low;
                if (t.factor_free) {
                    low = power_kernel_at(m, sys.dt, i);
                } else if (std::abs(m - std::llround(m)) < 1e-9) {
                    low = repeated_integral_at(
                        *t.chain, static_cast<int>(std::llround(m)), i);
                } else {
                    low = gl_integral_at(*t.chain, m, i);
                }
                double kpart = 0.0;
                std::map<std::string, double> cpart;
                split_coeff(t.coeff, model.theta2, theta1_hat, kpart, cpart);
                known += kpart * low;
                for (const auto& [name, v] : cpart) colvals[name] += v * low;
            }
            double s = std::abs(known);
            for (const auto& [name, v] : colvals)
                s = std::max(s, std::abs(v));
            if (s == 0.0) s = 1.0;
            for (std::size_t c = 0; c < cols; ++c) {
                auto it = colvals.find(names[c]);
                A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    it == colvals.end() ? 0.0 : it->second / s;
            }
            b(static_cast<Eigen::Index>(r)) = -known / s;
            ++r;
        }
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double sv_min = svd.singularValues()(svd.singularValues().size() - 1);
    if (sv_min < 1e-12)
        throw SingularSystemError(
            "second-stage system is singular (smallest singular value " +
            std::to_string(sv_min) + ")");
    Eigen::VectorXd th = svd.solve(b);
    std::map<std::string, double> out;
    for (std::size_t c = 0; c < cols; ++c)
        out[names[c]] = th(static_cast<Eigen::Index>(c));
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// LaurentPoly / ModelSpec
// ---------------------------------------------------------------------------

LaurentPoly LaurentPoly::single(int power, const ParamPoly& c) {
    LaurentPoly p;
    if (!c.is_zero()) p.terms[power] = c;
    return p;
}

bool LaurentPoly::is_zero() const {
    for (const auto& [k, c] : terms)
        if (!c.is_zero()) return false;
    return true;
}

int LaurentPoly::max_power() const {
    int m = 0;
    for (const auto& [k, c] : terms)
        if (!c.is_zero()) m = std::max(m, k);
    return m;
}

void ModelSpec::validate() const {
    if (groups.empty())
        throw std::invalid_argument("model has no exponent groups");
    if (y_id.empty() || u_id.empty() || y_id == u_id)
        throw std::invalid_argument(
            "model needs distinct nonempty input/output signal ids");
    bool has_known = false;
    for (const auto& g : groups) {
        if (g.tag.is_known) has_known = true;
        if (!g.tag.is_known && !theta1.count(g.tag.name))
            throw std::invalid_argument(
                "symbolic exponent '" + g.tag.name +
                "' must be a first-stage unknown");
        if (g.a.is_zero() && g.b.is_zero())
            throw std::invalid_argument("model group is identically zero");
    }
    if (!has_known)
        throw std::invalid_argument(
            "model needs at least one known exponent as anchor");
    for (const auto& s : theta1)
        if (theta2.count(s))
            throw std::invalid_argument(
                "unknown '" + s + "' appears in both stages");
    if (regime != InitRegime::Homogeneous && nu_bound < 1)
        throw std::invalid_argument(
            "inhomogeneous regimes need a positive integer order bound");
}

ModelSpec voigt_model_spec(DerivConvention convention, InitRegime regime) {
    ModelSpec m;
    m.convention = convention;
    m.regime = regime;
    m.y_id = "sig";
    m.u_id = "eps";
    ModelGroup g0;
    g0.tag = Tag::zero();
    g0.a = LaurentPoly::single(0, ParamPoly::constant(1));
    g0.b = LaurentPoly::single(0, ParamPoly::symbol("E0"));
    ModelGroup g1;
    g1.tag = Tag::symbol("alpha");
    g1.a = LaurentPoly::zero();
    g1.b = LaurentPoly::single(0, ParamPoly::symbol("E1"));
    m.groups = {g0, g1};
    m.theta1 = {"alpha", "E0"};
    m.theta2 = {"E1"};
    m.nu_bound = 1;
    return m;
}

// ---------------------------------------------------------------------------
// Equation builders
// ---------------------------------------------------------------------------

std::vector<std::map<Monomial, SampledSignal>> voigt_hom_equations(
    const SampledSignal& eps, const SampledSignal& sigma, int n_extra) {
    if (!eps.same_grid(sigma))
        throw std::invalid_argument("signal grid mismatch");
    if (n_extra < 0) throw std::invalid_argument("n_extra must be >= 0");
    // Hand-built lowered identification equation for
    //   sig = E0 eps + E1 D^alpha eps  (zero initial state):
    //   [(t eps) * sig - eps * (t sig)]           (known)
    // + alpha    * [-I(eps * sig)]
    // + alpha E0 * [+I(eps * eps)]      = 0.
    std::map<Monomial, SampledSignal> base;
    base.emplace(Monomial::one(),
                 convolve(eps, t_weight(sigma, 1)) -
                     convolve(t_weight(eps, 1), sigma));
    base.emplace(Monomial::symbol("alpha"),
                 (-1.0) * repeated_integral(convolve(eps, sigma), 1));
    base.emplace(Monomial::symbol("alpha").times(Monomial::symbol("E0")),
                 repeated_integral(convolve(eps, eps), 1));
    return generate_equations(base, n_extra);
}

std::vector<std::map<Monomial, SampledSignal>> general_equations(
    const ModelSpec& model, const SampledSignal& u, const SampledSignal& y,
    int n_extra) {
    if (!u.same_grid(y))
        throw std::invalid_argument("signal grid mismatch");
    if (n_extra < 0) throw std::invalid_argument("n_extra must be >= 0");
    return generate_equations(lower_stage1(model, u, y), n_extra);
}

OpExpr elimination_equation(const ModelSpec& model) {
    BuiltStage1 built = build_stage1(model);
    PBuild pb = built.use_columns ? build_P(built.columns) : build_P(built.F);
    OpExpr D = det(pb.P);
    if (D.is_zero())
        throw std::invalid_argument(
            "elimination produced the zero determinant — the model is "
            "structurally degenerate");
    auto [Dn, shift] = normalize(D);
    (void)shift;
    return Dn;
}

OpExpr diffusion_elimination_equation() {
    // Eliminating the exponential and then s^(alpha/2) from the two-sensor
    // relation leaves one equation linear in alpha:
    //   g^2 (h'^2 - s^-1 h h' - h h'')
    // - h^2 (g'^2 - s^-1 g g' - g g'')
    // - (alpha/2) s^-1 g h (g' h - g h') = 0.
    const auto P1 = ParamPoly::constant(1);
    const auto Pm1 = ParamPoly::constant(-1);
    const auto Pha =
        ParamPoly::monomial(Monomial::symbol("alpha"), Rational(1, 2));
    const FactorKey G0{"g", 0}, G1{"g", 1}, G2{"g", 2};
    const FactorKey H0{"h", 0}, H1{"h", 1}, H2{"h", 2};
    OpExpr Z;
    Z = Z + OpExpr::term(P1, 0, {G0, G0, H1, H1});
    Z = Z + OpExpr::term(Pm1, -1, {G0, G0, H0, H1});
    Z = Z + OpExpr::term(Pm1, 0, {G0, G0, H0, H2});
    Z = Z + OpExpr::term(Pm1, 0, {H0, H0, G1, G1});
    Z = Z + OpExpr::term(P1, -1, {H0, H0, G0, G1});
    Z = Z + OpExpr::term(P1, 0, {H0, H0, G0, G2});
    Z = Z + OpExpr::term(Pha.scaled(Rational(-1)), -1, {G1, G0, H0, H0});
    Z = Z + OpExpr::term(Pha, -1, {G0, G0, H0, H1});
    return normalize(Z).first;
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

IdentResult identify_voigt_hom(const SampledSignal& eps,
                               const SampledSignal& sigma,
                               const IdentOpts& opts) {
    if (!eps.same_grid(sigma))
        throw std::invalid_argument("signal grid mismatch");
    const int n_extra = opts.n_extra < 0 ? 4 : opts.n_extra;
    auto eqs = voigt_hom_equations(eps, sigma, n_extra);
    SweepCore core = run_sweep(eqs, opts);
    IdentResult res = result_from_sweep(core);

    // Second stage, pointwise: with (alpha, E0) fixed, the original equation
    // integrated twice reads  I^2(sig) = E0 I^2(eps) + E1 J^{1-alpha} I(eps).
    // The extra integration level keeps the divisor away from the zeros that
    // J^{1-alpha} eps itself has for oscillatory inputs.
    const SampledSignal i2_sig = repeated_integral(sigma, 2);
    const SampledSignal i_eps = repeated_integral(eps, 1);
    const SampledSignal i2_eps = repeated_integral(eps, 2);
    double scale_eps = 0.0;
    for (double v : i_eps.values) scale_eps = std::max(scale_eps, std::abs(v));
    std::vector<double> e1(core.times.size(), 0.0);
    std::vector<char> e1ok(core.times.size(), 0);
    for (std::size_t k = 0; k < core.times.size(); ++k) {
        if (!core.ok[k]) continue;
        const double a = core.phys[k].at("alpha");
        const double e0 = core.phys[k].at("E0");
        if (!(a > 0.0) || a >= 1.0) continue;
        const std::size_t i = core.idx[k];
        const double denom = gl_integral_at(i_eps, 1.0 - a, i);
        if (std::abs(denom) <= 1e-12 * std::max(scale_eps, 1e-300)) continue;
        e1[k] = (i2_sig.values[i] - e0 * i2_eps.values[i]) / denom;
        e1ok[k] = 1;
    }
    int final_k = -1;
    for (std::size_t k = 0; k < core.times.size(); ++k)
        if (core.ok[k] && e1ok[k]) final_k = static_cast<int>(k);
    if (final_k < 0)
        throw SingularSystemError(
            "modulus recovery failed at every evaluation time");
    res.param_names.push_back("E1");
    res.trajectories["E1"] = std::move(e1);
    const auto fk = static_cast<std::size_t>(final_k);
    res.final_estimates["alpha"] = core.phys[fk].at("alpha");
    res.final_estimates["E0"] = core.phys[fk].at("E0");
    res.final_estimates["E1"] = res.trajectories["E1"][fk];
    res.min_singular_value = core.sv[fk];
    res.coherence = core.coherence[fk];
    res.final_time = core.times[fk];
    flag_order_range(res, "alpha", 1.0);
    flag_coherence(res, opts);
    return res;
}

IdentResult identify_general(const ModelSpec& model, const SampledSignal& u,
                             const SampledSignal& y, const IdentOpts& opts) {
    if (!u.same_grid(y))
        throw std::invalid_argument("signal grid mismatch");
    auto base = lower_stage1(model, u, y);
    std::size_t n_labels = 0;
    for (const auto& [m, sig] : base)
        if (!m.is_one()) ++n_labels;
    const int n_extra =
        opts.n_extra < 0 ? static_cast<int>(n_labels) + 2 : opts.n_extra;
    auto eqs = generate_equations(base, n_extra);
    SweepCore core = run_sweep(eqs, opts);
    IdentResult res = result_from_sweep(core);

    for (const auto& g : model.groups)
        if (!g.tag.is_known)
            flag_order_range(res, g.tag.name,
                             static_cast<double>(std::max(model.nu_bound, 1)));
    flag_coherence(res, opts);

    if (!model.theta2.empty()) {
        if (model.regime == InitRegime::InhomogeneousEliminate &&
            model.convention == DerivConvention::Caputo) {
            res.flags.push_back(
                "second stage skipped: eliminate-init removes the "
                "initial-value data needed to recover the group factors; use "
                "identify-init");
        } else {
            Stage2System sys =
                build_stage2(model, core.phys[static_cast<std::size_t>(
                                        core.final_k)],
                             u, y);
            const int n_extra2 = static_cast<int>(model.theta2.size()) + 2;
            // Trajectory: single-time recovery at each well-conditioned time.
            std::map<std::string, std::vector<double>> tr2;
            for (const auto& name : model.theta2)
                tr2[name] = std::vector<double>(core.times.size(), 0.0);
            for (std::size_t k = 0; k < core.times.size(); ++k) {
                if (!core.ok[k]) continue;
                try {
                    auto th2 = solve_stage2(sys, model, core.phys[k],
                                            {core.idx[k]}, n_extra2);
                    for (const auto& [name, v] : th2) tr2[name][k] = v;
                } catch (const std::exception&) {
                    // leave zero; final stacked recovery below still decides
                }
            }
            auto finals2 =
                solve_stage2(sys, model,
                             core.phys[static_cast<std::size_t>(core.final_k)],
                             core.idx, n_extra2);
            for (const auto& name : model.theta2) {
                res.param_names.push_back(name);
                res.trajectories[name] = std::move(tr2[name]);
                res.final_estimates[name] = finals2.at(name);
            }
        }
    }
    return res;
}

std::map<std::string, double> recover_theta2(
    const ModelSpec& model, const std::map<std::string, double>& theta1_hat,
    const SampledSignal& u, const SampledSignal& y, const IdentOpts& opts) {
    if (!u.same_grid(y))
        throw std::invalid_argument("signal grid mismatch");
    Stage2System sys = build_stage2(model, theta1_hat, u, y);
    const int n_extra = opts.n_extra < 0
                            ? static_cast<int>(model.theta2.size()) + 2
                            : opts.n_extra;
    auto idx = eval_indices(y.size(), y.dt, opts);
    return solve_stage2(sys, model, theta1_hat, idx, n_extra);
}

IdentResult identify_voigt_inhom_rl(const SampledSignal& eps,
                                    const SampledSignal& sigma,
                                    InitHandling mode, const IdentOpts& opts) {
    ModelSpec spec = voigt_model_spec(
        DerivConvention::RiemannLiouville,
        mode == InitHandling::IdentifyInit ? InitRegime::InhomogeneousIdentify
                                           : InitRegime::InhomogeneousEliminate);
    IdentResult res = identify_general(spec, eps, sigma, opts);
    // c0 multiplies s^0: it is the lumped constant E1 * (J^{1-alpha}eps)(0).
    rename_param(res, "c0", "K");
    return res;
}

IdentResult identify_voigt_inhom_caputo(const SampledSignal& eps,
                                        const SampledSignal& sigma,
                                        InitHandling mode,
                                        const IdentOpts& opts) {
    ModelSpec spec = voigt_model_spec(
        DerivConvention::Caputo,
        mode == InitHandling::IdentifyInit ? InitRegime::InhomogeneousIdentify
                                           : InitRegime::InhomogeneousEliminate);
    IdentResult res = identify_general(spec, eps, sigma, opts);
    // xi_1_1 is the initial strain eps(0) (coefficient of s^-1 inside the
    // fractional group after the modulus factors out).
    rename_param(res, "xi_1_1", "eps0");
    return res;
}

// ---------------------------------------------------------------------------
// Diffusion-wave boundary estimator
// ---------------------------------------------------------------------------

IdentResult identify_diffusion_wave(const SampledSignal& h,
                                    const SampledSignal& g,
                                    KnownWaveQuantity known,
                                    double known_value, const IdentOpts& opts) {
    if (!h.same_grid(g))
        throw std::invalid_argument("signal grid mismatch");
    if ((known == KnownWaveQuantity::Distance ||
         known == KnownWaveQuantity::Speed) &&
        !(known_value > 0.0))
        throw std::invalid_argument(
            "the known wave quantity must be positive");

    auto base = lower(diffusion_elimination_equation(), {{"g", g}, {"h", h}});
    const int n_extra = opts.n_extra < 0 ? 3 : opts.n_extra;
    auto eqs = generate_equations(base, n_extra);
    SweepCore core = run_sweep(eqs, opts);
    IdentResult res = result_from_sweep(core);
    flag_order_range(res, "alpha", 2.0);

    // Transit ratio c = L/v from the first-order relation:
    //   c = (2/alpha) * [ (t g) * h - g * (t h) ] / J^{1 - alpha/2} (g * h).
    const SampledSignal num = convolve(times_t(g), h) - convolve(g, times_t(h));
    const SampledSignal gh = convolve(g, h);
    double gh_scale = 0.0;
    for (double v : gh.values) gh_scale = std::max(gh_scale, std::abs(v));

    std::vector<double> ctraj(core.times.size(), 0.0);
    std::vector<char> cok(core.times.size(), 0);
    bool denom_small = false;
    for (std::size_t k = 0; k < core.times.size(); ++k) {
        if (!core.ok[k]) continue;
        const double a = core.phys[k].at("alpha");
        if (!(a > 0.0)) continue;
        const double m = 1.0 - a / 2.0;
        const std::size_t i = core.idx[k];
        double denom;
        if (std::abs(m) < 1e-9)
            denom = gh.values[i];
        else if (m > 0.0)
            denom = gl_integral_at(gh, m, i);
        else
            continue;  // order above 2: no integral realization
        if (std::abs(denom) <= 1e-12 * std::max(gh_scale, 1e-300)) {
            denom_small = true;
            continue;
        }
        ctraj[k] = (2.0 / a) * num.values[i] / denom;
        cok[k] = 1;
    }
    if (denom_small)
        res.flags.push_back(
            "transit-ratio denominator too small at some evaluation times");

    int final_k = -1;
    for (std::size_t k = 0; k < core.times.size(); ++k)
        if (core.ok[k] && cok[k]) final_k = static_cast<int>(k);
    if (final_k < 0)
        throw SingularSystemError(
            "transit-ratio recovery failed at every evaluation time");
    const auto fk = static_cast<std::size_t>(final_k);

    res.param_names.push_back("c");
    res.trajectories["c"] = ctraj;
    res.final_estimates["alpha"] = core.phys[fk].at("alpha");
    res.final_estimates["c"] = ctraj[fk];
    res.min_singular_value = core.sv[fk];
    res.coherence = core.coherence[fk];
    res.final_time = core.times[fk];

    if (known == KnownWaveQuantity::Distance) {
        std::vector<double> vtraj(core.times.size(), 0.0);
        for (std::size_t k = 0; k < core.times.size(); ++k)
            if (cok[k] && std::abs(ctraj[k]) > 1e-300)
                vtraj[k] = known_value / ctraj[k];
        res.param_names.push_back("v");
        res.final_estimates["v"] =
            std::abs(ctraj[fk]) > 1e-300 ? known_value / ctraj[fk] : 0.0;
        res.trajectories["v"] = std::move(vtraj);
    } else if (known == KnownWaveQuantity::Speed) {
        std::vector<double> ltraj(core.times.size(), 0.0);
        for (std::size_t k = 0; k < core.times.size(); ++k)
            if (cok[k]) ltraj[k] = known_value * ctraj[k];
        res.param_names.push_back("L");
        res.final_estimates["L"] = known_value * ctraj[fk];
        res.trajectories["L"] = std::move(ltraj);
    }
    return res;
}

// ---------------------------------------------------------------------------
// IdentResult serialization
// ---------------------------------------------------------------------------

void IdentResult::write_csv(const std::string& path) const {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (f == nullptr)
        throw std::runtime_error("cannot open file for writing: " + path);
    std::fputs("t", f);
    for (const auto& name : param_names) std::fprintf(f, ",%s", name.c_str());
    std::fputs(",coherence,min_singular_value\n", f);
    for (std::size_t k = 0; k < eval_times.size(); ++k) {
        std::fprintf(f, "%.17g", eval_times[k]);
        for (const auto& name : param_names)
            std::fprintf(f, ",%.17g", trajectories.at(name)[k]);
        std::fprintf(f, ",%.17g,%.17g\n",
                     k < coherence_trajectory.size() ? coherence_trajectory[k]
                                                     : 0.0,
                     k < sv_trajectory.size() ? sv_trajectory[k] : 0.0);
    }
    std::fclose(f);
}

}  // namespace fracid
