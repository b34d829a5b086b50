#include "fracid/opcalc.hpp"

#include <algorithm>
#include <stdexcept>

namespace fracid {

// ----------------------------------------------------------------- Monomial

Monomial Monomial::symbol(const std::string& name, int power) {
    if (power < 1) throw std::invalid_argument("Monomial: power must be >= 1");
    Monomial m;
    m.powers[name] = power;
    return m;
}

int Monomial::degree() const {
    int d = 0;
    for (const auto& [name, p] : powers) d += p;
    return d;
}

bool Monomial::contains(const std::string& name) const {
    return powers.count(name) > 0;
}

Monomial Monomial::times(const Monomial& other) const {
    Monomial out = *this;
    for (const auto& [name, p] : other.powers) out.powers[name] += p;
    return out;
}

Monomial Monomial::divided_by(const std::string& name) const {
    auto it = powers.find(name);
    if (it == powers.end())
        throw std::invalid_argument("Monomial: cannot divide by absent symbol " +
                                    name);
    Monomial out = *this;
    if (--out.powers[name] == 0) out.powers.erase(name);
    return out;
}

std::string Monomial::str() const {
    if (powers.empty()) return "1";
    std::string out;
    for (const auto& [name, p] : powers) {
        if (!out.empty()) out += "*";
        out += name;
        if (p > 1) out += "^" + std::to_string(p);
    }
    return out;
}

bool Monomial::operator<(const Monomial& o) const {
    // Degree first, then name/exponent lexicographic: gives the
    // lowest-degree-first order used by the physical back-solve.
    const int d = degree(), od = o.degree();
    if (d != od) return d < od;
    return powers < o.powers;
}

// ---------------------------------------------------------------- ParamPoly

void ParamPoly::prune() {
    for (auto it = terms_.begin(); it != terms_.end();) {
        if (it->second == 0)
            it = terms_.erase(it);
        else
            ++it;
    }
}

ParamPoly ParamPoly::constant(const Rational& c) {
    ParamPoly p;
    if (c != 0) p.terms_[Monomial::one()] = c;
    return p;
}

ParamPoly ParamPoly::symbol(const std::string& name) {
    ParamPoly p;
    p.terms_[Monomial::symbol(name)] = 1;
    return p;
}

ParamPoly ParamPoly::monomial(const Monomial& m, const Rational& c) {
    ParamPoly p;
    if (c != 0) p.terms_[m] = c;
    return p;
}

bool ParamPoly::is_constant() const {
    return terms_.empty() ||
           (terms_.size() == 1 && terms_.begin()->first.is_one());
}

ParamPoly ParamPoly::operator+(const ParamPoly& o) const {
    ParamPoly out = *this;
    for (const auto& [m, c] : o.terms_) out.terms_[m] += c;
    out.prune();
    return out;
}

ParamPoly ParamPoly::operator-(const ParamPoly& o) const {
    ParamPoly out = *this;
    for (const auto& [m, c] : o.terms_) out.terms_[m] -= c;
    out.prune();
    return out;
}

ParamPoly ParamPoly::operator*(const ParamPoly& o) const {
    ParamPoly out;
    for (const auto& [m1, c1] : terms_)
        for (const auto& [m2, c2] : o.terms_) out.terms_[m1.times(m2)] += c1 * c2;
    out.prune();
    return out;
}

ParamPoly ParamPoly::operator-() const { return scaled(-1); }

ParamPoly ParamPoly::scaled(const Rational& c) const {
    ParamPoly out;
    if (c == 0) return out;
    for (const auto& [m, v] : terms_) out.terms_[m] = v * c;
    return out;
}

std::set<std::string> ParamPoly::common_symbols() const {
    std::set<std::string> common;
    bool first = true;
    for (const auto& [m, c] : terms_) {
        if (first) {
            for (const auto& [name, p] : m.powers) common.insert(name);
            first = false;
        } else {
            for (auto it = common.begin(); it != common.end();)
                it = m.contains(*it) ? std::next(it) : common.erase(it);
        }
        if (common.empty()) break;
    }
    return common;
}

ParamPoly ParamPoly::divided_by_symbol(const std::string& name) const {
    ParamPoly out;
    for (const auto& [m, c] : terms_) out.terms_[m.divided_by(name)] = c;
    return out;
}

double ParamPoly::evaluate(const std::map<std::string, double>& binding) const {
    double acc = 0.0;
    for (const auto& [m, c] : terms_) {
        double v = c.convert_to<double>();
        for (const auto& [name, p] : m.powers) {
            auto it = binding.find(name);
            if (it == binding.end())
                throw std::invalid_argument("unbound parameter symbol: " + name);
            for (int k = 0; k < p; ++k) v *= it->second;
        }
        acc += v;
    }
    return acc;
}

std::set<std::string> ParamPoly::symbols() const {
    std::set<std::string> out;
    for (const auto& [m, c] : terms_)
        for (const auto& [name, p] : m.powers) out.insert(name);
    return out;
}

namespace {

std::string rational_str(const Rational& r) {
    return r.str();  // "3", "-1/2", ...
}

// Renders c * m as a single product token, e.g. "1", "alpha", "-2*alpha*E0".
std::string monomial_coeff_str(const Rational& c, const Monomial& m) {
    if (m.is_one()) return rational_str(c);
    std::string out;
    if (c == -1)
        out = "-";
    else if (c != 1)
        out = rational_str(c) + "*";
    return out + m.str();
}

}  // namespace

std::string ParamPoly::str() const {
    if (terms_.empty()) return "0";
    if (terms_.size() == 1) {
        const auto& [m, c] = *terms_.begin();
        return monomial_coeff_str(c, m);
    }
    std::string out = "(";
    bool first = true;
    for (const auto& [m, c] : terms_) {
        std::string piece = monomial_coeff_str(c, m);
        if (first) {
            out += piece;
            first = false;
        } else if (!piece.empty() && piece[0] == '-') {
            out += " - " + piece.substr(1);
        } else {
            out += " + " + piece;
        }
    }
    return out + ")";
}

// ------------------------------------------------------------------- OpExpr

void OpExpr::add_term(const TermKey& k, const ParamPoly& c) {
    if (c.is_zero()) return;
    auto it = terms_.find(k);
    if (it == terms_.end()) {
        terms_.emplace(k, c);
    } else {
        it->second = it->second + c;
        if (it->second.is_zero()) terms_.erase(it);
    }
}

OpExpr OpExpr::term(ParamPoly coeff, int s_power,
                    std::vector<FactorKey> factors) {
    for (const auto& f : factors)
        if (f.ds_order < 0)
            throw std::invalid_argument("OpExpr: derivative order must be >= 0");
    std::sort(factors.begin(), factors.end());
    OpExpr e;
    e.add_term(TermKey{s_power, std::move(factors)}, std::move(coeff));
    return e;
}

OpExpr OpExpr::signal(const std::string& id, int ds_order) {
    return term(ParamPoly::constant(1), 0, {FactorKey{id, ds_order}});
}

OpExpr OpExpr::constant(const ParamPoly& coeff, int s_power) {
    return term(coeff, s_power, {});
}

OpExpr OpExpr::operator+(const OpExpr& o) const {
    OpExpr out = *this;
    for (const auto& [k, c] : o.terms_) out.add_term(k, c);
    return out;
}

OpExpr OpExpr::operator-(const OpExpr& o) const {
    OpExpr out = *this;
    for (const auto& [k, c] : o.terms_) out.add_term(k, -c);
    return out;
}

OpExpr OpExpr::operator-() const { return scaled(ParamPoly::constant(-1)); }

OpExpr OpExpr::operator*(const OpExpr& o) const {
    OpExpr out;
    for (const auto& [k1, c1] : terms_) {
        for (const auto& [k2, c2] : o.terms_) {
            TermKey k;
            k.s_power = k1.s_power + k2.s_power;
            k.factors = k1.factors;
            k.factors.insert(k.factors.end(), k2.factors.begin(),
                             k2.factors.end());
            std::sort(k.factors.begin(), k.factors.end());
            out.add_term(k, c1 * c2);
        }
    }
    return out;
}

OpExpr OpExpr::scaled(const ParamPoly& c) const {
    OpExpr out;
    for (const auto& [k, v] : terms_) out.add_term(k, v * c);
    return out;
}

OpExpr OpExpr::shifted_s(int delta) const {
    OpExpr out;
    for (const auto& [k, v] : terms_)
        out.add_term(TermKey{k.s_power + delta, k.factors}, v);
    return out;
}

OpExpr OpExpr::dds() const {
    OpExpr out;
    for (const auto& [k, c] : terms_) {
        if (k.s_power != 0)
            out.add_term(TermKey{k.s_power - 1, k.factors},
                         c.scaled(k.s_power));
        for (std::size_t idx = 0; idx < k.factors.size(); ++idx) {
            TermKey nk = k;
            nk.factors[idx].ds_order += 1;
            std::sort(nk.factors.begin(), nk.factors.end());
            out.add_term(nk, c);
        }
    }
    return out;
}

int OpExpr::max_s_power() const {
    if (terms_.empty()) return 0;
    return terms_.rbegin()->first.s_power;  // s_power is the primary sort key
}

std::set<std::string> OpExpr::common_symbols() const {
    std::set<std::string> common;
    bool first = true;
    for (const auto& [k, c] : terms_) {
        const auto cs = c.common_symbols();
        if (first) {
            common = cs;
            first = false;
        } else {
            std::set<std::string> kept;
            for (const auto& s : common)
                if (cs.count(s)) kept.insert(s);
            common = std::move(kept);
        }
        if (common.empty()) break;
    }
    return common;
}

OpExpr OpExpr::stripped_of_symbol(const std::string& name) const {
    OpExpr out;
    for (const auto& [k, c] : terms_)
        out.add_term(k, c.divided_by_symbol(name));
    return out;
}

std::set<std::string> OpExpr::symbols() const {
    std::set<std::string> out;
    for (const auto& [k, c] : terms_)
        for (const auto& s : c.symbols()) out.insert(s);
    return out;
}

std::string pretty(const OpExpr& e) {
    if (e.is_zero()) return "0";
    std::string out;
    bool first = true;
    // Descending s-power (reverse of the canonical key order).
    for (auto it = e.terms().rbegin(); it != e.terms().rend(); ++it) {
        const auto& [key, coeff] = *it;
        std::string body = coeff.str();
        std::string sign = "+";
        if (!body.empty() && body[0] == '-') {
            sign = "-";
            body = body.substr(1);
        }
        if (key.s_power != 0)
            body += "*s^" + std::to_string(key.s_power);
        for (const auto& f : key.factors) {
            body += "*" + f.id;
            for (int j = 0; j < f.ds_order; ++j) body += "'";
        }
        if (first) {
            out = (sign == "-" ? "-" : "") + body;
            first = false;
        } else {
            out += "\n" + sign + " " + body;
        }
    }
    return out;
}

// ---------------------------------------------------------------------- Tag

ParamPoly Tag::as_poly() const {
    return is_known ? ParamPoly::constant(value) : ParamPoly::symbol(name);
}

std::string Tag::str() const { return is_known ? value.str() : name; }

// --------------------------------------------------------------- FracOpExpr

void FracOpExpr::add(const Tag& tag, const OpExpr& e) {
    auto it = slots_.find(tag);
    if (it == slots_.end()) {
        if (!e.is_zero()) slots_.emplace(tag, e);
        return;
    }
    it->second = it->second + e;
    if (it->second.is_zero()) slots_.erase(it);
}

OpExpr FracOpExpr::slot(const Tag& tag) const {
    auto it = slots_.find(tag);
    return it == slots_.end() ? OpExpr{} : it->second;
}

FracOpExpr FracOpExpr::dds() const {
    FracOpExpr out;
    for (const auto& [tag, e] : slots_) {
        OpExpr d = e.dds() + e.shifted_s(-1).scaled(tag.as_poly());
        out.add(tag, d);
    }
    return out;
}

// ------------------------------------------------------------ build_P / det

PBuild build_P(const std::vector<std::pair<Tag, OpExpr>>& columns) {
    if (columns.empty())
        throw std::invalid_argument("build_P: empty model (no exponent groups)");
    for (const auto& [tag, e] : columns)
        if (e.is_zero())
            throw std::invalid_argument(
                "build_P: degenerate model (a group expression is identically "
                "zero)");
    const std::size_t n = columns.size();
    PBuild out;
    out.tags.reserve(n);
    for (const auto& [tag, e] : columns) out.tags.push_back(tag);
    out.P.entries.assign(n, std::vector<OpExpr>(n));
    for (std::size_t j = 0; j < n; ++j) out.P.entries[0][j] = columns[j].second;
    for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const OpExpr& prev = out.P.entries[i - 1][j];
            out.P.entries[i][j] =
                prev.dds() + prev.shifted_s(-1).scaled(out.tags[j].as_poly());
        }
    }
    return out;
}

PBuild build_P(const FracOpExpr& grouped) {
    std::vector<std::pair<Tag, OpExpr>> columns;
    for (const auto& [tag, e] : grouped.slots()) columns.emplace_back(tag, e);
    return build_P(columns);
}

namespace {

OpExpr det_recursive(const std::vector<std::vector<OpExpr>>& m) {
    const std::size_t n = m.size();
    if (n == 1) return m[0][0];
    OpExpr acc;
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<std::vector<OpExpr>> minor(n - 1,
                                               std::vector<OpExpr>(n - 1));
        for (std::size_t r = 1; r < n; ++r) {
            std::size_t cc = 0;
            for (std::size_t c = 0; c < n; ++c) {
                if (c == j) continue;
                minor[r - 1][cc++] = m[r][c];
            }
        }
        OpExpr cof = m[0][j] * det_recursive(minor);
        acc = (j % 2 == 0) ? acc + cof : acc - cof;
    }
    return acc;
}

}  // namespace

OpExpr det(const OperatorMatrix& P) {
    if (P.entries.empty())
        throw std::invalid_argument("det: empty matrix");
    for (const auto& row : P.entries)
        if (row.size() != P.entries.size())
            throw std::invalid_argument("det: matrix must be square");
    return det_recursive(P.entries);
}

// --------------------------------------------------- normalize / lower / eqs

std::pair<OpExpr, int> normalize(const OpExpr& e) {
    const int k = std::max(0, e.max_s_power());
    return {e.shifted_s(-k), k};
}

std::map<Monomial, SampledSignal> lower(
    const OpExpr& e, const std::map<std::string, SampledSignal>& bindings) {
    if (bindings.empty())
        throw std::invalid_argument("lower: no signal bindings");
    const SampledSignal& ref = bindings.begin()->second;
    for (const auto& [id, s] : bindings)
        if (!s.same_grid(ref))
            throw std::invalid_argument("lower: signal grid mismatch between "
                                        "bindings");
    const double dt = ref.dt;
    const std::size_t n = ref.size();

    std::map<Monomial, SampledSignal> acc;
    for (const auto& [key, coeff] : e.terms()) {
        if (key.s_power > 0)
            throw std::runtime_error("expression not proper — normalize first");
        SampledSignal cur;
        if (key.factors.empty()) {
            if (key.s_power == 0)
                throw std::runtime_error(
                    "free constant term — nothing to lower (an un-eliminated "
                    "pure number is invalid in a regressor)");
            cur = cauchy_kernel(dt, n, -key.s_power);
        } else {
            bool first = true;
            for (const auto& f : key.factors) {
                auto it = bindings.find(f.id);
                if (it == bindings.end())
                    throw std::invalid_argument("unbound signal id: " + f.id);
                SampledSignal w = t_weight(it->second, f.ds_order);
                cur = first ? std::move(w) : convolve(cur, w);
                first = false;
            }
            if (key.s_power < 0) cur = repeated_integral(cur, -key.s_power);
        }
        for (const auto& [m, c] : coeff.terms()) {
            auto it = acc.find(m);
            if (it == acc.end())
                it = acc.emplace(m, SampledSignal(dt, std::vector<double>(n, 0.0)))
                         .first;
            const double cd = c.convert_to<double>();
            for (std::size_t i = 0; i < n; ++i)
                it->second.values[i] += cd * cur.values[i];
        }
    }
    return acc;
}

std::vector<std::map<Monomial, SampledSignal>> generate_equations(
    const std::map<Monomial, SampledSignal>& base, int n_extra) {
    if (n_extra < 0)
        throw std::invalid_argument("generate_equations: n_extra must be >= 0");
    std::vector<std::map<Monomial, SampledSignal>> out;
    out.reserve(static_cast<std::size_t>(n_extra) + 1);
    out.push_back(base);
    for (int j = 1; j <= n_extra; ++j) {
        std::map<Monomial, SampledSignal> eq;
        for (const auto& [m, s] : base) eq.emplace(m, repeated_integral(s, j));
        out.push_back(std::move(eq));
    }
    return out;
}

}  // namespace fracid
