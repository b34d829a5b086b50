#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fracid/signals.hpp"

namespace fracid {

using Rational = boost::multiprecision::cpp_rational;

// ---------------------------------------------------------------------------
// Parameter polynomials: multivariate polynomials in named unknowns with
// exact rational coefficients. Exactness matters: determinant expansion must
// not lose cancellations.
// ---------------------------------------------------------------------------

// A parameter monomial: named symbols with positive integer exponents.
// The empty monomial is the constant term.
struct Monomial {
    std::map<std::string, int> powers;

    static Monomial one() { return {}; }
    static Monomial symbol(const std::string& name, int power = 1);

    bool is_one() const { return powers.empty(); }
    int degree() const;
    bool contains(const std::string& name) const;
    Monomial times(const Monomial& other) const;
    Monomial divided_by(const std::string& name) const;
    std::string str() const;  // "1", "alpha", "alpha^2*E0" (names sorted)

    bool operator==(const Monomial& o) const { return powers == o.powers; }
    bool operator<(const Monomial& o) const;
};

class ParamPoly {
  public:
    ParamPoly() = default;  // zero
    static ParamPoly constant(const Rational& c);
    static ParamPoly constant(long c) { return constant(Rational(c)); }
    static ParamPoly symbol(const std::string& name);
    static ParamPoly monomial(const Monomial& m, const Rational& c);

    bool is_zero() const { return terms_.empty(); }
    bool is_constant() const;
    const std::map<Monomial, Rational>& terms() const { return terms_; }

    ParamPoly operator+(const ParamPoly& o) const;
    ParamPoly operator-(const ParamPoly& o) const;
    ParamPoly operator*(const ParamPoly& o) const;
    ParamPoly operator-() const;
    ParamPoly scaled(const Rational& c) const;
    bool operator==(const ParamPoly& o) const { return terms_ == o.terms_; }

    // Symbols present in every monomial (with multiplicity >= 1).
    std::set<std::string> common_symbols() const;
    // Divides every monomial by one power of name; requires it be common.
    ParamPoly divided_by_symbol(const std::string& name) const;
    // Numeric evaluation; every symbol must be bound.
    double evaluate(const std::map<std::string, double>& binding) const;
    std::set<std::string> symbols() const;

    std::string str() const;  // deterministic, e.g. "(1 - alpha)" / "alpha"

  private:
    std::map<Monomial, Rational> terms_;
    void prune();
    friend class OpExpr;
};

// ---------------------------------------------------------------------------
// Operational expressions: canonical sums of
//       coeff * s^k * product of s-derivatives of signal symbols
// with coeff a ParamPoly and k an integer (Laurent polynomials in s).
// ---------------------------------------------------------------------------

struct FactorKey {
    std::string id;    // signal symbol, e.g. "eps"
    int ds_order = 0;  // j: number of d/ds applications, lowers to (-t)^j
    bool operator==(const FactorKey& o) const = default;
    bool operator<(const FactorKey& o) const {
        return std::tie(id, ds_order) < std::tie(o.id, o.ds_order);
    }
};

struct TermKey {
    int s_power = 0;
    std::vector<FactorKey> factors;  // kept sorted (a multiset)
    bool operator==(const TermKey& o) const = default;
    bool operator<(const TermKey& o) const {
        return std::tie(s_power, factors) < std::tie(o.s_power, o.factors);
    }
};

class OpExpr {
  public:
    OpExpr() = default;  // zero
    static OpExpr term(ParamPoly coeff, int s_power,
                       std::vector<FactorKey> factors);
    static OpExpr signal(const std::string& id, int ds_order = 0);
    static OpExpr constant(const ParamPoly& coeff, int s_power = 0);

    bool is_zero() const { return terms_.empty(); }
    const std::map<TermKey, ParamPoly>& terms() const { return terms_; }

    OpExpr operator+(const OpExpr& o) const;
    OpExpr operator-(const OpExpr& o) const;
    OpExpr operator*(const OpExpr& o) const;
    OpExpr operator-() const;
    OpExpr scaled(const ParamPoly& c) const;
    OpExpr shifted_s(int delta) const;  // multiply by s^delta
    bool operator==(const OpExpr& o) const { return terms_ == o.terms_; }

    // d/ds: product rule over factors (raising one derivative order) plus the
    // power rule k s^(k-1) on the s part.
    OpExpr dds() const;

    int max_s_power() const;  // 0 for the zero expression
    std::set<std::string> common_symbols() const;
    OpExpr stripped_of_symbol(const std::string& name) const;
    std::set<std::string> symbols() const;

  private:
    std::map<TermKey, ParamPoly> terms_;
    void add_term(const TermKey& k, const ParamPoly& c);
};

// Deterministic text rendering, one term per line, grammar
//   term := coeff "*" ["s^" k "*"] factor ("*" factor)*
//   factor := signal ["'" x j]
// Terms are ordered by descending s-power, then by factor list.
std::string pretty(const OpExpr& e);

// ---------------------------------------------------------------------------
// Fractional-exponent layer: sums of OpExpr slots, each multiplied by a
// symbolic or known fractional power s^tag. Tag 0 is the exponent-free slot.
// ---------------------------------------------------------------------------

struct Tag {
    bool is_known = true;
    Rational value = 0;  // when known
    std::string name;    // when symbolic (an exponent unknown, e.g. "alpha")

    static Tag known(const Rational& v) { return Tag{true, v, {}}; }
    static Tag zero() { return known(0); }
    static Tag symbol(const std::string& n) { return Tag{false, 0, n}; }

    // The exponent as a coefficient polynomial (for the d/ds rule).
    ParamPoly as_poly() const;
    std::string str() const;

    bool operator==(const Tag& o) const = default;
    bool operator<(const Tag& o) const {
        return std::tie(o.is_known, value, name) <
               std::tie(is_known, o.value, o.name);  // known tags first
    }
};

class FracOpExpr {
  public:
    FracOpExpr() = default;
    const std::map<Tag, OpExpr>& slots() const { return slots_; }
    void add(const Tag& tag, const OpExpr& e);
    OpExpr slot(const Tag& tag) const;

    // Per-slot rule: d/ds (E s^alpha) = (E' + alpha s^-1 E) s^alpha.
    FracOpExpr dds() const;

  private:
    std::map<Tag, OpExpr> slots_;
};

// ---------------------------------------------------------------------------
// Operator matrix and elimination.
// ---------------------------------------------------------------------------

struct OperatorMatrix {
    std::vector<std::vector<OpExpr>> entries;
    std::size_t size() const { return entries.size(); }
};

struct PBuild {
    OperatorMatrix P;
    std::vector<Tag> tags;  // column exponents, in column order
};

// Builds the square operator matrix whose rows are successive d/ds images of
// the grouped equation: row 0 holds the group expressions, row i applies the
// per-column rule E -> E' + alpha_j s^-1 E to row i-1. The column form allows
// repeated tags (used for initial-value elimination columns).
PBuild build_P(const std::vector<std::pair<Tag, OpExpr>>& columns);
PBuild build_P(const FracOpExpr& grouped);

// Determinant over the commutative OpExpr ring (cofactor expansion with
// canonical term merging).
OpExpr det(const OperatorMatrix& P);

// Multiplies by s^-k with the smallest k >= 0 making every s-power <= 0.
std::pair<OpExpr, int> normalize(const OpExpr& e);

// Numeric lowering: products of signal symbols -> convolutions, s-derivative
// orders -> (-t)^j weightings, s^-k -> repeated integrals (a factor-free term
// lowers to the kernel t^(k-1)/(k-1)!). Entries accumulate per parameter
// monomial. Requires every s-power <= 0 (run normalize first).
std::map<Monomial, SampledSignal> lower(
    const OpExpr& e, const std::map<std::string, SampledSignal>& bindings);

// Equation j applies repeated_integral(. , j) entry-wise to the base map,
// j = 0..n_extra (further multiplications by s^-1 in operator language).
std::vector<std::map<Monomial, SampledSignal>> generate_equations(
    const std::map<Monomial, SampledSignal>& base, int n_extra);

}  // namespace fracid
