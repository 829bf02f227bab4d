#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qcascade/component_geometry.hpp"

namespace qcascade {

using BigInt = boost::multiprecision::cpp_int;

// Rotation number p/q with unbounded q. The denominator is held either as an
// exact integer or as a power 2^e whose expanded form would not fit in
// memory; e itself is exact. Downstream arithmetic works on logarithms, but
// exact base-2 logs are preserved whenever numerator and denominator are both
// powers of two, so quantities like (2^-q)^(1/q) come out exactly.
class BigFraction {
public:
    BigFraction(BigInt p, BigInt q);
    explicit BigFraction(const RotationNumber& t);

    // q = 2^exponent without materializing the power.
    static BigFraction pow2_den(BigInt p, BigInt exponent);

    const BigInt& p() const { return p_; }
    bool den_is_pow2_form() const { return pow2_; }
    // The exact denominator, or the exponent when den_is_pow2_form().
    const BigInt& den_raw() const { return q_; }

    bool is_zero() const { return p_ == 0; }
    int sign() const { return p_ == 0 ? 0 : (p_ > 0 ? 1 : -1); }

    double value() const;  // saturating; exact only when representable

    // Natural logs as long double; +-inf at the ends of the range.
    long double log_q() const;
    long double log_abs_p() const;
    long double log_abs_t() const;  // log|p/q|, -inf for p = 0

    // Exact log2|p/q| when |p| and q are both powers of two.
    std::optional<BigInt> log2_abs_t_exact() const;

    // The denominator as an integer when it fits below max_bits.
    std::optional<BigInt> q_materialized(std::size_t max_bits = std::size_t{1} << 22) const;

private:
    BigFraction() = default;
    void validate() const;

    BigInt p_;
    BigInt q_;  // denominator, or its base-2 exponent when pow2_
    bool pow2_ = false;
};

std::vector<BigFraction> to_big(const std::vector<RotationNumber>& ts);

enum class Verdict { satisfied, violated, undecidable };
const char* to_string(Verdict v);

// One sub-condition of a report. margin is the signed distance to the
// threshold in whatever scale the condition lives in (noted per condition).
struct ConditionPart {
    std::string name;
    Verdict verdict = Verdict::undecidable;
    double margin = 0;
};

// Per-m quantity table plus verdicts. Finite data cannot certify an
// asymptotic statement, so trend judgments inspect the last third of the
// computed terms and fall back to undecidable when the trend is unclear.
struct ConditionReport {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;  // one row per m; NaN = not defined there
    std::vector<ConditionPart> parts;
    Verdict verdict = Verdict::undecidable;
    double margin = 0;
    std::string note;
};

// H(u) = 16u prod_{k>=1} (1+u^{2k})^8 / (1-u^{2k-1})^8, truncated once the
// remaining tail is provably below rel_tol/2. Relative error <= rel_tol for
// u <= 0.99.
double h_eval(double u, double rel_tol = 1e-12);

// Sum of |t_m|^{1/q_{m-1}}, m >= 1. Requires at least two entries.
ConditionReport milnor_series(const std::vector<BigFraction>& ts);

// Limsup proxy max over the last third of |t_m|^{1/q_{m-1}} checked against
// a, plus max q_m checked against Q.
ConditionReport theorem2_condition(const std::vector<BigFraction>& ts, double a, double Q);

// Conditions (E0), (Y0), (S0) for the tail starting at index k. The two
// printed forms of the theta denominator multiply out to the same product;
// intro_form keeps the call sites explicit about which statement they quote.
ConditionReport theorem5_conditions(const std::vector<BigFraction>& ts, std::size_t k,
                                    const GeometryConstants& constants,
                                    bool intro_form = false);

// Lemma quantities n_m, d_m, d~_m, theta-bar_m, u-bar_m and the verdicts of
// conditions (0), (Y), (S) against constants.L_budget. Base period n.
ConditionReport lemma_quantities(const std::vector<BigFraction>& ts, std::uint64_t n,
                                 const GeometryConstants& constants);

}  // namespace qcascade
