#include "qcascade/criteria.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include "qcascade/errors.hpp"

namespace qcascade {

namespace mp = boost::multiprecision;

namespace {

constexpr long double kLn2 = 0.69314718055994530941L;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr long double kInfL = std::numeric_limits<long double>::infinity();

// log2 of a positive big integer; exact below 2^63, top-63-bit mantissa above.
long double big_log2(const BigInt& x) {
    std::size_t bits = mp::msb(x);
    if (bits <= 62) return std::log2(x.convert_to<long double>());
    BigInt head = x >> (bits - 62);
    return static_cast<long double>(bits - 62) + std::log2(head.convert_to<long double>());
}

bool is_pow2(const BigInt& x) { return x > 0 && (x & (x - 1)) == 0; }

long double rat_ld(const BigInt& num, const BigInt& den) {
    return mp::cpp_rational(num, den).convert_to<long double>();
}

// v * exp(shift) clamped to +-inf / +-0; exp never evaluated out of range.
long double scale_by_exp(long double v, long double shift) {
    if (v == 0 || std::isnan(v)) return v;
    if (std::isinf(v)) return std::isinf(shift) && shift < 0
                                  ? std::numeric_limits<long double>::quiet_NaN()
                                  : v;
    long double lm = std::log(std::fabs(v)) + shift;
    long double sign = v > 0 ? 1.0L : -1.0L;
    if (lm > 11300.0L) return sign * kInfL;
    if (lm < -11300.0L) return sign * 0.0L;
    return sign * std::exp(lm);
}

SplitLog split_negate(const SplitLog& x) { return {-x.a, -x.b, x.log_N}; }

SplitLog split_max(const SplitLog& x, const SplitLog& y) {
    long double cx = x.collapse(), cy = y.collapse();
    if (cx == cy && std::isinf(cx)) return split_negate(split_min(split_negate(x), split_negate(y)));
    return cx >= cy ? x : y;
}

// ---------------------------------------------------------------------------
// Trend classification over the last third of a nonnegative sequence. The
// thresholds are deliberately blunt: a finite prefix can only ever suggest.
// ---------------------------------------------------------------------------

enum class Trend { decaying, flat_positive, growing, inconclusive };

Trend classify(const std::vector<long double>& vals) {
    std::size_t n = vals.size();
    if (n < 2) return Trend::inconclusive;
    for (long double v : vals)
        if (std::isnan(v)) return Trend::inconclusive;

    std::size_t count = std::max<std::size_t>(2, n / 3);
    count = std::min(count, n);
    const long double* seg = vals.data() + (n - count);

    long double lo = seg[0], hi = seg[0];
    bool ratios_low = true, ratios_high = true;
    for (std::size_t i = 0; i + 1 < count; ++i) {
        long double a = seg[i], b = seg[i + 1];
        lo = std::min(lo, b);
        hi = std::max(hi, b);
        // a run that has collapsed onto 0 reads as decay, not as a plateau
        long double r = a == 0 ? (b == 0 ? 0.0L : kInfL) : b / a;
        if (!(r <= 0.9L)) ratios_low = false;
        if (!(r >= 1.05L)) ratios_high = false;
    }
    if (ratios_low) return Trend::decaying;
    if (ratios_high && hi > 0) return Trend::growing;
    if (lo > 0 && (std::isinf(hi) ? std::isinf(lo) : lo >= 0.8L * hi))
        return Trend::flat_positive;
    return Trend::inconclusive;
}

const char* series_label(Trend t) {
    switch (t) {
        case Trend::decaying: return "converging";
        case Trend::flat_positive:
        case Trend::growing: return "diverging";
        default: return "undecidable-at-finite-depth";
    }
}

double last_third_max(const std::vector<long double>& vals) {
    std::size_t n = vals.size();
    if (n == 0) return kNaN;
    std::size_t count = std::max<std::size_t>(1, n / 3);
    long double hi = -kInfL;
    for (std::size_t i = n - count; i < n; ++i) hi = std::max(hi, vals[i]);
    return static_cast<double>(hi);
}

// |t_m|^{1/q_{m-1}} with the exact-power path preserved: when both logs are
// exact integers the exponent is a true rational and (2^-q)^(1/q) = 1/2 to
// the last bit.
long double milnor_term(const BigFraction& tm, const BigFraction& prev) {
    if (tm.is_zero()) return 0.0L;
    auto num = tm.log2_abs_t_exact();
    auto den = prev.q_materialized();
    if (num && den) return std::exp2(rat_ld(*num, *den));
    long double l2t = tm.log_abs_t() / kLn2;
    if (den) {
        long double q = scale_by_exp(1.0L, big_log2(*den) * kLn2);
        return std::exp2(l2t / q);
    }
    // Denominator too large to materialize: divide magnitudes in log2 space.
    long double l2q_prev = prev.log_q() / kLn2;
    long double mag = (num ? big_log2(mp::abs(*num)) : std::log2(std::fabs(l2t))) - l2q_prev;
    return std::exp2(-std::exp2(mag));
}

struct PartAccumulator {
    std::vector<ConditionPart> parts;

    void add(std::string name, Verdict v, double margin) {
        parts.push_back({std::move(name), v, margin});
    }

    Verdict combined() const {
        bool any_undecidable = false;
        for (const auto& p : parts) {
            if (p.verdict == Verdict::violated) return Verdict::violated;
            if (p.verdict == Verdict::undecidable) any_undecidable = true;
        }
        return any_undecidable ? Verdict::undecidable : Verdict::satisfied;
    }

    double combined_margin() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& p : parts)
            if (!std::isnan(p.margin)) m = std::min(m, p.margin);
        return std::isinf(m) && m > 0 ? kNaN : m;
    }
};

}  // namespace

// ---------------------------------------------------------------------------
// BigFraction
// ---------------------------------------------------------------------------

BigFraction::BigFraction(BigInt p, BigInt q) : p_(std::move(p)), q_(std::move(q)), pow2_(false) {
    validate();
}

BigFraction::BigFraction(const RotationNumber& t)
    : p_(t.p), q_(t.q), pow2_(false) {}

BigFraction BigFraction::pow2_den(BigInt p, BigInt exponent) {
    BigFraction f;
    f.p_ = std::move(p);
    f.q_ = std::move(exponent);
    f.pow2_ = true;
    f.validate();
    return f;
}

void BigFraction::validate() const {
    if (!pow2_) {
        if (q_ < 1) throw ArgumentError("BigFraction: q must be positive");
        if (p_ == 0) {
            if (q_ != 1) throw ArgumentError("BigFraction: zero must be written 0/1");
            return;
        }
        if (mp::gcd(mp::abs(p_), q_) != 1) throw ArgumentError("BigFraction: fraction not reduced");
        BigInt tp = 2 * mp::abs(p_);
        if (p_ > 0 ? tp > q_ : tp >= q_)
            throw ArgumentError("BigFraction: value outside (-1/2, 1/2]");
        return;
    }
    if (q_ < 0) throw ArgumentError("BigFraction: exponent must be nonnegative");
    if (q_ == 0) {
        if (p_ != 0) throw ArgumentError("BigFraction: value outside (-1/2, 1/2]");
        return;
    }
    if (p_ == 0) throw ArgumentError("BigFraction: zero must be written 0/1");
    if (!mp::bit_test(mp::abs(p_), 0))
        throw ArgumentError("BigFraction: fraction not reduced");
    // |p| <= 2^(e-1) with equality only at +1/2; p is odd, so equality means p=1, e=1.
    std::size_t b = mp::msb(mp::abs(p_));
    if (BigInt(b) + 1 < q_) return;
    if (q_ == 1 && p_ == 1) return;
    throw ArgumentError("BigFraction: value outside (-1/2, 1/2]");
}

double BigFraction::value() const {
    if (p_ == 0) return 0.0;
    long double v = scale_by_exp(static_cast<long double>(sign()), log_abs_t());
    return static_cast<double>(v);
}

long double BigFraction::log_q() const {
    if (!pow2_) return big_log2(q_) * kLn2;
    if (q_ == 0) return 0.0L;
    if (mp::msb(q_) >= 16380) return kInfL;
    return q_.convert_to<long double>() * kLn2;
}

long double BigFraction::log_abs_p() const {
    if (p_ == 0) return -kInfL;
    return big_log2(mp::abs(p_)) * kLn2;
}

long double BigFraction::log_abs_t() const {
    if (p_ == 0) return -kInfL;
    return log_abs_p() - log_q();
}

std::optional<BigInt> BigFraction::log2_abs_t_exact() const {
    if (p_ == 0 || !is_pow2(mp::abs(p_))) return std::nullopt;
    BigInt ep(static_cast<std::uint64_t>(mp::msb(mp::abs(p_))));
    if (pow2_) return ep - q_;
    if (!is_pow2(q_)) return std::nullopt;
    return ep - BigInt(static_cast<std::uint64_t>(mp::msb(q_)));
}

std::optional<BigInt> BigFraction::q_materialized(std::size_t max_bits) const {
    if (!pow2_) return q_;
    if (q_ >= BigInt(static_cast<std::uint64_t>(max_bits))) return std::nullopt;
    return BigInt(1) << q_.convert_to<std::size_t>();
}

std::vector<BigFraction> to_big(const std::vector<RotationNumber>& ts) {
    std::vector<BigFraction> out;
    out.reserve(ts.size());
    for (const auto& t : ts) out.emplace_back(t);
    return out;
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::satisfied: return "satisfied";
        case Verdict::violated: return "violated";
        default: return "undecidable-at-finite-depth";
    }
}

// ---------------------------------------------------------------------------
// H
// ---------------------------------------------------------------------------

double h_eval(double u, double rel_tol) {
    if (!(u >= 0.0) || u >= 1.0) throw ArgumentError("h_eval: u must lie in [0, 1)");
    if (!(rel_tol > 0.0)) throw ArgumentError("h_eval: rel_tol must be positive");
    if (u == 0.0) return 0.0;

    const long double x = u;
    const long double u2 = x * x;
    long double even = u2;  // u^{2k}
    long double odd = x;    // u^{2k-1}
    long double prod = 16.0L * x;
    // Tail of the log-product after k factors is below
    // 16 u^{2k+1} / ((1-u)(1-u^2)); stop once that is under rel_tol/2.
    const long double tail_scale = 16.0L / ((1.0L - x) * (1.0L - u2));
    for (int k = 1; k < 200000; ++k) {
        long double f = (1.0L + even) / (1.0L - odd);
        prod *= f * f;          // ^2
        long double f4 = f * f; // reuse for ^8 without powl
        prod *= f4 * f4 * f4;
        if (tail_scale * odd * u2 < 0.5L * rel_tol) break;
        even *= u2;
        odd *= u2;
    }
    return static_cast<double>(prod);
}

// ---------------------------------------------------------------------------
// Series and limsup conditions
// ---------------------------------------------------------------------------

ConditionReport milnor_series(const std::vector<BigFraction>& ts) {
    if (ts.size() < 2) throw ArgumentError("milnor_series: need at least two entries");

    ConditionReport rep;
    rep.name = "milnor_series";
    rep.columns = {"term", "partial_sum"};
    rep.rows.assign(ts.size(), {kNaN, kNaN});

    std::vector<long double> terms;
    long double sum = 0;
    for (std::size_t m = 1; m < ts.size(); ++m) {
        long double a = milnor_term(ts[m], ts[m - 1]);
        terms.push_back(a);
        sum += a;
        rep.rows[m] = {static_cast<double>(a), static_cast<double>(sum)};
    }

    Trend t = classify(terms);
    rep.note = series_label(t);
    switch (t) {
        case Trend::decaying:
            rep.verdict = Verdict::satisfied;
            rep.margin = 0.9 - static_cast<double>(terms.back() / terms[terms.size() - 2]);
            break;
        case Trend::flat_positive:
        case Trend::growing: {
            rep.verdict = Verdict::violated;
            long double lo = kInfL;
            std::size_t c = std::max<std::size_t>(2, terms.size() / 3);
            for (std::size_t i = terms.size() - std::min(c, terms.size()); i < terms.size(); ++i)
                lo = std::min(lo, terms[i]);
            rep.margin = static_cast<double>(lo);
            break;
        }
        default:
            rep.verdict = Verdict::undecidable;
            rep.margin = 0;
    }
    return rep;
}

ConditionReport theorem2_condition(const std::vector<BigFraction>& ts, double a, double Q) {
    if (!(a > 0.0 && a < 1.0)) throw ArgumentError("theorem2_condition: a must lie in (0,1)");
    if (!(Q > 0.0)) throw ArgumentError("theorem2_condition: Q must be positive");

    ConditionReport rep;
    rep.name = "theorem2_condition";
    rep.columns = {"term", "q_log"};
    rep.rows.assign(ts.size(), {kNaN, kNaN});

    std::vector<long double> terms;
    long double max_log_q = -kInfL;
    for (std::size_t m = 0; m < ts.size(); ++m) {
        max_log_q = std::max(max_log_q, ts[m].log_q());
        rep.rows[m][1] = static_cast<double>(ts[m].log_q());
        if (m >= 1) {
            terms.push_back(milnor_term(ts[m], ts[m - 1]));
            rep.rows[m][0] = static_cast<double>(terms.back());
        }
    }

    PartAccumulator acc;
    if (terms.empty()) {
        acc.add("limsup_lt_a", Verdict::undecidable, 0);
        rep.note = "no terms: single element has no trend";
    } else {
        double proxy = last_third_max(terms);
        acc.add("limsup_lt_a", proxy < a ? Verdict::satisfied : Verdict::violated, a - proxy);
    }
    double q_margin = static_cast<double>(max_log_q) - std::log(Q);
    acc.add("q_exceeds_Q", q_margin > 0 ? Verdict::satisfied : Verdict::violated, q_margin);

    rep.parts = acc.parts;
    rep.verdict = acc.combined();
    rep.margin = acc.combined_margin();
    return rep;
}

// ---------------------------------------------------------------------------
// Tail conditions (E0) / (Y0) / (S0)
// ---------------------------------------------------------------------------

ConditionReport theorem5_conditions(const std::vector<BigFraction>& ts, std::size_t k,
                                    const GeometryConstants& constants, bool intro_form) {
    constants.validate();
    if (k >= ts.size()) throw ArgumentError("theorem5_conditions: k must be below the length");
    (void)intro_form;  // both printed denominators multiply out to q_k...q_m

    const std::size_t len = ts.size();
    const long double lnC = std::log(static_cast<long double>(constants.c_big()));
    const long double ln4 = 2.0L * kLn2;

    std::vector<long double> lnq(len), lnt(len);
    std::vector<long double> S(len + 1, 0.0L);  // S[i] = sum of lnq below i
    for (std::size_t i = 0; i < len; ++i) {
        lnq[i] = ts[i].log_q();
        lnt[i] = ts[i].log_abs_t();
        S[i + 1] = S[i] + lnq[i];
    }

    ConditionReport rep;
    rep.name = "theorem5_conditions";
    rep.columns = {"e0_value", "y0_value", "theta_log", "u", "s0_term", "s0_partial"};
    rep.rows.assign(len, std::vector<double>(6, kNaN));

    std::vector<long double> e0_vals, y0_vals;
    for (std::size_t m = 0; m + 1 < len; ++m) {
        long double v = scale_by_exp(-lnt[m + 1], -S[m]);
        e0_vals.push_back(v);
        rep.rows[m][0] = static_cast<double>(v);
    }
    for (std::size_t m = 0; m < len; ++m) {
        long double w = scale_by_exp(1.0L, lnt[m] + S[m]);
        y0_vals.push_back(w);
        rep.rows[m][1] = static_cast<double>(w);
    }

    // theta_{k,m} and u_{k,m} for m >= k; the 4^(prod q) branch stays split.
    std::vector<long double> u(len, kNaN);
    bool u_overflow = false;
    for (std::size_t m = k; m + 1 < len; ++m) {
        SplitLog direct = SplitLog::from(lnC + lnt[m + 1] + (S[m + 1] - S[k]));
        SplitLog tower{lnC + lnt[m + 1] - (S[m] - S[k]) - lnq[m], ln4, S[m] - S[k]};
        SplitLog theta = split_max(direct, tower);
        rep.rows[m][2] = static_cast<double>(theta.collapse());
        long double lu = theta.divided_by_exp(lnq[m]);
        u[m] = std::isnan(lu) ? kNaN : scale_by_exp(1.0L, lu);
        if (u[m] >= 1.0L) u_overflow = true;
        rep.rows[m][3] = static_cast<double>(u[m]);
    }

    std::vector<long double> s0_terms;
    long double s0_sum = 0;
    for (std::size_t m = k; m + 2 < len; ++m) {
        long double qm = scale_by_exp(1.0L, lnq[m]);
        long double term;
        if (std::isnan(u[m]) || std::isnan(u[m + 1]))
            term = std::numeric_limits<long double>::quiet_NaN();
        else if (u[m] >= 1.0L || u[m + 1] >= 1.0L)
            term = kInfL;
        else
            term = u[m] / (qm * (1.0L - u[m])) *
                   static_cast<long double>(h_eval(static_cast<double>(u[m + 1])));
        s0_terms.push_back(term);
        s0_sum += term;
        rep.rows[m][4] = static_cast<double>(term);
        rep.rows[m][5] = static_cast<double>(s0_sum);
    }

    PartAccumulator acc;
    {
        Trend t = classify(e0_vals);
        Verdict v = t == Trend::decaying               ? Verdict::violated
                    : (t == Trend::flat_positive || t == Trend::growing) ? Verdict::satisfied
                                                                         : Verdict::undecidable;
        long double lo = e0_vals.empty() ? 0.0L : *std::min_element(e0_vals.begin(), e0_vals.end());
        acc.add("e0_liminf_positive", v, static_cast<double>(lo));
    }
    {
        Trend t = classify(y0_vals);
        Verdict v = t == Trend::growing ? Verdict::violated
                    : (t == Trend::decaying || t == Trend::flat_positive) ? Verdict::satisfied
                                                                          : Verdict::undecidable;
        long double hi = y0_vals.empty() ? 0.0L : *std::max_element(y0_vals.begin(), y0_vals.end());
        acc.add("y0_sup_finite", v, static_cast<double>(hi));
    }
    {
        Verdict v;
        double margin = 0;
        if (s0_terms.empty()) {
            v = Verdict::undecidable;
            rep.note = "s0: no computable terms at this k and length";
        } else if (u_overflow || std::isinf(s0_sum)) {
            v = Verdict::violated;
        } else {
            Trend t = classify(s0_terms);
            v = t == Trend::decaying ? Verdict::satisfied
                : (t == Trend::flat_positive || t == Trend::growing) ? Verdict::violated
                                                                     : Verdict::undecidable;
            margin = static_cast<double>(s0_terms.back());  // remainder heuristic, not a bound
        }
        acc.add("s0_series_finite", v, margin);
    }

    rep.parts = acc.parts;
    rep.verdict = acc.combined();
    rep.margin = acc.combined_margin();
    return rep;
}

// ---------------------------------------------------------------------------
// Lemma quantities and conditions (0) / (Y) / (S)
// ---------------------------------------------------------------------------

ConditionReport lemma_quantities(const std::vector<BigFraction>& ts, std::uint64_t n,
                                 const GeometryConstants& constants) {
    constants.validate();
    if (ts.size() < 2) throw ArgumentError("lemma_quantities: need at least two entries");
    if (n == 0) throw ArgumentError("lemma_quantities: n must be positive");

    const std::size_t len = ts.size();
    const long double beta = static_cast<long double>(constants.beta);
    const long double ln_d_scale = std::log(320.0L) - std::log(beta);
    const long double ln_200beta = std::log(200.0L * beta);

    ConditionReport rep;
    rep.name = "lemma_quantities";
    rep.columns = {"q_log", "n_log", "d_log", "d_tilde_log", "theta_bar_log",
                   "u_bar", "s_term", "s_partial"};
    rep.rows.assign(len, std::vector<double>(8, kNaN));

    std::vector<long double> lnq(len), lnt(len);
    for (std::size_t i = 0; i < len; ++i) {
        lnq[i] = ts[i].log_q();
        lnt[i] = ts[i].log_abs_t();
    }

    long double ln_nm = std::log(static_cast<long double>(n));
    std::optional<std::uint64_t> n_exact = n;

    std::vector<long double> u_bar(len, std::numeric_limits<long double>::quiet_NaN());
    std::vector<double> y_margins;
    bool y_nan = false;

    for (std::size_t m = 0; m < len; ++m) {
        rep.rows[m][0] = static_cast<double>(lnq[m]);
        rep.rows[m][1] = static_cast<double>(ln_nm);

        SplitLog d_tilde =
            log_bifurcation_radius_big(lnt[m], ln_nm, n_exact, lnq[m], constants);
        rep.rows[m][3] = static_cast<double>(d_tilde.collapse());

        if (m + 1 < len) {
            long double ln_d = ln_d_scale - 2.0L * lnq[m] + lnt[m + 1];
            rep.rows[m][2] = static_cast<double>(ln_d);

            // (Y): d_m < d~_m / 2, margin in log scale. NaN only when both
            // sides sit below the log-space floor.
            long double margin = (d_tilde.collapse() - kLn2) - ln_d;
            if (std::isnan(margin)) y_nan = true;
            y_margins.push_back(static_cast<double>(margin));

            SplitLog ln_theta_bar = split_add(split_negate(d_tilde), ln_200beta + ln_d);
            rep.rows[m][4] = static_cast<double>(ln_theta_bar.collapse());
            long double lu = ln_theta_bar.divided_by_exp(lnq[m]);
            u_bar[m] = std::isnan(lu) ? lu : scale_by_exp(1.0L, lu);
            rep.rows[m][5] = static_cast<double>(u_bar[m]);
        }

        if (m + 1 < len) {
            // advance n_{m+1} = n_m * q_m
            ln_nm += lnq[m];
            if (n_exact) {
                auto qv = ts[m].q_materialized(63);
                if (qv && *n_exact <= (std::uint64_t{1} << 62) / qv->convert_to<std::uint64_t>())
                    n_exact = *n_exact * qv->convert_to<std::uint64_t>();
                else
                    n_exact.reset();
            }
        }
    }

    // (S) sum: |t_0| H(u_0) + sum_{m>=1} u_{m-1}/(q_{m-1}(1-u_{m-1})) H(u_m).
    long double s_sum = 0;
    bool s_nan = false, s_inf = false;
    for (std::size_t m = 0; m + 1 < len; ++m) {
        long double term;
        if (std::isnan(u_bar[m])) {
            s_nan = true;
            term = std::numeric_limits<long double>::quiet_NaN();
        } else if (u_bar[m] >= 1.0L) {
            s_inf = true;
            term = kInfL;
        } else if (m == 0) {
            term = scale_by_exp(1.0L, lnt[0]) *
                   static_cast<long double>(h_eval(static_cast<double>(u_bar[0])));
        } else {
            long double qprev = scale_by_exp(1.0L, lnq[m - 1]);
            term = u_bar[m - 1] / (qprev * (1.0L - u_bar[m - 1])) *
                   static_cast<long double>(h_eval(static_cast<double>(u_bar[m])));
        }
        if (!std::isnan(term)) s_sum += term;
        rep.rows[m][6] = static_cast<double>(term);
        rep.rows[m][7] = static_cast<double>(s_sum);
    }

    PartAccumulator acc;
    {
        long double min_lnq = *std::min_element(lnq.begin(), lnq.end());
        acc.add("q_above_threshold", Verdict::satisfied,
                static_cast<double>(scale_by_exp(1.0L, min_lnq)));
    }
    {
        Verdict v = Verdict::satisfied;
        double margin = std::numeric_limits<double>::infinity();
        for (double ym : y_margins) {
            if (std::isnan(ym)) v = Verdict::undecidable;
            margin = std::min(margin, ym);
        }
        if (y_nan) v = Verdict::undecidable;
        if (!(margin > 0)) v = Verdict::violated;
        acc.add("y_gap", v, margin);
    }
    {
        Verdict v;
        double margin = constants.L_budget - static_cast<double>(s_sum);
        if (s_nan)
            v = Verdict::undecidable;
        else if (s_inf || !(s_sum < static_cast<long double>(constants.L_budget)))
            v = Verdict::violated;
        else
            v = Verdict::satisfied;
        acc.add("s_budget", v, margin);
    }

    rep.parts = acc.parts;
    rep.verdict = acc.combined();
    rep.margin = acc.combined_margin();
    rep.note = "q_above_threshold margin reports min q_m; the threshold itself is existential";
    return rep;
}

}  // namespace qcascade
