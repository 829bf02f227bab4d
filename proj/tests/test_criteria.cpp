#include <doctest.h>

#include <cmath>
#include <vector>

#include "qcascade/criteria.hpp"

using qcascade::ArgumentError;
using qcascade::BigFraction;
using qcascade::BigInt;
using qcascade::ConditionReport;
using qcascade::GeometryConstants;
using qcascade::RotationNumber;
using qcascade::Verdict;

namespace {

std::vector<BigFraction> halves(int count) {
    std::vector<BigFraction> ts;
    for (int i = 0; i < count; ++i) ts.emplace_back(RotationNumber(1, 2));
    return ts;
}

const qcascade::ConditionPart& part(const ConditionReport& rep, const std::string& name) {
    for (const auto& p : rep.parts)
        if (p.name == name) return p;
    REQUIRE(false);
    static qcascade::ConditionPart dummy;
    return dummy;
}

// Cell-wise equality where NaN marks an undefined entry and two undefined
// entries count as equal.
bool same_rows(const std::vector<std::vector<double>>& x,
               const std::vector<std::vector<double>>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].size() != y[i].size()) return false;
        for (std::size_t j = 0; j < x[i].size(); ++j)
            if (x[i][j] != y[i][j] && !(std::isnan(x[i][j]) && std::isnan(y[i][j])))
                return false;
    }
    return true;
}

}  // namespace

TEST_CASE("BigFraction validation mirrors the rotation-number rules") {
    CHECK_NOTHROW(BigFraction(BigInt(1), BigInt(2)));
    CHECK_NOTHROW(BigFraction(BigInt(-3), BigInt(7)));
    CHECK_THROWS_AS(BigFraction(BigInt(1), BigInt(1)), ArgumentError);   // |t| = 1
    CHECK_THROWS_AS(BigFraction(BigInt(2), BigInt(4)), ArgumentError);   // not reduced
    CHECK_THROWS_AS(BigFraction(BigInt(0), BigInt(5)), ArgumentError);   // zero form
    CHECK_THROWS_AS(BigFraction(BigInt(-1), BigInt(2)), ArgumentError);  // -1/2 excluded

    CHECK_NOTHROW(BigFraction::pow2_den(BigInt(3), BigInt(5)));  // 3/32
    CHECK_THROWS_AS(BigFraction::pow2_den(BigInt(2), BigInt(5)), ArgumentError);   // even p
    CHECK_THROWS_AS(BigFraction::pow2_den(BigInt(17), BigInt(5)), ArgumentError);  // 17/32 > 1/2
    CHECK_NOTHROW(BigFraction::pow2_den(BigInt(1), BigInt(1)));  // exactly 1/2

    CHECK(BigFraction(BigInt(1), BigInt(2)).value() == 0.5);
    CHECK(BigFraction::pow2_den(BigInt(1), BigInt(4)).value() == 0.0625);
    // A denominator far beyond binary64 still carries exact logs.
    BigFraction tiny = BigFraction::pow2_den(BigInt(1), BigInt(100000));
    CHECK(tiny.value() == 0.0);
    CHECK(std::abs(static_cast<double>(tiny.log_abs_t()) + 100000.0 * std::log(2.0)) <= 1e-6);
}

TEST_CASE("h_eval fixed values against a direct high-precision product") {
    CHECK(qcascade::h_eval(0.0) == 0.0);

    // Oracle: the defining product taken to k = 50 in long double.
    const long double u = 0.1L;
    long double prod = 16.0L * u;
    for (int k = 1; k <= 50; ++k) {
        long double even = std::pow(u, 2.0L * k);
        long double odd = std::pow(u, 2.0L * k - 1.0L);
        long double f = (1.0L + even) / (1.0L - odd);
        long double f2 = f * f, f4 = f2 * f2;
        prod *= f4 * f4;
    }
    double oracle = static_cast<double>(prod);
    CHECK(std::abs(oracle - 4.061) <= 1e-3);
    CHECK(qcascade::h_eval(0.1) == doctest::Approx(oracle).epsilon(1e-10));

    CHECK_THROWS_AS(qcascade::h_eval(1.0), ArgumentError);
    CHECK_THROWS_AS(qcascade::h_eval(1.5), ArgumentError);
    CHECK_THROWS_AS(qcascade::h_eval(-0.1), ArgumentError);
    CHECK_THROWS_AS(qcascade::h_eval(0.5, 0.0), ArgumentError);
}

TEST_CASE("h_eval grid: monotone, bounded, stable under truncation") {
    double prev = 0.0;
    for (int i = 1; i <= 95; ++i) {
        double u = 0.01 * i;
        double h = qcascade::h_eval(u);
        CHECK(h > prev);
        prev = h;
        // Upper bound from the theta-function estimate, lower bound from the
        // leading factor: every product factor exceeds 1.
        CHECK(h >= 16.0 * u);
        CHECK(h <= (1.0 / 16.0) * std::exp(-M_PI * M_PI / std::log(u)) * (1.0 + 1e-9));
        double h8 = qcascade::h_eval(u, 1e-8);
        CHECK(std::abs(h8 - h) <= 1e-7 * h);
    }
}

TEST_CASE("milnor_series on constant halves diverges") {
    auto rep = qcascade::milnor_series(halves(8));
    REQUIRE(rep.rows.size() == 8);
    const double expect = std::sqrt(0.5);
    for (std::size_t m = 1; m < 8; ++m) {
        CHECK(rep.rows[m][0] == doctest::Approx(expect).epsilon(1e-15));
        CHECK(rep.rows[m][1] ==
              doctest::Approx(expect * static_cast<double>(m)).epsilon(1e-12));
    }
    CHECK(rep.verdict == Verdict::violated);
    CHECK(rep.note == "diverging");
}

TEST_CASE("milnor_series exact terms on the doubling-tower sequence") {
    // q_{m+1} = 2^{q_m} starting at q_0 = 2: every term is exactly 1/2, so the
    // series diverges even though far tamer growth already satisfies the
    // limsup condition.
    std::vector<BigFraction> ts;
    ts.emplace_back(BigInt(1), BigInt(2));
    ts.emplace_back(BigInt(1), BigInt(4));
    ts.emplace_back(BigInt(1), BigInt(16));
    ts.emplace_back(BigInt(1), BigInt(65536));
    ts.push_back(BigFraction::pow2_den(BigInt(1), BigInt(65536)));
    auto rep = qcascade::milnor_series(ts);
    for (std::size_t m = 1; m < ts.size(); ++m) CHECK(rep.rows[m][0] == 0.5);
    CHECK(rep.rows[4][1] == 2.0);  // partial sums 0.5, 1.0, 1.5, 2.0
    CHECK(rep.verdict == Verdict::violated);

    auto t2 = qcascade::theorem2_condition(ts, 0.6, 2.0);
    CHECK(part(t2, "limsup_lt_a").verdict == Verdict::satisfied);
    CHECK(part(t2, "limsup_lt_a").margin == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(part(t2, "q_exceeds_Q").verdict == Verdict::satisfied);
    CHECK(t2.verdict == Verdict::satisfied);
}

TEST_CASE("milnor_series exact terms on the self-power tower") {
    // q_{m+1} = q_m^{q_m} from q_0 = 2: terms are exactly 1/q_{m-1}, which
    // collapses at double-exponential speed on any representable prefix.
    std::vector<BigFraction> ts;
    ts.emplace_back(BigInt(1), BigInt(2));
    ts.emplace_back(BigInt(1), BigInt(4));
    ts.emplace_back(BigInt(1), BigInt(256));
    ts.push_back(BigFraction::pow2_den(BigInt(1), BigInt(2048)));
    ts.push_back(BigFraction::pow2_den(BigInt(1), BigInt(2048) * (BigInt(1) << 2048)));
    auto rep = qcascade::milnor_series(ts);
    CHECK(rep.rows[1][0] == 0.5);
    CHECK(rep.rows[2][0] == 0.25);
    CHECK(rep.rows[3][0] == 1.0 / 256.0);
    CHECK(rep.rows[4][0] <= 1e-300);  // 2^-2048 underflows the double column
    CHECK(rep.verdict == Verdict::satisfied);
    CHECK(rep.note == "converging");
}

TEST_CASE("milnor_series reports slow mixed decay as undecidable") {
    // The tail drops by 30 percent and then creeps: the last-third ratios sit
    // between the decay and growth thresholds while the spread rules out a
    // plateau, which is exactly the undecidable-at-finite-depth case.
    std::vector<BigFraction> ts;
    ts.emplace_back(BigInt(1), BigInt(2));
    for (int i = 0; i < 6; ++i) ts.emplace_back(BigInt(1), BigInt(3));
    ts.emplace_back(BigInt(1), BigInt(7));
    ts.emplace_back(BigInt(1), BigInt(1144));
    ts.push_back(BigFraction::pow2_den(BigInt(1), BigInt(1707)));

    auto rep = qcascade::milnor_series(ts);
    REQUIRE(rep.rows.size() == 10);
    // Tail terms: (1/7)^{1/3}, (1/1144)^{1/7}, (2^-1707)^{1/1144}.
    CHECK(rep.rows[7][0] == doctest::Approx(std::pow(1.0 / 7.0, 1.0 / 3.0)).epsilon(1e-12));
    CHECK(rep.rows[8][0] == doctest::Approx(std::pow(1.0 / 1144.0, 1.0 / 7.0)).epsilon(1e-12));
    CHECK(rep.rows[9][0] ==
          doctest::Approx(std::exp2(-1707.0 / 1144.0)).epsilon(1e-12));
    CHECK(rep.verdict == Verdict::undecidable);
    CHECK(rep.note == "undecidable-at-finite-depth");
}

TEST_CASE("milnor_series rejects short input") {
    CHECK_THROWS_AS(qcascade::milnor_series({BigFraction(BigInt(1), BigInt(2))}), ArgumentError);
}

TEST_CASE("theorem2_condition fixed sequences") {
    // Constant halves: proxy = sqrt(1/2), fails any a at or below it.
    auto rep = qcascade::theorem2_condition(halves(9), 0.7, 2.0);
    CHECK(part(rep, "limsup_lt_a").verdict == Verdict::violated);
    CHECK(part(rep, "limsup_lt_a").margin ==
          doctest::Approx(0.7 - std::sqrt(0.5)).epsilon(1e-9));
    CHECK(rep.verdict == Verdict::violated);
    // ... and passes a generous a.
    auto loose = qcascade::theorem2_condition(halves(9), 0.8, 1.5);
    CHECK(part(loose, "limsup_lt_a").verdict == Verdict::satisfied);
    CHECK(part(loose, "q_exceeds_Q").verdict == Verdict::satisfied);

    // A single element has no trend to judge.
    auto single = qcascade::theorem2_condition({BigFraction(BigInt(1), BigInt(3))}, 0.5, 2.0);
    CHECK(part(single, "limsup_lt_a").verdict == Verdict::undecidable);
    CHECK(single.verdict == Verdict::undecidable);

    CHECK_THROWS_AS(qcascade::theorem2_condition(halves(3), 0.0, 2.0), ArgumentError);
    CHECK_THROWS_AS(qcascade::theorem2_condition(halves(3), 1.0, 2.0), ArgumentError);
    CHECK_THROWS_AS(qcascade::theorem2_condition(halves(3), 0.5, 0.0), ArgumentError);
}

TEST_CASE("theorem5_conditions on constant halves: escape rate dies") {
    GeometryConstants g;
    auto rep = qcascade::theorem5_conditions(halves(9), 0, g);
    // e0 column: log(2) / 2^m, halving every row.
    for (int m = 0; m < 8; ++m) {
        CHECK(rep.rows[static_cast<size_t>(m)][0] ==
              doctest::Approx(std::log(2.0) / std::exp2(m)).epsilon(1e-9));
    }
    CHECK(part(rep, "e0_liminf_positive").verdict == Verdict::violated);
    // |t_m| q_0...q_{m-1} = 2^{m-1} grows without bound.
    CHECK(part(rep, "y0_sup_finite").verdict == Verdict::violated);
    CHECK(rep.verdict == Verdict::violated);
}

TEST_CASE("theorem5_conditions arithmetic spot check") {
    // Two entries, q_0 = 3 and q_1 = 2^20: theta_{0,0} = C |t_1| max{3, 4/3}
    // with C = 12800, so theta = 38400/2^20 and u = theta^{1/3}.
    GeometryConstants g;
    std::vector<BigFraction> ts;
    ts.emplace_back(BigInt(1), BigInt(3));
    ts.emplace_back(BigInt(1), BigInt(1) << 20);
    auto rep = qcascade::theorem5_conditions(ts, 0, g);
    const double theta = 38400.0 / 1048576.0;
    CHECK(rep.rows[0][2] == doctest::Approx(std::log(theta)).epsilon(1e-9));
    CHECK(rep.rows[0][3] == doctest::Approx(std::cbrt(theta)).epsilon(1e-9));
    // Too short for any (S0) term.
    CHECK(part(rep, "s0_series_finite").verdict == Verdict::undecidable);

    CHECK_THROWS_AS(qcascade::theorem5_conditions(ts, 2, g), ArgumentError);
    CHECK_THROWS_AS(BigFraction(BigInt(1), BigInt(1)), ArgumentError);  // |t| = 1 is not a valid entry
}

TEST_CASE("theorem5 u_{k,m} is non-increasing in k") {
    GeometryConstants g;
    std::vector<BigFraction> ts;
    ts.emplace_back(BigInt(1), BigInt(3));
    ts.emplace_back(BigInt(1), BigInt(5));
    ts.emplace_back(BigInt(2), BigInt(7));
    ts.emplace_back(BigInt(1), BigInt(4));
    ts.emplace_back(BigInt(3), BigInt(11));
    ts.emplace_back(BigInt(1), BigInt(6));
    std::vector<ConditionReport> reps;
    for (std::size_t k = 0; k < 3; ++k) reps.push_back(qcascade::theorem5_conditions(ts, k, g));
    for (std::size_t k = 0; k + 1 < reps.size(); ++k) {
        for (std::size_t m = k + 1; m + 1 < ts.size(); ++m) {
            double u_k = reps[k].rows[m][3];
            double u_k1 = reps[k + 1].rows[m][3];
            if (std::isnan(u_k) || std::isnan(u_k1)) continue;
            CHECK(u_k1 <= u_k * (1.0 + 1e-12) + 1e-15);
        }
    }
}

TEST_CASE("lemma_quantities arithmetic and condition (Y)") {
    GeometryConstants g;

    // n = 1, q_0 = 3, t_1 = 2^-40: d_0 = (320/beta) 2^-40 / 9 ~ 1.035e-6,
    // far below half the admissible radius: (Y) holds.
    std::vector<BigFraction> near;
    near.emplace_back(BigInt(1), BigInt(3));
    near.emplace_back(BigInt(1), BigInt(1) << 40);
    auto rep = qcascade::lemma_quantities(near, 1, g);
    const double d0 = 320.0 * 32000.0 / 9.0 * std::exp2(-40.0);
    CHECK(d0 == doctest::Approx(1.035e-6).epsilon(1e-3));
    CHECK(rep.rows[0][2] == doctest::Approx(std::log(d0)).epsilon(1e-9));
    // d~_0 is capped by the arithmetic term 1/(2*1*27), halved.
    CHECK(rep.rows[0][3] <= std::log(0.25 / 27.0) + 1e-9);
    CHECK(part(rep, "y_gap").verdict == Verdict::satisfied);
    CHECK(part(rep, "y_gap").margin > 8.0);

    // t_1 = 1/8 blows d_0 up to ~1.4e5: (Y) grossly violated.
    std::vector<BigFraction> far;
    far.emplace_back(BigInt(1), BigInt(3));
    far.emplace_back(BigInt(1), BigInt(8));
    auto bad = qcascade::lemma_quantities(far, 1, g);
    const double d0_far = 320.0 * 32000.0 / (9.0 * 8.0);
    CHECK(d0_far == doctest::Approx(1.4e5).epsilon(2e-2));
    CHECK(bad.rows[0][2] == doctest::Approx(std::log(d0_far)).epsilon(1e-9));
    CHECK(part(bad, "y_gap").verdict == Verdict::violated);
    CHECK(part(bad, "y_gap").margin < -15.0);
    CHECK(bad.verdict == Verdict::violated);

    CHECK_THROWS_AS(qcascade::lemma_quantities({near[0]}, 1, g), ArgumentError);
    CHECK_THROWS_AS(qcascade::lemma_quantities(near, 0, g), ArgumentError);
}

TEST_CASE("condition reports are deterministic") {
    GeometryConstants g;
    std::vector<BigFraction> ts;
    ts.emplace_back(BigInt(1), BigInt(3));
    ts.emplace_back(BigInt(1), BigInt(8));
    ts.emplace_back(BigInt(1), BigInt(12));
    ts.emplace_back(BigInt(-1), BigInt(9));
    auto a1 = qcascade::milnor_series(ts);
    auto a2 = qcascade::milnor_series(ts);
    CHECK(same_rows(a1.rows, a2.rows));
    CHECK(a1.verdict == a2.verdict);
    CHECK(a1.margin == a2.margin);
    auto b1 = qcascade::theorem5_conditions(ts, 1, g);
    auto b2 = qcascade::theorem5_conditions(ts, 1, g);
    CHECK(same_rows(b1.rows, b2.rows));
    auto c1 = qcascade::lemma_quantities(ts, 2, g);
    auto c2 = qcascade::lemma_quantities(ts, 2, g);
    CHECK(same_rows(c1.rows, c2.rows));
    for (std::size_t i = 0; i < c1.parts.size(); ++i) {
        CHECK(c1.parts[i].verdict == c2.parts[i].verdict);
        CHECK(c1.parts[i].margin == c2.parts[i].margin);
    }
}
