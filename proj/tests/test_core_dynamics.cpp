#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "qcascade/core_dynamics.hpp"

using qcascade::ArgumentError;
using qcascade::Cx;
using qcascade::cx_abs;
using qcascade::cx_sqrt;
using qcascade::ErrorKind;
using qcascade::NumericError;
using qcascade::PeriodicOrbit;

namespace {

using Cd = Cx<double>;

double dist(const Cd& a, const Cd& b) { return cx_abs(a - b); }

}  // namespace

TEST_CASE("iterate_with_derivatives on hand-checked orbits") {
    // c = 0, z0 = 0: the fixed critical point. dc accumulates to 1 because the
    // linearization 2z vanishes at every step.
    auto r = qcascade::iterate_with_derivatives(Cd(0.0, 0.0), Cd(0.0, 0.0), 5);
    REQUIRE(r.orbit.size() == 6);
    for (const auto& z : r.orbit) CHECK(cx_abs(z) == 0.0);
    CHECK(cx_abs(r.dz) == 0.0);
    CHECK(dist(r.dc, Cd(1.0, 0.0)) == 0.0);

    // c = -1: superattracting two-cycle through the critical point.
    r = qcascade::iterate_with_derivatives(Cd(-1.0, 0.0), Cd(0.0, 0.0), 2);
    REQUIRE(r.orbit.size() == 3);
    CHECK(dist(r.orbit[1], Cd(-1.0, 0.0)) == 0.0);
    CHECK(dist(r.orbit[2], Cd(0.0, 0.0)) == 0.0);
    CHECK(cx_abs(r.dz) == 0.0);
    CHECK(dist(r.dc, Cd(-1.0, 0.0)) == 0.0);

    // c = 0, z0 = 2: doubling map on the level sets, all values exact in
    // binary64. dz = prod 2 z_k = 4 * 8 * 32, dc via the recurrence = 289.
    r = qcascade::iterate_with_derivatives(Cd(0.0, 0.0), Cd(2.0, 0.0), 3);
    REQUIRE(r.orbit.size() == 4);
    CHECK(r.orbit[1].re == 4.0);
    CHECK(r.orbit[2].re == 16.0);
    CHECK(r.orbit[3].re == 256.0);
    CHECK(r.dz.re == 1024.0);
    CHECK(r.dz.im == 0.0);
    CHECK(r.dc.re == 289.0);
}

TEST_CASE("iterate_with_derivatives rejects bad input and escapes") {
    CHECK_THROWS_AS(qcascade::iterate_with_derivatives(Cd(0.0, 0.0), Cd(0.0, 0.0), 0),
                    ArgumentError);

    // Seed already beyond the escape bound.
    try {
        qcascade::iterate_with_derivatives(Cd(0.0, 0.0), Cd(2e6, 0.0), 3);
        FAIL("expected diverged_orbit");
    } catch (const NumericError& e) {
        CHECK(e.kind() == ErrorKind::diverged_orbit);
        CHECK(e.where() == std::complex<double>(0.0, 0.0));
    }

    // Escape after one step.
    try {
        qcascade::iterate_with_derivatives(Cd(10.0, 0.0), Cd(1e4, 0.0), 5);
        FAIL("expected diverged_orbit");
    } catch (const NumericError& e) {
        CHECK(e.kind() == ErrorKind::diverged_orbit);
    }
}

TEST_CASE("derivative recurrences match central finite differences") {
    // Parameters chosen inside attracting basins so orbits stay bounded.
    const Cd params[] = {Cd(0.1, 0.1), Cd(-0.5, 0.0), Cd(-1.1, 0.05), Cd(0.0, 0.2),
                         Cd(-0.122, 0.744)};
    const Cd seeds[] = {Cd(0.3, -0.2), Cd(0.05, 0.1)};
    const double h = 1e-6;
    for (const Cd& c : params) {
        for (const Cd& z0 : seeds) {
            for (int n : {1, 2, 5, 8}) {
                auto r = qcascade::iterate_with_derivatives(c, z0, n);
                // d/dz0 along the real direction.
                auto rp = qcascade::iterate_with_derivatives(c, z0 + Cd(h, 0.0), n);
                auto rm = qcascade::iterate_with_derivatives(c, z0 - Cd(h, 0.0), n);
                Cd fd_z = (rp.orbit.back() - rm.orbit.back()) / (2.0 * h);
                CHECK(dist(fd_z, r.dz) <= 1e-6 * (1.0 + cx_abs(r.dz)));
                // d/dc along the imaginary direction: derivative of the last
                // iterate is i * dc, holomorphy makes one direction enough.
                auto cp = qcascade::iterate_with_derivatives(c + Cd(0.0, h), z0, n);
                auto cm = qcascade::iterate_with_derivatives(c - Cd(0.0, h), z0, n);
                Cd fd_c = (cp.orbit.back() - cm.orbit.back()) / (2.0 * h);
                Cd expect = Cd(0.0, 1.0) * r.dc;
                CHECK(dist(fd_c, expect) <= 1e-6 * (1.0 + cx_abs(r.dc)));
            }
        }
    }
}

TEST_CASE("multiplier_of fixed examples") {
    CHECK(cx_abs(qcascade::multiplier_of(std::vector<Cd>{Cd(0.0, 0.0)})) == 0.0);
    CHECK(cx_abs(qcascade::multiplier_of(std::vector<Cd>{Cd(0.0, 0.0), Cd(-1.0, 0.0)})) == 0.0);
    Cd m = qcascade::multiplier_of(std::vector<Cd>{Cd(0.5, 0.0), Cd(-0.25, 0.5)});
    // 2*0.5 * 2*(-0.25+0.5i) = -0.5 + i
    CHECK(dist(m, Cd(-0.5, 1.0)) <= 1e-15);
    CHECK_THROWS_AS(qcascade::multiplier_of(std::vector<Cd>{}), ArgumentError);
}

TEST_CASE("solve_periodic_orbit on closed-form cycles") {
    const double tol = 1e-12;

    // Fixed point of z^2: the origin, multiplier 0.
    auto o = qcascade::solve_periodic_orbit(Cd(0.0, 0.0), 1, {Cd(0.1, 0.0)}, tol);
    CHECK(cx_abs(o.points[0]) <= 1e-12);
    CHECK(cx_abs(o.multiplier) <= 1e-11);
    CHECK(o.exact_period);

    // Superattracting two-cycle at c = -1.
    o = qcascade::solve_periodic_orbit(Cd(-1.0, 0.0), 2, {Cd(0.1, 0.0), Cd(-0.9, 0.0)}, tol);
    CHECK(dist(o.points[0], Cd(0.0, 0.0)) <= 1e-10);
    CHECK(dist(o.points[1], Cd(-1.0, 0.0)) <= 1e-10);
    CHECK(cx_abs(o.multiplier) <= 1e-9);
    CHECK(o.exact_period);
    CHECK(o.residual <= tol);

    // Two-cycle at c = -1.3. The cycle points are roots of z^2 + z + c + 1,
    // so the multiplier is 4 z0 z1 = 4 (c + 1) = -1.2.
    o = qcascade::solve_periodic_orbit(Cd(-1.3, 0.0), 2, {Cd(0.2, 0.0), Cd(-1.2, 0.0)}, tol);
    CHECK(dist(o.multiplier, Cd(-1.2, 0.0)) <= 1e-10);
    double s = std::sqrt(1.0 + 1.2);  // roots (-1 +- sqrt(-3-4c)) / 2
    CHECK(dist(o.points[0], Cd((-1.0 + s) / 2.0, 0.0)) <= 1e-10);
    CHECK(dist(o.points[1], Cd((-1.0 - s) / 2.0, 0.0)) <= 1e-10);
    CHECK(o.exact_period);
}

TEST_CASE("solve_periodic_orbit matches the quartic factorization for n = 2") {
    // f^2(z) - z = (z^2 - z + c)(z^2 + z + c + 1). The first factor carries
    // the fixed points, the second the genuine two-cycles.
    const Cd params[] = {Cd(0.1, 0.2), Cd(-0.8, 0.3), Cd(-1.2, 0.1), Cd(0.2, -0.3)};
    const double tol = 1e-12;
    for (const Cd& c : params) {
        // Fixed points.
        Cd disc = cx_sqrt(Cd(1.0, 0.0) - 4.0 * c);
        for (double sgn : {1.0, -1.0}) {
            Cd root = (Cd(1.0, 0.0) + sgn * disc) / 2.0;
            auto o = qcascade::solve_periodic_orbit(c, 1, {root + Cd(1e-3, 1e-3)}, tol);
            CHECK(dist(o.points[0], root) <= 1e-10);
        }
        // Two-cycles: roots of z^2 + z + c + 1; the companion root is -1 - z.
        Cd disc2 = cx_sqrt(Cd(-3.0, 0.0) - 4.0 * c);
        Cd zp = (Cd(-1.0, 0.0) + disc2) / 2.0;
        Cd zm = Cd(-1.0, 0.0) - zp;
        auto o = qcascade::solve_periodic_orbit(c, 2, {zp + Cd(1e-3, 0.0), zm - Cd(1e-3, 0.0)}, tol);
        CHECK(dist(o.points[0], zp) <= 1e-10);
        CHECK(dist(o.points[1], zm) <= 1e-10);
        CHECK(o.exact_period);
        // Multiplier of the two-cycle: 4 z0 z1 = 4 (c + 1).
        CHECK(dist(o.multiplier, 4.0 * (c + Cd(1.0, 0.0))) <= 1e-9);
    }
}

TEST_CASE("solve_periodic_orbit residual and multiplier invariants") {
    const double tol = 1e-12;
    std::mt19937 rng(20240817u);
    std::uniform_real_distribution<double> box(-0.2, 0.2);
    for (int trial = 0; trial < 20; ++trial) {
        // Parameters near the period-2 center keep both low periods solvable.
        Cd c = Cd(-1.0 + box(rng), box(rng));
        int n = (trial % 2 == 0) ? 1 : 2;
        std::vector<Cd> seed =
            n == 1 ? std::vector<Cd>{Cd(-0.4, 0.0)} : std::vector<Cd>{Cd(0.0, 0.0), c};
        PeriodicOrbit<double> o;
        try {
            o = qcascade::solve_periodic_orbit(c, n, seed, tol);
        } catch (const NumericError&) {
            continue;  // a seed outside the basin is not what this test is about
        }
        CHECK(o.residual <= tol);
        // The stored multiplier must agree with the derivative of the return
        // map computed by the forward recurrence.
        auto r = qcascade::iterate_with_derivatives(o.parameter, o.points[0], n);
        CHECK(dist(r.dz, o.multiplier) <= 1e3 * tol * (1.0 + cx_abs(o.multiplier)));
        // And the cycle must close up under iteration.
        CHECK(dist(r.orbit.back(), o.points[0]) <= 10.0 * tol);
    }
}

TEST_CASE("solve_periodic_orbit flags collapsed periods") {
    // Seeding a period-2 solve at c = 0 collapses onto the fixed point 0;
    // the solver must report the period as not exact.
    auto o = qcascade::solve_periodic_orbit(Cd(0.0, 0.0), 2, {Cd(0.1, 0.0), Cd(0.01, 0.0)}, 1e-12);
    CHECK(dist(o.points[0], o.points[1]) <= 1e-10);
    CHECK(!o.exact_period);
}

TEST_CASE("solve_periodic_orbit argument validation") {
    CHECK_THROWS_AS(qcascade::solve_periodic_orbit(Cd(0.0, 0.0), 0, {}, 1e-12), ArgumentError);
    CHECK_THROWS_AS(qcascade::solve_periodic_orbit(Cd(0.0, 0.0), 2, {Cd(0.0, 0.0)}, 1e-12),
                    ArgumentError);
    // Tolerance below what binary64 can resolve.
    CHECK_THROWS_AS(
        qcascade::solve_periodic_orbit(Cd(0.0, 0.0), 1, {Cd(0.1, 0.0)}, 1e-17),
        ArgumentError);
}

TEST_CASE("solve_periodic_orbit in extended precision") {
    using Ext = qcascade::ExtReal;
    using Ce = Cx<Ext>;
    // Real root of c^3 + 2c^2 + c + 1, the period-3 superattracting center on
    // the real axis. Newton on the cubic is the oracle; the orbit solver must
    // then report a vanishing multiplier there.
    Ext c(-1.75);
    for (int i = 0; i < 64; ++i) {
        Ext f = c * c * c + 2 * c * c + c + 1;
        Ext df = 3 * c * c + 4 * c + 1;
        c -= f / df;
    }
    Ce cc(c, Ext(0));
    std::vector<Ce> seed;
    Ce z(Ext(0), Ext(0));
    for (int i = 0; i < 3; ++i) {
        seed.push_back(z);
        z = z * z + cc;
    }
    auto o = qcascade::solve_periodic_orbit(cc, 3, seed, Ext(1e-30));
    CHECK(qcascade::to_double(o.residual) <= 1e-30);
    CHECK(qcascade::to_double(cx_abs(o.multiplier)) <= 1e-25);
    CHECK(o.exact_period);
}

TEST_CASE("continue_orbit tracks a two-cycle along the real axis") {
    const double tol = 1e-12;
    auto o = qcascade::solve_periodic_orbit(Cd(-1.0, 0.0), 2, {Cd(0.1, 0.0), Cd(-0.9, 0.0)}, tol);
    std::vector<Cd> path = {Cd(-1.0, 0.0), Cd(-1.1, 0.0), Cd(-1.2, 0.0), Cd(-1.3, 0.0)};
    auto moved = qcascade::continue_orbit(o, path, tol);
    CHECK(dist(moved.parameter, Cd(-1.3, 0.0)) == 0.0);
    CHECK(dist(moved.multiplier, Cd(-1.2, 0.0)) <= 1e-9);
    CHECK(moved.period == 2);
    CHECK(moved.residual <= tol);
}

TEST_CASE("continue_orbit with a constant path is the identity") {
    const double tol = 1e-12;
    auto o = qcascade::solve_periodic_orbit(Cd(-1.0, 0.0), 2, {Cd(0.1, 0.0), Cd(-0.9, 0.0)}, tol);
    std::vector<Cd> path = {Cd(-1.0, 0.0), Cd(-1.0, 0.0), Cd(-1.0, 0.0)};
    auto same = qcascade::continue_orbit(o, path, tol);
    CHECK(dist(same.points[0], o.points[0]) <= 10.0 * tol);
    CHECK(dist(same.points[1], o.points[1]) <= 10.0 * tol);
}

TEST_CASE("continue_orbit returns along a reversed path") {
    const double tol = 1e-12;
    auto o = qcascade::solve_periodic_orbit(Cd(-1.0, 0.0), 2, {Cd(0.1, 0.0), Cd(-0.9, 0.0)}, tol);
    std::vector<Cd> out = {Cd(-1.0, 0.0), Cd(-1.15, 0.05), Cd(-1.3, 0.02), Cd(-1.25, -0.04)};
    auto far = qcascade::continue_orbit(o, out, tol);
    std::vector<Cd> back(out.rbegin(), out.rend());
    auto home = qcascade::continue_orbit(far, back, tol);
    CHECK(dist(home.points[0], o.points[0]) <= 1e2 * tol);
    CHECK(dist(home.points[1], o.points[1]) <= 1e2 * tol);
}

TEST_CASE("continue_orbit around the fixed-point branch locus") {
    // Loop the fixed point at c = 0 once around c = 1/4, where the two fixed
    // points collide. The monodromy exchanges the branches, so the walk must
    // either refuse (blocked continuation) or come home on the other branch,
    // whose multiplier at c = 0 is 2.
    const double tol = 1e-12;
    auto o = qcascade::solve_periodic_orbit(Cd(0.0, 0.0), 1, {Cd(0.05, 0.0)}, tol);
    CHECK(cx_abs(o.multiplier) <= 1e-10);
    std::vector<Cd> loop;
    loop.push_back(Cd(0.0, 0.0));
    const int steps = 24;
    for (int k = 0; k <= steps; ++k) {
        double theta = M_PI - 2.0 * M_PI * k / steps;  // from c = -0.01 around and back
        loop.push_back(Cd(0.25 + 0.26 * std::cos(theta), 0.26 * std::sin(theta)));
    }
    loop.push_back(Cd(0.0, 0.0));
    bool blocked = false;
    Cd end_mult(0.0, 0.0);
    try {
        auto walked = qcascade::continue_orbit(o, loop, tol);
        end_mult = walked.multiplier;
    } catch (const NumericError& e) {
        CHECK(e.kind() == ErrorKind::continuation_blocked);
        blocked = true;
    }
    if (!blocked) {
        CHECK(dist(end_mult, Cd(2.0, 0.0)) <= 1e-8);
    }
}

TEST_CASE("continue_orbit validates the path start") {
    const double tol = 1e-12;
    auto o = qcascade::solve_periodic_orbit(Cd(-1.0, 0.0), 2, {Cd(0.1, 0.0), Cd(-0.9, 0.0)}, tol);
    CHECK_THROWS_AS(qcascade::continue_orbit(o, {}, tol), ArgumentError);
    CHECK_THROWS_AS(qcascade::continue_orbit(o, {Cd(-0.5, 0.0), Cd(-0.4, 0.0)}, tol),
                    ArgumentError);
}
