#pragma once

// Hyperbolic-component geometry for z -> z^2 + c: boundary points at a given
// internal argument, satellite (child) components, the extended inverse
// multiplier map, and the explicit plane domains (Omega regions, Yoccoz
// circles, limb bounds) that control how far the extension reaches.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "qcascade/core_dynamics.hpp"

namespace qcascade {

// Reduced fraction p/q with value in (-1/2, 1/2].
struct RotationNumber {
    std::int64_t p = 0;
    std::uint64_t q = 1;

    RotationNumber() = default;
    RotationNumber(std::int64_t p_, std::uint64_t q_) : p(p_), q(q_) {
        if (q == 0) throw ArgumentError("RotationNumber: q must be positive");
        std::uint64_t ap = p >= 0 ? static_cast<std::uint64_t>(p)
                                  : static_cast<std::uint64_t>(-(p + 1)) + 1;
        if (p == 0) {
            if (q != 1) throw ArgumentError("RotationNumber: 0/q must be reduced to 0/1");
            return;
        }
        if (std::gcd(ap, q) != 1) throw ArgumentError("RotationNumber: fraction not reduced");
        // (-1/2, 1/2]: the half-integer itself belongs, its negative does not.
        if (p > 0 ? (2 * ap > q) : (2 * ap >= q))
            throw ArgumentError("RotationNumber: value outside (-1/2, 1/2]");
    }

    double value() const { return static_cast<double>(p) / static_cast<double>(q); }
    bool is_zero() const { return p == 0; }

    friend bool operator==(const RotationNumber& a, const RotationNumber& b) {
        return a.p == b.p && a.q == b.q;
    }
};

// Tunable constants of the geometric estimates. The absolute constants behind
// them are existence results, not known values, so they are configuration
// with conservative defaults; every check involving them reports both sides
// instead of failing hard.
struct GeometryConstants {
    double B0 = 1.0;            // multiplier-extension domain scale
    double A = 1.0;             // limb-diameter scale
    double K = 1.0;             // distance-vs-P(t,n) bracket
    double beta = 1.0 / 32000;  // cluster-disk scale
    double delta = 0.05;        // origin-exclusion radius
    double L_budget = 0.025;    // summability budget, delta/2 by default

    // Derived from K on demand, so it cannot drift out of sync.
    double c_big() const { return 6400.0 * std::max(2.0, K); }

    void validate() const {
        if (!(B0 > 0 && A > 0 && K > 0 && beta > 0 && delta > 0 && L_budget > 0))
            throw ArgumentError("GeometryConstants: all fields must be strictly positive");
    }
};

struct Disk {
    std::complex<double> center{};
    double radius = 0.0;
};

template <class Real>
struct HyperbolicComponent {
    int period = 1;
    Cx<Real> center{};
    std::vector<RotationNumber> lineage;  // arguments from the base component
};

template <class Real>
struct BoundaryResult {
    Cx<Real> c{};
    PeriodicOrbit<Real> orbit;
    Cx<Real> outward{};  // unit direction from the boundary point into the limb
};

template <class Real>
struct ChildResult {
    HyperbolicComponent<Real> component;
    PeriodicOrbit<Real> center_orbit;
    BoundaryResult<Real> root;  // the touch point on the parent
};

template <class Real>
Real pi_value() {
    using std::atan2;
    return atan2(Real(0), Real(-1));
}

// ---------------------------------------------------------------------------
// Closed forms and plane domains (no orbit solving involved)
// ---------------------------------------------------------------------------

template <class Real>
Cx<Real> main_cardioid_boundary(const Real& t) {
    Cx<Real> rho = cx_polar(Real(1), Real(2) * pi_value<Real>() * t);
    return Real(0.5) * rho - Real(0.25) * (rho * rho);
}

inline std::complex<double> main_cardioid_boundary(const RotationNumber& t) {
    auto c = main_cardioid_boundary<double>(t.value());
    return {c.re, c.im};
}

bool omega_membership(std::complex<double> rho, double C);
bool omega_tilde_membership(std::complex<double> rho, std::uint64_t n,
                            const GeometryConstants& constants);
double omega_tilde_distance(double t, std::uint64_t n, const GeometryConstants& constants);
double p_estimate(double t, std::uint64_t n);
double bifurcation_radius(const RotationNumber& t, std::uint64_t n,
                          const GeometryConstants& constants);
Disk yoccoz_circle(const RotationNumber& t, std::uint64_t n);
double limb_diameter_bound(std::uint64_t n, std::int64_t p, const GeometryConstants& constants);

// Value a + b*exp(log_N) in log space, where the dominant part may itself be
// too large for any floating type. Only what the summability reports need:
// compare, scale down by a huge factor, collapse when representable.
struct SplitLog {
    long double a = 0;
    long double b = 0;      // coefficient of the huge part; 0 when absent
    long double log_N = 0;  // log of the huge factor N (N >= 1)

    static SplitLog from(long double v) { return {v, 0, 0}; }
    bool has_big() const { return b != 0; }

    long double collapse() const;                      // clamps to +-inf honestly
    long double divided_by_exp(long double lq) const;  // value / exp(lq)
};
SplitLog split_min(const SplitLog& x, const SplitLog& y);
SplitLog split_add(const SplitLog& x, long double s);

SplitLog log_omega_tilde_distance_big(long double log_abs_t, long double log_n,
                                      std::optional<std::uint64_t> n_exact,
                                      const GeometryConstants& constants);
SplitLog log_bifurcation_radius_big(long double log_abs_t, long double log_n,
                                    std::optional<std::uint64_t> n_exact, long double log_q,
                                    const GeometryConstants& constants);

// ---------------------------------------------------------------------------
// Multiplier-constrained Newton: unknowns (z_0..z_{n-1}, c), equations
// {z_i^2 + c - z_{i+1 mod n} = 0, prod(2 z_i) = lambda}. Solved by block
// elimination through two cyclic solves; the border keeps the parameter
// determined at lambda = 0 (centers), where c alone would otherwise be free.
// ---------------------------------------------------------------------------

namespace detail {

template <class Real>
struct MultState {
    std::vector<Cx<Real>> z;
    Cx<Real> c{};
    Cx<Real> lambda{};
};

// Gradient of prod(2 z_j) in scaled form: entry i is 2 * prefix_i * suffix_{i+1}.
template <class Real>
void multiplier_gradient(const std::vector<Cx<Real>>& z, std::vector<ScaledCx<Real>>& grad) {
    const size_t n = z.size();
    grad.resize(n);
    std::vector<ScaledCx<Real>> pre(n + 1), suf(n + 1);
    pre[0] = ScaledCx<Real>::one();
    for (size_t i = 0; i < n; ++i) pre[i + 1] = pre[i] * (Real(2) * z[i]);
    suf[n] = ScaledCx<Real>::one();
    for (size_t i = n; i-- > 0;) suf[i] = suf[i + 1] * (Real(2) * z[i]);
    for (size_t i = 0; i < n; ++i) grad[i] = pre[i] * suf[i + 1] * Cx<Real>(Real(2), Real(0));
}

template <class Real>
void bordered_newton(MultState<Real>& st, const Cx<Real>& lambda_target, const Real& tol,
                     int max_iter) {
    const size_t n = st.z.size();
    std::vector<Cx<Real>> g(n), u, v, ones(n, Cx<Real>(Real(1), Real(0)));
    std::vector<ScaledCx<Real>> grad;
    const Real bound = Real(kEscapeBound);

    for (int iter = 0; iter < max_iter; ++iter) {
        Real resid = orbit_residual(st.c, st.z, g);
        ScaledCx<Real> prod = ScaledCx<Real>::one();
        for (const auto& zi : st.z) prod = prod * (Real(2) * zi);
        Cx<Real> mult_res = prod.value() - lambda_target;
        Real mr = cx_abs(mult_res);
        if (resid <= tol && mr <= tol) {
            st.lambda = lambda_target;
            return;
        }

        cyclic_solve(st.z, g, u);     // A u = g
        cyclic_solve(st.z, ones, v);  // A v = 1
        multiplier_gradient(st.z, grad);
        ScaledCx<Real> ru, rv;
        for (size_t i = 0; i < n; ++i) {
            ru = ru + grad[i] * u[i];
            rv = rv + grad[i] * v[i];
        }
        // Full step solves [A 1; r 0][dz dc] = -[g G]: with the two auxiliary
        // solves, dc = (G - r.u)/(r.v) and dz = -(u + dc v).
        if (rv.is_zero())
            throw NumericError(ErrorKind::singular_system,
                               "bordered_newton: degenerate multiplier gradient");
        ScaledCx<Real> num = ScaledCx<Real>::from(mult_res);
        num = num + ru * Cx<Real>(Real(-1), Real(0));
        Cx<Real> dc = (num / rv).value();
        if (!cx_finite(dc))
            throw NumericError(ErrorKind::singular_system,
                               "bordered_newton: border elimination produced non-finite step");
        st.c += dc;
        for (size_t i = 0; i < n; ++i) {
            st.z[i] -= u[i] + dc * v[i];
            if (cx_abs(st.z[i]) > bound)
                throw NumericError(ErrorKind::no_convergence, "bordered_newton: iterate escaped");
        }
    }
    std::vector<Cx<Real>> gf(n);
    Real resid = orbit_residual(st.c, st.z, gf);
    throw NumericError(ErrorKind::no_convergence,
                       "bordered_newton: residual above tolerance after max_iter",
                       to_double(resid));
}

// Walks the multiplier along the straight segment to lambda_to, bisecting
// failed steps (depth cap 40) and extrapolating the seed from the previous
// accepted step.
template <class Real>
void walk_lambda(MultState<Real>& st, const Cx<Real>& lambda_to, const Real& tol, int max_iter,
                 int max_depth = 40) {
    const int trial_iter = std::min(max_iter, 48);
    Cx<Real> from = st.lambda;
    if (cx_abs(lambda_to - from) == Real(0)) return;
    MultState<Real> prev = st;
    bool have_prev = false;
    // The first step has no secant history, so keep it small; afterwards the
    // predictor tracks the branch and the step doubles on every success.
    Real s(0), step(0.125);
    int depth = 0;
    while (s < Real(1)) {
        bool last = step >= Real(1) - s;
        Real s_next = last ? Real(1) : s + step;
        Cx<Real> target = last ? lambda_to : from + s_next * (lambda_to - from);
        MultState<Real> trial = st;
        if (have_prev) {
            Cx<Real> den = st.lambda - prev.lambda;
            if (cx_abs(den) > Real(0)) {
                Cx<Real> ratio = (target - st.lambda) / den;
                if (cx_abs(ratio) < Real(8)) {
                    for (size_t i = 0; i < trial.z.size(); ++i)
                        trial.z[i] = st.z[i] + ratio * (st.z[i] - prev.z[i]);
                    trial.c = st.c + ratio * (st.c - prev.c);
                }
            }
        }
        bool ok = true;
        try {
            bordered_newton(trial, target, tol, trial_iter);
            // A step that merges orbit points has jumped onto a shorter cycle
            // listed with repetition; that solves the system but is the wrong
            // branch, so treat it as a failed step.
            if (!points_distinct(trial.z, Real(10) * tol)) ok = false;
        } catch (const NumericError&) {
            ok = false;
        }
        if (ok) {
            prev = st;
            have_prev = true;
            st = std::move(trial);
            s = s_next;
            step = step * Real(2);
            if (depth > 0) --depth;
        } else {
            step = step / Real(2);
            ++depth;
            if (depth > max_depth) {
                NumericError e(ErrorKind::continuation_blocked,
                               "walk_lambda: bisection depth exceeded");
                e.set_where(to_std_complex(st.c));
                throw e;
            }
        }
    }
}

template <class Real>
PeriodicOrbit<Real> orbit_from_state(const MultState<Real>& st, const Real& tol) {
    PeriodicOrbit<Real> orbit;
    orbit.parameter = st.c;
    orbit.period = static_cast<int>(st.z.size());
    orbit.points = st.z;
    orbit.multiplier = multiplier_of(st.z);
    std::vector<Cx<Real>> g;
    orbit.residual = orbit_residual(st.c, st.z, g);
    orbit.exact_period = points_distinct(st.z, Real(10) * tol);
    return orbit;
}

// Neville evaluation at h = 0 of the polynomial through (h_j, y_j).
template <class Real>
Cx<Real> extrapolate_to_zero(std::vector<Real> h, std::vector<Cx<Real>> y) {
    const size_t m = h.size();
    for (size_t level = 1; level < m; ++level) {
        for (size_t i = 0; i + level < m; ++i) {
            y[i] = (h[i] * y[i + 1] - h[i + level] * y[i]) / (h[i] - h[i + level]);
        }
    }
    return y[0];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Component operations
// ---------------------------------------------------------------------------

// The superattracting cycle at the center is the forward orbit of 0.
template <class Real>
PeriodicOrbit<Real> center_orbit(const HyperbolicComponent<Real>& W, const Real& tol,
                                 int max_iter = kDefaultMaxIter) {
    std::vector<Cx<Real>> seed;
    seed.reserve(static_cast<size_t>(W.period));
    Cx<Real> z(Real(0), Real(0));
    for (int k = 0; k < W.period; ++k) {
        seed.push_back(z);
        z = z * z + W.center;
    }
    PeriodicOrbit<Real> orbit = solve_periodic_orbit(W.center, W.period, seed, tol, max_iter);
    if (cx_abs(orbit.multiplier) > Real(1e-6) || !orbit.exact_period) {
        // A center held at machine precision carries a multiplier residue
        // amplified by d(lambda)/dc, which grows without bound down a
        // cascade. Re-anchor with one bordered solve to multiplier 0 and
        // accept only a correction at the storage resolution of the center;
        // anything larger means the parameter is not this component's center.
        bool ok = orbit.exact_period;
        if (ok) {
            detail::MultState<Real> st{orbit.points, W.center, orbit.multiplier};
            try {
                detail::bordered_newton(st, Cx<Real>(Real(0), Real(0)), tol, max_iter);
            } catch (const NumericError&) {
                ok = false;
            }
            if (ok) {
                PeriodicOrbit<Real> polished = detail::orbit_from_state(st, tol);
                Real atom = Real(1e6) * real_epsilon<Real>() * (Real(1) + cx_abs(W.center));
                if (polished.exact_period && cx_abs(st.c - W.center) <= atom)
                    return polished;
                ok = false;
            }
        }
        if (!ok)
            throw NumericError(ErrorKind::no_convergence,
                               "center_orbit: parameter is not a superattracting center of the "
                               "stated period",
                               to_double(cx_abs(orbit.multiplier)));
    }
    return orbit;
}

template <class Real>
BoundaryResult<Real> boundary_point_full(const HyperbolicComponent<Real>& W, const Real& t,
                                         const Real& tol, int max_iter = kDefaultMaxIter) {
    PeriodicOrbit<Real> base = center_orbit(W, tol, max_iter);
    detail::MultState<Real> st{base.points, base.parameter, base.multiplier};
    const Real two_pi = Real(2) * pi_value<Real>();
    Cx<Real> lambda_star = cx_polar(Real(1), two_pi * t);
    BoundaryResult<Real> out;

    if (t != Real(0)) {
        Cx<Real> pre_target = (Real(1) - Real(1e-6)) * lambda_star;
        detail::walk_lambda(st, pre_target, tol, max_iter);
        Cx<Real> c_pre = st.c;
        detail::bordered_newton(st, lambda_star, tol, max_iter);
        out.c = st.c;
        out.orbit = detail::orbit_from_state(st, tol);
        Cx<Real> d = st.c - c_pre;
        Real dn = cx_abs(d);
        out.outward = dn > Real(0) ? d / dn : Cx<Real>(Real(1), Real(0));
        return out;
    }

    // Root (t = 0): for a satellite component the cycle is branched at
    // lambda = 1, so the root parameter is extrapolated along the radius,
    // where c(lambda) itself stays analytic, instead of solved at the
    // singular target.
    std::vector<Real> hs;
    std::vector<Cx<Real>> cs;
    Real h(1e-3);
    for (int j = 0; j < 6; ++j) {
        detail::walk_lambda(st, Cx<Real>(Real(1) - h, Real(0)), tol, max_iter);
        hs.push_back(h);
        cs.push_back(st.c);
        h = h / Real(2);
    }
    Cx<Real> c_last = cs.back();
    out.c = detail::extrapolate_to_zero(hs, cs);
    // Orbit at the root: parabolic, plain Newton converges linearly.
    out.orbit = solve_periodic_orbit(out.c, static_cast<int>(st.z.size()), st.z, tol,
                                     std::max(max_iter, 400));
    Cx<Real> d = out.c - c_last;
    Real dn = cx_abs(d);
    out.outward = dn > Real(0) ? d / dn : Cx<Real>(Real(1), Real(0));
    return out;
}

template <class Real>
BoundaryResult<Real> boundary_point_full(const HyperbolicComponent<Real>& W,
                                         const RotationNumber& t, const Real& tol,
                                         int max_iter = kDefaultMaxIter) {
    Real tv = Real(static_cast<double>(t.p)) / Real(static_cast<double>(t.q));
    return boundary_point_full(W, tv, tol, max_iter);
}

template <class Real, class T>
std::pair<Cx<Real>, PeriodicOrbit<Real>> boundary_point(const HyperbolicComponent<Real>& W,
                                                        const T& t, const Real& tol,
                                                        int max_iter = kDefaultMaxIter) {
    BoundaryResult<Real> r = boundary_point_full(W, t, tol, max_iter);
    return {r.c, std::move(r.orbit)};
}

// Finds the period-nq satellite cycle just inside the limb and rides its
// multiplier radially down to 0. The seed places one point per petal around
// each parent orbit point, displaced along the tangent cocycle d_{l+1} =
// 2 b_l d_l at the q-th-root scale that the local q-fold covering of the
// multiplier dictates.
template <class Real>
ChildResult<Real> child_from_root(const HyperbolicComponent<Real>& W, const RotationNumber& t,
                                  const BoundaryResult<Real>& bp, const Real& tol,
                                  int max_iter = kDefaultMaxIter) {
    using std::exp;
    using std::log;
    const int n = W.period;
    if (t.q > (1ULL << 24) / static_cast<std::uint64_t>(n))
        throw ArgumentError("child_component: child period overflows practical range");
    const auto q = static_cast<int>(t.q);
    const int nq = n * q;
    const Real two_pi = Real(2) * pi_value<Real>();
    Cx<Real> lambda_star = cx_polar(Real(1), two_pi * Real(static_cast<double>(t.p)) /
                                                 Real(static_cast<double>(t.q)));
    const Real qr = Real(static_cast<double>(q));
    // Probe distance past the root, proportional to the component's own size
    // (center-to-root distance) so deep, tiny components are not overstepped.
    Real scale = cx_abs(bp.c - W.center);
    if (!(scale > Real(0))) scale = Real(1);
    Real h_base = scale * Real(1e-3) / (qr * qr * qr);

    // Direct route to the center: the child multiplier, as a function of the
    // parent multiplier rho, has derivative -q^2/rho0 at the touch point, so
    // the child center (child multiplier 0) sits near psi(rho0 (1 + 1/q^2)).
    // Walk the parent cycle there and solve the superattracting bordered
    // system seeded by the critical orbit; the seed error is O(1/q^4) in rho,
    // so this improves with q where ring seeds degrade.
    for (double xf : {1.0, 0.7, 1.4, 0.5, 2.0}) {
        Real x = Real(xf) / (qr * qr);
        Cx<Real> rho_g = lambda_star * Cx<Real>(Real(1) + x, Real(0));
        detail::MultState<Real> pst{bp.orbit.points, bp.c, bp.orbit.multiplier};
        try {
            detail::walk_lambda(pst, rho_g, tol, max_iter);
        } catch (const NumericError&) {
            continue;
        }
        std::vector<Cx<Real>> seed(static_cast<size_t>(nq));
        Cx<Real> z{};
        bool escaped = false;
        for (int j = 0; j < nq; ++j) {
            seed[static_cast<size_t>(j)] = z;
            z = z * z + pst.c;
            if (cx_abs(z) > Real(kEscapeBound)) {
                escaped = true;
                break;
            }
        }
        if (escaped) continue;
        detail::MultState<Real> cst{std::move(seed), pst.c, Cx<Real>(Real(0), Real(0))};
        try {
            detail::bordered_newton(cst, Cx<Real>(Real(0), Real(0)), tol, max_iter);
        } catch (const NumericError&) {
            continue;
        }
        PeriodicOrbit<Real> orb = detail::orbit_from_state(cst, tol);
        if (!orb.exact_period) continue;
        if (cx_abs(cst.c - bp.c) > scale) continue;
        ChildResult<Real> out;
        out.component.period = nq;
        out.component.center = cst.c;
        out.component.lineage = W.lineage;
        out.component.lineage.push_back(t);
        out.center_orbit = std::move(orb);
        out.root = bp;
        return out;
    }

    const double h_ladder[] = {1.0, 0.5, 2.0, 0.25, 4.0, 0.125, 8.0};
    const double mag_ladder[] = {1.0, 0.6, 1.7, 0.35, 2.8};
    std::optional<PeriodicOrbit<Real>> found;
    Cx<Real> c1{};

    for (double hf : h_ladder) {
        Real h = h_base * Real(hf);
        c1 = bp.c + h * bp.outward;
        PeriodicOrbit<Real> parent;
        try {
            parent = continue_orbit(bp.orbit, {bp.c, c1}, tol, max_iter);
        } catch (const NumericError&) {
            continue;
        }
        Cx<Real> drho = parent.multiplier - lambda_star;
        if (cx_abs(drho) == Real(0)) continue;
        Real s_abs = exp(log(cx_abs(drho)) / qr);
        for (double mf : mag_ladder) {
            for (int ph = 0; ph < 4 && !found; ++ph) {
                Real phase = pi_value<Real>() * Real(ph) / (Real(2) * qr);
                Cx<Real> d = cx_polar(s_abs * Real(mf), phase);
                std::vector<Cx<Real>> seed(static_cast<size_t>(nq));
                for (int l = 0; l < nq; ++l) {
                    const Cx<Real>& b = parent.points[static_cast<size_t>(l % n)];
                    seed[static_cast<size_t>(l)] = b + d;
                    d = Real(2) * b * d;
                }
                try {
                    PeriodicOrbit<Real> cyc =
                        solve_periodic_orbit(c1, nq, seed, tol, std::min(max_iter, 48));
                    // Just inside the limb the satellite multiplier sits near
                    // 1 (inside the unit circle); anything else is a stray
                    // cycle, and a collapsed seed fails the period test.
                    if (cyc.exact_period &&
                        cx_abs(cyc.multiplier - Cx<Real>(Real(1), Real(0))) < Real(0.5))
                        found = std::move(cyc);
                } catch (const NumericError&) {
                }
            }
            if (found) break;
        }
        if (found) break;
    }
    if (!found) {
        NumericError e(ErrorKind::no_convergence,
                       "child_component: could not isolate the satellite cycle inside the limb");
        e.set_where(to_std_complex(bp.c));
        throw e;
    }

    detail::MultState<Real> st{found->points, c1, found->multiplier};
    detail::walk_lambda(st, Cx<Real>(Real(0), Real(0)), tol, max_iter);
    // The child component hangs off the parent boundary and is smaller than
    // the parent; a center farther from the root than the parent's own
    // center-to-root distance means the descent jumped to another component.
    if (cx_abs(st.c - bp.c) > scale) {
        NumericError e(ErrorKind::no_convergence,
                       "child_component: descent left the limb of the root");
        e.set_where(to_std_complex(st.c));
        throw e;
    }

    ChildResult<Real> out;
    out.component.period = nq;
    out.component.center = st.c;
    out.component.lineage = W.lineage;
    out.component.lineage.push_back(t);
    out.center_orbit = detail::orbit_from_state(st, tol);
    if (!out.center_orbit.exact_period)
        throw NumericError(ErrorKind::no_convergence,
                           "child_component: descent collapsed onto the parent cycle");
    out.root = bp;
    return out;
}

template <class Real>
ChildResult<Real> child_component_full(const HyperbolicComponent<Real>& W,
                                       const RotationNumber& t, const Real& tol,
                                       int max_iter = kDefaultMaxIter) {
    if (t.is_zero())
        throw ArgumentError("child_component: the root argument t = 0 is not a bifurcation");
    BoundaryResult<Real> bp = boundary_point_full(W, t, tol, max_iter);
    return child_from_root(W, t, bp, tol, max_iter);
}

template <class Real>
HyperbolicComponent<Real> child_component(const HyperbolicComponent<Real>& W,
                                          const RotationNumber& t, const Real& tol,
                                          int max_iter = kDefaultMaxIter) {
    return child_component_full(W, t, tol, max_iter).component;
}

// Inverse multiplier map, extended past the closed unit disk onto the
// admissible region. The radial path is exactly the horizontal segment of
// the log-plane membership test, so admissibility of the endpoint covers the
// whole path; the removed disk is checked separately.
template <class Real>
Cx<Real> extend_psi(const HyperbolicComponent<Real>& W, const Cx<Real>& rho,
                    const GeometryConstants& constants, const Real& tol,
                    PeriodicOrbit<Real>* orbit_out = nullptr, int max_iter = kDefaultMaxIter) {
    std::complex<double> rho_d = to_std_complex(rho);
    double mag = std::abs(rho_d);
    if (mag >= 1.0) {
        if (!omega_tilde_membership(rho_d, static_cast<std::uint64_t>(W.period), constants))
            throw ArgumentError("extend_psi: multiplier target outside the admissible region");
        double Rn = 2.0 * static_cast<double>(W.period) * std::log(2.0);
        std::complex<double> L(std::log(mag), std::arg(rho_d));
        if (std::abs(L.imag()) < Rn && L.real() > 0) {
            double w = std::sqrt(Rn * Rn - L.imag() * L.imag());
            if (L.real() > Rn - w)
                throw ArgumentError("extend_psi: radial path clips the removed disk");
        }
    }
    PeriodicOrbit<Real> base = center_orbit(W, tol, max_iter);
    detail::MultState<Real> st{base.points, base.parameter, base.multiplier};
    detail::walk_lambda(st, rho, tol, max_iter);
    if (orbit_out) *orbit_out = detail::orbit_from_state(st, tol);
    return st.c;
}

namespace detail {

// Tracks the satellite cycle while the parent multiplier rho moves: each
// accepted step pins the parent cycle by its multiplier (bordered solve,
// which determines c) and re-solves the satellite cycle at that c. Paths are
// routed radially and along arcs around the touch multiplier rho0, where the
// satellite cycle degenerates.
template <class Real>
struct SatelliteTracker {
    MultState<Real> parent;
    PeriodicOrbit<Real> child;
    Cx<Real> rho0;
    Real tol;
    int max_iter;

    void walk_rho(const Cx<Real>& rho_to, int max_depth = 40) {
        const int trial_iter = std::min(max_iter, 48);
        Cx<Real> from = parent.lambda;
        if (cx_abs(rho_to - from) == Real(0)) return;
        Real s(0), step(1);
        int depth = 0;
        while (s < Real(1)) {
            bool last = step >= Real(1) - s;
            Real s_next = last ? Real(1) : s + step;
            Cx<Real> target = last ? rho_to : from + s_next * (rho_to - from);
            MultState<Real> ptrial = parent;
            PeriodicOrbit<Real> ctrial;
            bool ok = true;
            try {
                bordered_newton(ptrial, target, tol, trial_iter);
                ctrial =
                    solve_periodic_orbit(ptrial.c, child.period, child.points, tol, trial_iter);
                Real drift(0);
                for (size_t i = 0; i < child.points.size(); ++i) {
                    Real a = cx_abs(ctrial.points[i] - child.points[i]);
                    if (a > drift) drift = a;
                }
                if (drift > Real(0.5)) ok = false;
            } catch (const NumericError&) {
                ok = false;
            }
            if (ok) {
                parent = std::move(ptrial);
                child = std::move(ctrial);
                s = s_next;
                step = step * Real(2);
                if (depth > 0) --depth;
            } else {
                step = step / Real(2);
                ++depth;
                if (depth > max_depth) {
                    NumericError e(ErrorKind::continuation_blocked,
                                   "satellite tracking: bisection depth exceeded");
                    e.set_where(to_std_complex(parent.c));
                    throw e;
                }
            }
        }
    }

    // Radial leg onto the ring |rho - rho0| = |target - rho0|, then an arc to
    // the target angle in slices of at most pi/8. Every leg keeps its
    // distance from rho0 at or above the ring radius.
    void route_to(const Cx<Real>& rho_to) {
        Cx<Real> e_from = parent.lambda - rho0;
        Cx<Real> e_to = rho_to - rho0;
        Real r_from = cx_abs(e_from), r_to = cx_abs(e_to);
        if (r_to == Real(0))
            throw ArgumentError("satellite tracking: target coincides with the touch multiplier");
        if (r_from == Real(0))
            throw NumericError(ErrorKind::continuation_blocked,
                               "satellite tracking: state pinned at the touch multiplier");
        Real th_from = cx_arg(e_from), th_to = cx_arg(e_to);
        walk_rho(rho0 + (r_to / r_from) * e_from);
        const Real pi = pi_value<Real>();
        Real dth = th_to - th_from;
        while (dth > pi) dth -= Real(2) * pi;
        while (dth < -pi) dth += Real(2) * pi;
        double slices_d = std::ceil(std::abs(to_double(dth)) / (3.14159265358979323846 / 8));
        int slices = std::max(1, static_cast<int>(slices_d));
        for (int k = 1; k <= slices; ++k) {
            Real th = th_from + dth * Real(k) / Real(slices);
            walk_rho(rho0 + cx_polar(r_to, th));
        }
    }
};

template <class Real>
SatelliteTracker<Real> make_satellite_tracker(const HyperbolicComponent<Real>& W,
                                              const ChildResult<Real>& child, const Cx<Real>& rho0,
                                              const Real& tol, int max_iter) {
    PeriodicOrbit<Real> base = center_orbit(W, tol, max_iter);
    PeriodicOrbit<Real> parent_at_center = continue_orbit(
        base, {base.parameter, child.root.c, child.component.center}, tol, max_iter);
    return SatelliteTracker<Real>{
        MultState<Real>{parent_at_center.points, child.component.center,
                        parent_at_center.multiplier},
        child.center_orbit, rho0, tol, max_iter};
}

}  // namespace detail

template <class Real>
Cx<Real> satellite_multiplier(const HyperbolicComponent<Real>& W, const RotationNumber& t0,
                              const Cx<Real>& rho, const Real& tol,
                              const GeometryConstants& constants = GeometryConstants{},
                              int max_iter = kDefaultMaxIter) {
    const Real two_pi = Real(2) * pi_value<Real>();
    Cx<Real> rho0 = cx_polar(Real(1), two_pi * Real(static_cast<double>(t0.p)) /
                                          Real(static_cast<double>(t0.q)));
    double r = bifurcation_radius(t0, static_cast<std::uint64_t>(W.period), constants);
    if (to_double(cx_abs(rho - rho0)) >= r)
        throw ArgumentError("satellite_multiplier: rho outside the bifurcation radius");
    ChildResult<Real> child = child_component_full(W, t0, tol, max_iter);
    auto tracker = detail::make_satellite_tracker(W, child, rho0, tol, max_iter);
    if (cx_abs(rho - rho0) == Real(0)) {
        // At the touch multiplier the satellite cycle merges with the parent
        // one, so the tracker cannot land there. Park on a small ring around
        // rho0 and carry the cycle onto the touch parameter itself.
        Cx<Real> e = tracker.parent.lambda - rho0;
        Cx<Real> ring = rho0 + (Real(r) / Real(16) / cx_abs(e)) * e;
        tracker.route_to(ring);
        PeriodicOrbit<Real> merged =
            continue_orbit(tracker.child, {tracker.child.parameter, child.root.c}, tol,
                           std::max(max_iter, 400));
        return merged.multiplier;
    }
    tracker.route_to(rho);
    return tracker.child.multiplier;
}

template <class Real>
bool covering_check(const HyperbolicComponent<Real>& W, const RotationNumber& t0, double r,
                    int n_samples = 4096, const Real& tol = Real(1e-12),
                    int max_iter = kDefaultMaxIter) {
    if (!(r > 0)) throw ArgumentError("covering_check: radius must be positive");
    if (n_samples < 16) throw ArgumentError("covering_check: need at least 16 samples");
    const Real two_pi = Real(2) * pi_value<Real>();
    const double two_pi_d = 2.0 * 3.14159265358979323846;
    Cx<Real> rho0 = cx_polar(Real(1), two_pi * Real(static_cast<double>(t0.p)) /
                                          Real(static_cast<double>(t0.q)));
    ChildResult<Real> child = child_component_full(W, t0, tol, max_iter);
    auto tracker = detail::make_satellite_tracker(W, child, rho0, tol, max_iter);

    // Start at the sample nearest the approach angle and go once around;
    // adjacent samples keep every leg short.
    double th_start = std::arg(to_std_complex(tracker.parent.lambda - rho0));
    int j0 = static_cast<int>(std::lround(th_start / two_pi_d * n_samples));
    std::vector<std::complex<double>> image(static_cast<size_t>(n_samples));
    for (int k = 0; k <= n_samples; ++k) {
        int idx = ((j0 + k) % n_samples + n_samples) % n_samples;
        Real ang = two_pi * Real(idx) / Real(n_samples);
        tracker.route_to(rho0 + cx_polar(Real(r), ang));
        image[static_cast<size_t>(idx)] = to_std_complex(tracker.child.multiplier);
    }

    // 64 probes: four rings of 16 inside the target disk about 1.
    const double q = static_cast<double>(t0.q);
    const double probe_radius = q * q * r / 16.0;
    std::vector<std::complex<double>> probes;
    const double rings[] = {0.2, 0.5, 0.75, 0.93};
    for (double ring : rings) {
        for (int k = 0; k < 16; ++k) {
            double a = two_pi_d * k / 16.0;
            probes.push_back(std::complex<double>(1.0, 0.0) + std::polar(ring * probe_radius, a));
        }
    }

    double max_step = 0.0;
    for (size_t j = 0; j < image.size(); ++j)
        max_step = std::max(max_step, std::abs(image[(j + 1) % image.size()] - image[j]));
    for (const auto& w : probes) {
        double clearance = std::numeric_limits<double>::infinity();
        for (const auto& lam : image) clearance = std::min(clearance, std::abs(lam - w));
        if (!(clearance > 0.0) || max_step > clearance)
            throw NumericError(ErrorKind::sampling_too_coarse,
                               "covering_check: image steps exceed probe clearance");
        double winding = 0.0;
        for (size_t j = 0; j < image.size(); ++j) {
            std::complex<double> a = image[j] - w;
            std::complex<double> b = image[(j + 1) % image.size()] - w;
            winding += std::arg(b / a);
        }
        winding /= two_pi_d;
        long rounded = std::lround(winding);
        if (std::abs(winding - static_cast<double>(rounded)) > 0.25)
            throw NumericError(ErrorKind::sampling_too_coarse,
                               "covering_check: winding sum far from an integer");
        if (rounded < 1) return false;
    }
    return true;
}

}  // namespace qcascade
