#pragma once

// Periodic orbits of z -> z^2 + c: forward iteration with derivatives,
// multiple-shooting Newton for cycles, and analytic continuation of a cycle
// along parameter paths. Everything is templated on the working real type.

#include <cstdint>
#include <sstream>
#include <vector>

#include "qcascade/complex.hpp"
#include "qcascade/errors.hpp"
#include "qcascade/precision.hpp"

namespace qcascade {

inline constexpr double kEscapeBound = 1e6;
inline constexpr int kDefaultMaxIter = 200;

template <class Real>
struct IterationResult {
    std::vector<Cx<Real>> orbit;  // z_0 .. z_n
    Cx<Real> dz;                  // d(f^n)/dz at z_0
    Cx<Real> dc;                  // d(f^n)/dc
};

template <class Real>
struct PeriodicOrbit {
    Cx<Real> parameter{};
    int period = 0;
    std::vector<Cx<Real>> points;
    Cx<Real> multiplier{};
    Real residual{};
    bool exact_period = false;
};

template <class Real>
IterationResult<Real> iterate_with_derivatives(const Cx<Real>& c, const Cx<Real>& z0, int n) {
    if (n < 1) throw ArgumentError("iterate_with_derivatives: n must be >= 1");
    IterationResult<Real> r;
    r.orbit.reserve(static_cast<size_t>(n) + 1);
    r.orbit.push_back(z0);
    r.dz = Cx<Real>(Real(1), Real(0));
    r.dc = Cx<Real>(Real(0), Real(0));
    const Real bound = Real(kEscapeBound);
    Cx<Real> z = z0;
    for (int k = 0; k < n; ++k) {
        if (cx_abs(z) > bound) {
            NumericError e(ErrorKind::diverged_orbit,
                           "iterate_with_derivatives: escape bound exceeded at step " +
                               std::to_string(k));
            e.set_where(to_std_complex(c));
            throw e;
        }
        Cx<Real> two_z = Real(2) * z;
        r.dz = two_z * r.dz;
        r.dc = two_z * r.dc + Cx<Real>(Real(1), Real(0));
        z = z * z + c;
        r.orbit.push_back(z);
    }
    if (!cx_finite(z) || !cx_finite(r.dz) || !cx_finite(r.dc)) {
        NumericError e(ErrorKind::diverged_orbit, "iterate_with_derivatives: non-finite iterate");
        e.set_where(to_std_complex(c));
        throw e;
    }
    return r;
}

template <class Real>
Cx<Real> multiplier_of(const std::vector<Cx<Real>>& points) {
    if (points.empty()) throw ArgumentError("multiplier_of: empty point list");
    ScaledCx<Real> prod = ScaledCx<Real>::one();
    for (const auto& z : points) prod = prod * (Real(2) * z);
    return prod.value();
}

namespace detail {

// Solves the cyclic bidiagonal system: a_i w_i - w_{i+1 mod n} = rhs_i with
// a_i = 2 z_i. Unrolling the recursion w_{i+1} = a_i w_i - rhs_i around the
// cycle gives w_0 (P - 1) = sum_i rhs_i T_i where P is the full product of
// the a_i and T_i the suffix product past index i. The products are carried
// in scaled form; they traverse the exponent range even when the solution is
// tame. Singular exactly when the cycle multiplier P is 1.
template <class Real>
void cyclic_solve(const std::vector<Cx<Real>>& z, const std::vector<Cx<Real>>& rhs,
                  std::vector<Cx<Real>>& w) {
    const size_t n = z.size();
    w.resize(n);
    if (n == 1) {
        // (2 z_0 - 1) w_0 = rhs_0
        Cx<Real> a = Real(2) * z[0] - Cx<Real>(Real(1), Real(0));
        Real eps = real_epsilon<Real>();
        if (cx_abs(a) < Real(64) * eps) {
            throw NumericError(ErrorKind::singular_system,
                               "cyclic_solve: fixed point with multiplier 1");
        }
        w[0] = rhs[0] / a;
        return;
    }
    std::vector<ScaledCx<Real>> suffix(n);  // suffix[i] = prod_{j>i} a_j
    suffix[n - 1] = ScaledCx<Real>::one();
    for (size_t i = n - 1; i-- > 0;) {
        suffix[i] = suffix[i + 1] * (Real(2) * z[i + 1]);
    }
    ScaledCx<Real> P = suffix[0] * (Real(2) * z[0]);
    ScaledCx<Real> S;  // sum_i rhs_i * suffix[i]
    for (size_t i = 0; i < n; ++i) {
        S = S + suffix[i] * rhs[i];
    }
    ScaledCx<Real> Pm1 = P + ScaledCx<Real>::from(Cx<Real>(Real(-1), Real(0)));
    // Singularity test at roundoff scale relative to the product magnitude;
    // near-parabolic systems above that scale stay solvable (ill-conditioned
    // steps are Newton's problem, not ours).
    double log2_gap = Pm1.is_zero() ? -std::numeric_limits<double>::infinity() : Pm1.log2_abs();
    double log2_eps = std::log2(to_double(real_epsilon<Real>()));
    double log2_scale = std::max(0.0, P.log2_abs());
    if (log2_gap < log2_eps + log2_scale + 6) {
        throw NumericError(ErrorKind::singular_system,
                           "cyclic_solve: cycle multiplier at 1, Jacobian singular");
    }
    w[0] = (S / Pm1).value();
    for (size_t i = 0; i + 1 < n; ++i) {
        w[i + 1] = Real(2) * z[i] * w[i] - rhs[i];
    }
}

template <class Real>
Real orbit_residual(const Cx<Real>& c, const std::vector<Cx<Real>>& z,
                    std::vector<Cx<Real>>& g) {
    const size_t n = z.size();
    g.resize(n);
    Real worst(0);
    for (size_t i = 0; i < n; ++i) {
        g[i] = z[i] * z[i] + c - z[(i + 1) % n];
        Real a = cx_abs(g[i]);
        if (a > worst) worst = a;
    }
    return worst;
}

// Proper-divisor shift test. A cycle that is d-periodic for some proper
// divisor d of n is also (n/p)-periodic for a prime p | n, so checking the
// maximal proper divisors suffices.
template <class Real>
bool points_distinct(const std::vector<Cx<Real>>& z, const Real& threshold) {
    const size_t n = z.size();
    if (n <= 1) return true;
    size_t rem = n;
    std::vector<size_t> primes;
    for (size_t p = 2; p * p <= rem; ++p) {
        if (rem % p == 0) {
            primes.push_back(p);
            while (rem % p == 0) rem /= p;
        }
    }
    if (rem > 1) primes.push_back(rem);
    for (size_t p : primes) {
        size_t d = n / p;
        Real worst(0);
        for (size_t i = 0; i < n; ++i) {
            Real a = cx_abs(z[(i + d) % n] - z[i]);
            if (a > worst) worst = a;
        }
        if (worst <= threshold) return false;
    }
    return true;
}

}  // namespace detail

template <class Real>
PeriodicOrbit<Real> solve_periodic_orbit(const Cx<Real>& c, int n,
                                         const std::vector<Cx<Real>>& seed, const Real& tol,
                                         int max_iter = kDefaultMaxIter) {
    if (n < 1) throw ArgumentError("solve_periodic_orbit: n must be >= 1");
    if (static_cast<int>(seed.size()) != n)
        throw ArgumentError("solve_periodic_orbit: seed size must equal the period");
    if (tol < real_epsilon<Real>() * Real(1000))
        throw ArgumentError("solve_periodic_orbit: tol below precision resolution");

    std::vector<Cx<Real>> z = seed;
    std::vector<Cx<Real>> g, step;
    const Real bound = Real(kEscapeBound);
    Real resid = detail::orbit_residual(c, z, g);
    for (int iter = 0; iter < max_iter && resid > tol; ++iter) {
        detail::cyclic_solve(z, g, step);
        for (int i = 0; i < n; ++i) {
            z[static_cast<size_t>(i)] -= step[static_cast<size_t>(i)];
            if (cx_abs(z[static_cast<size_t>(i)]) > bound) {
                throw NumericError(ErrorKind::no_convergence,
                                   "solve_periodic_orbit: iterate escaped", to_double(resid));
            }
        }
        resid = detail::orbit_residual(c, z, g);
    }
    if (resid > tol) {
        throw NumericError(ErrorKind::no_convergence,
                           "solve_periodic_orbit: residual " + std::to_string(to_double(resid)) +
                               " above tolerance after " + std::to_string(max_iter) + " iterations",
                           to_double(resid));
    }

    PeriodicOrbit<Real> orbit;
    orbit.parameter = c;
    orbit.period = n;
    orbit.points = std::move(z);
    orbit.multiplier = multiplier_of(orbit.points);
    orbit.residual = resid;
    orbit.exact_period = detail::points_distinct(orbit.points, Real(10) * tol);
    return orbit;
}

// Newton step uses the solution of the linearized cyclic system; the caller
// supplies consecutive parameters close enough for the seed to stay in the
// Newton basin, and failed steps are bisected up to depth 40 per leg.
template <class Real>
PeriodicOrbit<Real> continue_orbit(const PeriodicOrbit<Real>& orbit,
                                   const std::vector<Cx<Real>>& path, const Real& tol,
                                   int max_iter = kDefaultMaxIter) {
    if (path.empty()) throw ArgumentError("continue_orbit: empty path");
    if (cx_abs(path.front() - orbit.parameter) > Real(1e3) * tol)
        throw ArgumentError("continue_orbit: path must start at the orbit parameter");

    PeriodicOrbit<Real> cur = orbit;
    const int kMaxDepth = 40;
    for (size_t leg = 1; leg < path.size(); ++leg) {
        Cx<Real> from = cur.parameter;
        Cx<Real> to = path[leg];
        Real s(0);
        Real step(1);
        int depth = 0;
        while (s < Real(1)) {
            bool last = step >= Real(1) - s;
            Real s_next = last ? Real(1) : s + step;
            Cx<Real> c_try = last ? to : from + s_next * (to - from);
            bool ok = true;
            PeriodicOrbit<Real> next;
            try {
                next = solve_periodic_orbit(c_try, cur.period, cur.points, tol, max_iter);
                // A collapsed or exchanged solution is useless for tracking:
                // demand the new points stay near the seed, proportionally to
                // the Newton contract.
                Real drift(0);
                for (size_t i = 0; i < cur.points.size(); ++i) {
                    Real a = cx_abs(next.points[i] - cur.points[i]);
                    if (a > drift) drift = a;
                }
                Real move = cx_abs(c_try - cur.parameter);
                if (drift > Real(0.5) && drift > Real(1e4) * move) ok = false;
            } catch (const NumericError&) {
                ok = false;
            }
            if (ok) {
                cur = std::move(next);
                s = s_next;
                step = step * Real(2);
                if (depth > 0) --depth;
            } else {
                step = step / Real(2);
                ++depth;
                if (depth > kMaxDepth) {
                    NumericError e(ErrorKind::continuation_blocked,
                                   "continue_orbit: step bisection depth exceeded");
                    e.set_where(to_std_complex(c_try));
                    throw e;
                }
            }
        }
    }
    return cur;
}

}  // namespace qcascade
