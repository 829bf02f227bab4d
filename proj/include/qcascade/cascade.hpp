#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "qcascade/component_geometry.hpp"
#include "qcascade/criteria.hpp"
#include "qcascade/errors.hpp"

namespace qcascade {

struct CascadeSpec {
    int base_period = 1;
    std::vector<RotationNumber> arguments;
    double tol = 1e-12;
    int max_iter = kDefaultMaxIter;
    bool compute_orbits = true;
};

// Per-level record; NaN marks quantities that are undefined at that level or
// whose diagnostic computation degenerated (never fatal for the run).
struct LevelDiagnostics {
    double gap = std::numeric_limits<double>::quiet_NaN();
    double orbit_min_dist = std::numeric_limits<double>::quiet_NaN();
    double zeta = std::numeric_limits<double>::quiet_NaN();
    double zeta_h_bound = std::numeric_limits<double>::quiet_NaN();
    int cluster_count = 0;
    int cluster_size = 0;
    double cluster_max_diameter = std::numeric_limits<double>::quiet_NaN();
};

template <class Real>
struct CascadeTrace {
    int base_period = 1;
    std::vector<RotationNumber> arguments;  // full requested list
    GeometryConstants constants;
    Real tol{};
    int max_iter = kDefaultMaxIter;

    std::vector<HyperbolicComponent<Real>> components;  // W^0 .. W^M
    std::vector<PeriodicOrbit<Real>> center_orbits;     // at each component center
    std::vector<Cx<Real>> touch_points;                 // c_0 .. c_{M-1}
    std::vector<std::int64_t> periods;                  // n_0 .. n_M

    Cx<Real> limit{};
    double limit_error = std::numeric_limits<double>::infinity();
    bool resolution_exhausted = false;

    std::vector<PeriodicOrbit<Real>> orbits_at_limit;  // O_0 .. O_M, empty if skipped
    std::vector<LevelDiagnostics> diagnostics;         // one row per touch point

    int depth() const { return static_cast<int>(touch_points.size()); }
};

struct Clustering {
    std::vector<int> assignment;             // point of O_m -> index into O_{m-1}
    std::vector<std::vector<int>> clusters;  // per parent point, members in O_m
    std::vector<double> diameters;
    int cluster_size = 0;
};

// ---------------------------------------------------------------------------
// Limit extrapolation. The touch points contract at an asymptotically
// geometric rate; one complex ratio captures both the remaining length and
// its direction. The error bound uses only real gap ratios.
// ---------------------------------------------------------------------------

template <class Real>
std::pair<Cx<Real>, double> limit_parameter(const CascadeTrace<Real>& trace) {
    const auto& c = trace.touch_points;
    const std::size_t k = c.size();
    if (k < 3) throw ArgumentError("limit_parameter: need at least three touch points");

    std::vector<double> gaps(k - 1);
    for (std::size_t i = 0; i + 1 < k; ++i) gaps[i] = to_double(cx_abs(c[i + 1] - c[i]));

    double rbar = 0.0;
    std::size_t nr = std::min<std::size_t>(3, gaps.size() - 1);
    for (std::size_t i = gaps.size() - nr; i < gaps.size(); ++i) {
        if (!(gaps[i - 1] > 0.0))
            return {c.back(), std::numeric_limits<double>::infinity()};
        rbar = std::max(rbar, gaps[i] / gaps[i - 1]);
    }
    if (!(rbar < 1.0)) return {c.back(), std::numeric_limits<double>::infinity()};

    Cx<Real> d_last = c[k - 1] - c[k - 2];
    Cx<Real> d_prev = c[k - 2] - c[k - 3];
    Cx<Real> kappa = d_last / d_prev;
    if (!(to_double(cx_abs(kappa)) < 1.0))
        return {c.back(), std::numeric_limits<double>::infinity()};

    Cx<Real> one(Real(1), Real(0));
    Cx<Real> c_star = c.back() + d_last * kappa / (one - kappa);
    double err = gaps.back() * rbar / (1.0 - rbar);
    return {c_star, err};
}

template <class Real>
double orbit_min_distance(const CascadeTrace<Real>& trace, int m) {
    if (m < 0 || static_cast<std::size_t>(m) >= trace.orbits_at_limit.size())
        throw ArgumentError("orbit_min_distance: no orbit at this level");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& z : trace.orbits_at_limit[static_cast<std::size_t>(m)].points)
        best = std::min(best, to_double(cx_abs(z)));
    return best;
}

// ---------------------------------------------------------------------------
// Cluster structure of O_m over O_{m-1}: nearest-parent assignment must be
// unambiguous and land exactly q_{m-1} points on every parent.
// ---------------------------------------------------------------------------

template <class Real>
Clustering cluster_structure(const CascadeTrace<Real>& trace, int m) {
    if (m < 1 || m > trace.depth())
        throw ArgumentError("cluster_structure: m must lie in [1, depth]");
    if (static_cast<std::size_t>(m) >= trace.orbits_at_limit.size())
        throw ArgumentError("cluster_structure: orbits were not computed");

    const auto& fine = trace.orbits_at_limit[static_cast<std::size_t>(m)].points;
    const auto& coarse = trace.orbits_at_limit[static_cast<std::size_t>(m - 1)].points;
    const double tie = 10.0 * to_double(trace.tol);

    Clustering out;
    out.assignment.resize(fine.size(), -1);
    out.clusters.assign(coarse.size(), {});
    for (std::size_t i = 0; i < fine.size(); ++i) {
        double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
        int best = -1;
        for (std::size_t j = 0; j < coarse.size(); ++j) {
            double d = to_double(cx_abs(fine[i] - coarse[j]));
            if (d < d1) {
                d2 = d1;
                d1 = d;
                best = static_cast<int>(j);
            } else {
                d2 = std::min(d2, d);
            }
        }
        if (coarse.size() > 1 && d2 - d1 < tie) {
            NumericError e(ErrorKind::clustering_ambiguous,
                           "cluster_structure: point equidistant to two parent points");
            e.set_level(m);
            throw e;
        }
        out.assignment[i] = best;
        out.clusters[static_cast<std::size_t>(best)].push_back(static_cast<int>(i));
    }

    const std::int64_t q = trace.periods[static_cast<std::size_t>(m)] /
                           trace.periods[static_cast<std::size_t>(m - 1)];
    out.cluster_size = static_cast<int>(q);
    for (const auto& members : out.clusters)
        if (static_cast<std::int64_t>(members.size()) != q) {
            NumericError e(ErrorKind::clustering_ambiguous,
                           "cluster_structure: uneven cluster sizes");
            e.set_level(m);
            throw e;
        }

    out.diameters.resize(out.clusters.size(), 0.0);
    for (std::size_t j = 0; j < out.clusters.size(); ++j) {
        const auto& members = out.clusters[j];
        double dia = 0.0;
        if (members.size() <= 2048) {
            for (std::size_t a = 0; a < members.size(); ++a)
                for (std::size_t b = a + 1; b < members.size(); ++b)
                    dia = std::max(dia, to_double(cx_abs(fine[static_cast<std::size_t>(members[a])] -
                                                         fine[static_cast<std::size_t>(members[b])])));
        } else {
            // bounding-box diagonal as an upper estimate for very large clusters
            double lo_re = 1e300, hi_re = -1e300, lo_im = 1e300, hi_im = -1e300;
            for (int idx : members) {
                double re = to_double(fine[static_cast<std::size_t>(idx)].re);
                double im = to_double(fine[static_cast<std::size_t>(idx)].im);
                lo_re = std::min(lo_re, re);
                hi_re = std::max(hi_re, re);
                lo_im = std::min(lo_im, im);
                hi_im = std::max(hi_im, im);
            }
            dia = std::hypot(hi_re - lo_re, hi_im - lo_im);
        }
        out.diameters[j] = dia;
    }
    return out;
}

namespace detail {

// The two fixed points of z^2 + c; first is the one nearer to hint.
template <class Real>
std::pair<Cx<Real>, Cx<Real>> fixed_points(const Cx<Real>& c, const Cx<Real>& hint) {
    Cx<Real> one(Real(1), Real(0));
    Cx<Real> root = cx_sqrt(one - Real(4) * c);
    Cx<Real> a = (one + root) / Real(2);
    Cx<Real> b = (one - root) / Real(2);
    if (to_double(cx_abs(a - hint)) <= to_double(cx_abs(b - hint))) return {a, b};
    return {b, a};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Zeta ratio: how far the new orbit has moved from the orbit it bifurcated
// from, relative to the spacing of that orbit inside one cluster. The bound
// side is H(u-bar_m) from the summability quantities.
// ---------------------------------------------------------------------------

template <class Real>
std::pair<double, double> zeta_ratio(const CascadeTrace<Real>& trace, int m) {
    if (m < 0 || m + 1 > trace.depth())
        throw ArgumentError("zeta_ratio: need m+1 <= depth");
    if (static_cast<std::size_t>(m + 1) >= trace.orbits_at_limit.size())
        throw ArgumentError("zeta_ratio: orbits were not computed");

    const auto& fine = trace.orbits_at_limit[static_cast<std::size_t>(m + 1)].points;
    const auto& base = trace.orbits_at_limit[static_cast<std::size_t>(m)].points;
    const double degenerate = 10.0 * to_double(trace.tol);

    std::vector<int> plus(base.size(), -1);  // nearest same-cluster neighbour
    if (m >= 1) {
        Clustering clus = cluster_structure(trace, m);
        for (std::size_t w = 0; w < base.size(); ++w) {
            const auto& members = clus.clusters[static_cast<std::size_t>(clus.assignment[w])];
            double best = std::numeric_limits<double>::infinity();
            for (int other : members) {
                if (static_cast<std::size_t>(other) == w) continue;
                double d = to_double(cx_abs(base[static_cast<std::size_t>(other)] - base[w]));
                if (d < best) {
                    best = d;
                    plus[w] = other;
                }
            }
        }
    } else if (base.size() > 1) {
        for (std::size_t w = 0; w < base.size(); ++w) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t other = 0; other < base.size(); ++other) {
                if (other == w) continue;
                double d = to_double(cx_abs(base[other] - base[w]));
                if (d < best) {
                    best = d;
                    plus[w] = static_cast<int>(other);
                }
            }
        }
    }

    // Landmark for a one-point base orbit: the other fixed point of the map.
    Cx<Real> beta{};
    if (base.size() == 1)
        beta = detail::fixed_points(trace.orbits_at_limit[0].parameter, base[0]).second;

    double ratio = 0.0;
    for (const auto& z : fine) {
        double dn = std::numeric_limits<double>::infinity();
        std::size_t w = 0;
        for (std::size_t j = 0; j < base.size(); ++j) {
            double d = to_double(cx_abs(z - base[j]));
            if (d < dn) {
                dn = d;
                w = j;
            }
        }
        double den;
        if (base.size() == 1)
            den = to_double(cx_abs(beta - base[0]));
        else
            den = to_double(cx_abs(base[static_cast<std::size_t>(plus[w])] - base[w]));
        if (!(den > degenerate)) {
            NumericError e(ErrorKind::degenerate_cluster,
                           "zeta_ratio: neighbour spacing below resolution");
            e.set_level(m);
            throw e;
        }
        ratio = std::max(ratio, dn / den);
    }

    // Bound side; +inf when the argument list is too short to define u-bar_m.
    double h_bound = std::numeric_limits<double>::infinity();
    if (trace.arguments.size() >= 2 &&
        static_cast<std::size_t>(m) + 1 < trace.arguments.size()) {
        ConditionReport rep = lemma_quantities(to_big(trace.arguments),
                                               static_cast<std::uint64_t>(trace.base_period),
                                               trace.constants);
        double u_bar = rep.rows[static_cast<std::size_t>(m)][5];
        if (u_bar >= 0.0 && u_bar < 1.0) h_bound = h_eval(u_bar);
    }
    return {ratio, h_bound};
}

// ---------------------------------------------------------------------------
// Full cascade driver.
// ---------------------------------------------------------------------------

template <class Real>
CascadeTrace<Real> run_cascade(const CascadeSpec& spec, const GeometryConstants& constants,
                               const HyperbolicComponent<Real>& base) {
    constants.validate();
    if (spec.arguments.empty()) throw ArgumentError("run_cascade: arguments must be nonempty");
    for (const auto& t : spec.arguments)
        if (t.is_zero()) throw ArgumentError("run_cascade: internal arguments must be nonzero");
    if (spec.base_period < 1) throw ArgumentError("run_cascade: base period must be positive");
    if (base.period != spec.base_period)
        throw ArgumentError("run_cascade: base component period does not match the spec");
    if (!(spec.tol > 0)) throw ArgumentError("run_cascade: tol must be positive");

    const Real tol(spec.tol);
    const double stop_gap = 10.0 * to_double(real_epsilon<Real>());

    CascadeTrace<Real> trace;
    trace.base_period = spec.base_period;
    trace.arguments = spec.arguments;
    trace.constants = constants;
    trace.tol = tol;
    trace.max_iter = spec.max_iter;
    trace.components.push_back(base);
    trace.center_orbits.push_back(center_orbit(base, tol, spec.max_iter));
    trace.periods.push_back(spec.base_period);

    for (std::size_t m = 0; m < spec.arguments.size(); ++m) {
        const RotationNumber& t = spec.arguments[m];
        ChildResult<Real> ch;
        try {
            ch = child_component_full(trace.components.back(), t, tol, spec.max_iter);
        } catch (NumericError& e) {
            e.set_level(static_cast<int>(m));
            throw;
        }
        if (m >= 1) {
            double gap = to_double(cx_abs(ch.root.c - trace.touch_points.back()));
            if (gap < stop_gap) {
                // the two touch points are indistinguishable at this precision;
                // drop the unresolved one so recorded gaps stay meaningful
                trace.resolution_exhausted = true;
                break;
            }
        }
        trace.touch_points.push_back(ch.root.c);
        trace.components.push_back(ch.component);
        trace.center_orbits.push_back(ch.center_orbit);
        trace.periods.push_back(trace.periods.back() * static_cast<std::int64_t>(t.q));
        trace.diagnostics.emplace_back();
    }

    // gap of level m is the forward difference |c_{m+1} - c_m|; the last
    // level has no successor and stays NaN
    for (std::size_t m = 0; m + 1 < trace.touch_points.size(); ++m)
        trace.diagnostics[m].gap =
            to_double(cx_abs(trace.touch_points[m + 1] - trace.touch_points[m]));

    if (trace.touch_points.size() >= 3) {
        auto lim = limit_parameter(trace);
        trace.limit = lim.first;
        trace.limit_error = lim.second;
    } else {
        trace.limit = trace.touch_points.back();
        trace.limit_error = std::numeric_limits<double>::infinity();
    }

    if (spec.compute_orbits) {
        const int iter = std::max(spec.max_iter, 400);
        for (std::size_t j = 0; j < trace.components.size(); ++j) {
            std::vector<Cx<Real>> path;
            path.push_back(trace.components[j].center);
            for (std::size_t i = j; i < trace.touch_points.size(); ++i)
                path.push_back(trace.touch_points[i]);
            path.push_back(trace.limit);
            try {
                trace.orbits_at_limit.push_back(
                    continue_orbit(trace.center_orbits[j], path, tol, iter));
            } catch (NumericError& e) {
                e.set_level(static_cast<int>(j));
                throw;
            }
        }

        for (int m = 0; m < trace.depth(); ++m) {
            auto& diag = trace.diagnostics[static_cast<std::size_t>(m)];
            diag.orbit_min_dist = orbit_min_distance(trace, m);
            try {
                auto zr = zeta_ratio(trace, m);
                diag.zeta = zr.first;
                diag.zeta_h_bound = zr.second;
            } catch (const NumericError&) {
                // diagnostic degeneracy is recorded as NaN, never fatal
            }
            if (m >= 1) {
                try {
                    Clustering clus = cluster_structure(trace, m);
                    diag.cluster_count = static_cast<int>(clus.clusters.size());
                    diag.cluster_size = clus.cluster_size;
                    diag.cluster_max_diameter =
                        *std::max_element(clus.diameters.begin(), clus.diameters.end());
                } catch (const NumericError&) {
                }
            }
        }
    }
    return trace;
}

template <class Real>
CascadeTrace<Real> run_cascade(const CascadeSpec& spec, const GeometryConstants& constants) {
    if (spec.base_period != 1)
        throw ArgumentError("run_cascade: a base component is required when base_period != 1");
    HyperbolicComponent<Real> cardioid{1, Cx<Real>(Real(0), Real(0)), {}};
    return run_cascade<Real>(spec, constants, cardioid);
}

// Finite proxy for the growth rate log|p_m| / n_m; returns the max over m.
inline double mlc_rate_diagnostic(const CascadeSpec& spec,
                                  std::vector<double>* per_level = nullptr) {
    if (spec.arguments.empty())
        throw ArgumentError("mlc_rate_diagnostic: arguments must be nonempty");
    double n_m = static_cast<double>(spec.base_period);
    double best = -std::numeric_limits<double>::infinity();
    if (per_level) per_level->clear();
    for (const auto& t : spec.arguments) {
        double v = std::log(std::fabs(static_cast<double>(t.p))) / n_m;
        if (t.p == 0) v = -std::numeric_limits<double>::infinity();
        if (per_level) per_level->push_back(v);
        best = std::max(best, v);
        n_m *= static_cast<double>(t.q);
    }
    return best;
}

}  // namespace qcascade
