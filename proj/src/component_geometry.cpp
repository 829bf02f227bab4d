// Plane-domain geometry: the admissible multiplier regions in log
// coordinates, their sampled boundary distances, and the closed-form disks
// and bounds built from them. Everything here is double precision; the
// criteria module consumes the SplitLog variants when the scales leave the
// representable range.

#include "qcascade/component_geometry.hpp"

#include <cmath>
#include <numbers>

namespace qcascade {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLog2 = std::numbers::ln2;
constexpr double kLog4 = 2.0 * std::numbers::ln2;

// |e^{x+iy} - 1| without forming the complex exponential.
double dist_to_one(double x, double cos_y) {
    double ex = std::exp(x);
    double d2 = ex * ex - 2.0 * ex * cos_y + 1.0;
    return d2 > 0 ? std::sqrt(d2) : 0.0;
}

// First x > 0 where |e^{x+iy} - 1| <= C x, +inf if the inequality never
// fails at this height. |e^{x+iy} - 1| - Cx decreases until x = log C, so
// the first crossing below log C is found by bisection on a bracket grown
// geometrically from the first-order root 2|sin(y/2)|/C.
double first_failure_x(double y, double C) {
    if (y == 0.0) return 0.0;
    if (C <= 1.0) return std::numeric_limits<double>::infinity();
    double cos_y = std::cos(y);
    double g = 2.0 * std::abs(std::sin(y / 2)) / C;
    if (g == 0.0) return 0.0;
    auto fails = [&](double x) { return dist_to_one(x, cos_y) <= C * x; };
    double hi = g, lo = 0.0;
    const double x_stop = std::log(C) + 60.0;
    while (!fails(hi)) {
        lo = hi;
        hi *= 2.0;
        if (hi > x_stop) return std::numeric_limits<double>::infinity();
    }
    for (int i = 0; i < 80; ++i) {
        double mid = 0.5 * (lo + hi);
        if (fails(mid))
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

bool omega_membership(std::complex<double> rho, double C) {
    if (rho == std::complex<double>(0.0, 0.0))
        throw ArgumentError("omega_membership: rho must be nonzero");
    if (!(C > 0)) throw ArgumentError("omega_membership: C must be positive");
    double x = std::log(std::abs(rho));
    double y = std::arg(rho);
    if (x <= 0.0) return rho != std::complex<double>(1.0, 0.0);
    // Horizontal reachability from the left half-plane, sampled at x/1024.
    double cos_y = std::cos(y);
    for (int k = 0; k <= 1024; ++k) {
        double xk = x * k / 1024;
        if (dist_to_one(xk, cos_y) <= C * xk) return false;
    }
    return true;
}

bool omega_tilde_membership(std::complex<double> rho, std::uint64_t n,
                            const GeometryConstants& constants) {
    constants.validate();
    if (n == 0) throw ArgumentError("omega_tilde_membership: n must be positive");
    double nd = static_cast<double>(n);
    double C = constants.B0 * std::exp(nd * kLog4) / nd;  // honest +inf for huge n
    if (!omega_membership(rho, C)) return false;
    double Rn = 2.0 * nd * kLog2;
    std::complex<double> L(std::log(std::abs(rho)), std::arg(rho));
    return std::abs(L - std::complex<double>(Rn, 0.0)) >= Rn;
}

// Distance from 2 pi i t to the boundary of the admissible log-region.
// Candidates: the excluded point L = 0 (rho = 1), the removed disk (exact),
// and the inequality-boundary curve found by bisection along 4096 rays.
// Rays with a leftward component never exit (the left half-plane is entirely
// inside), and along any rightward ray membership is monotone, because for
// fixed height the region is {x < first_failure_x(y)}.
double omega_tilde_distance(double t, std::uint64_t n, const GeometryConstants& constants) {
    constants.validate();
    if (n == 0) throw ArgumentError("omega_tilde_distance: n must be positive");
    if (t == 0.0) return 0.0;
    double nd = static_cast<double>(n);
    double y0 = 2.0 * kPi * t;
    double Rn = 2.0 * nd * kLog2;
    double d_disk = y0 * y0 / (std::hypot(Rn, y0) + Rn);
    double d_origin = std::abs(y0);

    if (n > 24 || std::abs(t) < 1e-8) {
        // First-order curve distance 2|sin(y0/2)| / C; beyond double range it
        // underflows to 0 honestly.
        double log_C = std::log(constants.B0) + nd * kLog4 - std::log(nd);
        double d_curve = std::exp(std::log(2.0 * std::abs(std::sin(y0 / 2))) - log_C);
        return std::min({d_origin, d_disk, d_curve});
    }

    double C = constants.B0 * std::exp(nd * kLog4) / nd;
    // Cache of the boundary height profile: first_failure_x on a uniform
    // y-grid over [-pi, pi], linearly interpolated (conservative toward the
    // smaller neighbor next to empty heights).
    const int grid_n = 8192;
    std::vector<double> profile(grid_n + 1);
    for (int k = 0; k <= grid_n; ++k) {
        double y = -kPi + 2.0 * kPi * k / grid_n;
        profile[static_cast<size_t>(k)] = first_failure_x(y, C);
    }
    auto x_fail = [&](double y) {
        double yw = std::remainder(y, 2.0 * kPi);
        double u = (yw + kPi) / (2.0 * kPi) * grid_n;
        int k = std::clamp(static_cast<int>(u), 0, grid_n - 1);
        double f = u - k;
        double a = profile[static_cast<size_t>(k)], b = profile[static_cast<size_t>(k) + 1];
        if (std::isinf(a) && std::isinf(b)) return a;
        if (std::isinf(a)) return b;
        if (std::isinf(b)) return a;
        return a + f * (b - a);
    };
    auto member = [&](double x, double y) { return x <= 0.0 || x < x_fail(y); };

    double best = std::min(d_origin, d_disk);
    const int rays = 4096;
    for (int i = 0; i < rays; ++i) {
        double th = 2.0 * kPi * i / rays;
        double dx = std::cos(th);
        if (dx <= 1e-12) continue;
        double dy = std::sin(th);
        if (member(best * dx, y0 + best * dy)) continue;  // no exit before the current best
        // March to the first non-member sample, then bisect the crossing.
        double s_lo = 0.0, s_hi = best;
        const int march = 64;
        for (int m = 1; m <= march; ++m) {
            double s = best * m / march;
            if (!member(s * dx, y0 + s * dy)) {
                s_lo = best * (m - 1) / march;
                s_hi = s;
                break;
            }
        }
        for (int b = 0; b < 50; ++b) {
            double s = 0.5 * (s_lo + s_hi);
            if (member(s * dx, y0 + s * dy))
                s_lo = s;
            else
                s_hi = s;
        }
        best = std::min(best, s_hi);
    }
    return best;
}

double p_estimate(double t, std::uint64_t n) {
    if (n == 0) throw ArgumentError("p_estimate: n must be positive");
    if (t == 0.0) return 0.0;
    double nd = static_cast<double>(n);
    double first = std::exp(std::log(nd) + std::log(std::abs(t)) - nd * kLog4);
    double second = t * t / nd;
    return std::min(first, second);
}

double bifurcation_radius(const RotationNumber& t, std::uint64_t n,
                          const GeometryConstants& constants) {
    if (n == 0) throw ArgumentError("bifurcation_radius: n must be positive");
    double qd = static_cast<double>(t.q);
    double first = 1.0 / (2.0 * static_cast<double>(n) * qd * qd * qd);
    return 0.5 * std::min(first, omega_tilde_distance(t.value(), n, constants));
}

Disk yoccoz_circle(const RotationNumber& t, std::uint64_t n) {
    if (n == 0) throw ArgumentError("yoccoz_circle: n must be positive");
    double rad = static_cast<double>(n) * kLog2 / static_cast<double>(t.q);
    return Disk{{rad, 2.0 * kPi * t.value()}, rad};
}

double limb_diameter_bound(std::uint64_t n, std::int64_t p, const GeometryConstants& constants) {
    constants.validate();
    if (n == 0) throw ArgumentError("limb_diameter_bound: n must be positive");
    if (p == 0) throw ArgumentError("limb_diameter_bound: p must be nonzero");
    double ap = std::abs(static_cast<double>(p));
    return std::exp(std::log(constants.A) + static_cast<double>(n) * kLog4 - std::log(ap));
}

// ---------------------------------------------------------------------------
// SplitLog: a + b exp(log_N) without materializing exp(log_N)
// ---------------------------------------------------------------------------

namespace {

constexpr long double kLongMaxLog = 11300.0L;  // below log(LDBL_MAX), with headroom

// sign(v) * exp(log|v| + shift) with honest saturation.
long double scaled_term(long double v, long double shift) {
    if (v == 0.0L) return 0.0L;
    long double lg = std::log(std::abs(v)) + shift;
    if (lg > kLongMaxLog) return v > 0 ? std::numeric_limits<long double>::infinity()
                                       : -std::numeric_limits<long double>::infinity();
    return v > 0 ? std::exp(lg) : -std::exp(lg);
}

}  // namespace

long double SplitLog::collapse() const { return a + scaled_term(b, log_N); }

long double SplitLog::divided_by_exp(long double lq) const {
    return scaled_term(a, -lq) + scaled_term(b, log_N - lq);
}

SplitLog split_min(const SplitLog& x, const SplitLog& y) {
    long double cx = x.collapse(), cy = y.collapse();
    if (cx <= cy) return x;
    return y;
}

SplitLog split_add(const SplitLog& x, long double s) { return {x.a + s, x.b, x.log_N}; }

SplitLog log_omega_tilde_distance_big(long double log_abs_t, long double log_n,
                                      std::optional<std::uint64_t> n_exact,
                                      const GeometryConstants& constants) {
    constants.validate();
    if (log_abs_t == -std::numeric_limits<long double>::infinity())
        return SplitLog::from(-std::numeric_limits<long double>::infinity());
    if (n_exact && *n_exact <= 24 && log_abs_t > -18.0L) {
        double t = static_cast<double>(std::exp(log_abs_t));
        double d = omega_tilde_distance(t, *n_exact, constants);
        return SplitLog::from(d > 0 ? std::log(static_cast<long double>(d))
                                    : -std::numeric_limits<long double>::infinity());
    }
    // log(2 sin(pi |t|)), using the small-angle form once it matters.
    long double log_2sin;
    if (log_abs_t < -30.0L) {
        log_2sin = std::log(2.0L * 3.14159265358979323846L) + log_abs_t;
    } else {
        long double tt = std::exp(log_abs_t);
        log_2sin = std::log(2.0L * std::sin(3.14159265358979323846L * tt));
    }
    long double log_y0 = std::log(2.0L * 3.14159265358979323846L) + log_abs_t;
    // Curve term: log(2 sin) - log C = log(2 sin) - log B0 + log n - n log 4.
    SplitLog curve{log_2sin - std::log((long double)constants.B0) + log_n,
                   -(long double)kLog4, log_n};
    // Removed-disk term: y0^2 / (2 R_n) with R_n = 2 n log 2.
    SplitLog disk = SplitLog::from(2.0L * log_y0 - std::log(4.0L * (long double)kLog2) - log_n);
    SplitLog origin = SplitLog::from(log_y0);
    return split_min(curve, split_min(disk, origin));
}

SplitLog log_bifurcation_radius_big(long double log_abs_t, long double log_n,
                                    std::optional<std::uint64_t> n_exact, long double log_q,
                                    const GeometryConstants& constants) {
    // First branch: 1 / (2 n q^3).
    SplitLog first = SplitLog::from(-std::log(2.0L) - log_n - 3.0L * log_q);
    SplitLog dist = log_omega_tilde_distance_big(log_abs_t, log_n, n_exact, constants);
    return split_add(split_min(first, dist), std::log(0.5L));
}

}  // namespace qcascade
