#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>

#include "qcascade/precision.hpp"

namespace qcascade {

// Minimal complex value type usable with both double and the multiprecision
// real. std::complex is only specified for the builtin floats, so the few
// operations the solvers need are spelled out here instead.
template <class Real>
struct Cx {
    Real re{};
    Real im{};

    Cx() = default;
    Cx(Real r, Real i) : re(std::move(r)), im(std::move(i)) {}
    explicit Cx(Real r) : re(std::move(r)), im(Real(0)) {}
    Cx(double r, double i) requires(!std::is_same_v<Real, double>)
        : re(Real(r)), im(Real(i)) {}

    friend Cx operator+(const Cx& a, const Cx& b) { return {a.re + b.re, a.im + b.im}; }
    friend Cx operator-(const Cx& a, const Cx& b) { return {a.re - b.re, a.im - b.im}; }
    friend Cx operator-(const Cx& a) { return {-a.re, -a.im}; }
    friend Cx operator*(const Cx& a, const Cx& b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
    friend Cx operator*(const Real& s, const Cx& a) { return {s * a.re, s * a.im}; }
    friend Cx operator*(const Cx& a, const Real& s) { return {a.re * s, a.im * s}; }
    friend Cx operator/(const Cx& a, const Real& s) { return {a.re / s, a.im / s}; }

    // Smith's scheme: avoids overflow in the naive quotient formula.
    friend Cx operator/(const Cx& a, const Cx& b) {
        using std::abs;
        if (abs(b.re) >= abs(b.im)) {
            Real r = b.im / b.re;
            Real den = b.re + b.im * r;
            return {(a.re + a.im * r) / den, (a.im - a.re * r) / den};
        }
        Real r = b.re / b.im;
        Real den = b.re * r + b.im;
        return {(a.re * r + a.im) / den, (a.im * r - a.re) / den};
    }

    Cx& operator+=(const Cx& b) {
        re += b.re;
        im += b.im;
        return *this;
    }
    Cx& operator-=(const Cx& b) {
        re -= b.re;
        im -= b.im;
        return *this;
    }

    friend bool operator==(const Cx& a, const Cx& b) { return a.re == b.re && a.im == b.im; }
};

template <class Real>
Real norm2(const Cx<Real>& a) {
    return a.re * a.re + a.im * a.im;
}

template <class Real>
Real cx_abs(const Cx<Real>& a) {
    using std::sqrt;
    return sqrt(norm2(a));
}

template <class Real>
Cx<Real> conj(const Cx<Real>& a) {
    return {a.re, -a.im};
}

template <class Real>
Real cx_arg(const Cx<Real>& a) {
    using std::atan2;
    return atan2(a.im, a.re);
}

template <class Real>
Cx<Real> cx_polar(const Real& r, const Real& theta) {
    using std::cos;
    using std::sin;
    return {r * cos(theta), r * sin(theta)};
}

template <class Real>
Cx<Real> cx_exp(const Cx<Real>& a) {
    using std::exp;
    return cx_polar(exp(a.re), a.im);
}

// Principal branch, imaginary part in (-pi, pi].
template <class Real>
Cx<Real> cx_log(const Cx<Real>& a) {
    using std::log;
    return {log(cx_abs(a)), cx_arg(a)};
}

template <class Real>
Cx<Real> cx_sqrt(const Cx<Real>& a) {
    using std::sqrt;
    Real r = cx_abs(a);
    if (r == Real(0)) return {Real(0), Real(0)};
    // Half-angle form with the numerically stable branch.
    if (a.re >= Real(0)) {
        Real t = sqrt((r + a.re) / Real(2));
        return {t, a.im / (Real(2) * t)};
    }
    Real t = sqrt((r - a.re) / Real(2));
    if (a.im >= Real(0)) return {a.im / (Real(2) * t), t};
    return {-a.im / (Real(2) * t), -t};
}

template <class Real>
bool cx_finite(const Cx<Real>& a) {
    using std::isfinite;
    return isfinite(a.re) && isfinite(a.im);
}

template <class Real>
std::complex<double> to_std_complex(const Cx<Real>& a) {
    return {to_double(a.re), to_double(a.im)};
}

template <class Real>
Cx<Real> from_std_complex(std::complex<double> a) {
    return {Real(a.real()), Real(a.imag())};
}

// Complex value carried as m * 2^e with |m| kept near 1. Long products of
// orbit derivatives swing through thousands of binary orders of magnitude,
// far past the double exponent range; this keeps them exact-enough without
// giving up on plain machine arithmetic.
template <class Real>
struct ScaledCx {
    Cx<Real> m{};
    std::int64_t e = 0;

    static ScaledCx one() { return {Cx<Real>(Real(1), Real(0)), 0}; }

    static ScaledCx from(const Cx<Real>& v) {
        ScaledCx s{v, 0};
        s.normalize();
        return s;
    }

    bool is_zero() const { return m.re == Real(0) && m.im == Real(0); }

    void normalize() {
        using std::abs;
        using std::frexp;
        if (is_zero()) {
            e = 0;
            return;
        }
        int ex = 0;
        Real mag = abs(m.re) >= abs(m.im) ? m.re : m.im;
        frexp(mag, &ex);
        if (ex != 0) {
            using std::ldexp;
            m.re = ldexp(m.re, -ex);
            m.im = ldexp(m.im, -ex);
            e += ex;
        }
    }

    friend ScaledCx operator*(const ScaledCx& a, const ScaledCx& b) {
        ScaledCx r{a.m * b.m, a.e + b.e};
        r.normalize();
        return r;
    }

    friend ScaledCx operator*(const ScaledCx& a, const Cx<Real>& b) {
        ScaledCx r{a.m * b, a.e};
        r.normalize();
        return r;
    }

    friend ScaledCx operator+(const ScaledCx& a, const ScaledCx& b) {
        if (a.is_zero()) return b;
        if (b.is_zero()) return a;
        const std::int64_t span = std::numeric_limits<Real>::digits + 8;
        if (a.e - b.e > span) return a;
        if (b.e - a.e > span) return b;
        using std::ldexp;
        ScaledCx r;
        if (a.e >= b.e) {
            int d = static_cast<int>(b.e - a.e);
            r.m = a.m + Cx<Real>(ldexp(b.m.re, d), ldexp(b.m.im, d));
            r.e = a.e;
        } else {
            int d = static_cast<int>(a.e - b.e);
            r.m = Cx<Real>(ldexp(a.m.re, d), ldexp(a.m.im, d)) + b.m;
            r.e = b.e;
        }
        r.normalize();
        return r;
    }

    // Collapses to a plain value; honest under/overflow semantics at the ends
    // of the representable range.
    Cx<Real> value() const {
        using std::ldexp;
        if (is_zero()) return {Real(0), Real(0)};
        if (e > std::numeric_limits<Real>::max_exponent) {
            Real inf = std::numeric_limits<Real>::infinity();
            using std::abs;
            return {m.re >= Real(0) ? inf : -inf, m.im >= Real(0) ? inf : -inf};
        }
        if (e < std::numeric_limits<Real>::min_exponent - std::numeric_limits<Real>::digits) {
            return {Real(0), Real(0)};
        }
        int d = static_cast<int>(e);
        return {ldexp(m.re, d), ldexp(m.im, d)};
    }

    friend ScaledCx operator/(const ScaledCx& a, const ScaledCx& b) {
        ScaledCx r{a.m / b.m, a.e - b.e};
        r.normalize();
        return r;
    }

    // log2 of the magnitude, for diagnostics and over/underflow tests.
    double log2_abs() const {
        using std::log2;
        if (is_zero()) return -std::numeric_limits<double>::infinity();
        return static_cast<double>(e) + to_double(log2(cx_abs(m)));
    }
};

}  // namespace qcascade
