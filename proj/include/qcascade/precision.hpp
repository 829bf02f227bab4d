#pragma once

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <limits>

namespace qcascade {

// Extended working precision: 40 significant decimal digits, plain value
// semantics (no expression templates) so it composes with the complex type.
using ExtReal = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<40>,
                                              boost::multiprecision::et_off>;

inline constexpr int kBinary64Digits = 16;
inline constexpr int kExtendedDigits = 40;

enum class Precision { binary64, extended };

// Requested decimal digits -> precision level. Anything beyond the extended
// type's honest capacity is rejected rather than silently rounded down.
inline Precision precision_for_digits(int digits) {
    if (digits <= kBinary64Digits) return Precision::binary64;
    return Precision::extended;
}

inline bool digits_supported(int digits) { return digits >= 1 && digits <= kExtendedDigits; }

template <class Real>
Real real_epsilon() {
    return std::numeric_limits<Real>::epsilon();
}

inline double to_double(double x) { return x; }
inline double to_double(const ExtReal& x) { return static_cast<double>(x); }

}  // namespace qcascade
