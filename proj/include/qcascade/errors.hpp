#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace qcascade {

// Failure taxonomy for the numerical kernels. Callers that drive adaptive
// continuation catch NumericError and subdivide; everything else propagates.
enum class ErrorKind {
    diverged_orbit,        // iterate left the escape bound
    no_convergence,        // Newton stalled above tolerance
    singular_system,       // cyclic Jacobian singular (orbit multiplier at 1)
    continuation_blocked,  // adaptive subdivision hit its depth limit
    clustering_ambiguous,  // point equidistant to two candidate cluster anchors
    degenerate_cluster,    // cluster separation below resolution
    sampling_too_coarse,   // image polygon steps exceed probe clearance
};

class NumericError : public std::runtime_error {
  public:
    NumericError(ErrorKind kind, const std::string& what_arg)
        : std::runtime_error(what_arg), kind_(kind) {}

    NumericError(ErrorKind kind, const std::string& what_arg, double residual)
        : std::runtime_error(what_arg), kind_(kind), residual_(residual) {}

    ErrorKind kind() const noexcept { return kind_; }

    // Last residual seen before giving up; NaN when not applicable.
    double residual() const noexcept { return residual_; }

    // Parameter-plane location where continuation stopped, if any.
    std::complex<double> where() const noexcept { return where_; }
    void set_where(std::complex<double> w) noexcept { where_ = w; }

    // Cascade level attribution, filled in by the cascade driver.
    int level() const noexcept { return level_; }
    void set_level(int m) noexcept { level_ = m; }

  private:
    ErrorKind kind_;
    double residual_ = std::numeric_limits<double>::quiet_NaN();
    std::complex<double> where_{std::numeric_limits<double>::quiet_NaN(), 0.0};
    int level_ = -1;
};

// Violated argument contract (bad fraction, tolerance below resolution, ...).
class ArgumentError : public std::invalid_argument {
  public:
    explicit ArgumentError(const std::string& what_arg) : std::invalid_argument(what_arg) {}
};

}  // namespace qcascade
