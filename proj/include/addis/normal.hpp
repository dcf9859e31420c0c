#pragma once

// Standard normal distribution: density, CDF, survival function and quantile.
//
// The CDF uses the complementary error function from <cmath>, which keeps full
// relative precision in both tails. The quantile is Wichura's AS241 (PPND16)
// rational approximation followed by one Halley step against the CDF.

#include <cmath>
#include <limits>
#include <numbers>

#include "addis/errors.hpp"

namespace addis {

inline double normal_pdf(double x) {
    constexpr double inv_sqrt_2pi = 0.398942280401432677939946059934;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

/// P(Z <= x)
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// P(Z > x), accurate for large positive x.
inline double normal_sf(double x) {
    return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

namespace detail {

inline double ppnd16(double p) {
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            ((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r + 6.7265770927008700853e+4) * r +
                4.5921953931549871457e+4) * r + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0;
        const double den =
            ((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r + 3.9307895800092710610e+4) * r +
                2.1213794301586595867e+4) * r + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0;
        return q * num / den;
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            ((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
                1.27045825245236838258e+0) * r + 3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
             4.63033784615654529590e+0) * r + 1.42343711074968357734e+0;
        const double den =
            ((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
                1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
             2.05319162663775882187e+0) * r + 1.0;
        val = num / den;
    } else {
        r -= 5.0;
        const double num =
            ((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
                2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
             5.46378491116411436990e+0) * r + 6.65790464350110377720e+0;
        const double den =
            ((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
                7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
             5.99832206555887937690e-1) * r + 1.0;
        val = num / den;
    }
    return q < 0.0 ? -val : val;
}

} // namespace detail

/// Inverse of normal_cdf. Returns -inf / +inf at 0 / 1.
inline double normal_quantile(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::DomainError, "normal_quantile argument outside [0,1]");
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    double x = detail::ppnd16(p);
    // Halley refinement; the residual is evaluated in whichever tail keeps precision.
    const double dens = normal_pdf(x);
    if (dens > 0.0) {
        const double resid = p < 0.5 ? normal_cdf(x) - p : (1.0 - p) - normal_sf(x);
        const double u = resid / dens;
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

/// Upper-tail quantile: the x with P(Z > x) = a, i.e. Phi^{-1}(1 - a) without
/// forming 1 - a.
inline double normal_upper_quantile(double a) { return -normal_quantile(a); }

} // namespace addis
