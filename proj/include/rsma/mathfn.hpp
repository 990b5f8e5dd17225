#pragma once

// Special functions needed by the closed-form power-allocation math and the
// finite-blocklength rate formula: J0, ln-gamma, digamma, generalized
// exponential integrals E_m, and the Gaussian Q function with its inverse.
// All entry points take and return double; internals run in long double so the
// returned values are correct to (or near) double rounding.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

#include "rsma/errors.hpp"

namespace rsma {

namespace detail {

// Power series sum_k (-q)^k / (k!)^2 with q = x^2/4. Accurate while the largest
// term stays far from 1/eps; that holds comfortably for |x| <= 12.
inline long double j0_series(long double x) {
    const long double q = x * x / 4.0L;
    long double term = 1.0L, sum = 1.0L;
    for (int k = 1; k <= 200; ++k) {
        term *= -q / (static_cast<long double>(k) * k);
        sum += term;
        if (std::fabs(term) < 1e-25L * std::fabs(sum)) break;
    }
    return sum;
}

// Hankel asymptotic expansion. Term recurrence A_m = A_{m-1} * (-(2m-1)^2)/(8m);
// P collects even m, Q odd m, signs alternating per pair. Truncated at the
// smallest term, whose size (~e^{-2x}) is what limits accuracy: below 1e-10
// only for x >= ~12, hence the series/asymptotic split at 12.
inline long double j0_asymptotic(long double x) {
    const long double chi = x - std::numbers::pi_v<long double> / 4.0L;
    long double p = 1.0L, q = 0.0L;
    long double a = 1.0L;        // A_m / x^m running term
    long double prev = 1.0L;
    for (int m = 1; m <= 40; ++m) {
        const long double tm = 2.0L * m - 1.0L;
        a *= -(tm * tm) / (8.0L * m * x);
        if (std::fabs(a) >= prev) break;  // divergence point of the asymptotic series
        prev = std::fabs(a);
        const int pair = m / 2;
        const long double signed_a = (pair % 2 == 0) ? a : -a;
        if (m % 2 == 0) p += signed_a;
        else            q += signed_a;
        if (std::fabs(a) < 1e-20L) break;
    }
    return std::sqrt(2.0L / (std::numbers::pi_v<long double> * x)) *
           (p * std::cos(chi) - q * std::sin(chi));
}

// Stirling series for ln Gamma, valid for y >= 16 (next omitted term < 1e-19).
inline long double ln_gamma_stirling(long double y) {
    const long double y2 = y * y;
    long double s = 1.0L / (12.0L * y);
    long double yp = y * y2;
    s -= 1.0L / (360.0L * yp);      yp *= y2;
    s += 1.0L / (1260.0L * yp);     yp *= y2;
    s -= 1.0L / (1680.0L * yp);     yp *= y2;
    s += 1.0L / (1188.0L * yp);     yp *= y2;
    s -= 691.0L / (360360.0L * yp); yp *= y2;
    s += 1.0L / (156.0L * yp);
    return (y - 0.5L) * std::log(y) - y +
           0.5L * std::log(2.0L * std::numbers::pi_v<long double>) + s;
}

// Asymptotic digamma for y >= 16.
inline long double digamma_asymptotic(long double y) {
    const long double inv2 = 1.0L / (y * y);
    long double s = 0.0L, p = inv2;
    s += p / 12.0L;            p *= inv2;
    s -= p / 120.0L;           p *= inv2;
    s += p / 252.0L;           p *= inv2;
    s -= p / 240.0L;           p *= inv2;
    s += p / 132.0L;           p *= inv2;
    s -= p * 691.0L / 32760.0L;
    return std::log(y) - 1.0L / (2.0L * y) - s;
}

// Modified Lentz evaluation of the continued fraction for e^x * E_m(x), x > 1:
//   E_m(x) = e^{-x} / (x + m - 1*m/(x + m + 2 - 2*(m+1)/(x + m + 4 - ...)))
inline long double expint_cf_scaled(int m, long double x) {
    const long double tiny = 1e-300L;
    long double b = x + m;
    long double c = 1.0L / tiny;
    long double d = 1.0L / b;
    long double h = d;
    for (int i = 1; i <= 300; ++i) {
        const long double a = -static_cast<long double>(i) * (m - 1 + i);
        b += 2.0L;
        d = a * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + a / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0L / d;
        const long double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0L) < 1e-16L) break;
    }
    return h;
}

// Series for E_m(x), 0 < x <= 1 (unscaled):
//   E_m(x) = (-x)^{m-1}/(m-1)! * (psi(m) - ln x) - sum_{k != m-1} (-x)^k / ((k-m+1) k!)
inline long double expint_series(int m, long double x) {
    // psi(m) = -gamma + H_{m-1}
    long double psi_m = -0.57721566490153286060651209008240L;
    for (int j = 1; j < m; ++j) psi_m += 1.0L / j;

    long double fact_pow = 1.0L;  // (-x)^{m-1} / (m-1)!
    for (int j = 1; j < m; ++j) fact_pow *= -x / j;
    long double sum = fact_pow * (psi_m - std::log(x));

    long double pow_term = 1.0L;  // (-x)^k / k!
    for (int k = 0; k <= 300; ++k) {
        if (k > 0) pow_term *= -x / k;
        if (k == m - 1) continue;
        const long double term = -pow_term / (k - m + 1);
        sum += term;
        if (k > m && std::fabs(term) < 1e-22L * std::fabs(sum)) break;
    }
    return sum;
}

inline void require_finite(double x, const char* fn) {
    if (!std::isfinite(x))
        throw DomainError(std::string(fn) + ": non-finite input");
}

} // namespace detail

// Order-zero Bessel function of the first kind. Absolute error <= 1e-10 on |x| <= 50.
inline double bessel_j0(double x) {
    detail::require_finite(x, "bessel_j0");
    const long double ax = std::fabs(static_cast<long double>(x));
    if (ax <= 12.0L) return static_cast<double>(detail::j0_series(ax));
    return static_cast<double>(detail::j0_asymptotic(ax));
}

// Natural log of the gamma function, x > 0.
inline double ln_gamma(double x) {
    detail::require_finite(x, "ln_gamma");
    if (x <= 0.0) throw DomainError("ln_gamma: requires x > 0, got " + std::to_string(x));
    long double y = x;
    long double shift = 0.0L;  // ln Gamma(x) = ln Gamma(y) - ln(x (x+1) ... (y-1))
    while (y < 16.0L) {
        shift += std::log(y);
        y += 1.0L;
    }
    return static_cast<double>(detail::ln_gamma_stirling(y) - shift);
}

// Digamma psi(x) = Gamma'(x)/Gamma(x), x > 0.
inline double digamma(double x) {
    detail::require_finite(x, "digamma");
    if (x <= 0.0) throw DomainError("digamma: requires x > 0, got " + std::to_string(x));
    long double y = x;
    long double shift = 0.0L;  // psi(x) = psi(y) - sum 1/(x+j)
    while (y < 16.0L) {
        shift += 1.0L / y;
        y += 1.0L;
    }
    return static_cast<double>(detail::digamma_asymptotic(y) - shift);
}

// Generalized exponential integral E_m(x) = integral_1^inf e^{-xt} t^{-m} dt, m >= 1, x > 0.
// Relative error <= 1e-8 (continued fraction for x > 1, series otherwise).
inline double expint_en(int m, double x) {
    detail::require_finite(x, "expint_en");
    if (m < 1) throw DomainError("expint_en: requires m >= 1, got " + std::to_string(m));
    if (x <= 0.0) throw DomainError("expint_en: requires x > 0, got " + std::to_string(x));
    if (x > 1.0L)
        return static_cast<double>(std::exp(-static_cast<long double>(x)) *
                                   detail::expint_cf_scaled(m, x));
    return static_cast<double>(detail::expint_series(m, x));
}

// e^x * E_m(x): finite for every x > 0 even where e^{-x} underflows. This is the
// form the ergodic-bound term sum_m e^x E_m(x) consumes; for x ~ K^2/(P theta t)
// at tiny t the unscaled value underflows around x > 745.
inline double expint_en_scaled(int m, double x) {
    detail::require_finite(x, "expint_en_scaled");
    if (m < 1) throw DomainError("expint_en_scaled: requires m >= 1, got " + std::to_string(m));
    if (x <= 0.0) throw DomainError("expint_en_scaled: requires x > 0, got " + std::to_string(x));
    if (x > 1.0L) return static_cast<double>(detail::expint_cf_scaled(m, x));
    return static_cast<double>(std::exp(static_cast<long double>(x)) *
                               detail::expint_series(m, x));
}

// Gaussian tail Q(x) = P(Z > x) = erfc(x / sqrt(2)) / 2.
inline double q_func(double x) {
    detail::require_finite(x, "q_func");
    return static_cast<double>(
        0.5L * std::erfc(static_cast<long double>(x) / std::numbers::sqrt2_v<long double>));
}

// Inverse of Q: the x with Q(x) = p, 0 < p < 1. Bisection bracket + Newton polish;
// absolute error well under the 1e-6 contract.
inline double q_inv(double p) {
    detail::require_finite(p, "q_inv");
    if (p <= 0.0 || p >= 1.0)
        throw DomainError("q_inv: requires 0 < p < 1, got " + std::to_string(p));
    const long double pl = p;
    auto qf = [](long double x) {
        return 0.5L * std::erfc(x / std::numbers::sqrt2_v<long double>);
    };
    long double lo = -40.0L, hi = 40.0L;  // Q(40) ~ 1e-349 < any positive double
    for (int i = 0; i < 70; ++i) {
        const long double mid = 0.5L * (lo + hi);
        if (qf(mid) > pl) lo = mid;
        else              hi = mid;
    }
    long double x = 0.5L * (lo + hi);
    for (int i = 0; i < 4; ++i) {  // Newton on Q(x) - p; Q'(x) = -pdf(x)
        const long double pdf = std::exp(-0.5L * x * x) /
                                std::sqrt(2.0L * std::numbers::pi_v<long double>);
        if (pdf <= 0.0L) break;
        x -= (pl - qf(x)) / pdf;
    }
    return static_cast<double>(x);
}

} // namespace rsma
