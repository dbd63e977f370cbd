#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

namespace maclab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Standard normal CDF.
inline double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

// Upper tail Q(x) = 1 - Phi(x).
inline double std_normal_sf(double x) {
    return 0.5 * std::erfc(x * 0.7071067811865475244);
}

inline double std_normal_pdf(double x) {
    return 0.3989422804014326779 * std::exp(-0.5 * x * x);
}

// ln Phi(x), stable into the far left tail.
inline double log_std_normal_cdf(double x) {
    if (x > -1.0) return std::log1p(-std_normal_sf(x));
    if (x > -36.5) return std::log(std_normal_cdf(x));
    // asymptotic expansion of the Mills ratio
    double x2 = x * x;
    double corr = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return -0.5 * x2 - std::log(-x) - 0.91893853320467274178 + std::log(corr);
}

// (1 - eps)^n for eps in [0,1]. For tiny eps uses e^{-eps n}; the two branches
// agree to better than 1e-12 relative at the 1e-6 crossover.
inline double pow1m(double eps, double n) {
    if (!(eps >= 0.0) || !(n >= 0.0)) throw std::invalid_argument("pow1m: bad args");
    if (eps >= 1.0) return 0.0;
    if (eps < 1e-6) return std::exp(-eps * n);
    return std::exp(n * std::log1p(-eps));
}

// Phi(x)^m in log-domain.
inline double std_normal_cdf_pow(double x, double m) {
    if (m == 0.0) return 1.0;
    double q = std_normal_sf(x);
    if (q < 1e-6) return std::exp(-q * m);
    return std::exp(m * log_std_normal_cdf(x));
}

// 1 - Phi(x)^m, accurate when the power is close to 1.
inline double one_minus_cdf_pow(double x, double m) {
    if (m == 0.0) return 0.0;
    double q = std_normal_sf(x);
    double lp = q < 1e-6 ? -q * m : m * std::log1p(-q);
    return -std::expm1(lp);
}

namespace detail {

// Regularized lower incomplete gamma by series (x < a + 1).
inline double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 2000; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma by continued fraction (x >= a + 1).
inline double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 2000; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace detail

// Regularized lower incomplete gamma P(a, x) = gamma(a,x)/Gamma(a).
inline double regularized_gamma_lower(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0) || !std::isfinite(a) || !std::isfinite(x))
        throw std::invalid_argument("regularized_gamma: need a > 0, x >= 0, finite");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_cf(a, x);
}

// Regularized upper incomplete gamma Q(a, x) = Gamma(a,x)/Gamma(a).
inline double regularized_gamma_upper(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0) || !std::isfinite(a) || !std::isfinite(x))
        throw std::invalid_argument("regularized_gamma: need a > 0, x >= 0, finite");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_cf(a, x);
}

enum class GammaKind { lower, upper };

inline double regularized_gamma(GammaKind kind, double shape, double w) {
    return kind == GammaKind::lower ? regularized_gamma_lower(shape, w)
                                    : regularized_gamma_upper(shape, w);
}

// ln C(n, k) via lgamma; n, k need not be small.
inline double lchoose(double n, double k) {
    if (k < 0.0 || k > n) return -kInf;
    if (k == 0.0 || k == n) return 0.0;
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

inline double logsumexp(std::span<const double> v) {
    double mx = -kInf;
    for (double x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - mx);
    return mx + std::log(acc);
}

inline double logaddexp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

}  // namespace maclab
