#pragma once
// One-dimensional quadrature helpers, J₀ and its zeros, and acceleration of
// alternating series.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include <cmath>
#include <numbers>
#include <vector>

namespace gsqg {

struct QuadResult {
    double value = 0;
    double error = 0;
};

/// Adaptive Gauss–Kronrod (21 points) on [a, b]; tol is relative to the L1 norm.
template <class F>
QuadResult integrate(F&& f, double a, double b, double tol = 1e-12, unsigned max_depth = 20) {
    QuadResult r;
    if (a == b) return r;
    double l1 = 0;
    r.value = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(
        f, a, b, max_depth, tol, &r.error, &l1);
    return r;
}

inline double bessel_j0(double x) { return boost::math::cyl_bessel_j(0, x); }
inline double bessel_j1(double x) { return boost::math::cyl_bessel_j(1, x); }

/// J₀(x) − 1 without cancellation for small x.
inline double bessel_j0_minus_one(double x) {
    if (x > 0.1) return bessel_j0(x) - 1.0;
    // −x²/4 + x⁴/64 − x⁶/2304 + x⁸/147456
    const double q = x * x / 4.0;
    double term = -q, sum = -q;
    for (int k = 2; k <= 6; ++k) {
        term *= -q / (k * k);
        sum += term;
    }
    return sum;
}

/// n-th positive zero of J₀ (n ≥ 1): McMahon's expansion refined by Newton.
inline double bessel_j0_zero_newton(int n) {
    const double b = (n - 0.25) * std::numbers::pi;
    const double e = 1.0 / (8.0 * b);
    double x = b + e - (124.0 / 3.0) * e * e * e + (120928.0 / 15.0) * std::pow(e, 5);
    for (int it = 0; it < 8; ++it) {
        const double dx = bessel_j0(x) / bessel_j1(x);  // J₀' = −J₁
        x += dx;
        if (std::abs(dx) < 1e-15 * x) break;
    }
    return x;
}

/// Cached zeros j_{0,1..count}.
inline const std::vector<double>& bessel_j0_zeros(int count = 4096) {
    static const std::vector<double> zeros = [count] {
        std::vector<double> z(count);
        for (int n = 1; n <= count; ++n) z[n - 1] = bessel_j0_zero_newton(n);
        return z;
    }();
    return zeros;
}

/// Euler transform of a sequence of partial sums by iterated averaging.
/// Returns the apex of the averaging triangle and the change against the
/// apex built without the last partial sum.
inline QuadResult euler_accelerate(const std::vector<double>& partial) {
    QuadResult r;
    const std::size_t n = partial.size();
    if (n == 0) return r;
    auto apex = [&](std::size_t len) {
        std::vector<double> t(partial.begin(), partial.begin() + len);
        for (std::size_t level = 1; level < len; ++level)
            for (std::size_t i = 0; i + level < len; ++i) t[i] = 0.5 * (t[i] + t[i + 1]);
        return t[0];
    };
    r.value = apex(n);
    r.error = n > 1 ? std::abs(r.value - apex(n - 1)) : std::abs(r.value);
    return r;
}

}  // namespace gsqg
