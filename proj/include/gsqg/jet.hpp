#pragma once
// Truncated Taylor series ("jets"): c[k] = f^{(k)}(x0) / k!.
// Arithmetic on jets is exact differentiation of compositions, which is
// how every catalog multiplier gets its analytic derivatives.

#include <array>
#include <cmath>
#include <cstddef>

namespace gsqg {

template <std::size_t N>
struct Jet {
    std::array<double, N> c{};

    static Jet constant(double v) {
        Jet j;
        j.c[0] = v;
        return j;
    }
    static Jet variable(double x0) {
        Jet j;
        j.c[0] = x0;
        if constexpr (N > 1) j.c[1] = 1.0;
        return j;
    }

    double value() const { return c[0]; }
    /// k-th derivative (not the Taylor coefficient).
    double derivative(std::size_t k) const {
        double f = 1.0;
        for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
        return c[k] * f;
    }
};

template <std::size_t N>
Jet<N> operator+(Jet<N> a, const Jet<N>& b) {
    for (std::size_t i = 0; i < N; ++i) a.c[i] += b.c[i];
    return a;
}
template <std::size_t N>
Jet<N> operator-(Jet<N> a, const Jet<N>& b) {
    for (std::size_t i = 0; i < N; ++i) a.c[i] -= b.c[i];
    return a;
}
template <std::size_t N>
Jet<N> operator-(Jet<N> a) {
    for (auto& v : a.c) v = -v;
    return a;
}
template <std::size_t N>
Jet<N> operator+(Jet<N> a, double s) {
    a.c[0] += s;
    return a;
}
template <std::size_t N>
Jet<N> operator+(double s, Jet<N> a) {
    return a + s;
}
template <std::size_t N>
Jet<N> operator-(Jet<N> a, double s) {
    a.c[0] -= s;
    return a;
}
template <std::size_t N>
Jet<N> operator*(Jet<N> a, double s) {
    for (auto& v : a.c) v *= s;
    return a;
}
template <std::size_t N>
Jet<N> operator*(double s, Jet<N> a) {
    return a * s;
}
template <std::size_t N>
Jet<N> operator*(const Jet<N>& a, const Jet<N>& b) {
    Jet<N> r;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; i + j < N; ++j) r.c[i + j] += a.c[i] * b.c[j];
    return r;
}
template <std::size_t N>
Jet<N> operator/(const Jet<N>& a, const Jet<N>& b) {
    Jet<N> r;
    for (std::size_t k = 0; k < N; ++k) {
        double s = a.c[k];
        for (std::size_t j = 1; j <= k; ++j) s -= b.c[j] * r.c[k - j];
        r.c[k] = s / b.c[0];
    }
    return r;
}

template <std::size_t N>
Jet<N> exp(const Jet<N>& a) {
    // r' = a' r  =>  k r_k = sum_{j=1..k} j a_j r_{k-j}
    Jet<N> r;
    r.c[0] = std::exp(a.c[0]);
    for (std::size_t k = 1; k < N; ++k) {
        double s = 0;
        for (std::size_t j = 1; j <= k; ++j) s += static_cast<double>(j) * a.c[j] * r.c[k - j];
        r.c[k] = s / static_cast<double>(k);
    }
    return r;
}

namespace detail {
// Jet of log(g) given g's jet and an accurately computed log(g0).
template <std::size_t N>
Jet<N> log_with_value(const Jet<N>& g, double log_g0) {
    // g r' = g'  =>  k g0 r_k = k g_k - sum_{j=1..k-1} j r_j g_{k-j}
    Jet<N> r;
    r.c[0] = log_g0;
    for (std::size_t k = 1; k < N; ++k) {
        double s = static_cast<double>(k) * g.c[k];
        for (std::size_t j = 1; j < k; ++j) s -= static_cast<double>(j) * r.c[j] * g.c[k - j];
        r.c[k] = s / (static_cast<double>(k) * g.c[0]);
    }
    return r;
}
}  // namespace detail

template <std::size_t N>
Jet<N> log(const Jet<N>& a) {
    return detail::log_with_value(a, std::log(a.c[0]));
}

/// log(1 + a), accurate when a(x0) is tiny.
template <std::size_t N>
Jet<N> log1p(const Jet<N>& a) {
    return detail::log_with_value(a + 1.0, std::log1p(a.c[0]));
}

/// a^p for a(x0) > 0 by the recursion a r' = p a' r (no exp/log round trip,
/// which would cancel catastrophically in derivatives of slowly varying a).
template <std::size_t N>
Jet<N> pow(const Jet<N>& a, double p) {
    Jet<N> r;
    if (p == 0) {
        r.c[0] = 1.0;
        return r;
    }
    r.c[0] = std::pow(a.c[0], p);
    for (std::size_t k = 1; k < N; ++k) {
        double s = 0;
        for (std::size_t j = 1; j <= k; ++j)
            s += (p * static_cast<double>(j) - static_cast<double>(k - j)) * a.c[j] * r.c[k - j];
        r.c[k] = s / (static_cast<double>(k) * a.c[0]);
    }
    return r;
}

}  // namespace gsqg
