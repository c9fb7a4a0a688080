#pragma once
// Trigonometric interpolation of closed curves sampled at θ_i = 2πi/M
// (θ = ζ + π), through Eigen's FFT. Even M only; the Nyquist mode is split
// symmetrically so interpolants of real data stay real.

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace gsqg::spectral {

using cplx = std::complex<double>;

inline Eigen::FFT<double>& fft_engine() {
    thread_local Eigen::FFT<double> f;
    return f;
}

/// c_k = (1/M) Σ z_i e^{−ikθ_i}, stored in FFT order (k = 0..M/2, then negatives).
inline std::vector<cplx> coefficients(const std::vector<cplx>& z) {
    std::vector<cplx> c;
    fft_engine().fwd(c, z);
    const double s = 1.0 / static_cast<double>(z.size());
    for (auto& v : c) v *= s;
    return c;
}

inline std::vector<cplx> synthesize(const std::vector<cplx>& c) {
    std::vector<cplx> z;
    std::vector<cplx> cc(c);
    const double s = static_cast<double>(c.size());
    for (auto& v : cc) v *= s;
    fft_engine().inv(z, cc);
    return z;
}

/// Signed wavenumber of FFT slot i.
inline long wavenumber(std::size_t i, std::size_t M) {
    return i <= M / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(M);
}

/// d/dζ of the interpolant at the nodes (Nyquist mode differentiates to zero).
inline std::vector<cplx> derivative(const std::vector<cplx>& z) {
    const std::size_t M = z.size();
    auto c = coefficients(z);
    for (std::size_t i = 0; i < M; ++i) {
        const long k = wavenumber(i, M);
        c[i] *= (2 * static_cast<std::size_t>(std::abs(k)) == M) ? cplx(0) : cplx(0, static_cast<double>(k));
    }
    return synthesize(c);
}

/// Derivative of real samples.
inline std::vector<double> derivative(const std::vector<double>& f) {
    std::vector<cplx> z(f.begin(), f.end());
    auto d = derivative(z);
    std::vector<double> r(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) r[i] = d[i].real();
    return r;
}

/// Values of the interpolant on the factor-times finer grid (zero padding).
inline std::vector<cplx> upsample(const std::vector<cplx>& z, std::size_t factor) {
    const std::size_t M = z.size(), F = M * factor;
    if (factor == 1) return z;
    auto c = coefficients(z);
    std::vector<cplx> cf(F, cplx(0));
    for (std::size_t i = 0; i < M; ++i) {
        const long k = wavenumber(i, M);
        if (2 * static_cast<std::size_t>(std::abs(k)) == M) {
            cf[M / 2] += 0.5 * c[i];
            cf[F - M / 2] += 0.5 * c[i];
        } else {
            cf[k >= 0 ? static_cast<std::size_t>(k) : F - static_cast<std::size_t>(-k)] = c[i];
        }
    }
    return synthesize(cf);
}

namespace detail {
// e^{ikθ} for the FFT-ordered wavenumbers, by repeated multiplication.
inline void phases(std::size_t M, double theta, std::vector<cplx>& e) {
    e.resize(M / 2 + 1);
    const cplx e1 = std::polar(1.0, theta);
    e[0] = 1;
    for (std::size_t k = 1; k <= M / 2; ++k) e[k] = e[k - 1] * e1;
}
}  // namespace detail

/// Interpolant value at arbitrary θ from coefficients (FFT order).
inline cplx evaluate(const std::vector<cplx>& c, double theta) {
    thread_local std::vector<cplx> e;
    const std::size_t M = c.size();
    detail::phases(M, theta, e);
    cplx s = c[0];
    for (std::size_t k = 1; k < (M + 1) / 2; ++k) s += c[k] * e[k] + c[M - k] * std::conj(e[k]);
    if (M % 2 == 0) s += c[M / 2] * e[M / 2].real();
    return s;
}

/// Interpolant value and derivative at θ.
inline std::pair<cplx, cplx> evaluate_with_derivative(const std::vector<cplx>& c, double theta) {
    thread_local std::vector<cplx> e;
    const std::size_t M = c.size();
    detail::phases(M, theta, e);
    cplx s = c[0], d = 0;
    for (std::size_t k = 1; k < (M + 1) / 2; ++k) {
        const cplx ep = c[k] * e[k], em = c[M - k] * std::conj(e[k]);
        s += ep + em;
        d += cplx(0, static_cast<double>(k)) * (ep - em);
    }
    if (M % 2 == 0) s += c[M / 2] * e[M / 2].real();
    return {s, d};
}

/// Σ_k (1+k²)² |c_k|² · 2π: the H²(𝕋) norm squared of the interpolant.
inline double h2_norm_squared(const std::vector<cplx>& z) {
    const auto c = coefficients(z);
    double s = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double k = static_cast<double>(wavenumber(i, c.size()));
        s += (1 + k * k) * (1 + k * k) * std::norm(c[i]);
    }
    return 2 * std::numbers::pi * s;
}

}  // namespace gsqg::spectral
