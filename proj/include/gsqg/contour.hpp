#pragma once
// Discretized patch boundaries z_k(ζ_i), ζ_i = −π + 2πi/M, evolved by contour
// dynamics with the tangential term λ_k that keeps |∂ζ z_k| uniform.
//
//   ∂t z_k = NL_k + λ_k ∂ζ z_k,
//   NL_k(ζ) = Σ_j a_j ∫ (∂z_k(ζ) − ∂z_j(ζ−η)) R(|z_k(ζ) − z_j(ζ−η)|) dη
//           + Σ_j a_j ∫ (∂z_k(ζ) − ∂z̄_j(ζ−η)) R(|z_k(ζ) − z̄_j(ζ−η)|) dη   (half plane only)
//
// Points are complex numbers x₁ + i x₂; z̄ is the reflection in the wall x₂ = 0.

#include "gsqg/errors.hpp"
#include "gsqg/kernel.hpp"
#include "gsqg/spectral.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace gsqg {

using cplx = std::complex<double>;

inline double dot(cplx a, cplx b) { return a.real() * b.real() + a.imag() * b.imag(); }
inline double cross(cplx a, cplx b) { return a.real() * b.imag() - a.imag() * b.real(); }

struct PatchContour {
    std::vector<cplx> nodes;  // counterclockwise
    double strength = 1.0;
    std::size_t size() const { return nodes.size(); }
};

enum class Domain { whole_plane, half_plane };

struct ContourSystem {
    std::vector<PatchContour> patches;
    Domain domain = Domain::whole_plane;
    bool mirror_symmetry = false;  // patches[n/2 + i] is the odd twin of patches[i]
    double time = 0;
    std::size_t step_count = 0;

    std::size_t primary_count() const { return mirror_symmetry ? patches.size() / 2 : patches.size(); }
};

/// (x₁, x₂) ↦ (−x₁, x₂) with negated strength; index reversal keeps the
/// orientation counterclockwise and maps ζ ↦ −ζ.
inline PatchContour mirror_twin(const PatchContour& p) {
    const std::size_t M = p.size();
    PatchContour t;
    t.strength = -p.strength;
    t.nodes.resize(M);
    for (std::size_t i = 0; i < M; ++i) t.nodes[i] = -std::conj(p.nodes[(M - i) % M]);
    return t;
}

inline void refresh_twins(ContourSystem& s) {
    if (!s.mirror_symmetry) return;
    const std::size_t n = s.primary_count();
    for (std::size_t i = 0; i < n; ++i) s.patches[n + i] = mirror_twin(s.patches[i]);
}

inline ContourSystem make_system(std::vector<PatchContour> primaries, Domain domain, bool mirror) {
    ContourSystem s;
    s.domain = domain;
    s.mirror_symmetry = mirror;
    s.patches = std::move(primaries);
    if (mirror) {
        const std::size_t n = s.patches.size();
        for (std::size_t i = 0; i < n; ++i) s.patches.push_back(mirror_twin(s.patches[i]));
    }
    return s;
}

// ---- geometry helpers -----------------------------------------------------------

inline double mean_spacing(const PatchContour& p) {
    double L = 0;
    for (std::size_t i = 0; i < p.size(); ++i) L += std::abs(p.nodes[(i + 1) % p.size()] - p.nodes[i]);
    return L / static_cast<double>(p.size());
}

inline double min_spacing(const PatchContour& p) {
    double h = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < p.size(); ++i) h = std::min(h, std::abs(p.nodes[(i + 1) % p.size()] - p.nodes[i]));
    return h;
}

inline double min_spacing(const ContourSystem& s) {
    double h = std::numeric_limits<double>::infinity();
    for (const auto& p : s.patches) h = std::min(h, min_spacing(p));
    return h;
}

/// Area by the trapezoid rule on ½∮(x dy − y dx) with spectral ∂ζz.
inline double area(const PatchContour& p) {
    const auto dz = spectral::derivative(p.nodes);
    double a = 0;
    for (std::size_t i = 0; i < p.size(); ++i) a += cross(p.nodes[i], dz[i]);
    return 0.5 * a * 2 * std::numbers::pi / static_cast<double>(p.size());
}

inline double param_residual(const PatchContour& p) {
    const auto dz = spectral::derivative(p.nodes);
    double A = 0;
    for (auto d : dz) A += std::norm(d);
    A /= static_cast<double>(dz.size());
    double r = 0;
    for (auto d : dz) r = std::max(r, std::abs(std::norm(d) - A) / A);
    return r;
}

inline double point_segment_distance(cplx p, cplx a, cplx b) {
    const cplx ab = b - a;
    const double L2 = std::norm(ab);
    const double t = L2 > 0 ? std::clamp(dot(p - a, ab) / L2, 0.0, 1.0) : 0.0;
    return std::abs(p - (a + t * ab));
}

inline bool segments_intersect(cplx a, cplx b, cplx c, cplx d) {
    const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
    const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}

inline double segment_distance(cplx a, cplx b, cplx c, cplx d) {
    if (segments_intersect(a, b, c, d)) return 0.0;
    return std::min({point_segment_distance(a, c, d), point_segment_distance(b, c, d),
                     point_segment_distance(c, a, b), point_segment_distance(d, a, b)});
}

/// True if two non-adjacent polygon edges cross.
inline bool self_intersects(const PatchContour& p) {
    const std::size_t M = p.size();
    for (std::size_t i = 0; i < M; ++i) {
        const cplx a = p.nodes[i], b = p.nodes[(i + 1) % M];
        const double xlo = std::min(a.real(), b.real()), xhi = std::max(a.real(), b.real());
        const double ylo = std::min(a.imag(), b.imag()), yhi = std::max(a.imag(), b.imag());
        for (std::size_t j = i + 2; j < M; ++j) {
            if (i == 0 && j == M - 1) continue;
            const cplx c = p.nodes[j], d = p.nodes[(j + 1) % M];
            if (std::max(c.real(), d.real()) < xlo || std::min(c.real(), d.real()) > xhi ||
                std::max(c.imag(), d.imag()) < ylo || std::min(c.imag(), d.imag()) > yhi)
                continue;
            if (segments_intersect(a, b, c, d)) return true;
        }
    }
    return false;
}

/// δ[z]: node-pair minimum between distinct patches, refined by segment distances
/// around the closest pair.
inline double patch_gap(const ContourSystem& s) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = s.patches.size();
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            const auto& P = s.patches[a].nodes;
            const auto& Q = s.patches[b].nodes;
            double d2 = std::numeric_limits<double>::infinity();
            std::size_t bi = 0, bj = 0;
            for (std::size_t i = 0; i < P.size(); ++i)
                for (std::size_t j = 0; j < Q.size(); ++j) {
                    const double v = std::norm(P[i] - Q[j]);
                    if (v < d2) d2 = v, bi = i, bj = j;
                }
            double d = std::sqrt(d2);
            for (int di = -2; di <= 1; ++di)
                for (int dj = -2; dj <= 1; ++dj) {
                    const std::size_t i0 = (bi + P.size() + di) % P.size(), j0 = (bj + Q.size() + dj) % Q.size();
                    d = std::min(d, segment_distance(P[i0], P[(i0 + 1) % P.size()], Q[j0], Q[(j0 + 1) % Q.size()]));
                }
            best = std::min(best, d);
        }
    return best;
}

// ---- shapes -----------------------------------------------------------------------

enum class ShapeKind { circle, ellipse, rounded_rectangle, scenario_omega0 };

inline ShapeKind shape_kind_from_string(const std::string& s) {
    if (s == "circle") return ShapeKind::circle;
    if (s == "ellipse") return ShapeKind::ellipse;
    if (s == "rounded_rectangle") return ShapeKind::rounded_rectangle;
    if (s == "scenario_omega0") return ShapeKind::scenario_omega0;
    throw ConfigError("unknown shape kind '" + s + "'");
}

inline PatchContour reparametrize(const PatchContour& p);

namespace detail {
// C^∞ step on [0,1]: f(u)/(f(u)+f(1−u)) with f(u) = e^{−1/u}.
inline double smooth_step(double u) {
    if (u <= 0) return 0;
    if (u >= 1) return 1;
    const double a = std::exp(-1 / u), b = std::exp(-1 / (1 - u));
    return a / (a + b);
}

// ∫₀^s e^{iπψ(t/ℓ)/2} dt: a corner whose tangent turns by π/2 with C^∞ curvature.
inline cplx corner_offset(double s, double ell) {
    if (s <= 0) return 0;
    // composite 30-point Gauss–Legendre on pieces no longer than ℓ/16
    const int n = std::max(1, static_cast<int>(std::ceil(16 * s / ell)));
    const double h = s / n;
    cplx acc = 0;
    for (int k = 0; k < n; ++k)
        acc += boost::math::quadrature::gauss<double, 30>::integrate(
            [ell](double t) { return std::polar(1.0, 0.5 * std::numbers::pi * smooth_step(t / ell)); }, k * h,
            (k + 1) * h);
    const double re = acc.real(), ii = acc.imag();
    return {re, ii};
}

// Corner extent per unit corner length, ∫₀¹ cos(πψ/2) = ∫₀¹ sin(πψ/2).
inline double corner_footprint() {
    static const double k = corner_offset(1.0, 1.0).real();
    return k;
}
}  // namespace detail

/// Equal-arclength nodes on the boundary of [x0,x1]×[y0,y1], starting at the
/// middle of the bottom edge. Each corner occupies an rc×rc square and turns with
/// C^∞ curvature, so the trigonometric interpolant converges spectrally once the
/// corners are resolved.
inline PatchContour rounded_rectangle(double x0, double x1, double y0, double y1, double rc, std::size_t M) {
    const double W = x1 - x0, H = y1 - y0;
    if (!(rc > 0)) throw ConfigError("rounded_rectangle: corner radius must be > 0");
    if (!(W > 2 * rc) || !(H > 2 * rc)) throw ConfigError("rounded_rectangle: sides must exceed twice the corner radius");
    const double ell = rc / detail::corner_footprint();
    struct Piece {
        double len;
        cplx start, dir;
        bool corner;
    };
    const cplx E(1, 0), N(0, 1);
    std::vector<Piece> pieces = {
        {W / 2 - rc, {x0 + W / 2, y0}, E, false},
        {ell, {x1 - rc, y0}, E, true},
        {H - 2 * rc, {x1, y0 + rc}, N, false},
        {ell, {x1, y1 - rc}, N, true},
        {W - 2 * rc, {x1 - rc, y1}, -E, false},
        {ell, {x0 + rc, y1}, -E, true},
        {H - 2 * rc, {x0, y1 - rc}, -N, false},
        {ell, {x0, y0 + rc}, -N, true},
        {W / 2 - rc, {x0 + rc, y0}, E, false},
    };
    double L = 0;
    for (const auto& q : pieces) L += q.len;
    PatchContour p;
    p.nodes.resize(M);
    for (std::size_t i = 0; i < M; ++i) {
        double s = L * static_cast<double>(i) / static_cast<double>(M);
        for (const auto& q : pieces) {
            if (s <= q.len || &q == &pieces.back()) {
                p.nodes[i] = q.start + q.dir * (q.corner ? detail::corner_offset(s, ell) : cplx(s));
                break;
            }
            s -= q.len;
        }
    }
    return p;
}

inline void check_node_count(std::size_t M) {
    if (M < 32 || M % 2 != 0) throw ConfigError("contour: M must be even and >= 32");
}

inline PatchContour circle(cplx centre, double r, std::size_t M) {
    check_node_count(M);
    if (!(r > 0)) throw ConfigError("circle: radius must be > 0");
    PatchContour p;
    p.nodes.resize(M);
    for (std::size_t i = 0; i < M; ++i) p.nodes[i] = centre + std::polar(r, -std::numbers::pi + 2 * std::numbers::pi * i / M);
    return p;
}

inline PatchContour ellipse(cplx centre, double a, double b, std::size_t M) {
    check_node_count(M);
    if (!(a > 0) || !(b > 0)) throw ConfigError("ellipse: semi-axes must be > 0");
    PatchContour p;
    p.nodes.resize(M);
    for (std::size_t i = 0; i < M; ++i) {
        const double t = -std::numbers::pi + 2 * std::numbers::pi * i / M;
        p.nodes[i] = centre + cplx(a * std::cos(t), b * std::sin(t));
    }
    for (int it = 0; it < 3; ++it) p = reparametrize(p);
    return p;
}

/// Ω₀ midway between Ω₂ = (2ε,3c*)×(0,3c*) and Ω₁ = (ε,4c*)×(0,4c*), flat on the wall.
inline PatchContour scenario_omega0(double eps, double c_star, std::size_t M, double corner = 0) {
    check_node_count(M);
    if (!(eps > 0) || !(c_star > eps)) throw ConfigError("scenario_omega0: need 0 < eps < c_star");
    return rounded_rectangle(1.5 * eps, 3.5 * c_star, 0.0, 3.5 * c_star, corner > 0 ? corner : eps / 4, M);
}

inline double param_or(const std::map<std::string, double>& p, const std::string& k, double d) {
    auto it = p.find(k);
    return it == p.end() ? d : it->second;
}

inline PatchContour init_shape(ShapeKind kind, const std::map<std::string, double>& p, std::size_t M) {
    check_node_count(M);
    const cplx c(param_or(p, "cx", 0), param_or(p, "cy", 0));
    switch (kind) {
        case ShapeKind::circle: return circle(c, param_or(p, "radius", 1), M);
        case ShapeKind::ellipse: return ellipse(c, param_or(p, "a", 2), param_or(p, "b", 1), M);
        case ShapeKind::rounded_rectangle:
            return rounded_rectangle(param_or(p, "x0", -1), param_or(p, "x1", 1), param_or(p, "y0", -1),
                                     param_or(p, "y1", 1), param_or(p, "corner", 0), M);
        case ShapeKind::scenario_omega0:
            return scenario_omega0(param_or(p, "epsilon", 0), param_or(p, "c_star", 0), M, param_or(p, "corner", 0));
    }
    throw ConfigError("unknown shape");
}

// ---- reparametrization ---------------------------------------------------------

/// Equal-arclength resampling of the trigonometric interpolant, node 0 fixed.
inline PatchContour reparametrize(const PatchContour& p) {
    const std::size_t M = p.size();
    const auto c = spectral::coefficients(p.nodes);
    // speed |z′(θ)| on a 4× grid, then its Fourier antiderivative
    const std::size_t F = 4 * M;
    const auto dz_fine = spectral::upsample(spectral::derivative(p.nodes), 4);
    std::vector<cplx> speed(F);
    for (std::size_t i = 0; i < F; ++i) speed[i] = std::abs(dz_fine[i]);
    auto sc = spectral::coefficients(speed);
    const double mean_speed = sc[0].real();
    const double L = 2 * std::numbers::pi * mean_speed;
    std::vector<cplx> anti(F, 0.0);  // periodic part of ∫ speed
    for (std::size_t i = 1; i < F; ++i) {
        const long k = spectral::wavenumber(i, F);
        if (2 * static_cast<std::size_t>(std::abs(k)) == F) continue;
        anti[i] = sc[i] / cplx(0, static_cast<double>(k));
    }
    const double base = spectral::evaluate(anti, 0.0).real();
    auto arclength = [&](double th) { return mean_speed * th + spectral::evaluate(anti, th).real() - base; };

    PatchContour out;
    out.strength = p.strength;
    out.nodes.resize(M);
    out.nodes[0] = p.nodes[0];
    double lo = 0;
    for (std::size_t i = 1; i < M; ++i) {
        const double target = L * static_cast<double>(i) / static_cast<double>(M);
        // safeguarded Newton on the increasing map θ ↦ s(θ), bracket [lo, 2π]
        double a = lo, b = 2 * std::numbers::pi;
        double th = std::clamp(2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(M), a, b);
        for (int it = 0; it < 60; ++it) {
            const double f = arclength(th) - target;
            if (f > 0) b = th; else a = th;
            const double speed = std::abs(spectral::evaluate_with_derivative(c, th).second);
            double next = th - f / speed;
            if (!(next > a && next < b)) next = 0.5 * (a + b);
            const bool done = std::abs(next - th) < 1e-15 || b - a < 1e-15;
            th = next;
            if (done) break;
        }
        lo = th;
        out.nodes[i] = spectral::evaluate(c, th);
    }
    if (self_intersects(out)) throw NumericError("reparametrize: resampled contour self-intersects");
    return out;
}

// ---- right-hand side --------------------------------------------------------------

struct RhsOptions {
    bool tangential = true;          // include λ_k ∂ζ z_k
    std::size_t wall_upsample = 4;   // source refinement for targets within one spacing of the wall
    unsigned threads = 1;
    bool contact_check = true;       // ContactError when δ[z] < 2 · min spacing
};

struct RhsResult {
    std::vector<std::vector<cplx>> velocity;  // per patch, per node
    std::vector<std::vector<cplx>> nl;
};

namespace detail {
struct SourceCurve {
    std::vector<cplx> z, dz;
    double a = 0;
    double w = 0;  // quadrature weight 2π/M
};

// ∫_a^b (∂z − conj ∂z(θ)) R(|z − conj z(θ)|) dθ on the interpolant, with panels
// graded geometrically towards the closest point θ* (located near θ0 ± w).
template <class R2>
cplx wall_window(const std::vector<cplx>& cz, const std::vector<cplx>& cdz, cplx z, cplx dz, double a, double b,
                 double theta0, double w, R2& r2) {
    auto dist2 = [&](double th) { return std::norm(z - std::conj(spectral::evaluate(cz, th))); };
    double lo = theta0 - w, hi = theta0 + w;
    const double g = 0.5 * (std::sqrt(5.0) - 1);
    double c = hi - g * (hi - lo), d = lo + g * (hi - lo), fc = dist2(c), fd = dist2(d);
    for (int it = 0; it < 60 && hi - lo > 1e-14 * w; ++it) {
        if (fc < fd)
            hi = d, d = c, fd = fc, c = hi - g * (hi - lo), fc = dist2(c);
        else
            lo = c, c = d, fc = fd, d = lo + g * (hi - lo), fd = dist2(d);
    }
    const double ts = std::clamp(0.5 * (lo + hi), a, b);
    // the peak has width ~ distance / |∂z|; grade down to a tenth of it
    const double width = std::max(std::sqrt(std::min(fc, fd)) / std::abs(dz), 1e-6 * w);
    using Q = boost::math::quadrature::gauss<double, 15>;
    auto f = [&](double th) {
        const cplx zt = spectral::evaluate(cz, th), dzt = spectral::evaluate(cdz, th);
        return (dz - std::conj(dzt)) * r2(std::norm(z - std::conj(zt)));
    };
    cplx sum = 0;
    for (int side : {-1, 1}) {
        const double len = side < 0 ? ts - a : b - ts;
        double outer = len;
        while (outer > 0) {
            const double inner = outer > 0.1 * width ? outer / 3 : 0.0;
            const double p = ts + side * inner, q = ts + side * outer;
            sum += Q::integrate(f, std::min(p, q), std::max(p, q));
            outer = inner;
        }
    }
    return sum;
}

// χ(s) over base-cell offsets: 1 for |s| ≤ 4, 0 beyond 10, C^∞ in between.
constexpr double blend_inner = 4, blend_outer = 10;
inline double blend(double s) {
    return 1 - smooth_step((std::abs(s) - blend_inner) / (blend_outer - blend_inner));
}

inline double bbox_diameter(const ContourSystem& s) {
    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
    for (const auto& p : s.patches)
        for (auto z : p.nodes) {
            xlo = std::min(xlo, z.real()), xhi = std::max(xhi, z.real());
            ylo = std::min(ylo, z.imag()), yhi = std::max(yhi, z.imag());
        }
    if (s.domain == Domain::half_plane) ylo = std::min(ylo, -yhi), yhi = std::max(yhi, -ylo);
    return std::hypot(xhi - xlo, yhi - ylo);
}
}  // namespace detail

inline RhsResult compute_rhs(const ContourSystem& sys, const KernelTable& table, const RhsOptions& opt = {}) {
    const std::size_t np = sys.patches.size();
    for (const auto& p : sys.patches)
        for (auto z : p.nodes)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw NumericError("compute_rhs: NaN node");
    const bool half = sys.domain == Domain::half_plane;

    std::vector<detail::SourceCurve> src(np), fine;
    for (std::size_t j = 0; j < np; ++j) {
        src[j].z = sys.patches[j].nodes;
        src[j].dz = spectral::derivative(src[j].z);
        src[j].a = sys.patches[j].strength;
        src[j].w = 2 * std::numbers::pi / static_cast<double>(src[j].z.size());
    }
    const double hmin = min_spacing(sys);
    const double diam = detail::bbox_diameter(sys);
    if (table.rho_min() > hmin / 10 || table.rho_max() < 4 * diam) {
        std::ostringstream os;
        os << "compute_rhs: kernel table [" << table.rho_min() << ", " << table.rho_max() << "] does not cover ["
           << hmin / 10 << ", " << 4 * diam << "]";
        throw RangeError(os.str());
    }
    if (opt.contact_check && np > 1) {
        const double gap = patch_gap(sys);
        if (gap < 2 * hmin) {
            std::ostringstream os;
            os << "contact imminent: delta=" << gap << " < 2*spacing=" << 2 * hmin << " at t=" << sys.time;
            throw ContactError(os.str());
        }
    }

    const std::size_t targets = sys.primary_count();
    std::vector<double> spacing(np);
    bool need_fine = false;
    for (std::size_t k = 0; k < np; ++k) {
        spacing[k] = mean_spacing(sys.patches[k]);
        if (half && opt.wall_upsample > 1 && k < targets)
            for (auto z : sys.patches[k].nodes) need_fine = need_fine || z.imag() < spacing[k];
    }
    std::vector<std::vector<cplx>> cz, cdz;  // coefficients for the near-wall windows
    if (need_fine) {
        cz.resize(np);
        cdz.resize(np);
        for (std::size_t j = 0; j < np; ++j) {
            cz[j] = spectral::coefficients(src[j].z);
            cdz[j] = spectral::coefficients(src[j].dz);
        }
        fine.resize(np);
        for (std::size_t j = 0; j < np; ++j) {
            fine[j].z = spectral::upsample(src[j].z, opt.wall_upsample);
            fine[j].dz = spectral::upsample(src[j].dz, opt.wall_upsample);
            fine[j].a = src[j].a;
            fine[j].w = src[j].w / static_cast<double>(opt.wall_upsample);
        }
    }

    auto R2 = [&](double d2) { return table.R_log(0.5 * std::log(d2), true); };

    RhsResult res;
    res.nl.resize(np);
    res.velocity.resize(np);
    std::vector<std::size_t> offset(targets + 1, 0);
    for (std::size_t k = 0; k < targets; ++k) {
        offset[k + 1] = offset[k] + src[k].z.size();
        res.nl[k].resize(src[k].z.size());
    }

    parallel_for(offset.back(), worker_count(opt.threads), [&](std::size_t flat) {
        const std::size_t k = static_cast<std::size_t>(std::upper_bound(offset.begin(), offset.end(), flat) -
                                                        offset.begin()) - 1;
        const std::size_t i = flat - offset[k];
        const cplx z = src[k].z[i], dz = src[k].dz[i];
        const bool near_wall = need_fine && z.imag() < spacing[k];
        cplx sumR = 0, sumV = 0, window = 0;
        auto direct = [&](cplx zs, cplx dzs, double wt) {
            const double R = R2(std::norm(z - zs));
            sumR += wt * R;
            sumV += wt * dzs * R;
        };
        auto conj_term = [&](cplx zs, cplx dzs, double wt) {
            const double R = R2(std::norm(z - std::conj(zs)));
            sumR += wt * R;
            sumV += wt * std::conj(dzs) * R;
        };
        // the reflected self node of a target on the wall: cell average of
        // R(√(4y² + |∂z|²η²)) over |η| ≤ w/2, η = (w/2)t²
        const bool self_on_wall = half && 4 * z.imag() * z.imag() < std::pow(1e-3 * spacing[k], 2);
        auto conj_self = [&](cplx dzs, double w, double wt) {
            const double y = z.imag(), A = std::norm(dz);
            double avg = 0;
            for (const auto& [t, gw] : detail::gl8()) {
                const double eta = 0.5 * w * t * t;
                avg += 2 * gw * t * R2(4 * y * y + A * eta * eta);
            }
            sumR += wt * avg;
            sumV += wt * std::conj(dzs) * avg;
        };
        for (std::size_t j = 0; j < np; ++j) {
            const auto& s = src[j];
            const std::size_t Mj = s.z.size();
            const double aw = s.a * s.w;
            if (!near_wall) {
                for (std::size_t l = 0; l < Mj; ++l) {
                    const bool self = j == k && l == i;
                    if (!self) direct(s.z[l], s.dz[l], aw);
                    if (!half) continue;
                    if (self && self_on_wall)
                        conj_self(s.dz[l], s.w, aw);
                    else
                        conj_term(s.z[l], s.dz[l], aw);
                }
                continue;
            }
            // Near the wall, sources within a few cells of the closest points are taken
            // from the upsampled curve; a C^∞ partition of unity χ blends the two sums.
            const std::size_t up = opt.wall_upsample;
            auto closest = [&](bool reflect) {
                std::size_t best = 0;
                double bd = std::numeric_limits<double>::infinity();
                for (std::size_t l = 0; l < Mj; ++l) {
                    const double n2 = std::norm(z - (reflect ? std::conj(s.z[l]) : s.z[l]));
                    if (n2 < bd) bd = n2, best = l;
                }
                return std::pair{best, std::sqrt(bd)};
            };
            const double reach = 3 * spacing[k];
            const auto [cd, dd] = j == k ? std::pair{i, 0.0} : closest(false);
            const auto [cc, dc] = closest(true);
            const bool use_d = dd < reach, use_c = dc < reach;
            auto offset = [&](double l, double c, double period) { return std::remainder(l - c, period); };
            for (std::size_t l = 0; l < Mj; ++l) {
                const double L = static_cast<double>(l), P = static_cast<double>(Mj);
                const double wd = use_d ? 1 - detail::blend(offset(L, static_cast<double>(cd), P)) : 1.0;
                const double wc = use_c ? 1 - detail::blend(offset(L, static_cast<double>(cc), P)) : 1.0;
                if (wd > 0 && (j != k || l != i)) direct(s.z[l], s.dz[l], aw * wd);
                if (wc > 0) conj_term(s.z[l], s.dz[l], aw * wc);
            }
            const auto& f = fine[j];
            const std::size_t F = f.z.size();
            const double afw = f.a * f.w;
            const long span = static_cast<long>(detail::blend_outer * static_cast<double>(up));
            auto fidx = [&](std::size_t c, long off) {
                return static_cast<std::size_t>((static_cast<long>(c * up) + off + static_cast<long>(F)) % static_cast<long>(F));
            };
            const std::size_t self = j == k ? i * up : std::size_t(-1);
            if (use_d)
                for (long off = -span + 1; off < span; ++off) {
                    const std::size_t q = fidx(cd, off);
                    if (q != self) direct(f.z[q], f.dz[q], afw * detail::blend(static_cast<double>(off) / up));
                }
            if (!use_c) continue;
            // A target at height 0 < y < spacing sees the reflected curve pass within
            // ~2y, a peak the trapezoid rule cannot resolve: the cells around the
            // closest reflected point are integrated on the interpolant instead.
            long w_lo = 1, w_hi = 0;
            if (z.imag() >= 1e-3 * spacing[k]) {
                long best = 0;
                double bd = std::numeric_limits<double>::infinity();
                for (long off = -static_cast<long>(up); off <= static_cast<long>(up); ++off) {
                    const double n2 = std::norm(z - std::conj(f.z[fidx(cc, off)]));
                    if (n2 < bd) bd = n2, best = off;
                }
                const long W = 2 * static_cast<long>(up);
                w_lo = best - W, w_hi = best + W;
                const double centre = static_cast<double>(cc) * s.w + static_cast<double>(best) * f.w;
                const double a = centre - (static_cast<double>(W) + 0.5) * f.w;
                const double b = centre + (static_cast<double>(W) + 0.5) * f.w;
                window += f.a * detail::wall_window(cz[j], cdz[j], z, dz, a, b, centre, f.w, R2);
            }
            for (long off = -span + 1; off < span; ++off) {
                if (off >= w_lo && off <= w_hi) continue;
                const std::size_t q = fidx(cc, off);
                const double chi = detail::blend(static_cast<double>(off) / up);
                if (q == self && self_on_wall)
                    conj_self(f.dz[q], f.w, afw * chi);
                else
                    conj_term(f.z[q], f.dz[q], afw * chi);
            }
        }
        res.nl[k][i] = dz * sumR - sumV + window;
    });

    for (std::size_t k = 0; k < targets; ++k) {
        const std::size_t M = src[k].z.size();
        auto& v = res.velocity[k];
        v = res.nl[k];
        if (!opt.tangential) continue;
        const auto dnl = spectral::derivative(res.nl[k]);
        double A = 0;
        for (auto d : src[k].dz) A += std::norm(d);
        A /= static_cast<double>(M);
        std::vector<cplx> s(M);
        for (std::size_t i = 0; i < M; ++i) s[i] = dot(src[k].dz[i], dnl[i]) / A;
        // λ′ = mean(s) − s with λ(−π) = 0, integrated spectrally
        auto c = spectral::coefficients(s);
        c[0] = 0;
        for (std::size_t q = 1; q < M; ++q) {
            const long kk = spectral::wavenumber(q, M);
            c[q] = (2 * static_cast<std::size_t>(std::abs(kk)) == M) ? cplx(0) : -c[q] / cplx(0, static_cast<double>(kk));
        }
        const auto lam = spectral::synthesize(c);
        for (std::size_t i = 0; i < M; ++i) v[i] += (lam[i].real() - lam[0].real()) * src[k].dz[i];
    }
    // Nodes on the wall slide along it: their u₂ is only the tangential part along a
    // spectral tangent tilted by the ringing of nearby corners.
    if (half)
        for (std::size_t k = 0; k < targets; ++k)
            for (std::size_t i = 0; i < res.velocity[k].size(); ++i)
                if (src[k].z[i].imag() == 0) res.velocity[k][i].imag(0.0);
    if (sys.mirror_symmetry) {
        for (std::size_t k = 0; k < targets; ++k) {
            const std::size_t M = res.velocity[k].size();
            auto& tv = res.velocity[targets + k];
            auto& tn = res.nl[targets + k];
            tv.resize(M);
            tn.resize(M);
            for (std::size_t i = 0; i < M; ++i) {
                tv[i] = -std::conj(res.velocity[k][(M - i) % M]);
                tn[i] = -std::conj(res.nl[k][(M - i) % M]);
            }
        }
    }
    for (const auto& v : res.velocity)
        for (auto x : v)
            if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) throw NumericError("compute_rhs: NaN velocity");
    return res;
}

// ---- time stepping ------------------------------------------------------------------

struct StepOptions {
    RhsOptions rhs;
    double cfl_factor = 0.5;
    std::size_t reparam_every = 16;  // 0 disables cadence-based resampling
    double reparam_residual = 1e-4;
    bool check_cfl = true;
};

inline double max_speed(const RhsResult& r) {
    double s = 0;
    for (const auto& v : r.velocity)
        for (auto x : v) s = std::max(s, std::abs(x));
    return s;
}

inline double cfl_limit(const ContourSystem& sys, const RhsResult& r, double cfl_factor) {
    const double s = max_speed(r);
    return s > 0 ? cfl_factor * min_spacing(sys) / s : std::numeric_limits<double>::infinity();
}

/// Classical RK4 on the primary patches; twins are rebuilt from their primaries
/// at every stage, so mirror symmetry is exact. k1 may be supplied when the caller
/// already evaluated compute_rhs(sys) with the same options.
inline ContourSystem step(const ContourSystem& sys, const KernelTable& table, double dt, const StepOptions& opt = {},
                          const RhsResult* k1_given = nullptr) {
    const std::size_t n = sys.primary_count();
    auto eval = [&](const ContourSystem& s) { return compute_rhs(s, table, opt.rhs); };
    auto shifted = [&](const ContourSystem& base, const RhsResult& k, double h) {
        ContourSystem s = base;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t i = 0; i < s.patches[p].size(); ++i) s.patches[p].nodes[i] += h * k.velocity[p][i];
        refresh_twins(s);
        return s;
    };
    const RhsResult k1 = k1_given ? *k1_given : eval(sys);
    if (opt.check_cfl) {
        const double lim = cfl_limit(sys, k1, opt.cfl_factor);
        if (std::abs(dt) > lim) {
            std::ostringstream os;
            os << "CFL violation: |dt|=" << std::abs(dt) << " exceeds " << lim << "; use dt <= " << lim;
            throw NumericError(os.str());
        }
    }
    const auto k2 = eval(shifted(sys, k1, dt / 2));
    const auto k3 = eval(shifted(sys, k2, dt / 2));
    const auto k4 = eval(shifted(sys, k3, dt));
    ContourSystem out = sys;
    for (std::size_t p = 0; p < n; ++p) {
        auto& z = out.patches[p].nodes;
        const double wall_tol = 0.25 * min_spacing(sys.patches[p]);
        for (std::size_t i = 0; i < z.size(); ++i) {
            z[i] += dt / 6 * (k1.velocity[p][i] + 2.0 * k2.velocity[p][i] + 2.0 * k3.velocity[p][i] + k4.velocity[p][i]);
            if (sys.domain == Domain::half_plane && z[i].imag() < 0) {
                if (z[i].imag() < -wall_tol) throw NumericError("step: node crossed the wall x2 = 0");
                z[i].imag(0.0);  // corner nodes sliding onto the wall land on it
            }
        }
    }
    out.time = sys.time + dt;
    out.step_count = sys.step_count + 1;
    if (opt.reparam_every > 0) {
        for (std::size_t p = 0; p < n; ++p) {
            const bool due = out.step_count % opt.reparam_every == 0;
            if (due || param_residual(out.patches[p]) > opt.reparam_residual)
                out.patches[p] = reparametrize(out.patches[p]);
        }
    }
    refresh_twins(out);
    return out;
}

// ---- diagnostics ----------------------------------------------------------------------

struct Diagnostics {
    double h2_norm = 0;  // Σ_k ‖z_k‖_{H²}
    std::vector<double> arc_chord_sup, area;
    double gap = std::numeric_limits<double>::infinity();  // δ[z]
    double gap_inv = 0;
    double w_norm = 0;
    double param_residual = 0;
    bool finite = true;
};

inline double arc_chord_sup(const PatchContour& p) {
    const std::size_t M = p.size();
    const auto dz = spectral::derivative(p.nodes);
    double best = 0;
    for (std::size_t i = 0; i < M; ++i) {
        best = std::max(best, 1 / std::abs(dz[i]));
        for (std::size_t j = i + 1; j < M; ++j) {
            const std::size_t d = std::min(j - i, M - (j - i));
            const double eta = 2 * std::numbers::pi * static_cast<double>(d) / static_cast<double>(M);
            best = std::max(best, eta / std::abs(p.nodes[i] - p.nodes[j]));
        }
    }
    return best;
}

inline Diagnostics diagnostics(const ContourSystem& s) {
    Diagnostics d;
    double h2sq = 0;
    for (const auto& p : s.patches) {
        const double n2 = spectral::h2_norm_squared(p.nodes);
        h2sq += n2;
        d.h2_norm += std::sqrt(n2);
        d.arc_chord_sup.push_back(arc_chord_sup(p));
        d.area.push_back(area(p));
        d.param_residual = std::max(d.param_residual, param_residual(p));
    }
    if (s.patches.size() > 1) d.gap = patch_gap(s);
    d.gap_inv = s.patches.size() > 1 ? 1 / d.gap : 0.0;
    d.w_norm = h2sq + d.gap_inv;
    for (double f : d.arc_chord_sup) d.w_norm += f;
    d.finite = std::isfinite(d.w_norm);
    return d;
}

}  // namespace gsqg
