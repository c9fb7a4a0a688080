#pragma once
// Pointwise velocity of piecewise-constant θ,
//
//   u(x) = ∫ (x−y)^⊥ G(|x−y|)/|x−y|² θ(y) dy,   x^⊥ = (x₂, −x₁),
//
// with the odd image in x₂ on the half plane and, optionally, the odd twin in x₁.
// In polar coordinates about x the radial integral is P(ρ) = ∫₀^ρ G, so each convex
// piece met by the ray in direction e(φ) on [ρa, ρb] contributes
//
//   u(x) = −∫ dφ e^⊥(φ) [P(ρb) − P(ρa)],
//
// leaving a one-dimensional integral in φ that is smooth between the directions of
// vertices and tangents. Also the half-plane kernels K₁, K₂ of the odd-in-x₁ setting and
// their bad/good splits.

#include "gsqg/contour.hpp"
#include "gsqg/errors.hpp"
#include "gsqg/kernel.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gsqg {

/// {y : n·y ≤ c}.
struct HalfPlane {
    cplx n;
    double c;
};

/// Convex piece: intersection of half planes, optionally with a disk, and weight w.
struct RegionComponent {
    std::vector<HalfPlane> sides;
    std::vector<cplx> vertices;  // polygon corners (empty for a disk)
    std::optional<std::pair<cplx, double>> disk;  // centre, radius
    double weight = 1.0;
};

struct RegionSet {
    std::vector<RegionComponent> components;
    bool odd_in_x1 = false;  // add the twin reflected in x₁ = 0 with opposite sign

    RegionSet& add_polygon(std::vector<cplx> v, double w = 1.0);
    RegionSet& add_rectangle(double x0, double x1, double y0, double y1, double w = 1.0) {
        if (!(x1 > x0) || !(y1 > y0)) throw ConfigError("region: rectangle needs x0 < x1 and y0 < y1");
        return add_polygon({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, w);
    }
    RegionSet& add_triangle(cplx a, cplx b, cplx c, double w = 1.0) { return add_polygon({a, b, c}, w); }
    RegionSet& add_disk(cplx centre, double r, double w = 1.0) {
        if (!(r > 0)) throw ConfigError("region: disk radius must be > 0");
        RegionComponent c;
        c.disk = {{centre, r}};
        c.weight = w;
        components.push_back(c);
        return *this;
    }

    double linf() const;
    double l1() const;
};

namespace detail {

inline std::vector<cplx> bbox_corners(const RegionComponent& c) {
    if (c.disk) {
        const auto [z, r] = *c.disk;
        return {z + cplx(-r, -r), z + cplx(r, -r), z + cplx(r, r), z + cplx(-r, r)};
    }
    return c.vertices;
}

inline double polygon_area(const std::vector<cplx>& v) {
    double a = 0;
    for (std::size_t i = 0; i < v.size(); ++i) a += cross(v[i], v[(i + 1) % v.size()]);
    return 0.5 * a;
}

// Separating-axis test on the interiors (shared edges do not count as overlap).
inline bool interiors_overlap(const RegionComponent& a, const RegionComponent& b) {
    const double tol = 1e-12;
    if (a.disk && b.disk) {
        const auto [za, ra] = *a.disk;
        const auto [zb, rb] = *b.disk;
        return std::abs(za - zb) < ra + rb - tol;
    }
    if (a.disk || b.disk) {
        const auto& d = a.disk ? a : b;
        const auto& p = a.disk ? b : a;
        const auto [z, r] = *d.disk;
        bool inside = true;
        double dist = 1e300;
        for (std::size_t i = 0; i < p.vertices.size(); ++i) {
            const cplx u = p.vertices[i], v = p.vertices[(i + 1) % p.vertices.size()];
            if (cross(v - u, z - u) < 0) inside = false;
            dist = std::min(dist, point_segment_distance(z, u, v));
        }
        return inside || dist < r - tol;
    }
    auto separated = [&](const std::vector<cplx>& P, const std::vector<cplx>& Q) {
        for (std::size_t i = 0; i < P.size(); ++i) {
            const cplx e = P[(i + 1) % P.size()] - P[i];
            const cplx n(e.imag(), -e.real());  // outward for counterclockwise P
            const double cmax = dot(n, P[i]);
            double qmin = 1e300;
            for (auto q : Q) qmin = std::min(qmin, dot(n, q));
            if (qmin >= cmax - tol * std::abs(n)) return true;
        }
        return false;
    };
    return !separated(a.vertices, b.vertices) && !separated(b.vertices, a.vertices);
}

inline RegionComponent reflect(const RegionComponent& c, bool in_x1) {
    auto R = [in_x1](cplx z) { return in_x1 ? -std::conj(z) : std::conj(z); };
    RegionComponent r;
    r.weight = -c.weight;
    for (const auto& h : c.sides) r.sides.push_back({R(h.n), h.c});
    for (auto v : c.vertices) r.vertices.push_back(R(v));
    std::reverse(r.vertices.begin(), r.vertices.end());
    if (c.disk) r.disk = {{R(c.disk->first), c.disk->second}};
    return r;
}

// [t_lo, t_hi] of the ray x + t e (t ≥ 0) inside the component; empty if t_hi ≤ t_lo.
// If given, slop receives the rounding error bound of each endpoint, for a
// direction e known to within dir_err radians.
inline std::pair<double, double> ray_interval(const RegionComponent& c, cplx x, cplx e,
                                              std::pair<double, double>* slop = nullptr, double dir_err = 0) {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    double lo = 0, hi = std::numeric_limits<double>::infinity(), dlo = 0, dhi = 0;
    for (const auto& h : c.sides) {
        const double a = dot(h.n, e), b = h.c - dot(h.n, x);
        const double d = (4 * eps * (std::abs(h.c) + std::abs(h.n) * std::abs(x)) +
                          std::abs(b / a) * std::abs(h.n) * (dir_err + 2 * eps)) / std::abs(a);
        if (a > 0) {
            if (b / a < hi) hi = b / a, dhi = d;
        } else if (a < 0) {
            if (b / a > lo) lo = b / a, dlo = d;
        } else if (b < 0)
            return {0, 0};
    }
    if (c.disk) {
        const auto [z, r] = *c.disk;
        const cplx d = x - z;
        const double B = dot(e, d), C = std::norm(d) - r * r, disc = B * B - C;
        if (disc <= 0) return {0, 0};
        const double s = std::sqrt(disc), ad = std::abs(d);
        const double ds = (8 * eps * (ad + r) * (ad + r) + 2 * ad * ad * (dir_err + 2 * eps)) / s;
        if (-B - s > lo) lo = -B - s, dlo = ds;
        if (-B + s < hi) hi = -B + s, dhi = ds;
    }
    if (slop) *slop = {dlo, dhi};
    return {lo, hi};
}

inline bool feasible(const RegionComponent& c, cplx y, double scale) {
    const double tol = 1e-10 * scale;
    for (const auto& h : c.sides)
        if (dot(h.n, y) > h.c + tol * std::abs(h.n)) return false;
    if (c.disk && std::abs(y - c.disk->first) > c.disk->second + tol) return false;
    return true;
}

// Directions from x at which the ray enters, leaves or grazes a corner of the piece.
inline void breakpoints(const RegionComponent& c, cplx x, std::vector<double>& out) {
    double scale = std::abs(x);
    for (auto v : bbox_corners(c)) scale = std::max(scale, std::abs(v));
    auto add_point = [&](cplx p) {
        if (std::abs(p - x) > 1e-14 * scale && feasible(c, p, scale)) out.push_back(std::arg(p - x));
    };
    for (std::size_t i = 0; i < c.sides.size(); ++i) {
        const auto& a = c.sides[i];
        const cplx dir(-a.n.imag(), a.n.real());
        out.push_back(std::arg(dir));  // matters when x lies on the line
        out.push_back(std::arg(-dir));
        for (std::size_t j = i + 1; j < c.sides.size(); ++j) {
            const auto& b = c.sides[j];
            const double det = a.n.real() * b.n.imag() - a.n.imag() * b.n.real();
            if (std::abs(det) < 1e-14 * std::abs(a.n) * std::abs(b.n)) continue;
            add_point({(a.c * b.n.imag() - b.c * a.n.imag()) / det, (a.n.real() * b.c - b.n.real() * a.c) / det});
        }
        if (c.disk) {
            const auto [z, r] = *c.disk;
            // line n·y = c meets the circle at the foot of the perpendicular ± tangent offsets
            const double nn = std::abs(a.n);
            const cplx u = a.n / nn;
            const double dist = (a.c / nn) - dot(u, z);
            if (std::abs(dist) < r) {
                const cplx foot = z + dist * u, t(-u.imag(), u.real());
                const double half = std::sqrt(r * r - dist * dist);
                add_point(foot + half * t);
                add_point(foot - half * t);
            }
        }
    }
    if (c.disk) {
        const auto [z, r] = *c.disk;
        const double d = std::abs(z - x);
        if (d > r) {
            const double phi = std::arg(z - x), w = std::asin(r / d);
            const cplx tp = x + std::polar(std::sqrt(d * d - r * r), phi + w);
            const cplx tm = x + std::polar(std::sqrt(d * d - r * r), phi - w);
            add_point(tp);
            add_point(tm);
        } else if (d > 0 && d >= r * (1 - 1e-12)) {  // x on the circle: chords vanish along the tangent
            out.push_back(std::arg(z - x) + 0.5 * std::numbers::pi);
            out.push_back(std::arg(z - x) - 0.5 * std::numbers::pi);
        }
    }
}

}  // namespace detail

inline RegionSet& RegionSet::add_polygon(std::vector<cplx> v, double w) {
    if (v.size() < 3) throw ConfigError("region: polygon needs at least 3 vertices");
    const double a = detail::polygon_area(v);
    if (!(std::abs(a) > 0)) throw ConfigError("region: degenerate polygon");
    if (a < 0) std::reverse(v.begin(), v.end());
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i)
        if (cross(v[(i + 1) % n] - v[i], v[(i + 2) % n] - v[(i + 1) % n]) < 0)
            throw ConfigError("region: polygon must be convex");
    RegionComponent c;
    c.vertices = v;
    c.weight = w;
    for (std::size_t i = 0; i < n; ++i) {
        const cplx e = v[(i + 1) % n] - v[i];
        const cplx nrm(e.imag(), -e.real());
        c.sides.push_back({nrm, dot(nrm, v[i])});
    }
    components.push_back(std::move(c));
    return *this;
}

inline double RegionSet::linf() const {
    double m = 0;
    for (const auto& c : components) m = std::max(m, std::abs(c.weight));
    return m;
}

inline double RegionSet::l1() const {
    double s = 0;
    for (const auto& c : components) {
        const double a = c.disk ? std::numbers::pi * c.disk->second * c.disk->second : detail::polygon_area(c.vertices);
        s += std::abs(c.weight) * a;
    }
    return s;
}

/// Rejects overlapping components, and pieces outside the closed half plane (or,
/// for odd twins, outside x₁ ≥ 0) that the image construction assumes.
inline void validate(const RegionSet& theta, Domain domain) {
    const auto& cs = theta.components;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        for (auto v : detail::bbox_corners(cs[i])) {
            if (domain == Domain::half_plane && v.imag() < -1e-14)
                throw ConfigError("region: component below the wall x2 = 0");
            if (theta.odd_in_x1 && v.real() < -1e-14)
                throw ConfigError("region: odd-in-x1 data must be given on x1 >= 0");
        }
        for (std::size_t j = i + 1; j < cs.size(); ++j)
            if (detail::interiors_overlap(cs[i], cs[j]))
                throw ConfigError("region: components " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
    }
}

/// All pieces after odd reflections: x₁ twin first, then the x₂ image of everything.
inline std::vector<RegionComponent> expand(const RegionSet& theta, Domain domain) {
    std::vector<RegionComponent> out = theta.components;
    if (theta.odd_in_x1) {
        const std::size_t n = out.size();
        for (std::size_t i = 0; i < n; ++i) out.push_back(detail::reflect(out[i], true));
    }
    if (domain == Domain::half_plane) {
        const std::size_t n = out.size();
        for (std::size_t i = 0; i < n; ++i) out.push_back(detail::reflect(out[i], false));
    }
    return out;
}

struct VelocityResult {
    cplx u;
    double error = 0;  // estimated absolute quadrature error
};

struct VelocityOptions {
    double tol = 1e-10;  // relative to Σ|piece integrals|
    int max_depth = 24;
};

namespace detail {

// Integrand sample: value and a bound on its rounding error, which sets the
// floor when ± pieces cancel or chord ends are ill-conditioned.
struct Sample {
    cplx value;
    double magnitude;
};

struct Panel {
    cplx value;
    double l1;     // ∫|f|, the scale that tolerances are relative to
    double noise;  // rounding floor of the panel value
};

template <class F>
Panel gl20(F& f, double a, double b) {
    using Q = boost::math::quadrature::gauss<double, 20>;
    const auto& x = Q::abscissa();
    const auto& w = Q::weights();
    const double m = 0.5 * (a + b), h = 0.5 * (b - a);
    Panel p{0, 0, 0};
    for (std::size_t i = 0; i < x.size(); ++i) {
        const Sample fp = f(m + h * x[i]), fm = f(m - h * x[i]);
        p.value += w[i] * (fp.value + fm.value);
        p.l1 += w[i] * (std::abs(fp.value) + std::abs(fm.value));
        p.noise += w[i] * (fp.magnitude + fm.magnitude);
    }
    p.value *= h;
    p.l1 *= h;
    p.noise *= 8 * h;
    return p;
}

// Adaptive bisection with a 20-point Gauss–Legendre rule, comparing one panel
// against its two halves.
template <class F>
cplx adapt(F& f, double a, double b, cplx whole, double abs_tol, int depth, double& err, bool& ok) {
    const double m = 0.5 * (a + b);
    const Panel l = gl20(f, a, m), r = gl20(f, m, b);
    const double e = std::abs(l.value + r.value - whole);
    const bool at_floor = e <= l.noise + r.noise;
    if (e <= abs_tol || at_floor || depth <= 0) {
        if (e > abs_tol && !at_floor) ok = false;
        err += e;
        return l.value + r.value;
    }
    return adapt(f, a, m, l.value, 0.5 * abs_tol, depth - 1, err, ok) +
           adapt(f, m, b, r.value, 0.5 * abs_tol, depth - 1, err, ok);
}

inline double P_of(const KernelTable& t, double rho) { return rho > 0 ? t.P(rho) : 0.0; }

inline VelocityResult velocity_pieces(cplx x, const std::vector<RegionComponent>& pieces, const KernelTable& table,
                                      const VelocityOptions& opt) {
    std::vector<double> bp;
    for (const auto& c : pieces) breakpoints(c, x, bp);
    const double twopi = 2 * std::numbers::pi;
    for (auto& a : bp) a = std::fmod(a + twopi, twopi);
    bp.push_back(0);
    bp.push_back(twopi);
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end(), [](double a, double b) { return b - a < 1e-13; }), bp.end());
    if (bp.back() < twopi) bp.push_back(twopi);

    constexpr double eps = std::numeric_limits<double>::epsilon();
    auto f = [&](double phi) {
        const cplx e = std::polar(1.0, phi);
        double dp = 0, mag = 0;
        for (const auto& c : pieces) {
            std::pair<double, double> slop;
            const auto [lo, hi] = ray_interval(c, x, e, &slop, eps * (phi + 1));
            if (hi > lo) {
                const double pa = P_of(table, lo), pb = P_of(table, hi);
                dp += c.weight * (pb - pa);
                mag += std::abs(c.weight) * (eps * (pa + pb) + (lo > 0 ? table.G(lo, true) * slop.first : 0) +
                                             table.G(hi, true) * slop.second);
            }
        }
        return Sample{cplx(-e.imag(), e.real()) * dp, mag};  // −e^⊥ ΔP with e^⊥ = (e₂, −e₁)
    };
    // per panel φ = a + (b − a)(1 − cos πt)/2 turns the √ behaviour of chords at
    // tangent directions into smooth integrands
    auto mapped = [&](std::size_t i) {
        const double a = bp[i], w = bp[i + 1] - bp[i];
        return [&f, a, w](double t) {
            const double jac = 0.5 * w * std::numbers::pi * std::sin(std::numbers::pi * t);
            const Sample s = f(a + 0.5 * w * (1 - std::cos(std::numbers::pi * t)));
            return Sample{s.value * jac, s.magnitude * jac};
        };
    };
    std::vector<Panel> coarse(bp.size() - 1);
    double scale = 0;
    for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
        auto g = mapped(i);
        coarse[i] = gl20(g, 0.0, 1.0);
        scale += coarse[i].l1;
    }
    VelocityResult r;
    if (scale == 0) return r;
    // Empty or sliver pieces leave only rounding noise in ray_interval, so the
    // scale is at least 10⁻⁴ of 2π Σ|w| P(farthest corner), a bound on what the
    // pieces could contribute.
    double reach = 0;
    for (const auto& c : pieces) {
        double far = 0;
        for (auto v : bbox_corners(c)) far = std::max(far, std::abs(v - x));
        reach += std::abs(c.weight) * P_of(table, far);
    }
    scale = std::max(scale, 1e-4 * twopi * reach);
    bool ok = true;
    for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
        auto g = mapped(i);
        const double share = std::max(opt.tol, 1e-15) * scale * (bp[i + 1] - bp[i]) / twopi;
        r.u += adapt(g, 0.0, 1.0, coarse[i].value, share, opt.max_depth, r.error, ok);
    }
    if (!ok && r.error > opt.tol * scale) {
        std::ostringstream os;
        os.precision(17);
        os << "velocity: tolerance " << opt.tol << " not reached at x=(" << x.real() << "," << x.imag()
           << "); best estimate u=(" << r.u.real() << "," << r.u.imag() << ") error " << r.error;
        throw NumericError(os.str());
    }
    return r;
}

}  // namespace detail

/// Velocity at any x (on region boundaries too) by the polar ray integral.
inline VelocityResult velocity_area(cplx x, const RegionSet& theta, const KernelTable& table, Domain domain,
                                    const VelocityOptions& opt = {}) {
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) throw ConfigError("velocity: non-finite point");
    if (domain == Domain::half_plane && x.imag() < 0) throw ConfigError("velocity: point below the wall");
    return detail::velocity_pieces(x, expand(theta, domain), table, opt);
}

/// Boundary-integral velocity off the contours,
///   u(x) = −Σ_j a_j ∫ [∂z_j R(|x − z_j|) + ∂z̄_j R(|x − z̄_j|)] dη   (second term on the half plane),
/// by the trapezoid rule over the nodes.
inline cplx velocity_contour(cplx x, const ContourSystem& sys, const KernelTable& table) {
    cplx u = 0;
    for (const auto& p : sys.patches) {
        const std::size_t M = p.size();
        const double h = mean_spacing(p);
        for (auto z : p.nodes)
            if (std::abs(x - z) <= 2 * h) throw ContactError("velocity_contour: point within two node spacings of a contour");
        const auto dz = spectral::derivative(p.nodes);
        cplx s = 0;
        for (std::size_t i = 0; i < M; ++i) {
            s += dz[i] * table.R(std::abs(x - p.nodes[i]), true);
            if (sys.domain == Domain::half_plane) s += std::conj(dz[i]) * table.R(std::abs(x - std::conj(p.nodes[i])), true);
        }
        u -= p.strength * s * (2 * std::numbers::pi / static_cast<double>(M));
    }
    return u;
}

/// The half-plane kernels with odd symmetry in x₁, with ỹ = (−y₁, y₂), ȳ = (y₁, −y₂):
///   K₁ = K₁₁ − K₁₂ − K₁₃ + K₁₄,   K₂ = K₂₁ + K₂₂ − K₂₃ − K₂₄,
/// so that u₁ = −∫ K₁ θ and u₂ = ∫ K₂ θ over the quarter plane.
struct KernelSplit {
    double K11, K12, K13, K14, K21, K22, K23, K24;
    double sgn12 = 0, sgn24 = 0;  // sgn(y₂ − x₂), sgn(y₁ − x₁)

    double K1() const { return K11 - K12 - K13 + K14; }
    double K2() const { return K21 + K22 - K23 - K24; }
    double scale() const {
        return std::max({std::abs(K11), std::abs(K12), std::abs(K13), std::abs(K14), std::abs(K21), std::abs(K22),
                         std::abs(K23), std::abs(K24)});
    }
    // Sign properties under G > 0 and G/ρ non-increasing on (0, c₀), |x + y| ≤ c₀.
    bool property_i(double rel = 1e-12) const { return K1() >= K11 - K12 - rel * scale(); }
    bool property_ii(double rel = 1e-12) const { return sgn12 * (K11 - K12) >= -rel * scale(); }
    bool property_iii(double rel = 1e-12) const { return K2() >= K21 - K24 - rel * scale(); }
    bool property_iv(double rel = 1e-12) const { return sgn24 * (K21 - K24) >= -rel * scale(); }
};

inline KernelSplit kernel_split(cplx x, cplx y, const KernelTable& table) {
    const cplx yt = -std::conj(y), yb = std::conj(y);
    const double d = std::abs(x - y), dt = std::abs(x - yt), dm = std::abs(x + y), db = std::abs(x - yb);
    const double floor = 1e-300;
    if (!(d > floor) || !(db > floor)) throw NumericError("kernel_split: coincident points (x = y or x = ȳ)");
    auto g = [&](double r) { return r > floor ? table.G(r, true) / (r * r) : 0.0; };
    const double x1 = x.real(), x2 = x.imag(), y1 = y.real(), y2 = y.imag();
    KernelSplit k;
    k.K11 = (y2 - x2) * g(d);
    k.K12 = (y2 - x2) * g(dt);
    k.K13 = (y2 + x2) * g(dm);
    k.K14 = (y2 + x2) * g(db);
    k.K21 = (y1 - x1) * g(d);
    k.K22 = (y1 + x1) * g(dt);
    k.K23 = (y1 + x1) * g(dm);
    k.K24 = (y1 - x1) * g(db);
    k.sgn12 = (y2 > x2) - (y2 < x2);
    k.sgn24 = (y1 > x1) - (y1 < x1);
    return k;
}

/// Largest c₀ ≤ c_max with G > 0 and G/ρ non-increasing on the table nodes below c₀.
inline double monotone_radius(const KernelTable& t, double c_max) {
    double c0 = t.rho_min();
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double r = t.rho_grid[i];
        if (r > c_max) return c_max;
        const double q = t.G_vals[i] / r;
        if (!(t.G_vals[i] > 0) || q > prev) return c0;
        prev = q;
        c0 = r;
    }
    return std::min(c0, c_max);
}

struct SplitVelocities {
    double u1_bad = 0, u1_good = 0, u2_bad = 0, u2_good = 0;
    double error = 0;
};

/// Bad/good parts of u₁ (source split at y₂ = x₂) and u₂ (split at y₁ = x₁) for θ
/// given on the quarter plane, odd in x₁, on the half plane.
inline SplitVelocities split_velocities(cplx x, const RegionSet& theta, const KernelTable& table,
                                        const VelocityOptions& opt = {}) {
    if (!theta.odd_in_x1) throw ConfigError("split_velocities: θ must be odd in x1");
    if (x.real() < 0 || x.imag() < 0) throw ConfigError("split_velocities: point outside the quarter plane");
    auto part = [&](HalfPlane clip) {
        RegionSet s = theta;
        for (auto& c : s.components) c.sides.push_back(clip);
        return detail::velocity_pieces(x, expand(s, Domain::half_plane), table, opt);
    };
    SplitVelocities r;
    const auto b1 = part({{0, 1}, x.imag()}), g1 = part({{0, -1}, -x.imag()});
    const auto b2 = part({{1, 0}, x.real()}), g2 = part({{-1, 0}, -x.real()});
    r.u1_bad = b1.u.real();
    r.u1_good = g1.u.real();
    r.u2_bad = b2.u.imag();
    r.u2_good = g2.u.imag();
    r.error = b1.error + g1.error + b2.error + g2.error;
    return r;
}

/// Velocities at many points, in parallel.
inline std::vector<VelocityResult> velocity_area_many(const std::vector<cplx>& xs, const RegionSet& theta,
                                                      const KernelTable& table, Domain domain, unsigned threads = 0,
                                                      const VelocityOptions& opt = {}) {
    std::vector<VelocityResult> out(xs.size());
    parallel_for(xs.size(), worker_count(threads), [&](std::size_t i) { out[i] = velocity_area(xs[i], theta, table, domain, opt); });
    return out;
}

}  // namespace gsqg
