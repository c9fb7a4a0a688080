#pragma once
// The singularity experiment: twin patches Ω₀ and its odd reflection on the half
// plane, the envelope X′ = −𝐅(X)/2 that drives the trapezoid
//   𝕂(t) = {X(t) < x₁ < 2c*/k, 0 < x₂ < k x₁},
// containment tracking of 𝕂(t) inside the evolving patch, and a numerical audit
// of the velocity bounds u₁ ≤ −𝐅(x₁), u₂ ≥ 𝐅(x₂/k) together with the region
// integrals they are assembled from.

#include "gsqg/contour.hpp"
#include "gsqg/errors.hpp"
#include "gsqg/kernel.hpp"
#include "gsqg/multiplier.hpp"
#include "gsqg/velocity.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace gsqg {

enum class BlowupRegime { A2a, A2b };

inline const char* to_string(BlowupRegime r) { return r == BlowupRegime::A2a ? "A2a" : "A2b"; }

inline BlowupRegime blowup_regime_from_string(const std::string& s) {
    if (s == "A2a" || s == "a2a") return BlowupRegime::A2a;
    if (s == "A2b" || s == "a2b") return BlowupRegime::A2b;
    throw ConfigError("unknown regime '" + s + "' (expected A2a or A2b)");
}

struct ScenarioConfig {
    Multiplier multiplier = alpha_sqg(0.25);
    BlowupRegime regime = BlowupRegime::A2b;
    double beta = 0;        // A2b exponent, G ~ ρ^{−β}; 0 takes the multiplier's H2b α
    double c0 = 1;          // kernel smallness scale
    double epsilon = 0;     // 0 → 10⁻³ c*
    int slope_k = 0;        // 0 → 1 (A2a) or 5 (A2b)
    double delta_G = 0;     // bound-validity scale (fitted when 0)
    double driving_c = 0;  // constant in 𝐅 (fitted when 0)
    double N_k = 0;         // 0 → 10³ k
    double corner = 0;      // corner radius of Ω₀; 0 → ε/4
    double C_bar = 0;       // uniform velocity bound; 0 → fitted from the initial data
    std::size_t M = 512;
    double dt = 1e-3;       // upper bound; the step also obeys the CFL limit
    double cfl_factor = 0.5;
    std::size_t output_every = 10;
    bool strict_invariants = true;
    unsigned threads = 0;

    double c_star() const { return c0 / 4; }
    double eps() const { return epsilon > 0 ? epsilon : 1e-3 * c_star(); }
    int k() const { return slope_k > 0 ? slope_k : (regime == BlowupRegime::A2a ? 1 : 5); }
    double Nk() const { return N_k > 0 ? N_k : 1e3 * k(); }
    double corner_radius() const { return corner > 0 ? corner : eps() / 4; }
    double beta_value() const {
        if (beta > 0) return beta;
        return multiplier.regime.kind == Regime::Kind::h2b ? multiplier.regime.value : 0.0;
    }
};

/// Checks that need no kernel: ranges, the Ω₂ ⊆ Ω₀ ⊆ Ω₁ geometry, 𝕂(0) being
/// well formed and, when strict, ε < δ_G/(4k).
inline void validate(const ScenarioConfig& cfg) {
    auto fail = [](const std::string& what) { throw ConfigError("scenario: " + what); };
    if (!(cfg.c0 > 0)) fail("c0 > 0 violated");
    if (cfg.slope_k < 0) fail("slope_k >= 1 violated");
    const double e = cfg.eps(), cs = cfg.c_star();
    const int k = cfg.k();
    if (!(e > 0) || !(e < cs)) fail("0 < epsilon < c_star violated");
    if (!(cfg.Nk() > k)) fail("N_k > slope_k violated");
    if (cfg.delta_G < 0 || !(cfg.delta_G < cs)) fail("delta_G in (0, c_star) violated");
    if (cfg.driving_c < 0) fail("driving_c > 0 violated");
    if (!(3 * e < 2 * cs / k)) fail("X(0) = 3 epsilon < 2 c_star / k violated (trapezoid empty)");
    if (!(cfg.corner_radius() > 0) || !(cfg.corner_radius() <= 0.5 * e))
        fail("corner radius in (0, epsilon/2] violated (needed for Omega_2 in Omega_0 and margin >= epsilon)");
    if (cfg.M < 32 || cfg.M % 2) fail("M even and >= 32 violated");
    if (!(cfg.dt > 0)) fail("dt > 0 violated");
    if (!(cfg.cfl_factor > 0)) fail("cfl_factor > 0 violated");
    if (cfg.output_every == 0) fail("output_every >= 1 violated");
    if (cfg.regime == BlowupRegime::A2b) {
        const double b = cfg.beta_value();
        if (cfg.beta != 0 && !(b > 0 && b < 1.0 / 3)) fail("beta in (0, 1/3) violated");
    }
    if (cfg.regime == BlowupRegime::A2a && !(3 * e < 1)) fail("3 epsilon < 1 violated (log(1/rho) must be positive)");
    if (cfg.strict_invariants && cfg.delta_G > 0 && !(e < cfg.delta_G / (4 * k)))
        fail("epsilon < delta_G/(4k) violated");
}

// ---- initial data -------------------------------------------------------------------

/// Ω₀ (rounded rectangle (1.5ε, 3.5c*)×(0, 3.5c*), flat on the wall) and its
/// odd twin on the half plane.
inline ContourSystem build_initial_data(const ScenarioConfig& cfg, std::size_t M) {
    validate(cfg);
    auto p = scenario_omega0(cfg.eps(), cfg.c_star(), M, cfg.corner_radius());
    return make_system({p}, Domain::half_plane, true);
}

// ---- driving rate and envelope --------------------------------------------------

/// G below the table continues as G(ρ_min)·m(1/ρ)/m(1/ρ_min) (power law for
/// tabulated multipliers); inside it is the table interpolant.
inline double kernel_G(const KernelTable& table, const Multiplier& m, double rho) {
    if (rho >= table.rho_min()) return table.G(rho, true);
    if (m.kind == MultKind::custom_table) return table.G(rho, true);
    const double u = -std::log(rho), u0 = -std::log(table.rho_min());
    const double l = log_m(m, Jet<1>::constant(u)).value() - log_m(m, Jet<1>::constant(u0)).value();
    return table.G_vals.front() * std::exp(l);
}

/// 𝐅(ρ) = c ρ log(1/ρ) G(ρ) under A2a, c ρ G(ρ) under A2b.
inline double driving_rate(const ScenarioConfig& cfg, const KernelTable& table, double rho) {
    if (!(rho > 0)) throw ConfigError("driving_rate: domain error, rho must be > 0");
    const double c = cfg.driving_c > 0 ? cfg.driving_c : 1.0;
    if (cfg.regime == BlowupRegime::A2a) {
        if (!(rho < 1)) throw ConfigError("driving_rate: domain error, rho >= 1 makes log(1/rho) <= 0 in A2a");
        return c * rho * std::log(1 / rho) * kernel_G(table, cfg.multiplier, rho);
    }
    return c * rho * kernel_G(table, cfg.multiplier, rho);
}

/// T* = ∫₀^{3ε} 2/𝐅 and X(t) from ∫_{X(t)}^{3ε} 2/𝐅 = t, integrated in
/// u = log(1/ρ) on panels that widen geometrically, with cumulative values kept
/// for the inversion.
struct Envelope {
    double X0 = 0, T_star = 0, error = 0;
    std::vector<double> u, cum;  // panel ends and ∫ from u[0]
    std::function<double(double)> integrand;  // in u

    double X(double t) const {
        if (t <= 0) return X0;
        if (t >= T_star) return 0;
        const std::size_t i = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), t) - cum.begin()) - 1;
        double a = u[i], b = u[i + 1];
        const double target = t - cum[i];
        auto partial = [&](double x) {
            return boost::math::quadrature::gauss<double, 15>::integrate(integrand, u[i], x);
        };
        for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(b)); ++it) {
            const double mid = 0.5 * (a + b);
            (partial(mid) < target ? a : b) = mid;
        }
        return std::exp(-0.5 * (a + b));
    }
    /// X′(t) = −𝐅(X)/2, via the integrand 2/(ρ⁻¹𝐅) in u.
    double X_prime(double t) const {
        const double x = X(t);
        if (x <= 0) return 0;
        return -x / integrand(-std::log(x));
    }
};

/// Throws NoFiniteCollisionTime when ∫₀ 2/𝐅 diverges: the Osgood integral
/// ∫ dr/(r log r m) under A2a, ∫ dr/(r m) under A2b.
inline Envelope collision_time(const ScenarioConfig& cfg, const KernelTable& table) {
    validate(cfg);
    const Multiplier& m = cfg.multiplier;
    const bool a2a = cfg.regime == BlowupRegime::A2a;
    if (m.kind != MultKind::custom_table) {
        OsgoodResult o;
        try {
            o = classify_osgood(m, 2.0, 1e12, a2a ? 1.0 : 0.0);
        } catch (const IndeterminateError& e) {
            throw NumericError(std::string("collision_time: ") + e.what());
        }
        if (o.classification == Osgood::divergent)
            throw NoFiniteCollisionTime(std::string("no finite collision time: integral of 2/F diverges at 0 for ") +
                                        to_string(m.kind) + " in " + to_string(cfg.regime) + " mode");
    } else if (!(table.slopeG(0) < -1e-6)) {
        throw NoFiniteCollisionTime("no finite collision time: tabulated G does not grow at the origin");
    }
    const double c = cfg.driving_c > 0 ? cfg.driving_c : 1.0;
    Envelope env;
    env.X0 = 3 * cfg.eps();
    if (env.X0 > table.rho_max()) throw RangeError("collision_time: 3 epsilon above the kernel table");
    // the table must outlive the envelope; the multiplier is copied
    env.integrand = [tp = &table, m, c, a2a](double u) {
        return 2 / (c * kernel_G(*tp, m, std::exp(-u)) * (a2a ? u : 1.0));
    };
    const double u0 = -std::log(env.X0), u_cap = 1e300;
    env.u = {u0};
    env.cum = {0.0};
    double u = u0, last = 0;
    int small = 0;
    while (u < u_cap) {
        const double h = 0.02 * std::max(1.0, u - u0 + 1);
        const double b = std::min(u_cap, u + h);
        last = boost::math::quadrature::gauss<double, 15>::integrate(env.integrand, u, b);
        env.u.push_back(b);
        env.cum.push_back(env.cum.back() + last);
        u = b;
        small = last < 1e-18 * env.cum.back() ? small + 1 : 0;
        if (small >= 50) break;
    }
    env.T_star = env.cum.back();
    // remainder beyond the last panel: generous bound u f(u) log u for slowly
    // decaying tails, the last panel size otherwise
    env.error = u >= u_cap ? u * env.integrand(u) * std::log(u) : 50 * last;
    if (!std::isfinite(env.T_star)) throw NumericError("collision_time: non-finite T*");
    return env;
}

// ---- Π indices ------------------------------------------------------------------------

struct PiIndices {
    double Pi1 = 0, Pi2 = 0, margin = 0;  // margin = Π₂ − 2/(β N_k^β)
};

inline PiIndices pi_indices(double beta, int k, double N_k) {
    if (!(beta > 0) || !(beta < 1.0 / 3)) throw ConfigError("pi_indices: domain error, beta must lie in (0, 1/3)");
    if (k < 1) throw ConfigError("pi_indices: k >= 1 violated");
    if (!(N_k > k)) throw ConfigError("pi_indices: N_k > k violated");
    const double b = beta, kk = static_cast<double>(k) * k;
    const double two_b = std::pow(2.0, -b);
    PiIndices p;
    p.Pi1 = 2 / b *
            (1 / (1 - b) - std::pow(kk + 1, -b / 2) - two_b * std::pow(k, -b) * std::pow(4 / kk + 1, -1 - b / 2) -
             two_b * (1 - std::pow(kk + 1, -b / 2)) / (1 - b) +
             0.5 * (std::pow(4 + 4 * kk, -b / 2) - std::pow(9 + kk, -b / 2)));
    p.Pi2 = 2 / b *
            (-1 / (1 - b) + std::pow(1 + 1 / kk, -b / 2) +
             (1 - std::pow(kk + 1, -1 - b / 2)) / (2 * std::pow(kk + 1, b / 2)) *
                 (1 + (std::pow(2.0, 1 - b) - 1) / (1 - b)));
    p.margin = p.Pi2 - 2 / (b * std::pow(N_k, b));
    return p;
}

// ---- containment of the trapezoid -----------------------------------------------

enum class ExitSegment { none, I1, I2, right, bottom };

inline const char* to_string(ExitSegment s) {
    switch (s) {
        case ExitSegment::none: return "none";
        case ExitSegment::I1: return "I1";
        case ExitSegment::I2: return "I2";
        case ExitSegment::right: return "right";
        case ExitSegment::bottom: return "bottom";
    }
    return "none";
}

struct BlowupState {
    double time = 0;
    double X_t = 0;
    double T_star = std::numeric_limits<double>::infinity();
    double margin = 0;  // dist((ℝ₊)²∖Ω, 𝕂); negative once 𝕂 leaves Ω
    double front_min_x1 = 0;
    ExitSegment segment = ExitSegment::none;  // where the current margin is attained outside
    bool exited = false;                      // first-exit event recorded
    ExitSegment exit_segment = ExitSegment::none;
    double exit_time = std::numeric_limits<double>::quiet_NaN();
};

/// Vertices (X,0), (2c*/k,0), (2c*/k,2c*), (X,kX).
inline std::array<cplx, 4> trapezoid(double X, double c_star, int k) {
    const double xr = 2 * c_star / k;
    return {cplx(X, 0), cplx(xr, 0), cplx(xr, k * xr), cplx(X, k * X)};
}

namespace detail {
inline bool inside_polygon(const std::vector<cplx>& P, cplx q) {
    bool in = false;
    for (std::size_t i = 0, j = P.size() - 1; i < P.size(); j = i++) {
        const cplx a = P[i], b = P[j];
        if ((a.imag() > q.imag()) != (b.imag() > q.imag())) {
            const double x = a.real() + (q.imag() - a.imag()) / (b.imag() - a.imag()) * (b.real() - a.real());
            if (q.real() < x) in = !in;
        }
    }
    return in;
}

inline double distance_to_polyline(const std::vector<cplx>& P, cplx q) {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < P.size(); ++i) d = std::min(d, point_segment_distance(q, P[i], P[(i + 1) % P.size()]));
    return d;
}
}  // namespace detail

/// Updates margin, front_min_x1 and the first-exit flag from patch 0 of the
/// system. Contour segments lying on the wall (both nodes within 0.05 spacing
/// of x₂ = 0) are not part of the complement's boundary and are ignored; the
/// trapezoid boundary is sampled 0.1 spacing above the wall.
inline void containment_check(const ContourSystem& sys, BlowupState& st, double c_star, int k) {
    const auto& P = sys.patches.at(0).nodes;
    const double h = mean_spacing(sys.patches[0]);
    const double wall_tol = 0.05 * h, lift = 0.1 * h;
    st.time = sys.time;
    st.front_min_x1 = std::numeric_limits<double>::infinity();
    for (auto z : P) st.front_min_x1 = std::min(st.front_min_x1, z.real());

    const auto V = trapezoid(st.X_t, c_star, k);
    struct Edge {
        cplx a, b;
        ExitSegment seg;
    };
    const std::array<Edge, 4> edges = {Edge{V[0] + cplx(0, lift), V[3], ExitSegment::I1},
                                       Edge{V[3], V[2], ExitSegment::I2},
                                       Edge{V[1] + cplx(0, lift), V[2], ExitSegment::right},
                                       Edge{V[0] + cplx(0, lift), V[1] + cplx(0, lift), ExitSegment::bottom}};
    double worst = 0;
    ExitSegment worst_seg = ExitSegment::none;
    constexpr int samples = 128;
    for (const auto& e : edges)
        for (int j = 0; j <= samples; ++j) {
            const cplx q = e.a + (e.b - e.a) * (static_cast<double>(j) / samples);
            if (detail::inside_polygon(P, q)) continue;
            const double d = detail::distance_to_polyline(P, q);
            if (d >= worst) worst = d, worst_seg = e.seg;
        }
    if (worst_seg != ExitSegment::none) {
        st.margin = -worst;
        st.segment = worst_seg;
        if (!st.exited) {
            st.exited = true;
            st.exit_segment = worst_seg;
            st.exit_time = sys.time;
        }
        return;
    }
    st.segment = ExitSegment::none;
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < P.size(); ++i) {
        const cplx a = P[i], b = P[(i + 1) % P.size()];
        if (a.imag() < wall_tol && b.imag() < wall_tol) continue;
        for (std::size_t j = 0; j < 4; ++j) d = std::min(d, segment_distance(a, b, V[j], V[(j + 1) % 4]));
    }
    st.margin = d;
}

// ---- velocity-bound audit --------------------------------------------------------

enum class Wedge { u1, u2 };  // x₂ ≤ k x₁ ≤ δ  resp.  k x₁ ≤ x₂ ≤ δ
enum class ThetaFamily { triangle, box };  // θ = 𝟙_𝔸(x)  resp.  𝟙_{(0,2c*)²}

inline const char* to_string(Wedge w) { return w == Wedge::u1 ? "u1" : "u2"; }
inline const char* to_string(ThetaFamily f) { return f == ThetaFamily::triangle ? "triangle" : "box"; }

struct BoundProbe {
    cplx x;
    Wedge wedge = Wedge::u1;
};

struct ProbeReport {
    BoundProbe probe;
    ThetaFamily theta = ThetaFamily::triangle;
    bool skipped = false;
    std::string note;
    double scale = 0;  // k x₁ (u1 wedge) or x₂ (u2 wedge)
    double u1 = 0, u2 = 0, u1_bad = 0, u1_good = 0, u2_bad = 0, u2_good = 0, error = 0;
    double F_unit = 0;  // 𝐅 with c = 1 at x₁ (u1 wedge) or x₂/k (u2 wedge)
    double ratio = 0;   // −u₁/F_unit or u₂/F_unit: the largest admissible c at this probe
    // region integrals (NaN where the hypotheses of the bound on x fail)
    double T2 = 0, T11 = 0, T12 = 0, T13 = 0, U1 = 0, V1 = 0, V2 = 0;
    double slack_bad1 = 0, slack_good1 = 0, slack_bad2 = 0, slack_good2 = 0;
    double slack_F = 0;  // with cfg.driving_c: −𝐅(x₁) − u₁ or u₂ − 𝐅(x₂/k)
};

struct BoundsReport {
    std::vector<ProbeReport> probes;
    double min_ratio = std::numeric_limits<double>::infinity();  // over non-skipped probes
    double min_integral_slack = std::numeric_limits<double>::infinity();  // relative to the velocity scale
    std::size_t skipped = 0;
};

inline RegionSet theta_region(ThetaFamily f, cplx x, double c_star, int k) {
    RegionSet s;
    s.odd_in_x1 = true;
    if (f == ThetaFamily::triangle)
        s.add_triangle(x, x + cplx(c_star / k, 0), x + cplx(c_star / k, c_star));
    else
        s.add_rectangle(0, 2 * c_star, 0, 2 * c_star);
    return s;
}

namespace detail {
/// ∫_A s/|s|² G(|s|) ds as s₁ + i s₂ components, from the whole-plane velocity
/// at the origin: u(0) = (−∫ s₂G/|s|², ∫ s₁G/|s|²).
inline cplx moment(const std::vector<cplx>& polygon, const KernelTable& table, const VelocityOptions& opt) {
    if (std::abs(polygon_area(polygon)) <= 0) return 0;
    RegionSet s;
    s.add_polygon(polygon);
    const cplx u = velocity_area(0, s, table, Domain::whole_plane, opt).u;
    return {u.imag(), -u.real()};
}
}  // namespace detail

/// One probe, one θ: split velocities, the bound integrals and every slack.
inline ProbeReport audit_probe(const ScenarioConfig& cfg, const KernelTable& table, const BoundProbe& pr,
                               ThetaFamily fam, const VelocityOptions& opt = {}) {
    ProbeReport r;
    r.probe = pr;
    r.theta = fam;
    const double cs = cfg.c_star(), x1 = pr.x.real(), x2 = pr.x.imag();
    const int k = cfg.k();
    const double kd = static_cast<double>(k);
    const double delta = cfg.delta_G > 0 ? cfg.delta_G : cs / k;
    const bool in_u1 = pr.wedge == Wedge::u1 && x1 > 0 && x2 >= 0 && x2 <= k * x1 && k * x1 <= delta;
    const bool in_u2 = pr.wedge == Wedge::u2 && x1 >= 0 && k * x1 <= x2 && x2 <= delta && x2 > 0;
    if (!in_u1 && !in_u2) {
        r.skipped = true;
        r.note = "probe outside the " + std::string(to_string(pr.wedge)) + " wedge";
        return r;
    }
    const bool a2a = cfg.regime == BlowupRegime::A2a;
    const double arg = pr.wedge == Wedge::u1 ? x1 : x2 / k;
    if (a2a && !(arg < 1)) {
        r.skipped = true;
        r.note = "A2a needs rho < 1";
        return r;
    }
    r.scale = pr.wedge == Wedge::u1 ? k * x1 : x2;
    r.F_unit = arg * kernel_G(table, cfg.multiplier, arg) * (a2a ? std::log(1 / arg) : 1.0);

    const auto sv = split_velocities(pr.x, theta_region(fam, pr.x, cs, k), table, opt);
    r.u1_bad = sv.u1_bad, r.u1_good = sv.u1_good, r.u2_bad = sv.u2_bad, r.u2_good = sv.u2_good;
    r.u1 = sv.u1_bad + sv.u1_good;
    r.u2 = sv.u2_bad + sv.u2_good;
    r.error = sv.error;
    r.ratio = pr.wedge == Wedge::u1 ? -r.u1 / r.F_unit : r.u2 / r.F_unit;
    const double c = cfg.driving_c > 0 ? cfg.driving_c : 0.0;
    r.slack_F = pr.wedge == Wedge::u1 ? -c * r.F_unit - r.u1 : r.u2 - c * r.F_unit;

    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto moment = [&](std::vector<cplx> poly) { return detail::moment(poly, table, opt); };
    const std::vector<cplx> box = {{0, 0}, {x1, 0}, {x1, x2}, {0, x2}};
    // bad parts: x₁, x₂ ≤ c*
    if (x1 <= cs && x2 <= cs) {
        const cplx mb = x1 > 0 && x2 > 0 ? moment(box) : cplx(0);
        r.U1 = 2 * mb.imag();
        r.V1 = -2 * mb.real();
        r.slack_bad1 = r.U1 - r.u1_bad;
        r.slack_bad2 = r.u2_bad - r.V1;
    } else {
        r.U1 = r.V1 = r.slack_bad1 = r.slack_bad2 = nan;
    }
    // good part of u₁: x₁ ≤ c*/(4k), x₂ ≤ c*
    if (x1 > 0 && x1 <= cs / (4 * kd) && x2 <= cs) {
        const double l1 = std::sqrt(4 / (kd * kd) + 1);
        r.T2 = 2 * kd * table.G(cs / kd, true) * x1;
        r.T12 = -2 * x1 / (l1 * l1) * (table.R(l1 * 2 * kd * x1, true) - table.R(l1 * cs, true));
        r.T11 = -moment({{0, 0}, {2 * x1, 0}, {2 * x1, 2 * kd * x1}}).imag();
        r.T13 = -moment({{2 * x1, 0}, {4 * x1, 2 * kd * x1}, {2 * x1, 2 * kd * x1}}).imag();
        r.slack_good1 = r.T2 + r.T11 + r.T12 + r.T13 - r.u1_good;
    } else {
        r.T2 = r.T11 = r.T12 = r.T13 = r.slack_good1 = nan;
    }
    // good part of u₂: x₂ ≤ c*/(4k²), x₁ ≤ c*
    if (x2 > 0 && x2 <= cs / (4 * kd * kd) && x1 <= cs) {
        const double l2 = std::sqrt(kd * kd + 1);
        const double a = kd * x2, b = cs / kd, top = 2 * x2;
        const double direct = moment({{a, 0}, {b, 0}, {b, top}, {a, top}}).real();
        const double scaled = moment({{l2 * a, 0}, {l2 * b, 0}, {l2 * b, l2 * top}, {l2 * a, l2 * top}}).real();
        r.V2 = direct - scaled / (l2 * l2 * l2);
        r.slack_good2 = r.u2_good - r.V2;
    } else {
        r.V2 = r.slack_good2 = nan;
    }
    return r;
}

/// Audits every probe against both θ families (or the given ones), in parallel.
inline BoundsReport verify_velocity_bounds(const ScenarioConfig& cfg, const KernelTable& table,
                                           const std::vector<BoundProbe>& probes,
                                           std::vector<ThetaFamily> families = {ThetaFamily::triangle,
                                                                                ThetaFamily::box},
                                           unsigned threads = 0, const VelocityOptions& opt = {}) {
    BoundsReport rep;
    rep.probes.resize(probes.size() * families.size());
    parallel_for(rep.probes.size(), worker_count(threads), [&](std::size_t i) {
        rep.probes[i] = audit_probe(cfg, table, probes[i / families.size()], families[i % families.size()], opt);
    });
    for (const auto& r : rep.probes) {
        if (r.skipped) {
            ++rep.skipped;
            continue;
        }
        rep.min_ratio = std::min(rep.min_ratio, r.ratio);
        const double vs = std::max(std::abs(r.u1), std::abs(r.u2)) + 1e-300;
        for (double s : {r.slack_bad1, r.slack_good1, r.slack_bad2, r.slack_good2})
            if (std::isfinite(s)) rep.min_integral_slack = std::min(rep.min_integral_slack, s / vs);
    }
    return rep;
}

/// Probes log-uniform in scale on [δ·lo, δ], uniform across the wedge.
inline std::vector<BoundProbe> wedge_probes(int k, double delta, Wedge w, std::size_t n, std::uint64_t seed,
                                            double lo = 1e-4) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<BoundProbe> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = delta * std::pow(lo, U(rng));
        const double v = U(rng);
        if (w == Wedge::u1) {
            const double x1 = s / k;
            out.push_back({{x1, k * x1 * v}, w});
        } else {
            out.push_back({{s / k * v, s}, w});
        }
    }
    return out;
}

struct BoundsFit {
    double delta_G = 0, driving_c = 0;
    BoundsReport report;  // on the fitting probes
};

/// δ_G: the largest probe scale ≤ c*/k below which every probe has u₁ < 0
/// (resp. u₂ > 0); c: the smallest ratio over the probes inside δ_G.
inline BoundsFit fit_bounds(const ScenarioConfig& cfg, const KernelTable& table, std::size_t n_per_wedge = 64,
                            std::uint64_t seed = 1, unsigned threads = 0) {
    ScenarioConfig c = cfg;
    c.delta_G = 0;
    c.driving_c = 0;
    const double dmax = c.c_star() / c.k();
    auto probes = wedge_probes(c.k(), dmax, Wedge::u1, n_per_wedge, seed);
    auto p2 = wedge_probes(c.k(), dmax, Wedge::u2, n_per_wedge, seed + 1);
    probes.insert(probes.end(), p2.begin(), p2.end());
    BoundsFit fit;
    fit.report = verify_velocity_bounds(c, table, probes, {ThetaFamily::triangle, ThetaFamily::box}, threads);
    std::vector<const ProbeReport*> ok;
    for (const auto& r : fit.report.probes)
        if (!r.skipped) ok.push_back(&r);
    std::sort(ok.begin(), ok.end(), [](auto a, auto b) { return a->scale < b->scale; });
    double delta = 0;
    for (const auto* r : ok) {
        if (!(r->ratio > 0)) break;
        delta = r->scale;
    }
    double cmin = std::numeric_limits<double>::infinity();
    for (const auto* r : ok)
        if (r->scale <= delta) cmin = std::min(cmin, r->ratio);
    if (!(delta > 0) || !std::isfinite(cmin))
        throw NumericError("fit_bounds: no probe scale where the velocity bounds hold");
    fit.delta_G = delta;
    fit.driving_c = cmin;
    return fit;
}

// ---- the run ---------------------------------------------------------------------------

enum class Outcome { collision, reached_Tstar, containment_exit, diagnostics_blowup };

inline const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::collision: return "collision";
        case Outcome::reached_Tstar: return "reached_Tstar";
        case Outcome::containment_exit: return "containment_exit";
        case Outcome::diagnostics_blowup: return "diagnostics_blowup";
    }
    return "collision";
}

struct ScenarioRecord {
    double time = 0, X = 0, T_star = 0, gap = 0, margin = 0, front_min_x1 = 0, w_norm = 0;
    double area = 0, twin_area = 0;
    double max_speed = 0;
};

struct RunOptions {
    double t_end = 0;           // 0 → T*; required when T* is infinite (control runs)
    bool stop_on_exit = true;
    double w_norm_limit = 1e12;
    std::size_t max_steps = 10'000'000;
    std::function<void(const ScenarioRecord&)> on_record;
};

struct ScenarioResult {
    std::vector<ScenarioRecord> series;
    Outcome outcome = Outcome::reached_Tstar;
    ExitSegment exit_segment = ExitSegment::none;
    double exit_time = std::numeric_limits<double>::quiet_NaN();
    double T_star = std::numeric_limits<double>::infinity();
    bool finite_T_star = false;
    double C_bar_fit = 0;
    double t_end = 0;
    std::size_t steps = 0;
    std::vector<std::string> notes;  // invariant violations tolerated in non-strict mode, diagnostics
};

/// Evolves the twin patches, tracking X(t), 𝕂(t) and the gap until collision
/// (δ[z] < 2·spacing), t_end, a containment exit or a diagnostics blowup.
inline ScenarioResult run_scenario(const ScenarioConfig& cfg, const KernelTable& table, const RunOptions& ro = {}) {
    validate(cfg);
    ScenarioResult res;
    std::optional<Envelope> env;
    try {
        env = collision_time(cfg, table);
        res.T_star = env->T_star;
        res.finite_T_star = true;
    } catch (const NoFiniteCollisionTime& e) {
        if (!(ro.t_end > 0)) throw;
        res.notes.push_back(e.what());
    }
    res.t_end = ro.t_end > 0 ? ro.t_end : res.T_star;

    ContourSystem sys = build_initial_data(cfg, cfg.M);
    StepOptions sopt;
    sopt.cfl_factor = cfg.cfl_factor;
    sopt.rhs.threads = cfg.threads;
    sopt.check_cfl = false;  // dt is chosen below from the same velocities
    sopt.rhs.contact_check = false;

    RhsResult rhs = compute_rhs(sys, table, sopt.rhs);
    res.C_bar_fit = cfg.C_bar > 0 ? cfg.C_bar : max_speed(rhs);
    const int k = cfg.k();
    {
        std::ostringstream os;
        if (!(cfg.driving_c > 0) || !(cfg.delta_G > 0)) {
            os << "driving_c and delta_G must be set (fit them with verify-bounds)";
            throw ConfigError("scenario: " + os.str());
        }
        if (!(cfg.eps() < cfg.delta_G / (4 * k)))
            res.notes.push_back("invariant epsilon < delta_G/(4k) violated");
        if (res.finite_T_star && !(res.T_star <= cfg.delta_G / (2 * res.C_bar_fit))) {
            os << "T* = " << res.T_star << " <= delta_G/(2 C_bar) = " << cfg.delta_G / (2 * res.C_bar_fit)
               << " violated";
            if (cfg.strict_invariants) throw ConfigError("scenario: " + os.str());
            res.notes.push_back(os.str());
        }
    }

    BlowupState st;
    st.T_star = res.T_star;
    auto record = [&](const RhsResult& r) {
        st.X_t = env ? env->X(sys.time) : std::numeric_limits<double>::quiet_NaN();
        ScenarioRecord rec;
        const auto d = diagnostics(sys);
        if (env) containment_check(sys, st, cfg.c_star(), k);
        else {
            st.front_min_x1 = std::numeric_limits<double>::infinity();
            for (auto z : sys.patches[0].nodes) st.front_min_x1 = std::min(st.front_min_x1, z.real());
            st.margin = std::numeric_limits<double>::quiet_NaN();
        }
        rec.time = sys.time;
        rec.X = st.X_t;
        rec.T_star = res.T_star;
        rec.gap = d.gap;
        rec.margin = st.margin;
        rec.front_min_x1 = st.front_min_x1;
        rec.w_norm = d.w_norm;
        rec.area = d.area[0];
        rec.twin_area = d.area[1];
        rec.max_speed = max_speed(r);
        res.series.push_back(rec);
        if (ro.on_record) ro.on_record(rec);
        return d;
    };

    auto finish = [&](Outcome o) {
        res.outcome = o;
        res.steps = sys.step_count;
        res.exit_segment = st.exit_segment;
        res.exit_time = st.exit_time;
        return res;
    };

    record(rhs);
    if (st.exited && ro.stop_on_exit) return finish(Outcome::containment_exit);
    while (true) {
        const double hmin = min_spacing(sys);
        if (patch_gap(sys) < 2 * hmin) {
            if (sys.step_count % cfg.output_every != 0) record(rhs);
            return finish(Outcome::collision);
        }
        if (sys.time >= res.t_end * (1 - 1e-12)) {
            if (sys.step_count % cfg.output_every != 0) record(rhs);
            return finish(Outcome::reached_Tstar);
        }
        if (sys.step_count >= ro.max_steps) {
            res.notes.push_back("step limit reached");
            return finish(Outcome::diagnostics_blowup);
        }
        const double dt = std::min({cfg.dt, cfl_limit(sys, rhs, cfg.cfl_factor), res.t_end - sys.time});
        try {
            sys = step(sys, table, dt, sopt, &rhs);
            rhs = compute_rhs(sys, table, sopt.rhs);
        } catch (const NumericError& e) {
            res.notes.push_back(e.what());
            record(rhs);
            return finish(Outcome::diagnostics_blowup);
        }
        if (sys.step_count % cfg.output_every == 0) {
            const auto d = record(rhs);
            if (!d.finite || d.w_norm > ro.w_norm_limit) {
                res.notes.push_back("W-norm beyond limit");
                return finish(Outcome::diagnostics_blowup);
            }
            if (st.exited && ro.stop_on_exit) return finish(Outcome::containment_exit);
        }
    }
}

}  // namespace gsqg
