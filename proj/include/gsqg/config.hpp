#pragma once
#include "gsqg/scenario.hpp"

#include <toml.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace gsqg {

struct KernelSpec {
    double rho_min = 1e-7, rho_max = 1e3;
    std::size_t points = 192;
    double tol = 1e-11;
};

struct PatchSpec {
    ShapeKind shape = ShapeKind::circle;
    std::map<std::string, double> params;
    double strength = 1;
};

struct GeometrySpec {
    std::vector<PatchSpec> patches;
    std::size_t M = 256;
    Domain domain = Domain::whole_plane;
    bool mirror = false;
};

struct IntegratorSpec {
    double dt = 1e-3, cfl_factor = 0.5;
    double t_end = 0;  // simulate: required; blowup: 0 → T*
    std::size_t output_every = 10;
    std::size_t reparam_every = 16;
    bool snapshots = true;
};

struct VelocitySpec {
    RegionSet theta;
    Domain domain = Domain::half_plane;
    std::vector<cplx> probes;
    double tol = 1e-10;
};

struct BoundsSpec {
    std::size_t probes_per_wedge = 64;
    std::uint64_t seed = 1;
    double lo = 1e-4;
    std::vector<ThetaFamily> families{ThetaFamily::triangle, ThetaFamily::box};
};

struct PiSpec {
    std::size_t points = 64;
    double beta_min = 0, beta_max = 1.0 / 3;  // open interval, grid excludes the ends
};

struct RunConfig {
    Multiplier multiplier = alpha_sqg(0.25);
    KernelSpec kernel;
    GeometrySpec geometry;
    IntegratorSpec integrator;
    ScenarioConfig scenario;
    VelocitySpec velocity;
    BoundsSpec bounds;
    PiSpec pi;
    std::string output = "out";
    unsigned threads = 0;
    std::set<std::string> sections;  // present in the file or the overrides
    std::string canonical;           // normalized TOML text of the merged input
};

namespace config_detail {

using Schema = std::map<std::string, std::set<std::string>>;

inline const Schema& schema() {
    static const Schema s = {
        {"", {"output", "threads", "multiplier", "kernel", "geometry", "integrator", "scenario", "velocity",
              "bounds", "pi"}},
        {"multiplier", {"kind", "table", "alpha", "eps", "beta1", "beta2", "beta3", "beta", "C", "eps1", "eps2"}},
        {"kernel", {"rho_min", "rho_max", "points", "tol"}},
        {"geometry", {"M", "domain", "mirror", "patch"}},
        {"geometry.patch", {"shape", "strength", "cx", "cy", "radius", "a", "b", "x0", "x1", "y0", "y1", "corner",
                            "epsilon", "c_star"}},
        {"integrator", {"dt", "cfl_factor", "t_end", "output_every", "reparam_every", "snapshots"}},
        {"scenario", {"epsilon", "c0", "k", "delta_G", "c", "N_k", "regime", "beta", "corner", "strict", "C_bar"}},
        {"velocity", {"domain", "odd_in_x1", "tol", "probes", "region"}},
        {"velocity.region", {"kind", "weight", "x0", "x1", "y0", "y1", "cx", "cy", "radius", "vertices"}},
        {"bounds", {"probes_per_wedge", "seed", "lo", "families"}},
        {"pi", {"points", "beta_min", "beta_max"}},
    };
    return s;
}

inline bool is_section(const std::string& k) {
    return k != "output" && k != "threads" && schema().at("").count(k);
}

inline void check_keys(const toml::table& t, const std::string& section) {
    const auto& allowed = schema().at(section);
    for (auto&& [k, v] : t) {
        const std::string key(k.str());
        const std::string path = section.empty() ? key : section + "." + key;
        if (!allowed.count(key)) throw ConfigError("unknown key '" + path + "'");
        if (section.empty() && is_section(key) && !v.is_table())
            throw ConfigError("'" + key + "' must be a table");
        if (schema().count(path) && !is_section(path)) {  // arrays of tables
            const auto* arr = v.as_array();
            if (!arr) throw ConfigError("'" + path + "' must be an array of tables");
            for (auto&& e : *arr) {
                if (!e.is_table()) throw ConfigError("'" + path + "' must be an array of tables");
                check_keys(*e.as_table(), path);
            }
        } else if (section.empty() && is_section(key)) {
            check_keys(*v.as_table(), key);
        }
    }
}

inline double number(const toml::node& n, const std::string& path) {
    if (auto v = n.value<double>()) return *v;
    throw ConfigError("'" + path + "' must be a number");
}

inline std::int64_t integer(const toml::node& n, const std::string& path) {
    if (n.is_integer()) return *n.value<std::int64_t>();
    throw ConfigError("'" + path + "' must be an integer");
}

inline std::size_t count(const toml::node& n, const std::string& path, std::size_t min) {
    const auto v = integer(n, path);
    if (v < static_cast<std::int64_t>(min))
        throw ConfigError("'" + path + "' must be >= " + std::to_string(min));
    return static_cast<std::size_t>(v);
}

inline bool boolean(const toml::node& n, const std::string& path) {
    if (auto v = n.value<bool>()) return *v;
    throw ConfigError("'" + path + "' must be true or false");
}

inline std::string text(const toml::node& n, const std::string& path) {
    if (auto v = n.value<std::string>()) return *v;
    throw ConfigError("'" + path + "' must be a string");
}

inline cplx point(const toml::node& n, const std::string& path) {
    const auto* a = n.as_array();
    if (!a || a->size() != 2) throw ConfigError("'" + path + "' must be a pair [x1, x2]");
    return {number(*a->get(0), path), number(*a->get(1), path)};
}

inline std::vector<cplx> points(const toml::node& n, const std::string& path) {
    const auto* a = n.as_array();
    if (!a) throw ConfigError("'" + path + "' must be an array of pairs");
    std::vector<cplx> out;
    for (std::size_t i = 0; i < a->size(); ++i)
        out.push_back(point(*a->get(i), path + "[" + std::to_string(i) + "]"));
    return out;
}

inline Domain domain(const toml::node& n, const std::string& path) {
    const auto s = text(n, path);
    if (s == "whole_plane") return Domain::whole_plane;
    if (s == "half_plane") return Domain::half_plane;
    throw ConfigError("'" + path + "' must be whole_plane or half_plane");
}

/// Catalog constructor for a kind, so the regime tag comes with it.
inline Multiplier make_multiplier(MultKind kind, const Multiplier& raw) {
    Multiplier m;
    switch (kind) {
        case MultKind::euler: m = euler_multiplier(); break;
        case MultKind::alpha_sqg: m = alpha_sqg(raw.param("alpha")); break;
        case MultKind::qgsw: m = qgsw(raw.param("eps")); break;
        case MultKind::log_power: m = log_power(raw.param("beta1")); break;
        case MultKind::loglog_power: m = loglog_power(raw.param("beta2")); break;
        case MultKind::logloglog: m = logloglog(raw.param("beta3")); break;
        case MultKind::alpha_log: m = alpha_log(raw.param("alpha"), raw.param("beta"), raw.param("C")); break;
        case MultKind::rational_alpha:
            m = rational_alpha(raw.param("alpha"), raw.param("eps1"), raw.param("eps2"));
            break;
        case MultKind::custom_table: m = raw; break;
    }
    for (const auto& [k, v] : raw.params)
        if (!m.params.count(k)) throw ConfigError("multiplier " + std::string(to_string(kind)) + " has no parameter '" + k + "'");
    validate(m);
    return m;
}

inline Multiplier parse_multiplier(const toml::table& t) {
    if (!t.contains("kind")) throw ConfigError("missing key 'multiplier.kind'");
    Multiplier raw;
    raw.kind = mult_kind_from_string(text(*t.get("kind"), "multiplier.kind"));
    for (auto&& [k, v] : t) {
        const std::string key(k.str());
        if (key == "kind") continue;
        if (key == "table") {
            if (raw.kind != MultKind::custom_table) throw ConfigError("'multiplier.table' needs kind = \"custom_table\"");
            for (auto p : points(v, "multiplier.table")) raw.table.emplace_back(p.real(), p.imag());
            continue;
        }
        raw.params[key] = number(v, "multiplier." + key);
    }
    return make_multiplier(raw.kind, raw);
}

inline void parse_region(RegionSet& set, const toml::table& t, const std::string& path) {
    auto need = [&](const char* k) {
        if (!t.contains(k)) throw ConfigError("missing key '" + path + "." + k + "'");
        return number(*t.get(k), path + "." + k);
    };
    const double w = t.contains("weight") ? number(*t.get("weight"), path + ".weight") : 1.0;
    const auto kind = t.contains("kind") ? text(*t.get("kind"), path + ".kind") : std::string();
    if (kind == "rectangle") {
        set.add_rectangle(need("x0"), need("x1"), need("y0"), need("y1"), w);
    } else if (kind == "disk") {
        set.add_disk({need("cx"), need("cy")}, need("radius"), w);
    } else if (kind == "polygon") {
        if (!t.contains("vertices")) throw ConfigError("missing key '" + path + ".vertices'");
        set.add_polygon(points(*t.get("vertices"), path + ".vertices"), w);
    } else {
        throw ConfigError("'" + path + ".kind' must be rectangle, disk or polygon");
    }
}

inline PatchSpec parse_patch(const toml::table& t, const std::string& path) {
    PatchSpec p;
    if (!t.contains("shape")) throw ConfigError("missing key '" + path + ".shape'");
    p.shape = shape_kind_from_string(text(*t.get("shape"), path + ".shape"));
    for (auto&& [k, v] : t) {
        const std::string key(k.str());
        if (key == "shape") continue;
        const double x = number(v, path + "." + key);
        if (key == "strength") p.strength = x;
        else p.params[key] = x;
    }
    return p;
}

inline ThetaFamily family(const std::string& s) {
    if (s == "triangle") return ThetaFamily::triangle;
    if (s == "box") return ThetaFamily::box;
    throw ConfigError("'bounds.families' entries must be triangle or box");
}

/// Parses the right-hand side of --set key=value as a TOML value; bare words
/// become strings.
inline void apply_override(toml::table& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
    std::string key = assignment.substr(0, eq), value = assignment.substr(eq + 1);
    std::string section, leaf = key;
    if (const auto dot = key.rfind('.'); dot != std::string::npos) {
        section = key.substr(0, dot);
        leaf = key.substr(dot + 1);
        if (!schema().count(section) || (!section.empty() && !is_section(section)))
            throw ConfigError("unknown key '" + key + "'");
    } else if (!schema().at("").count(leaf)) {
        std::vector<std::string> owners;
        for (const auto& [s, keys] : schema())
            if (is_section(s) && keys.count(leaf)) owners.push_back(s);
        if (owners.size() != 1)
            throw ConfigError(owners.empty() ? "unknown key '" + key + "'"
                                             : "ambiguous key '" + key + "'; qualify it as section." + key);
        section = owners.front();
    }
    if (!schema().at(section).count(leaf)) throw ConfigError("unknown key '" + key + "'");
    toml::table parsed;
    try {
        parsed = toml::parse("v = " + value);
    } catch (const toml::parse_error&) {
        parsed.insert_or_assign("v", value);
    }
    toml::table* target = &root;
    if (!section.empty()) {
        if (!root.contains(section)) root.insert_or_assign(section, toml::table{});
        target = root.get_as<toml::table>(section);
        if (!target) throw ConfigError("'" + section + "' must be a table");
    }
    if (section.empty() && leaf == "multiplier") {  // --set multiplier={kind="euler"} style
        if (!parsed.get("v")->is_table()) throw ConfigError("'multiplier' must be an inline table");
    }
    target->insert_or_assign(leaf, *parsed.get("v"));
}

}  // namespace config_detail

/// Reads a TOML-style configuration (text may be empty) with --set overrides
/// applied on top, checks every key against the schema and every value range.
inline RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {},
                              const std::string& origin = "config") {
    namespace cd = config_detail;
    toml::table root;
    try {
        root = toml::parse(text, origin);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << origin << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
        throw ConfigError(os.str());
    }
    for (const auto& o : overrides) cd::apply_override(root, o);
    cd::check_keys(root, "");

    RunConfig cfg;
    {
        std::ostringstream os;
        os << root;
        cfg.canonical = os.str();
    }
    for (auto&& [k, v] : root)
        if (cd::is_section(std::string(k.str()))) cfg.sections.insert(std::string(k.str()));

    if (auto n = root.get("output")) cfg.output = cd::text(*n, "output");
    if (auto n = root.get("threads")) cfg.threads = static_cast<unsigned>(cd::count(*n, "threads", 0));
    if (auto t = root.get_as<toml::table>("multiplier")) cfg.multiplier = cd::parse_multiplier(*t);

    if (auto t = root.get_as<toml::table>("kernel")) {
        auto& k = cfg.kernel;
        if (auto n = t->get("rho_min")) k.rho_min = cd::number(*n, "kernel.rho_min");
        if (auto n = t->get("rho_max")) k.rho_max = cd::number(*n, "kernel.rho_max");
        if (auto n = t->get("points")) k.points = cd::count(*n, "kernel.points", 64);
        if (auto n = t->get("tol")) k.tol = cd::number(*n, "kernel.tol");
        if (!(k.rho_min > 0) || !(k.rho_max > k.rho_min)) throw ConfigError("kernel: 0 < rho_min < rho_max violated");
        if (!(k.tol > 1e-14) || !(k.tol < 1e-3)) throw ConfigError("kernel: tol in (1e-14, 1e-3) violated");
    }

    if (auto t = root.get_as<toml::table>("geometry")) {
        auto& g = cfg.geometry;
        if (auto n = t->get("M")) g.M = cd::count(*n, "geometry.M", 32);
        if (g.M % 2) throw ConfigError("geometry: M even violated");
        if (auto n = t->get("domain")) g.domain = cd::domain(*n, "geometry.domain");
        if (auto n = t->get("mirror")) g.mirror = cd::boolean(*n, "geometry.mirror");
        if (auto a = t->get_as<toml::array>("patch"))
            for (std::size_t i = 0; i < a->size(); ++i)
                g.patches.push_back(cd::parse_patch(*a->get(i)->as_table(), "geometry.patch[" + std::to_string(i) + "]"));
    }

    if (auto t = root.get_as<toml::table>("integrator")) {
        auto& it = cfg.integrator;
        if (auto n = t->get("dt")) it.dt = cd::number(*n, "integrator.dt");
        if (auto n = t->get("cfl_factor")) it.cfl_factor = cd::number(*n, "integrator.cfl_factor");
        if (auto n = t->get("t_end")) it.t_end = cd::number(*n, "integrator.t_end");
        if (auto n = t->get("output_every")) it.output_every = cd::count(*n, "integrator.output_every", 1);
        if (auto n = t->get("reparam_every")) it.reparam_every = cd::count(*n, "integrator.reparam_every", 0);
        if (auto n = t->get("snapshots")) it.snapshots = cd::boolean(*n, "integrator.snapshots");
        if (!(it.dt > 0)) throw ConfigError("integrator: dt > 0 violated");
        if (!(it.cfl_factor > 0) || !(it.cfl_factor <= 1)) throw ConfigError("integrator: cfl_factor in (0, 1] violated");
        if (!(it.t_end >= 0)) throw ConfigError("integrator: t_end >= 0 violated");
    }

    auto& s = cfg.scenario;
    s.multiplier = cfg.multiplier;
    s.regime = cfg.multiplier.regime.kind == Regime::Kind::h2a ? BlowupRegime::A2a : BlowupRegime::A2b;
    if (auto t = root.get_as<toml::table>("scenario")) {
        if (auto n = t->get("epsilon")) s.epsilon = cd::number(*n, "scenario.epsilon");
        if (auto n = t->get("c0")) s.c0 = cd::number(*n, "scenario.c0");
        if (auto n = t->get("k")) s.slope_k = static_cast<int>(cd::count(*n, "scenario.k", 1));
        if (auto n = t->get("delta_G")) s.delta_G = cd::number(*n, "scenario.delta_G");
        if (auto n = t->get("c")) s.driving_c = cd::number(*n, "scenario.c");
        if (auto n = t->get("N_k")) s.N_k = cd::number(*n, "scenario.N_k");
        if (auto n = t->get("regime")) s.regime = blowup_regime_from_string(cd::text(*n, "scenario.regime"));
        if (auto n = t->get("beta")) s.beta = cd::number(*n, "scenario.beta");
        if (auto n = t->get("corner")) s.corner = cd::number(*n, "scenario.corner");
        if (auto n = t->get("strict")) s.strict_invariants = cd::boolean(*n, "scenario.strict");
        if (auto n = t->get("C_bar")) s.C_bar = cd::number(*n, "scenario.C_bar");
        for (const char* key : {"epsilon", "delta_G", "c", "N_k", "beta", "corner", "C_bar"})
            if (auto n = t->get(key); n && !(cd::number(*n, key) >= 0))
                throw ConfigError(std::string("scenario: ") + key + " >= 0 violated (0 selects the default)");
    }
    s.M = cfg.geometry.M;
    s.dt = cfg.integrator.dt;
    s.cfl_factor = cfg.integrator.cfl_factor;
    s.output_every = cfg.integrator.output_every;
    s.threads = cfg.threads;
    if (cfg.sections.count("scenario")) validate(s);

    if (auto t = root.get_as<toml::table>("velocity")) {
        auto& v = cfg.velocity;
        if (auto n = t->get("domain")) v.domain = cd::domain(*n, "velocity.domain");
        if (auto n = t->get("odd_in_x1")) v.theta.odd_in_x1 = cd::boolean(*n, "velocity.odd_in_x1");
        if (auto n = t->get("tol")) v.tol = cd::number(*n, "velocity.tol");
        if (auto n = t->get("probes")) v.probes = cd::points(*n, "velocity.probes");
        if (auto a = t->get_as<toml::array>("region"))
            for (std::size_t i = 0; i < a->size(); ++i)
                cd::parse_region(v.theta, *a->get(i)->as_table(), "velocity.region[" + std::to_string(i) + "]");
        if (!(v.tol > 0) || !(v.tol < 1e-2)) throw ConfigError("velocity: tol in (0, 1e-2) violated");
        validate(v.theta, v.domain);
        for (auto x : v.probes)
            if (v.domain == Domain::half_plane && x.imag() < 0) throw ConfigError("velocity: probe below the wall");
    }

    if (auto t = root.get_as<toml::table>("bounds")) {
        auto& b = cfg.bounds;
        if (auto n = t->get("probes_per_wedge")) b.probes_per_wedge = cd::count(*n, "bounds.probes_per_wedge", 1);
        if (auto n = t->get("seed")) b.seed = cd::count(*n, "bounds.seed", 0);
        if (auto n = t->get("lo")) b.lo = cd::number(*n, "bounds.lo");
        if (auto n = t->get("families")) {
            const auto* a = n->as_array();
            if (!a || a->empty()) throw ConfigError("'bounds.families' must be a non-empty array");
            b.families.clear();
            for (auto&& e : *a) b.families.push_back(cd::family(cd::text(e, "bounds.families")));
        }
        if (!(b.lo > 0) || !(b.lo < 1)) throw ConfigError("bounds: lo in (0, 1) violated");
    }

    if (auto t = root.get_as<toml::table>("pi")) {
        auto& p = cfg.pi;
        if (auto n = t->get("points")) p.points = cd::count(*n, "pi.points", 1);
        if (auto n = t->get("beta_min")) p.beta_min = cd::number(*n, "pi.beta_min");
        if (auto n = t->get("beta_max")) p.beta_max = cd::number(*n, "pi.beta_max");
        if (!(p.beta_min >= 0) || !(p.beta_max <= 1.0 / 3) || !(p.beta_min < p.beta_max))
            throw ConfigError("pi: 0 <= beta_min < beta_max <= 1/3 violated");
    }
    return cfg;
}

/// Sections a subcommand cannot run without.
inline void require_sections(const RunConfig& cfg, const std::string& command) {
    static const std::map<std::string, std::vector<std::string>> needs = {
        {"check-multiplier", {"multiplier"}},
        {"kernel-table", {"multiplier"}},
        {"simulate", {"multiplier", "geometry", "integrator"}},
        {"velocity-probe", {"multiplier", "velocity"}},
        {"blowup", {"multiplier", "scenario"}},
        {"verify-bounds", {"multiplier", "scenario"}},
        {"pi-scan", {}},
    };
    const auto it = needs.find(command);
    if (it == needs.end()) throw ConfigError("unknown subcommand '" + command + "'");
    for (const auto& s : it->second)
        if (!cfg.sections.count(s)) throw ConfigError(command + ": missing section [" + s + "]");
    if (command == "simulate") {
        if (cfg.geometry.patches.empty()) throw ConfigError("simulate: [[geometry.patch]] needs at least one entry");
        if (!(cfg.integrator.t_end > 0)) throw ConfigError("simulate: integrator.t_end > 0 required");
    }
    if (command == "velocity-probe") {
        if (cfg.velocity.theta.components.empty()) throw ConfigError("velocity-probe: [[velocity.region]] is empty");
        if (cfg.velocity.probes.empty()) throw ConfigError("velocity-probe: velocity.probes is empty");
    }
}

}  // namespace gsqg
