#pragma once
#include "gsqg/config.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace gsqg::cli {

inline constexpr const char* tool_version = "gsqg 1.0.0";

namespace fs = std::filesystem;
using json = nlohmann::json;

inline std::string g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// One CSV line, doubles with 17 significant digits.
class Csv {
public:
    explicit Csv(std::initializer_list<std::string> header) { row_text(header); }
    explicit Csv(const std::vector<std::string>& header) { row_text(header); }
    template <class... T>
    void row(const T&... cells) {
        bool first = true;
        ((os_ << (first ? "" : ",") << cell(cells), first = false), ...);
        os_ << '\n';
    }
    void row(const std::vector<double>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << g17(cells[i]);
        os_ << '\n';
    }
    std::string str() const { return os_.str(); }

private:
    static std::string cell(double x) { return g17(x); }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    template <class I>
        requires std::is_integral_v<I>
    static std::string cell(I i) { return std::to_string(i); }
    template <class R>
    void row_text(const R& header) {
        bool first = true;
        for (const auto& h : header) os_ << (first ? "" : ",") << h, first = false;
        os_ << '\n';
    }
    std::ostringstream os_;
};

/// Artifacts are collected in memory and published by temp + rename once the
/// command has finished, so a failed run leaves nothing behind.
class Artifacts {
public:
    void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }
    void publish(const fs::path& dir) const {
        for (const auto& [name, content] : files_) {
            const fs::path target = dir / name;
            fs::create_directories(target.parent_path());
            const fs::path tmp = target.parent_path() / ("." + target.filename().string() + ".tmp");
            {
                std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
                f << content;
                if (!f) throw Error("cannot write " + tmp.string());
            }
            fs::rename(tmp, target);
        }
    }
    std::vector<std::string> names() const {
        std::vector<std::string> n;
        for (const auto& f : files_) n.push_back(f.first);
        return n;
    }

private:
    std::vector<std::pair<std::string, std::string>> files_;
};

inline std::string fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json to_json(const LimitEstimate& e) {
    json s = json::array();
    for (double v : e.samples) s.push_back(finite_or_null(v));
    return {{"value", finite_or_null(e.value)}, {"samples", s}};
}

inline json to_json(const HypothesisReport& r) {
    json orders = json::array();
    for (double v : r.mh_ratio_by_order) orders.push_back(finite_or_null(v));
    return {{"H1",
             {{"pass", r.pass_h1},
              {"mh_ratio_max", finite_or_null(r.mh_ratio_max)},
              {"mh_ratio_by_order", orders},
              {"m_min", r.m_min},
              {"mprime_min", r.mprime_min},
              {"m0_plus", r.m0_plus},
              {"r_mprime_0plus", r.r_mprime_0plus},
              {"doubling_ok", r.doubling_ok}}},
            {"H2a",
             {{"pass", r.pass_h2a},
              {"m_unbounded", r.m_unbounded},
              {"gamma", to_json(r.h2a_gamma)},
              {"curvature", to_json(r.h2a_curv)}}},
            {"H2b",
             {{"pass", r.pass_h2b},
              {"alpha", to_json(r.h2b_alpha)},
              {"second", to_json(r.h2b_second)},
              {"third", to_json(r.h2b_third)},
              {"fourth", to_json(r.h2b_fourth)}}},
            {"tail_grid", {{"s", r.tail_grid.s}, {"extrapolation", r.tail_grid.extrapolation}}},
            {"grid_points", r.grid_points},
            {"grid_decades", r.grid_decades},
            {"tolerance", r.tolerance}};
}

inline json to_json(const OsgoodResult& o) {
    return {{"classification", o.classification == Osgood::convergent ? "convergent" : "divergent"},
            {"partial_value", finite_or_null(o.partial_value)},
            {"partial_error", finite_or_null(o.partial_error)},
            {"level", o.level},
            {"exponent", finite_or_null(o.exponent)},
            {"boundary", o.boundary}};
}

inline json to_json(const Multiplier& m) {
    json j = {{"kind", to_string(m.kind)}};
    for (const auto& [k, v] : m.params) j[k] = v;
    return j;
}

struct Context {
    RunConfig cfg;
    Artifacts out;
    json summary = json::object();
};

inline KernelTable make_table(const RunConfig& cfg) {
    const auto& k = cfg.kernel;
    return build_table(cfg.multiplier, k.rho_min, k.rho_max, k.points, k.tol, cfg.threads);
}

// ---- subcommands ---------------------------------------------------------------------

inline int check_multiplier(Context& ctx) {
    const auto& m = ctx.cfg.multiplier;
    json j = {{"multiplier", to_json(m)}};
    j["hypotheses"] = to_json(check_hypotheses(m, log_grid(1e-6, 1e6, 241)));
    for (auto [name, q] : {std::pair{"osgood", 1.0}, std::pair{"power_growth", 0.0}}) {
        try {
            j[name] = to_json(classify_osgood(m, 2.0, 1e12, q));
        } catch (const IndeterminateError& e) {
            j[name] = {{"classification", "indeterminate"}, {"message", e.what()}};
        }
    }
    ctx.out.add("hypotheses.json", j.dump(2) + "\n");
    ctx.summary = {{"H1", j["hypotheses"]["H1"]["pass"]},
                   {"H2a", j["hypotheses"]["H2a"]["pass"]},
                   {"H2b", j["hypotheses"]["H2b"]["pass"]},
                   {"osgood", j["osgood"]["classification"]}};
    return 0;
}

inline int kernel_table(Context& ctx) {
    const auto t = make_table(ctx.cfg);
    Csv csv{"rho", "G", "Gprime", "R"};
    for (std::size_t i = 0; i < t.size(); ++i) csv.row(t.rho_grid[i], t.G_vals[i], t.Gp_vals[i], t.R_vals[i]);
    ctx.out.add("kernel_table.csv", csv.str());
    json j = {{"multiplier", to_json(ctx.cfg.multiplier)},
              {"normalization", t.normalization},
              {"m0_plus", t.m0_plus},
              {"max_probe_error", t.max_probe_error},
              {"quad_meta",
               {{"abs_tol", t.quad_meta.abs_tol},
                {"rel_tol", t.quad_meta.rel_tol},
                {"truncation_r_max", t.quad_meta.truncation_r_max},
                {"num_bessel_zeros_used", t.quad_meta.num_bessel_zeros_used}}}};
    const auto a = verify_asymptotics(t, ctx.cfg.multiplier);
    j["verify_asymptotics"] = {{"pass", a.pass},
                               {"message", a.message},
                               {"c_bar_fit", a.c_bar_fit},
                               {"C_fit", a.C_fit},
                               {"band", {a.band_lo, a.band_hi}},
                               {"monotone", a.monotone_flag},
                               {"c_bar0_fit", a.c_bar0_fit},
                               {"h2b_derivative_error", a.h2b_derivative_error},
                               {"h2b_scaling_error", a.h2b_scaling_error}};
    ctx.out.add("kernel_table.json", j.dump(2) + "\n");
    ctx.summary = {{"points", t.size()}, {"asymptotics_pass", a.pass}};
    return 0;
}

inline int simulate(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto& g = cfg.geometry;
    const auto& it = cfg.integrator;
    std::vector<PatchContour> patches;
    for (const auto& p : g.patches) {
        auto c = init_shape(p.shape, p.params, g.M);
        c.strength = p.strength;
        patches.push_back(std::move(c));
    }
    ContourSystem sys = make_system(std::move(patches), g.domain, g.mirror);
    const auto table = make_table(cfg);
    StepOptions sopt;
    sopt.cfl_factor = it.cfl_factor;
    sopt.reparam_every = it.reparam_every;
    sopt.rhs.threads = worker_count(cfg.threads);
    sopt.check_cfl = false;  // dt is capped below

    std::vector<std::string> header{"time"};
    const std::size_t n = sys.patches.size();
    for (std::size_t k = 0; k < n; ++k) header.push_back("area_" + std::to_string(k));
    header.push_back("h2");
    for (std::size_t k = 0; k < n; ++k) header.push_back("arc_chord_" + std::to_string(k));
    for (const char* h : {"delta", "w_norm", "param_residual"}) header.push_back(h);
    Csv diag(header);
    std::size_t snaps = 0;
    auto record = [&] {
        const auto d = diagnostics(sys);
        std::vector<double> row{sys.time};
        row.insert(row.end(), d.area.begin(), d.area.end());
        row.push_back(d.h2_norm);
        row.insert(row.end(), d.arc_chord_sup.begin(), d.arc_chord_sup.end());
        row.insert(row.end(), {d.gap, d.w_norm, d.param_residual});
        diag.row(row);
        if (it.snapshots) {
            Csv s{"patch_id", "zeta_index", "x1", "x2"};
            for (std::size_t k = 0; k < n; ++k)
                for (std::size_t i = 0; i < sys.patches[k].size(); ++i)
                    s.row(k, i, sys.patches[k].nodes[i].real(), sys.patches[k].nodes[i].imag());
            char name[64];
            std::snprintf(name, sizeof name, "snapshots/snapshot_%06zu.csv", sys.step_count);
            ctx.out.add(name, s.str());
            ++snaps;
        }
        if (!d.finite) throw NumericError("simulate: non-finite diagnostics at t = " + g17(sys.time));
    };

    RhsResult rhs = compute_rhs(sys, table, sopt.rhs);
    record();
    while (sys.time < it.t_end * (1 - 1e-12)) {
        const double dt = std::min({it.dt, cfl_limit(sys, rhs, it.cfl_factor), it.t_end - sys.time});
        sys = step(sys, table, dt, sopt, &rhs);
        rhs = compute_rhs(sys, table, sopt.rhs);
        if (sys.step_count % it.output_every == 0) record();
    }
    if (sys.step_count % it.output_every != 0) record();
    ctx.out.add("diagnostics.csv", diag.str());
    ctx.summary = {{"steps", sys.step_count}, {"snapshots", snaps}, {"t_end", sys.time}};
    return 0;
}

inline int velocity_probe(Context& ctx) {
    const auto& v = ctx.cfg.velocity;
    const auto table = make_table(ctx.cfg);
    VelocityOptions opt;
    opt.tol = v.tol;
    const bool split = v.theta.odd_in_x1 && v.domain == Domain::half_plane;
    struct Row {
        VelocityResult u;
        SplitVelocities s;
        bool has_split = false;
    };
    std::vector<Row> rows(v.probes.size());
    parallel_for(rows.size(), worker_count(ctx.cfg.threads), [&](std::size_t i) {
        const cplx x = v.probes[i];
        rows[i].u = velocity_area(x, v.theta, table, v.domain, opt);
        if (split && x.real() >= 0) {
            rows[i].s = split_velocities(x, v.theta, table, opt);
            rows[i].has_split = true;
        }
    });
    const double nan = std::numeric_limits<double>::quiet_NaN();
    Csv csv{"x1", "x2", "u1", "u2", "u1_bad", "u1_good", "u2_bad", "u2_good", "err_estimate"};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const auto& s = r.s;
        csv.row(v.probes[i].real(), v.probes[i].imag(), r.u.u.real(), r.u.u.imag(), r.has_split ? s.u1_bad : nan,
                r.has_split ? s.u1_good : nan, r.has_split ? s.u2_bad : nan, r.has_split ? s.u2_good : nan,
                r.u.error + (r.has_split ? s.error : 0.0));
    }
    ctx.out.add("velocity_probe.csv", csv.str());
    ctx.summary = {{"probes", rows.size()}};
    return 0;
}

inline std::string bounds_csv(const BoundsReport& rep) {
    Csv csv{"wedge", "theta", "x1", "x2", "scale", "skipped", "u1", "u2", "u1_bad", "u1_good", "u2_bad",
            "u2_good", "err_estimate", "F_unit", "ratio", "T2", "T11", "T12", "T13", "U1", "V1", "V2",
            "slack_bad1", "slack_good1", "slack_bad2", "slack_good2", "slack_F"};
    for (const auto& r : rep.probes)
        csv.row(to_string(r.probe.wedge), to_string(r.theta), r.probe.x.real(), r.probe.x.imag(), r.scale,
                r.skipped ? 1 : 0, r.u1, r.u2, r.u1_bad, r.u1_good, r.u2_bad, r.u2_good, r.error, r.F_unit, r.ratio,
                r.T2, r.T11, r.T12, r.T13, r.U1, r.V1, r.V2, r.slack_bad1, r.slack_good1, r.slack_bad2,
                r.slack_good2, r.slack_F);
    return csv.str();
}

/// Fills in driving_c and δ_G from the probe audit when the config leaves them 0.
inline std::optional<BoundsFit> ensure_constants(RunConfig& cfg, const KernelTable& table) {
    auto& s = cfg.scenario;
    if (s.driving_c > 0 && s.delta_G > 0) return std::nullopt;
    auto fit = fit_bounds(s, table, cfg.bounds.probes_per_wedge, cfg.bounds.seed, cfg.threads);
    if (!(s.delta_G > 0)) s.delta_G = fit.delta_G;
    if (!(s.driving_c > 0)) s.driving_c = fit.driving_c;
    for (auto& r : fit.report.probes)
        if (!r.skipped)
            r.slack_F = r.probe.wedge == Wedge::u1 ? -s.driving_c * r.F_unit - r.u1 : r.u2 - s.driving_c * r.F_unit;
    return fit;
}

inline int verify_bounds(Context& ctx) {
    auto& cfg = ctx.cfg;
    const auto table = make_table(cfg);
    BoundsReport rep;
    auto fit = ensure_constants(cfg, table);
    if (fit) {
        rep = fit->report;
    } else {
        const auto& b = cfg.bounds;
        const int k = cfg.scenario.k();
        auto probes = wedge_probes(k, cfg.scenario.delta_G, Wedge::u1, b.probes_per_wedge, b.seed, b.lo);
        auto p2 = wedge_probes(k, cfg.scenario.delta_G, Wedge::u2, b.probes_per_wedge, b.seed + 1, b.lo);
        probes.insert(probes.end(), p2.begin(), p2.end());
        rep = verify_velocity_bounds(cfg.scenario, table, probes, b.families, cfg.threads);
    }
    ctx.out.add("bounds.csv", bounds_csv(rep));
    double min_slack_F = std::numeric_limits<double>::infinity();
    for (const auto& r : rep.probes)
        if (!r.skipped && r.scale <= cfg.scenario.delta_G) min_slack_F = std::min(min_slack_F, r.slack_F);
    json j = {{"fitted", fit.has_value()},
              {"delta_G", cfg.scenario.delta_G},
              {"driving_c", cfg.scenario.driving_c},
              {"min_ratio", finite_or_null(rep.min_ratio)},
              {"min_integral_slack", finite_or_null(rep.min_integral_slack)},
              {"min_slack_F", finite_or_null(min_slack_F)},
              {"probes", rep.probes.size()},
              {"skipped", rep.skipped}};
    ctx.out.add("bounds.json", j.dump(2) + "\n");
    ctx.summary = j;
    return 0;
}

inline int blowup(Context& ctx) {
    auto& cfg = ctx.cfg;
    auto& s = cfg.scenario;
    const double t_end = cfg.integrator.t_end;
    // the cheap Osgood certificate settles divergent kernels before any quadrature
    if (!(t_end > 0) && s.multiplier.kind != MultKind::custom_table &&
        classify_osgood(s.multiplier, 2.0, 1e12, s.regime == BlowupRegime::A2a ? 1.0 : 0.0).classification ==
            Osgood::divergent)
        throw NoFiniteCollisionTime(std::string("no finite collision time: integral of 2/F diverges at 0 for ") +
                                    to_string(s.multiplier.kind) + " in " + to_string(s.regime) + " mode");
    const auto table = make_table(cfg);
    ensure_constants(cfg, table);
    RunOptions ro;
    ro.t_end = t_end;
    const auto res = run_scenario(s, table, ro);
    Csv csv{"time", "X", "T_star", "gap", "margin", "front_min_x1", "w_norm", "area_0", "area_1", "max_speed"};
    for (const auto& r : res.series)
        csv.row(r.time, r.X, r.T_star, r.gap, r.margin, r.front_min_x1, r.w_norm, r.area, r.twin_area, r.max_speed);
    ctx.out.add("series.csv", csv.str());
    json j = {{"outcome", to_string(res.outcome)},
              {"exit_segment", to_string(res.exit_segment)},
              {"exit_time", finite_or_null(res.exit_time)},
              {"T_star", finite_or_null(res.T_star)},
              {"t_end", res.t_end},
              {"steps", res.steps},
              {"final_time", res.series.empty() ? 0.0 : res.series.back().time},
              {"fitted_constants",
               {{"driving_c", s.driving_c}, {"delta_G", s.delta_G}, {"C_bar", res.C_bar_fit}}},
              {"notes", res.notes}};
    ctx.out.add("verdict.json", j.dump(2) + "\n");
    ctx.summary = {{"outcome", j["outcome"]}, {"T_star", j["T_star"]}, {"steps", res.steps}};
    return res.outcome == Outcome::diagnostics_blowup ? 3 : 0;
}

inline int pi_scan(Context& ctx) {
    const auto& p = ctx.cfg.pi;
    const int k = ctx.cfg.scenario.k();
    const double Nk = ctx.cfg.scenario.Nk();
    Csv csv{"beta", "Pi1", "Pi2", "margin"};
    std::size_t signs_ok = 0;
    for (std::size_t i = 1; i <= p.points; ++i) {
        const double beta = p.beta_min + (p.beta_max - p.beta_min) * static_cast<double>(i) / (p.points + 1);
        const auto v = pi_indices(beta, k, Nk);
        csv.row(beta, v.Pi1, v.Pi2, v.margin);
        signs_ok += v.Pi1 < 0 && v.Pi2 > 0;
    }
    ctx.out.add("pi_scan.csv", csv.str());
    ctx.summary = {{"k", k}, {"points", p.points}, {"sign_pattern_holds", signs_ok}};
    return 0;
}

// ---- dispatch --------------------------------------------------------------------------

inline void report_error(const char* status, int code, const std::string& message) {
    std::cerr << json{{"status", status}, {"exit_code", code}, {"message", message}}.dump() << "\n";
    static const std::map<int, const char*> meaning = {
        {2, "the configuration is invalid; nothing was computed or written"},
        {3, "a numerical procedure failed; no artifacts were written"},
        {4, "expected negative outcome for this input"}};
    std::cerr << "gsqg: " << meaning.at(code) << ": " << message << "\n";
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

/// Entry point: returns the process exit status (0, 2, 3 or 4).
inline int dispatch(int argc, const char* const* argv) {
    CLI::App app{"Generalized SQG patch dynamics: kernels, contour evolution, velocity audits and the blowup scenario"};
    app.set_version_flag("--version", tool_version);
    std::string config_path, output_dir;
    std::vector<std::string> overrides;
    int threads = -1;
    app.add_option("--config", config_path, "TOML-style configuration file");
    app.add_option("--set", overrides, "override key=value (section.key, or a key unique to one section)");
    app.add_option("--threads", threads, "worker cap (default: GSQG_THREADS, else all cores)")->check(CLI::NonNegativeNumber);
    app.add_option("--output", output_dir, "artifact directory (overrides the config's output)");
    app.require_subcommand(1, 1);
    app.fallthrough();
    const std::map<std::string, std::pair<const char*, int (*)(Context&)>> commands = {
        {"check-multiplier", {"(H1)/(H2) hypothesis report and Osgood classification", check_multiplier}},
        {"kernel-table", {"tabulate G, G', R", kernel_table}},
        {"simulate", {"evolve patches, write snapshots and diagnostics", simulate}},
        {"velocity-probe", {"velocity of a region set at probe points", velocity_probe}},
        {"blowup", {"the collision scenario: series and verdict", blowup}},
        {"verify-bounds", {"audit and fit the driving-rate velocity bounds", verify_bounds}},
        {"pi-scan", {"the two sign indices over a beta grid", pi_scan}},
    };
    for (const auto& [name, c] : commands) app.add_subcommand(name, c.first);

    const auto started = std::chrono::steady_clock::now();
    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e);
        } catch (const CLI::CallForAllHelp& e) {
            return app.exit(e);
        } catch (const CLI::CallForVersion& e) {
            return app.exit(e);
        } catch (const CLI::ParseError& e) {
            throw ConfigError(e.what());
        }
        const std::string command = app.get_subcommands().front()->get_name();
        Context ctx;
        const std::string text = config_path.empty() ? std::string() : read_file(config_path);
        ctx.cfg = parse_config(text, overrides, config_path.empty() ? "config" : config_path);
        if (threads >= 0) ctx.cfg.threads = static_cast<unsigned>(threads);
        else if (!ctx.cfg.threads) ctx.cfg.threads = worker_count(0);
        ctx.cfg.scenario.threads = ctx.cfg.threads;
        require_sections(ctx.cfg, command);
        const fs::path dir = output_dir.empty() ? fs::path(ctx.cfg.output) : fs::path(output_dir);
        if (fs::exists(dir) && !fs::is_directory(dir)) throw ConfigError("output '" + dir.string() + "' is not a directory");

        const int code = commands.at(command).second(ctx);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        json manifest = {{"tool_version", tool_version},
                         {"subcommand", command},
                         {"config_hash", "fnv1a64:" + fnv1a(ctx.cfg.canonical)},
                         {"config", ctx.cfg.canonical},
                         {"threads", ctx.cfg.threads},
                         {"wall_time_seconds", wall},
                         {"exit_code", code},
                         {"artifacts", ctx.out.names()},
                         {"summary", ctx.summary}};
        ctx.out.add("manifest.json", manifest.dump(2) + "\n");
        ctx.out.publish(dir);
        std::cout << command << ": " << ctx.summary.dump() << " -> " << dir.string() << "\n";
        return code;
    } catch (const ConfigError& e) {
        report_error("config_error", 2, e.what());
        return 2;
    } catch (const NoFiniteCollisionTime& e) {
        report_error("no_finite_collision_time", 4, e.what());
        return 4;
    } catch (const std::exception& e) {
        report_error("numeric_failure", 3, e.what());
        return 3;
    }
}

}  // namespace gsqg::cli
