#include "gsqg/cli.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace gsqg;
namespace fs = std::filesystem;

namespace {

const char* full_config = R"(
output = "run"
threads = 1
multiplier = { kind = "alpha_sqg", alpha = 0.3 }

[kernel]
rho_min = 1e-5
rho_max = 100.0
points = 96
tol = 1e-10

[geometry]
M = 128
domain = "half_plane"
mirror = true
[[geometry.patch]]
shape = "circle"
cx = 1.0
cy = 1.0
radius = 0.25
strength = 2.0

[integrator]
dt = 0.002
cfl_factor = 0.4
t_end = 0.5
output_every = 5

[scenario]
epsilon = 0.005
k = 3
delta_G = 0.1
c = 0.7

[velocity]
odd_in_x1 = true
probes = [[0.1, 0.2], [0.3, 0.0]]
[[velocity.region]]
kind = "rectangle"
x0 = 0.0
x1 = 1.0
y0 = 0.0
y1 = 1.0
[[velocity.region]]
kind = "disk"
cx = 2.0
cy = 1.0
radius = 0.5
weight = -1.0

[bounds]
probes_per_wedge = 8
seed = 3
families = ["box"]

[pi]
points = 10
)";

void expect_config_error(const std::string& text, const std::vector<std::string>& overrides, const std::string& needle) {
    try {
        parse_config(text, overrides);
        ADD_FAILURE() << "no error, expected '" << needle << "'";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("gsqg_cli_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name) << text;
        return path / name;
    }
};

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "gsqg");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::dispatch(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

std::vector<std::vector<double>> csv_numbers(const fs::path& p) {
    std::ifstream f(p);
    std::string line;
    std::getline(f, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(f, line)) {
        std::vector<double> r;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) r.push_back(std::strtod(cell.c_str(), nullptr));
        rows.push_back(r);
    }
    return rows;
}

const char* tiny_kernel = "[kernel]\nrho_min = 1e-5\nrho_max = 1e3\npoints = 96\n";

}  // namespace

TEST(Config, ParsesEverySection) {
    const auto c = parse_config(full_config);
    EXPECT_EQ(c.output, "run");
    EXPECT_EQ(c.threads, 1u);
    EXPECT_EQ(c.multiplier.kind, MultKind::alpha_sqg);
    EXPECT_DOUBLE_EQ(c.multiplier.param("alpha"), 0.3);
    EXPECT_EQ(c.multiplier.regime.kind, Regime::Kind::h2b);
    EXPECT_EQ(c.kernel.points, 96u);
    EXPECT_DOUBLE_EQ(c.kernel.tol, 1e-10);
    EXPECT_EQ(c.geometry.M, 128u);
    EXPECT_EQ(c.geometry.domain, Domain::half_plane);
    EXPECT_TRUE(c.geometry.mirror);
    ASSERT_EQ(c.geometry.patches.size(), 1u);
    EXPECT_EQ(c.geometry.patches[0].shape, ShapeKind::circle);
    EXPECT_DOUBLE_EQ(c.geometry.patches[0].strength, 2.0);
    EXPECT_DOUBLE_EQ(c.geometry.patches[0].params.at("radius"), 0.25);
    EXPECT_DOUBLE_EQ(c.integrator.cfl_factor, 0.4);
    EXPECT_EQ(c.integrator.output_every, 5u);
    EXPECT_EQ(c.scenario.k(), 3);
    EXPECT_DOUBLE_EQ(c.scenario.driving_c, 0.7);
    EXPECT_EQ(c.scenario.regime, BlowupRegime::A2b);
    EXPECT_EQ(c.scenario.M, 128u);  // the scenario takes M and dt from geometry and integrator
    EXPECT_DOUBLE_EQ(c.scenario.dt, 0.002);
    EXPECT_EQ(c.velocity.theta.components.size(), 2u);
    EXPECT_DOUBLE_EQ(c.velocity.theta.components[1].weight, -1.0);
    EXPECT_EQ(c.velocity.probes.size(), 2u);
    EXPECT_EQ(c.bounds.families, std::vector<ThetaFamily>{ThetaFamily::box});
    EXPECT_EQ(c.pi.points, 10u);
    for (const char* s : {"multiplier", "kernel", "geometry", "integrator", "scenario", "velocity", "bounds", "pi"})
        EXPECT_TRUE(c.sections.count(s)) << s;
}

TEST(Config, EmptyTextGivesDefaults) {
    const auto c = parse_config("");
    EXPECT_TRUE(c.sections.empty());
    EXPECT_EQ(c.scenario.k(), 5);
    EXPECT_NO_THROW(require_sections(c, "pi-scan"));
    EXPECT_THROW(require_sections(c, "blowup"), ConfigError);
    EXPECT_THROW(require_sections(c, "simulate"), ConfigError);
    EXPECT_THROW(require_sections(c, "no-such-command"), ConfigError);
}

TEST(Config, RejectsUnknownKeysTypesAndRanges) {
    expect_config_error("colour = 1", {}, "unknown key 'colour'");
    expect_config_error("[kernel]\nrho_mni = 1.0", {}, "unknown key 'kernel.rho_mni'");
    expect_config_error("[[geometry.patch]]\nshape = \"circle\"\nradiuss = 1.0", {}, "geometry.patch.radiuss");
    expect_config_error("multiplier = { kind = \"warp\" }", {}, "unknown multiplier kind");
    expect_config_error("multiplier = { kind = \"euler\", alpha = 1.0 }", {}, "no parameter 'alpha'");
    expect_config_error("multiplier = { kind = \"alpha_sqg\" }", {}, "needs parameter 'alpha'");
    expect_config_error("multiplier = { kind = \"alpha_sqg\", alpha = -1.0 }", {}, "must be > 0");
    expect_config_error("[kernel]\npoints = 10", {}, "kernel.points' must be >= 64");
    expect_config_error("[kernel]\npoints = 100.5", {}, "must be an integer");
    expect_config_error("[kernel]\nrho_min = \"small\"", {}, "must be a number");
    expect_config_error("[geometry]\nM = 65", {}, "M even");
    expect_config_error("[integrator]\ndt = -1.0", {}, "dt > 0");
    expect_config_error("[scenario]\nepsilon = 0.5", {}, "0 < epsilon < c_star");
    expect_config_error("[scenario]\nregime = \"A3\"", {}, "unknown regime");
    expect_config_error("[velocity]\nprobes = [[1.0]]", {}, "must be a pair");
    expect_config_error("[velocity]\nodd_in_x1 = true\n[[velocity.region]]\nkind = \"rectangle\"\nx0 = -1.0\nx1 = 1.0\n"
                        "y0 = 0.0\ny1 = 1.0", {}, "x1 >= 0");
    expect_config_error("[pi]\nbeta_max = 0.5", {}, "beta_max <= 1/3");
    expect_config_error("kernel = 3", {}, "'kernel' must be a table");
    expect_config_error("[kernel\n", {}, "config:1");
}

TEST(Config, OverridesResolveKeys) {
    auto c = parse_config("", {"k=7", "scenario.N_k=100", "output=elsewhere", "M=64"});
    EXPECT_EQ(c.scenario.k(), 7);
    EXPECT_DOUBLE_EQ(c.scenario.N_k, 100);
    EXPECT_EQ(c.output, "elsewhere");
    EXPECT_EQ(c.geometry.M, 64u);
    EXPECT_TRUE(c.sections.count("scenario"));
    // alpha alone lands in [multiplier], which then lacks its kind
    expect_config_error("", {"alpha=0.2"}, "multiplier.kind");
    c = parse_config(full_config, {"multiplier.alpha=0.1", "regime=A2a"});
    EXPECT_DOUBLE_EQ(c.multiplier.param("alpha"), 0.1);
    EXPECT_EQ(c.scenario.regime, BlowupRegime::A2a);
    expect_config_error("", {"nonsense=1"}, "unknown key 'nonsense'");
    expect_config_error("", {"shape=ellipse"}, "unknown key 'shape'");  // lives in [[geometry.patch]]
    expect_config_error("", {"beta=0.1"}, "ambiguous key 'beta'");  // [multiplier] and [scenario]
    EXPECT_DOUBLE_EQ(parse_config("", {"epsilon=0.01"}).scenario.epsilon, 0.01);
    expect_config_error("", {"kernel.alpha=1"}, "unknown key 'kernel.alpha'");
    expect_config_error("", {"geometry.patch.radius=1"}, "unknown key");
    expect_config_error("", {"novalue"}, "key=value");
}

TEST(Config, CanonicalTextIgnoresKeyOrderAndComments) {
    const auto a = parse_config("[scenario]\nk = 3\nc = 1.5\n[pi]\npoints = 4\n");
    const auto b = parse_config("# reordered\n[pi]\npoints = 4\n\n[scenario]\nc = 1.5\nk = 3\n");
    EXPECT_EQ(a.canonical, b.canonical);
    EXPECT_EQ(cli::fnv1a(a.canonical), cli::fnv1a(b.canonical));
    const auto c = parse_config("[scenario]\nk = 3\nc = 1.5\n[pi]\npoints = 5\n");
    EXPECT_NE(cli::fnv1a(a.canonical), cli::fnv1a(c.canonical));
}

TEST(Cli, PiScanWithSlopeFiveHasTheSignPattern) {
    TempDir d;
    ASSERT_EQ(run({"pi-scan", "--set", "k=5", "--output", d.path.string()}), 0);
    const auto rows = csv_numbers(d.path / "pi_scan.csv");
    ASSERT_EQ(rows.size(), 64u);
    for (const auto& r : rows) {
        ASSERT_EQ(r.size(), 4u);
        EXPECT_GT(r[0], 0);
        EXPECT_LT(r[0], 1.0 / 3);
        EXPECT_LT(r[1], 0) << r[0];
        EXPECT_GT(r[2], 0) << r[0];
        EXPECT_NEAR(r[3], r[2] - 2 / (r[0] * std::pow(5e3, r[0])), 1e-9 * std::abs(r[2]));
    }
    EXPECT_EQ(slurp(d.path / "pi_scan.csv").substr(0, 19), "beta,Pi1,Pi2,margin");
}

TEST(Cli, EulerKernelTableIsConstant) {
    TempDir d;
    const auto cfg = d.write("c.toml", std::string("multiplier = { kind = \"euler\" }\n") + tiny_kernel);
    ASSERT_EQ(run({"kernel-table", "--config", cfg.string(), "--output", (d.path / "out").string()}), 0);
    const auto rows = csv_numbers(d.path / "out" / "kernel_table.csv");
    ASSERT_EQ(rows.size(), 96u);
    for (const auto& r : rows) {
        EXPECT_NEAR(r[1], 1 / two_pi, 1e-12);
        EXPECT_NEAR(r[2], 0, 1e-12);
        EXPECT_NEAR(r[3], -std::log(r[0]) / two_pi, 1e-9);  // R(ρ) = log(1/ρ)/(2π) with R(1) = 0
    }
    const auto meta = cli::json::parse(slurp(d.path / "out" / "kernel_table.json"));
    EXPECT_EQ(meta["normalization"], "R(1)=0");
    EXPECT_TRUE(meta.contains("quad_meta"));
    EXPECT_TRUE(meta["verify_asymptotics"]["pass"].get<bool>());
}

TEST(Cli, DivergentOsgoodBlowupExitsWithFour) {
    TempDir d;
    const auto out = d.path / "out";
    const auto cfg = d.write("c.toml", "multiplier = { kind = \"loglog_power\", beta2 = 1.0 }\n[scenario]\n");
    testing::internal::CaptureStderr();
    const int code = run({"blowup", "--config", cfg.string(), "--output", out.string()});
    const std::string err = testing::internal::GetCapturedStderr();
    EXPECT_EQ(code, 4);
    EXPECT_NE(err.find("no finite collision time"), std::string::npos) << err;
    EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, InvalidConfigFailsFastWithoutArtifacts) {
    TempDir d;
    const auto out = d.path / "out";
    for (std::vector<std::string> args :
         {std::vector<std::string>{"pi-scan", "--set", "k=0"}, {"blowup", "--set", "scenario.epsilon=0.9"},
          {"simulate"}, {"kernel-table", "--config", (d.path / "missing.toml").string()}, {"no-such-command"},
          {"pi-scan", "--threads", "-2"}}) {
        args.push_back("--output");
        args.push_back(out.string());
        const auto t0 = std::chrono::steady_clock::now();
        testing::internal::CaptureStderr();
        const int code = run(args);
        const std::string err = testing::internal::GetCapturedStderr();
        EXPECT_EQ(code, 2) << args[0];
        EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 1.0);
        EXPECT_FALSE(fs::exists(out));
        // first line is a single machine-readable record
        const auto first = cli::json::parse(err.substr(0, err.find('\n')));
        EXPECT_EQ(first["status"], "config_error");
        EXPECT_EQ(first["exit_code"], 2);
    }
}

TEST(Cli, RunsAreByteIdentical) {
    TempDir d;
    const auto cfg = d.write("c.toml", std::string("multiplier = { kind = \"alpha_sqg\", alpha = 0.25 }\n") + tiny_kernel +
                                           "[geometry]\nM = 64\n[[geometry.patch]]\nshape = \"ellipse\"\na = 1.0\n"
                                           "b = 0.5\n[integrator]\ndt = 0.01\nt_end = 0.03\noutput_every = 1\n");
    ASSERT_EQ(run({"simulate", "--config", cfg.string(), "--output", (d.path / "a").string(), "--threads", "1"}), 0);
    ASSERT_EQ(run({"simulate", "--config", cfg.string(), "--output", (d.path / "b").string(), "--threads", "2"}), 0);
    for (const char* f : {"diagnostics.csv", "snapshots/snapshot_000000.csv", "snapshots/snapshot_000003.csv"}) {
        ASSERT_TRUE(fs::exists(d.path / "a" / f)) << f;
        EXPECT_EQ(slurp(d.path / "a" / f), slurp(d.path / "b" / f)) << f;
    }
    const auto diag = csv_numbers(d.path / "a" / "diagnostics.csv");
    ASSERT_EQ(diag.size(), 4u);
    EXPECT_NEAR(diag.back()[0], 0.03, 1e-15);
    EXPECT_NEAR(diag.back()[1], std::numbers::pi / 2, 1e-6);  // ellipse area, conserved
    const auto ma = cli::json::parse(slurp(d.path / "a" / "manifest.json"));
    const auto mb = cli::json::parse(slurp(d.path / "b" / "manifest.json"));
    EXPECT_EQ(ma["config_hash"], mb["config_hash"]);
    EXPECT_EQ(ma["tool_version"], cli::tool_version);
    EXPECT_TRUE(ma["wall_time_seconds"].is_number());
    EXPECT_EQ(ma["threads"], 1);
    EXPECT_EQ(mb["threads"], 2);
    for (const auto& e : fs::recursive_directory_iterator(d.path / "a"))
        EXPECT_NE(e.path().filename().string().back(), 'p') << "leftover temp file " << e.path();
}

TEST(Cli, ThreadsEnvironmentVariableIsHonoured) {
    TempDir d;
    ::setenv("GSQG_THREADS", "3", 1);
    ASSERT_EQ(run({"pi-scan", "--set", "pi.points=4", "--output", d.path.string()}), 0);
    ::unsetenv("GSQG_THREADS");
    EXPECT_EQ(cli::json::parse(slurp(d.path / "manifest.json"))["threads"], 3);
}

TEST(Cli, VelocityProbeWritesSplitColumns) {
    TempDir d;
    const auto cfg = d.write("c.toml", std::string("multiplier = { kind = \"alpha_sqg\", alpha = 0.25 }\n") + tiny_kernel +
                                           "[velocity]\nodd_in_x1 = true\nprobes = [[0.1, 0.2], [0.5, 0.0]]\n"
                                           "[[velocity.region]]\nkind = \"rectangle\"\nx0 = 0.0\nx1 = 1.0\ny0 = 0.0\n"
                                           "y1 = 1.0\n");
    ASSERT_EQ(run({"velocity-probe", "--config", cfg.string(), "--output", d.path.string()}), 0);
    const auto text = slurp(d.path / "velocity_probe.csv");
    EXPECT_EQ(text.substr(0, text.find('\n')), "x1,x2,u1,u2,u1_bad,u1_good,u2_bad,u2_good,err_estimate");
    EXPECT_NE(text.find("\n0.10000000000000001,0.20000000000000001,"), std::string::npos);  // 17 digits
    const auto rows = csv_numbers(d.path / "velocity_probe.csv");
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& r : rows) {
        EXPECT_NEAR(r[2], r[4] + r[5], 1e-9);
        EXPECT_NEAR(r[3], r[6] + r[7], 1e-9);
    }
    EXPECT_LE(std::abs(rows[1][3]), 1e-8 * std::abs(rows[1][2]));  // wall: u₂ = 0
}

TEST(Cli, CheckMultiplierReportsHypothesesAndOsgood) {
    TempDir d;
    ASSERT_EQ(run({"check-multiplier", "--set", "multiplier={kind=\"loglog_power\", beta2=1.0}", "--output",
                   d.path.string()}),
              0);
    const auto j = cli::json::parse(slurp(d.path / "hypotheses.json"));
    EXPECT_TRUE(j["hypotheses"]["H1"]["pass"].get<bool>());
    EXPECT_EQ(j["osgood"]["classification"], "divergent");
    EXPECT_EQ(j["multiplier"]["kind"], "loglog_power");
}
