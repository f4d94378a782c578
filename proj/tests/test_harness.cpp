#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>

#include "nse/harness.hpp"

using namespace nse;
namespace fs = std::filesystem;

namespace {

const char* kMinimalConfig = R"(
# minimal truth setup
domain.L = 6.283185307179586
domain.N = 8
domain.nu = 1.0
forcing.pattern = taylor-green
forcing.amplitude = 1.0
init.seed = 5
nudging.dt = 1e-3
nudging.T = 0.01
)";

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("nse_harness_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("key-value parsing: comments, whitespace, types") {
    KeyValueConfig kv = KeyValueConfig::parse(
        "a.b = 3.5   # trailing comment\n"
        "# full-line comment\n"
        "  c.d=hello  \n"
        "e = 1,2, 3\n"
        "flag = true\n");
    CHECK(kv.get_double("a.b") == 3.5);
    CHECK(kv.require("c.d") == "hello");
    CHECK(kv.get_int_list("e") == std::vector<long>{1, 2, 3});
    CHECK(kv.get_bool("flag"));
    CHECK(kv.get("missing", "dflt") == "dflt");
    CHECK(kv.get_int("also.missing", 7) == 7);
}

TEST_CASE("parse errors carry the offending field name") {
    KeyValueConfig kv = KeyValueConfig::parse("x = nan-ish\n");
    CHECK_THROWS_WITH_AS(kv.require("domain.N"), doctest::Contains("domain.N"), ConfigError);
    CHECK_THROWS_WITH_AS(kv.get_double("x"), doctest::Contains("x"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("not a key value line\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse(" = value\n"), ConfigError);
}

TEST_CASE("experiment config resolves defaults and rejects bad kinds") {
    KeyValueConfig kv = KeyValueConfig::parse(kMinimalConfig);
    ExperimentConfig cfg = ExperimentConfig::from(kv);
    CHECK(cfg.domain.N == 8);
    CHECK(cfg.seed == 5);
    CHECK(cfg.nudging.kind == ObsKind::Nodal);
    CHECK(!cfg.mu_auto);
    KeyValueConfig bad =
        KeyValueConfig::parse(std::string(kMinimalConfig) + "observer.kind = fourier\n");
    CHECK_THROWS_AS(ExperimentConfig::from(bad), ConfigError);
}

TEST_CASE("mu = auto flag") {
    KeyValueConfig kv =
        KeyValueConfig::parse(std::string(kMinimalConfig) + "nudging.mu = auto\n");
    ExperimentConfig cfg = ExperimentConfig::from(kv);
    CHECK(cfg.mu_auto);
}

TEST_CASE("decay fit recovers a synthetic exponential") {
    TwinSeries s;
    for (int i = 0; i <= 50; ++i) {
        TwinRecord r{};
        r.t = 0.02 * i;
        r.err_l2 = 2.0 * std::exp(-7.5 * r.t);
        s.records.push_back(r);
    }
    DecayFit fit = fit_decay_slope(s);
    REQUIRE(fit.ok);
    CHECK(fit.slope == doctest::Approx(-7.5).epsilon(1e-10));
    CHECK(fit.t_begin > 0.0);   // transient excluded
}

TEST_CASE("decay fit refuses degenerate series") {
    TwinSeries s;
    TwinRecord r{};
    r.t = 0.0;
    r.err_l2 = 1.0;
    s.records.push_back(r);
    CHECK(!fit_decay_slope(s).ok);
}

TEST_CASE("manifest carries the config and replay is byte-identical") {
    KeyValueConfig kv = KeyValueConfig::parse(kMinimalConfig);
    HarnessOptions opt;
    opt.out_dir = fresh_dir("truth_a");
    RunOutcome out = dispatch("truth", kv, opt);
    CHECK(!out.instability);
    REQUIRE(fs::exists(opt.out_dir / "manifest.json"));
    REQUIRE(fs::exists(opt.out_dir / "truth.csv"));

    nlohmann::json m = nlohmann::json::parse(read_file(opt.out_dir / "manifest.json"));
    CHECK(m["command"] == "truth");
    CHECK(m["seed"] == 5);
    CHECK(m["config"] == kv.text());
    CHECK(m["config_hash"] == hex64(fnv1a64(kv.text())));

    HarnessOptions opt2;
    opt2.out_dir = fresh_dir("truth_b");
    ReplayResult rep = replay_run(opt.out_dir / "manifest.json", opt2);
    CHECK(rep.compared);
    CHECK(rep.identical);
    CHECK(rep.mismatches.empty());
}

TEST_CASE("seed override changes outputs and is recorded") {
    KeyValueConfig kv = KeyValueConfig::parse(kMinimalConfig);
    HarnessOptions a;
    a.out_dir = fresh_dir("seed_a");
    dispatch("truth", kv, a);
    HarnessOptions b;
    b.out_dir = fresh_dir("seed_b");
    b.seed_override = 6;
    dispatch("truth", kv, b);
    CHECK(read_file(a.out_dir / "truth.csv") != read_file(b.out_dir / "truth.csv"));
    nlohmann::json m = nlohmann::json::parse(read_file(b.out_dir / "manifest.json"));
    CHECK(m["seed"] == 6);
}

TEST_CASE("unknown subcommand and missing candidates are config errors") {
    KeyValueConfig kv = KeyValueConfig::parse(kMinimalConfig);
    HarnessOptions opt;
    opt.out_dir = fresh_dir("bad");
    CHECK_THROWS_AS(dispatch("sweep", kv, opt), ConfigError);
    CHECK_THROWS_AS(dispatch("criterion", kv, opt), ConfigError);
}

TEST_CASE("criterion command emits report and curve for modal candidates") {
    KeyValueConfig kv = KeyValueConfig::parse(std::string(kMinimalConfig) +
                                              "observer.kind = modal\n"
                                              "criterion.c = 0.01\n"
                                              "criterion.candidates = 1,2\n");
    HarnessOptions opt;
    opt.out_dir = fresh_dir("crit");
    RunOutcome out = dispatch("criterion", kv, opt);
    CHECK(!out.instability);
    nlohmann::json j = nlohmann::json::parse(read_file(opt.out_dir / "criterion_report.json"));
    CHECK(j["curve"].size() == 2);
    CHECK(j["kind"] == "modal");
    const std::string csv = read_file(opt.out_dir / "mh_curve.csv");
    CHECK(csv.rfind("h,M_h,W_h,lhs_max,rhs,satisfied\n", 0) == 0);
}

TEST_CASE("truth command writes snapshots at the configured cadence") {
    KeyValueConfig kv = KeyValueConfig::parse(std::string(kMinimalConfig) +
                                              "output.snapshot_every = 5\n");
    HarnessOptions opt;
    opt.out_dir = fresh_dir("snap");
    dispatch("truth", kv, opt);
    CHECK(fs::exists(opt.out_dir / "snapshot_000005.bin"));
    CHECK(fs::exists(opt.out_dir / "snapshot_000010.bin"));
    CHECK(!fs::exists(opt.out_dir / "snapshot_000011.bin"));
    SpectralVelocity u = read_snapshot(opt.out_dir / "snapshot_000010.bin");
    CHECK(u.domain.N == 8);
}

TEST_CASE("thread count env validation") {
    unsetenv("NSE_THREADS");
    CHECK(requested_threads() == 1);
    setenv("NSE_THREADS", "4", 1);
    CHECK(requested_threads() == 4);
    setenv("NSE_THREADS", "zero", 1);
    CHECK_THROWS_AS(requested_threads(), ConfigError);
    setenv("NSE_THREADS", "0", 1);
    CHECK_THROWS_AS(requested_threads(), ConfigError);
    unsetenv("NSE_THREADS");
}
