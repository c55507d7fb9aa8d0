#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "test_util.hpp"

using namespace critns;
using namespace critns::testing;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const auto p = fs::temp_directory_path() /
                   ("critns_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream o;
    o << is.rdbuf();
    return o.str();
}

ParseError parse_error_of(const std::string& text) {
    try {
        parse_suite(text);
    } catch (const ParseError& e) {
        return e;
    }
    ADD_FAILURE() << "no ParseError for:\n" << text;
    return ParseError("none", 0, 0);
}

const char* tg_suite = R"(; comment
[suite]
seed = 5

[scenario tg]
datum = taylor_green
grid = 16
dt = 0.0625
horizon = 0.5
snapshot_stride = 4
audits = horizon, divergence, energy, taylor_green, taylor_green_pressure
)";

} // namespace

TEST(Ini, SectionsEntriesAndComments) {
    const auto s = parse_ini("# top\n[suite]\noutput = out ; trailing\n\n[scenario a]\n  grid =  32\n");
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].kind, "suite");
    ASSERT_EQ(s[0].entries.size(), 1u);
    EXPECT_EQ(s[0].entries[0].value, "out");
    EXPECT_EQ(s[1].kind, "scenario");
    EXPECT_EQ(s[1].name, "a");
    EXPECT_EQ(s[1].line, 5);
    EXPECT_EQ(s[1].entries[0].key, "grid");
    EXPECT_EQ(s[1].entries[0].value, "32");
    EXPECT_EQ(s[1].entries[0].line, 6);
    EXPECT_EQ(s[1].entries[0].column, 11);
}

TEST(Ini, ErrorsCarryLineAndColumn) {
    try {
        parse_ini("[suite]\nseed = 1\nseed = 2\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3);
    }
    try {
        parse_ini("[suite]\njust words\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2);
    }
    EXPECT_THROW(parse_ini("grid = 3\n"), ParseError);
    EXPECT_THROW(parse_ini("[scenario]\n"), ParseError);
    EXPECT_THROW(parse_ini("[weird x]\n"), ParseError);
}

TEST(ParseSuite, ValuesAndDefaults) {
    const auto s = parse_suite(R"([suite]
output = somewhere
seed = 42
[scenario r]
datum = band_limited_random
box_length = 2pi
k_max = 3
horizon = 0.5
[scenario p]
type = profiles
datum = localized_vortex
width = 0.5
sweep = ratio
sweep_values = 2, 4
)");
    EXPECT_EQ(s.output_dir, fs::path("somewhere"));
    ASSERT_EQ(s.scenarios.size(), 2u);
    const auto& r = s.scenarios[0];
    EXPECT_EQ(r.kind, ScenarioKind::simulate);
    EXPECT_DOUBLE_EQ(r.grid.box_length(), two_pi);
    EXPECT_EQ(std::get<BandLimitedRandom>(r.datum).seed, 42u);
    EXPECT_EQ(r.audits, default_audits(ScenarioKind::simulate));
    EXPECT_EQ(r.output_dir, fs::path("somewhere") / "r");
    const auto& p = s.scenarios[1];
    EXPECT_EQ(p.kind, ScenarioKind::profiles);
    EXPECT_EQ(p.sweep, "ratio");
    EXPECT_EQ(p.sweep_values, (std::vector<double>{2.0, 4.0}));
    EXPECT_TRUE(parse_suite("").scenarios.empty());
}

TEST(ParseSuite, OverridesApply) {
    SuiteOverrides ov;
    ov.output_dir = "elsewhere";
    ov.seed = 9;
    ov.grid = 24;
    ov.horizon = 0.125;
    const auto s = parse_suite("[scenario r]\ndatum = band_limited_random\n", ov);
    EXPECT_EQ(s.scenarios[0].grid.n_modes(), 24);
    EXPECT_DOUBLE_EQ(s.scenarios[0].horizon, 0.125);
    EXPECT_EQ(std::get<BandLimitedRandom>(s.scenarios[0].datum).seed, 9u);
    EXPECT_EQ(s.scenarios[0].output_dir, fs::path("elsewhere") / "r");
}

TEST(ParseSuite, SemanticErrorsPointAtTheValue) {
    auto e = parse_error_of("[scenario a]\ndatum = taylor_green\ngrid = abc\n");
    EXPECT_EQ(e.line(), 3);
    EXPECT_EQ(e.column(), 8);
    e = parse_error_of("[scenario a]\n  horizon =   1x\n");
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.column(), 15);
    e = parse_error_of("[scenario a]\ndatum = vortex\n");
    EXPECT_EQ(e.line(), 2);
    e = parse_error_of("[scenario a]\nbogus = 1\n");
    EXPECT_EQ(e.line(), 2);
    e = parse_error_of("[scenario a]\naudits = scale_invariance\n");
    EXPECT_EQ(e.line(), 1);
    e = parse_error_of("[scenario a]\ngrid = 7\n");
    EXPECT_EQ(e.line(), 1);
    e = parse_error_of("[scenario a]\n[scenario a]\n");
    EXPECT_EQ(e.line(), 2);
    e = parse_error_of("[scenario a]\ntol.energy = 1\naudits = horizon\n");
    EXPECT_EQ(e.line(), 1);
    e = parse_error_of("[suite]\nseed = -3\n");
    EXPECT_EQ(e.line(), 2);
}

TEST(ConfigHash, DeterministicAndSensitive) {
    const auto a = parse_suite(tg_suite).scenarios[0];
    const auto b = parse_suite(tg_suite).scenarios[0];
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
    auto c = a;
    c.horizon = 0.75;
    EXPECT_NE(config_hash(a), config_hash(c));
    auto d = a;
    d.output_dir = "other";
    EXPECT_EQ(config_hash(a), config_hash(d));
}

TEST(RunScenario, TaylorGreenPassesAndPersists) {
    const auto dir = fresh_dir("tg");
    SuiteOverrides ov;
    ov.output_dir = dir;
    const auto suite = parse_suite(tg_suite, ov);
    const auto r = run_scenario(suite.scenarios[0]);
    EXPECT_FALSE(r.infrastructure_error) << r.error;
    EXPECT_TRUE(r.pass());
    EXPECT_EQ(r.manifest.terminated_reason, "horizon_reached");
    EXPECT_EQ(r.audits.size(), 5u);
    const auto out = dir / "tg";
    for (const char* f : {"norms.csv", "audits.json", "manifest.json", "timing.json", "snapshots/u_000000.crns",
                          "snapshots/u_000004.crns", "snapshots/u_000008.crns"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(m["config_hash"], config_hash(suite.scenarios[0]));
    EXPECT_EQ(m["tool_version"], std::string(tool_version));
    EXPECT_EQ(m["terminated_reason"], "horizon_reached");
    const auto csv = slurp(out / "norms.csv");
    EXPECT_EQ(csv.substr(0, 2), "t,");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 10);
    // Last snapshot equals u0 e^{-1} to float32 rounding.
    const auto last = ingest_field(out / "snapshots/u_000008.crns");
    EXPECT_LE((last - std::exp(-1.0) * taylor_green(GridSpec(16, two_pi))).max_abs(), 1e-7);
    fs::remove_all(dir);
}

TEST(RunScenario, ZeroDatumIsTrivial) {
    const auto dir = fresh_dir("zero");
    SuiteOverrides ov;
    ov.output_dir = dir;
    const auto suite = parse_suite("[scenario z]\ndatum = zero\ngrid = 8\ndt = 0.25\nhorizon = 1\n"
                                   "audits = horizon, divergence, energy, decay\n", ov);
    const auto r = run_scenario(suite.scenarios[0]);
    EXPECT_TRUE(r.pass()) << r.error;
    for (const auto& a : r.audits) EXPECT_EQ(a.value, 0.0) << a.name;
    fs::remove_all(dir);
}

TEST(RunScenario, RerunIsByteIdentical) {
    const auto d1 = fresh_dir("det1");
    const auto d2 = fresh_dir("det2");
    const std::string text = "[suite]\nseed = 11\n[scenario r]\ndatum = band_limited_random\ngrid = 16\n"
                             "dt = 0.125\nhorizon = 1\nsnapshot_stride = 2\n";
    SuiteOverrides o1, o2;
    o1.output_dir = d1;
    o2.output_dir = d2;
    run_suite(parse_suite(text, o1), 1);
    run_suite(parse_suite(text, o2), 2);
    for (const auto& e : fs::recursive_directory_iterator(d1 / "r")) {
        if (!e.is_regular_file() || e.path().filename() == "timing.json") continue;
        const auto rel = fs::relative(e.path(), d1);
        EXPECT_EQ(slurp(e.path()), slurp(d2 / rel)) << rel;
    }
    EXPECT_EQ(slurp(d1 / "summary.json"), slurp(d2 / "summary.json"));
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST(RunSuite, ExitCodeContract) {
    const auto dir = fresh_dir("exit");
    SuiteOverrides ov;
    ov.output_dir = dir;
    EXPECT_EQ(run_suite(parse_suite("", ov)).exit_code(), 0);
    const auto empty = nlohmann::json::parse(slurp(dir / "summary.json"));
    EXPECT_TRUE(empty["scenarios"].empty());

    EXPECT_EQ(run_suite(parse_suite(tg_suite, ov)).exit_code(), 0);
    // An impossible tolerance is an audit failure.
    const std::string failing = std::string(tg_suite) + "tol.taylor_green = 1e-30\n";
    const auto bad = run_suite(parse_suite(failing, ov));
    EXPECT_EQ(bad.exit_code(), 1);
    const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    EXPECT_EQ(summary["audits"]["taylor_green"]["fail"], 1);
    EXPECT_EQ(summary["exit_code"], 1);
    // An unwritable output directory is an infrastructure error.
    const auto blocker = dir / "blocked";
    std::ofstream(blocker) << "file";
    SuiteOverrides ob;
    ob.output_dir = blocker;
    auto spec = parse_suite(tg_suite, ob);
    SuiteSummary s;
    s.results.push_back(run_scenario(spec.scenarios[0]));
    EXPECT_TRUE(s.results[0].infrastructure_error);
    EXPECT_EQ(s.exit_code(), 2);
    const auto prev = set_diagnostic_sink([](const Diagnostic&) {});
    const auto whole = run_suite(parse_suite(tg_suite, ob));
    set_diagnostic_sink(prev);
    EXPECT_FALSE(whole.error.empty());
    EXPECT_EQ(whole.exit_code(), 2);
    fs::remove_all(dir);
}

TEST(RunSuite, ResolveThreads) {
    EXPECT_EQ(resolve_threads(3), 3);
    ::setenv("CRITNS_THREADS", "4", 1);
    EXPECT_EQ(resolve_threads(0), 4);
    const auto prev = set_diagnostic_sink([](const Diagnostic&) {});
    ::setenv("CRITNS_THREADS", "lots", 1);
    EXPECT_EQ(resolve_threads(0), 1);
    set_diagnostic_sink(prev);
    ::unsetenv("CRITNS_THREADS");
    EXPECT_EQ(resolve_threads(0), 1);
}

TEST(Snapshot, RoundTripIsLossless) {
    const auto dir = fresh_dir("snap");
    const GridSpec g(16, 3.5);
    // float32-representable coefficients survive exactly
    auto u = random_solenoidal(g, 4);
    for (std::size_t q = 0; q < u.size(); ++q)
        u.data()[q] = Complex(static_cast<float>(u.data()[q].real()), static_cast<float>(u.data()[q].imag()));
    const auto v = random_solenoidal(g, 5);
    export_fields({u, v}, dir / "a.crns");
    const auto back = ingest_fields(dir / "a.crns");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].grid(), g);
    EXPECT_LE((back[0] - u).max_abs(), 0.0);
    EXPECT_LE((back[1] - v).max_abs(), 1e-7 * v.max_abs());
    // file -> field -> file byte identity
    export_fields(back, dir / "b.crns");
    EXPECT_EQ(slurp(dir / "a.crns"), slurp(dir / "b.crns"));
    EXPECT_FALSE(fs::exists(dir / "a.crns.tmp"));
    fs::remove_all(dir);
}

TEST(Snapshot, LittleEndianLayout) {
    // Hand-built file: n = 8, L = 2, one field with u_0 at k = (-4, -4, -4) equal to 1.5 - 2i.
    std::vector<unsigned char> b = {'C', 'R', 'N', 'S', '1', 8, 0, 0, 0};
    const std::uint64_t L = std::bit_cast<std::uint64_t>(2.0);
    for (int s = 0; s < 64; s += 8) b.push_back(static_cast<unsigned char>(L >> s));
    b.insert(b.end(), {1, 0, 0, 0});
    const std::size_t block = 3 * 512 * 8;
    const std::size_t start = b.size();
    b.resize(start + block, 0);
    // 1.5f = 0x3fc00000, -2.0f = 0xc0000000, little-endian
    const unsigned char re[4] = {0x00, 0x00, 0xc0, 0x3f};
    const unsigned char im[4] = {0x00, 0x00, 0x00, 0xc0};
    std::copy(re, re + 4, b.begin() + start);
    std::copy(im, im + 4, b.begin() + start + 4);
    const auto f = decode_snapshot(b);
    ASSERT_EQ(f.size(), 1u);
    EXPECT_EQ(f[0].grid().n_modes(), 8);
    EXPECT_EQ(f[0].grid().box_length(), 2.0);
    EXPECT_EQ(f[0].coeff(0, -4, -4, -4), Complex(1.5, -2.0));
    EXPECT_EQ(encode_snapshot(f), b);
}

TEST(Snapshot, MalformedFilesGiveStructuredErrors) {
    const GridSpec g(8, 1.0);
    const auto good = encode_snapshot({random_solenoidal(g, 1)});
    auto bytes = good;
    bytes.resize(bytes.size() - 3);
    EXPECT_THROW(decode_snapshot(bytes), FormatError);
    EXPECT_THROW(decode_snapshot(std::vector<unsigned char>(good.begin(), good.begin() + 10)), FormatError);
    bytes = good;
    bytes[0] = 'X';
    EXPECT_THROW(decode_snapshot(bytes), FormatError);
    bytes = good;
    bytes[4] = '2';
    try {
        decode_snapshot(bytes);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
    }
    bytes = good;
    bytes.push_back(0);
    EXPECT_THROW(decode_snapshot(bytes), FormatError);
    bytes = good;
    bytes[5] = 7;
    EXPECT_THROW(decode_snapshot(bytes), FormatError);
    bytes = good;
    bytes[17] = 0;
    EXPECT_THROW(decode_snapshot(bytes), FormatError);
    bytes = good;
    const std::uint32_t nan = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
    for (int s = 0; s < 4; ++s) bytes[21 + s] = static_cast<unsigned char>(nan >> (8 * s));
    EXPECT_THROW(decode_snapshot(bytes), FormatError);
    EXPECT_THROW(ingest_field("/nonexistent/dir/x.crns"), IoError);
}
