#include "rdlab/experiment.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace rdlab;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

Config cfg(const std::string& text) {
    std::istringstream is(text);
    return Config::parse(is, "test");
}

const std::string kBase = R"(
potential.name = dw
grid.half_length = 30
grid.dx = 0.05
time.dt = 1e-3
time.t_final = 5
ic.kind = front_like
ic.params = -1 1 0.70710678118654752 0
)";

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("rdlab_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST(Config, ParsesValuesAndComments) {
    const Config c = cfg("a = 1  # note\n\n  b.c = x y \nflag = true\nlist = 1 2, 3 4\n");
    EXPECT_EQ(c.require_double("a"), 1.0);
    EXPECT_EQ(c.get_string("b.c", ""), "x y");
    EXPECT_TRUE(c.get_bool("flag", false));
    const auto g = c.get_groups("list");
    ASSERT_EQ(g.size(), 2u);
    EXPECT_EQ(g[1], (std::vector<double>{3, 4}));
    EXPECT_EQ(c.get_double("missing", 2.5), 2.5);
}

TEST(Config, SyntaxErrorsNameTheLine) {
    EXPECT_NE(error_of([] { cfg("a = 1\nnot a pair\n"); }).find("test:2"), std::string::npos);
    EXPECT_NE(error_of([] { cfg("a = 1\na = 2\n"); }).find("duplicate key 'a'"), std::string::npos);
    EXPECT_NE(error_of([] { cfg("= 2\n"); }).find("empty key"), std::string::npos);
}

TEST(Config, ValueErrors) {
    const Config c = cfg("x = abc\nn = 2.5\nb = maybe\n");
    EXPECT_NE(error_of([&] { c.require_double("x"); }).find("not a number"), std::string::npos);
    EXPECT_NE(error_of([&] { c.get_int("n", 0); }).find("integer"), std::string::npos);
    EXPECT_NE(error_of([&] { c.get_bool("b", false); }).find("boolean"), std::string::npos);
    EXPECT_NE(error_of([&] { c.require_double("y"); }).find("missing required key 'y'"), std::string::npos);
}

TEST(Experiment, ParsesTheBaseConfig) {
    const ExperimentConfig e = parse_experiment(cfg(kBase + "fronts.requests = -1 1, 1 -1\n"), ".", false);
    EXPECT_EQ(e.potential_name, "dw");
    EXPECT_EQ(e.X, 30.0);
    EXPECT_EQ(e.ic.kind, "front_like");
    ASSERT_EQ(e.front_requests.size(), 2u);
    EXPECT_EQ(e.front_requests[1].m_minus, v1(1.0));
    EXPECT_FALSE(e.travel_speed.has_value());
}

TEST(Experiment, UnknownAndMissingKeysAreConfigErrors) {
    EXPECT_NE(error_of([] { parse_experiment(cfg(kBase + "grid.dxx = 1\n"), ".", false); }).find("grid.dxx"),
              std::string::npos);
    EXPECT_NE(error_of([] { parse_experiment(cfg("potential.name = dw\n"), ".", false); }).find("missing"),
              std::string::npos);
    EXPECT_FALSE(error_of([] { parse_experiment(cfg(kBase + "time.record_stride = 0\n"), ".", false); }).empty());
    EXPECT_FALSE(error_of([] { parse_experiment(cfg(kBase + "fronts.requests = 1 2 3\n"), ".", false); }).empty());
}

TEST(Experiment, StrictModeHalvesTolerances) {
    const ExperimentConfig a = parse_experiment(cfg(kBase), ".", false);
    const ExperimentConfig b = parse_experiment(cfg(kBase), ".", true);
    EXPECT_DOUBLE_EQ(b.audit_tol, a.audit_tol / 2.0);
    EXPECT_DOUBLE_EQ(b.energy_tol, a.energy_tol / 2.0);
    EXPECT_DOUBLE_EQ(b.terrace_opt.recon_tol, a.terrace_opt.recon_tol / 2.0);
    EXPECT_DOUBLE_EQ(b.terrace_opt.energy_rel_tol, a.terrace_opt.energy_rel_tol / 2.0);
    EXPECT_DOUBLE_EQ(b.terrace_opt.speed_rel_tol, a.terrace_opt.speed_rel_tol / 2.0);
}

TEST(Experiment, TimeStepAboveLimitIsRejectedBeforeRunning) {
    std::string text = kBase;
    text.replace(text.find("time.dt = 1e-3"), 14, "time.dt = 5");
    const ExperimentConfig e = parse_experiment(cfg(text), ".", false);
    const std::string msg = error_of([&] { run_experiment(e, scratch("bad_dt")); });
    EXPECT_NE(msg.find("dt_max"), std::string::npos) << msg;
}

TEST(FrontDb, ImpossibleRequestIsRecordedAndTheRestSolve) {
    ExperimentConfig e = parse_experiment(cfg(kBase), ".", false);
    e.potential_name = "cb";
    e.potential_params = {0.25};
    e.front_requests = {{v1(0.0), v1(0.25), 0.0, 0.0}, {v1(1.0), v1(0.0), 0.0, 0.0}};
    const Catalog cat = catalog_for(e);
    const fs::path dir = scratch("front_db");
    const auto recs = build_front_db(e, cat, dir);
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_FALSE(recs[0].solved);
    EXPECT_FALSE(recs[0].message.empty());
    ASSERT_TRUE(recs[1].solved);
    EXPECT_NEAR(recs[1].c, 0.35355339, 1e-6);
    EXPECT_TRUE(fs::exists(dir / "summary.csv"));
    const ProfileDb db = load_front_db(dir, recs);
    ASSERT_EQ(db.profiles.size(), 1u);
    EXPECT_NEAR(db.profiles[0].c, recs[1].c, 1e-15);
}

TEST(FrontDb, DefaultRequests) {
    const Catalog cb = build_catalog(cubic_bistable(0.25));
    const auto r = default_front_requests(cb, std::nullopt);
    ASSERT_EQ(r.size(), 1u);
    // The lower state 1 invades 0.
    EXPECT_NEAR(r[0].m_minus[0], 1.0, 1e-10);
    EXPECT_NEAR(r[0].m_plus[0], 0.0, 1e-10);
    EXPECT_GT(r[0].c_lo, 0.0);
    const Catalog dw = build_catalog(double_well());
    const auto s = default_front_requests(dw, std::nullopt);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_LT(s[0].c_lo, 0.0);
    EXPECT_GT(s[0].c_hi, 0.0);
    ExperimentConfig e = parse_experiment(cfg(kBase), ".", false);
    const auto recs = build_front_db(e, dw, scratch("dw_db"));
    ASSERT_EQ(recs.size(), 1u);
    ASSERT_TRUE(recs[0].solved);
    EXPECT_NEAR(recs[0].c, 0.0, 1e-8);
}

TEST(Experiment, ShippedConfigsLoad) {
    const fs::path dir = fs::path(RDLAB_SOURCE_DIR) / "configs";
    int n = 0;
    for (const auto& f : fs::directory_iterator(dir)) {
        if (f.path().extension() != ".cfg") continue;
        const ExperimentConfig e = load_experiment(f.path().string());
        EXPECT_LE(e.dt, catalog_for(e).dt_max()) << f.path();
        if (!e.ic.file.empty()) {
            EXPECT_TRUE(fs::exists(e.ic.file)) << e.ic.file;
        }
        ++n;
    }
    EXPECT_EQ(n, 3);
}

TEST(Experiment, ShortKinkRunPasses) {
    // The residual window |x| <= eps t must cover the kink, so the run needs a long horizon.
    ExperimentConfig e = parse_experiment(cfg(kBase + "diagnostics.standing_scheme = true\n"
                                                      "time.record_stride = 1000\n"),
                                          ".", false);
    e.dx = 0.1;
    e.t_final = 100.0;
    const fs::path out = scratch("kink_run");
    const RunResult R = run_experiment(e, out);
    for (const auto& [k, ok] : R.verdicts) EXPECT_TRUE(ok) << k;
    EXPECT_EQ(R.exit_code, 0);
    for (const char* f : {"catalog.txt", "energy.csv", "track.csv", "standing.csv", "terrace.txt", "summary.txt"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    std::ifstream s(out / "summary.txt");
    const std::string text((std::istreambuf_iterator<char>(s)), std::istreambuf_iterator<char>());
    EXPECT_NE(text.find("overall = pass"), std::string::npos);
}
