#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"

#include "mrmc/harness.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mrmc;
using namespace mrmc::test;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

int line_count(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

fs::path scratch(const std::string& name)
{
    fs::path p = fs::temp_directory_path() / ("mrmc_test_" + name);
    fs::remove_all(p);
    return p;
}

// Small, fast experiment around the default scenario.
ExperimentSpec quick_spec(const std::string& name)
{
    ExperimentSpec s = spec_from_json_text(R"({"units":"db","scenario":{"K":4,"n_t":3},
        "experiment":{"id":"quick","seeds":[1,2],"trials":2000,
                      "caps":{"t_u_max":3,"t_d_max":3,"ell_max":2}}})");
    s.out_dir = scratch(name).string();
    return s;
}

} // namespace

TEST_CASE("block diagonalization nulls the other users")
{
    SystemConfig cfg = default_config();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ChannelSet ch = generate_channels(cfg, seed);
        PrecoderSet P = baseline_precoders(cfg, ch, Method::BdDl);
        for (int k = 0; k < cfg.K; ++k) {
            CHECK((ch.H_Bj[0] * P.P_d[1][k]).norm() < 1e-10);
            CHECK((ch.H_Bj[1] * P.P_d[0][k]).norm() < 1e-10);
            CHECK(P.P_d[0][k].squaredNorm() + P.P_d[1][k].squaredNorm() == doctest::Approx(cfg.P_B).epsilon(1e-12));
        }
        // The UL keeps the deterministic initializer.
        PrecoderSet init = init_precoders(cfg, ch, InitMode::Deterministic, 0);
        CHECK(P.P_u[0][0] == init.P_u[0][0]);
    }
}

TEST_CASE("uniform UL precoding spends exactly the UL budget")
{
    SystemConfig cfg = default_config();
    ChannelSet ch = generate_channels(cfg, 1);
    PrecoderSet P = baseline_precoders(cfg, ch, Method::UniformUl);
    for (int i = 0; i < cfg.I; ++i)
        for (int k = 0; k < cfg.K; ++k) {
            CHECK(P.P_u[i][k].squaredNorm() == doctest::Approx(cfg.P_U).epsilon(1e-14));
            CHECK(P.P_u[i][k] == P.P_u[i][0]);
        }
}

TEST_CASE("single-user BD is eigenbeamforming")
{
    SystemConfig cfg = default_config();
    cfg.J = 1;
    cfg.Nd = cfg.Dd = {2};
    cfg.alpha_d = {cfg.alpha_d[0]};
    ChannelSet ch = generate_channels(cfg, 3);
    PrecoderSet P = baseline_precoders(cfg, ch, Method::BdDl);
    Eigen::JacobiSVD<Mat> svd(ch.H_Bj[0], Eigen::ComputeFullV);
    const Mat V = svd.matrixV().leftCols(2);
    const Mat X = P.P_d[0][0] / std::sqrt(cfg.P_B / 2.0);
    CHECK((X.adjoint() * X - Mat::Identity(2, 2)).norm() < 1e-12);
    CHECK((X * X.adjoint() - V * V.adjoint()).norm() < 1e-10);
}

TEST_CASE("null-space projection: deficit error and radar protection")
{
    SystemConfig cfg = default_config();
    ChannelSet ch = generate_channels(cfg, 1);
    try {
        baseline_precoders(cfg, ch, Method::NspDl);
        FAIL("expected a dimension error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("deficit") != std::string::npos);
    }
    CHECK_THROWS_AS(baseline_precoders(cfg, ch, Method::Proposed), std::invalid_argument);

    cfg.M_c = cfg.N_c = 8;
    REQUIRE(validate_config(cfg).empty());
    ch = generate_channels(cfg, 1);
    PrecoderSet P = baseline_precoders(cfg, ch, Method::NspDl);
    for (int j = 0; j < cfg.J; ++j) {
        CHECK((ch.H_rB.adjoint() * P.P_d[j][0]).norm() < 1e-10);
        CHECK((ch.H_Bj[1 - j] * P.P_d[j][0]).norm() < 1e-10);
        CHECK(P.P_d[j][0].squaredNorm() == doctest::Approx(cfg.P_B / cfg.J).epsilon(1e-12));
    }
}

TEST_CASE("null space basis")
{
    std::mt19937_64 g(4);
    const Mat M = crandn(g, 2, 5);
    const Mat N = null_space(M);
    CHECK(N.cols() == 3);
    CHECK((M * N).norm() < 1e-12);
    CHECK((N.adjoint() * N - Mat::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("spec parsing, validation and round trip")
{
    const ExperimentSpec db = spec_from_json_text(
        R"({"units":"db","scenario":{"snr_r":0,"snr_ul":10,"snr_dl":10,"cnr":20},
            "experiment":{"mode":"sweep","axis":"SNR_r","grid":[-10,0,10],"seeds":[3,4],
                          "methods":["proposed","uncoded"]}})");
    const ExperimentSpec lin = spec_from_json_text(
        R"({"units":"linear","scenario":{"snr_r":1,"snr_ul":10,"snr_dl":10,"cnr":100},
            "experiment":{"mode":"sweep","axis":"SNR_r","grid":[0.1,1,10],"seeds":[3,4],
                          "methods":["proposed","uncoded"]}})");
    CHECK(db.cfg.P_r[0] == doctest::Approx(lin.cfg.P_r[0]).epsilon(1e-12));
    CHECK(db.cfg.CNR == doctest::Approx(lin.cfg.CNR).epsilon(1e-12));
    CHECK(db.cfg.R_UL == doctest::Approx(lin.cfg.R_UL).epsilon(1e-12));
    const double a = -10.0, b = 0.1;
    CHECK(config_at(db, &a).P_r[0] == doctest::Approx(config_at(lin, &b).P_r[0]).epsilon(1e-12));

    for (const ExperimentSpec& s : {db, lin}) {
        const std::string text = spec_to_json_text(s);
        CHECK(spec_to_json_text(spec_from_json_text(text)) == text);
        CHECK(validate_spec(s).empty());
    }

    ExperimentSpec bad = db;
    bad.seeds.clear();
    CHECK_FALSE(validate_spec(bad).empty());
    bad = db;
    bad.grid = {0, 0};
    CHECK_FALSE(validate_spec(bad).empty());
    CHECK_THROWS(spec_from_json_text(R"({"experiment":{"mode":"bogus"}})"));
    CHECK(parse_method(to_string(Method::NspDl)) == Method::NspDl);
}

TEST_CASE("converge mode writes one trace per seed and initialization")
{
    ExperimentSpec s = quick_spec("converge");
    s.mode = Mode::Converge;
    const ResultTable t = run_experiment(s);
    int traces = 0;
    for (const auto& e : fs::directory_iterator(s.out_dir))
        traces += e.path().filename().string().rfind("trace_", 0) == 0;
    CHECK(traces == 4);
    const std::string tr = slurp(fs::path(s.out_dir) / "trace_proposed_rand_2.csv");
    CHECK(line_count(tr) == 1 + 1 + s.caps.ell_max);
    CHECK(fs::exists(fs::path(s.out_dir) / "manifest.json"));
    for (const auto& r : t.rows)
        CHECK(std::isfinite(r.value));
    const ExperimentSpec back = load_spec((fs::path(s.out_dir) / "manifest.json").string());
    CHECK(spec_to_json_text(back) == spec_to_json_text(s));
}

TEST_CASE("sweep mode emits one row per method and point")
{
    ExperimentSpec s = quick_spec("sweep");
    s.mode = Mode::Sweep;
    s.axis = SweepAxis::SNR_r;
    s.grid = {-20, 0, 20};
    s.seeds = {1};
    s.methods = {Method::Proposed, Method::Uncoded};
    const ResultTable t = run_experiment(s);
    const std::string body = slurp(fs::path(s.out_dir) / "sweep_SNR_r.csv");
    CHECK(line_count(body) == 1 + 3 * 2);
    int cwsm_rows = 0;
    for (const auto& r : t.rows)
        cwsm_rows += r.metric == "cwsm";
    CHECK(cwsm_rows == 6);
}

TEST_CASE("roc mode and failed designs")
{
    ExperimentSpec s = quick_spec("roc");
    s.mode = Mode::Roc;
    s.seeds = {1};
    s.methods = {Method::Uncoded, Method::NspDl};
    const ResultTable t = run_experiment(s);
    bool failed = false, pd = false, nocoop = false;
    for (const auto& r : t.rows) {
        failed |= r.method == "nsp_dl" && r.metric == "failed";
        pd |= r.method == "uncoded" && r.metric == "pd";
        nocoop |= r.method == "uncoded_nocoop" && r.metric == "pd";
    }
    CHECK(failed);
    CHECK(pd);
    CHECK(nocoop);
    const std::string roc = slurp(fs::path(s.out_dir) / "roc_uncoded.csv");
    CHECK(roc.rfind("seed,cooperation,nu,pfa,pd,n_trials\n", 0) == 0);
    CHECK(line_count(roc) == 1 + 2 * kThresholdCount);
}

TEST_CASE("reruns are byte-identical across worker counts")
{
    ExperimentSpec s = quick_spec("rerun_a");
    s.mode = Mode::Roc;
    s.methods = {Method::Proposed, Method::Random};
    s.workers = 1;
    run_experiment(s);
    ExperimentSpec s2 = s;
    s2.out_dir = scratch("rerun_b").string();
    s2.workers = 2;
    run_experiment(s2);
    for (const char* f : {"results.csv", "roc_proposed.csv", "roc_random.csv"})
        CHECK(slurp(fs::path(s.out_dir) / f) == slurp(fs::path(s2.out_dir) / f));
}
