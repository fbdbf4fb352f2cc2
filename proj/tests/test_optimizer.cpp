#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"

#include "mrmc/detector.hpp"

using namespace mrmc;
using namespace mrmc::test;

namespace {

DualState zero_dual(const SystemConfig& cfg)
{
    DualState d = initial_dual(cfg);
    for (auto& v : d.lambda_u)
        std::fill(v.begin(), v.end(), 0.0);
    std::fill(d.lambda_d.begin(), d.lambda_d.end(), 0.0);
    for (auto& v : d.mu_u)
        std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : d.mu_d)
        std::fill(v.begin(), v.end(), 0.0);
    return d;
}

struct Setup {
    SystemConfig cfg;
    ChannelSet ch;
    PrecoderSet P;
    CodeMatrix A;
};

Setup setup(const SystemConfig& cfg, std::uint64_t seed)
{
    Setup s{cfg, generate_channels(cfg, seed), {}, {}};
    std::mt19937_64 g(seed + 5);
    s.P = random_precoders(cfg, g);
    s.A = random_code(cfg, g);
    return s;
}

// Minimizer of a real quadratic in the real and imaginary parts of X,
// reconstructed from function values only.
Mat quadratic_minimizer(Mat& X, const std::function<double()>& f, double t)
{
    const Eigen::Index n = 2 * X.size();
    auto set = [&](const Eigen::VectorXd& z) {
        for (Eigen::Index q = 0; q < X.size(); ++q)
            X(q) = cd(z(q), z(q + X.size()));
    };
    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(n);
    set(z0);
    const double f0 = f();
    Eigen::VectorXd g(n), fp(n);
    Eigen::MatrixXd H(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        Eigen::VectorXd e = z0;
        e(a) = t;
        set(e);
        fp(a) = f();
        e(a) = -t;
        set(e);
        const double fm = f();
        g(a) = (fp(a) - fm) / (2 * t);
        H(a, a) = (fp(a) + fm - 2 * f0) / (t * t);
    }
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = a + 1; b < n; ++b) {
            Eigen::VectorXd e = z0;
            e(a) = t;
            e(b) = t;
            set(e);
            H(a, b) = H(b, a) = (f() - fp(a) - fp(b) + f0) / (t * t);
        }
    Eigen::VectorXd z = H.ldlt().solve(-g);
    set(z);
    return X;
}

} // namespace

TEST_CASE("Sylvester solver: closed examples")
{
    SylvesterSystem s;
    s.A = Mat::Identity(3, 3);
    std::mt19937_64 g(1);
    s.C = crandn(g, 3, 2);
    s.F = {Mat::Zero(3, 3)};
    s.B = {crandn(g, 2, 2)};
    CHECK(rel_err(solve_sylvester(s), s.C) < 1e-14);

    SylvesterSystem t;
    t.A = 2.0 * Mat::Identity(2, 2);
    t.F = {Mat::Identity(2, 2)};
    t.B = {Mat::Identity(2, 2)};
    t.C = Mat::Identity(2, 2);
    double res = 1.0;
    Mat X = solve_sylvester(t, &res);
    CHECK(rel_err(X, Mat::Identity(2, 2) / 3.0) < 1e-14);
    CHECK(res < 1e-15);
}

TEST_CASE("Sylvester solver matches a dense operator solve")
{
    std::mt19937_64 g(2);
    for (int n = 0; n < 10; ++n) {
        SylvesterSystem s = random_sylvester(g, 2 + n % 4, 1 + n % 3, 1 + n % 3);
        double res = 1.0;
        Mat X = solve_sylvester(s, &res);
        CHECK(res < kSylvesterTolerance);
        CHECK(sylvester_residual(s, X) == doctest::Approx(res));
        CHECK(rel_err(X, dense_sylvester(s)) < 1e-10);
    }
}

TEST_CASE("block stationarity systems zero the surrogate gradient")
{
    SystemConfig cfg = small_config();
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        Setup x = setup(cfg, seed);
        Surrogate S(cfg, x.ch);
        auto [U, W] = optimal_filters_weights(cfg, x.ch, x.P, x.A);
        S.set_filters(U, W);
        for (BlockId id : {BlockId{BlockKind::Uplink, 0, 1}, BlockId{BlockKind::Downlink, 0, 2}}) {
            PrecoderSet P = x.P;
            Mat& X = id.kind == BlockKind::Uplink ? P.P_u[0][id.k] : P.P_d[0][id.k];
            X = solve_sylvester(S.system(P, x.A, id));
            const double g0 = S.gradient(x.P, x.A, id).norm();
            CHECK(S.gradient(P, x.A, id).norm() < 1e-8 * g0);
            CHECK(S.xi(P, x.A) <= S.xi(x.P, x.A) + 1e-12);
        }
    }
}

TEST_CASE("surrogate gradients match finite differences")
{
    SystemConfig cfg = small_config(3, 4);
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
        worst = std::max(worst, surrogate_fd_error(cfg, seed));
    CHECK(worst < 1e-5);
}

TEST_CASE("zero filters give a zero precoder gradient")
{
    SystemConfig cfg = small_config();
    Setup x = setup(cfg, 4);
    Surrogate S(cfg, x.ch);
    auto [U, W] = optimal_filters_weights(cfg, x.ch, x.P, x.A);
    for (auto& u : U.U_r)
        u.setZero();
    for (auto& row : U.U_u)
        for (auto& u : row)
            u.setZero();
    for (auto& row : U.U_d)
        for (auto& u : row)
            u.setZero();
    S.set_filters(U, W);
    CHECK(S.grad_P_u(x.P, x.A, 0, 0).norm() == 0.0);
    CHECK(S.grad_P_d(x.P, x.A, 0, 0).norm() == 0.0);
}

TEST_CASE("rate gradients match finite differences")
{
    SystemConfig cfg = small_config(3, 4);
    cfg.I = cfg.J = 2;
    cfg.Nu = cfg.Nd = {1, 1};
    cfg.Du = cfg.Dd = {1, 1};
    cfg.alpha_u = cfg.alpha_d = {0.1, 0.1};
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
        worst = std::max(worst, rate_fd_error(cfg, seed));
    CHECK(worst < 1e-5);
}

TEST_CASE("rate linearization is second-order accurate")
{
    SystemConfig cfg = small_config();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Setup x = setup(cfg, seed);
        std::mt19937_64 g(seed);
        const BlockId id{BlockKind::Downlink, 0, 1};
        const RateGradientSet grad = linearized_rate_gradients(cfg, x.ch, x.P, x.A, id);
        const Mat D = crandn(g, cfg.M_c, cfg.Dd[0]) * (x.P.P_d[0][1].norm() / std::sqrt(cfg.M_c * 2.0));
        const double r0 = rate_dl_bits(cfg, x.ch, x.P, x.A, 0, 1);
        auto residual = [&](double eps) {
            PrecoderSet P = x.P;
            P.P_d[0][1] += eps * D;
            const double lin = 2.0 * (grad.d_dl[0].adjoint() * (eps * D)).trace().real();
            return std::abs(rate_dl_bits(cfg, x.ch, P, x.A, 0, 1) - r0 - lin);
        };
        const double ratio = residual(0.02) / residual(0.01);
        CHECK(ratio == doctest::Approx(4.0).epsilon(0.125));
    }
}

TEST_CASE("no cross link means no cross gradient")
{
    SystemConfig cfg = small_config();
    Setup x = setup(cfg, 3);
    for (auto& row : x.ch.H_ij)
        for (auto& H : row)
            H.setZero();
    const RateGradientSet g = linearized_rate_gradients(cfg, x.ch, x.P, x.A, {BlockKind::Uplink, 0, 0});
    CHECK(g.d_dl[0].norm() == 0.0);
}

TEST_CASE("Polyak step")
{
    CHECK(*polyak_step(5.0, 4.0, 1, 2.0) == doctest::Approx(0.275));
    CHECK(*polyak_step(4.0, 4.0, 2, -1.0) == doctest::Approx(0.01));
    CHECK_FALSE(polyak_step(5.0, 4.0, 1, 1e-16).has_value());
}

TEST_CASE("subgradient run: best tracking, multipliers, power")
{
    SystemConfig cfg = small_config();
    int within = 0, runs = 0;
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        Setup x = setup(cfg, seed);
        Surrogate S(cfg, x.ch);
        auto [U, W] = optimal_filters_weights(cfg, x.ch, x.P, x.A);
        S.set_filters(U, W);
        for (BlockKind kind : {BlockKind::Uplink, BlockKind::Downlink}) {
            PrecoderSet P = x.P;
            DualState d = initial_dual(cfg);
            const double xi0 = S.xi(P, x.A);
            SubgradientResult r = subgradient_user(S, P, x.A, d, kind, 0, 0, 20);
            CHECK(r.xi_best <= xi0 + 1e-12);
            CHECK(S.xi(P, x.A) == doctest::Approx(r.xi_best).epsilon(1e-12));
            CHECK(r.mu >= 0.0);
            CHECK(r.lambda >= 0.0);
            const bool ul = kind == BlockKind::Uplink;
            const double power = ul ? P.P_u[0][0].squaredNorm() : P.P_d[0][0].squaredNorm();
            const double cap = ul ? cfg.P_U : cfg.P_B;
            const double rate = ul ? rate_ul_bits(cfg, x.ch, P, x.A, 0, 0) : rate_dl_bits(cfg, x.ch, P, x.A, 0, 0);
            const double floor = ul ? cfg.R_UL : cfg.R_DL;
            // Complementary slackness at the returned point.
            CHECK(std::abs(r.lambda * (power - cap)) < 1e-4);
            CHECK(std::abs(r.mu * (floor - rate)) < 1e-4);
            within += power <= cap * 1.05;
            ++runs;
        }
    }
    CHECK(runs == 50);
    CHECK(within >= 45);
}

TEST_CASE("code update never raises the surrogate")
{
    SystemConfig cfg = small_config();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Setup x = setup(cfg, seed);
        Surrogate S(cfg, x.ch);
        auto [U, W] = optimal_filters_weights(cfg, x.ch, x.P, x.A);
        S.set_filters(U, W);
        DualState d = initial_dual(cfg);
        for (int k = 0; k < cfg.K; ++k) {
            const double before = S.xi(x.P, x.A);
            update_code_vector(S, x.P, x.A, d, k);
            CHECK(S.xi(x.P, x.A) <= before + 1e-12);
        }
    }
}

TEST_CASE("WMMSE pass: identity at zero sweeps, monotone otherwise")
{
    SystemConfig cfg = small_config();
    Caps caps = caps_from(cfg);
    caps.t_u_max = caps.t_d_max = 10;

    Setup x = setup(cfg, 9);
    Surrogate S(cfg, x.ch);
    auto [U, W] = optimal_filters_weights(cfg, x.ch, x.P, x.A);
    S.set_filters(U, W);
    Caps none = caps;
    none.iota_max = 0;
    PrecoderSet P = x.P;
    CodeMatrix A = x.A;
    DualState d = initial_dual(cfg);
    wmmse_mrmc_pass(S, P, A, d, none);
    CHECK(P.P_u[0][0] == x.P.P_u[0][0]);
    CHECK(P.P_d[0][3] == x.P.P_d[0][3]);
    CHECK(A == x.A);

    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Setup y = setup(cfg, 100 + seed);
        Surrogate T(cfg, y.ch);
        auto [U2, W2] = optimal_filters_weights(cfg, y.ch, y.P, y.A);
        T.set_filters(U2, W2);
        DualState d2 = initial_dual(cfg);
        const double xi0 = T.xi(y.P, y.A);
        PassResult pr = wmmse_mrmc_pass(T, y.P, y.A, d2, caps);
        CHECK(pr.max_increase <= 1e-8);
        double prev = xi0;
        for (double v : pr.xi_sequence) {
            CHECK(v <= prev + 1e-8);
            prev = v;
        }
        CHECK(T.xi(y.P, y.A) <= xi0 + 1e-9);
    }
}

TEST_CASE("single-frame pass matches a dense alternating solve")
{
    SystemConfig base = small_config(3, 1);
    base.gamma.assign(base.M_r, 1.0);
    // Caps far from binding; precoders are drawn at the usual powers.
    SystemConfig cfg = base;
    cfg.P_U = cfg.P_B = 1e3;
    cfg.R_UL = cfg.R_DL = 0.0;
    REQUIRE(validate_config(cfg).empty());
    Caps caps = caps_from(cfg);
    caps.t_u_max = caps.t_d_max = 3;
    caps.update_code = false;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        Setup x = setup(base, seed);
        x.ch = generate_channels(cfg, seed);
        Surrogate S(cfg, x.ch);
        auto [U, W] = optimal_filters_weights(cfg, x.ch, x.P, x.A);
        S.set_filters(U, W);

        PrecoderSet ref = x.P;
        auto xi = [&]() { return S.xi(ref, x.A); };
        quadratic_minimizer(ref.P_u[0][0], xi, 0.01);
        quadratic_minimizer(ref.P_d[0][0], xi, 0.01);

        PrecoderSet P = x.P;
        CodeMatrix A = x.A;
        DualState d = zero_dual(cfg);
        wmmse_mrmc_pass(S, P, A, d, caps);
        CHECK(S.xi(P, A) == doctest::Approx(S.xi(ref, x.A)).epsilon(1e-6));
    }
}

TEST_CASE("PAR projection")
{
    std::mt19937_64 g(11);
    for (int K : {4, 8, 16})
        for (double gamma : {1.0, 2.0, std::pow(10.0, 0.3)})
            for (int n = 0; n < 50; ++n) {
                const Vec z = crandn(g, K, 1);
                const double P = 0.001 * (1 + n % 3);
                const Vec a = par_project(z, P, gamma);
                CHECK(std::abs(a.squaredNorm() - P) < 1e-10 * P);
                CHECK(K * a.cwiseAbs2().maxCoeff() / P <= gamma + 1e-10);
                CHECK((par_project(a, P, gamma) - a).norm() < 1e-12 * std::sqrt(P));
                if (gamma == 1.0)
                    for (int q = 0; q < K; ++q)
                        CHECK(std::abs(std::abs(a(q)) - std::sqrt(P / K)) < 1e-15);
                // Phases are kept.
                for (int q = 0; q < K; ++q)
                    CHECK(std::abs(std::arg(a(q) / z(q))) < 1e-9);
            }
}

TEST_CASE("PAR projection is the nearest feasible vector")
{
    std::mt19937_64 g(12);
    for (int n = 0; n < 500; ++n) {
        Vec z = crandn(g, 4, 1);
        z(n % 4) *= 3.0;
        const double P = 1.0, gamma = 1.0 + 0.5 * (n % 5);
        const Vec a = par_project(z, P, gamma);
        CHECK((a - z).norm() <= par_bruteforce_distance(z, P, gamma) + 1e-6);

        // Clip then rescale, accepted only when it lands feasible.
        const double cap = std::sqrt(gamma * P / 4);
        Vec c = std::sqrt(P) * z / z.norm();
        for (int q = 0; q < 4; ++q)
            if (std::abs(c(q)) > cap)
                c(q) *= cap / std::abs(c(q));
        c *= std::sqrt(P) / c.norm();
        if (4 * c.cwiseAbs2().maxCoeff() / P <= gamma + 1e-12)
            CHECK((a - z).norm() <= (c - z).norm() + 1e-12);
    }
}

TEST_CASE("PAR projection fixes feasible inputs up to norm")
{
    Vec z(4);
    z << cd(1, 0), cd(0, 1.1), cd(-0.9, 0), cd(0.7, 0.7);
    const Vec a = par_project(z, 2.0, 4.0);
    CHECK((a - std::sqrt(2.0) * z / z.norm()).norm() < 1e-14);
    const Vec zero = par_project(Vec::Zero(4), 2.0, 1.0);
    CHECK(zero.squaredNorm() == doctest::Approx(2.0));
}

TEST_CASE("precoder initialization")
{
    SystemConfig cfg = default_config();
    ChannelSet ch = generate_channels(cfg, 2);
    PrecoderSet a = init_precoders(cfg, ch, InitMode::Deterministic, 1);
    PrecoderSet b = init_precoders(cfg, ch, InitMode::Deterministic, 99);
    PrecoderSet r1 = init_precoders(cfg, ch, InitMode::Random, 1);
    PrecoderSet r2 = init_precoders(cfg, ch, InitMode::Random, 2);
    for (int k = 0; k < cfg.K; ++k) {
        for (int i = 0; i < cfg.I; ++i) {
            CHECK(a.P_u[i][k] == b.P_u[i][k]);
            CHECK(a.P_u[i][k].squaredNorm() == doctest::Approx(cfg.P_U).epsilon(1e-12));
            CHECK(r1.P_u[i][k].squaredNorm() == doctest::Approx(cfg.P_U).epsilon(1e-12));
            CHECK(r1.P_u[i][k] != r2.P_u[i][k]);
        }
        for (int j = 0; j < cfg.J; ++j) {
            CHECK(a.P_d[j][k].squaredNorm() == doctest::Approx(cfg.P_B / cfg.J).epsilon(1e-12));
            CHECK(r2.P_d[j][k].squaredNorm() == doctest::Approx(cfg.P_B / cfg.J).epsilon(1e-12));
        }
    }
}

TEST_CASE("outer loop: zero iterations and feasible codes")
{
    SystemConfig cfg = small_config();
    Setup x = setup(cfg, 6);
    Caps caps = caps_from(cfg);
    caps.ell_max = 0;
    BcdResult r0 = bcd_ap(cfg, x.ch, x.P, x.A, caps);
    CHECK(r0.trace.size() == 1);
    CHECK(r0.A == x.A);
    CHECK(r0.P.P_d[0][0] == x.P.P_d[0][0]);
    auto [U, W] = optimal_filters_weights(cfg, x.ch, x.P, x.A);
    CHECK(rel_err(r0.U.U_r[0], U.U_r[0]) < 1e-14);

    caps.ell_max = 8;
    caps.t_u_max = caps.t_d_max = 10;
    caps.conv_tol = 0.0;
    BcdResult r = bcd_ap(cfg, x.ch, x.P, x.A, caps);
    CHECK(r.trace.size() == 9);
    for (const TraceRecord& t : r.trace) {
        CHECK(t.par_feasible);
        CHECK(t.pass_max_increase <= 1e-8);
    }
    CHECK(code_feasible(cfg, r.A));
    CHECK(r.cwsm >= r.trace.front().cwsm_nats);
    CHECK(r.stats.max_sylvester_residual < kSylvesterTolerance);
    CHECK(r.stats.sylvester_solves > 0);
}

TEST_CASE("DL QoS restoration lifts a starved user")
{
    SystemConfig cfg = default_config();
    ChannelSet ch = generate_channels(cfg, 8);
    PrecoderSet P = init_precoders(cfg, ch, InitMode::Deterministic, 1);
    CodeMatrix A = baseline_code(cfg, CodeKind::Uncoded, 0);
    P.P_d[1][3] *= 0.02;
    P.P_d[0][3] *= std::sqrt((cfg.P_B - P.P_d[1][3].squaredNorm()) / P.P_d[0][3].squaredNorm());
    REQUIRE(rate_dl_bits(cfg, ch, P, A, 1, 3) < cfg.R_DL);
    const double other = rate_dl_bits(cfg, ch, P, A, 0, 3);
    CHECK(restore_dl_qos(cfg, ch, P, A) >= 1);
    CHECK(rate_dl_bits(cfg, ch, P, A, 1, 3) >= cfg.R_DL);
    CHECK(rate_dl_bits(cfg, ch, P, A, 1, 3) < cfg.R_DL + 1e-6);
    CHECK(rate_dl_bits(cfg, ch, P, A, 0, 3) <= other);
    CHECK(rate_dl_bits(cfg, ch, P, A, 0, 3) >= cfg.R_DL);
    CHECK(P.P_d[0][3].squaredNorm() + P.P_d[1][3].squaredNorm() <= cfg.P_B * (1 + 1e-12));
}
