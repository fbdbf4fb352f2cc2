#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner.

#include "support.hpp"

#include <Eigen/LU>

#include <functional>

namespace mrmc::test {

// |I_CWSM + Xi'| / |I_CWSM| at the closed-form filters and weights.
inline double wmmse_identity_gap(const SystemConfig& cfg, std::uint64_t seed)
{
    ChannelSet ch = generate_channels(cfg, seed);
    std::mt19937_64 g(seed * 7 + 1);
    PrecoderSet P = random_precoders(cfg, g);
    CodeMatrix A = random_code(cfg, g);
    CovarianceBundle b = build_bundle(cfg, ch, A, P);
    FilterSet F = wmmse_filters(cfg, b);
    WeightSet W = optimal_weights(mse_matrices(cfg, F, b));
    const double c = cwsm(cfg, F, b).total;
    return std::abs(c + xi_prime(cfg, F, W, b)) / std::abs(c);
}

// Central differences of a real function of a complex matrix, returned in
// the df/dX^* convention: (d/dRe + j d/dIm) / 2.
inline Mat fd_conj_gradient(Mat& X, const std::function<double()>& f, double h)
{
    Mat G(X.rows(), X.cols());
    for (Eigen::Index q = 0; q < X.size(); ++q) {
        const cd x0 = X(q);
        X(q) = x0 + h;
        double fp = f();
        X(q) = x0 - h;
        double fm = f();
        const double dre = (fp - fm) / (2 * h);
        X(q) = x0 + cd(0.0, h);
        fp = f();
        X(q) = x0 - cd(0.0, h);
        fm = f();
        const double dim = (fp - fm) / (2 * h);
        X(q) = x0;
        G(q) = 0.5 * cd(dre, dim);
    }
    return G;
}

inline double rel_err(const Mat& got, const Mat& want) { return (got - want).norm() / std::max(want.norm(), 1e-300); }

// Largest relative error between the analytic surrogate gradients and
// finite differences over every UL, DL and code block of one instance.
inline double surrogate_fd_error(const SystemConfig& cfg, std::uint64_t seed, double h = 1e-6)
{
    ChannelSet ch = generate_channels(cfg, seed);
    std::mt19937_64 g(seed + 101);
    PrecoderSet P = random_precoders(cfg, g);
    CodeMatrix A = random_code(cfg, g);
    Surrogate S(cfg, ch);
    auto [U, W] = optimal_filters_weights(cfg, ch, P, A);
    S.set_filters(U, W);
    auto xi = [&]() { return S.xi(P, A); };

    double worst = 0.0;
    for (int k = 0; k < cfg.K; ++k) {
        for (int i = 0; i < cfg.I; ++i) {
            const Mat an = S.grad_P_u(P, A, i, k);
            worst = std::max(worst, rel_err(fd_conj_gradient(P.P_u[i][k], xi, h), an));
        }
        for (int j = 0; j < cfg.J; ++j) {
            const Mat an = S.grad_P_d(P, A, j, k);
            worst = std::max(worst, rel_err(fd_conj_gradient(P.P_d[j][k], xi, h), an));
        }
        const Mat an = S.grad_a(P, A, k);
        Mat a = A.row(k).transpose();
        auto xi_a = [&]() {
            A.row(k) = a.transpose();
            return S.xi(P, A);
        };
        const Mat fd = fd_conj_gradient(a, xi_a, h);
        A.row(k) = a.transpose();
        worst = std::max(worst, rel_err(fd, an));
    }
    return worst;
}

// Largest relative error of the rate gradients (every frame-k rate with
// respect to every block of frame k) against finite differences.
inline double rate_fd_error(const SystemConfig& cfg, std::uint64_t seed, double h = 1e-7)
{
    ChannelSet ch = generate_channels(cfg, seed);
    std::mt19937_64 g(seed + 202);
    PrecoderSet P = random_precoders(cfg, g);
    CodeMatrix A = random_code(cfg, g);

    double worst = 0.0;
    auto audit = [&](Mat& X, const BlockId& id) {
        const RateGradientSet an = linearized_rate_gradients(cfg, ch, P, A, id);
        for (int i = 0; i < cfg.I; ++i) {
            auto r = [&]() { return rate_ul_bits(cfg, ch, P, A, i, id.k); };
            const Mat fd = fd_conj_gradient(X, r, h);
            if (fd.norm() > 1e-8)
                worst = std::max(worst, rel_err(an.d_ul[i], fd));
        }
        for (int j = 0; j < cfg.J; ++j) {
            auto r = [&]() { return rate_dl_bits(cfg, ch, P, A, j, id.k); };
            const Mat fd = fd_conj_gradient(X, r, h);
            if (fd.norm() > 1e-8)
                worst = std::max(worst, rel_err(an.d_dl[j], fd));
        }
    };
    for (int k = 0; k < cfg.K; ++k) {
        for (int i = 0; i < cfg.I; ++i)
            audit(P.P_u[i][k], {BlockKind::Uplink, i, k});
        for (int j = 0; j < cfg.J; ++j)
            audit(P.P_d[j][k], {BlockKind::Downlink, j, k});
    }
    return worst;
}

// Dense solve of A X + sum F X B = C with the operator assembled column by
// column from its action on unit matrices.
inline Mat dense_sylvester(const SylvesterSystem& s)
{
    const Eigen::Index r = s.C.rows(), c = s.C.cols(), n = r * c;
    Mat M(n, n);
    for (Eigen::Index q = 0; q < n; ++q) {
        Mat E = Mat::Zero(r, c);
        E(q) = 1.0;
        Mat Y = s.A * E;
        for (std::size_t t = 0; t < s.F.size(); ++t)
            Y += s.F[t] * E * s.B[t];
        M.col(q) = Eigen::Map<const Vec>(Y.data(), n);
    }
    Vec x = M.fullPivLu().solve(Eigen::Map<const Vec>(s.C.data(), n));
    return Eigen::Map<const Mat>(x.data(), r, c);
}

inline SylvesterSystem random_sylvester(std::mt19937_64& g, int rows, int cols, int terms)
{
    SylvesterSystem s;
    s.A = random_hpd(g, rows, 1.0);
    for (int t = 0; t < terms; ++t) {
        s.F.push_back(random_hpd(g, rows));
        s.B.push_back(random_hpd(g, cols));
    }
    s.C = crandn(g, rows, cols);
    return s;
}

// Exact nearest PAR-feasible vector by enumerating which entries sit on
// the peak bound: every optimal magnitude profile is clipped on a subset
// and proportional to |z| elsewhere.
inline double par_bruteforce_distance(const Vec& z, double P, double gamma)
{
    const int K = static_cast<int>(z.size());
    const double cap = std::sqrt(gamma * P / K);
    double best = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < (1 << K); ++mask) {
        double free2 = 0.0;
        int clipped = 0;
        for (int q = 0; q < K; ++q) {
            if (mask & (1 << q))
                ++clipped;
            else
                free2 += std::norm(z(q));
        }
        const double left = P - clipped * cap * cap;
        if (left < -1e-15)
            continue;
        const double t = free2 > 0.0 ? std::sqrt(std::max(left, 0.0) / free2) : 0.0;
        if (free2 == 0.0 && left > 1e-15)
            continue;
        Vec a(K);
        bool ok = true;
        for (int q = 0; q < K; ++q) {
            const double ph = std::abs(z(q)) > 0.0 ? 1.0 / std::abs(z(q)) : 0.0;
            const double m = (mask & (1 << q)) ? cap : t * std::abs(z(q));
            if (m > cap * (1.0 + 1e-12))
                ok = false;
            a(q) = (mask & (1 << q)) ? m * z(q) * ph : t * z(q);
        }
        if (ok)
            best = std::min(best, (a - z).norm());
    }
    return best;
}

} // namespace mrmc::test
