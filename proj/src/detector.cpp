#include "mrmc/detector.hpp"

#include "mrmc/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace mrmc {

DetectionInstance whitened_instance(const std::vector<Mat>& R_t, const std::vector<Mat>& R_in)
{
    if (R_t.size() != R_in.size())
        throw std::invalid_argument("whitened_instance: receiver count mismatch");
    DetectionInstance inst;
    for (size_t n = 0; n < R_t.size(); ++n) {
        Mat W = inv_sqrt_hpd(R_in[n]);
        Mat G = herm(W * R_t[n] * W);
        Eigen::SelfAdjointEigenSolver<Mat> es(G);
        const Eigen::Index K = G.rows();
        RVec d(K);
        Mat V(K, K);
        for (Eigen::Index i = 0; i < K; ++i) {
            d(i) = std::max(es.eigenvalues()(K - 1 - i), 0.0);
            V.col(i) = es.eigenvectors().col(K - 1 - i);
        }
        inst.G.push_back(std::move(G));
        inst.delta.push_back(std::move(d));
        inst.V.push_back(std::move(V));
    }
    return inst;
}

DetectionInstance design_instance(const SystemConfig& cfg, const ChannelSet& ch, const PrecoderSet& P,
                                  const CodeMatrix& A)
{
    CovarianceBundle b = build_bundle(cfg, ch, A, P);
    std::vector<Mat> Rt, Rin;
    for (const auto& r : b.radar) {
        Rt.push_back(r.R_t);
        Rin.push_back(r.R_in);
    }
    return whitened_instance(Rt, Rin);
}

double test_statistic(const std::vector<Vec>& y_hat, const DetectionInstance& inst)
{
    double T = 0.0;
    for (size_t n = 0; n < inst.delta.size(); ++n) {
        const RVec& d = inst.delta[n];
        for (Eigen::Index k = 0; k < d.size(); ++k)
            T += d(k) / (1.0 + d(k)) * std::norm(y_hat[n](k));
    }
    return T;
}

double test_statistic_whitened(const std::vector<Vec>& y_bar, const DetectionInstance& inst)
{
    double T = 0.0;
    for (size_t n = 0; n < inst.G.size(); ++n) {
        const Eigen::Index K = inst.G[n].rows();
        Mat Q = Mat::Identity(K, K) - inv_hpd(inst.G[n] + Mat::Identity(K, K));
        T += std::real(y_bar[n].dot(Q * y_bar[n]));
    }
    return T;
}

namespace {

// Statistics of one block of trials under H0 and H1. |CN(0,1)|^2 is
// Exp(1), so each eigen-coordinate costs one exponential draw.
void simulate_block(const std::vector<double>& d, std::uint64_t seed, long block, long count, double* t0,
                    double* t1)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
    std::mt19937_64 gen(seq);
    std::exponential_distribution<double> ex(1.0);
    for (long t = 0; t < count; ++t) {
        double h0 = 0.0, h1 = 0.0;
        for (double di : d)
            h0 += di / (1.0 + di) * ex(gen);
        for (double di : d)
            h1 += di * ex(gen);
        t0[t] = h0;
        t1[t] = h1;
    }
}

double quantile_sorted(const std::vector<double>& s, double p)
{
    const auto idx = static_cast<size_t>(std::floor(p * static_cast<double>(s.size() - 1)));
    return s[idx];
}

double exceed(const std::vector<double>& sorted, double nu)
{
    auto it = std::upper_bound(sorted.begin(), sorted.end(), nu);
    return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
}

} // namespace

RocCurve simulate_roc(const DetectionInstance& inst, long n_trials, std::uint64_t seed, std::vector<double> nu_grid,
                      unsigned workers)
{
    if (n_trials < 1)
        throw std::invalid_argument("simulate_roc: n_trials must be >= 1");
    std::vector<double> d;
    for (const auto& dn : inst.delta)
        for (Eigen::Index k = 0; k < dn.size(); ++k)
            d.push_back(dn(k));

    std::vector<double> T0(n_trials), T1(n_trials);
    const long blocks = (n_trials + kTrialBlock - 1) / kTrialBlock;
    if (workers == 0)
        workers = std::thread::hardware_concurrency();
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(blocks)));
    auto run = [&](unsigned w) {
        for (long b = w; b < blocks; b += workers) {
            const long first = b * kTrialBlock;
            const long count = std::min(kTrialBlock, n_trials - first);
            simulate_block(d, seed, b, count, T0.data() + first, T1.data() + first);
        }
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back(run, w);
        for (auto& th : pool)
            th.join();
    }
    std::sort(T0.begin(), T0.end());
    std::sort(T1.begin(), T1.end());

    if (nu_grid.empty()) {
        const double lo = quantile_sorted(T0, 0.001), hi = quantile_sorted(T0, 0.999);
        if (hi <= 0.0) {
            nu_grid.push_back(0.0);
        } else {
            const double a = std::log(lo > 0.0 ? lo : hi * 1e-6), b = std::log(hi);
            for (int i = 0; i < kThresholdCount; ++i)
                nu_grid.push_back(std::exp(a + (b - a) * i / (kThresholdCount - 1)));
            nu_grid.back() = hi;
        }
    }

    RocCurve roc;
    roc.n_trials = n_trials;
    roc.seed = seed;
    roc.nu = nu_grid;
    for (double nu : nu_grid) {
        roc.pfa.push_back(exceed(T0, nu));
        roc.pd.push_back(exceed(T1, nu));
    }
    return roc;
}

double pd_at_pfa(const RocCurve& roc, double pfa)
{
    if (roc.nu.empty())
        throw std::invalid_argument("pd_at_pfa: empty curve");
    // pfa is non-increasing along the grid.
    size_t hi = roc.pfa.size() - 1;
    if (roc.pfa[hi] >= pfa)
        return roc.pd[hi];
    if (roc.pfa[0] <= pfa)
        return roc.pd[0];
    size_t lo = 0;
    while (hi - lo > 1) {
        const size_t mid = (lo + hi) / 2;
        (roc.pfa[mid] >= pfa ? lo : hi) = mid;
    }
    const double a = roc.pfa[lo], b = roc.pfa[hi];
    if (b <= 0.0 || a == b)
        return roc.pd[lo];
    const double w = (std::log(a) - std::log(pfa)) / (std::log(a) - std::log(b));
    return roc.pd[lo] + w * (roc.pd[hi] - roc.pd[lo]);
}

CodeMatrix baseline_code(const SystemConfig& cfg, CodeKind kind, std::uint64_t seed)
{
    CodeMatrix A(cfg.K, cfg.M_r);
    if (kind == CodeKind::Uncoded) {
        for (int m = 0; m < cfg.M_r; ++m)
            A.col(m).setConstant(std::sqrt(cfg.P_r[m] / cfg.K));
        return A;
    }
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
    Mat Z(cfg.K, cfg.K);
    for (int c = 0; c < cfg.K; ++c)
        for (int r = 0; r < cfg.K; ++r)
            Z(r, c) = cd(nd(gen), nd(gen));
    Eigen::HouseholderQR<Mat> qr(Z);
    Mat Q = qr.householderQ() * Mat::Identity(cfg.K, cfg.K);
    for (int m = 0; m < cfg.M_r; ++m)
        A.col(m) = par_project(std::sqrt(cfg.P_r[m]) * Q.col(m % cfg.K), cfg.P_r[m], cfg.gamma[m]);
    return A;
}

} // namespace mrmc
