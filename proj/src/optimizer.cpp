#include "mrmc/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace mrmc {

// ---------------------------------------------------------------- Sylvester

Mat sylvester_kron(const SylvesterSystem& s)
{
    const Eigen::Index q = s.C.cols();
    Mat M = kron(Mat::Identity(q, q), s.A);
    for (size_t t = 0; t < s.F.size(); ++t)
        M += kron(s.B[t].transpose(), s.F[t]);
    return M;
}

namespace {

double backward_error(const Mat& M, const Vec& x, const Vec& c)
{
    const double scale = M.norm() * x.norm() + c.norm();
    const double r = (M * x - c).norm();
    return scale > 0.0 ? r / scale : r;
}

} // namespace

double sylvester_residual(const SylvesterSystem& s, const Mat& X)
{
    return backward_error(sylvester_kron(s), vec(X), vec(s.C));
}

Mat solve_sylvester(const SylvesterSystem& s, double* residual)
{
    Mat M = sylvester_kron(s);
    const Vec c = vec(s.C);
    Eigen::PartialPivLU<Mat> lu(M);
    if (!(lu.rcond() > 1.0 / kConditionLimit)) {
        M += kRegularization * Mat::Identity(M.rows(), M.cols());
        lu.compute(M);
    }
    const Vec x = lu.solve(c);
    const double res = backward_error(M, x, c);
    if (residual)
        *residual = res;
    if (!(res < kSylvesterTolerance))
        throw std::runtime_error("solve_sylvester: residual check failed");
    return unvec(x, s.C.rows(), s.C.cols());
}

// ---------------------------------------------------------------- PAR

Vec par_project(const Vec& z, double P, double gamma)
{
    const int K = static_cast<int>(z.size());
    const double delta = std::sqrt(gamma * P / K);
    Vec out(K);
    auto ph = [](cd v) { return v == cd(0.0) ? cd(1.0) : v / std::abs(v); };

    if (gamma <= 1.0) {
        for (int k = 0; k < K; ++k)
            out(k) = delta * ph(z(k));
        return out;
    }

    RVec mag = z.cwiseAbs();
    // Largest first; among equal magnitudes the higher index is clipped
    // first so lower indices stay in the least-magnitude set.
    std::vector<int> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (mag(a) != mag(b))
            return mag(a) > mag(b);
        return a > b;
    });

    RVec tail(K + 1);
    tail(K) = 0.0;
    for (int p = K - 1; p >= 0; --p)
        tail(p) = tail(p + 1) + mag(order[p]) * mag(order[p]);

    for (int M = 0; M < K; ++M) {
        const double remaining = P - M * delta * delta;
        if (remaining <= 0.0)
            break;
        double c = 0.0;
        bool fill = tail(M) == 0.0;
        if (!fill) {
            c = std::sqrt(remaining / tail(M));
            if (c * mag(order[M]) > delta * (1.0 + 1e-12))
                continue;
        } else if (remaining / (K - M) > delta * delta * (1.0 + 1e-12)) {
            continue;
        }
        const double flat = std::sqrt(remaining / (K - M));
        for (int p = 0; p < K; ++p) {
            const int idx = order[p];
            if (p < M)
                out(idx) = delta * ph(z(idx));
            else
                out(idx) = fill ? cd(flat) : c * z(idx);
        }
        return out;
    }
    // Unreachable for gamma >= 1; fall back to constant modulus.
    for (int k = 0; k < K; ++k)
        out(k) = std::sqrt(P / K) * ph(z(k));
    return out;
}

CodeMatrix par_project_columns(const SystemConfig& cfg, const CodeMatrix& A)
{
    CodeMatrix out(A.rows(), A.cols());
    for (int m = 0; m < cfg.M_r; ++m)
        out.col(m) = par_project(A.col(m), cfg.P_r[m], cfg.gamma[m]);
    return out;
}

// ---------------------------------------------------------------- duals

DualState initial_dual(const SystemConfig& cfg)
{
    DualState d;
    d.lambda_u.assign(cfg.I, std::vector<double>(cfg.K, 1.0));
    d.lambda_d.assign(cfg.K, 1.0);
    d.mu_u.assign(cfg.I, std::vector<double>(cfg.K, 1.0));
    d.mu_d.assign(cfg.J, std::vector<double>(cfg.K, 1.0));
    return d;
}

std::optional<double> polyak_step(double xi_t, double xi_min, int t, double violation)
{
    const double den = violation * violation;
    if (den < 1e-15)
        return std::nullopt;
    return (xi_t - xi_min + std::pow(0.1, t)) / den;
}

// ---------------------------------------------------------------- rates

namespace {

constexpr double kLn2 = std::numbers::ln2;

struct FrameInverses {
    Mat Rbs_inv;
    std::vector<Mat> Rin_u_inv;
    std::vector<Mat> Rd_inv;
    std::vector<Mat> Rin_d_inv;
};

FrameInverses frame_inverses(const SystemConfig& cfg, const ChannelSet& ch, const PrecoderSet& P,
                             const CodeMatrix& A, int k)
{
    FrameInverses f;
    Mat Rbs = bs_receive_cov(cfg, ch, A, P, k);
    f.Rbs_inv = inv_hpd(Rbs);
    for (int i = 0; i < cfg.I; ++i) {
        Mat G = ch.H_iB[i] * P.P_u[i][k];
        f.Rin_u_inv.push_back(inv_hpd(Rbs - G * G.adjoint()));
    }
    for (int j = 0; j < cfg.J; ++j) {
        Mat Rd = ue_receive_cov(cfg, ch, A, P, j, k);
        Mat G = ch.H_Bj[j] * P.P_d[j][k];
        f.Rd_inv.push_back(inv_hpd(Rd));
        f.Rin_d_inv.push_back(inv_hpd(Rd - G * G.adjoint()));
    }
    return f;
}

double rate_from(const Mat& G, const Mat& R)
{
    return (logdet_hpd(R) - logdet_hpd(R - G * G.adjoint())) / kLn2;
}

} // namespace

double rate_ul_bits(const SystemConfig& cfg, const ChannelSet& ch, const PrecoderSet& P, const CodeMatrix& A,
                    int i, int k)
{
    return rate_from(ch.H_iB[i] * P.P_u[i][k], bs_receive_cov(cfg, ch, A, P, k));
}

double rate_dl_bits(const SystemConfig& cfg, const ChannelSet& ch, const PrecoderSet& P, const CodeMatrix& A,
                    int j, int k)
{
    return rate_from(ch.H_Bj[j] * P.P_d[j][k], ue_receive_cov(cfg, ch, A, P, j, k));
}

RateGradientSet linearized_rate_gradients(const SystemConfig& cfg, const ChannelSet& ch, const PrecoderSet& P,
                                          const CodeMatrix& A, const BlockId& target)
{
    const int k = target.k;
    FrameInverses f = frame_inverses(cfg, ch, P, A, k);
    RateGradientSet g;
    auto form = [](const Mat& H, const Mat& Q, const Mat& X) -> Mat { return H.adjoint() * Q * H * X / kLn2; };
    switch (target.kind) {
    case BlockKind::Uplink: {
        const int i = target.index;
        const Mat& X = P.P_u[i][k];
        for (int q = 0; q < cfg.I; ++q)
            g.d_ul.push_back(q == i ? form(ch.H_iB[i], f.Rbs_inv, X)
                                    : form(ch.H_iB[i], f.Rbs_inv - f.Rin_u_inv[q], X));
        for (int j = 0; j < cfg.J; ++j)
            g.d_dl.push_back(form(ch.H_ij[i][j], f.Rd_inv[j] - f.Rin_d_inv[j], X));
        break;
    }
    case BlockKind::Downlink: {
        const int j = target.index;
        const Mat& X = P.P_d[j][k];
        for (int i = 0; i < cfg.I; ++i)
            g.d_ul.push_back(form(ch.H_BB, f.Rbs_inv - f.Rin_u_inv[i], X));
        for (int q = 0; q < cfg.J; ++q)
            g.d_dl.push_back(q == j ? form(ch.H_Bj[j], f.Rd_inv[j], X)
                                    : form(ch.H_Bj[q], f.Rd_inv[q] - f.Rin_d_inv[q], X));
        break;
    }
    case BlockKind::Code: {
        Mat a = A.row(k).transpose();
        for (int i = 0; i < cfg.I; ++i)
            g.d_ul.push_back(form(ch.H_rB, f.Rbs_inv - f.Rin_u_inv[i], a));
        for (int j = 0; j < cfg.J; ++j)
            g.d_dl.push_back(form(ch.H_rj[j], f.Rd_inv[j] - f.Rin_d_inv[j], a));
        break;
    }
    }
    return g;
}

// ---------------------------------------------------------------- surrogate

namespace {

// Re tr(Q X X^H)
double quad(const Mat& Q, const Mat& X)
{
    return std::real((Q * X).cwiseProduct(X.conjugate()).sum());
}

// Re tr(G^H X)
double re_dot(const Mat& G, const Mat& X)
{
    return std::real(G.conjugate().cwiseProduct(X).sum());
}

} // namespace

Surrogate::Surrogate(const SystemConfig& cfg, const ChannelSet& ch)
    : cfg_(cfg), ch_(ch), rs_(radar_statics(cfg, ch))
{
}

void Surrogate::set_filters(const FilterSet& U, const WeightSet& W)
{
    Omega_.clear();
    UW_.clear();
    trW_r_.clear();
    for (int n = 0; n < cfg_.N_r; ++n) {
        const double a = cfg_.alpha_r[n];
        Mat UhW = U.U_r[n].adjoint() * W.W_r[n];
        UW_.push_back(a * UhW);
        Omega_.push_back(herm(a * UhW * U.U_r[n]));
        trW_r_.push_back(a * std::real(W.W_r[n].trace()));
    }
    xi_ul_.assign(cfg_.K, Mat::Zero(cfg_.N_c, cfg_.N_c));
    trW_c_.assign(cfg_.K, 0.0);
    UW_u_.assign(cfg_.I, std::vector<Mat>(cfg_.K));
    UW_d_.assign(cfg_.J, std::vector<Mat>(cfg_.K));
    xi_d_.assign(cfg_.J, std::vector<Mat>(cfg_.K));
    for (int k = 0; k < cfg_.K; ++k) {
        for (int i = 0; i < cfg_.I; ++i) {
            const double a = cfg_.alpha_u[i];
            Mat UhW = U.U_u[i][k].adjoint() * W.W_u[i][k];
            UW_u_[i][k] = a * UhW;
            xi_ul_[k] += a * UhW * U.U_u[i][k];
            trW_c_[k] += a * std::real(W.W_u[i][k].trace());
        }
        xi_ul_[k] = herm(xi_ul_[k]);
        for (int j = 0; j < cfg_.J; ++j) {
            const double a = cfg_.alpha_d[j];
            Mat UhW = U.U_d[j][k].adjoint() * W.W_d[j][k];
            UW_d_[j][k] = a * UhW;
            xi_d_[j][k] = herm(a * UhW * U.U_d[j][k]);
            trW_c_[k] += a * std::real(W.W_d[j][k].trace());
        }
    }
}

Surrogate::RadarParts Surrogate::radar_parts(const PrecoderSet& P, const CodeMatrix& A, int n) const
{
    const int K = cfg_.K;
    RadarParts rp;
    rp.St = target_factor(cfg_, ch_, rs_, A, P, n);
    const int lBm = cfg_.n_t - cfg_.n_Bm, lu = cfg_.n_t - cfg_.n_u;
    rp.Zbm.resize(K, cfg_.M_c);
    for (int k = 0; k < K; ++k)
        rp.Zbm.row(k) = rs_.dBm[n](k) * dl_symbol(cfg_, ch_, P, k, lBm).transpose();
    for (int i = 0; i < cfg_.I; ++i) {
        Mat Z(K, cfg_.Nu[i]);
        for (int k = 0; k < K; ++k)
            Z.row(k) = rs_.dur[n](k, i) * ul_symbol(ch_, P, i, k, lu).transpose();
        rp.Zu.push_back(std::move(Z));
    }
    if (!cfg_.cooperation) {
        rp.zBt.resize(K);
        for (int k = 0; k < K; ++k)
            rp.zBt(k) = rs_.psi[n](k) * rs_.aT[n].dot(dl_symbol(cfg_, ch_, P, k, 0));
    }
    return rp;
}

double Surrogate::xi_radar(const PrecoderSet& P, const CodeMatrix& A) const
{
    double x = 0.0;
    for (int n = 0; n < cfg_.N_r; ++n) {
        const Mat& Om = Omega_[n];
        RadarParts rp = radar_parts(P, A, n);
        x += trW_r_[n] - 2.0 * re_dot(UW_[n], rp.St) + quad(Om, rp.St);
        x += std::real((Om * A * ch_.Sigma_c[n]).cwiseProduct(A.conjugate()).sum());
        x += quad(Om, rp.Zbm);
        for (const auto& Z : rp.Zu)
            x += quad(Om, Z);
        if (!cfg_.cooperation)
            x += quad(Om, rp.zBt);
        x += cfg_.sigma2_r * std::real(Om.trace());
    }
    return x;
}

double Surrogate::xi_comm_frame(const PrecoderSet& P, const CodeMatrix& A, int k) const
{
    double x = trW_c_[k];
    for (int i = 0; i < cfg_.I; ++i)
        x -= 2.0 * re_dot(UW_u_[i][k], ch_.H_iB[i] * P.P_u[i][k]);
    for (int j = 0; j < cfg_.J; ++j)
        x -= 2.0 * re_dot(UW_d_[j][k], ch_.H_Bj[j] * P.P_d[j][k]);
    Mat Rbs = bs_receive_cov(cfg_, ch_, A, P, k);
    x += std::real(xi_ul_[k].cwiseProduct(Rbs.transpose()).sum());
    for (int j = 0; j < cfg_.J; ++j) {
        Mat Rd = ue_receive_cov(cfg_, ch_, A, P, j, k);
        x += std::real(xi_d_[j][k].cwiseProduct(Rd.transpose()).sum());
    }
    return x;
}

double Surrogate::xi(const PrecoderSet& P, const CodeMatrix& A) const
{
    ++stats.xi_evaluations;
    double x = xi_radar(P, A);
    for (int k = 0; k < cfg_.K; ++k)
        x += xi_comm_frame(P, A, k);
    return x;
}

Mat Surrogate::grad_P_u(const PrecoderSet& P, const CodeMatrix& A, int i, int k) const
{
    const Mat& X = P.P_u[i][k];
    const Vec& x = ch_.d_u[i][k][cfg_.n_t - cfg_.n_u];
    Mat g = ch_.H_iB[i].adjoint() * (xi_ul_[k] * (ch_.H_iB[i] * X) - UW_u_[i][k]);
    for (int j = 0; j < cfg_.J; ++j)
        g += ch_.H_ij[i][j].adjoint() * xi_d_[j][k] * ch_.H_ij[i][j] * X;
    for (int n = 0; n < cfg_.N_r; ++n) {
        RadarParts rp = radar_parts(P, A, n);
        Vec v = (Omega_[n].row(k) * rp.Zu[i]).transpose();
        g += std::conj(rs_.dur[n](k, i)) * v * x.adjoint();
    }
    return g;
}

Mat Surrogate::grad_P_d(const PrecoderSet& P, const CodeMatrix& A, int j, int k) const
{
    const Mat& X = P.P_d[j][k];
    const Vec& x0 = ch_.d_d[j][k][0];
    const Vec& y = ch_.d_d[j][k][cfg_.n_t - cfg_.n_Bm];
    Mat g = ch_.H_BB.adjoint() * xi_ul_[k] * ch_.H_BB * X - ch_.H_Bj[j].adjoint() * UW_d_[j][k];
    for (int q = 0; q < cfg_.J; ++q)
        g += ch_.H_Bj[q].adjoint() * xi_d_[q][k] * ch_.H_Bj[q] * X;
    for (int n = 0; n < cfg_.N_r; ++n) {
        RadarParts rp = radar_parts(P, A, n);
        const Mat& Om = Omega_[n];
        cd gBt;
        if (cfg_.cooperation)
            gBt = (Om.row(k) * rp.St.col(cfg_.M_r))(0) - UW_[n](k, cfg_.M_r);
        else
            gBt = (Om.row(k) * rp.zBt)(0);
        g += std::conj(rs_.psi[n](k)) * gBt * rs_.aT[n] * x0.adjoint();
        Vec v = (Om.row(k) * rp.Zbm).transpose();
        g += std::conj(rs_.dBm[n](k)) * v * y.adjoint();
    }
    return g;
}

Vec Surrogate::grad_a(const PrecoderSet& P, const CodeMatrix& A, int k) const
{
    Vec a = A.row(k).transpose();
    Vec g = ch_.H_rB.adjoint() * xi_ul_[k] * ch_.H_rB * a;
    for (int j = 0; j < cfg_.J; ++j)
        g += ch_.H_rj[j].adjoint() * xi_d_[j][k] * ch_.H_rj[j] * a;
    for (int n = 0; n < cfg_.N_r; ++n) {
        const Mat& Om = Omega_[n];
        Mat St = target_factor(cfg_, ch_, rs_, A, P, n);
        Vec gs = (Om.row(k) * St.leftCols(cfg_.M_r) - UW_[n].row(k).leftCols(cfg_.M_r)).transpose();
        g += rs_.Phi[n].row(k).transpose().conjugate().cwiseProduct(gs);
        g += ch_.Sigma_c[n].transpose() * (Om.row(k) * A).transpose();
    }
    return g;
}

Mat Surrogate::gradient(const PrecoderSet& P, const CodeMatrix& A, const BlockId& b) const
{
    switch (b.kind) {
    case BlockKind::Uplink:
        return grad_P_u(P, A, b.index, b.k);
    case BlockKind::Downlink:
        return grad_P_d(P, A, b.index, b.k);
    case BlockKind::Code:
        return grad_a(P, A, b.k);
    }
    return {};
}

SylvesterSystem Surrogate::system(const PrecoderSet& P, const CodeMatrix& A, const BlockId& b) const
{
    const int k = b.k;
    SylvesterSystem s;
    Mat X;
    switch (b.kind) {
    case BlockKind::Uplink: {
        const int i = b.index;
        X = P.P_u[i][k];
        s.A = ch_.H_iB[i].adjoint() * xi_ul_[k] * ch_.H_iB[i];
        for (int j = 0; j < cfg_.J; ++j)
            s.A += ch_.H_ij[i][j].adjoint() * xi_d_[j][k] * ch_.H_ij[i][j];
        double f = 0.0;
        for (int n = 0; n < cfg_.N_r; ++n)
            f += std::norm(rs_.dur[n](k, i)) * std::real(Omega_[n](k, k));
        const Vec& x = ch_.d_u[i][k][cfg_.n_t - cfg_.n_u];
        s.F.push_back(f * Mat::Identity(cfg_.Nu[i], cfg_.Nu[i]));
        s.B.push_back(x * x.adjoint());
        break;
    }
    case BlockKind::Downlink: {
        const int j = b.index;
        X = P.P_d[j][k];
        s.A = ch_.H_BB.adjoint() * xi_ul_[k] * ch_.H_BB;
        for (int q = 0; q < cfg_.J; ++q)
            s.A += ch_.H_Bj[q].adjoint() * xi_d_[q][k] * ch_.H_Bj[q];
        Mat FBt = Mat::Zero(cfg_.M_c, cfg_.M_c);
        double fBm = 0.0;
        for (int n = 0; n < cfg_.N_r; ++n) {
            const double w = std::real(Omega_[n](k, k));
            FBt += std::norm(rs_.psi[n](k)) * w * rs_.aT[n] * rs_.aT[n].adjoint();
            fBm += std::norm(rs_.dBm[n](k)) * w;
        }
        const Vec& x0 = ch_.d_d[j][k][0];
        const Vec& y = ch_.d_d[j][k][cfg_.n_t - cfg_.n_Bm];
        s.F.push_back(herm(FBt));
        s.B.push_back(x0 * x0.adjoint());
        s.F.push_back(fBm * Mat::Identity(cfg_.M_c, cfg_.M_c));
        s.B.push_back(y * y.adjoint());
        break;
    }
    case BlockKind::Code: {
        X = A.row(k).transpose();
        s.A = ch_.H_rB.adjoint() * xi_ul_[k] * ch_.H_rB;
        for (int j = 0; j < cfg_.J; ++j)
            s.A += ch_.H_rj[j].adjoint() * xi_d_[j][k] * ch_.H_rj[j];
        Mat Fr = Mat::Zero(cfg_.M_r, cfg_.M_r);
        for (int n = 0; n < cfg_.N_r; ++n) {
            const double w = std::real(Omega_[n](k, k));
            RVec ph = rs_.Phi[n].row(k).cwiseAbs2().transpose();
            Fr += w * (Mat(ph.cast<cd>().asDiagonal()) + ch_.Sigma_c[n].transpose());
        }
        s.F.push_back(herm(Fr));
        s.B.push_back(Mat::Identity(1, 1));
        break;
    }
    }
    s.A = herm(s.A);
    Mat self = s.A * X;
    for (size_t t = 0; t < s.F.size(); ++t)
        self += s.F[t] * X * s.B[t];
    s.C = self - gradient(P, A, b);
    return s;
}

// ---------------------------------------------------------------- per-user subgradient

namespace {

Mat& block_ref(PrecoderSet& P, BlockKind kind, int index, int k)
{
    return kind == BlockKind::Uplink ? P.P_u[index][k] : P.P_d[index][k];
}

Mat rate_rhs(const SylvesterSystem& sys, const RateGradientSet& g, const DualState& dual, int k)
{
    Mat rhs = sys.C;
    for (size_t q = 0; q < g.d_ul.size(); ++q)
        rhs += dual.mu_u[q][k] * g.d_ul[q];
    for (size_t q = 0; q < g.d_dl.size(); ++q)
        rhs += dual.mu_d[q][k] * g.d_dl[q];
    return rhs;
}

void record_solve(const Surrogate& S, double res)
{
    ++S.stats.sylvester_solves;
    S.stats.max_sylvester_residual = std::max(S.stats.max_sylvester_residual, res);
}

// Lagrangian minimizer with the smallest multiplier increment that meets
// the power budget. The Kronecker operator is Hermitian PSD, so the power
// is a decreasing rational function of the increment.
Mat power_recovery(const Surrogate& S, const SylvesterSystem& s, double budget)
{
    if (budget <= 0.0)
        return Mat::Zero(s.C.rows(), s.C.cols());
    const Mat M = herm(sylvester_kron(s));
    Eigen::SelfAdjointEigenSolver<Mat> es(M);
    const RVec e = es.eigenvalues().cwiseMax(0.0);
    const Vec c = es.eigenvectors().adjoint() * vec(s.C);
    const RVec c2 = c.cwiseAbs2();
    auto power = [&](double x) { return (c2.array() / (e.array() + x).square()).sum(); };
    double lo = 0.0, hi = std::sqrt(c2.sum() / budget);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (power(mid) > budget ? lo : hi) = mid;
    }
    const Vec x = es.eigenvectors() * (c.array() / (e.array() + hi).cast<cd>()).matrix();
    const Vec rhs = vec(s.C);
    const double res = backward_error(M + hi * Mat::Identity(M.rows(), M.cols()), x, rhs);
    record_solve(S, res);
    if (!(res < kSylvesterTolerance))
        throw std::runtime_error("power_recovery: residual check failed");
    return unvec(x, s.C.rows(), s.C.cols());
}

} // namespace

SubgradientResult subgradient_user(Surrogate& S, PrecoderSet& P, const CodeMatrix& A, DualState& dual,
                                   BlockKind kind, int index, int k, int t_max)
{
    const SystemConfig& cfg = S.cfg();
    const ChannelSet& ch = S.channels();
    const BlockId id{kind, index, k};
    const bool ul = kind == BlockKind::Uplink;
    Mat& X = block_ref(P, kind, index, k);

    // The block plus, for DL, the other users sharing the frame budget.
    auto save = [&]() {
        if (ul)
            return std::vector<Mat>{X};
        std::vector<Mat> v;
        for (int g = 0; g < cfg.J; ++g)
            v.push_back(P.P_d[g][k]);
        return v;
    };
    auto restore = [&](const std::vector<Mat>& v) {
        if (ul)
            X = v[0];
        else
            for (int g = 0; g < cfg.J; ++g)
                P.P_d[g][k] = v[g];
    };
    auto total_power = [&]() {
        if (ul)
            return X.squaredNorm();
        double p = 0.0;
        for (int g = 0; g < cfg.J; ++g)
            p += P.P_d[g][k].squaredNorm();
        return p;
    };

    double xi_fixed = 0.0;
    for (int kk = 0; kk < cfg.K; ++kk)
        if (kk != k)
            xi_fixed += S.xi_comm_frame(P, A, kk);
    auto xi_now = [&]() {
        ++S.stats.xi_evaluations;
        return xi_fixed + S.xi_comm_frame(P, A, k) + S.xi_radar(P, A);
    };
    auto rate_now = [&]() {
        return ul ? rate_ul_bits(cfg, ch, P, A, index, k) : rate_dl_bits(cfg, ch, P, A, index, k);
    };

    const double cap = ul ? cfg.P_U : cfg.P_B;
    const double floor = ul ? cfg.R_UL : cfg.R_DL;
    double& mu_slot = ul ? dual.mu_u[index][k] : dual.mu_d[index][k];
    double& lambda_slot = ul ? dual.lambda_u[index][k] : dual.lambda_d[k];
    double lambda = lambda_slot, mu = mu_slot;

    std::vector<Mat> base = save();
    SylvesterSystem sys = S.system(P, A, id);
    double budget = std::max(cap - (total_power() - X.squaredNorm()), 0.0);
    RateGradientSet grads = linearized_rate_gradients(cfg, ch, P, A, id);

    std::vector<Mat> best = base;
    double xi_min = xi_now();
    double best_rate = rate_now();
    std::vector<bool> base_ok(cfg.J, true);
    auto mark_base = [&]() {
        if (!ul)
            for (int g = 0; g < cfg.J; ++g)
                base_ok[g] = rate_dl_bits(cfg, ch, P, A, g, k) >= floor;
    };
    mark_base();

    Mat prev;
    int stalled = 0, t = 1;
    for (; t <= t_max; ++t) {
        mu_slot = mu;
        SylvesterSystem s = sys;
        s.A += lambda * Mat::Identity(s.A.rows(), s.A.cols());
        s.C = rate_rhs(sys, grads, dual, k);
        double res = 0.0;
        Mat Xt = solve_sylvester(s, &res);
        record_solve(S, res);

        // Primal recovery: the Lagrangian minimizer is pushed back onto the
        // power budget. DL users may also rescale the whole frame jointly.
        restore(base);
        X = Xt;
        double xi_t, rate_t;
        if (Xt.squaredNorm() > budget) {
            X = power_recovery(S, s, budget);
            xi_t = xi_now();
            rate_t = rate_now();
            if (!ul) {
                std::vector<Mat> own = save();
                X = Xt;
                const double c = std::sqrt(cap / total_power());
                for (int g = 0; g < cfg.J; ++g)
                    P.P_d[g][k] *= c;
                const double xi_j = xi_now();
                bool qos_kept = true;
                for (int g = 0; g < cfg.J; ++g)
                    if (g != index && rate_dl_bits(cfg, ch, P, A, g, k) < floor)
                        qos_kept = false;
                if (xi_j < xi_t && qos_kept) {
                    xi_t = xi_j;
                    rate_t = rate_now();
                } else {
                    restore(own);
                }
            }
        } else {
            xi_t = xi_now();
            rate_t = rate_now();
        }
        const double power = total_power();

        // DL users already on their floor must stay there.
        bool others_kept = true;
        if (!ul)
            for (int g = 0; g < cfg.J; ++g)
                if (g != index && base_ok[g] && rate_dl_bits(cfg, ch, P, A, g, k) < floor)
                    others_kept = false;
        if (xi_t < xi_min && others_kept && (rate_t >= floor || best_rate < floor)) {
            best = save();
            xi_min = xi_t;
            best_rate = rate_t;
            grads = linearized_rate_gradients(cfg, ch, P, A, id);
            if (!ul) {
                bool moved = false;
                for (int g = 0; g < cfg.J; ++g)
                    moved |= g != index && !P.P_d[g][k].isApprox(base[g], 0.0);
                if (moved) {
                    base = best;
                    mark_base();
                    sys = S.system(P, A, id);
                    budget = std::max(cap - (total_power() - X.squaredNorm()), 0.0);
                    prev.resize(0, 0);
                }
            }
        }

        if (auto beta = polyak_step(xi_t, xi_min, t, power - cap))
            lambda = std::max(0.0, lambda + *beta * (power - cap));
        if (auto eps = polyak_step(xi_t, xi_min, t, floor - rate_t))
            mu = std::max(0.0, mu + *eps * (floor - rate_t));

        // Once the multipliers have frozen the iterate no longer moves.
        if (prev.size() && (Xt - prev).norm() <= 1e-13 * (1.0 + Xt.norm())) {
            if (++stalled >= 2)
                break;
        } else {
            stalled = 0;
        }
        prev = Xt;
    }
    restore(best);
    // Dual recovery at the returned point: a slack constraint carries no
    // price into the next block updates.
    mu_slot = best_rate > floor + kSlackTolerance ? 0.0 : mu;
    lambda_slot = total_power() < cap * (1.0 - kSlackTolerance) ? 0.0 : lambda;
    return {X, xi_min, mu_slot, lambda_slot, std::min(t, t_max)};
}

bool update_code_vector(Surrogate& S, const PrecoderSet& P, CodeMatrix& A, const DualState& dual, int k)
{
    const SystemConfig& cfg = S.cfg();
    const BlockId id{BlockKind::Code, 0, k};
    SylvesterSystem sys = S.system(P, A, id);
    RateGradientSet grads = linearized_rate_gradients(cfg, S.channels(), P, A, id);
    SylvesterSystem s = sys;
    s.C = rate_rhs(sys, grads, dual, k);
    double res = 0.0;
    Mat a = solve_sylvester(s, &res);
    record_solve(S, res);

    const double xi_old = S.xi(P, A);
    CodeMatrix A2 = A;
    A2.row(k) = a.col(0).transpose();
    const double xi_new = S.xi(P, A2);
    if (xi_new <= xi_old) {
        A = A2;
        return true;
    }
    return false;
}

// ---------------------------------------------------------------- WMMSE pass

PassResult wmmse_mrmc_pass(Surrogate& S, PrecoderSet& P, CodeMatrix& A, DualState& dual, const Caps& caps)
{
    const SystemConfig& cfg = S.cfg();
    PassResult r;
    const DualState initial = initial_dual(cfg);
    r.xi_sequence.push_back(S.xi(P, A));
    auto push = [&]() {
        const double x = S.xi(P, A);
        r.max_increase = std::max(r.max_increase, x - r.xi_sequence.back());
        r.xi_sequence.push_back(x);
    };
    for (int sweep = 0; sweep < caps.iota_max; ++sweep) {
        for (int k = 0; k < cfg.K; ++k) {
            // Fixed links run no dual update; their multipliers follow
            // complementary slackness at the current point.
            if (!caps.update_ul)
                for (int i = 0; i < cfg.I; ++i)
                    dual.mu_u[i][k] = rate_ul_bits(cfg, S.channels(), P, A, i, k) > cfg.R_UL + kSlackTolerance
                                          ? 0.0
                                          : initial.mu_u[i][k];
            if (!caps.update_dl)
                for (int j = 0; j < cfg.J; ++j)
                    dual.mu_d[j][k] = rate_dl_bits(cfg, S.channels(), P, A, j, k) > cfg.R_DL + kSlackTolerance
                                          ? 0.0
                                          : initial.mu_d[j][k];
            for (int i = 0; i < cfg.I && caps.update_ul; ++i) {
                subgradient_user(S, P, A, dual, BlockKind::Uplink, i, k, caps.t_u_max);
                push();
            }
            for (int j = 0; j < cfg.J && caps.update_dl; ++j) {
                subgradient_user(S, P, A, dual, BlockKind::Downlink, j, k, caps.t_d_max);
                push();
            }
            if (caps.update_code) {
                update_code_vector(S, P, A, dual, k);
                push();
            }
        }
    }
    return r;
}

// ---------------------------------------------------------------- outer loop

Caps caps_from(const SystemConfig& cfg)
{
    Caps c;
    c.t_u_max = cfg.t_u_max;
    c.t_d_max = cfg.t_d_max;
    c.iota_max = cfg.iota_max;
    c.ell_max = cfg.ell_max;
    return c;
}

std::pair<FilterSet, WeightSet> optimal_filters_weights(const SystemConfig& cfg, const ChannelSet& ch,
                                                        const PrecoderSet& P, const CodeMatrix& A)
{
    CovarianceBundle b = build_bundle(cfg, ch, A, P);
    FilterSet U = wmmse_filters(cfg, b);
    WeightSet W = optimal_weights(mse_matrices(cfg, U, b));
    return {std::move(U), std::move(W)};
}

namespace {

double cwsm_at_optimum(const SystemConfig& cfg, const ChannelSet& ch, const PrecoderSet& P, const CodeMatrix& A)
{
    CovarianceBundle b = build_bundle(cfg, ch, A, P);
    RateSet r = achievable_rates(cfg, b);
    double c = 0.0;
    for (int n = 0; n < cfg.N_r; ++n)
        c += cfg.alpha_r[n] * r.R_r[n];
    for (int k = 0; k < cfg.K; ++k) {
        for (int i = 0; i < cfg.I; ++i)
            c += cfg.alpha_u[i] * r.R_u[i][k];
        for (int j = 0; j < cfg.J; ++j)
            c += cfg.alpha_d[j] * r.R_d[j][k];
    }
    return c;
}

} // namespace

double max_power_violation(const SystemConfig& cfg, const PrecoderSet& P)
{
    double v = 0.0;
    for (int k = 0; k < cfg.K; ++k) {
        TransmitPowers t = transmit_powers(P, k);
        v = std::max(v, (t.P_d_total - cfg.P_B) / cfg.P_B);
        for (double p : t.P_u)
            v = std::max(v, (p - cfg.P_U) / cfg.P_U);
    }
    return v;
}

double min_rate_margin(const SystemConfig& cfg, const ChannelSet& ch, const PrecoderSet& P, const CodeMatrix& A)
{
    double m = INFINITY;
    for (int k = 0; k < cfg.K; ++k) {
        for (int i = 0; i < cfg.I; ++i)
            m = std::min(m, rate_ul_bits(cfg, ch, P, A, i, k) - cfg.R_UL);
        for (int j = 0; j < cfg.J; ++j)
            m = std::min(m, rate_dl_bits(cfg, ch, P, A, j, k) - cfg.R_DL);
    }
    return m;
}

int restore_dl_qos(const SystemConfig& cfg, const ChannelSet& ch, PrecoderSet& P, const CodeMatrix& A)
{
    int changed = 0;
    for (int k = 0; k < cfg.K; ++k)
        for (int j = 0; j < cfg.J; ++j) {
            if (rate_dl_bits(cfg, ch, P, A, j, k) >= cfg.R_DL || P.P_d[j][k].squaredNorm() == 0.0)
                continue;
            std::vector<Mat> base;
            double others = 0.0;
            for (int g = 0; g < cfg.J; ++g) {
                base.push_back(P.P_d[g][k]);
                if (g != j)
                    others += P.P_d[g][k].squaredNorm();
            }
            const double own = base[j].squaredNorm();
            // Others keep c^2 of their power, user j takes the remainder.
            auto apply = [&](double c) {
                const double rest = std::max(cfg.P_B - c * c * others, own);
                for (int g = 0; g < cfg.J; ++g)
                    P.P_d[g][k] = g == j ? std::sqrt(rest / own) * base[g] : c * base[g];
            };
            auto lifted = [&](double c) {
                apply(c);
                return rate_dl_bits(cfg, ch, P, A, j, k) >= cfg.R_DL;
            };
            auto others_ok = [&]() {
                for (int g = 0; g < cfg.J; ++g)
                    if (g != j && rate_dl_bits(cfg, ch, P, A, g, k) < cfg.R_DL)
                        return false;
                return true;
            };
            if (!lifted(0.0)) {
                for (int g = 0; g < cfg.J; ++g)
                    P.P_d[g][k] = base[g];
                continue;
            }
            double lo = 0.0, hi = 1.0;
            for (int it = 0; it < 50; ++it) {
                const double mid = 0.5 * (lo + hi);
                (lifted(mid) ? lo : hi) = mid;
            }
            apply(lo);
            if (!others_ok()) {
                for (int g = 0; g < cfg.J; ++g)
                    P.P_d[g][k] = base[g];
                continue;
            }
            ++changed;
        }
    return changed;
}

BcdResult bcd_ap(const SystemConfig& cfg, const ChannelSet& ch, const PrecoderSet& P0, const CodeMatrix& A0,
                 const Caps& caps)
{
    Surrogate S(cfg, ch);
    PrecoderSet P = P0;
    CodeMatrix A = A0;
    auto [U, W] = optimal_filters_weights(cfg, ch, P, A);
    S.set_filters(U, W);

    BcdResult out;
    const double c0 = cwsm_at_optimum(cfg, ch, P, A);
    out.trace.push_back({0, c0, c0, S.xi(P, A), max_power_violation(cfg, P), min_rate_margin(cfg, ch, P, A),
                         code_feasible(cfg, A), 0.0});
    out.P = P;
    out.A = A;
    out.U = U;
    out.W = W;
    out.cwsm = c0;
    bool best_feasible = out.trace.back().min_rate_margin >= -kSlackTolerance;

    DualState dual = initial_dual(cfg);
    int calm = 0;
    for (int ell = 1; ell <= caps.ell_max; ++ell) {
        PassResult pr = wmmse_mrmc_pass(S, P, A, dual, caps);
        if (caps.update_dl)
            restore_dl_qos(cfg, ch, P, A);
        const double pre = cwsm_at_optimum(cfg, ch, P, A);
        if (caps.update_code)
            A = par_project_columns(cfg, A);
        std::tie(U, W) = optimal_filters_weights(cfg, ch, P, A);
        S.set_filters(U, W);
        const double post = cwsm_at_optimum(cfg, ch, P, A);
        out.trace.push_back({ell, post, pre, pr.xi_sequence.back(), max_power_violation(cfg, P),
                             min_rate_margin(cfg, ch, P, A), code_feasible(cfg, A), pr.max_increase});
        const bool feasible = out.trace.back().min_rate_margin >= -kSlackTolerance;
        if ((feasible && !best_feasible) || (feasible == best_feasible && post > out.cwsm)) {
            best_feasible = feasible;
            out.cwsm = post;
            out.P = P;
            out.A = A;
            out.U = U;
            out.W = W;
        }
        const double prev = out.trace[out.trace.size() - 2].cwsm_nats;
        if (caps.conv_tol > 0.0 && std::abs(post - prev) < caps.conv_tol * std::abs(prev)) {
            if (++calm >= caps.conv_window) {
                out.converged = true;
                break;
            }
        } else {
            calm = 0;
        }
    }
    out.stats = S.stats;
    return out;
}

// ---------------------------------------------------------------- init

PrecoderSet init_precoders(const SystemConfig& cfg, const ChannelSet& ch, InitMode mode, std::uint64_t seed)
{
    PrecoderSet P = zero_precoders(cfg);
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
    auto random_basis = [&](int rows, int cols) {
        Mat X(rows, cols);
        for (int c = 0; c < cols; ++c)
            for (int r = 0; r < rows; ++r)
                X(r, c) = cd(nd(gen), nd(gen));
        Eigen::JacobiSVD<Mat> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
        return Mat(svd.matrixU() * svd.matrixV().adjoint());
    };
    auto right_singular = [](const Mat& H, int cols) {
        Eigen::JacobiSVD<Mat> svd(H, Eigen::ComputeFullV);
        return Mat(svd.matrixV().leftCols(cols));
    };
    for (int j = 0; j < cfg.J; ++j) {
        const double s = std::sqrt(cfg.P_B / (cfg.J * cfg.Dd[j]));
        Mat V = right_singular(ch.H_Bj[j], cfg.Dd[j]);
        for (int k = 0; k < cfg.K; ++k)
            P.P_d[j][k] = s * (mode == InitMode::Deterministic ? V : random_basis(cfg.M_c, cfg.Dd[j]));
    }
    for (int i = 0; i < cfg.I; ++i) {
        const double s = std::sqrt(cfg.P_U / cfg.Du[i]);
        Mat V = right_singular(ch.H_iB[i], cfg.Du[i]);
        for (int k = 0; k < cfg.K; ++k)
            P.P_u[i][k] = s * (mode == InitMode::Deterministic ? V : random_basis(cfg.Nu[i], cfg.Du[i]));
    }
    return P;
}

} // namespace mrmc
