#include "mrmc/signal_model.hpp"

#include <cmath>
#include <numbers>

namespace mrmc {

namespace {

cd phase(double f, int k)
{
    return std::polar(1.0, 2.0 * std::numbers::pi * f * k);
}

} // namespace

PrecoderSet zero_precoders(const SystemConfig& cfg)
{
    PrecoderSet P;
    P.P_u.resize(cfg.I);
    P.P_d.resize(cfg.J);
    for (int i = 0; i < cfg.I; ++i)
        P.P_u[i].assign(cfg.K, Mat::Zero(cfg.Nu[i], cfg.Du[i]));
    for (int j = 0; j < cfg.J; ++j)
        P.P_d[j].assign(cfg.K, Mat::Zero(cfg.M_c, cfg.Dd[j]));
    return P;
}

bool code_feasible(const SystemConfig& cfg, const CodeMatrix& A, double tol)
{
    if (A.rows() != cfg.K || A.cols() != cfg.M_r)
        return false;
    for (int m = 0; m < cfg.M_r; ++m) {
        const double p = cfg.P_r[m];
        const double e = A.col(m).squaredNorm();
        if (std::abs(e - p) > tol * p)
            return false;
        const double peak = A.col(m).cwiseAbs2().maxCoeff();
        if (cfg.K * peak / p > cfg.gamma[m] + tol)
            return false;
    }
    return true;
}

Vec dl_symbol(const SystemConfig& cfg, const ChannelSet& ch, const PrecoderSet& P, int k, int l)
{
    Vec s = Vec::Zero(cfg.M_c);
    for (int j = 0; j < cfg.J; ++j)
        s += P.P_d[j][k] * ch.d_d[j][k][l];
    return s;
}

Vec ul_symbol(const ChannelSet& ch, const PrecoderSet& P, int i, int k, int l)
{
    return P.P_u[i][k] * ch.d_u[i][k][l];
}

RadarStatics radar_statics(const SystemConfig& cfg, const ChannelSet& ch)
{
    RadarStatics rs;
    for (int n = 0; n < cfg.N_r; ++n) {
        Mat Phi(cfg.K, cfg.M_r);
        Vec psi(cfg.K), dBm(cfg.K);
        Mat dur(cfg.K, cfg.I);
        for (int k = 0; k < cfg.K; ++k) {
            for (int m = 0; m < cfg.M_r; ++m)
                Phi(k, m) = std::sqrt(ch.eta2_rt(m, n)) * phase(ch.f_rt(m, n), k);
            psi(k) = std::sqrt(ch.eta2_Bt(n)) * phase(ch.f_Bt(n), k);
            dBm(k) = std::sqrt(ch.eta2_Bm(n)) * phase(ch.f_Bm(n), k);
            for (int i = 0; i < cfg.I; ++i)
                dur(k, i) = std::sqrt(ch.eta2_ur(i, n)) * phase(ch.f_ur(i, n), k);
        }
        rs.Phi.push_back(Phi);
        rs.psi.push_back(psi);
        rs.aT.push_back(steering_vector(cfg.M_c, ch.theta_Bt(n)));
        rs.dBm.push_back(dBm);
        rs.dur.push_back(dur);
    }
    return rs;
}

TargetCov build_target_cov(const SystemConfig& cfg, const ChannelSet& ch, const CodeMatrix& A,
                           const PrecoderSet& P, int n_r)
{
    const int K = cfg.K, Mr = cfg.M_r, M = cfg.M_r + cfg.M_c;
    std::vector<Vec> sBt(K);
    for (int k = 0; k < K; ++k)
        sBt[k] = dl_symbol(cfg, ch, P, k, 0);

    TargetCov out;
    out.R_t = Mat::Zero(K, K);
    out.S_t = Mat::Zero(K, K * M);
    out.Sigma_t = Mat::Zero(K * M, K * M);
    for (int k = 0; k < K; ++k) {
        out.S_t.block(k, k * M, 1, Mr) = A.row(k);
        out.S_t.block(k, k * M + Mr, 1, cfg.M_c) = sBt[k].transpose();
    }
    for (int m = 0; m < K; ++m) {
        for (int l = 0; l < K; ++l) {
            Mat Srt = sigma_rt(cfg, ch, n_r, m, l);
            Vec am = A.row(m).transpose(), al = A.row(l).transpose();
            cd v = (am * al.adjoint() * Srt).trace();
            out.Sigma_t.block(m * M, l * M, Mr, Mr) = Srt.transpose();
            if (cfg.cooperation) {
                Mat SBt = sigma_Bt(cfg, ch, n_r, m, l);
                v += (sBt[m] * sBt[l].adjoint() * SBt).trace();
                out.Sigma_t.block(m * M + Mr, l * M + Mr, cfg.M_c, cfg.M_c) = SBt.transpose();
            }
            out.R_t(m, l) = v;
        }
    }
    out.R_t = herm(out.R_t);
    return out;
}

Mat target_factor(const SystemConfig& cfg, const ChannelSet& ch, const RadarStatics& rs, const CodeMatrix& A,
                  const PrecoderSet& P, int n_r)
{
    const int r = target_rank(cfg);
    Mat St(cfg.K, r);
    St.leftCols(cfg.M_r) = A.cwiseProduct(rs.Phi[n_r]);
    if (cfg.cooperation) {
        for (int k = 0; k < cfg.K; ++k)
            St(k, cfg.M_r) = rs.psi[n_r](k) * rs.aT[n_r].dot(dl_symbol(cfg, ch, P, k, 0));
    }
    return St;
}

Mat target_lift(const SystemConfig& cfg, const RadarStatics& rs, int n_r)
{
    const int M = cfg.M_r + cfg.M_c, r = target_rank(cfg);
    Mat L = Mat::Zero(cfg.K * M, r);
    for (int k = 0; k < cfg.K; ++k) {
        for (int m = 0; m < cfg.M_r; ++m)
            L(k * M + m, m) = rs.Phi[n_r](k, m);
        if (cfg.cooperation)
            L.block(k * M + cfg.M_r, cfg.M_r, cfg.M_c, 1) = rs.psi[n_r](k) * rs.aT[n_r].conjugate();
    }
    return L;
}

Mat build_clutter_cov(const CodeMatrix& A, const Mat& Sigma_c)
{
    return herm(A * Sigma_c * A.adjoint());
}

Mat build_radar_interference_cov(const SystemConfig& cfg, const ChannelSet& ch, const RadarStatics& rs,
                                 const CodeMatrix& A, const PrecoderSet& P, int n_r)
{
    const int K = cfg.K;
    Mat R = A * ch.Sigma_c[n_r] * A.adjoint();

    const int lBm = cfg.n_t - cfg.n_Bm;
    Mat Z(K, cfg.M_c);
    for (int k = 0; k < K; ++k)
        Z.row(k) = rs.dBm[n_r](k) * dl_symbol(cfg, ch, P, k, lBm).transpose();
    R += Z * Z.adjoint();

    const int lu = cfg.n_t - cfg.n_u;
    for (int i = 0; i < cfg.I; ++i) {
        Mat Zi(K, cfg.Nu[i]);
        for (int k = 0; k < K; ++k)
            Zi.row(k) = rs.dur[n_r](k, i) * ul_symbol(ch, P, i, k, lu).transpose();
        R += Zi * Zi.adjoint();
    }

    if (!cfg.cooperation) {
        Vec z(K);
        for (int k = 0; k < K; ++k)
            z(k) = rs.psi[n_r](k) * rs.aT[n_r].dot(dl_symbol(cfg, ch, P, k, 0));
        R += z * z.adjoint();
    }
    R += cfg.sigma2_r * Mat::Identity(K, K);
    return herm(R);
}

Mat bs_receive_cov(const SystemConfig& cfg, const ChannelSet& ch, const CodeMatrix& A, const PrecoderSet& P,
                   int k)
{
    Mat R = cfg.sigma2_B * Mat::Identity(cfg.N_c, cfg.N_c);
    for (int i = 0; i < cfg.I; ++i) {
        Mat G = ch.H_iB[i] * P.P_u[i][k];
        R += G * G.adjoint();
    }
    for (int j = 0; j < cfg.J; ++j) {
        Mat G = ch.H_BB * P.P_d[j][k];
        R += G * G.adjoint();
    }
    Vec g = ch.H_rB * A.row(k).transpose();
    R += g * g.adjoint();
    return herm(R);
}

Mat ue_receive_cov(const SystemConfig& cfg, const ChannelSet& ch, const CodeMatrix& A, const PrecoderSet& P,
                   int j, int k)
{
    Mat R = cfg.sigma2_d * Mat::Identity(cfg.Nd[j], cfg.Nd[j]);
    for (int g = 0; g < cfg.J; ++g) {
        Mat G = ch.H_Bj[j] * P.P_d[g][k];
        R += G * G.adjoint();
    }
    for (int i = 0; i < cfg.I; ++i) {
        Mat G = ch.H_ij[i][j] * P.P_u[i][k];
        R += G * G.adjoint();
    }
    Vec g = ch.H_rj[j] * A.row(k).transpose();
    R += g * g.adjoint();
    return herm(R);
}

UplinkCov build_uplink_cov(const SystemConfig& cfg, const ChannelSet& ch, const CodeMatrix& A,
                           const PrecoderSet& P, int i, int k)
{
    UplinkCov c;
    c.R_u = bs_receive_cov(cfg, ch, A, P, k);
    c.Hs = ch.H_iB[i] * P.P_u[i][k];
    c.R_iB = herm(c.Hs * c.Hs.adjoint());
    c.R_in = herm(c.R_u - c.R_iB);
    return c;
}

DownlinkCov build_downlink_cov(const SystemConfig& cfg, const ChannelSet& ch, const CodeMatrix& A,
                               const PrecoderSet& P, int j, int k)
{
    DownlinkCov c;
    c.R_d = ue_receive_cov(cfg, ch, A, P, j, k);
    c.Hs = ch.H_Bj[j] * P.P_d[j][k];
    c.R_DL = herm(c.Hs * c.Hs.adjoint());
    c.R_in = herm(c.R_d - c.R_DL);
    return c;
}

TransmitPowers transmit_powers(const PrecoderSet& P, int k)
{
    TransmitPowers t{0.0, {}};
    for (const auto& pj : P.P_d)
        t.P_d_total += pj[k].squaredNorm();
    for (const auto& pi : P.P_u)
        t.P_u.push_back(pi[k].squaredNorm());
    return t;
}

CovarianceBundle build_bundle(const SystemConfig& cfg, const ChannelSet& ch, const CodeMatrix& A,
                              const PrecoderSet& P)
{
    CovarianceBundle b;
    RadarStatics rs = radar_statics(cfg, ch);
    for (int n = 0; n < cfg.N_r; ++n) {
        RadarCov rc;
        rc.St = target_factor(cfg, ch, rs, A, P, n);
        rc.R_t = herm(rc.St * rc.St.adjoint());
        rc.R_in = build_radar_interference_cov(cfg, ch, rs, A, P, n);
        b.radar.push_back(std::move(rc));
    }
    b.ul.resize(cfg.I);
    b.dl.resize(cfg.J);
    for (int k = 0; k < cfg.K; ++k) {
        Mat Rbs = bs_receive_cov(cfg, ch, A, P, k);
        for (int i = 0; i < cfg.I; ++i) {
            UplinkCov c;
            c.R_u = Rbs;
            c.Hs = ch.H_iB[i] * P.P_u[i][k];
            c.R_iB = herm(c.Hs * c.Hs.adjoint());
            c.R_in = herm(c.R_u - c.R_iB);
            b.ul[i].push_back(std::move(c));
        }
        for (int j = 0; j < cfg.J; ++j)
            b.dl[j].push_back(build_downlink_cov(cfg, ch, A, P, j, k));
    }
    return b;
}

} // namespace mrmc
