#pragma once

#include "mrmc/scenario.hpp"

namespace mrmc {

// Radar code matrix: K x M_r, row k is a[k]^T, column m is the slow-time
// code of transmitter m.
using CodeMatrix = Mat;

struct PrecoderSet {
    MatGrid P_u;  // [i][k] Nu_i x Du_i
    MatGrid P_d;  // [j][k] M_c x Dd_j
};

PrecoderSet zero_precoders(const SystemConfig& cfg);

bool code_feasible(const SystemConfig& cfg, const CodeMatrix& A, double tol = 1e-10);

// Frame-k DL transmit vector for symbol l and the UL transmit vector of
// user i.
Vec dl_symbol(const SystemConfig& cfg, const ChannelSet& ch, const PrecoderSet& P, int k, int l);
Vec ul_symbol(const ChannelSet& ch, const PrecoderSet& P, int i, int k, int l);

// Per-receiver constants of the radar model: Doppler-phased amplitudes
// of the target paths and of the direct paths.
struct RadarStatics {
    std::vector<Mat> Phi;  // [n_r] K x M_r
    std::vector<Vec> psi;  // [n_r] K
    std::vector<Vec> aT;   // [n_r] M_c
    std::vector<Vec> dBm;  // [n_r] K
    std::vector<Mat> dur;  // [n_r] K x I
};

RadarStatics radar_statics(const SystemConfig& cfg, const ChannelSet& ch);

struct TargetCov {
    Mat R_t;      // K x K
    Mat S_t;      // K x KM, block-diagonal stacked transmit operator
    Mat Sigma_t;  // KM x KM
};

// R_t from the element formula, together with its S_t Sigma_t S_t^H factors.
TargetCov build_target_cov(const SystemConfig& cfg, const ChannelSet& ch, const CodeMatrix& A,
                           const PrecoderSet& P, int n_r);

// Low-rank target factor: R_t = St St^H with St = S_t L (K x r).
Mat target_factor(const SystemConfig& cfg, const ChannelSet& ch, const RadarStatics& rs, const CodeMatrix& A,
                  const PrecoderSet& P, int n_r);

// Sigma_t = L L^H (KM x r).
Mat target_lift(const SystemConfig& cfg, const RadarStatics& rs, int n_r);

Mat build_clutter_cov(const CodeMatrix& A, const Mat& Sigma_c);

Mat build_radar_interference_cov(const SystemConfig& cfg, const ChannelSet& ch, const RadarStatics& rs,
                                 const CodeMatrix& A, const PrecoderSet& P, int n_r);

struct UplinkCov {
    Mat R_u;   // total BS receive covariance
    Mat R_in;  // interference plus noise for user i
    Mat R_iB;  // user i signal
    Mat Hs;    // H_iB P_u
};

struct DownlinkCov {
    Mat R_d;
    Mat R_in;
    Mat R_DL;
    Mat Hs;  // H_Bj P_d
};

// Total receive covariances at the BS and at DL user j in frame k.
Mat bs_receive_cov(const SystemConfig& cfg, const ChannelSet& ch, const CodeMatrix& A, const PrecoderSet& P,
                   int k);
Mat ue_receive_cov(const SystemConfig& cfg, const ChannelSet& ch, const CodeMatrix& A, const PrecoderSet& P,
                   int j, int k);

UplinkCov build_uplink_cov(const SystemConfig& cfg, const ChannelSet& ch, const CodeMatrix& A,
                           const PrecoderSet& P, int i, int k);
DownlinkCov build_downlink_cov(const SystemConfig& cfg, const ChannelSet& ch, const CodeMatrix& A,
                               const PrecoderSet& P, int j, int k);

struct TransmitPowers {
    double P_d_total;
    std::vector<double> P_u;
};

TransmitPowers transmit_powers(const PrecoderSet& P, int k);

struct RadarCov {
    Mat St;    // K x r
    Mat R_t;   // K x K
    Mat R_in;  // K x K
};

struct CovarianceBundle {
    std::vector<RadarCov> radar;        // [n_r]
    std::vector<std::vector<UplinkCov>> ul;    // [i][k]
    std::vector<std::vector<DownlinkCov>> dl;  // [j][k]
};

CovarianceBundle build_bundle(const SystemConfig& cfg, const ChannelSet& ch, const CodeMatrix& A,
                              const PrecoderSet& P);

} // namespace mrmc
