#pragma once

#include "mrmc/linalg.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mrmc {

struct SystemConfig {
    int M_r = 4;
    int N_r = 4;
    int M_c = 4;
    int N_c = 4;
    int I = 2;
    int J = 2;
    std::vector<int> Nu{2, 2};
    std::vector<int> Nd{2, 2};
    std::vector<int> Du{2, 2};
    std::vector<int> Dd{2, 2};
    int K = 8;
    int N = 32;
    int n_t = 4;
    int n_rB = 2;
    int n_rd = 3;
    // Arrival offsets of the DL direct path and of the UL signals at the
    // radar receivers; the CUT sees DL symbol n_t-n_Bm and UL symbol n_t-n_u.
    int n_Bm = 1;
    int n_u = 2;

    double P_B = 0.01;
    double P_U = 0.01;
    std::vector<double> P_r{0.001, 0.001, 0.001, 0.001};
    std::vector<double> gamma{1.9952623149688795, 1.9952623149688795, 1.9952623149688795,
                              1.9952623149688795};
    double sigma2_r = 0.001;
    double sigma2_B = 0.001;
    double sigma2_d = 0.001;
    double CNR = 100.0;
    double R_UL = 0.0;
    double R_DL = 0.0;
    std::vector<double> alpha_r{0.125, 0.125, 0.125, 0.125};
    std::vector<double> alpha_u{0.125, 0.125};
    std::vector<double> alpha_d{0.125, 0.125};

    int t_u_max = 50;
    int t_d_max = 50;
    int iota_max = 1;
    int ell_max = 200;
    std::uint64_t rng_seed = 1;

    bool cooperation = true;

    // Second-order statistics of the target and direct paths.
    double eta2_rt = 1.0;
    double eta2_Bt = 1.0;
    double eta2_Bm = 1.0;
    double eta2_ur = 1.0;
    double doppler_min = 0.05;
    double doppler_max = 0.325;

    // Rician radar-to-communications links and self-interference.
    double kappa = 1.0;
    double mu_rB = 0.1;
    double mu_rj = 0.05;
    double eta2_rB = 0.3;
    double eta2_rj = 0.5;
    double K_B = 1.0;
    double eta2_ij = 1.0;
};

// Default scenario at the given radar, uplink and downlink SNRs (dB).
// QoS floors are filled from qos_floors().
SystemConfig default_config(double snr_r_db = 0.0, double snr_ul_db = 10.0, double snr_dl_db = 10.0);

// Dimension of the reduced target coordinate: one reflectivity per radar
// transmitter plus the DL reflection when cooperation is on.
inline int target_rank(const SystemConfig& cfg)
{
    return cfg.M_r + (cfg.cooperation ? 1 : 0);
}

std::vector<std::string> validate_config(const SystemConfig& cfg);

struct ChannelSet {
    std::vector<Mat> H_iB;               // [i] N_c x Nu_i
    std::vector<Mat> H_Bj;               // [j] Nd_j x M_c
    Mat H_BB;                            // N_c x M_c
    std::vector<std::vector<Mat>> H_ij;  // [i][j] Nd_j x Nu_i
    Mat H_rB;                            // N_c x M_r
    std::vector<Mat> H_rj;               // [j] Nd_j x M_r

    RMat eta2_rt;   // M_r x N_r
    RMat f_rt;      // M_r x N_r
    RVec eta2_Bt;   // N_r
    RVec f_Bt;      // N_r
    RVec theta_Bt;  // N_r, radians
    RVec eta2_Bm;   // N_r
    RVec f_Bm;      // N_r
    RMat eta2_ur;   // I x N_r
    RMat f_ur;      // I x N_r
    std::vector<Mat> Sigma_c;  // [n_r] M_r x M_r

    std::vector<std::vector<std::vector<Vec>>> d_u;  // [i][k][l]
    std::vector<std::vector<std::vector<Vec>>> d_d;  // [j][k][l]
};

ChannelSet generate_channels(const SystemConfig& cfg, std::uint64_t seed);

// Half-wavelength uniform linear array response.
Vec steering_vector(int n, double theta);

double doppler_from_geometry(double v_x, double v_y, double theta_tx, double phi_rx, double lambda);

struct QosFloors {
    double R_UL;
    double R_DL;
};

// Rate floors in bits/s/Hz from linear SNRs.
QosFloors qos_floors(const SystemConfig& cfg, double snr_r, double snr_ul, double snr_dl);

// Second-order blocks Sigma^{(m,l)} in the trace convention
// R(m,l) = tr{ s[m] s[l]^H Sigma^{(m,l)} }.
Mat sigma_rt(const SystemConfig& cfg, const ChannelSet& ch, int n_r, int m, int l);
Mat sigma_Bt(const SystemConfig& cfg, const ChannelSet& ch, int n_r, int m, int l);
Mat sigma_Bm(const SystemConfig& cfg, const ChannelSet& ch, int n_r, int m, int l);
Mat sigma_ur(const SystemConfig& cfg, const ChannelSet& ch, int i, int n_r, int m, int l);

inline double db_to_lin(double db) { return std::pow(10.0, db / 10.0); }
inline double lin_to_db(double x) { return 10.0 * std::log10(x); }

} // namespace mrmc
