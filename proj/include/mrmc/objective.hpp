#pragma once

#include "mrmc/signal_model.hpp"

namespace mrmc {

// Radar filters live in the reduced target coordinate (r x K); the
// KM x K filter of the stacked model is target_lift(...) * U_r.
struct FilterSet {
    std::vector<Mat> U_r;  // [n_r] r x K
    MatGrid U_u;           // [i][k] Du_i x N_c
    MatGrid U_d;           // [j][k] Dd_j x Nd_j
};

struct WeightSet {
    std::vector<Mat> W_r;  // [n_r] r x r
    MatGrid W_u;           // [i][k]
    MatGrid W_d;           // [j][k]
};

struct MseSet {
    std::vector<Mat> E_r;
    MatGrid E_u;
    MatGrid E_d;
};

// Mutual information (nats) of y_sig + y_in seen through the filter U:
// log|U R_sig U^H + U R_in U^H| - log|U R_in U^H|, evaluated on the row
// space of U so that rank-deficient filters stay well defined.
double filtered_mi(const Mat& U, const Mat& R_sig, const Mat& R_in);

double radar_mi(const Mat& U_r, const Mat& R_t, const Mat& R_in);
double comm_mi(const Mat& U, const Mat& R_signal, const Mat& R_in);

// Unfiltered MI log|I + R_sig R_in^{-1}|.
double log_det_snr(const Mat& R_sig, const Mat& R_in);

struct CwsmTerms {
    double total = 0.0;
    double radar = 0.0;  // weighted
    double ul = 0.0;
    double dl = 0.0;
};

CwsmTerms cwsm(const SystemConfig& cfg, const FilterSet& U, const CovarianceBundle& b);

// Reduced-coordinate radar MSE: I - U St - St^H U^H + U R_r U^H.
Mat radar_mse(const Mat& U, const Mat& St, const Mat& R_r);

// Stacked-coordinate radar MSE: Sigma_t - U S_t Sigma_t - Sigma_t^H S_t^H U^H + U R_r U^H.
Mat radar_mse_full(const Mat& U, const Mat& S_t, const Mat& Sigma_t, const Mat& R_r);

// I - U Hs - Hs^H U^H + U R U^H with R the total receive covariance.
Mat comm_mse(const Mat& U, const Mat& Hs, const Mat& R);

MseSet mse_matrices(const SystemConfig& cfg, const FilterSet& U, const CovarianceBundle& b);

FilterSet wmmse_filters(const SystemConfig& cfg, const CovarianceBundle& b);

Mat optimal_weight(const Mat& E);
WeightSet optimal_weights(const MseSet& E);

struct RateSet {
    std::vector<double> R_r;  // nats
    std::vector<std::vector<double>> R_u;
    std::vector<std::vector<double>> R_d;
};

RateSet achievable_rates(const SystemConfig& cfg, const CovarianceBundle& b);

// Same rates through the log|E*^{-1}| form.
RateSet achievable_rates_mmse(const SystemConfig& cfg, const CovarianceBundle& b);

struct XiTerms {
    double total = 0.0;
    double ul = 0.0;
    double dl = 0.0;
    double radar = 0.0;
};

XiTerms weighted_sum_mse(const SystemConfig& cfg, const FilterSet& U, const WeightSet& W,
                         const CovarianceBundle& b);

// Xi minus the log|W| and dimension corrections; equals -CWSM at (U*, W*).
double xi_prime(const SystemConfig& cfg, const FilterSet& U, const WeightSet& W, const CovarianceBundle& b);

} // namespace mrmc
