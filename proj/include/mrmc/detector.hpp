#pragma once

#include "mrmc/signal_model.hpp"

#include <cstdint>

namespace mrmc {

// Whitened target covariance per radar receiver and its eigenbasis.
struct DetectionInstance {
    std::vector<Mat> G;      // [n_r] R_in^{-1/2} R_t R_in^{-1/2}
    std::vector<RVec> delta; // [n_r] eigenvalues, descending
    std::vector<Mat> V;      // [n_r] eigenvectors, columns match delta
};

DetectionInstance whitened_instance(const std::vector<Mat>& R_t, const std::vector<Mat>& R_in);

// Instance of a design: target and interference covariances at every
// radar receiver. Cooperation off keeps the DL reflection in R_in.
DetectionInstance design_instance(const SystemConfig& cfg, const ChannelSet& ch, const PrecoderSet& P,
                                  const CodeMatrix& A);

// T = sum_n sum_k delta |y_hat|^2 / (1 + delta), y_hat = V^H y_bar.
double test_statistic(const std::vector<Vec>& y_hat, const DetectionInstance& inst);

// y_bar^H (I - (G + I)^{-1}) y_bar summed over receivers.
double test_statistic_whitened(const std::vector<Vec>& y_bar, const DetectionInstance& inst);

struct RocCurve {
    std::vector<double> nu;
    std::vector<double> pfa;
    std::vector<double> pd;
    long n_trials = 0;
    std::uint64_t seed = 0;
};

inline constexpr long kTrialBlock = 4096;
inline constexpr int kThresholdCount = 200;

// Monte Carlo ROC in the eigenbasis. Trials are drawn in fixed blocks,
// each from its own (seed, block) substream, so the result does not depend
// on the worker count. An empty grid selects kThresholdCount log-spaced
// thresholds between the 0.001 and 0.999 quantiles of T under H0. Zero
// workers means one per hardware thread.
RocCurve simulate_roc(const DetectionInstance& inst, long n_trials, std::uint64_t seed,
                      std::vector<double> nu_grid = {}, unsigned workers = 0);

// P_d at the given false-alarm rate, interpolated in log P_fa.
double pd_at_pfa(const RocCurve& roc, double pfa);

enum class CodeKind { Uncoded, Random };

CodeMatrix baseline_code(const SystemConfig& cfg, CodeKind kind, std::uint64_t seed);

} // namespace mrmc
