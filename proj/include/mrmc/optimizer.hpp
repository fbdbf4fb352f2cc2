#pragma once

#include "mrmc/objective.hpp"

#include <optional>

namespace mrmc {

// A X + sum_t F_t X B_t = C.
struct SylvesterSystem {
    Mat A;
    std::vector<Mat> F;
    std::vector<Mat> B;
    Mat C;
};

// I (x) A + sum_t B_t^T (x) F_t.
Mat sylvester_kron(const SylvesterSystem& s);

// Normwise backward error ||A X + sum F X B - C|| / (||M|| ||X|| + ||C||).
double sylvester_residual(const SylvesterSystem& s, const Mat& X);

inline constexpr double kSylvesterTolerance = 1e-8;

// Solves through the vectorized Kronecker system. Throws if the in-line
// residual check fails.
Mat solve_sylvester(const SylvesterSystem& s, double* residual = nullptr);

// Nearest vector with squared norm P and peak power gamma*P/K.
Vec par_project(const Vec& z, double P, double gamma);

CodeMatrix par_project_columns(const SystemConfig& cfg, const CodeMatrix& A);

struct DualState {
    std::vector<std::vector<double>> lambda_u;  // [i][k]
    std::vector<double> lambda_d;               // [k]
    std::vector<std::vector<double>> mu_u;      // [i][k]
    std::vector<std::vector<double>> mu_d;      // [j][k]
};

DualState initial_dual(const SystemConfig& cfg);

// (xi_t - xi_min + 0.1^t) / violation^2; nullopt when the violation is
// numerically zero.
std::optional<double> polyak_step(double xi_t, double xi_min, int t, double violation);

enum class BlockKind { Uplink, Downlink, Code };

struct BlockId {
    BlockKind kind;
    int index;  // user index; unused for Code
    int k;
};

// Gradients (bits, conjugate convention) of every frame-k rate with
// respect to one block, evaluated at (P, A).
struct RateGradientSet {
    std::vector<Mat> d_ul;  // [i]
    std::vector<Mat> d_dl;  // [j]
};

RateGradientSet linearized_rate_gradients(const SystemConfig& cfg, const ChannelSet& ch, const PrecoderSet& P,
                                          const CodeMatrix& A, const BlockId& target);

double rate_ul_bits(const SystemConfig& cfg, const ChannelSet& ch, const PrecoderSet& P, const CodeMatrix& A,
                    int i, int k);
double rate_dl_bits(const SystemConfig& cfg, const ChannelSet& ch, const PrecoderSet& P, const CodeMatrix& A,
                    int j, int k);

struct SolverStats {
    long sylvester_solves = 0;
    double max_sylvester_residual = 0.0;
    long xi_evaluations = 0;
};

// Weighted-sum-MSE surrogate for fixed filters and weights. All
// gradients follow the convention dXi/dX^*.
class Surrogate {
public:
    Surrogate(const SystemConfig& cfg, const ChannelSet& ch);

    void set_filters(const FilterSet& U, const WeightSet& W);

    double xi(const PrecoderSet& P, const CodeMatrix& A) const;
    double xi_radar(const PrecoderSet& P, const CodeMatrix& A) const;
    double xi_comm_frame(const PrecoderSet& P, const CodeMatrix& A, int k) const;

    Mat grad_P_u(const PrecoderSet& P, const CodeMatrix& A, int i, int k) const;
    Mat grad_P_d(const PrecoderSet& P, const CodeMatrix& A, int j, int k) const;
    Vec grad_a(const PrecoderSet& P, const CodeMatrix& A, int k) const;
    Mat gradient(const PrecoderSet& P, const CodeMatrix& A, const BlockId& b) const;

    // Stationarity system of the block with multipliers zero; C holds
    // every term that does not depend on the block itself.
    SylvesterSystem system(const PrecoderSet& P, const CodeMatrix& A, const BlockId& b) const;

    const SystemConfig& cfg() const { return cfg_; }
    const ChannelSet& channels() const { return ch_; }

    mutable SolverStats stats;

private:
    struct RadarParts {
        Mat St;   // K x r
        Mat Zbm;  // K x M_c, Doppler scaled
        std::vector<Mat> Zu;  // [i] K x Nu
        Vec zBt;  // K, only without cooperation
    };
    RadarParts radar_parts(const PrecoderSet& P, const CodeMatrix& A, int n) const;

    const SystemConfig& cfg_;
    const ChannelSet& ch_;
    RadarStatics rs_;

    std::vector<Mat> Omega_;  // [n_r] alpha U^H W U
    std::vector<Mat> UW_;     // [n_r] alpha U^H W
    std::vector<double> trW_r_;
    std::vector<Mat> xi_ul_;  // [k]
    MatGrid xi_d_;            // [j][k]
    MatGrid UW_u_;            // [i][k]
    MatGrid UW_d_;            // [j][k]
    std::vector<double> trW_c_;  // [k]
};

struct Caps {
    int t_u_max = 50;
    int t_d_max = 50;
    int iota_max = 1;
    int ell_max = 200;
    double conv_tol = 1e-6;  // <= 0 disables early stopping
    int conv_window = 5;
    // Blocks held fixed at their initial values when false.
    bool update_ul = true;
    bool update_dl = true;
    bool update_code = true;
};

Caps caps_from(const SystemConfig& cfg);

// Margin below which a constraint counts as active when multipliers are
// recovered from the returned point.
inline constexpr double kSlackTolerance = 1e-6;

struct SubgradientResult {
    Mat P_best;
    double xi_best;
    double mu;      // recovered multipliers written to the dual state
    double lambda;
    int iterations;
};

// Projected subgradient run for one UL or DL user in frame k. Updates
// P in place with the best iterate and writes the best multipliers to
// the dual state.
SubgradientResult subgradient_user(Surrogate& S, PrecoderSet& P, const CodeMatrix& A, DualState& dual,
                                   BlockKind kind, int index, int k, int t_max);

// Minimizer of the Lagrangian over a[k]; accepted only if Xi does not
// increase. Returns true when accepted.
bool update_code_vector(Surrogate& S, const PrecoderSet& P, CodeMatrix& A, const DualState& dual, int k);

struct PassResult {
    std::vector<double> xi_sequence;  // after every block update
    double max_increase = 0.0;
};

PassResult wmmse_mrmc_pass(Surrogate& S, PrecoderSet& P, CodeMatrix& A, DualState& dual, const Caps& caps);

struct TraceRecord {
    int ell;
    double cwsm_nats;
    double cwsm_pre_projection;
    double xi_wmmse;
    double max_power_violation;
    double min_rate_margin;
    bool par_feasible;
    double pass_max_increase;
};

struct BcdResult {
    PrecoderSet P;
    CodeMatrix A;
    FilterSet U;
    WeightSet W;
    double cwsm = 0.0;
    bool converged = false;
    std::vector<TraceRecord> trace;
    SolverStats stats;
};

BcdResult bcd_ap(const SystemConfig& cfg, const ChannelSet& ch, const PrecoderSet& P0, const CodeMatrix& A0,
                 const Caps& caps);

enum class InitMode { Deterministic, Random };

PrecoderSet init_precoders(const SystemConfig& cfg, const ChannelSet& ch, InitMode mode, std::uint64_t seed);

// Moves DL power inside a frame toward users below the DL floor: the other
// users are scaled down by the largest factor that still lifts the starved
// user onto its floor. Returns the number of frames changed.
int restore_dl_qos(const SystemConfig& cfg, const ChannelSet& ch, PrecoderSet& P, const CodeMatrix& A);

// Feasibility audits used by traces.
double max_power_violation(const SystemConfig& cfg, const PrecoderSet& P);
double min_rate_margin(const SystemConfig& cfg, const ChannelSet& ch, const PrecoderSet& P, const CodeMatrix& A);

// Filters and weights at their closed-form optima for (P, A).
std::pair<FilterSet, WeightSet> optimal_filters_weights(const SystemConfig& cfg, const ChannelSet& ch,
                                                        const PrecoderSet& P, const CodeMatrix& A);

} // namespace mrmc
