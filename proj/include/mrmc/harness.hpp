#pragma once

#include "mrmc/detector.hpp"
#include "mrmc/optimizer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mrmc {

enum class Mode { Converge, Roc, Sweep };
enum class SweepAxis { SNR_r, SNR_UL, CNR };
enum class Method { Proposed, Uncoded, Random, UniformUl, BdDl, NspDl };

std::string to_string(Mode m);
std::string to_string(SweepAxis a);
std::string to_string(Method m);
Mode parse_mode(const std::string& s);
SweepAxis parse_axis(const std::string& s);
Method parse_method(const std::string& s);

// Interference couplings as SNR ratios. A sweep applies the pair that
// belongs to its axis; converge and roc runs keep the Rician statistics
// of the scenario.
struct Coupling {
    bool enabled = true;
    double r_over_rB = 0.8;    // SNR_r = 0.8 SNR_rB   (SNR_r axis)
    double r_over_rd = 0.6;    // SNR_r = 0.6 SNR_rd   (SNR_r axis)
    double ur_over_u = 0.7;    // SNR_ur = 0.7 SNR_u   (SNR_UL axis)
    double ud_over_u = 0.8;    // SNR_ud = 0.8 SNR_u   (SNR_UL axis)
    double rB_over_cnr = 0.5;  // SNR_rB = 0.5 CNR     (CNR axis)
    double rd_over_cnr = 0.5;  // SNR_rd = 0.5 CNR     (CNR axis)
};

// Operating point in linear units.
struct SnrPoint {
    double snr_r = 1.0;
    double snr_ul = 10.0;
    double snr_dl = 10.0;
    double cnr = 100.0;
};

struct ExperimentSpec {
    std::string id = "experiment";
    SystemConfig cfg;       // resolved scenario at `snr`
    SnrPoint snr;
    bool db_units = true;   // units of SNR fields and sweep grid on I/O
    std::vector<std::uint64_t> seeds{1};
    Mode mode = Mode::Converge;
    SweepAxis axis = SweepAxis::SNR_r;
    std::vector<double> grid;  // in the I/O units
    std::vector<Method> methods{Method::Proposed};
    std::string out_dir = "out";
    long n_trials = 100000;
    double pfa = 1e-3;
    bool cooperation_off_rows = true;  // roc: also evaluate each design without cooperation
    Coupling coupling;
    Caps caps;
    int workers = 0;  // 0 selects the hardware concurrency
};

std::vector<std::string> validate_spec(const ExperimentSpec& spec);

// Scenario at one sweep point; the base scenario when `axis_value` is empty.
SystemConfig config_at(const ExperimentSpec& spec, const double* axis_value);

// Full-length caps of the published runs.
Caps full_caps();

struct ResultRow {
    std::string experiment_id;
    std::uint64_t seed;
    std::string method;
    double axis_value;
    std::string metric;
    double value;
};

struct ResultTable {
    std::string build;
    std::vector<ResultRow> rows;
};

// Runs the experiment and writes its CSV files and manifest.json into
// spec.out_dir. A failed optimizer run becomes a row with metric "failed".
ResultTable run_experiment(const ExperimentSpec& spec);

// Conventional precoders. UniformUl fixes the UL; BdDl and NspDl fix the
// DL. The other link gets the deterministic initializer.
PrecoderSet baseline_precoders(const SystemConfig& cfg, const ChannelSet& ch, Method kind);

// Orthonormal basis of the null space of M (columns).
Mat null_space(const Mat& M, double rel_tol = 1e-10);

std::string build_string();

// JSON round trip. The manifest written by run_experiment loads back to
// the same spec.
ExperimentSpec load_spec(const std::string& path);
ExperimentSpec spec_from_json_text(const std::string& text);
std::string spec_to_json_text(const ExperimentSpec& spec);

} // namespace mrmc
