#include "mrmc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <thread>

#ifndef MRMC_BUILD_ID
#define MRMC_BUILD_ID "unknown"
#endif

namespace mrmc {

namespace {

struct Named {
    const char* name;
    int value;
};

constexpr Named kModes[] = {{"converge", 0}, {"roc", 1}, {"sweep", 2}};
constexpr Named kAxes[] = {{"SNR_r", 0}, {"SNR_UL", 1}, {"CNR", 2}};
constexpr Named kMethods[] = {{"proposed", 0}, {"uncoded", 1}, {"random", 2},
                              {"uniform_ul", 3}, {"bd_dl", 4}, {"nsp_dl", 5}};

template <size_t N>
int lookup(const Named (&table)[N], const std::string& s, const char* what)
{
    for (const auto& e : table)
        if (s == e.name)
            return e.value;
    std::string opts;
    for (const auto& e : table)
        opts += std::string(opts.empty() ? "" : "|") + e.name;
    throw std::invalid_argument(std::string("unknown ") + what + " '" + s + "' (expected " + opts + ")");
}

std::uint64_t splitmix(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) { return splitmix(splitmix(seed) ^ tag); }

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::string to_string(Mode m) { return kModes[static_cast<int>(m)].name; }
std::string to_string(SweepAxis a) { return kAxes[static_cast<int>(a)].name; }
std::string to_string(Method m) { return kMethods[static_cast<int>(m)].name; }
Mode parse_mode(const std::string& s) { return static_cast<Mode>(lookup(kModes, s, "mode")); }
SweepAxis parse_axis(const std::string& s) { return static_cast<SweepAxis>(lookup(kAxes, s, "axis")); }
Method parse_method(const std::string& s) { return static_cast<Method>(lookup(kMethods, s, "method")); }

std::string build_string() { return MRMC_BUILD_ID; }

Caps full_caps()
{
    Caps c;
    c.t_u_max = 200;
    c.t_d_max = 200;
    c.iota_max = 1;
    c.ell_max = 2000;
    return c;
}

std::vector<std::string> validate_spec(const ExperimentSpec& spec)
{
    std::vector<std::string> err = validate_config(spec.cfg);
    if (spec.seeds.empty())
        err.push_back("seed list is empty");
    if (spec.methods.empty())
        err.push_back("method list is empty");
    if (spec.mode == Mode::Sweep && spec.grid.empty())
        err.push_back("sweep grid is empty");
    for (size_t i = 1; i < spec.grid.size(); ++i)
        if (!(spec.grid[i] > spec.grid[i - 1])) {
            err.push_back("sweep grid must be strictly increasing");
            break;
        }
    if (!spec.db_units)
        for (double g : spec.grid)
            if (!(g > 0.0) && spec.axis != SweepAxis::CNR) {
                err.push_back("linear SNR grid values must be positive");
                break;
            }
    if (spec.n_trials < 1)
        err.push_back("trials must be >= 1");
    if (!(spec.pfa > 0.0 && spec.pfa < 1.0))
        err.push_back("pfa must lie in (0, 1)");
    if (spec.caps.ell_max < 1)
        err.push_back("ell_max must be >= 1");
    return err;
}

SystemConfig config_at(const ExperimentSpec& spec, const double* axis_value)
{
    SystemConfig c = spec.cfg;
    if (!axis_value)
        return c;
    SnrPoint p = spec.snr;
    const double v = spec.db_units ? db_to_lin(*axis_value) : *axis_value;
    switch (spec.axis) {
    case SweepAxis::SNR_r: p.snr_r = v; break;
    case SweepAxis::SNR_UL: p.snr_ul = v; break;
    case SweepAxis::CNR: p.cnr = v; break;
    }
    c.P_r.assign(c.M_r, p.snr_r * c.sigma2_r);
    c.P_U = p.snr_ul * c.sigma2_B;
    c.P_B = p.snr_dl * c.sigma2_d;
    c.CNR = p.cnr;
    const QosFloors q = qos_floors(c, p.snr_r, p.snr_ul, p.snr_dl);
    c.R_UL = q.R_UL;
    c.R_DL = q.R_DL;
    if (!spec.coupling.enabled)
        return c;
    // Each gain is chosen so that gain * (source power) / (receiver noise)
    // equals the coupled SNR.
    const Coupling& k = spec.coupling;
    switch (spec.axis) {
    case SweepAxis::SNR_r:
        c.eta2_rB = c.sigma2_B / (k.r_over_rB * c.sigma2_r);
        c.eta2_rj = c.sigma2_d / (k.r_over_rd * c.sigma2_r);
        break;
    case SweepAxis::SNR_UL:
        c.eta2_ur = k.ur_over_u * c.sigma2_r / c.sigma2_B;
        c.eta2_ij = k.ud_over_u * c.sigma2_d / c.sigma2_B;
        break;
    case SweepAxis::CNR:
        c.eta2_rB = k.rB_over_cnr * p.cnr * c.sigma2_B / c.P_r.front();
        c.eta2_rj = k.rd_over_cnr * p.cnr * c.sigma2_d / c.P_r.front();
        break;
    }
    return c;
}

Mat null_space(const Mat& M, double rel_tol)
{
    Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullV);
    const RVec& s = svd.singularValues();
    const double top = s.size() ? s(0) : 0.0;
    int rank = 0;
    while (rank < s.size() && s(rank) > rel_tol * std::max(top, 1e-300))
        ++rank;
    return svd.matrixV().rightCols(M.cols() - rank);
}

namespace {

// BD precoder of user j, optionally also orthogonal to the radar link.
Mat bd_precoder(const SystemConfig& cfg, const ChannelSet& ch, int j, bool protect_radar)
{
    int rows = 0;
    for (int o = 0; o < cfg.J; ++o)
        if (o != j)
            rows += cfg.Nd[o];
    if (protect_radar) {
        if (cfg.N_c != cfg.M_c)
            throw std::invalid_argument("nsp_dl: H_rB^H acts on M_c only when N_c == M_c");
        rows += cfg.M_r;
    }
    Mat stack(rows, cfg.M_c);
    int r = 0;
    for (int o = 0; o < cfg.J; ++o)
        if (o != j) {
            stack.middleRows(r, cfg.Nd[o]) = ch.H_Bj[o];
            r += cfg.Nd[o];
        }
    if (protect_radar)
        stack.middleRows(r, cfg.M_r) = ch.H_rB.adjoint();
    Mat N = rows ? null_space(stack) : Mat(Mat::Identity(cfg.M_c, cfg.M_c));
    if (N.cols() < cfg.Dd[j])
        throw std::invalid_argument((protect_radar ? std::string("nsp_dl") : std::string("bd_dl")) +
                                    ": null space for DL user " + std::to_string(j) + " has dimension " +
                                    std::to_string(N.cols()) + " but Dd = " + std::to_string(cfg.Dd[j]) +
                                    " (deficit " + std::to_string(cfg.Dd[j] - N.cols()) + ")");
    Eigen::JacobiSVD<Mat> svd(ch.H_Bj[j] * N, Eigen::ComputeFullV);
    Mat V = N * svd.matrixV().leftCols(cfg.Dd[j]);
    return std::sqrt(cfg.P_B / (cfg.J * cfg.Dd[j])) * V;
}

} // namespace

PrecoderSet baseline_precoders(const SystemConfig& cfg, const ChannelSet& ch, Method kind)
{
    PrecoderSet P = init_precoders(cfg, ch, InitMode::Deterministic, 0);
    switch (kind) {
    case Method::UniformUl:
        for (int i = 0; i < cfg.I; ++i) {
            const int d = std::min(cfg.Nu[i], cfg.Du[i]);
            Mat X = Mat::Zero(cfg.Nu[i], cfg.Du[i]);
            X.topLeftCorner(d, d).setIdentity();
            X *= std::sqrt(cfg.P_U / d);
            for (int k = 0; k < cfg.K; ++k)
                P.P_u[i][k] = X;
        }
        break;
    case Method::BdDl:
    case Method::NspDl:
        for (int j = 0; j < cfg.J; ++j) {
            Mat X = bd_precoder(cfg, ch, j, kind == Method::NspDl);
            for (int k = 0; k < cfg.K; ++k)
                P.P_d[j][k] = X;
        }
        break;
    default:
        throw std::invalid_argument("baseline_precoders: " + to_string(kind) + " is not a precoding baseline");
    }
    return P;
}

namespace {

struct Design {
    std::string label;
    Method method;
    BcdResult result;
    bool failed = false;
    std::string error;
};

Design run_design(const SystemConfig& cfg, const ChannelSet& ch, Method m, InitMode init, std::uint64_t seed,
                  Caps caps, std::string label)
{
    Design d;
    d.label = std::move(label);
    d.method = m;
    try {
        PrecoderSet P0 = init_precoders(cfg, ch, init, derive(seed, 1));
        CodeMatrix A0 = baseline_code(cfg, CodeKind::Uncoded, 0);
        switch (m) {
        case Method::Proposed: break;
        case Method::Uncoded: caps.update_code = false; break;
        case Method::Random:
            A0 = baseline_code(cfg, CodeKind::Random, derive(seed, 2));
            caps.update_code = false;
            break;
        case Method::UniformUl:
            P0 = baseline_precoders(cfg, ch, m);
            caps.update_ul = false;
            break;
        case Method::BdDl:
        case Method::NspDl:
            P0 = baseline_precoders(cfg, ch, m);
            caps.update_dl = false;
            break;
        }
        d.result = bcd_ap(cfg, ch, P0, A0, caps);
    } catch (const std::exception& e) {
        d.failed = true;
        d.error = e.what();
    }
    return d;
}

struct TaskOutput {
    std::vector<ResultRow> rows;
    std::map<std::string, std::string> traces;  // file name -> body
    std::map<std::string, std::string> roc;     // method -> rows without header
    std::string sweep;
};

std::string trace_csv(const BcdResult& r)
{
    std::string s = "ell,cwsm_nats,cwsm_pre_projection,xi_wmmse,max_power_violation,min_rate_margin,par_feasible,"
                    "pass_max_increase\n";
    for (const auto& t : r.trace)
        s += std::to_string(t.ell) + "," + num(t.cwsm_nats) + "," + num(t.cwsm_pre_projection) + "," +
             num(t.xi_wmmse) + "," + num(t.max_power_violation) + "," + num(t.min_rate_margin) + "," +
             (t.par_feasible ? "1" : "0") + "," + num(t.pass_max_increase) + "\n";
    return s;
}

TaskOutput run_task(const ExperimentSpec& spec, const double* axis_value, std::uint64_t seed)
{
    TaskOutput out;
    const SystemConfig cfg = config_at(spec, axis_value);
    const double xv = axis_value ? *axis_value : 0.0;
    const ChannelSet ch = generate_channels(cfg, seed);
    auto row = [&](const std::string& method, const std::string& metric, double value) {
        if (std::isfinite(value))
            out.rows.push_back({spec.id, seed, method, xv, metric, value});
    };

    std::vector<Design> designs;
    for (Method m : spec.methods) {
        if (m == Method::Proposed && spec.mode == Mode::Converge) {
            designs.push_back(run_design(cfg, ch, m, InitMode::Deterministic, seed, spec.caps, "proposed_det"));
            designs.push_back(run_design(cfg, ch, m, InitMode::Random, seed, spec.caps, "proposed_rand"));
        } else {
            designs.push_back(run_design(cfg, ch, m, InitMode::Deterministic, seed, spec.caps, to_string(m)));
        }
    }

    const std::uint64_t det_seed = derive(seed, 3);
    for (const Design& d : designs) {
        if (d.failed) {
            row(d.label, "failed", 1.0);
            continue;
        }
        const BcdResult& r = d.result;
        CovarianceBundle b = build_bundle(cfg, ch, r.A, r.P);
        const CwsmTerms t = cwsm(cfg, wmmse_filters(cfg, b), b);
        row(d.label, "cwsm", t.total);
        row(d.label, "cwsm_radar", t.radar);
        row(d.label, "cwsm_ul", t.ul);
        row(d.label, "cwsm_dl", t.dl);
        row(d.label, "converged", r.converged ? 1.0 : 0.0);
        row(d.label, "iterations", static_cast<double>(r.trace.size() - 1));
        row(d.label, "max_power_violation", max_power_violation(cfg, r.P));
        row(d.label, "min_rate_margin", min_rate_margin(cfg, ch, r.P, r.A));
        row(d.label, "par_feasible", code_feasible(cfg, r.A) ? 1.0 : 0.0);

        if (spec.mode == Mode::Converge)
            out.traces["trace_" + d.label + "_" + std::to_string(seed) + ".csv"] = trace_csv(r);
        if (spec.mode == Mode::Sweep)
            out.sweep += num(xv) + "," + std::to_string(seed) + "," + d.label + "," + num(t.total) + "," +
                         num(t.radar) + "," + num(t.ul) + "," + num(t.dl) + "," + (r.converged ? "1" : "0") + "\n";
        if (spec.mode == Mode::Roc) {
            auto roc_rows = [&](const SystemConfig& c, const char* coop, const std::string& label) {
                const RocCurve roc = simulate_roc(design_instance(c, ch, r.P, r.A), spec.n_trials, det_seed);
                for (size_t q = 0; q < roc.nu.size(); ++q)
                    out.roc[d.label] += std::to_string(seed) + "," + coop + "," + num(roc.nu[q]) + "," +
                                        num(roc.pfa[q]) + "," + num(roc.pd[q]) + "," +
                                        std::to_string(roc.n_trials) + "\n";
                row(label, "pd", pd_at_pfa(roc, spec.pfa));
            };
            roc_rows(cfg, "on", d.label);
            if (spec.cooperation_off_rows && cfg.cooperation) {
                SystemConfig off = cfg;
                off.cooperation = false;
                roc_rows(off, "off", d.label + "_nocoop");
            }
        }
    }
    return out;
}

void write_file(const std::filesystem::path& p, const std::string& body)
{
    std::ofstream f(p, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write " + p.string());
    f << body;
}

} // namespace

ResultTable run_experiment(const ExperimentSpec& spec)
{
    const auto errs = validate_spec(spec);
    if (!errs.empty()) {
        std::string msg = "invalid experiment:";
        for (const auto& e : errs)
            msg += " " + e + ";";
        throw std::invalid_argument(msg);
    }

    std::vector<const double*> points;
    if (spec.mode == Mode::Sweep)
        for (const double& g : spec.grid)
            points.push_back(&g);
    else
        points.push_back(nullptr);

    const size_t n_tasks = points.size() * spec.seeds.size();
    std::vector<TaskOutput> outputs(n_tasks);
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (size_t t = next++; t < n_tasks; t = next++)
            outputs[t] = run_task(spec, points[t / spec.seeds.size()], spec.seeds[t % spec.seeds.size()]);
    };
    unsigned n_workers = spec.workers > 0 ? spec.workers : std::max(1u, std::thread::hardware_concurrency());
    n_workers = std::min<unsigned>(n_workers, n_tasks);
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < n_workers; ++w)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }

    ResultTable table;
    table.build = build_string();
    std::map<std::string, std::string> roc;
    std::string sweep;
    namespace fs = std::filesystem;
    const fs::path dir(spec.out_dir);
    fs::create_directories(dir);
    for (auto& o : outputs) {
        table.rows.insert(table.rows.end(), o.rows.begin(), o.rows.end());
        for (const auto& [name, body] : o.traces)
            write_file(dir / name, body);
        for (const auto& [method, body] : o.roc)
            roc[method] += body;
        sweep += o.sweep;
    }
    for (const auto& [method, body] : roc)
        write_file(dir / ("roc_" + method + ".csv"), "seed,cooperation,nu,pfa,pd,n_trials\n" + body);
    if (spec.mode == Mode::Sweep)
        write_file(dir / ("sweep_" + to_string(spec.axis) + ".csv"),
                   "axis_value,seed,method,cwsm,cwsm_radar,cwsm_ul,cwsm_dl,converged\n" + sweep);

    std::string csv = "experiment_id,seed,method,axis,axis_value,metric,value,build\n";
    const std::string axis = spec.mode == Mode::Sweep ? to_string(spec.axis) : "none";
    for (const auto& r : table.rows)
        csv += r.experiment_id + "," + std::to_string(r.seed) + "," + r.method + "," + axis + "," +
               num(r.axis_value) + "," + r.metric + "," + num(r.value) + "," + table.build + "\n";
    write_file(dir / "results.csv", csv);
    write_file(dir / "manifest.json", spec_to_json_text(spec));
    return table;
}

} // namespace mrmc
