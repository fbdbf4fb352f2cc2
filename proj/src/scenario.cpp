#include "mrmc/scenario.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace mrmc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : gen_(seed) {}

    cd cn(double var = 1.0)
    {
        const double s = std::sqrt(var / 2.0);
        double re = normal_(gen_);
        double im = normal_(gen_);
        return {s * re, s * im};
    }

    Mat cn(int rows, int cols, double var = 1.0)
    {
        Mat m(rows, cols);
        for (int c = 0; c < cols; ++c)
            for (int r = 0; r < rows; ++r)
                m(r, c) = cn(var);
        return m;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(gen_); }

    cd qpsk()
    {
        const int q = static_cast<int>(gen_() & 3u);
        return std::polar(1.0, std::numbers::pi / 4.0 + q * std::numbers::pi / 2.0);
    }

private:
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

cd doppler_phase(double f, int m, int l)
{
    return std::polar(1.0, kTwoPi * f * static_cast<double>(m - l));
}

} // namespace

SystemConfig default_config(double snr_r_db, double snr_ul_db, double snr_dl_db)
{
    SystemConfig cfg;
    const double snr_r = db_to_lin(snr_r_db);
    const double snr_ul = db_to_lin(snr_ul_db);
    const double snr_dl = db_to_lin(snr_dl_db);
    cfg.P_r.assign(cfg.M_r, snr_r * cfg.sigma2_r);
    cfg.P_U = snr_ul * cfg.sigma2_B;
    cfg.P_B = snr_dl * cfg.sigma2_d;
    auto q = qos_floors(cfg, snr_r, snr_ul, snr_dl);
    cfg.R_UL = q.R_UL;
    cfg.R_DL = q.R_DL;
    return cfg;
}

std::vector<std::string> validate_config(const SystemConfig& cfg)
{
    std::vector<std::string> err;
    auto need = [&](bool ok, const std::string& what) {
        if (!ok)
            err.push_back(what);
    };
    need(cfg.M_r >= 1 && cfg.N_r >= 1 && cfg.M_c >= 1 && cfg.N_c >= 1, "antenna counts must be >= 1");
    need(cfg.I >= 1 && cfg.J >= 1, "user counts must be >= 1");
    need(cfg.K >= 1 && cfg.N >= 1, "K and N must be >= 1");
    const bool sized_u = static_cast<int>(cfg.Nu.size()) == cfg.I && static_cast<int>(cfg.Du.size()) == cfg.I;
    const bool sized_d = static_cast<int>(cfg.Nd.size()) == cfg.J && static_cast<int>(cfg.Dd.size()) == cfg.J;
    need(sized_u, "Nu/Du must have I entries");
    need(sized_d, "Nd/Dd must have J entries");
    if (sized_u) {
        int sum = 0;
        for (int i = 0; i < cfg.I; ++i) {
            need(cfg.Nu[i] >= 1 && cfg.Du[i] >= 1, "Nu/Du entries must be >= 1");
            need(cfg.Du[i] <= cfg.Nu[i], "Du > Nu for UL user " + std::to_string(i));
            sum += cfg.Nu[i];
        }
        need(cfg.N_c >= sum, "N_c < sum Nu");
    }
    if (sized_d) {
        int sum = 0;
        for (int j = 0; j < cfg.J; ++j) {
            need(cfg.Nd[j] >= 1 && cfg.Dd[j] >= 1, "Nd/Dd entries must be >= 1");
            need(cfg.Dd[j] <= cfg.Nd[j], "Dd > Nd for DL user " + std::to_string(j));
            sum += cfg.Nd[j];
        }
        need(cfg.M_c >= sum, "M_c < sum Nd");
    }
    need(cfg.P_B > 0.0 && cfg.P_U > 0.0, "nonpositive power");
    need(static_cast<int>(cfg.P_r.size()) == cfg.M_r, "P_r must have M_r entries");
    for (double p : cfg.P_r)
        need(p > 0.0, "nonpositive power");
    need(static_cast<int>(cfg.gamma.size()) == cfg.M_r, "gamma must have M_r entries");
    for (double g : cfg.gamma) {
        need(g >= 1.0, "PAR below 1");
        need(g <= cfg.K, "PAR above K");
    }
    need(cfg.sigma2_r > 0.0 && cfg.sigma2_B > 0.0 && cfg.sigma2_d > 0.0, "nonpositive noise variance");
    need(cfg.CNR >= 0.0, "negative CNR");
    auto in_frame = [&](int n) { return n >= 0 && n < cfg.N; };
    need(in_frame(cfg.n_t) && in_frame(cfg.n_rB) && in_frame(cfg.n_rd), "symbol index outside [0, N-1]");
    need(cfg.n_Bm >= 0 && cfg.n_Bm <= cfg.n_t && cfg.n_u >= 0 && cfg.n_u <= cfg.n_t,
         "direct-path offsets must lie in [0, n_t]");
    need(static_cast<int>(cfg.alpha_r.size()) == cfg.N_r && static_cast<int>(cfg.alpha_u.size()) == cfg.I &&
             static_cast<int>(cfg.alpha_d.size()) == cfg.J,
         "weight vectors must match N_r, I, J");
    for (const auto* w : {&cfg.alpha_r, &cfg.alpha_u, &cfg.alpha_d})
        for (double a : *w)
            need(a > 0.0, "weights must be strictly positive");
    need(cfg.t_u_max >= 0 && cfg.t_d_max >= 0 && cfg.iota_max >= 0 && cfg.ell_max >= 0,
         "iteration caps must be nonnegative");
    need(cfg.doppler_min <= cfg.doppler_max, "doppler range inverted");
    return err;
}

Vec steering_vector(int n, double theta)
{
    Vec a(n);
    for (int i = 0; i < n; ++i)
        a(i) = std::polar(1.0, std::numbers::pi * i * std::sin(theta));
    return a;
}

ChannelSet generate_channels(const SystemConfig& cfg, std::uint64_t seed)
{
    auto errs = validate_config(cfg);
    if (!errs.empty()) {
        std::ostringstream os;
        os << "invalid config:";
        for (auto& e : errs)
            os << ' ' << e << ';';
        throw std::invalid_argument(os.str());
    }
    Sampler rng(seed);
    ChannelSet ch;

    for (int i = 0; i < cfg.I; ++i)
        ch.H_iB.push_back(rng.cn(cfg.N_c, cfg.Nu[i]));
    for (int j = 0; j < cfg.J; ++j)
        ch.H_Bj.push_back(rng.cn(cfg.Nd[j], cfg.M_c));

    const double los = std::sqrt(cfg.K_B / (1.0 + cfg.K_B));
    ch.H_BB = los * Mat::Ones(cfg.N_c, cfg.M_c) + rng.cn(cfg.N_c, cfg.M_c, 1.0 / (1.0 + cfg.K_B));

    ch.H_ij.resize(cfg.I);
    for (int i = 0; i < cfg.I; ++i)
        for (int j = 0; j < cfg.J; ++j)
            ch.H_ij[i].push_back(rng.cn(cfg.Nd[j], cfg.Nu[i], cfg.eta2_ij));

    const double mean_scale = std::sqrt(1.0 / (cfg.kappa + 1.0));
    ch.H_rB = mean_scale * cfg.mu_rB * Mat::Ones(cfg.N_c, cfg.M_r) +
              rng.cn(cfg.N_c, cfg.M_r, cfg.eta2_rB / (cfg.kappa + 1.0));
    for (int j = 0; j < cfg.J; ++j)
        ch.H_rj.push_back(mean_scale * cfg.mu_rj * Mat::Ones(cfg.Nd[j], cfg.M_r) +
                          rng.cn(cfg.Nd[j], cfg.M_r, cfg.eta2_rj / (cfg.kappa + 1.0)));

    const double f0 = cfg.doppler_min, f1 = cfg.doppler_max;
    ch.eta2_rt = RMat::Constant(cfg.M_r, cfg.N_r, cfg.eta2_rt);
    ch.f_rt.resize(cfg.M_r, cfg.N_r);
    for (int n = 0; n < cfg.N_r; ++n)
        for (int m = 0; m < cfg.M_r; ++m)
            ch.f_rt(m, n) = rng.uniform(f0, f1);
    ch.eta2_Bt = RVec::Constant(cfg.N_r, cfg.eta2_Bt);
    ch.f_Bt.resize(cfg.N_r);
    ch.theta_Bt.resize(cfg.N_r);
    for (int n = 0; n < cfg.N_r; ++n) {
        ch.f_Bt(n) = rng.uniform(f0, f1);
        ch.theta_Bt(n) = rng.uniform(-std::numbers::pi / 2.0, std::numbers::pi / 2.0);
    }
    ch.eta2_Bm = RVec::Constant(cfg.N_r, cfg.eta2_Bm);
    ch.f_Bm.resize(cfg.N_r);
    for (int n = 0; n < cfg.N_r; ++n)
        ch.f_Bm(n) = rng.uniform(f0, f1);
    ch.eta2_ur = RMat::Constant(cfg.I, cfg.N_r, cfg.eta2_ur);
    ch.f_ur.resize(cfg.I, cfg.N_r);
    for (int n = 0; n < cfg.N_r; ++n)
        for (int i = 0; i < cfg.I; ++i)
            ch.f_ur(i, n) = rng.uniform(f0, f1);

    const double sigma2_c = cfg.CNR * cfg.sigma2_r;
    for (int n = 0; n < cfg.N_r; ++n)
        ch.Sigma_c.push_back(sigma2_c * Mat::Identity(cfg.M_r, cfg.M_r));

    auto pilots = [&](int streams) {
        std::vector<std::vector<Vec>> p(cfg.K, std::vector<Vec>(cfg.N));
        for (int k = 0; k < cfg.K; ++k)
            for (int l = 0; l < cfg.N; ++l) {
                Vec d(streams);
                for (int s = 0; s < streams; ++s)
                    d(s) = rng.qpsk();
                p[k][l] = d;
            }
        return p;
    };
    for (int i = 0; i < cfg.I; ++i)
        ch.d_u.push_back(pilots(cfg.Du[i]));
    for (int j = 0; j < cfg.J; ++j)
        ch.d_d.push_back(pilots(cfg.Dd[j]));
    return ch;
}

double doppler_from_geometry(double v_x, double v_y, double theta_tx, double phi_rx, double lambda)
{
    if (!(lambda > 0.0))
        throw std::invalid_argument("doppler_from_geometry: wavelength must be positive");
    return (v_x / lambda) * (std::cos(theta_tx) + std::cos(phi_rx)) +
           (v_y / lambda) * (std::sin(theta_tx) + std::sin(phi_rx));
}

QosFloors qos_floors(const SystemConfig& cfg, double snr_r, double snr_ul, double snr_dl)
{
    constexpr double eps = 1e-12;
    const double I = cfg.I, J = cfg.J, M = cfg.M_r;
    const double den_u = M * snr_r + snr_dl + (I - 1.0) * snr_ul;
    const double den_d = M * snr_r + snr_dl * (J - 1.0) / J + I * snr_ul;
    QosFloors q;
    q.R_UL = den_u < eps ? std::log2(1.0 + snr_ul) : std::log2(1.0 + snr_ul / den_u);
    q.R_DL = den_d < eps ? std::log2(1.0 + snr_dl / J) : std::log2(1.0 + (snr_dl / J) / den_d);
    return q;
}

Mat sigma_rt(const SystemConfig& cfg, const ChannelSet& ch, int n_r, int m, int l)
{
    Mat s = Mat::Zero(cfg.M_r, cfg.M_r);
    for (int t = 0; t < cfg.M_r; ++t)
        s(t, t) = ch.eta2_rt(t, n_r) * doppler_phase(ch.f_rt(t, n_r), m, l);
    return s;
}

Mat sigma_Bt(const SystemConfig& cfg, const ChannelSet& ch, int n_r, int m, int l)
{
    Vec a = steering_vector(cfg.M_c, ch.theta_Bt(n_r));
    return ch.eta2_Bt(n_r) * doppler_phase(ch.f_Bt(n_r), m, l) * (a * a.adjoint());
}

Mat sigma_Bm(const SystemConfig& cfg, const ChannelSet& ch, int n_r, int m, int l)
{
    return ch.eta2_Bm(n_r) * doppler_phase(ch.f_Bm(n_r), m, l) * Mat::Identity(cfg.M_c, cfg.M_c);
}

Mat sigma_ur(const SystemConfig& cfg, const ChannelSet& ch, int i, int n_r, int m, int l)
{
    return ch.eta2_ur(i, n_r) * doppler_phase(ch.f_ur(i, n_r), m, l) * Mat::Identity(cfg.Nu[i], cfg.Nu[i]);
}

} // namespace mrmc
