#pragma once

#include "mrmc/optimizer.hpp"

#include <random>

namespace mrmc::test {

inline Mat crandn(std::mt19937_64& g, int rows, int cols, double var = 1.0)
{
    std::normal_distribution<double> nd(0.0, std::sqrt(var / 2.0));
    Mat X(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r)
            X(r, c) = cd(nd(g), nd(g));
    return X;
}

inline Mat random_hpd(std::mt19937_64& g, int n, double floor = 0.1)
{
    Mat X = crandn(g, n, n);
    return herm(X * X.adjoint()) + floor * Mat::Identity(n, n);
}

// Random precoders at a fraction of the power caps and a PAR-feasible code.
inline PrecoderSet random_precoders(const SystemConfig& cfg, std::mt19937_64& g, double fill = 0.7)
{
    PrecoderSet P = zero_precoders(cfg);
    for (int k = 0; k < cfg.K; ++k) {
        for (int i = 0; i < cfg.I; ++i) {
            Mat X = crandn(g, cfg.Nu[i], cfg.Du[i]);
            P.P_u[i][k] = std::sqrt(fill * cfg.P_U) / X.norm() * X;
        }
        for (int j = 0; j < cfg.J; ++j) {
            Mat X = crandn(g, cfg.M_c, cfg.Dd[j]);
            P.P_d[j][k] = std::sqrt(fill * cfg.P_B / cfg.J) / X.norm() * X;
        }
    }
    return P;
}

inline CodeMatrix random_code(const SystemConfig& cfg, std::mt19937_64& g)
{
    return par_project_columns(cfg, crandn(g, cfg.K, cfg.M_r));
}

// Small instance used by gradient and solver tests.
inline SystemConfig small_config(int antennas = 3, int K = 4)
{
    SystemConfig cfg = default_config();
    cfg.M_r = cfg.N_r = antennas;
    cfg.M_c = cfg.N_c = antennas;
    cfg.I = cfg.J = 1;
    cfg.Nu = cfg.Nd = cfg.Du = cfg.Dd = {2};
    cfg.K = K;
    cfg.n_t = 3;
    cfg.P_r.assign(cfg.M_r, 0.001);
    cfg.gamma.assign(cfg.M_r, 2.0);
    const double w = 1.0 / (cfg.I + cfg.J + cfg.N_r);
    cfg.alpha_r.assign(cfg.N_r, w);
    cfg.alpha_u.assign(cfg.I, w);
    cfg.alpha_d.assign(cfg.J, w);
    auto q = qos_floors(cfg, 1.0, 10.0, 10.0);
    cfg.R_UL = q.R_UL;
    cfg.R_DL = q.R_DL;
    return cfg;
}

} // namespace mrmc::test
