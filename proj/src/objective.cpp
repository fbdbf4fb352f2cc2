#include "mrmc/objective.hpp"

namespace mrmc {

double filtered_mi(const Mat& U, const Mat& R_sig, const Mat& R_in)
{
    if (U.size() == 0)
        return 0.0;
    Eigen::JacobiSVD<Mat> svd(U, Eigen::ComputeFullV);
    const RVec& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0)
        return 0.0;
    int rank = 0;
    while (rank < s.size() && s(rank) > 1e-12 * s(0))
        ++rank;
    Mat V = svd.matrixV().leftCols(rank);
    Mat Rin = V.adjoint() * R_in * V;
    Mat Rr = V.adjoint() * (R_sig + R_in) * V;
    double mi;
    try {
        mi = logdet_hpd(Rr) - logdet_hpd(Rin);
    } catch (const std::runtime_error&) {
        throw std::runtime_error("degenerate filter");
    }
    return std::max(mi, 0.0);
}

double radar_mi(const Mat& U_r, const Mat& R_t, const Mat& R_in) { return filtered_mi(U_r, R_t, R_in); }

double comm_mi(const Mat& U, const Mat& R_signal, const Mat& R_in) { return filtered_mi(U, R_signal, R_in); }

double log_det_snr(const Mat& R_sig, const Mat& R_in)
{
    return logdet_hpd(R_sig + R_in) - logdet_hpd(R_in);
}

CwsmTerms cwsm(const SystemConfig& cfg, const FilterSet& U, const CovarianceBundle& b)
{
    CwsmTerms t;
    for (int n = 0; n < cfg.N_r; ++n)
        t.radar += cfg.alpha_r[n] * radar_mi(U.U_r[n], b.radar[n].R_t, b.radar[n].R_in);
    for (int k = 0; k < cfg.K; ++k) {
        for (int i = 0; i < cfg.I; ++i)
            t.ul += cfg.alpha_u[i] * comm_mi(U.U_u[i][k], b.ul[i][k].R_iB, b.ul[i][k].R_in);
        for (int j = 0; j < cfg.J; ++j)
            t.dl += cfg.alpha_d[j] * comm_mi(U.U_d[j][k], b.dl[j][k].R_DL, b.dl[j][k].R_in);
    }
    t.total = t.radar + t.ul + t.dl;
    return t;
}

Mat radar_mse(const Mat& U, const Mat& St, const Mat& R_r)
{
    Mat US = U * St;
    Mat E = Mat::Identity(U.rows(), U.rows()) - US - US.adjoint() + U * R_r * U.adjoint();
    return herm(E);
}

Mat radar_mse_full(const Mat& U, const Mat& S_t, const Mat& Sigma_t, const Mat& R_r)
{
    Mat X = U * S_t * Sigma_t;
    Mat E = Sigma_t - X - X.adjoint() + U * R_r * U.adjoint();
    return herm(E);
}

Mat comm_mse(const Mat& U, const Mat& Hs, const Mat& R)
{
    Mat UH = U * Hs;
    Mat E = Mat::Identity(U.rows(), U.rows()) - UH - UH.adjoint() + U * R * U.adjoint();
    return herm(E);
}

MseSet mse_matrices(const SystemConfig& cfg, const FilterSet& U, const CovarianceBundle& b)
{
    MseSet e;
    for (int n = 0; n < cfg.N_r; ++n)
        e.E_r.push_back(radar_mse(U.U_r[n], b.radar[n].St, b.radar[n].R_t + b.radar[n].R_in));
    e.E_u.resize(cfg.I);
    e.E_d.resize(cfg.J);
    for (int i = 0; i < cfg.I; ++i)
        for (int k = 0; k < cfg.K; ++k)
            e.E_u[i].push_back(comm_mse(U.U_u[i][k], b.ul[i][k].Hs, b.ul[i][k].R_u));
    for (int j = 0; j < cfg.J; ++j)
        for (int k = 0; k < cfg.K; ++k)
            e.E_d[j].push_back(comm_mse(U.U_d[j][k], b.dl[j][k].Hs, b.dl[j][k].R_d));
    return e;
}

FilterSet wmmse_filters(const SystemConfig& cfg, const CovarianceBundle& b)
{
    FilterSet f;
    for (int n = 0; n < cfg.N_r; ++n) {
        const auto& rc = b.radar[n];
        f.U_r.push_back(rc.St.adjoint() * inv_hpd(rc.R_t + rc.R_in));
    }
    f.U_u.resize(cfg.I);
    f.U_d.resize(cfg.J);
    for (int i = 0; i < cfg.I; ++i)
        for (int k = 0; k < cfg.K; ++k)
            f.U_u[i].push_back(b.ul[i][k].Hs.adjoint() * inv_hpd(b.ul[i][k].R_u));
    for (int j = 0; j < cfg.J; ++j)
        for (int k = 0; k < cfg.K; ++k)
            f.U_d[j].push_back(b.dl[j][k].Hs.adjoint() * inv_hpd(b.dl[j][k].R_d));
    return f;
}

Mat optimal_weight(const Mat& E)
{
    if (min_eig(E) <= 0.0)
        throw std::runtime_error("optimal_weight: singular MSE matrix");
    return inv_hpd(E);
}

WeightSet optimal_weights(const MseSet& E)
{
    WeightSet w;
    for (const auto& e : E.E_r)
        w.W_r.push_back(optimal_weight(e));
    for (const auto& row : E.E_u) {
        w.W_u.emplace_back();
        for (const auto& e : row)
            w.W_u.back().push_back(optimal_weight(e));
    }
    for (const auto& row : E.E_d) {
        w.W_d.emplace_back();
        for (const auto& e : row)
            w.W_d.back().push_back(optimal_weight(e));
    }
    return w;
}

RateSet achievable_rates(const SystemConfig& cfg, const CovarianceBundle& b)
{
    RateSet r;
    for (int n = 0; n < cfg.N_r; ++n)
        r.R_r.push_back(log_det_snr(b.radar[n].R_t, b.radar[n].R_in));
    r.R_u.assign(cfg.I, std::vector<double>(cfg.K));
    r.R_d.assign(cfg.J, std::vector<double>(cfg.K));
    for (int k = 0; k < cfg.K; ++k) {
        for (int i = 0; i < cfg.I; ++i)
            r.R_u[i][k] = log_det_snr(b.ul[i][k].R_iB, b.ul[i][k].R_in);
        for (int j = 0; j < cfg.J; ++j)
            r.R_d[j][k] = log_det_snr(b.dl[j][k].R_DL, b.dl[j][k].R_in);
    }
    return r;
}

namespace {

double neg_logdet_mmse(const Mat& G, const Mat& R)
{
    Mat E = Mat::Identity(G.cols(), G.cols()) - G.adjoint() * inv_hpd(R) * G;
    return -logdet_hpd(E);
}

} // namespace

RateSet achievable_rates_mmse(const SystemConfig& cfg, const CovarianceBundle& b)
{
    RateSet r;
    for (int n = 0; n < cfg.N_r; ++n)
        r.R_r.push_back(neg_logdet_mmse(b.radar[n].St, b.radar[n].R_t + b.radar[n].R_in));
    r.R_u.assign(cfg.I, std::vector<double>(cfg.K));
    r.R_d.assign(cfg.J, std::vector<double>(cfg.K));
    for (int k = 0; k < cfg.K; ++k) {
        for (int i = 0; i < cfg.I; ++i)
            r.R_u[i][k] = neg_logdet_mmse(b.ul[i][k].Hs, b.ul[i][k].R_u);
        for (int j = 0; j < cfg.J; ++j)
            r.R_d[j][k] = neg_logdet_mmse(b.dl[j][k].Hs, b.dl[j][k].R_d);
    }
    return r;
}

XiTerms weighted_sum_mse(const SystemConfig& cfg, const FilterSet& U, const WeightSet& W,
                         const CovarianceBundle& b)
{
    MseSet E = mse_matrices(cfg, U, b);
    XiTerms x;
    for (int n = 0; n < cfg.N_r; ++n)
        x.radar += cfg.alpha_r[n] * std::real((W.W_r[n] * E.E_r[n]).trace());
    for (int k = 0; k < cfg.K; ++k) {
        for (int i = 0; i < cfg.I; ++i)
            x.ul += cfg.alpha_u[i] * std::real((W.W_u[i][k] * E.E_u[i][k]).trace());
        for (int j = 0; j < cfg.J; ++j)
            x.dl += cfg.alpha_d[j] * std::real((W.W_d[j][k] * E.E_d[j][k]).trace());
    }
    x.total = x.radar + x.ul + x.dl;
    return x;
}

double xi_prime(const SystemConfig& cfg, const FilterSet& U, const WeightSet& W, const CovarianceBundle& b)
{
    double xi = weighted_sum_mse(cfg, U, W, b).total;
    for (int n = 0; n < cfg.N_r; ++n)
        xi -= cfg.alpha_r[n] * (logdet_hpd(W.W_r[n]) + W.W_r[n].rows());
    for (int k = 0; k < cfg.K; ++k) {
        for (int i = 0; i < cfg.I; ++i)
            xi -= cfg.alpha_u[i] * (logdet_hpd(W.W_u[i][k]) + W.W_u[i][k].rows());
        for (int j = 0; j < cfg.J; ++j)
            xi -= cfg.alpha_d[j] * (logdet_hpd(W.W_d[j][k]) + W.W_d[j][k].rows());
    }
    return xi;
}

} // namespace mrmc
