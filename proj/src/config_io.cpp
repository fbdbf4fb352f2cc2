#include "mrmc/harness.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mrmc {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& dst)
{
    if (j.contains(key))
        dst = j.at(key).get<T>();
}

json scenario_json(const SystemConfig& c)
{
    return json{{"M_r", c.M_r},
                {"N_r", c.N_r},
                {"M_c", c.M_c},
                {"N_c", c.N_c},
                {"I", c.I},
                {"J", c.J},
                {"Nu", c.Nu},
                {"Nd", c.Nd},
                {"Du", c.Du},
                {"Dd", c.Dd},
                {"K", c.K},
                {"N", c.N},
                {"n_t", c.n_t},
                {"n_rB", c.n_rB},
                {"n_rd", c.n_rd},
                {"n_Bm", c.n_Bm},
                {"n_u", c.n_u},
                {"P_B", c.P_B},
                {"P_U", c.P_U},
                {"P_r", c.P_r},
                {"gamma", c.gamma},
                {"sigma2_r", c.sigma2_r},
                {"sigma2_B", c.sigma2_B},
                {"sigma2_d", c.sigma2_d},
                {"CNR", c.CNR},
                {"R_UL", c.R_UL},
                {"R_DL", c.R_DL},
                {"alpha_r", c.alpha_r},
                {"alpha_u", c.alpha_u},
                {"alpha_d", c.alpha_d},
                {"t_u_max", c.t_u_max},
                {"t_d_max", c.t_d_max},
                {"iota_max", c.iota_max},
                {"ell_max", c.ell_max},
                {"rng_seed", c.rng_seed},
                {"cooperation", c.cooperation},
                {"eta2_rt", c.eta2_rt},
                {"eta2_Bt", c.eta2_Bt},
                {"eta2_Bm", c.eta2_Bm},
                {"eta2_ur", c.eta2_ur},
                {"doppler_min", c.doppler_min},
                {"doppler_max", c.doppler_max},
                {"kappa", c.kappa},
                {"mu_rB", c.mu_rB},
                {"mu_rj", c.mu_rj},
                {"eta2_rB", c.eta2_rB},
                {"eta2_rj", c.eta2_rj},
                {"K_B", c.K_B},
                {"eta2_ij", c.eta2_ij}};
}

// Shape fields first, so that per-entry defaults can be resized before the
// explicit values are read.
void read_shape(const json& j, SystemConfig& c)
{
    read(j, "M_r", c.M_r);
    read(j, "N_r", c.N_r);
    read(j, "M_c", c.M_c);
    read(j, "N_c", c.N_c);
    read(j, "I", c.I);
    read(j, "J", c.J);
    read(j, "K", c.K);
    read(j, "N", c.N);
    c.Nu.assign(c.I, 2);
    c.Du.assign(c.I, 2);
    c.Nd.assign(c.J, 2);
    c.Dd.assign(c.J, 2);
    read(j, "Nu", c.Nu);
    read(j, "Nd", c.Nd);
    read(j, "Du", c.Du);
    read(j, "Dd", c.Dd);
    const double w = 1.0 / (c.I + c.J + c.N_r);
    c.alpha_r.assign(c.N_r, w);
    c.alpha_u.assign(c.I, w);
    c.alpha_d.assign(c.J, w);
    c.gamma.assign(c.M_r, c.gamma.empty() ? 1.0 : c.gamma.front());
}

void read_rest(const json& j, SystemConfig& c)
{
    read(j, "n_t", c.n_t);
    read(j, "n_rB", c.n_rB);
    read(j, "n_rd", c.n_rd);
    read(j, "n_Bm", c.n_Bm);
    read(j, "n_u", c.n_u);
    read(j, "P_B", c.P_B);
    read(j, "P_U", c.P_U);
    read(j, "P_r", c.P_r);
    read(j, "gamma", c.gamma);
    read(j, "sigma2_r", c.sigma2_r);
    read(j, "sigma2_B", c.sigma2_B);
    read(j, "sigma2_d", c.sigma2_d);
    read(j, "CNR", c.CNR);
    read(j, "R_UL", c.R_UL);
    read(j, "R_DL", c.R_DL);
    read(j, "alpha_r", c.alpha_r);
    read(j, "alpha_u", c.alpha_u);
    read(j, "alpha_d", c.alpha_d);
    read(j, "t_u_max", c.t_u_max);
    read(j, "t_d_max", c.t_d_max);
    read(j, "iota_max", c.iota_max);
    read(j, "ell_max", c.ell_max);
    read(j, "rng_seed", c.rng_seed);
    read(j, "cooperation", c.cooperation);
    read(j, "eta2_rt", c.eta2_rt);
    read(j, "eta2_Bt", c.eta2_Bt);
    read(j, "eta2_Bm", c.eta2_Bm);
    read(j, "eta2_ur", c.eta2_ur);
    read(j, "doppler_min", c.doppler_min);
    read(j, "doppler_max", c.doppler_max);
    read(j, "kappa", c.kappa);
    read(j, "mu_rB", c.mu_rB);
    read(j, "mu_rj", c.mu_rj);
    read(j, "eta2_rB", c.eta2_rB);
    read(j, "eta2_rj", c.eta2_rj);
    read(j, "K_B", c.K_B);
    read(j, "eta2_ij", c.eta2_ij);
}

double to_linear(bool db, double v) { return db ? db_to_lin(v) : v; }
double from_linear(bool db, double v) { return db ? lin_to_db(v) : v; }

} // namespace

ExperimentSpec spec_from_json_text(const std::string& text)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    ExperimentSpec spec;
    const std::string units = root.value("units", std::string("db"));
    if (units != "db" && units != "linear")
        throw std::invalid_argument("config: units must be \"db\" or \"linear\"");
    spec.db_units = units == "db";
    const bool db = spec.db_units;

    const json sc = root.value("scenario", json::object());
    SystemConfig& c = spec.cfg;
    read_shape(sc, c);
    if (sc.contains("snr_r"))
        spec.snr.snr_r = to_linear(db, sc.at("snr_r").get<double>());
    if (sc.contains("snr_ul"))
        spec.snr.snr_ul = to_linear(db, sc.at("snr_ul").get<double>());
    if (sc.contains("snr_dl"))
        spec.snr.snr_dl = to_linear(db, sc.at("snr_dl").get<double>());
    if (sc.contains("cnr"))
        spec.snr.cnr = to_linear(db, sc.at("cnr").get<double>());
    read(sc, "sigma2_r", c.sigma2_r);
    read(sc, "sigma2_B", c.sigma2_B);
    read(sc, "sigma2_d", c.sigma2_d);
    // Powers, CNR and floors follow the SNR point unless given explicitly.
    c.P_r.assign(c.M_r, spec.snr.snr_r * c.sigma2_r);
    c.P_U = spec.snr.snr_ul * c.sigma2_B;
    c.P_B = spec.snr.snr_dl * c.sigma2_d;
    c.CNR = spec.snr.cnr;
    const QosFloors q = qos_floors(c, spec.snr.snr_r, spec.snr.snr_ul, spec.snr.snr_dl);
    c.R_UL = q.R_UL;
    c.R_DL = q.R_DL;
    if (sc.contains("gamma_db"))
        c.gamma.assign(c.M_r, db_to_lin(sc.at("gamma_db").get<double>()));
    read_rest(sc, c);

    const json ex = root.value("experiment", json::object());
    read(ex, "id", spec.id);
    if (ex.contains("mode"))
        spec.mode = parse_mode(ex.at("mode").get<std::string>());
    if (ex.contains("axis"))
        spec.axis = parse_axis(ex.at("axis").get<std::string>());
    read(ex, "grid", spec.grid);
    if (ex.contains("methods")) {
        spec.methods.clear();
        for (const auto& m : ex.at("methods"))
            spec.methods.push_back(parse_method(m.get<std::string>()));
    }
    read(ex, "seeds", spec.seeds);
    read(ex, "out_dir", spec.out_dir);
    read(ex, "trials", spec.n_trials);
    read(ex, "pfa", spec.pfa);
    read(ex, "cooperation_off_rows", spec.cooperation_off_rows);
    read(ex, "workers", spec.workers);
    if (ex.contains("coupling")) {
        const json& cp = ex.at("coupling");
        read(cp, "enabled", spec.coupling.enabled);
        read(cp, "r_over_rB", spec.coupling.r_over_rB);
        read(cp, "r_over_rd", spec.coupling.r_over_rd);
        read(cp, "ur_over_u", spec.coupling.ur_over_u);
        read(cp, "ud_over_u", spec.coupling.ud_over_u);
        read(cp, "rB_over_cnr", spec.coupling.rB_over_cnr);
        read(cp, "rd_over_cnr", spec.coupling.rd_over_cnr);
    }
    spec.caps = caps_from(c);
    if (ex.contains("caps")) {
        const json& cp = ex.at("caps");
        read(cp, "t_u_max", spec.caps.t_u_max);
        read(cp, "t_d_max", spec.caps.t_d_max);
        read(cp, "iota_max", spec.caps.iota_max);
        read(cp, "ell_max", spec.caps.ell_max);
        read(cp, "conv_tol", spec.caps.conv_tol);
        read(cp, "conv_window", spec.caps.conv_window);
    }
    return spec;
}

ExperimentSpec load_spec(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return spec_from_json_text(ss.str());
}

std::string spec_to_json_text(const ExperimentSpec& spec)
{
    const bool db = spec.db_units;
    json sc = scenario_json(spec.cfg);
    sc["snr_r"] = from_linear(db, spec.snr.snr_r);
    sc["snr_ul"] = from_linear(db, spec.snr.snr_ul);
    sc["snr_dl"] = from_linear(db, spec.snr.snr_dl);
    sc["cnr"] = from_linear(db, spec.snr.cnr);

    std::vector<std::string> methods;
    for (Method m : spec.methods)
        methods.push_back(to_string(m));
    const Caps& cp = spec.caps;
    json ex{{"id", spec.id},
            {"mode", to_string(spec.mode)},
            {"axis", to_string(spec.axis)},
            {"grid", spec.grid},
            {"methods", methods},
            {"seeds", spec.seeds},
            {"out_dir", spec.out_dir},
            {"trials", spec.n_trials},
            {"pfa", spec.pfa},
            {"cooperation_off_rows", spec.cooperation_off_rows},
            {"workers", spec.workers},
            {"coupling",
             {{"enabled", spec.coupling.enabled},
              {"r_over_rB", spec.coupling.r_over_rB},
              {"r_over_rd", spec.coupling.r_over_rd},
              {"ur_over_u", spec.coupling.ur_over_u},
              {"ud_over_u", spec.coupling.ud_over_u},
              {"rB_over_cnr", spec.coupling.rB_over_cnr},
              {"rd_over_cnr", spec.coupling.rd_over_cnr}}},
            {"caps",
             {{"t_u_max", cp.t_u_max},
              {"t_d_max", cp.t_d_max},
              {"iota_max", cp.iota_max},
              {"ell_max", cp.ell_max},
              {"conv_tol", cp.conv_tol},
              {"conv_window", cp.conv_window}}}};
    json root{{"units", db ? "db" : "linear"}, {"scenario", sc}, {"experiment", ex}};
    return root.dump(2) + "\n";
}

} // namespace mrmc
