// SPDX-License-Identifier: Apache-2.0
//
// dpmimo: link-level simulator for dual-polarized massive MIMO
// Copyright (C) 2026 the dpmimo authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "dpmimo/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "dpmimo/linalg.hpp"

namespace dpmimo
{

namespace
{

constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg2Rad = kPi / 180.0;

double get_power_mw(const nlohmann::json &j, const char *key, double fallback_w)
{
    if (!j.contains(key))
        return fallback_w;
    return j.at(key).get<double>() * 1e-3; // mW on the wire, W inside
}

std::complex<double> get_complex(const nlohmann::json &j, const char *key,
                                 std::complex<double> fallback)
{
    if (!j.contains(key))
        return fallback;
    const auto &v = j.at(key);
    if (v.is_number())
        return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2)
        return {v.at(0).get<double>(), v.at(1).get<double>()};
    throw std::invalid_argument(std::string("config key '") + key
                                + "' must be a number or [re, im] pair");
}

double get_xpd(const nlohmann::json &j, double fallback)
{
    if (!j.contains("xpd_db"))
        return fallback;
    const auto &v = j.at("xpd_db");
    if (v.is_string())
    {
        const std::string s = v.get<std::string>();
        if (s == "inf" || s == "Inf" || s == "infinity")
            return std::numeric_limits<double>::infinity();
        throw std::invalid_argument("xpd_db string must be 'inf'");
    }
    return v.get<double>();
}

} // namespace

void ScenarioConfig::validate() const
{
    if (m_ports <= 0 || m_ports % 2 != 0)
        throw std::invalid_argument("M must be a positive even number of ports");
    if (num_ues <= 0)
        throw std::invalid_argument("K must be positive");
    if (tau_c <= 0)
        throw std::invalid_argument("tau_c must be positive");
    if (tau_p <= 0 || tau_p > tau_c)
        throw std::invalid_argument("tau_p must satisfy 0 < tau_p <= tau_c");
    if (noise_ul_w < 0.0 || noise_dl_w < 0.0)
        throw std::invalid_argument("noise powers must be >= 0");
    if (pilot_power_w < 0.0 || ul_power_w < 0.0 || dl_power_w < 0.0)
        throw std::invalid_argument("transmit powers must be >= 0");
    if (!(xpd_db >= 0.0)) // rejects NaN and negatives, allows +inf
        throw std::invalid_argument("xpd_db must be >= 0 or infinite");
    if (std::abs(xpc_t) > 1.0 || std::abs(xpc_r) > 1.0)
        throw std::invalid_argument("|xpc_t| and |xpc_r| must be <= 1");
    if (asd_deg <= 0.0)
        throw std::invalid_argument("asd_deg must be positive");
    if (n_clusters <= 0)
        throw std::invalid_argument("n_clusters must be positive");
    if (cell_side_m <= 0.0 || min_distance_m < 0.0)
        throw std::invalid_argument("cell geometry must be positive");
    if (min_distance_m >= cell_side_m / 2.0)
        throw std::invalid_argument("min_distance_m must be smaller than half the cell side");
    if (shadow_sigma_db < 0.0)
        throw std::invalid_argument("shadow_sigma_db must be >= 0");
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json &j)
{
    ScenarioConfig c;
    c.m_ports = j.value("M", c.m_ports);
    c.num_ues = j.value("K", c.num_ues);
    c.tau_c = j.value("tau_c", c.tau_c);
    c.tau_p = j.value("tau_p", 2 * c.num_ues);
    c.noise_ul_w = get_power_mw(j, "noise_power_ul", c.noise_ul_w);
    c.noise_dl_w = get_power_mw(j, "noise_power_dl", c.noise_dl_w);
    c.pilot_power_w = get_power_mw(j, "pilot_power", c.pilot_power_w);
    c.ul_power_w = get_power_mw(j, "ul_power", c.ul_power_w);
    c.dl_power_w = get_power_mw(j, "dl_power", c.dl_power_w);
    c.xpd_db = get_xpd(j, c.xpd_db);
    c.xpc_t = get_complex(j, "xpc_t", c.xpc_t);
    c.xpc_r = get_complex(j, "xpc_r", c.xpc_r);
    c.asd_deg = j.value("asd_deg", c.asd_deg);
    c.n_clusters = j.value("n_clusters", c.n_clusters);
    c.cell_side_m = j.value("cell_side_m", c.cell_side_m);
    c.min_distance_m = j.value("min_distance_m", c.min_distance_m);
    c.shadow_sigma_db = j.value("shadow_sigma_db", c.shadow_sigma_db);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    c.validate();
    return c;
}

ScenarioConfig ScenarioConfig::from_json_file(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open config file: " + path);
    nlohmann::json j;
    try
    {
        in >> j;
    }
    catch (const nlohmann::json::exception &e)
    {
        throw std::invalid_argument("config parse error in " + path + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::json ScenarioConfig::to_json() const
{
    nlohmann::json j;
    j["M"] = m_ports;
    j["K"] = num_ues;
    j["tau_c"] = tau_c;
    j["tau_p"] = tau_p;
    j["noise_power_ul"] = noise_ul_w * 1e3;
    j["noise_power_dl"] = noise_dl_w * 1e3;
    j["pilot_power"] = pilot_power_w * 1e3;
    j["ul_power"] = ul_power_w * 1e3;
    j["dl_power"] = dl_power_w * 1e3;
    if (std::isinf(xpd_db))
        j["xpd_db"] = "inf";
    else
        j["xpd_db"] = xpd_db;
    j["xpc_t"] = {xpc_t.real(), xpc_t.imag()};
    j["xpc_r"] = {xpc_r.real(), xpc_r.imag()};
    j["asd_deg"] = asd_deg;
    j["n_clusters"] = n_clusters;
    j["cell_side_m"] = cell_side_m;
    j["min_distance_m"] = min_distance_m;
    j["shadow_sigma_db"] = shadow_sigma_db;
    j["rng_seed"] = rng_seed;
    return j;
}

std::vector<UEDrop> drop_ues(const ScenarioConfig &cfg, RngStream &rng)
{
    cfg.validate();
    const double half = cfg.cell_side_m / 2.0;
    std::vector<UEDrop> drops(cfg.num_ues);
    for (auto &d : drops)
    {
        long attempts = 0;
        for (;;)
        {
            const double x = (rng.next_uniform() * 2.0 - 1.0) * half;
            const double y = (rng.next_uniform() * 2.0 - 1.0) * half;
            const double dist = std::hypot(x, y);
            if (dist >= cfg.min_distance_m)
            {
                d.position = {x, y};
                d.distance_m = dist;
                d.angle_rad = std::atan2(y, x);
                break;
            }
            if (++attempts >= 1000000)
                throw std::runtime_error("drop_ues: degenerate geometry, rejection "
                                         "sampling did not terminate");
        }
        d.cluster_angles_rad.resize(cfg.n_clusters);
        for (auto &a : d.cluster_angles_rad)
            a = d.angle_rad + (rng.next_uniform() * 2.0 - 1.0) * (40.0 * kDeg2Rad);
    }
    return drops;
}

double pathloss_db(double distance_m, double shadow_db)
{
    if (!(distance_m > 0.0))
        throw std::invalid_argument("pathloss_db: distance must be positive");
    return -35.3 - 37.6 * std::log10(distance_m) + shadow_db;
}

arma::cx_mat local_scattering(const std::vector<double> &nominal_angles_rad,
                              double asd_rad, int half_m, double beta)
{
    if (half_m < 1)
        throw std::invalid_argument("local_scattering: need at least one antenna");
    if (!(asd_rad > 0.0))
        throw std::invalid_argument("local_scattering: ASD must be positive");
    if (nominal_angles_rad.empty())
        throw std::invalid_argument("local_scattering: need at least one cluster angle");

    const auto n = static_cast<double>(nominal_angles_rad.size());
    arma::cx_mat r(half_m, half_m, arma::fill::zeros);
    // Entries depend on the antenna index difference only; fill the first
    // column and propagate along the diagonals (Toeplitz structure).
    arma::cx_vec col(half_m, arma::fill::zeros);
    for (int d = 0; d < half_m; d++)
    {
        std::complex<double> sum = 0.0;
        for (double phi : nominal_angles_rad)
        {
            const double arg = kPi * d * std::sin(phi);
            const double spread = kPi * d * std::cos(phi) * asd_rad;
            sum += std::polar(std::exp(-0.5 * spread * spread), arg);
        }
        col(d) = sum / n;
    }
    for (int s = 0; s < half_m; s++)
        for (int m = 0; m < half_m; m++)
            r(s, m) = (s >= m) ? col(s - m) : std::conj(col(m - s));
    r *= beta; // diagonal becomes exactly beta: col(0) = n/n = 1

    return psd_floor(r);
}

double xpd_to_q(double xpd_db)
{
    if (!(xpd_db >= 0.0))
        throw std::invalid_argument("xpd_to_q: XPD must be >= 0 dB or infinite");
    if (std::isinf(xpd_db))
        return 0.0;
    return 1.0 / (1.0 + std::pow(10.0, xpd_db / 10.0));
}

std::pair<arma::cx_mat, arma::cx_mat>
build_polarized_covariances(const arma::cx_mat &r_bs, double q)
{
    if (!r_bs.is_square())
        throw std::invalid_argument("build_polarized_covariances: r_bs must be square");
    if (q < 0.0 || q > 1.0)
        throw std::invalid_argument("build_polarized_covariances: q must be in [0, 1]");

    const arma::uword half_m = r_bs.n_rows;
    const arma::uword m = 2 * half_m;
    const arma::cx_mat root = hermitian_sqrt(r_bs);
    const arma::cx_mat r_half = arma::kron(root, arma::eye<arma::cx_mat>(2, 2));

    arma::vec w_v(m), w_h(m);
    for (arma::uword i = 0; i < half_m; i++)
    {
        w_v(2 * i) = 1.0 - q;
        w_v(2 * i + 1) = q;
        w_h(2 * i) = q;
        w_h(2 * i + 1) = 1.0 - q;
    }
    arma::cx_mat r_v = r_half * arma::diagmat(arma::cx_vec(w_v, arma::vec(m, arma::fill::zeros)))
                       * r_half;
    arma::cx_mat r_h = r_half * arma::diagmat(arma::cx_vec(w_h, arma::vec(m, arma::fill::zeros)))
                       * r_half;
    return {std::move(r_v), std::move(r_h)};
}

ScenarioDraw draw_geometry(const ScenarioConfig &cfg, RngStream &rng)
{
    ScenarioDraw d;
    d.drops = drop_ues(cfg, rng);
    d.shadow_db.set_size(cfg.num_ues);
    for (int k = 0; k < cfg.num_ues; k++)
        d.shadow_db(k) = cfg.shadow_sigma_db * rng.next_gauss();
    return d;
}

std::vector<UEStatistics> build_ue_statistics(const ScenarioConfig &cfg,
                                              const ScenarioDraw &draw)
{
    cfg.validate();
    const int half_m = cfg.m_ports / 2;
    const double asd_rad = cfg.asd_deg * kDeg2Rad;
    const double q = xpd_to_q(cfg.xpd_db);

    std::vector<UEStatistics> ues(cfg.num_ues);
    for (int k = 0; k < cfg.num_ues; k++)
    {
        UEStatistics &ue = ues[k];
        const UEDrop &drop = draw.drops[k];
        ue.position = drop.position;
        ue.beta = std::pow(10.0, pathloss_db(drop.distance_m, draw.shadow_db(k)) / 10.0);
        ue.q = q;
        ue.t = cfg.xpc_t;
        ue.r = cfg.xpc_r;
        ue.r_bs = local_scattering(drop.cluster_angles_rad, asd_rad, half_m, ue.beta);
        ue.r_bs_sqrt = hermitian_sqrt(ue.r_bs);

        const arma::cx_mat eye2 = arma::eye<arma::cx_mat>(2, 2);
        ue.r_half = arma::kron(ue.r_bs_sqrt, eye2);

        auto [r_v, r_h] = build_polarized_covariances(ue.r_bs, q);
        ue.r_v = std::move(r_v);
        ue.r_h = std::move(r_h);

        // kron(root, diag) is the PSD root of the corresponding covariance
        arma::cx_mat d_v(2, 2, arma::fill::zeros), d_h(2, 2, arma::fill::zeros);
        d_v(0, 0) = std::sqrt(1.0 - q);
        d_v(1, 1) = std::sqrt(q);
        d_h(0, 0) = std::sqrt(q);
        d_h(1, 1) = std::sqrt(1.0 - q);
        ue.r_v_sqrt = arma::kron(ue.r_bs_sqrt, d_v);
        ue.r_h_sqrt = arma::kron(ue.r_bs_sqrt, d_h);
    }
    return ues;
}

std::vector<UEStatistics> build_ue_statistics(const ScenarioConfig &cfg, RngStream &rng)
{
    return build_ue_statistics(cfg, draw_geometry(cfg, rng));
}

std::vector<UniUEStatistics> build_uni_statistics(const ScenarioConfig &cfg,
                                                  const ScenarioDraw &draw, int m_uni)
{
    if (m_uni < 1)
        throw std::invalid_argument("build_uni_statistics: m_uni must be positive");
    const double asd_rad = cfg.asd_deg * kDeg2Rad;
    std::vector<UniUEStatistics> ues(cfg.num_ues);
    for (int k = 0; k < cfg.num_ues; k++)
    {
        UniUEStatistics &ue = ues[k];
        const UEDrop &drop = draw.drops[k];
        ue.beta = std::pow(10.0, pathloss_db(drop.distance_m, draw.shadow_db(k)) / 10.0);
        ue.r_bs = local_scattering(drop.cluster_angles_rad, asd_rad, m_uni, ue.beta);
        ue.r_bs_sqrt = hermitian_sqrt(ue.r_bs);
    }
    return ues;
}

} // namespace dpmimo
