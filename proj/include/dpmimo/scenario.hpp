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

#ifndef DPMIMO_SCENARIO_HPP
#define DPMIMO_SCENARIO_HPP

#include <armadillo>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpmimo/rng.hpp"

namespace dpmimo
{

// Full experiment description.  Powers are stored in watts; the JSON
// interface accepts them in mW and converts at ingestion.  All internal math
// runs in linear units.
struct ScenarioConfig
{
    int m_ports = 100;   // M: total BS antenna ports (2 per dual-polarized element), even
    int num_ues = 10;    // K
    int tau_c = 200;     // samples per coherence block
    int tau_p = 20;      // pilot length, >= 2K

    double noise_ul_w = 3.9810717055349565e-13; // sigma^2 uplink, -94 dBm over 20 MHz
    double noise_dl_w = 3.9810717055349565e-13; // sigma^2 downlink

    double pilot_power_w = 0.1; // per polarization per UE
    double ul_power_w = 0.1;    // per polarization per UE
    double dl_power_w = 0.1;    // per polarization per UE

    double xpd_db = 5.0; // cross-polar discrimination; +inf means no leakage
    std::complex<double> xpc_t{0.0, 0.0}; // transmit-side cross-polar correlation
    std::complex<double> xpc_r{0.0, 0.0}; // receive-side cross-polar correlation

    double asd_deg = 5.0; // angular standard deviation of the scattering clusters
    int n_clusters = 6;

    double cell_side_m = 500.0;
    double min_distance_m = 15.0;
    double shadow_sigma_db = 7.0;

    std::uint64_t rng_seed = 1;

    void validate() const; // throws std::invalid_argument

    // Keys are named exactly like the fields of this struct (M, K, tau_c,
    // tau_p, noise_power_ul, ..., rng_seed); powers are given in mW.
    static ScenarioConfig from_json(const nlohmann::json &j);
    static ScenarioConfig from_json_file(const std::string &path);
    nlohmann::json to_json() const; // powers back in mW
};

// One user drop: position relative to the BS at the origin, plus the nominal
// cluster angles used by the local scattering model.
struct UEDrop
{
    arma::vec2 position;  // meters
    double distance_m = 0.0;
    double angle_rad = 0.0;
    std::vector<double> cluster_angles_rad;
};

// Quasi-static geometry of one setup; shadow fading is drawn here so that the
// dual-polarized and uni-polarized benchmarks can share it.
struct ScenarioDraw
{
    std::vector<UEDrop> drops;
    arma::vec shadow_db;
};

// Per-UE second-order statistics of the dual-polarized channel.
struct UEStatistics
{
    double beta = 0.0; // linear pathloss gain
    double q = 0.0;    // polarization leakage coefficient in [0, 1]
    std::complex<double> t{0.0, 0.0}; // transmit XPC
    std::complex<double> r{0.0, 0.0}; // receive XPC
    arma::vec2 position;

    arma::cx_mat r_bs;      // (M/2) x (M/2) spatial correlation, Hermitian PSD
    arma::cx_mat r_bs_sqrt; // PSD root of r_bs
    arma::cx_mat r_v, r_h;  // M x M per-polarization covariances
    arma::cx_mat r_v_sqrt, r_h_sqrt; // PSD roots used by the channel sampler
    arma::cx_mat r_half;    // kron(r_bs_sqrt, I_2), used by the XPC sampler
};

// Uni-polarized benchmark statistics (single antenna per UE).
struct UniUEStatistics
{
    double beta = 0.0;
    arma::cx_mat r_bs;
    arma::cx_mat r_bs_sqrt;
};

// Uniform drop in the square cell with rejection below min_distance_m; the
// per-cluster nominal angles are uniform within +-40 degrees of the UE angle.
std::vector<UEDrop> drop_ues(const ScenarioConfig &cfg, RngStream &rng);

// Distance-based large-scale fading in dB: -35.3 - 37.6 log10(d / 1 m) + F.
double pathloss_db(double distance_m, double shadow_db);

// Gaussian local scattering correlation matrix for a half-wavelength ULA.
// The result is Hermitized and eigenvalue-floored at zero.
arma::cx_mat local_scattering(const std::vector<double> &nominal_angles_rad,
                              double asd_rad, int half_m, double beta);

// Leakage coefficient q from the XPD in dB: q = 1 / (1 + 10^(xpd/10)).
double xpd_to_q(double xpd_db);

// Per-polarization covariances: with R = r_bs kron I_2 and its PSD root,
// R_v = R^{1/2} blkdiag(diag(1-q, q)) R^{1/2} and R_h with the weights
// swapped, so that R_v + R_h = R.
std::pair<arma::cx_mat, arma::cx_mat>
build_polarized_covariances(const arma::cx_mat &r_bs, double q);

// Geometry plus shadow fading for one setup.
ScenarioDraw draw_geometry(const ScenarioConfig &cfg, RngStream &rng);

// Full per-UE statistics from a geometry draw.
std::vector<UEStatistics> build_ue_statistics(const ScenarioConfig &cfg,
                                              const ScenarioDraw &draw);
std::vector<UEStatistics> build_ue_statistics(const ScenarioConfig &cfg, RngStream &rng);

// Uni-polarized benchmark statistics on the same drops: m_uni antennas,
// same pathloss, same cluster angles.
std::vector<UniUEStatistics> build_uni_statistics(const ScenarioConfig &cfg,
                                                  const ScenarioDraw &draw, int m_uni);

} // namespace dpmimo

#endif
