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

#ifndef DPMIMO_POWER_HPP
#define DPMIMO_POWER_HPP

#include <armadillo>
#include <string>

#include "dpmimo/se.hpp"

namespace dpmimo
{

enum class PowerMode
{
    equal,
    maxsum,
};

const char *to_string(PowerMode m);
PowerMode power_mode_from_string(const std::string &s);

// Per-UE data power, equal across the two polarizations by the V/H symmetry
// of the problem.
struct PowerAllocation
{
    arma::vec rho_w;        // K entries [W]
    double objective = 0.0; // sum SE achieved under the uncorrelated model
    int iterations = 0;
    double kkt_residual = 0.0;
    bool used_equal_fallback = false; // solver point was not better than equal power
};

// Coefficients of the uncorrelated sum-SE problems, derived from the closed
// forms with equal pilot powers p across polarizations.
struct PowerCoeffs
{
    int m_ports = 0;
    int tau_c = 0, tau_p = 0;
    arma::vec beta;   // K
    arma::vec g1, g2; // per-UE MMSE estimate variances of the two slots
};

PowerCoeffs power_coeffs(int m_ports, int tau_c, int tau_p, const arma::vec &beta,
                         const arma::vec &q, double pilot_power_w, double sigma2_ul);

// Uplink sum-SE objective of an allocation (per-polarization powers rho,
// same for V and H): sum_k 2 prelog log2(1 + rho_k (M/2)(g1+g2) /
// (sum_l rho_l beta_l + sigma2)).
double ul_sum_se_objective(const PowerCoeffs &c, const arma::vec &rho_w, double sigma2_ul);

// Downlink sum-SE objective at full budget: the common denominator uses
// beta_k sum_l rho_l + sigma2.
double dl_sum_se_objective(const PowerCoeffs &c, const arma::vec &rho_w, double sigma2_dl);

// Maximize the uplink sum SE under per-UE caps 0 <= rho_k <= rho_tot/2.
// Concave reformulation solved by a nested search: outer golden-section over
// the common-denominator variable, inner capped water-filling by bisection.
// The returned point is never worse than equal (full) power.
PowerAllocation ul_max_sum_se(const PowerCoeffs &c, double sigma2_ul, double rho_tot_w);

// Maximize the downlink sum SE under sum_k rho_k = rho_tot/2, rho_k >= 0 by
// classical water-filling; the water level is found by bisection.
PowerAllocation dl_max_sum_se(const PowerCoeffs &c, double sigma2_dl, double rho_tot_w);

} // namespace dpmimo

#endif
