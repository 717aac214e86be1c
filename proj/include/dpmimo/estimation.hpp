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

#ifndef DPMIMO_ESTIMATION_HPP
#define DPMIMO_ESTIMATION_HPP

#include <armadillo>
#include <utility>
#include <vector>

#include "dpmimo/rng.hpp"
#include "dpmimo/scenario.hpp"

namespace dpmimo
{

// Orthogonal pilot book: UE k transmits Phi_k = L_k^{1/2} V_k^T where the
// tau_p x 2 matrices V_k are consecutive column pairs of a scaled DFT basis,
// so V_k^H V_k = tau_p I_2 and V_k^H V_l = 0 for l != k.
struct PilotBook
{
    int tau_p = 0;
    arma::cx_mat v_all;  // tau_p x 2K
    arma::vec p_v_w, p_h_w; // per-UE pilot powers [W]

    arma::cx_mat pilot_sequences(int k) const; // V_k, tau_p x 2
    arma::cx_mat pilot_signal(int k) const;    // Phi_k, 2 x tau_p
};

PilotBook build_pilots(int num_ues, int tau_p, const arma::vec &p_v_w,
                       const arma::vec &p_h_w);
PilotBook build_pilots(int num_ues, int tau_p, double pilot_power_w);

// Per-UE MMSE estimator state.  Depends only on the channel statistics, so it
// is computed once per setup and shared (immutably) across trials.
struct PolarizedEstimator
{
    arma::cx_mat psi_v, psi_h;       // (p tau R + sigma^2 I)^{-1}
    arma::cx_mat gamma_v, gamma_h;   // estimate covariances
    arma::cx_mat c_v, c_h;           // error covariances, C = R - Gamma
    arma::cx_mat filter_v, filter_h; // sqrt(p) R Psi: hhat = filter * y^p
    double tr_gamma_v = 0.0, tr_gamma_h = 0.0;
    double p_v_w = 0.0, p_h_w = 0.0;
};

// Throws std::runtime_error when the pilot observation covariance is
// singular (sigma2 = 0 together with a rank-deficient R).
PolarizedEstimator estimate_covariances(const UEStatistics &ue, double p_v_w,
                                        double p_h_w, int tau_p, double sigma2_ul);

// Received pilot block Y = sum_l H_l^H Phi_l + N with i.i.d. CN(0, sigma2)
// noise; h_true[l] holds the 2 x M channel of UE l.
arma::cx_mat received_pilot_signal(const std::vector<arma::cx_mat> &h_true,
                                   const PilotBook &pilots, double sigma2_ul,
                                   RngStream &rng);

// MMSE estimates of both polarized channels of UE k from the received pilot
// block: correlate with V_k^*, then apply the per-polarization filters.
std::pair<arma::cx_vec, arma::cx_vec>
mmse_estimate(const arma::cx_mat &y_received, const PilotBook &pilots,
              const PolarizedEstimator &est, int k);

// Batched variant used in the Monte Carlo hot path: bypasses the shared pilot
// block using the exact distribution of the processed pilot signal, whose
// noise is independent across UEs and polarizations by pilot orthogonality.
// h_v/h_h are M x T truth columns; n_v/n_h are i.i.d. CN(0,1) draws.
void estimate_batch(const PolarizedEstimator &est, int tau_p, double sigma2_ul,
                    const arma::cx_mat &h_v, const arma::cx_mat &h_h,
                    const arma::cx_mat &n_v, const arma::cx_mat &n_h,
                    arma::cx_mat &hhat_v, arma::cx_mat &hhat_h);

// Uni-polarized benchmark estimator (single antenna per UE).
struct UniEstimator
{
    arma::cx_mat gamma, c, filter;
    double tr_gamma = 0.0;
    double p_w = 0.0;
};

UniEstimator estimate_covariances_uni(const arma::cx_mat &r_bs, double p_w,
                                      int tau_p, double sigma2_ul);

void estimate_batch_uni(const UniEstimator &est, int tau_p, double sigma2_ul,
                        const arma::cx_mat &h, const arma::cx_mat &n,
                        arma::cx_mat &hhat);

} // namespace dpmimo

#endif
