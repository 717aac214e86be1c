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

#include "dpmimo/estimation.hpp"

#include <cmath>
#include <stdexcept>

#include "dpmimo/linalg.hpp"

namespace dpmimo
{

arma::cx_mat PilotBook::pilot_sequences(int k) const
{
    return v_all.cols(2 * k, 2 * k + 1);
}

arma::cx_mat PilotBook::pilot_signal(int k) const
{
    arma::cx_mat l_sqrt(2, 2, arma::fill::zeros);
    l_sqrt(0, 0) = std::sqrt(p_v_w(k));
    l_sqrt(1, 1) = std::sqrt(p_h_w(k));
    return l_sqrt * pilot_sequences(k).st();
}

PilotBook build_pilots(int num_ues, int tau_p, const arma::vec &p_v_w,
                       const arma::vec &p_h_w)
{
    if (tau_p < 2 * num_ues)
        throw std::invalid_argument("build_pilots: tau_p must be >= 2K");
    if (static_cast<int>(p_v_w.n_elem) != num_ues
        || static_cast<int>(p_h_w.n_elem) != num_ues)
        throw std::invalid_argument("build_pilots: one pilot power per UE required");
    if (p_v_w.min() < 0.0 || p_h_w.min() < 0.0)
        throw std::invalid_argument("build_pilots: pilot powers must be >= 0");

    PilotBook book;
    book.tau_p = tau_p;
    book.p_v_w = p_v_w;
    book.p_h_w = p_h_w;
    // DFT basis with unit-modulus entries: column inner products are tau_p
    // on the diagonal and zero off it.
    book.v_all.set_size(tau_p, 2 * num_ues);
    const double step = -2.0 * 3.14159265358979323846 / tau_p;
    for (int c = 0; c < 2 * num_ues; c++)
        for (int s = 0; s < tau_p; s++)
            book.v_all(s, c) = std::polar(1.0, step * static_cast<double>(s) * c);
    return book;
}

PilotBook build_pilots(int num_ues, int tau_p, double pilot_power_w)
{
    arma::vec p(num_ues, arma::fill::value(pilot_power_w));
    return build_pilots(num_ues, tau_p, p, p);
}

PolarizedEstimator estimate_covariances(const UEStatistics &ue, double p_v_w,
                                        double p_h_w, int tau_p, double sigma2_ul)
{
    if (p_v_w < 0.0 || p_h_w < 0.0 || sigma2_ul < 0.0 || tau_p <= 0)
        throw std::invalid_argument("estimate_covariances: invalid powers");

    const arma::uword m = ue.r_v.n_rows;
    const arma::cx_mat noise = sigma2_ul * arma::eye<arma::cx_mat>(m, m);

    PolarizedEstimator est;
    est.p_v_w = p_v_w;
    est.p_h_w = p_h_w;
    try
    {
        est.psi_v = HermPdFactor(p_v_w * tau_p * ue.r_v + noise)
                        .solve(arma::eye<arma::cx_mat>(m, m));
        est.psi_h = HermPdFactor(p_h_w * tau_p * ue.r_h + noise)
                        .solve(arma::eye<arma::cx_mat>(m, m));
    }
    catch (const std::runtime_error &)
    {
        throw std::runtime_error("estimate_covariances: pilot observation covariance "
                                 "is singular (sigma2 = 0 with rank-deficient R)");
    }
    est.gamma_v = p_v_w * tau_p * ue.r_v * est.psi_v * ue.r_v;
    est.gamma_h = p_h_w * tau_p * ue.r_h * est.psi_h * ue.r_h;
    est.c_v = ue.r_v - est.gamma_v;
    est.c_h = ue.r_h - est.gamma_h;
    est.filter_v = std::sqrt(p_v_w) * ue.r_v * est.psi_v;
    est.filter_h = std::sqrt(p_h_w) * ue.r_h * est.psi_h;
    est.tr_gamma_v = arma::trace(est.gamma_v).real();
    est.tr_gamma_h = arma::trace(est.gamma_h).real();
    return est;
}

arma::cx_mat received_pilot_signal(const std::vector<arma::cx_mat> &h_true,
                                   const PilotBook &pilots, double sigma2_ul,
                                   RngStream &rng)
{
    if (h_true.empty())
        throw std::invalid_argument("received_pilot_signal: no channels given");
    const arma::uword m = h_true.front().n_cols;
    arma::cx_mat y = std::sqrt(sigma2_ul) * rng.cgauss_mat(m, pilots.tau_p);
    for (std::size_t l = 0; l < h_true.size(); l++)
        y += h_true[l].t() * pilots.pilot_signal(static_cast<int>(l));
    return y;
}

std::pair<arma::cx_vec, arma::cx_vec>
mmse_estimate(const arma::cx_mat &y_received, const PilotBook &pilots,
              const PolarizedEstimator &est, int k)
{
    if (y_received.n_cols != static_cast<arma::uword>(pilots.tau_p))
        throw std::invalid_argument("mmse_estimate: pilot block size mismatch");
    const arma::cx_mat y_p = y_received * arma::conj(pilots.pilot_sequences(k));
    arma::cx_vec hhat_v = est.filter_v * y_p.col(0);
    arma::cx_vec hhat_h = est.filter_h * y_p.col(1);
    return {std::move(hhat_v), std::move(hhat_h)};
}

void estimate_batch(const PolarizedEstimator &est, int tau_p, double sigma2_ul,
                    const arma::cx_mat &h_v, const arma::cx_mat &h_h,
                    const arma::cx_mat &n_v, const arma::cx_mat &n_h,
                    arma::cx_mat &hhat_v, arma::cx_mat &hhat_h)
{
    // processed pilot column: tau sqrt(p) h + CN(0, sigma2 tau I)
    const double tau = static_cast<double>(tau_p);
    const double noise_scale = std::sqrt(sigma2_ul * tau);
    hhat_v = est.filter_v * (tau * std::sqrt(est.p_v_w) * h_v + noise_scale * n_v);
    hhat_h = est.filter_h * (tau * std::sqrt(est.p_h_w) * h_h + noise_scale * n_h);
}

UniEstimator estimate_covariances_uni(const arma::cx_mat &r_bs, double p_w,
                                      int tau_p, double sigma2_ul)
{
    if (p_w < 0.0 || sigma2_ul < 0.0 || tau_p <= 0)
        throw std::invalid_argument("estimate_covariances_uni: invalid powers");
    const arma::uword m = r_bs.n_rows;
    UniEstimator est;
    est.p_w = p_w;
    arma::cx_mat psi;
    try
    {
        psi = HermPdFactor(p_w * tau_p * r_bs + sigma2_ul * arma::eye<arma::cx_mat>(m, m))
                  .solve(arma::eye<arma::cx_mat>(m, m));
    }
    catch (const std::runtime_error &)
    {
        throw std::runtime_error("estimate_covariances_uni: singular pilot "
                                 "observation covariance");
    }
    est.gamma = p_w * tau_p * r_bs * psi * r_bs;
    est.c = r_bs - est.gamma;
    est.filter = std::sqrt(p_w) * r_bs * psi;
    est.tr_gamma = arma::trace(est.gamma).real();
    return est;
}

void estimate_batch_uni(const UniEstimator &est, int tau_p, double sigma2_ul,
                        const arma::cx_mat &h, const arma::cx_mat &n,
                        arma::cx_mat &hhat)
{
    const double tau = static_cast<double>(tau_p);
    hhat = est.filter * (tau * std::sqrt(est.p_w) * h + std::sqrt(sigma2_ul * tau) * n);
}

} // namespace dpmimo
