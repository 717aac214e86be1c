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

#include "dpmimo/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "dpmimo/linalg.hpp"

namespace dpmimo
{

XpcMatrices XpcMatrices::make(std::complex<double> t, std::complex<double> r)
{
    if (std::abs(t) > 1.0 || std::abs(r) > 1.0)
        throw std::invalid_argument("XpcMatrices: |t| and |r| must be <= 1");
    XpcMatrices x;
    x.c_bs = arma::cx_mat22(arma::fill::eye);
    x.c_bs(0, 1) = t;
    x.c_bs(1, 0) = std::conj(t);
    x.c_ue = arma::cx_mat22(arma::fill::eye);
    x.c_ue(0, 1) = r;
    x.c_ue(1, 0) = std::conj(r);
    x.c_bs_sqrt = corr2_sqrt(t);
    x.c_ue_sqrt = corr2_sqrt(r);
    return x;
}

namespace
{

bool has_xpc(const UEStatistics &ue)
{
    return std::abs(ue.t) != 0.0 || std::abs(ue.r) != 0.0;
}

// Leakage mask applied to the rows of the column-stacked channels: the V
// channel keeps sqrt(1-q) on V ports (even rows) and sqrt(q) on H ports,
// and the H channel the other way around.
void apply_leakage_mask(double q, arma::cx_mat &h_v, arma::cx_mat &h_h)
{
    const double co = std::sqrt(1.0 - q);
    const double cross = std::sqrt(q);
    const arma::uword m = h_v.n_rows;
    for (arma::uword i = 0; i < m; i += 2)
    {
        h_v.row(i) *= co;
        h_v.row(i + 1) *= cross;
        h_h.row(i) *= cross;
        h_h.row(i + 1) *= co;
    }
}

} // namespace

void transform_channels(const UEStatistics &ue,
                        const arma::cx_mat &s_v, const arma::cx_mat &s_h,
                        arma::cx_mat &h_v, arma::cx_mat &h_h)
{
    if (!has_xpc(ue))
    {
        h_v = ue.r_v_sqrt * s_v;
        h_h = ue.r_h_sqrt * s_h;
        return;
    }

    const XpcMatrices xpc = XpcMatrices::make(ue.t, ue.r);

    // BS-side spatial correlation first
    arma::cx_mat g_v = ue.r_half * s_v;
    arma::cx_mat g_h = ue.r_half * s_h;

    // UE-side 2x2 mixing across the polarization rows; in column form the
    // row operation row_i^H = sum_j c_ij row_j^H becomes col_i = sum_j
    // conj(c_ij) col_j.
    const std::complex<double> a = xpc.c_ue_sqrt(0, 0); // real by construction
    const std::complex<double> b = xpc.c_ue_sqrt(0, 1);
    h_v = a.real() * g_v + std::conj(b) * g_h;
    h_h = b * g_v + a.real() * g_h;

    // BS-side 2x2 mixing within each dual-polarized antenna.  The stored
    // columns are the conjugates of the channel-matrix rows, so the row-space
    // right-multiplication by the Hermitian root becomes a left-multiplication
    // by its conjugate here.
    const arma::cx_mat22 c_bs_conj = arma::conj(xpc.c_bs_sqrt);
    const arma::uword m = h_v.n_rows;
    for (arma::uword i = 0; i < m; i += 2)
    {
        h_v.rows(i, i + 1) = c_bs_conj * h_v.rows(i, i + 1);
        h_h.rows(i, i + 1) = c_bs_conj * h_h.rows(i, i + 1);
    }

    apply_leakage_mask(ue.q, h_v, h_h);
}

namespace
{

arma::cx_mat rows_from_columns(const arma::cx_vec &h_v, const arma::cx_vec &h_h)
{
    arma::cx_mat h(2, h_v.n_elem);
    h.row(0) = h_v.t();
    h.row(1) = h_h.t();
    return h;
}

} // namespace

arma::cx_mat sample_channel_uncorr_xpc(const UEStatistics &ue, RngStream &rng)
{
    if (has_xpc(ue))
        throw std::invalid_argument("sample_channel_uncorr_xpc: UE has nonzero XPC, "
                                    "use sample_channel_general");
    const arma::uword m = ue.r_v.n_rows;
    arma::cx_mat s_v = rng.cgauss_mat(m, 1);
    arma::cx_mat s_h = rng.cgauss_mat(m, 1);
    arma::cx_mat h_v, h_h;
    transform_channels(ue, s_v, s_h, h_v, h_h);
    return rows_from_columns(h_v.col(0), h_h.col(0));
}

arma::cx_mat sample_channel_general(const UEStatistics &ue, RngStream &rng)
{
    const arma::uword m = ue.r_v.n_rows;
    arma::cx_mat s_v = rng.cgauss_mat(m, 1);
    arma::cx_mat s_h = rng.cgauss_mat(m, 1);
    arma::cx_mat h_v, h_h;
    transform_channels(ue, s_v, s_h, h_v, h_h);
    return rows_from_columns(h_v.col(0), h_h.col(0));
}

std::pair<double, arma::cx_vec> eigenbeamforming_scale(const arma::cx_mat &r_ue)
{
    if (!r_ue.is_square())
        throw std::invalid_argument("eigenbeamforming_scale: matrix must be square");
    const double scale = arma::norm(r_ue, "fro");
    if (scale > 0.0 && arma::norm(r_ue - r_ue.t(), "fro") > 1e-10 * scale)
        throw std::invalid_argument("eigenbeamforming_scale: matrix must be Hermitian");

    arma::vec ev;
    arma::cx_mat vec;
    if (!arma::eig_sym(ev, vec, hermitian_part(r_ue)))
        throw std::runtime_error("eigenbeamforming_scale: eigendecomposition failed");
    const arma::uword top = ev.n_elem - 1; // eig_sym sorts ascending
    return {ev(top), vec.col(top)};
}

} // namespace dpmimo
