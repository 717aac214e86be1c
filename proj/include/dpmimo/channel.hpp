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

#ifndef DPMIMO_CHANNEL_HPP
#define DPMIMO_CHANNEL_HPP

#include <armadillo>
#include <complex>
#include <utility>

#include "dpmimo/rng.hpp"
#include "dpmimo/scenario.hpp"

namespace dpmimo
{

// 2x2 cross-polar correlation matrices with unit diagonal, plus their PSD
// roots used by the sampler.
struct XpcMatrices
{
    arma::cx_mat22 c_bs, c_ue;
    arma::cx_mat22 c_bs_sqrt, c_ue_sqrt;

    // Throws std::invalid_argument when |t| > 1 or |r| > 1.
    static XpcMatrices make(std::complex<double> t, std::complex<double> r);
};

// One channel draw for a UE without cross-polar correlation (t = r = 0):
// h_V = R_v^{1/2} s_V, h_H = R_h^{1/2} s_H with i.i.d. CN(0,1) vectors.
// Returns the 2 x M matrix whose rows are h_V^H and h_H^H.
arma::cx_mat sample_channel_uncorr_xpc(const UEStatistics &ue, RngStream &rng);

// General draw with cross-polar correlation: BS-side spatial correlation is
// applied first (length-2M correlated draw), then per dual antenna the 2x2
// XPC mixing on both sides, then the leakage mask.
arma::cx_mat sample_channel_general(const UEStatistics &ue, RngStream &rng);

// Column-vector form of the two rows of a channel draw; the batched samplers
// below write h_V / h_H of trial t into column t.
// Raw draws are taken per trial from the provided streams so the output is
// independent of how trials are grouped into batches.

// Transforms pre-drawn i.i.d. CN(0,1) matrices s_v, s_h (M x T) into channel
// columns according to the UE statistics (general XPC path when t or r is
// nonzero).  Outputs are M x T.
void transform_channels(const UEStatistics &ue,
                        const arma::cx_mat &s_v, const arma::cx_mat &s_h,
                        arma::cx_mat &h_v, arma::cx_mat &h_h);

// Dominant eigenpair of the UE-side spatial correlation matrix; the scaling
// lambda is the statistical beamforming gain obtained when a multi-antenna
// UE transmits one stream per polarization through the eigenvector.
std::pair<double, arma::cx_vec> eigenbeamforming_scale(const arma::cx_mat &r_ue);

} // namespace dpmimo

#endif
