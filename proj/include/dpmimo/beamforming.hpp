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

#ifndef DPMIMO_BEAMFORMING_HPP
#define DPMIMO_BEAMFORMING_HPP

#include <armadillo>
#include <string>

namespace dpmimo
{

enum class Scheme
{
    mmse,
    zf,
    mr,
};

const char *to_string(Scheme s);
Scheme scheme_from_string(const std::string &s);

// Stream layout: estimated channels and combiners are stored column-wise as
// [h_1V h_1H ... h_KV h_KH] (M x 2K for dual polarization, M x K for the
// uni-polarized benchmark).

// Maximum ratio: the estimate itself.
arma::cx_mat combiner_mr(const arma::cx_mat &hhat_all);

// Zero-forcing: columns of Hhat (Hhat^H Hhat)^{-1}.  A rank-deficient Gram
// matrix is repaired with a 1e-12 * trace ridge and flagged.
arma::cx_mat combiner_zf(const arma::cx_mat &hhat_all, bool *ridged = nullptr);

// Interference-plus-noise whitened matched filter: v_j = sqrt(rho_j)
// Upsilon^{-1} hhat_j with Upsilon = Hhat diag(rho) Hhat^H + error_plus_noise,
// where error_plus_noise collects the weighted error covariances plus the
// noise floor (fixed per setup).
arma::cx_mat combiner_mmse(const arma::cx_mat &hhat_all, const arma::vec &rho_streams,
                           const arma::cx_mat &error_plus_noise);

// Precoding columns: w_j = sqrt(rho_dl_j / norm2_j) v_j where norm2_j is the
// mean square norm of the combiner column (exact trace for MR, Monte Carlo
// estimate otherwise).  A zero normalizer for a stream with nonzero power is
// a degenerate UE and raises std::invalid_argument.
arma::cx_mat precoder_from_combiner(const arma::cx_mat &v_all, const arma::vec &norm2,
                                    const arma::vec &rho_dl_streams);

// UE-side linear MMSE combiner for one downlink stream: (E{y y^H})^{-1}
// E{H w}; cov_y must be PD (the dl noise floor guarantees it).
arma::cx_vec ue_combiner_dl(const arma::cx_mat &cov_y, const arma::cx_vec &mean_hw);

} // namespace dpmimo

#endif
