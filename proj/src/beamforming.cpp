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

#include "dpmimo/beamforming.hpp"

#include <cmath>
#include <stdexcept>

#include "dpmimo/linalg.hpp"

namespace dpmimo
{

const char *to_string(Scheme s)
{
    switch (s)
    {
    case Scheme::mmse: return "mmse";
    case Scheme::zf: return "zf";
    case Scheme::mr: return "mr";
    }
    return "?";
}

Scheme scheme_from_string(const std::string &s)
{
    if (s == "mmse")
        return Scheme::mmse;
    if (s == "zf")
        return Scheme::zf;
    if (s == "mr")
        return Scheme::mr;
    throw std::invalid_argument("unknown scheme '" + s + "' (expected mmse, zf or mr)");
}

arma::cx_mat combiner_mr(const arma::cx_mat &hhat_all)
{
    return hhat_all;
}

arma::cx_mat combiner_zf(const arma::cx_mat &hhat_all, bool *ridged)
{
    arma::cx_mat gram = hhat_all.t() * hhat_all;
    if (ridged != nullptr)
        *ridged = false;

    // Rank deficiency shows up as a failed factorization or a vanishing
    // Cholesky pivot; repair with a small ridge and flag it.
    const double mean_diag = arma::trace(gram).real() / std::max<arma::uword>(1, gram.n_rows);
    bool deficient = false;
    arma::cx_mat upper;
    if (!arma::chol(upper, gram))
        deficient = true;
    else
    {
        const double min_pivot = arma::real(upper.diag()).min();
        deficient = (min_pivot * min_pivot <= 1e-12 * mean_diag);
    }
    if (deficient)
    {
        gram.diag() += 1e-12 * arma::trace(gram).real();
        if (ridged != nullptr)
            *ridged = true;
        return HermPdFactor(gram).solve(hhat_all.t()).t();
    }
    arma::cx_mat sol = arma::solve(arma::trimatl(upper.t()), hhat_all.t());
    sol = arma::solve(arma::trimatu(upper), sol);
    return sol.t();
}

arma::cx_mat combiner_mmse(const arma::cx_mat &hhat_all, const arma::vec &rho_streams,
                           const arma::cx_mat &error_plus_noise)
{
    if (rho_streams.n_elem != hhat_all.n_cols)
        throw std::invalid_argument("combiner_mmse: one power per stream required");
    arma::cx_mat upsilon = error_plus_noise;
    upsilon += hhat_all * arma::diagmat(arma::conv_to<arma::cx_vec>::from(rho_streams))
               * hhat_all.t();
    // Factorization doubles as the positive-definiteness check.
    arma::cx_mat v = HermPdFactor(upsilon).solve(hhat_all);
    for (arma::uword j = 0; j < v.n_cols; j++)
        v.col(j) *= std::sqrt(rho_streams(j));
    return v;
}

arma::cx_mat precoder_from_combiner(const arma::cx_mat &v_all, const arma::vec &norm2,
                                    const arma::vec &rho_dl_streams)
{
    if (norm2.n_elem != v_all.n_cols || rho_dl_streams.n_elem != v_all.n_cols)
        throw std::invalid_argument("precoder_from_combiner: size mismatch");
    arma::cx_mat w = v_all;
    for (arma::uword j = 0; j < w.n_cols; j++)
    {
        if (rho_dl_streams(j) == 0.0)
        {
            w.col(j).zeros();
            continue;
        }
        if (!(norm2(j) > 0.0))
            throw std::invalid_argument("precoder_from_combiner: zero mean square norm "
                                        "for a stream with nonzero power");
        w.col(j) *= std::sqrt(rho_dl_streams(j) / norm2(j));
    }
    return w;
}

arma::cx_vec ue_combiner_dl(const arma::cx_mat &cov_y, const arma::cx_vec &mean_hw)
{
    if (!cov_y.is_square() || cov_y.n_rows != mean_hw.n_elem)
        throw std::invalid_argument("ue_combiner_dl: size mismatch");
    return solve_hermpd(cov_y, arma::cx_mat(mean_hw));
}

} // namespace dpmimo
