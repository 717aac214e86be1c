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

#include "dpmimo/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace dpmimo
{

arma::cx_mat hermitian_part(const arma::cx_mat &a)
{
    return 0.5 * (a + a.t());
}

double min_hermitian_eig(const arma::cx_mat &a)
{
    arma::vec ev;
    if (!arma::eig_sym(ev, hermitian_part(a)))
        throw std::runtime_error("min_hermitian_eig: eigendecomposition failed");
    return ev.min();
}

arma::cx_mat hermitian_sqrt(const arma::cx_mat &a, double rel_tol)
{
    arma::vec ev;
    arma::cx_mat vec;
    if (!arma::eig_sym(ev, vec, hermitian_part(a)))
        throw std::runtime_error("hermitian_sqrt: eigendecomposition failed");
    const double scale = std::abs(ev.max());
    if (scale > 0.0 && ev.min() < -rel_tol * scale)
        throw std::runtime_error("hermitian_sqrt: matrix is not PSD (min eigenvalue "
                                 + std::to_string(ev.min()) + ")");
    arma::vec root = arma::sqrt(arma::clamp(ev, 0.0, ev.max() > 0.0 ? ev.max() : 0.0));
    return vec * arma::diagmat(root) * vec.t();
}

arma::cx_mat psd_floor(const arma::cx_mat &a)
{
    arma::cx_mat h = hermitian_part(a);
    arma::vec ev;
    arma::cx_mat vec;
    if (!arma::eig_sym(ev, vec, h))
        throw std::runtime_error("psd_floor: eigendecomposition failed");
    if (ev.min() >= 0.0)
        return h;
    arma::vec fl = arma::clamp(ev, 0.0, ev.max() > 0.0 ? ev.max() : 0.0);
    return vec * arma::diagmat(fl) * vec.t();
}

HermPdFactor::HermPdFactor(const arma::cx_mat &a)
{
    if (!arma::chol(upper_, a))
        throw std::runtime_error("HermPdFactor: matrix is not positive definite");
}

arma::cx_mat HermPdFactor::solve(const arma::cx_mat &b) const
{
    arma::cx_mat y = arma::solve(arma::trimatl(upper_.t()), b);
    return arma::solve(arma::trimatu(upper_), y);
}

double HermPdFactor::logdet() const
{
    return 2.0 * arma::accu(arma::log(arma::real(upper_.diag())));
}

arma::cx_mat solve_hermpd(const arma::cx_mat &a, const arma::cx_mat &b)
{
    return HermPdFactor(a).solve(b);
}

double log2det_hermpd(const arma::cx_mat &b)
{
    return HermPdFactor(b).logdet() / std::log(2.0);
}

arma::cx_mat22 corr2_sqrt(std::complex<double> c)
{
    const double mag = std::abs(c);
    if (mag > 1.0)
        throw std::invalid_argument("corr2_sqrt: |correlation| must be <= 1");
    // Eigenvalues of [[1, c], [c*, 1]] are 1 +- |c| with eigenvectors
    // (phase, +-1)/sqrt(2); the PSD root keeps the unit diagonal structure.
    const double sp = std::sqrt(1.0 + mag);
    const double sm = std::sqrt(1.0 - mag);
    const double a = 0.5 * (sp + sm);
    const double b = 0.5 * (sp - sm);
    std::complex<double> phase = (mag > 0.0) ? c / mag : std::complex<double>(1.0, 0.0);
    arma::cx_mat22 out;
    out(0, 0) = a;
    out(0, 1) = phase * b;
    out(1, 0) = std::conj(phase) * b;
    out(1, 1) = a;
    return out;
}

} // namespace dpmimo
