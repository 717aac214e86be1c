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

#ifndef DPMIMO_LINALG_HPP
#define DPMIMO_LINALG_HPP

#include <armadillo>
#include <complex>

namespace dpmimo
{

// (A + A^H) / 2
arma::cx_mat hermitian_part(const arma::cx_mat &a);

// Smallest eigenvalue of the Hermitian part of a.
double min_hermitian_eig(const arma::cx_mat &a);

// Unique PSD square root via eigendecomposition.  Eigenvalues are clamped at
// zero to repair rounding; an eigenvalue below -rel_tol * max|lambda| means
// the input is not PSD and raises std::runtime_error.
arma::cx_mat hermitian_sqrt(const arma::cx_mat &a, double rel_tol = 1e-10);

// Clamp negative eigenvalues at zero.  Returns the Hermitian part unchanged
// when no eigenvalue is negative, so exact inputs pass through untouched.
arma::cx_mat psd_floor(const arma::cx_mat &a);

// Cholesky factorization of a Hermitian positive-definite matrix, kept around
// for repeated solves and log-determinants.  Throws std::runtime_error if the
// factorization fails (matrix not PD).
class HermPdFactor
{
  public:
    explicit HermPdFactor(const arma::cx_mat &a);

    arma::cx_mat solve(const arma::cx_mat &b) const;
    double logdet() const; // natural log of det

  private:
    arma::cx_mat upper_;
};

// One-shot PD solve; throws std::runtime_error if the matrix is not PD.
arma::cx_mat solve_hermpd(const arma::cx_mat &a, const arma::cx_mat &b);

// log2 det(I + A) for Hermitian PSD A given through B = I + A (must be PD).
double log2det_hermpd(const arma::cx_mat &b);

// PSD square root of a 2x2 correlation matrix [[1, c], [conj(c), 1]].
// Requires |c| <= 1.
arma::cx_mat22 corr2_sqrt(std::complex<double> c);

} // namespace dpmimo

#endif
