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

#ifndef DPMIMO_SE_HPP
#define DPMIMO_SE_HPP

#include <armadillo>
#include <string>
#include <vector>

#include "dpmimo/beamforming.hpp"
#include "dpmimo/estimation.hpp"
#include "dpmimo/linalg.hpp"
#include "dpmimo/scenario.hpp"

namespace dpmimo
{

enum class Bound
{
    ul_uatf,
    ul_mr_closed,
    ul_sic,
    dl_linear,
    dl_sic,
    dl_mr_closed,
    uni_ul_uatf,
    uni_ul_mr_closed,
    uni_dl_uatf,
    uni_dl_mr_closed,
};

const char *to_string(Bound b);
Bound bound_from_string(const std::string &s);
bool is_uni_bound(Bound b);

// Spectral efficiencies in bit/s/Hz.  se_streams has one row per UE and one
// column per data stream (two for dual polarization, one for the benchmark).
// Standard errors come from batch means and are zero for closed forms.
struct SEReport
{
    std::string scheme;
    std::string bound;
    double prelog = 0.0;
    arma::mat se_streams;
    arma::vec se_per_ue;
    arma::vec se_per_ue_stderr;
    double sum_se = 0.0;
    double sum_se_stderr = 0.0;
    long trials = 0;
    bool zf_ridged = false;

    void finalize_from_streams(); // fills se_per_ue and sum_se
};

double prelog_factor(int tau_c, int tau_p);

// ------------------------------------------------------------------
// Monte Carlo moment accumulators.  Trials are aggregated into a fixed
// number of bins (contiguous trial ranges) so that batch-means standard
// errors can be formed; the bin map depends only on the trial index.
// ------------------------------------------------------------------

// Moments of bilinear forms between a combiner/precoder set and a channel
// set: E{v_j^H h_i}, E{|v_j^H h_i|^2} and E{||v_j||^2}.
class BilinearMomentBins
{
  public:
    void init(int n_left, int n_right, int n_bins);
    // g = left^H right is accumulated; left columns are combiners/precoders,
    // right columns channels.
    void add(int bin, const arma::cx_mat &left, const arma::cx_mat &right);
    int n_bins() const { return static_cast<int>(counts_.size()); }
    long trials() const;

    arma::cx_mat mean_g(int bin = -1) const; // bin < 0: pooled
    arma::mat mean_abs2(int bin = -1) const;
    arma::vec mean_left_norm2(int bin = -1) const;

  private:
    std::vector<arma::cx_mat> g_;
    std::vector<arma::mat> abs2_;
    std::vector<arma::vec> norm2_;
    std::vector<long> counts_;
};

// Downlink per-UE 2x2 moments: E{H_k W_l} for all l and
// E{H_k (sum_l W_l W_l^H) H_k^H}.
class DlMomentBins
{
  public:
    void init(int num_ues, int n_bins);
    // g_dl = H_all^H W_all evaluated on one trial (2K x 2K).
    void add(int bin, const arma::cx_mat &g_dl);
    int n_bins() const { return static_cast<int>(counts_.size()); }
    long trials() const;

    arma::cx_mat mean_hw(int k, int bin = -1) const;  // 2 x 2K
    arma::cx_mat mean_hzh(int k, int bin = -1) const; // 2 x 2

  private:
    int num_ues_ = 0;
    std::vector<std::vector<arma::cx_mat>> hw_;
    std::vector<std::vector<arma::cx_mat>> hzh_;
    std::vector<long> counts_;
};

// Per-trial MMSE-SIC values (uplink).  The fixed matrix collects the power-
// weighted error covariances plus the noise floor and is shared by every
// trial of a setup.
class SicBins
{
  public:
    void init(int num_ues, int n_bins, bool per_ue);
    void add_trial(int bin, const arma::cx_mat &hhat_all, const arma::vec &rho_streams,
                   const arma::cx_mat &fixed, const HermPdFactor &fixed_chol);
    bool per_ue() const { return per_ue_; }
    long trials() const;
    int n_bins() const { return static_cast<int>(counts_.size()); }

    double mean_sum(int bin = -1) const;
    arma::vec mean_per_ue(int bin = -1) const;

  private:
    bool per_ue_ = false;
    int num_ues_ = 0;
    std::vector<double> sum_;
    std::vector<arma::vec> per_ue_sum_;
    std::vector<long> counts_;
};

// Per-realization SIC quantities, exposed for the identity checks.
double sic_sum_log2det(const arma::cx_mat &hhat_all, const arma::vec &rho_streams,
                       const arma::cx_mat &fixed, const HermPdFactor &fixed_chol);
arma::vec sic_per_ue_log2det(const arma::cx_mat &hhat_all, const arma::vec &rho_streams,
                             const arma::cx_mat &fixed);

// ------------------------------------------------------------------
// Bound evaluators
// ------------------------------------------------------------------

// Uplink hardening (use-and-then-forget) bound from estimated moments; the
// stream powers follow the column layout of the moment matrices.
SEReport se_ul_uatf(const BilinearMomentBins &m, const arma::vec &rho_streams,
                    double sigma2_ul, double prelog, int streams_per_ue);

// Uplink MMSE-SIC bound from per-trial log-dets.
SEReport se_ul_sic(const SicBins &m, double prelog);

// Downlink bound with per-stream UE-side linear MMSE combining.
SEReport se_dl_linear(const DlMomentBins &m, double sigma2_dl, double prelog);

// Downlink bound with UE-side MMSE-SIC over the two polarizations.
SEReport se_dl_sic(const DlMomentBins &m, double sigma2_dl, double prelog);

// Downlink benchmark bound for single-antenna UEs; moments hold precoder
// against channel columns (powers are inside the precoders).
SEReport se_uni_dl_uatf(const BilinearMomentBins &m, double sigma2_dl, double prelog);

// ------------------------------------------------------------------
// Closed forms (MR with MMSE estimates)
// ------------------------------------------------------------------

SEReport se_ul_mr_closed(const std::vector<UEStatistics> &ues,
                         const std::vector<PolarizedEstimator> &est,
                         const arma::vec &rho_v, const arma::vec &rho_h,
                         double sigma2_ul, double prelog);

SEReport se_dl_mr_closed(const std::vector<UEStatistics> &ues,
                         const std::vector<PolarizedEstimator> &est,
                         const arma::vec &rho_v, const arma::vec &rho_h,
                         double sigma2_dl, double prelog);

// Scalar coefficients of the spatially uncorrelated specialization: the MMSE
// estimate variance per antenna slot, computed from (beta, q) and the pilot
// powers.
struct UncorrCoeffs
{
    arma::vec beta, q;
    arma::vec g_v1, g_v2; // V-polarization slots: co-polar / cross-polar
    arma::vec g_h1, g_h2; // H-polarization slots: co-polar / cross-polar
};

UncorrCoeffs uncorr_coeffs(const arma::vec &beta, const arma::vec &q,
                           const arma::vec &p_v, const arma::vec &p_h,
                           int tau_p, double sigma2_ul);

SEReport se_ul_mr_closed_uncorr(int m_ports, const UncorrCoeffs &c,
                                const arma::vec &rho_v, const arma::vec &rho_h,
                                double sigma2_ul, double prelog);

SEReport se_dl_mr_closed_uncorr(int m_ports, const UncorrCoeffs &c,
                                const arma::vec &rho_v, const arma::vec &rho_h,
                                double sigma2_dl, double prelog);

// Uni-polarized benchmark closed forms (hardening bound with MR).
SEReport se_uni_ul_mr_closed(const std::vector<UniUEStatistics> &ues,
                             const std::vector<UniEstimator> &est,
                             const arma::vec &rho, double sigma2_ul, double prelog);

SEReport se_uni_dl_mr_closed(const std::vector<UniUEStatistics> &ues,
                             const std::vector<UniEstimator> &est,
                             const arma::vec &rho, double sigma2_dl, double prelog);

} // namespace dpmimo

#endif
