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

#include "dpmimo/se.hpp"

#include <cmath>
#include <stdexcept>

namespace dpmimo
{

const char *to_string(Bound b)
{
    switch (b)
    {
    case Bound::ul_uatf: return "ul-uatf";
    case Bound::ul_mr_closed: return "ul-mr-closed";
    case Bound::ul_sic: return "ul-sic";
    case Bound::dl_linear: return "dl-linear";
    case Bound::dl_sic: return "dl-sic";
    case Bound::dl_mr_closed: return "dl-mr-closed";
    case Bound::uni_ul_uatf: return "uni-ul-uatf";
    case Bound::uni_ul_mr_closed: return "uni-ul-mr-closed";
    case Bound::uni_dl_uatf: return "uni-dl-uatf";
    case Bound::uni_dl_mr_closed: return "uni-dl-mr-closed";
    }
    return "?";
}

Bound bound_from_string(const std::string &s)
{
    for (Bound b : {Bound::ul_uatf, Bound::ul_mr_closed, Bound::ul_sic,
                    Bound::dl_linear, Bound::dl_sic, Bound::dl_mr_closed,
                    Bound::uni_ul_uatf, Bound::uni_ul_mr_closed,
                    Bound::uni_dl_uatf, Bound::uni_dl_mr_closed})
        if (s == to_string(b))
            return b;
    throw std::invalid_argument("unknown bound '" + s + "'");
}

bool is_uni_bound(Bound b)
{
    return b == Bound::uni_ul_uatf || b == Bound::uni_ul_mr_closed
           || b == Bound::uni_dl_uatf || b == Bound::uni_dl_mr_closed;
}

void SEReport::finalize_from_streams()
{
    se_per_ue = arma::sum(se_streams, 1);
    sum_se = arma::accu(se_per_ue);
}

double prelog_factor(int tau_c, int tau_p)
{
    if (tau_c <= 0 || tau_p < 0 || tau_p > tau_c)
        throw std::invalid_argument("prelog_factor: need 0 <= tau_p <= tau_c");
    return static_cast<double>(tau_c - tau_p) / static_cast<double>(tau_c);
}

// ------------------------------------------------------------------
// accumulators
// ------------------------------------------------------------------

void BilinearMomentBins::init(int n_left, int n_right, int n_bins)
{
    g_.assign(n_bins, arma::cx_mat(n_left, n_right, arma::fill::zeros));
    abs2_.assign(n_bins, arma::mat(n_left, n_right, arma::fill::zeros));
    norm2_.assign(n_bins, arma::vec(n_left, arma::fill::zeros));
    counts_.assign(n_bins, 0);
}

void BilinearMomentBins::add(int bin, const arma::cx_mat &left, const arma::cx_mat &right)
{
    arma::cx_mat g = left.t() * right;
    g_[bin] += g;
    abs2_[bin] += arma::square(arma::abs(g));
    norm2_[bin] += arma::sum(arma::square(arma::abs(left)), 0).t();
    counts_[bin]++;
}

long BilinearMomentBins::trials() const
{
    long n = 0;
    for (long c : counts_)
        n += c;
    return n;
}

namespace
{

template <typename T>
T pooled_mean(const std::vector<T> &bins, const std::vector<long> &counts)
{
    T total = bins.front();
    total.zeros();
    long n = 0;
    for (std::size_t i = 0; i < bins.size(); i++)
    {
        total += bins[i];
        n += counts[i];
    }
    if (n == 0)
        throw std::runtime_error("moment accumulator is empty");
    return total / static_cast<double>(n);
}

} // namespace

arma::cx_mat BilinearMomentBins::mean_g(int bin) const
{
    if (bin < 0)
        return pooled_mean(g_, counts_);
    return g_[bin] / static_cast<double>(counts_[bin]);
}

arma::mat BilinearMomentBins::mean_abs2(int bin) const
{
    if (bin < 0)
        return pooled_mean(abs2_, counts_);
    return abs2_[bin] / static_cast<double>(counts_[bin]);
}

arma::vec BilinearMomentBins::mean_left_norm2(int bin) const
{
    if (bin < 0)
        return pooled_mean(norm2_, counts_);
    return norm2_[bin] / static_cast<double>(counts_[bin]);
}

void DlMomentBins::init(int num_ues, int n_bins)
{
    num_ues_ = num_ues;
    hw_.assign(n_bins, std::vector<arma::cx_mat>(
                           num_ues, arma::cx_mat(2, 2 * num_ues, arma::fill::zeros)));
    hzh_.assign(n_bins, std::vector<arma::cx_mat>(
                            num_ues, arma::cx_mat(2, 2, arma::fill::zeros)));
    counts_.assign(n_bins, 0);
}

void DlMomentBins::add(int bin, const arma::cx_mat &g_dl)
{
    for (int k = 0; k < num_ues_; k++)
    {
        arma::cx_mat rows = g_dl.rows(2 * k, 2 * k + 1);
        hw_[bin][k] += rows;
        hzh_[bin][k] += rows * rows.t();
    }
    counts_[bin]++;
}

long DlMomentBins::trials() const
{
    long n = 0;
    for (long c : counts_)
        n += c;
    return n;
}

arma::cx_mat DlMomentBins::mean_hw(int k, int bin) const
{
    if (bin >= 0)
        return hw_[bin][k] / static_cast<double>(counts_[bin]);
    arma::cx_mat total(2, 2 * num_ues_, arma::fill::zeros);
    long n = 0;
    for (std::size_t b = 0; b < hw_.size(); b++)
    {
        total += hw_[b][k];
        n += counts_[b];
    }
    return total / static_cast<double>(n);
}

arma::cx_mat DlMomentBins::mean_hzh(int k, int bin) const
{
    if (bin >= 0)
        return hzh_[bin][k] / static_cast<double>(counts_[bin]);
    arma::cx_mat total(2, 2, arma::fill::zeros);
    long n = 0;
    for (std::size_t b = 0; b < hzh_.size(); b++)
    {
        total += hzh_[b][k];
        n += counts_[b];
    }
    return total / static_cast<double>(n);
}

// ------------------------------------------------------------------
// MMSE-SIC per-realization values
// ------------------------------------------------------------------

double sic_sum_log2det(const arma::cx_mat &hhat_all, const arma::vec &rho_streams,
                       const arma::cx_mat &fixed, const HermPdFactor &fixed_chol)
{
    arma::cx_mat full = fixed;
    full += hhat_all * arma::diagmat(arma::conv_to<arma::cx_vec>::from(rho_streams))
            * hhat_all.t();
    const double ln2 = std::log(2.0);
    return (HermPdFactor(full).logdet() - fixed_chol.logdet()) / ln2;
}

arma::vec sic_per_ue_log2det(const arma::cx_mat &hhat_all, const arma::vec &rho_streams,
                             const arma::cx_mat &fixed)
{
    const int num_ues = static_cast<int>(hhat_all.n_cols) / 2;
    arma::vec out(num_ues, arma::fill::zeros);
    // Decoding order: UE index ascending, V before H.  UE k sees the not yet
    // decoded UEs l > k plus every estimation error.
    arma::cx_mat remaining = fixed;
    for (int k = num_ues - 1; k >= 0; k--)
    {
        const arma::cx_mat hk = hhat_all.cols(2 * k, 2 * k + 1); // M x 2
        arma::cx_mat s = hk.t() * HermPdFactor(remaining).solve(hk); // 2 x 2
        const double rv = rho_streams(2 * k);
        const double rh = rho_streams(2 * k + 1);
        const double det = (1.0 + rv * s(0, 0).real()) * (1.0 + rh * s(1, 1).real())
                           - rv * rh * std::norm(s(0, 1));
        out(k) = std::log2(det);
        if (k > 0)
        {
            remaining += rv * hk.col(0) * hk.col(0).t();
            remaining += rh * hk.col(1) * hk.col(1).t();
        }
    }
    return out;
}

void SicBins::init(int num_ues, int n_bins, bool per_ue)
{
    num_ues_ = num_ues;
    per_ue_ = per_ue;
    sum_.assign(n_bins, 0.0);
    per_ue_sum_.assign(n_bins, arma::vec(num_ues, arma::fill::zeros));
    counts_.assign(n_bins, 0);
}

void SicBins::add_trial(int bin, const arma::cx_mat &hhat_all, const arma::vec &rho_streams,
                        const arma::cx_mat &fixed, const HermPdFactor &fixed_chol)
{
    if (per_ue_)
    {
        arma::vec per_ue = sic_per_ue_log2det(hhat_all, rho_streams, fixed);
        per_ue_sum_[bin] += per_ue;
        sum_[bin] += arma::accu(per_ue);
    }
    else
    {
        sum_[bin] += sic_sum_log2det(hhat_all, rho_streams, fixed, fixed_chol);
    }
    counts_[bin]++;
}

long SicBins::trials() const
{
    long n = 0;
    for (long c : counts_)
        n += c;
    return n;
}

double SicBins::mean_sum(int bin) const
{
    if (bin >= 0)
        return sum_[bin] / static_cast<double>(counts_[bin]);
    double total = 0.0;
    long n = 0;
    for (std::size_t b = 0; b < sum_.size(); b++)
    {
        total += sum_[b];
        n += counts_[b];
    }
    return total / static_cast<double>(n);
}

arma::vec SicBins::mean_per_ue(int bin) const
{
    if (!per_ue_)
        throw std::runtime_error("SicBins: per-UE values were not collected");
    if (bin >= 0)
        return per_ue_sum_[bin] / static_cast<double>(counts_[bin]);
    arma::vec total(num_ues_, arma::fill::zeros);
    long n = 0;
    for (std::size_t b = 0; b < per_ue_sum_.size(); b++)
    {
        total += per_ue_sum_[b];
        n += counts_[b];
    }
    return total / static_cast<double>(n);
}

// ------------------------------------------------------------------
// bound evaluators
// ------------------------------------------------------------------

namespace
{

// Standard error of per-UE and sum SE over the bins.
void fill_stderr(SEReport &rep, const std::vector<arma::vec> &per_ue_bins)
{
    const auto n_bins = static_cast<double>(per_ue_bins.size());
    if (n_bins < 2)
    {
        rep.se_per_ue_stderr = arma::vec(rep.se_per_ue.n_elem, arma::fill::zeros);
        rep.sum_se_stderr = 0.0;
        return;
    }
    arma::mat all(rep.se_per_ue.n_elem, per_ue_bins.size());
    for (std::size_t b = 0; b < per_ue_bins.size(); b++)
        all.col(b) = per_ue_bins[b];
    rep.se_per_ue_stderr = arma::stddev(all, 0, 1) / std::sqrt(n_bins);
    arma::rowvec sums = arma::sum(all, 0);
    rep.sum_se_stderr = arma::stddev(sums.t()) / std::sqrt(n_bins);
}

arma::vec uatf_per_ue(const arma::cx_mat &mean_g, const arma::mat &mean_abs2,
                      const arma::vec &mean_norm2, const arma::vec &rho_streams,
                      double sigma2, double prelog, int streams_per_ue,
                      arma::mat *streams_out)
{
    const int n_streams = static_cast<int>(rho_streams.n_elem);
    const int num_ues = n_streams / streams_per_ue;
    arma::mat streams(num_ues, streams_per_ue, arma::fill::zeros);
    for (int j = 0; j < n_streams; j++)
    {
        const double signal = rho_streams(j) * std::norm(mean_g(j, j));
        double denom = sigma2 * mean_norm2(j) - signal;
        for (int i = 0; i < n_streams; i++)
            denom += rho_streams(i) * mean_abs2(j, i);
        double se = 0.0;
        if (signal > 0.0)
        {
            if (denom <= 0.0)
                throw std::runtime_error("uatf: estimated interference-plus-noise is "
                                         "not positive; increase the trial count");
            se = prelog * std::log2(1.0 + signal / denom);
        }
        streams(j / streams_per_ue, j % streams_per_ue) = se;
    }
    if (streams_out != nullptr)
        *streams_out = streams;
    return arma::sum(streams, 1);
}

} // namespace

SEReport se_ul_uatf(const BilinearMomentBins &m, const arma::vec &rho_streams,
                    double sigma2_ul, double prelog, int streams_per_ue)
{
    SEReport rep;
    rep.bound = to_string(Bound::ul_uatf);
    rep.prelog = prelog;
    rep.trials = m.trials();
    rep.se_per_ue = uatf_per_ue(m.mean_g(), m.mean_abs2(), m.mean_left_norm2(),
                                rho_streams, sigma2_ul, prelog, streams_per_ue,
                                &rep.se_streams);
    rep.sum_se = arma::accu(rep.se_per_ue);

    std::vector<arma::vec> bins;
    bins.reserve(m.n_bins());
    for (int b = 0; b < m.n_bins(); b++)
        bins.push_back(uatf_per_ue(m.mean_g(b), m.mean_abs2(b), m.mean_left_norm2(b),
                                   rho_streams, sigma2_ul, prelog, streams_per_ue,
                                   nullptr));
    fill_stderr(rep, bins);
    return rep;
}

SEReport se_ul_sic(const SicBins &m, double prelog)
{
    SEReport rep;
    rep.bound = to_string(Bound::ul_sic);
    rep.prelog = prelog;
    rep.trials = m.trials();
    if (m.per_ue())
    {
        rep.se_per_ue = prelog * m.mean_per_ue();
        rep.se_streams = rep.se_per_ue; // joint over the two streams
        rep.sum_se = arma::accu(rep.se_per_ue);
        std::vector<arma::vec> bins;
        for (int b = 0; b < m.n_bins(); b++)
            bins.push_back(prelog * m.mean_per_ue(b));
        fill_stderr(rep, bins);
    }
    else
    {
        rep.sum_se = prelog * m.mean_sum();
        arma::vec sums(m.n_bins());
        for (int b = 0; b < m.n_bins(); b++)
            sums(b) = prelog * m.mean_sum(b);
        rep.sum_se_stderr = (m.n_bins() > 1)
                                ? arma::stddev(sums) / std::sqrt(static_cast<double>(m.n_bins()))
                                : 0.0;
    }
    return rep;
}

namespace
{

arma::vec dl_per_ue(const DlMomentBins &m, double sigma2_dl, double prelog, bool sic,
                    int bin, arma::mat *streams_out)
{
    // number of UEs from the stored layout
    const arma::cx_mat probe = m.mean_hw(0, bin);
    const int num_ues = static_cast<int>(probe.n_cols) / 2;
    arma::mat streams(num_ues, 2, arma::fill::zeros);
    const arma::cx_mat eye2 = arma::eye<arma::cx_mat>(2, 2);
    for (int k = 0; k < num_ues; k++)
    {
        const arma::cx_mat hw = m.mean_hw(k, bin);
        const arma::cx_mat cov_y = m.mean_hzh(k, bin) + sigma2_dl * eye2;
        const arma::cx_mat d = hw.cols(2 * k, 2 * k + 1); // E{H_k W_k}
        if (sic)
        {
            const arma::cx_mat omega_inv = cov_y - d * d.t();
            const arma::cx_mat inner = eye2 + d.t() * solve_hermpd(omega_inv, d);
            const double se = prelog * log2det_hermpd(inner);
            streams(k, 0) = 0.5 * se; // joint bound, split evenly for reporting
            streams(k, 1) = 0.5 * se;
        }
        else
        {
            for (int i = 0; i < 2; i++)
            {
                const arma::cx_vec mean_hw_i = d.col(i);
                if (arma::norm(mean_hw_i) == 0.0)
                    continue;
                const arma::cx_vec v = ue_combiner_dl(cov_y, mean_hw_i);
                const std::complex<double> vm = arma::cdot(v, mean_hw_i);
                const double num = std::norm(vm);
                const double quad = arma::cdot(v, cov_y * v).real();
                const double den = quad - num;
                if (den <= 0.0)
                    throw std::runtime_error("dl-linear: estimated interference-plus-"
                                             "noise is not positive; increase trials");
                streams(k, i) = prelog * std::log2(1.0 + num / den);
            }
        }
    }
    if (streams_out != nullptr)
        *streams_out = streams;
    return arma::sum(streams, 1);
}

SEReport dl_report(const DlMomentBins &m, double sigma2_dl, double prelog, bool sic)
{
    SEReport rep;
    rep.bound = to_string(sic ? Bound::dl_sic : Bound::dl_linear);
    rep.prelog = prelog;
    rep.trials = m.trials();
    rep.se_per_ue = dl_per_ue(m, sigma2_dl, prelog, sic, -1, &rep.se_streams);
    rep.sum_se = arma::accu(rep.se_per_ue);
    std::vector<arma::vec> bins;
    for (int b = 0; b < m.n_bins(); b++)
        bins.push_back(dl_per_ue(m, sigma2_dl, prelog, sic, b, nullptr));
    fill_stderr(rep, bins);
    return rep;
}

} // namespace

SEReport se_dl_linear(const DlMomentBins &m, double sigma2_dl, double prelog)
{
    return dl_report(m, sigma2_dl, prelog, false);
}

SEReport se_dl_sic(const DlMomentBins &m, double sigma2_dl, double prelog)
{
    return dl_report(m, sigma2_dl, prelog, true);
}

namespace
{

arma::vec uni_dl_per_ue(const BilinearMomentBins &m, double sigma2_dl, double prelog,
                        int bin)
{
    // left = precoders (powers included), right = channels
    const arma::cx_mat mean_g = m.mean_g(bin);
    const arma::mat mean_abs2 = m.mean_abs2(bin);
    const int num_ues = static_cast<int>(mean_g.n_rows);
    arma::vec per_ue(num_ues, arma::fill::zeros);
    for (int k = 0; k < num_ues; k++)
    {
        const double signal = std::norm(mean_g(k, k));
        double denom = sigma2_dl - signal;
        for (int l = 0; l < num_ues; l++)
            denom += mean_abs2(l, k);
        if (signal <= 0.0)
            continue;
        if (denom <= 0.0)
            throw std::runtime_error("uni-dl: estimated interference-plus-noise is "
                                     "not positive; increase trials");
        per_ue(k) = prelog * std::log2(1.0 + signal / denom);
    }
    return per_ue;
}

} // namespace

SEReport se_uni_dl_uatf(const BilinearMomentBins &m, double sigma2_dl, double prelog)
{
    SEReport rep;
    rep.bound = to_string(Bound::uni_dl_uatf);
    rep.prelog = prelog;
    rep.trials = m.trials();
    rep.se_per_ue = uni_dl_per_ue(m, sigma2_dl, prelog, -1);
    rep.se_streams = rep.se_per_ue;
    rep.sum_se = arma::accu(rep.se_per_ue);
    std::vector<arma::vec> bins;
    for (int b = 0; b < m.n_bins(); b++)
        bins.push_back(uni_dl_per_ue(m, sigma2_dl, prelog, b));
    fill_stderr(rep, bins);
    return rep;
}

// ------------------------------------------------------------------
// closed forms
// ------------------------------------------------------------------

namespace
{

double tr_prod(const arma::cx_mat &a, const arma::cx_mat &b)
{
    // trace(a * b) without forming the product
    return arma::accu(arma::real(a % b.st()));
}

} // namespace

SEReport se_ul_mr_closed(const std::vector<UEStatistics> &ues,
                         const std::vector<PolarizedEstimator> &est,
                         const arma::vec &rho_v, const arma::vec &rho_h,
                         double sigma2_ul, double prelog)
{
    const int num_ues = static_cast<int>(ues.size());
    SEReport rep;
    rep.scheme = to_string(Scheme::mr);
    rep.bound = to_string(Bound::ul_mr_closed);
    rep.prelog = prelog;
    rep.se_streams.zeros(num_ues, 2);
    for (int k = 0; k < num_ues; k++)
    {
        for (int pol = 0; pol < 2; pol++)
        {
            const arma::cx_mat &gamma = (pol == 0) ? est[k].gamma_v : est[k].gamma_h;
            const double tr_gamma = (pol == 0) ? est[k].tr_gamma_v : est[k].tr_gamma_h;
            const double rho_own = (pol == 0) ? rho_v(k) : rho_h(k);
            if (tr_gamma <= 0.0)
            {
                if (rho_own > 0.0)
                    throw std::runtime_error("se_ul_mr_closed: degenerate UE with zero "
                                             "estimate variance");
                continue;
            }
            double interf = 0.0;
            for (int l = 0; l < num_ues; l++)
            {
                interf += rho_v(l) * tr_prod(gamma, ues[l].r_v) / tr_gamma;
                interf += rho_h(l) * tr_prod(gamma, ues[l].r_h) / tr_gamma;
            }
            const double sinr = rho_own * tr_gamma / (interf + sigma2_ul);
            rep.se_streams(k, pol) = prelog * std::log2(1.0 + sinr);
        }
    }
    rep.finalize_from_streams();
    rep.se_per_ue_stderr.zeros(num_ues);
    return rep;
}

SEReport se_dl_mr_closed(const std::vector<UEStatistics> &ues,
                         const std::vector<PolarizedEstimator> &est,
                         const arma::vec &rho_v, const arma::vec &rho_h,
                         double sigma2_dl, double prelog)
{
    const int num_ues = static_cast<int>(ues.size());
    SEReport rep;
    rep.scheme = to_string(Scheme::mr);
    rep.bound = to_string(Bound::dl_mr_closed);
    rep.prelog = prelog;
    rep.se_streams.zeros(num_ues, 2);
    for (int k = 0; k < num_ues; k++)
    {
        for (int pol = 0; pol < 2; pol++)
        {
            const arma::cx_mat &r_own = (pol == 0) ? ues[k].r_v : ues[k].r_h;
            const double tr_gamma_own = (pol == 0) ? est[k].tr_gamma_v : est[k].tr_gamma_h;
            const double rho_own = (pol == 0) ? rho_v(k) : rho_h(k);
            double interf = 0.0;
            for (int l = 0; l < num_ues; l++)
            {
                if (rho_v(l) > 0.0)
                {
                    if (est[l].tr_gamma_v <= 0.0)
                        throw std::runtime_error("se_dl_mr_closed: degenerate UE");
                    interf += rho_v(l) * tr_prod(est[l].gamma_v, r_own) / est[l].tr_gamma_v;
                }
                if (rho_h(l) > 0.0)
                {
                    if (est[l].tr_gamma_h <= 0.0)
                        throw std::runtime_error("se_dl_mr_closed: degenerate UE");
                    interf += rho_h(l) * tr_prod(est[l].gamma_h, r_own) / est[l].tr_gamma_h;
                }
            }
            if (rho_own <= 0.0 || tr_gamma_own <= 0.0)
                continue;
            const double sinr = rho_own * tr_gamma_own / (interf + sigma2_dl);
            rep.se_streams(k, pol) = prelog * std::log2(1.0 + sinr);
        }
    }
    rep.finalize_from_streams();
    rep.se_per_ue_stderr.zeros(num_ues);
    return rep;
}

UncorrCoeffs uncorr_coeffs(const arma::vec &beta, const arma::vec &q,
                           const arma::vec &p_v, const arma::vec &p_h,
                           int tau_p, double sigma2_ul)
{
    const arma::uword num_ues = beta.n_elem;
    UncorrCoeffs c;
    c.beta = beta;
    c.q = q;
    c.g_v1.set_size(num_ues);
    c.g_v2.set_size(num_ues);
    c.g_h1.set_size(num_ues);
    c.g_h2.set_size(num_ues);
    auto gamma = [&](double p, double b, double x) {
        const double den = p * tau_p * b * x + sigma2_ul;
        if (den <= 0.0)
            return 0.0;
        return p * tau_p * b * b * x * x / den;
    };
    for (arma::uword k = 0; k < num_ues; k++)
    {
        c.g_v1(k) = gamma(p_v(k), beta(k), 1.0 - q(k));
        c.g_v2(k) = gamma(p_v(k), beta(k), q(k));
        c.g_h1(k) = gamma(p_h(k), beta(k), 1.0 - q(k));
        c.g_h2(k) = gamma(p_h(k), beta(k), q(k));
    }
    return c;
}

SEReport se_ul_mr_closed_uncorr(int m_ports, const UncorrCoeffs &c,
                                const arma::vec &rho_v, const arma::vec &rho_h,
                                double sigma2_ul, double prelog)
{
    const int num_ues = static_cast<int>(c.beta.n_elem);
    const double half_m = m_ports / 2.0;
    SEReport rep;
    rep.scheme = to_string(Scheme::mr);
    rep.bound = to_string(Bound::ul_mr_closed);
    rep.prelog = prelog;
    rep.se_streams.zeros(num_ues, 2);
    for (int k = 0; k < num_ues; k++)
    {
        // pol 0: combiner built on the V estimate (slot weights 1-q, q);
        // pol 1: H estimate (slot weights q, 1-q)
        for (int pol = 0; pol < 2; pol++)
        {
            const double g1 = (pol == 0) ? c.g_v1(k) : c.g_h1(k);
            const double g2 = (pol == 0) ? c.g_v2(k) : c.g_h2(k);
            const double gsum = g1 + g2;
            const double rho_own = (pol == 0) ? rho_v(k) : rho_h(k);
            if (gsum <= 0.0 || rho_own <= 0.0)
                continue;
            double interf = 0.0;
            for (int l = 0; l < num_ues; l++)
            {
                const double co = g1 * c.beta(l) * (1.0 - c.q(l)) + g2 * c.beta(l) * c.q(l);
                const double cross = g1 * c.beta(l) * c.q(l) + g2 * c.beta(l) * (1.0 - c.q(l));
                interf += (pol == 0) ? (rho_v(l) * co + rho_h(l) * cross) / gsum
                                     : (rho_h(l) * co + rho_v(l) * cross) / gsum;
            }
            const double sinr = half_m * rho_own * gsum / (interf + sigma2_ul);
            rep.se_streams(k, pol) = prelog * std::log2(1.0 + sinr);
        }
    }
    rep.finalize_from_streams();
    rep.se_per_ue_stderr.zeros(num_ues);
    return rep;
}

SEReport se_dl_mr_closed_uncorr(int m_ports, const UncorrCoeffs &c,
                                const arma::vec &rho_v, const arma::vec &rho_h,
                                double sigma2_dl, double prelog)
{
    const int num_ues = static_cast<int>(c.beta.n_elem);
    const double half_m = m_ports / 2.0;
    SEReport rep;
    rep.scheme = to_string(Scheme::mr);
    rep.bound = to_string(Bound::dl_mr_closed);
    rep.prelog = prelog;
    rep.se_streams.zeros(num_ues, 2);
    for (int k = 0; k < num_ues; k++)
    {
        for (int pol = 0; pol < 2; pol++)
        {
            // slot weights of UE k's own covariance for this polarization
            const double w_co = (pol == 0) ? 1.0 - c.q(k) : c.q(k);
            const double w_cross = 1.0 - w_co;
            const double g1 = (pol == 0) ? c.g_v1(k) : c.g_h1(k);
            const double g2 = (pol == 0) ? c.g_v2(k) : c.g_h2(k);
            const double rho_own = (pol == 0) ? rho_v(k) : rho_h(k);
            double interf = 0.0;
            for (int l = 0; l < num_ues; l++)
            {
                // (w_co, w_cross) are the slot weights of UE k's covariance for
                // this polarization, so the trace ratios pair them with the
                // interfering estimate's slot pattern directly: (g_v1, g_v2)
                // for a V estimate, (g_h2, g_h1) for an H estimate.
                if (rho_v(l) > 0.0)
                {
                    const double gs = c.g_v1(l) + c.g_v2(l);
                    if (gs <= 0.0)
                        throw std::runtime_error("se_dl_mr_closed_uncorr: degenerate UE");
                    const double num = c.g_v1(l) * c.beta(k) * w_co
                                       + c.g_v2(l) * c.beta(k) * w_cross;
                    interf += rho_v(l) * num / gs;
                }
                if (rho_h(l) > 0.0)
                {
                    const double gs = c.g_h1(l) + c.g_h2(l);
                    if (gs <= 0.0)
                        throw std::runtime_error("se_dl_mr_closed_uncorr: degenerate UE");
                    const double num = c.g_h2(l) * c.beta(k) * w_co
                                       + c.g_h1(l) * c.beta(k) * w_cross;
                    interf += rho_h(l) * num / gs;
                }
            }
            const double gsum_own = g1 + g2;
            if (rho_own <= 0.0 || gsum_own <= 0.0)
                continue;
            const double sinr = half_m * rho_own * gsum_own / (interf + sigma2_dl);
            rep.se_streams(k, pol) = prelog * std::log2(1.0 + sinr);
        }
    }
    rep.finalize_from_streams();
    rep.se_per_ue_stderr.zeros(num_ues);
    return rep;
}

SEReport se_uni_ul_mr_closed(const std::vector<UniUEStatistics> &ues,
                             const std::vector<UniEstimator> &est,
                             const arma::vec &rho, double sigma2_ul, double prelog)
{
    const int num_ues = static_cast<int>(ues.size());
    SEReport rep;
    rep.scheme = to_string(Scheme::mr);
    rep.bound = to_string(Bound::uni_ul_mr_closed);
    rep.prelog = prelog;
    rep.se_streams.zeros(num_ues, 1);
    for (int k = 0; k < num_ues; k++)
    {
        if (rho(k) <= 0.0 || est[k].tr_gamma <= 0.0)
            continue;
        double interf = 0.0;
        for (int l = 0; l < num_ues; l++)
            interf += rho(l) * tr_prod(est[k].gamma, ues[l].r_bs) / est[k].tr_gamma;
        rep.se_streams(k, 0) =
            prelog * std::log2(1.0 + rho(k) * est[k].tr_gamma / (interf + sigma2_ul));
    }
    rep.finalize_from_streams();
    rep.se_per_ue_stderr.zeros(num_ues);
    return rep;
}

SEReport se_uni_dl_mr_closed(const std::vector<UniUEStatistics> &ues,
                             const std::vector<UniEstimator> &est,
                             const arma::vec &rho, double sigma2_dl, double prelog)
{
    const int num_ues = static_cast<int>(ues.size());
    SEReport rep;
    rep.scheme = to_string(Scheme::mr);
    rep.bound = to_string(Bound::uni_dl_mr_closed);
    rep.prelog = prelog;
    rep.se_streams.zeros(num_ues, 1);
    for (int k = 0; k < num_ues; k++)
    {
        double interf = 0.0;
        for (int l = 0; l < num_ues; l++)
        {
            if (rho(l) <= 0.0)
                continue;
            if (est[l].tr_gamma <= 0.0)
                throw std::runtime_error("se_uni_dl_mr_closed: degenerate UE");
            interf += rho(l) * tr_prod(est[l].gamma, ues[k].r_bs) / est[l].tr_gamma;
        }
        if (rho(k) <= 0.0 || est[k].tr_gamma <= 0.0)
            continue;
        rep.se_streams(k, 0) =
            prelog * std::log2(1.0 + rho(k) * est[k].tr_gamma / (interf + sigma2_dl));
    }
    rep.finalize_from_streams();
    rep.se_per_ue_stderr.zeros(num_ues);
    return rep;
}

} // namespace dpmimo
