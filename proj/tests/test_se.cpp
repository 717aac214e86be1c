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

#include <catch2/catch_amalgamated.hpp>

#include "dpmimo/channel.hpp"
#include "dpmimo/estimation.hpp"
#include "dpmimo/linalg.hpp"
#include "dpmimo/se.hpp"

using namespace dpmimo;

namespace
{

struct TestSetup
{
    ScenarioConfig cfg;
    std::vector<UEStatistics> ues;
    std::vector<PolarizedEstimator> est;
    arma::vec rho_ul, rho_dl;
    arma::vec rho_ul_streams, rho_dl_streams;
    arma::cx_mat fixed_ul;
    double prelog = 0.0;
};

TestSetup make_setup(std::uint64_t seed, int m_ports, int num_ues, double xpd_db,
                     std::complex<double> t = 0.0, std::complex<double> r = 0.0)
{
    TestSetup s;
    s.cfg.m_ports = m_ports;
    s.cfg.num_ues = num_ues;
    s.cfg.tau_p = 2 * num_ues;
    s.cfg.xpd_db = xpd_db;
    s.cfg.xpc_t = t;
    s.cfg.xpc_r = r;
    s.cfg.rng_seed = seed;
    RngStream rng(seed, 77);
    s.ues = build_ue_statistics(s.cfg, rng);
    for (const auto &ue : s.ues)
        s.est.push_back(estimate_covariances(ue, s.cfg.pilot_power_w, s.cfg.pilot_power_w,
                                             s.cfg.tau_p, s.cfg.noise_ul_w));
    s.rho_ul = arma::vec(num_ues, arma::fill::value(s.cfg.ul_power_w));
    s.rho_dl = arma::vec(num_ues, arma::fill::value(s.cfg.dl_power_w));
    s.rho_ul_streams.set_size(2 * num_ues);
    s.rho_dl_streams.set_size(2 * num_ues);
    for (int k = 0; k < num_ues; k++)
    {
        s.rho_ul_streams(2 * k) = s.rho_ul_streams(2 * k + 1) = s.rho_ul(k);
        s.rho_dl_streams(2 * k) = s.rho_dl_streams(2 * k + 1) = s.rho_dl(k);
    }
    s.fixed_ul = s.cfg.noise_ul_w * arma::eye<arma::cx_mat>(m_ports, m_ports);
    for (int l = 0; l < num_ues; l++)
        s.fixed_ul += s.rho_ul(l) * s.est[l].c_v + s.rho_ul(l) * s.est[l].c_h;
    s.prelog = prelog_factor(s.cfg.tau_c, s.cfg.tau_p);
    return s;
}

struct McOut
{
    std::map<Scheme, BilinearMomentBins> ul;
    DlMomentBins dl_mr;
    SicBins sic;
};

void run_mc(const TestSetup &s, const std::vector<Scheme> &ul_schemes, bool want_dl_mr,
            bool want_sic, bool sic_per_ue, long trials, McOut &out, std::uint64_t seed)
{
    const int num_ues = s.cfg.num_ues;
    const int m = s.cfg.m_ports;
    const int n_streams = 2 * num_ues;
    const int bins = 20;
    for (Scheme sc : ul_schemes)
        out.ul[sc].init(n_streams, n_streams, bins);
    if (want_dl_mr)
        out.dl_mr.init(num_ues, bins);
    if (want_sic)
        out.sic.init(num_ues, bins, sic_per_ue);
    const HermPdFactor fixed_chol(s.fixed_ul);

    arma::vec norm2_mr(n_streams);
    for (int k = 0; k < num_ues; k++)
    {
        norm2_mr(2 * k) = s.est[k].tr_gamma_v;
        norm2_mr(2 * k + 1) = s.est[k].tr_gamma_h;
    }

    const int batch = 256;
    arma::cx_mat h_all(m, n_streams), hhat_all(m, n_streams);
    for (long t0 = 0; t0 < trials; t0 += batch)
    {
        const int n_t = static_cast<int>(std::min<long>(batch, trials - t0));
        std::vector<arma::cx_mat> hv(num_ues), hh(num_ues), ev(num_ues), eh(num_ues);
        for (int k = 0; k < num_ues; k++)
        {
            arma::cx_mat s_v(m, n_t), s_h(m, n_t), n_v(m, n_t), n_h(m, n_t);
            RngStream(seed, 1, k, t0).fill_cgauss(s_v.memptr(), s_v.n_elem);
            RngStream(seed, 2, k, t0).fill_cgauss(s_h.memptr(), s_h.n_elem);
            RngStream(seed, 3, k, t0).fill_cgauss(n_v.memptr(), n_v.n_elem);
            RngStream(seed, 4, k, t0).fill_cgauss(n_h.memptr(), n_h.n_elem);
            transform_channels(s.ues[k], s_v, s_h, hv[k], hh[k]);
            estimate_batch(s.est[k], s.cfg.tau_p, s.cfg.noise_ul_w, hv[k], hh[k], n_v,
                           n_h, ev[k], eh[k]);
        }
        for (int t = 0; t < n_t; t++)
        {
            for (int k = 0; k < num_ues; k++)
            {
                h_all.col(2 * k) = hv[k].col(t);
                h_all.col(2 * k + 1) = hh[k].col(t);
                hhat_all.col(2 * k) = ev[k].col(t);
                hhat_all.col(2 * k + 1) = eh[k].col(t);
            }
            const int bin = static_cast<int>(((t0 + t) * bins) / trials);
            for (Scheme sc : ul_schemes)
            {
                arma::cx_mat v;
                if (sc == Scheme::mr)
                    v = combiner_mr(hhat_all);
                else if (sc == Scheme::zf)
                    v = combiner_zf(hhat_all, nullptr);
                else
                    v = combiner_mmse(hhat_all, s.rho_ul_streams, s.fixed_ul);
                out.ul[sc].add(bin, v, h_all);
            }
            if (want_dl_mr)
            {
                const arma::cx_mat w = precoder_from_combiner(combiner_mr(hhat_all),
                                                              norm2_mr, s.rho_dl_streams);
                out.dl_mr.add(bin, h_all.t() * w);
            }
            if (want_sic)
                out.sic.add_trial(bin, hhat_all, s.rho_ul_streams, s.fixed_ul, fixed_chol);
        }
    }
}

} // namespace

TEST_CASE("uatf with MR matches the closed form", "[se][slow]")
{
    const TestSetup s = make_setup(101, 16, 2, 5.0);
    McOut mc;
    run_mc(s, {Scheme::mr}, false, false, false, 60000, mc, 201);
    const SEReport sim = se_ul_uatf(mc.ul[Scheme::mr], s.rho_ul_streams,
                                    s.cfg.noise_ul_w, s.prelog, 2);
    const SEReport closed = se_ul_mr_closed(s.ues, s.est, s.rho_ul, s.rho_ul,
                                            s.cfg.noise_ul_w, s.prelog);
    for (int k = 0; k < 2; k++)
    {
        const double tol = std::max(0.02 * closed.se_per_ue(k),
                                    3.0 * sim.se_per_ue_stderr(k));
        REQUIRE(std::abs(sim.se_per_ue(k) - closed.se_per_ue(k)) <= tol);
    }
}

TEST_CASE("downlink MR Monte Carlo matches the closed form", "[se][slow]")
{
    const TestSetup s = make_setup(102, 16, 2, 5.0);
    McOut mc;
    run_mc(s, {}, true, false, false, 60000, mc, 202);
    const SEReport sic = se_dl_sic(mc.dl_mr, s.cfg.noise_dl_w, s.prelog);
    const SEReport lin = se_dl_linear(mc.dl_mr, s.cfg.noise_dl_w, s.prelog);
    const SEReport closed = se_dl_mr_closed(s.ues, s.est, s.rho_dl, s.rho_dl,
                                            s.cfg.noise_dl_w, s.prelog);
    for (int k = 0; k < 2; k++)
    {
        const double tol = std::max(0.02 * closed.se_per_ue(k),
                                    3.0 * sic.se_per_ue_stderr(k));
        REQUIRE(std::abs(sic.se_per_ue(k) - closed.se_per_ue(k)) <= tol);
        REQUIRE(std::abs(lin.se_per_ue(k) - closed.se_per_ue(k)) <= tol);
    }
}

TEST_CASE("degenerate budgets give zero SE", "[se]")
{
    TestSetup s = make_setup(103, 8, 2, 5.0);

    SECTION("all pilots: zero prelog")
    {
        const SEReport rep = se_ul_mr_closed(s.ues, s.est, s.rho_ul, s.rho_ul,
                                             s.cfg.noise_ul_w,
                                             prelog_factor(200, 200));
        REQUIRE(rep.sum_se == 0.0);
    }
    SECTION("zero power")
    {
        const arma::vec zero(2, arma::fill::zeros);
        const SEReport ul = se_ul_mr_closed(s.ues, s.est, zero, zero,
                                            s.cfg.noise_ul_w, s.prelog);
        REQUIRE(ul.sum_se == 0.0);
        const SEReport dl = se_dl_mr_closed(s.ues, s.est, zero, zero,
                                            s.cfg.noise_dl_w, s.prelog);
        REQUIRE(dl.sum_se == 0.0);
    }
}

namespace
{

TestSetup make_iid_setup(std::uint64_t seed, int m_ports, int num_ues)
{
    // spatially white statistics with random betas and q, possibly unequal
    // pilot powers
    TestSetup s;
    RngStream rng(seed);
    s.cfg.m_ports = m_ports;
    s.cfg.num_ues = num_ues;
    s.cfg.tau_p = 2 * num_ues;
    s.cfg.noise_ul_w = 1e-3 * (0.5 + rng.next_uniform());
    s.cfg.noise_dl_w = 1e-3 * (0.5 + rng.next_uniform());
    s.prelog = prelog_factor(s.cfg.tau_c, s.cfg.tau_p);
    const int half_m = m_ports / 2;
    s.rho_ul.set_size(num_ues);
    s.rho_dl.set_size(num_ues);
    s.rho_ul_streams.set_size(2 * num_ues);
    s.rho_dl_streams.set_size(2 * num_ues);
    for (int k = 0; k < num_ues; k++)
    {
        UEStatistics ue;
        ue.beta = 0.1 + rng.next_uniform();
        ue.q = 0.5 * rng.next_uniform();
        ue.r_bs = ue.beta * arma::eye<arma::cx_mat>(half_m, half_m);
        auto [r_v, r_h] = build_polarized_covariances(ue.r_bs, ue.q);
        ue.r_v = r_v;
        ue.r_h = r_h;
        s.ues.push_back(ue);
        const double p_v = 0.05 + rng.next_uniform();
        const double p_h = 0.05 + rng.next_uniform();
        s.est.push_back(estimate_covariances(ue, p_v, p_h, s.cfg.tau_p, s.cfg.noise_ul_w));
        s.rho_ul(k) = 0.05 + rng.next_uniform();
        s.rho_dl(k) = 0.05 + rng.next_uniform();
    }
    return s;
}

UncorrCoeffs coeffs_of(const TestSetup &s)
{
    const int num_ues = s.cfg.num_ues;
    arma::vec beta(num_ues), q(num_ues), p_v(num_ues), p_h(num_ues);
    for (int k = 0; k < num_ues; k++)
    {
        beta(k) = s.ues[k].beta;
        q(k) = s.ues[k].q;
        p_v(k) = s.est[k].p_v_w;
        p_h(k) = s.est[k].p_h_w;
    }
    return uncorr_coeffs(beta, q, p_v, p_h, s.cfg.tau_p, s.cfg.noise_ul_w);
}

} // namespace

TEST_CASE("uncorrelated specializations equal the trace forms", "[se]")
{
    for (std::uint64_t seed = 0; seed < 30; seed++)
    {
        RngStream pick(seed, 5);
        const int num_ues = 1 + static_cast<int>(pick.next_uniform() * 4);
        const int m_ports = 2 * (2 + static_cast<int>(pick.next_uniform() * 10));
        const TestSetup s = make_iid_setup(1000 + seed, m_ports, num_ues);
        const UncorrCoeffs c = coeffs_of(s);

        const SEReport ul_mat = se_ul_mr_closed(s.ues, s.est, s.rho_ul, s.rho_ul,
                                                s.cfg.noise_ul_w, s.prelog);
        const SEReport ul_unc = se_ul_mr_closed_uncorr(m_ports, c, s.rho_ul, s.rho_ul,
                                                       s.cfg.noise_ul_w, s.prelog);
        REQUIRE(arma::abs(ul_mat.se_per_ue - ul_unc.se_per_ue).max()
                <= 1e-12 * std::max(1.0, ul_mat.sum_se));

        const SEReport dl_mat = se_dl_mr_closed(s.ues, s.est, s.rho_dl, s.rho_dl,
                                                s.cfg.noise_dl_w, s.prelog);
        const SEReport dl_unc = se_dl_mr_closed_uncorr(m_ports, c, s.rho_dl, s.rho_dl,
                                                       s.cfg.noise_dl_w, s.prelog);
        REQUIRE(arma::abs(dl_mat.se_per_ue - dl_unc.se_per_ue).max()
                <= 1e-12 * std::max(1.0, dl_mat.sum_se));
    }
}

TEST_CASE("interference terms do not grow with the antenna count", "[se]")
{
    const TestSetup a = make_iid_setup(77, 8, 3);
    TestSetup b = a;
    // rebuild the same statistics with twice the antennas
    b.cfg.m_ports = 16;
    b.ues.clear();
    b.est.clear();
    for (int k = 0; k < 3; k++)
    {
        UEStatistics ue;
        ue.beta = a.ues[k].beta;
        ue.q = a.ues[k].q;
        ue.r_bs = ue.beta * arma::eye<arma::cx_mat>(8, 8);
        auto [r_v, r_h] = build_polarized_covariances(ue.r_bs, ue.q);
        ue.r_v = r_v;
        ue.r_h = r_h;
        b.ues.push_back(ue);
        b.est.push_back(estimate_covariances(ue, a.est[k].p_v_w, a.est[k].p_h_w,
                                             b.cfg.tau_p, b.cfg.noise_ul_w));
    }
    // per-stream SINR doubles exactly when M doubles: the interference and
    // noise terms are independent of M
    const SEReport ra = se_ul_mr_closed(a.ues, a.est, a.rho_ul, a.rho_ul,
                                        a.cfg.noise_ul_w, 1.0);
    const SEReport rb = se_ul_mr_closed(b.ues, b.est, a.rho_ul, a.rho_ul,
                                        b.cfg.noise_ul_w, 1.0);
    for (int k = 0; k < 3; k++)
        for (int pol = 0; pol < 2; pol++)
        {
            const double sinr_a = std::exp2(ra.se_streams(k, pol)) - 1.0;
            const double sinr_b = std::exp2(rb.se_streams(k, pol)) - 1.0;
            REQUIRE(sinr_b == Catch::Approx(2.0 * sinr_a).epsilon(1e-12));
        }
}

TEST_CASE("swapping the polarization labels preserves the sum", "[se]")
{
    // dyadic q so that 1-q is exact in floating point
    const int num_ues = 3, m_ports = 12;
    arma::vec beta = {0.4, 0.9, 0.2}, q = {0.25, 0.375, 0.125};
    arma::vec p(num_ues, arma::fill::value(0.1));
    arma::vec rho(num_ues, arma::fill::value(0.2));
    const double sigma2 = 1e-3, prelog = 0.9;
    const UncorrCoeffs c1 = uncorr_coeffs(beta, q, p, p, 6, sigma2);
    const UncorrCoeffs c2 = uncorr_coeffs(beta, 1.0 - q, p, p, 6, sigma2);
    const SEReport r1 = se_ul_mr_closed_uncorr(m_ports, c1, rho, rho, sigma2, prelog);
    const SEReport r2 = se_ul_mr_closed_uncorr(m_ports, c2, rho, rho, sigma2, prelog);
    for (int k = 0; k < num_ues; k++)
    {
        REQUIRE(r1.se_streams(k, 0) == r2.se_streams(k, 1));
        REQUIRE(r1.se_streams(k, 1) == r2.se_streams(k, 0));
        REQUIRE(r1.se_per_ue(k) == r2.se_per_ue(k));
    }
    REQUIRE(r1.sum_se == r2.sum_se);
    const SEReport d1 = se_dl_mr_closed_uncorr(m_ports, c1, rho, rho, sigma2, prelog);
    const SEReport d2 = se_dl_mr_closed_uncorr(m_ports, c2, rho, rho, sigma2, prelog);
    REQUIRE(d1.sum_se == d2.sum_se);
}

TEST_CASE("per-UE SIC values sum to the log-det form per realization", "[se]")
{
    const TestSetup s = make_setup(105, 16, 3, 5.0);
    const HermPdFactor fixed_chol(s.fixed_ul);
    RngStream rng(301);
    for (int trial = 0; trial < 200; trial++)
    {
        arma::cx_mat hhat(16, 6);
        for (int k = 0; k < 3; k++)
        {
            arma::cx_mat s_v = rng.cgauss_mat(16, 1), s_h = rng.cgauss_mat(16, 1);
            arma::cx_mat n_v = rng.cgauss_mat(16, 1), n_h = rng.cgauss_mat(16, 1);
            arma::cx_mat hv, hh, ev, eh;
            transform_channels(s.ues[k], s_v, s_h, hv, hh);
            estimate_batch(s.est[k], s.cfg.tau_p, s.cfg.noise_ul_w, hv, hh, n_v, n_h,
                           ev, eh);
            hhat.col(2 * k) = ev.col(0);
            hhat.col(2 * k + 1) = eh.col(0);
        }
        const double sum_form = sic_sum_log2det(hhat, s.rho_ul_streams, s.fixed_ul,
                                                fixed_chol);
        const arma::vec per_ue = sic_per_ue_log2det(hhat, s.rho_ul_streams, s.fixed_ul);
        REQUIRE(std::abs(arma::accu(per_ue) - sum_form)
                <= 1e-9 * std::max(1.0, std::abs(sum_form)));
    }
}

TEST_CASE("single UE with perfect estimates reduces SIC to the capacity form", "[se]")
{
    // C -> 0: the denominator keeps only the noise floor
    const int m = 8;
    RngStream rng(303);
    const arma::cx_mat h = rng.cgauss_mat(m, 2);
    const double sigma2 = 0.37, rho = 1.3;
    const arma::vec rho_streams(2, arma::fill::value(rho));
    const arma::cx_mat fixed = sigma2 * arma::eye<arma::cx_mat>(m, m);
    const double got = sic_sum_log2det(h, rho_streams, fixed, HermPdFactor(fixed));
    const arma::cx_mat inner = arma::eye<arma::cx_mat>(2, 2)
                               + (rho / sigma2) * h.t() * h;
    const double expect = std::log2(std::abs(arma::det(inner)));
    REQUIRE(got == Catch::Approx(expect).epsilon(1e-9));
}

TEST_CASE("SIC dominates linear MMSE combining on average", "[se][slow]")
{
    for (std::uint64_t seed : {401, 402})
    {
        const TestSetup s = make_setup(seed, 32, 4, 5.0);
        McOut mc;
        run_mc(s, {Scheme::mmse, Scheme::zf, Scheme::mr}, false, true, false, 3000, mc,
               seed + 10);
        const SEReport sic = se_ul_sic(mc.sic, s.prelog);
        const SEReport mmse = se_ul_uatf(mc.ul[Scheme::mmse], s.rho_ul_streams,
                                         s.cfg.noise_ul_w, s.prelog, 2);
        const SEReport zf = se_ul_uatf(mc.ul[Scheme::zf], s.rho_ul_streams,
                                       s.cfg.noise_ul_w, s.prelog, 2);
        const SEReport mr = se_ul_uatf(mc.ul[Scheme::mr], s.rho_ul_streams,
                                       s.cfg.noise_ul_w, s.prelog, 2);
        REQUIRE(sic.sum_se >= mmse.sum_se);
        // the whitened matched filter also tops the other linear schemes here
        REQUIRE(mmse.sum_se >= zf.sum_se);
        REQUIRE(mmse.sum_se >= mr.sum_se);
    }
}

TEST_CASE("diagonal downlink moments split the SIC log-det", "[se]")
{
    // inject exact moments with a two-point distribution: mean D and second
    // moment A are reproduced exactly
    const double sigma2 = 0.2;
    arma::cx_mat d(2, 2, arma::fill::zeros);
    d(0, 0) = 1.1;
    d(1, 1) = 0.7;
    arma::cx_mat a = d * d.t();
    a(0, 0) += 0.3;
    a(1, 1) += 0.9;
    const arma::cx_mat x = hermitian_sqrt(a - d * d.t());
    DlMomentBins bins;
    bins.init(1, 2);
    bins.add(0, d + x);
    bins.add(1, d - x);
    const SEReport sic = se_dl_sic(bins, sigma2, 1.0);
    const SEReport lin = se_dl_linear(bins, sigma2, 1.0);
    REQUIRE(sic.sum_se == Catch::Approx(lin.sum_se).epsilon(1e-12));
    // matches the scalar SINR formula per stream
    for (int i = 0; i < 2; i++)
    {
        const double num = std::norm(d(i, i));
        const double den = a(i, i).real() + sigma2 - num;
        REQUIRE(lin.se_streams(0, i) == Catch::Approx(std::log2(1.0 + num / den)).epsilon(1e-12));
    }
}

TEST_CASE("estimate moment identities hold against Monte Carlo", "[se][slow]")
{
    const TestSetup s = make_setup(107, 8, 1, 5.0);
    const auto &est = s.est[0];
    const long trials = 80000;
    double m_vv = 0.0, m_vh = 0.0, m_ev = 0.0, m_eh = 0.0;
    for (long t0 = 0; t0 < trials; t0 += 1000)
    {
        const int n_t = static_cast<int>(std::min<long>(1000, trials - t0));
        arma::cx_mat s_v(8, n_t), s_h(8, n_t), n_v(8, n_t), n_h(8, n_t);
        RngStream(501, 1, t0).fill_cgauss(s_v.memptr(), s_v.n_elem);
        RngStream(501, 2, t0).fill_cgauss(s_h.memptr(), s_h.n_elem);
        RngStream(501, 3, t0).fill_cgauss(n_v.memptr(), n_v.n_elem);
        RngStream(501, 4, t0).fill_cgauss(n_h.memptr(), n_h.n_elem);
        arma::cx_mat hv, hh, ev, eh;
        transform_channels(s.ues[0], s_v, s_h, hv, hh);
        estimate_batch(est, s.cfg.tau_p, s.cfg.noise_ul_w, hv, hh, n_v, n_h, ev, eh);
        for (int t = 0; t < n_t; t++)
        {
            const arma::cx_vec hhat_v = ev.col(t), hhat_h = eh.col(t);
            const arma::cx_vec err_v = hv.col(t) - hhat_v;
            m_vv += std::norm(arma::cdot(hhat_v, hhat_v));
            m_vh += std::norm(arma::cdot(hhat_v, hhat_h));
            m_ev += std::norm(arma::cdot(err_v, hhat_v));
            m_eh += std::norm(arma::cdot(err_v, hhat_h));
        }
    }
    m_vv /= trials;
    m_vh /= trials;
    m_ev /= trials;
    m_eh /= trials;

    auto tr = [](const arma::cx_mat &x) { return arma::trace(x).real(); };
    const double tr_gv = est.tr_gamma_v;
    const double e_vv = tr_gv * tr_gv + tr(est.gamma_v * (s.ues[0].r_v - est.c_v));
    const double e_vh = tr(est.gamma_v * est.gamma_h);
    const double e_ev = tr(est.gamma_v * est.c_v);
    const double e_eh = tr(est.gamma_h * est.c_v);
    REQUIRE(m_vv == Catch::Approx(e_vv).epsilon(0.02));
    REQUIRE(m_vh == Catch::Approx(e_vh).epsilon(0.02));
    REQUIRE(m_ev == Catch::Approx(e_ev).epsilon(0.02));
    REQUIRE(m_eh == Catch::Approx(e_eh).epsilon(0.02));
}

TEST_CASE("zero leakage makes each polarization a uni-polarized system", "[se]")
{
    // same BS correlation, same per-stream power and pilot energy: the
    // per-polarization SINR equals the single-polarization benchmark
    ScenarioConfig cfg;
    cfg.m_ports = 16;
    cfg.num_ues = 3;
    cfg.tau_p = 6;
    cfg.xpd_db = std::numeric_limits<double>::infinity();
    RngStream rng(601);
    const ScenarioDraw draw = draw_geometry(cfg, rng);
    const auto dual = build_ue_statistics(cfg, draw);
    const auto uni = build_uni_statistics(cfg, draw, 8);

    std::vector<PolarizedEstimator> est_d;
    std::vector<UniEstimator> est_u;
    // pilot energy p*tau matched: dual (p, 2K), uni (2p, K)
    for (int k = 0; k < 3; k++)
    {
        est_d.push_back(estimate_covariances(dual[k], 0.1, 0.1, 6, cfg.noise_ul_w));
        est_u.push_back(estimate_covariances_uni(uni[k].r_bs, 0.2, 3, cfg.noise_ul_w));
    }
    const arma::vec rho(3, arma::fill::value(0.1));
    const SEReport rd = se_ul_mr_closed(dual, est_d, rho, rho, cfg.noise_ul_w, 1.0);
    const SEReport ru = se_uni_ul_mr_closed(uni, est_u, rho, cfg.noise_ul_w, 1.0);
    for (int k = 0; k < 3; k++)
        REQUIRE(rd.se_streams(k, 0) == Catch::Approx(ru.se_streams(k, 0)).epsilon(1e-9));

    const SEReport dd = se_dl_mr_closed(dual, est_d, rho, rho, cfg.noise_dl_w, 1.0);
    const SEReport du = se_uni_dl_mr_closed(uni, est_u, rho, cfg.noise_dl_w, 1.0);
    for (int k = 0; k < 3; k++)
        REQUIRE(dd.se_streams(k, 0) == Catch::Approx(du.se_streams(k, 0)).epsilon(1e-9));

    // prelog bookkeeping of the benchmark: 2K vs K pilots
    REQUIRE(prelog_factor(200, 20) == Catch::Approx((200.0 - 20.0) / 200.0));
    REQUIRE(prelog_factor(200, 10) == Catch::Approx((200.0 - 10.0) / 200.0));
}

TEST_CASE("closed-form SEs grow with the antenna count", "[se]")
{
    // 50 drops; the monotonicity holds on the setup average
    double prev_ul = 0.0, prev_dl = 0.0;
    for (int m : {16, 32, 64, 128})
    {
        double ul = 0.0, dl = 0.0;
        for (int setup = 0; setup < 50; setup++)
        {
            const TestSetup s = make_setup(9000 + setup, m, 3, 5.0);
            ul += se_ul_mr_closed(s.ues, s.est, s.rho_ul, s.rho_ul, s.cfg.noise_ul_w,
                                  s.prelog)
                      .sum_se;
            dl += se_dl_mr_closed(s.ues, s.est, s.rho_dl, s.rho_dl, s.cfg.noise_dl_w,
                                  s.prelog)
                      .sum_se;
        }
        REQUIRE(ul > prev_ul);
        REQUIRE(dl > prev_dl);
        prev_ul = ul;
        prev_dl = dl;
    }
}

TEST_CASE("bound names round trip", "[se]")
{
    for (Bound b : {Bound::ul_uatf, Bound::ul_mr_closed, Bound::ul_sic, Bound::dl_linear,
                    Bound::dl_sic, Bound::dl_mr_closed, Bound::uni_ul_uatf,
                    Bound::uni_ul_mr_closed, Bound::uni_dl_uatf, Bound::uni_dl_mr_closed})
        REQUIRE(bound_from_string(to_string(b)) == b);
    REQUIRE_THROWS_AS(bound_from_string("nope"), std::invalid_argument);
}
