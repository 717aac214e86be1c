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

using namespace dpmimo;

namespace
{

std::vector<UEStatistics> two_ues(int half_m)
{
    ScenarioConfig cfg;
    cfg.m_ports = 2 * half_m;
    cfg.num_ues = 2;
    cfg.tau_p = 4;
    RngStream rng(31);
    return build_ue_statistics(cfg, rng);
}

} // namespace

TEST_CASE("pilot book orthogonality", "[estimation]")
{
    SECTION("single UE, minimal length")
    {
        const PilotBook book = build_pilots(1, 2, 0.1);
        const arma::cx_mat v = book.pilot_sequences(0);
        REQUIRE(arma::norm(v.t() * v - 2.0 * arma::eye<arma::cx_mat>(2, 2), "fro") < 1e-12);
    }
    SECTION("ten UEs, all cross products vanish")
    {
        const PilotBook book = build_pilots(10, 20, 0.1);
        for (int k = 0; k < 10; k++)
            for (int l = 0; l < 10; l++)
            {
                const arma::cx_mat prod =
                    book.pilot_sequences(k).t() * book.pilot_sequences(l);
                if (k == l)
                    REQUIRE(arma::norm(prod - 20.0 * arma::eye<arma::cx_mat>(2, 2), "fro")
                            < 1e-10);
                else
                    REQUIRE(arma::norm(prod, "fro") < 1e-10);
            }
    }
    SECTION("pilot signal correlates to the power matrix")
    {
        arma::vec pv = {0.1, 0.3};
        arma::vec ph = {0.2, 0.05};
        const PilotBook book = build_pilots(2, 4, pv, ph);
        for (int k = 0; k < 2; k++)
        {
            const arma::cx_mat lhs =
                book.pilot_signal(k) * arma::conj(book.pilot_sequences(k));
            arma::cx_mat expect(2, 2, arma::fill::zeros);
            expect(0, 0) = 4.0 * std::sqrt(pv(k));
            expect(1, 1) = 4.0 * std::sqrt(ph(k));
            REQUIRE(arma::norm(lhs - expect, "fro") < 1e-10);
            REQUIRE(arma::norm(book.pilot_signal(k)
                                   * arma::conj(book.pilot_sequences(1 - k)), "fro")
                    < 1e-10);
        }
    }
    SECTION("too short pilot length is rejected")
    {
        REQUIRE_THROWS_AS(build_pilots(3, 5, 0.1), std::invalid_argument);
    }
}

TEST_CASE("estimate covariances decompose the channel covariance", "[estimation]")
{
    const auto ues = two_ues(6);
    const double sigma2 = 1e-3;
    for (const auto &ue : ues)
    {
        const PolarizedEstimator est = estimate_covariances(ue, 0.1, 0.1, 4, sigma2);
        const double scale = arma::norm(ue.r_v, "fro");
        REQUIRE(arma::norm(est.gamma_v + est.c_v - ue.r_v, "fro") < 1e-10 * scale);
        REQUIRE(arma::norm(est.gamma_h + est.c_h - ue.r_h, "fro") < 1e-10 * scale);
        REQUIRE(min_hermitian_eig(est.gamma_v) >= -1e-10 * scale);
        REQUIRE(min_hermitian_eig(est.c_v) >= -1e-10 * scale);
        // estimate is never better than the prior: Gamma <= R in the PSD order
        REQUIRE(min_hermitian_eig(ue.r_v - est.gamma_v) >= -1e-10 * scale);
        // equal pilot powers give equal estimate quality across polarizations
        REQUIRE(est.tr_gamma_v == Catch::Approx(est.tr_gamma_h).epsilon(1e-10));
    }
}

TEST_CASE("spatially white covariances give the scalar estimate variances", "[estimation]")
{
    const double beta = 0.6, q = 0.24, p = 0.1, sigma2 = 1e-3;
    const int half_m = 5, tau_p = 4;
    UEStatistics ue;
    ue.beta = beta;
    ue.q = q;
    ue.r_bs = beta * arma::eye<arma::cx_mat>(half_m, half_m);
    auto [r_v, r_h] = build_polarized_covariances(ue.r_bs, q);
    ue.r_v = r_v;
    ue.r_h = r_h;
    const PolarizedEstimator est = estimate_covariances(ue, p, p, tau_p, sigma2);
    const double g1 = p * tau_p * beta * beta * (1 - q) * (1 - q)
                      / (p * tau_p * beta * (1 - q) + sigma2);
    const double g2 = p * tau_p * beta * beta * q * q / (p * tau_p * beta * q + sigma2);
    for (int i = 0; i < half_m; i++)
    {
        REQUIRE(est.gamma_v(2 * i, 2 * i).real() == Catch::Approx(g1).epsilon(1e-10));
        REQUIRE(est.gamma_v(2 * i + 1, 2 * i + 1).real() == Catch::Approx(g2).epsilon(1e-10));
    }
}

TEST_CASE("perfect estimation limits", "[estimation]")
{
    UEStatistics ue;
    const int half_m = 3;
    ue.beta = 1.0;
    ue.q = 0.3;
    ue.r_bs = arma::eye<arma::cx_mat>(half_m, half_m);
    auto [r_v, r_h] = build_polarized_covariances(ue.r_bs, ue.q);
    ue.r_v = r_v;
    ue.r_h = r_h;

    SECTION("vanishing noise recovers the full covariance")
    {
        const PolarizedEstimator est = estimate_covariances(ue, 0.1, 0.1, 4, 1e-15);
        REQUIRE(arma::norm(est.c_v, "fro") < 1e-10 * arma::norm(ue.r_v, "fro"));
    }
    SECTION("noiseless single-UE estimate equals the channel")
    {
        const PolarizedEstimator est = estimate_covariances(ue, 0.1, 0.1, 4, 0.0);
        const PilotBook book = build_pilots(1, 4, 0.1);
        RngStream rng(41);
        arma::cx_mat d_v(2, 2, arma::fill::zeros), d_h(2, 2, arma::fill::zeros);
        d_v(0, 0) = std::sqrt(1.0 - ue.q);
        d_v(1, 1) = std::sqrt(ue.q);
        d_h(0, 0) = std::sqrt(ue.q);
        d_h(1, 1) = std::sqrt(1.0 - ue.q);
        ue.r_v_sqrt = arma::kron(arma::eye<arma::cx_mat>(half_m, half_m), d_v);
        ue.r_h_sqrt = arma::kron(arma::eye<arma::cx_mat>(half_m, half_m), d_h);
        const arma::cx_mat h = sample_channel_uncorr_xpc(ue, rng);
        const arma::cx_mat y = received_pilot_signal({h}, book, 0.0, rng);
        auto [hv, hh] = mmse_estimate(y, book, est, 0);
        REQUIRE(arma::norm(hv - h.row(0).t()) < 1e-9 * arma::norm(h.row(0)));
        REQUIRE(arma::norm(hh - h.row(1).t()) < 1e-9 * arma::norm(h.row(1)));
    }
    SECTION("zero noise with rank-deficient covariance is an error")
    {
        UEStatistics u0 = ue;
        auto [rv0, rh0] = build_polarized_covariances(u0.r_bs, 0.0);
        u0.r_v = rv0;
        u0.r_h = rh0;
        u0.q = 0.0;
        REQUIRE_THROWS_AS(estimate_covariances(u0, 0.1, 0.1, 4, 0.0), std::runtime_error);
    }
}

TEST_CASE("estimator is linear in the observation", "[estimation]")
{
    const auto ues = two_ues(4);
    const PilotBook book = build_pilots(2, 4, 0.1);
    const PolarizedEstimator est = estimate_covariances(ues[0], 0.1, 0.1, 4, 1e-3);
    RngStream rng(42);
    const arma::cx_mat y1 = rng.cgauss_mat(8, 4);
    const arma::cx_mat y2 = rng.cgauss_mat(8, 4);
    auto [a_v, a_h] = mmse_estimate(y1, book, est, 0);
    auto [b_v, b_h] = mmse_estimate(y2, book, est, 0);
    auto [s_v, s_h] = mmse_estimate(y1 + y2, book, est, 0);
    REQUIRE(arma::norm(s_v - (a_v + b_v)) < 1e-12 * arma::norm(s_v));
    REQUIRE(arma::norm(s_h - (a_h + b_h)) < 1e-12 * arma::norm(s_h));
}

TEST_CASE("estimate statistics match the Monte Carlo oracle", "[estimation]")
{
    const auto ues = two_ues(4);
    const int m = 8, tau_p = 4;
    // strong but not perfect estimation at this UE's pathloss
    const double sigma2 = 0.01 * 0.1 * tau_p * ues[0].beta;
    const PolarizedEstimator est = estimate_covariances(ues[0], 0.1, 0.1, tau_p, sigma2);

    const long trials = 100000;
    arma::cx_mat cov(m, m, arma::fill::zeros);
    arma::cx_mat orth(m, m, arma::fill::zeros);
    RngStream rng(43);
    for (long i = 0; i < trials; i += 500)
    {
        const int n_t = static_cast<int>(std::min<long>(500, trials - i));
        arma::cx_mat s_v(m, n_t), s_h(m, n_t), n_v(m, n_t), n_h(m, n_t);
        RngStream(43, 1, i).fill_cgauss(s_v.memptr(), s_v.n_elem);
        RngStream(43, 2, i).fill_cgauss(s_h.memptr(), s_h.n_elem);
        RngStream(43, 3, i).fill_cgauss(n_v.memptr(), n_v.n_elem);
        RngStream(43, 4, i).fill_cgauss(n_h.memptr(), n_h.n_elem);
        arma::cx_mat h_v, h_h, hhat_v, hhat_h;
        transform_channels(ues[0], s_v, s_h, h_v, h_h);
        estimate_batch(est, tau_p, sigma2, h_v, h_h, n_v, n_h, hhat_v, hhat_h);
        cov += hhat_v * hhat_v.t();
        orth += hhat_v * (h_v - hhat_v).t();
    }
    cov /= trials;
    orth /= trials;
    const double scale = arma::norm(est.gamma_v, "fro");
    REQUIRE(arma::norm(cov - est.gamma_v, "fro") <= 0.02 * scale);
    // MMSE orthogonality: estimate uncorrelated with the error
    REQUIRE(arma::norm(orth, "fro") <= 0.02 * scale);
}

TEST_CASE("no pilot contamination across UEs", "[estimation]")
{
    const auto ues = two_ues(4);
    const int m = 8, tau_p = 4;
    const double sigma2 = 1e-8;
    const PilotBook book = build_pilots(2, tau_p, 0.1);
    std::vector<PolarizedEstimator> est;
    for (const auto &ue : ues)
        est.push_back(estimate_covariances(ue, 0.1, 0.1, tau_p, sigma2));

    const long trials = 20000;
    arma::cx_mat cross(m, m, arma::fill::zeros);
    RngStream rng(44);
    for (long i = 0; i < trials; i++)
    {
        const arma::cx_mat h0 = sample_channel_uncorr_xpc(ues[0], rng);
        const arma::cx_mat h1 = sample_channel_uncorr_xpc(ues[1], rng);
        const arma::cx_mat y = received_pilot_signal({h0, h1}, book, sigma2, rng);
        auto [hv0, hh0] = mmse_estimate(y, book, est[0], 0);
        cross += hv0 * h1.row(0).st().t(); // estimate of UE 0 against channel of UE 1
    }
    cross /= trials;
    const double floor_scale = std::sqrt(arma::norm(est[0].gamma_v, "fro")
                                         * arma::norm(ues[1].r_v, "fro"));
    REQUIRE(arma::norm(cross, "fro") <= 0.02 * floor_scale);
}

TEST_CASE("per-polarization estimator equals the joint vectorized one", "[estimation]")
{
    // oracle: the full 2M x 2M MMSE filter on vec(Y^p) built from the
    // block-diagonal channel covariance
    const auto ues = two_ues(3);
    const int m = 6, tau_p = 4;
    const double p_v = 0.1, p_h = 0.25, sigma2 = 1e-7;
    const PilotBook book = build_pilots(2, tau_p, arma::vec{p_v, p_v},
                                        arma::vec{p_h, p_h});
    const PolarizedEstimator est = estimate_covariances(ues[0], p_v, p_h, tau_p, sigma2);

    RngStream rng(45);
    const arma::cx_mat h0 = sample_channel_uncorr_xpc(ues[0], rng);
    const arma::cx_mat h1 = sample_channel_uncorr_xpc(ues[1], rng);
    const arma::cx_mat y = received_pilot_signal({h0, h1}, book, sigma2, rng);
    auto [hv, hh] = mmse_estimate(y, book, est, 0);

    // joint form
    const arma::cx_mat y_p = y * arma::conj(book.pilot_sequences(0));
    arma::cx_vec y_vec(2 * m);
    y_vec.subvec(0, m - 1) = y_p.col(0);
    y_vec.subvec(m, 2 * m - 1) = y_p.col(1);
    arma::cx_mat delta(2 * m, 2 * m, arma::fill::zeros);
    delta.submat(0, 0, m - 1, m - 1) = ues[0].r_v;
    delta.submat(m, m, 2 * m - 1, 2 * m - 1) = ues[0].r_h;
    arma::cx_mat l_sqrt(2, 2, arma::fill::zeros);
    l_sqrt(0, 0) = std::sqrt(p_v);
    l_sqrt(1, 1) = std::sqrt(p_h);
    const arma::cx_mat a = arma::kron(double(tau_p) * l_sqrt, arma::eye<arma::cx_mat>(m, m));
    const arma::cx_mat gram = a * delta * a.t()
                              + sigma2 * tau_p * arma::eye<arma::cx_mat>(2 * m, 2 * m);
    const arma::cx_vec joint = delta * a.t() * arma::solve(gram, y_vec);
    REQUIRE(arma::norm(joint.subvec(0, m - 1) - hv) < 1e-10 * arma::norm(hv));
    REQUIRE(arma::norm(joint.subvec(m, 2 * m - 1) - hh) < 1e-10 * arma::norm(hh));
}

TEST_CASE("uni estimator covariance split", "[estimation]")
{
    ScenarioConfig cfg;
    cfg.m_ports = 8;
    cfg.num_ues = 2;
    RngStream rng(46);
    const ScenarioDraw draw = draw_geometry(cfg, rng);
    const auto uni = build_uni_statistics(cfg, draw, 8);
    const UniEstimator est = estimate_covariances_uni(uni[0].r_bs, 0.2, 2, 1e-9);
    const double scale = arma::norm(uni[0].r_bs, "fro");
    REQUIRE(arma::norm(est.gamma + est.c - uni[0].r_bs, "fro") < 1e-10 * scale);
    REQUIRE(min_hermitian_eig(uni[0].r_bs - est.gamma) >= -1e-10 * scale);
}
