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

#include "dpmimo/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "dpmimo/channel.hpp"

// Present when the BLAS backend is OpenBLAS; takes effect even after the
// library constructor has already sized its thread pool.
extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace dpmimo
{

namespace fs = std::filesystem;

void configure_blas_single_thread()
{
#ifndef _WIN32
    ::setenv("OPENBLAS_NUM_THREADS", "1", 1);
    ::setenv("GOTO_NUM_THREADS", "1", 1);
#endif
    if (openblas_set_num_threads != nullptr)
        openblas_set_num_threads(1);
}

const char *to_string(UniMode m)
{
    switch (m)
    {
    case UniMode::off: return "off";
    case UniMode::half: return "half";
    case UniMode::full: return "full";
    }
    return "?";
}

UniMode uni_mode_from_string(const std::string &s)
{
    if (s == "off")
        return UniMode::off;
    if (s == "half")
        return UniMode::half;
    if (s == "full")
        return UniMode::full;
    throw std::invalid_argument("unknown uni mode '" + s + "' (expected off, half or full)");
}

// ------------------------------------------------------------------
// plan plumbing
// ------------------------------------------------------------------

nlohmann::json Cell::to_json() const
{
    nlohmann::json j;
    j["M"] = m_ports;
    j["scheme"] = dpmimo::to_string(scheme);
    j["bound"] = dpmimo::to_string(bound);
    if (std::isinf(xpd_db))
        j["xpd_db"] = "inf";
    else
        j["xpd_db"] = xpd_db;
    j["xpc_t"] = {xpc_t.real(), xpc_t.imag()};
    j["xpc_r"] = {xpc_r.real(), xpc_r.imag()};
    j["uni"] = dpmimo::to_string(uni);
    j["power_control"] = dpmimo::to_string(power);
    return j;
}

Cell Cell::from_json(const nlohmann::json &j, const Cell &base)
{
    Cell c = base;
    c.m_ports = j.value("M", c.m_ports);
    if (j.contains("scheme"))
        c.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    if (j.contains("bound"))
        c.bound = bound_from_string(j.at("bound").get<std::string>());
    if (j.contains("xpd_db"))
    {
        const auto &v = j.at("xpd_db");
        c.xpd_db = v.is_string() ? std::numeric_limits<double>::infinity()
                                 : v.get<double>();
    }
    auto read_cx = [&](const char *key, std::complex<double> fallback) {
        if (!j.contains(key))
            return fallback;
        const auto &v = j.at(key);
        if (v.is_number())
            return std::complex<double>(v.get<double>(), 0.0);
        return std::complex<double>(v.at(0).get<double>(), v.at(1).get<double>());
    };
    c.xpc_t = read_cx("xpc_t", c.xpc_t);
    c.xpc_r = read_cx("xpc_r", c.xpc_r);
    if (j.contains("uni"))
        c.uni = uni_mode_from_string(j.at("uni").get<std::string>());
    if (j.contains("power_control"))
        c.power = power_mode_from_string(j.at("power_control").get<std::string>());
    return c;
}

void ExperimentPlan::validate() const
{
    base.validate();
    if (cells.empty())
        throw std::invalid_argument("plan has no cells (empty sweep list?)");
    if (setups <= 0 || trials <= 0)
        throw std::invalid_argument("setups and trials must be positive");
    if (norm_trials <= 0 || stat_bins <= 0 || batch <= 0)
        throw std::invalid_argument("norm_trials, stat_bins and batch must be positive");
    for (const Cell &c : cells)
    {
        if (c.m_ports <= 0 || c.m_ports % 2 != 0)
            throw std::invalid_argument("cell M must be positive and even");
        if (is_uni_bound(c.bound) && c.uni == UniMode::off)
            throw std::invalid_argument("uni bound requires uni mode half or full");
        if (std::abs(c.xpc_t) > 1.0 || std::abs(c.xpc_r) > 1.0)
            throw std::invalid_argument("|xpc| must be <= 1");
    }
}

nlohmann::json ExperimentPlan::to_json() const
{
    nlohmann::json j;
    j["name"] = name;
    j["config"] = base.to_json();
    j["setups"] = setups;
    j["trials"] = trials;
    j["norm_trials"] = norm_trials;
    j["stat_bins"] = stat_bins;
    j["batch"] = batch;
    j["seed"] = seed;
    nlohmann::json arr = nlohmann::json::array();
    for (const Cell &c : cells)
        arr.push_back(c.to_json());
    j["cells"] = arr;
    return j;
}

ExperimentPlan ExperimentPlan::from_json(const nlohmann::json &j)
{
    ExperimentPlan p;
    p.name = j.value("name", std::string("custom"));
    if (j.contains("config"))
        p.base = ScenarioConfig::from_json(j.at("config"));
    p.setups = j.value("setups", p.setups);
    p.trials = j.value("trials", p.trials);
    p.norm_trials = j.value("norm_trials", p.norm_trials);
    p.stat_bins = j.value("stat_bins", p.stat_bins);
    p.batch = j.value("batch", p.batch);
    p.seed = j.value("seed", p.seed);

    Cell base_cell;
    base_cell.m_ports = p.base.m_ports;
    base_cell.xpd_db = p.base.xpd_db;
    base_cell.xpc_t = p.base.xpc_t;
    base_cell.xpc_r = p.base.xpc_r;

    if (j.contains("cells"))
    {
        for (const auto &cj : j.at("cells"))
            p.cells.push_back(Cell::from_json(cj, base_cell));
    }
    else if (j.contains("sweep"))
    {
        const auto &s = j.at("sweep");
        SweepSpec sweep;
        for (const auto &m : s.value("M", std::vector<int>{p.base.m_ports}))
            sweep.m_list.push_back(m);
        for (const auto &v : s.value("schemes", std::vector<std::string>{}))
            sweep.schemes.push_back(scheme_from_string(v));
        for (const auto &v : s.value("bounds", std::vector<std::string>{}))
            sweep.bounds.push_back(bound_from_string(v));
        if (s.contains("xpd_db"))
            for (const auto &v : s.at("xpd_db"))
                sweep.xpd_list.push_back(v.is_string()
                                             ? std::numeric_limits<double>::infinity()
                                             : v.get<double>());
        else
            sweep.xpd_list.push_back(p.base.xpd_db);
        if (s.contains("xpc"))
        {
            for (const auto &v : s.at("xpc"))
            {
                if (v.is_number())
                {
                    const double x = v.get<double>();
                    sweep.xpc_list.push_back({{x, 0.0}, {x, 0.0}});
                }
                else
                {
                    sweep.xpc_list.push_back({{v.at(0).get<double>(), v.at(1).get<double>()},
                                              {v.at(2).get<double>(), v.at(3).get<double>()}});
                }
            }
        }
        else
        {
            sweep.xpc_list.push_back({p.base.xpc_t, p.base.xpc_r});
        }
        for (const auto &v : s.value("power_control", std::vector<std::string>{"equal"}))
            sweep.power_list.push_back(power_mode_from_string(v));
        for (const auto &v : s.value("uni", std::vector<std::string>{"full"}))
            sweep.uni_list.push_back(uni_mode_from_string(v));
        p.cells = expand_sweep(sweep);
    }
    p.validate();
    return p;
}

std::vector<Cell> expand_sweep(const SweepSpec &sweep)
{
    if (sweep.m_list.empty() || sweep.schemes.empty() || sweep.bounds.empty())
        throw std::invalid_argument("sweep lists M, schemes and bounds must be nonempty");
    std::vector<Cell> cells;
    for (int m : sweep.m_list)
        for (double xpd : sweep.xpd_list)
            for (const auto &xpc : sweep.xpc_list)
                for (PowerMode pm : sweep.power_list)
                    for (Scheme sch : sweep.schemes)
                        for (Bound b : sweep.bounds)
                        {
                            Cell c;
                            c.m_ports = m;
                            c.scheme = sch;
                            c.bound = b;
                            c.xpd_db = xpd;
                            c.xpc_t = xpc.first;
                            c.xpc_r = xpc.second;
                            c.power = pm;
                            if (is_uni_bound(b))
                            {
                                for (UniMode um : sweep.uni_list)
                                {
                                    if (um == UniMode::off)
                                        continue;
                                    Cell cu = c;
                                    cu.uni = um;
                                    cells.push_back(cu);
                                }
                            }
                            else
                            {
                                cells.push_back(c);
                            }
                        }
    return cells;
}

// ------------------------------------------------------------------
// per-setup Monte Carlo engine
// ------------------------------------------------------------------

namespace
{

constexpr std::uint64_t purpose_id(StreamPurpose p)
{
    return static_cast<std::uint64_t>(p);
}

constexpr std::uint64_t phase_id(StreamPhase p)
{
    return static_cast<std::uint64_t>(p);
}

struct TrialBlock
{
    std::vector<arma::cx_mat> h_v, h_h;       // per UE, M x T truth
    std::vector<arma::cx_mat> hhat_v, hhat_h; // per UE, M x T estimates
};

void generate_block(const ScenarioConfig &cfg, const std::vector<UEStatistics> &ues,
                    const std::vector<PolarizedEstimator> &est, std::uint64_t seed,
                    int setup, StreamPhase phase, long t0, int n_trials,
                    TrialBlock &block)
{
    const int num_ues = cfg.num_ues;
    const arma::uword m = cfg.m_ports;
    block.h_v.resize(num_ues);
    block.h_h.resize(num_ues);
    block.hhat_v.resize(num_ues);
    block.hhat_h.resize(num_ues);

    arma::cx_mat s_v(m, n_trials), s_h(m, n_trials);
    arma::cx_mat n_v(m, n_trials), n_h(m, n_trials);
    for (int k = 0; k < num_ues; k++)
    {
        for (int t = 0; t < n_trials; t++)
        {
            const std::uint64_t trial = static_cast<std::uint64_t>(t0) + t;
            RngStream(seed, setup, phase_id(phase), purpose_id(StreamPurpose::channel_v), k, trial)
                .fill_cgauss(s_v.colptr(t), m);
            RngStream(seed, setup, phase_id(phase), purpose_id(StreamPurpose::channel_h), k, trial)
                .fill_cgauss(s_h.colptr(t), m);
            RngStream(seed, setup, phase_id(phase), purpose_id(StreamPurpose::pilot_noise_v), k, trial)
                .fill_cgauss(n_v.colptr(t), m);
            RngStream(seed, setup, phase_id(phase), purpose_id(StreamPurpose::pilot_noise_h), k, trial)
                .fill_cgauss(n_h.colptr(t), m);
        }
        transform_channels(ues[k], s_v, s_h, block.h_v[k], block.h_h[k]);
        estimate_batch(est[k], cfg.tau_p, cfg.noise_ul_w, block.h_v[k], block.h_h[k],
                       n_v, n_h, block.hhat_v[k], block.hhat_h[k]);
    }
}

void gather_trial(const TrialBlock &block, int t, arma::cx_mat &h_all,
                  arma::cx_mat &hhat_all)
{
    const int num_ues = static_cast<int>(block.h_v.size());
    for (int k = 0; k < num_ues; k++)
    {
        h_all.col(2 * k) = block.h_v[k].col(t);
        h_all.col(2 * k + 1) = block.h_h[k].col(t);
        hhat_all.col(2 * k) = block.hhat_v[k].col(t);
        hhat_all.col(2 * k + 1) = block.hhat_h[k].col(t);
    }
}

struct UniBlock
{
    std::vector<arma::cx_mat> h, hhat; // per UE, M_uni x T
};

void generate_uni_block(const ScenarioConfig &cfg, const std::vector<UniUEStatistics> &ues,
                        const std::vector<UniEstimator> &est, int tau_uni, std::uint64_t seed,
                        int setup, StreamPhase phase, std::uint64_t mode_tag, long t0,
                        int n_trials, UniBlock &block)
{
    const int num_ues = cfg.num_ues;
    const arma::uword m = ues.front().r_bs.n_rows;
    block.h.resize(num_ues);
    block.hhat.resize(num_ues);
    arma::cx_mat s(m, n_trials), n(m, n_trials);
    for (int k = 0; k < num_ues; k++)
    {
        for (int t = 0; t < n_trials; t++)
        {
            const std::uint64_t trial = static_cast<std::uint64_t>(t0) + t;
            RngStream(seed, setup, phase_id(phase), purpose_id(StreamPurpose::uni_channel),
                      k + 1000 * mode_tag, trial)
                .fill_cgauss(s.colptr(t), m);
            RngStream(seed, setup, phase_id(phase), purpose_id(StreamPurpose::uni_pilot_noise),
                      k + 1000 * mode_tag, trial)
                .fill_cgauss(n.colptr(t), m);
        }
        block.h[k] = ues[k].r_bs_sqrt * s;
        estimate_batch_uni(est[k], tau_uni, cfg.noise_ul_w, block.h[k], n, block.hhat[k]);
    }
}

arma::cx_mat make_combiner(Scheme scheme, const arma::cx_mat &hhat_all,
                           const arma::vec &rho_streams, const arma::cx_mat &fixed,
                           bool *ridged)
{
    switch (scheme)
    {
    case Scheme::mr:
        return combiner_mr(hhat_all);
    case Scheme::zf:
    {
        bool r = false;
        arma::cx_mat v = combiner_zf(hhat_all, &r);
        if (r && ridged != nullptr)
            *ridged = true;
        return v;
    }
    case Scheme::mmse:
        return combiner_mmse(hhat_all, rho_streams, fixed);
    }
    throw std::logic_error("make_combiner: unreachable");
}

int stat_bin(long trial, long trials, int bins)
{
    return static_cast<int>((trial * bins) / trials);
}

struct UniEngineResult
{
    std::map<Scheme, BilinearMomentBins> ul_bins; // combiner vs channel
    std::map<Scheme, BilinearMomentBins> dl_bins; // precoder vs channel
    std::vector<UniUEStatistics> ues;
    std::vector<UniEstimator> est;
    double prelog = 0.0;
    double rho_w = 0.0;
    bool zf_ridged = false;
};

} // namespace

GroupSetupResult evaluate_setup_group(const GroupRequest &req, std::uint64_t seed,
                                      int setup_index)
{
    const ScenarioConfig &cfg = req.cfg;
    cfg.validate();
    const int num_ues = cfg.num_ues;
    const int n_streams = 2 * num_ues;
    const double prelog = prelog_factor(cfg.tau_c, cfg.tau_p);
    const int n_bins = static_cast<int>(std::min<long>(req.stat_bins, req.trials));

    // All cells of a group share one power mode (moments depend on it).
    for (const Cell &c : req.cells)
        if (c.power != req.cells.front().power)
            throw std::invalid_argument("evaluate_setup_group: cells mix power modes");

    // ---------- scenario ----------
    RngStream scen(seed, setup_index, phase_id(StreamPhase::evaluation),
                   purpose_id(StreamPurpose::scenario), 0, 0);
    const ScenarioDraw draw = draw_geometry(cfg, scen);
    const std::vector<UEStatistics> ues = build_ue_statistics(cfg, draw);

    std::vector<PolarizedEstimator> est;
    est.reserve(num_ues);
    for (const UEStatistics &ue : ues)
        est.push_back(estimate_covariances(ue, cfg.pilot_power_w, cfg.pilot_power_w,
                                           cfg.tau_p, cfg.noise_ul_w));

    GroupSetupResult out;
    out.nmse_v.set_size(num_ues);
    out.nmse_h.set_size(num_ues);
    for (int k = 0; k < num_ues; k++)
    {
        out.nmse_v(k) = arma::trace(est[k].c_v).real() / arma::trace(ues[k].r_v).real();
        out.nmse_h(k) = arma::trace(est[k].c_h).real() / arma::trace(ues[k].r_h).real();
    }

    // ---------- data powers ----------
    arma::vec rho_ul(num_ues, arma::fill::value(cfg.ul_power_w));
    arma::vec rho_dl(num_ues, arma::fill::value(cfg.dl_power_w));
    if (req.cells.front().power == PowerMode::maxsum)
    {
        arma::vec beta(num_ues), q(num_ues);
        for (int k = 0; k < num_ues; k++)
        {
            beta(k) = ues[k].beta;
            q(k) = ues[k].q;
        }
        const PowerCoeffs pc = power_coeffs(cfg.m_ports, cfg.tau_c, cfg.tau_p, beta, q,
                                            cfg.pilot_power_w, cfg.noise_ul_w);
        out.ul_alloc = ul_max_sum_se(pc, cfg.noise_ul_w, 2.0 * cfg.ul_power_w);
        out.dl_alloc = dl_max_sum_se(pc, cfg.noise_dl_w,
                                     2.0 * num_ues * cfg.dl_power_w);
        out.has_ul_alloc = out.has_dl_alloc = true;
        rho_ul = out.ul_alloc.rho_w;
        rho_dl = out.dl_alloc.rho_w;
    }
    arma::vec rho_ul_streams(n_streams), rho_dl_streams(n_streams);
    for (int k = 0; k < num_ues; k++)
    {
        rho_ul_streams(2 * k) = rho_ul_streams(2 * k + 1) = rho_ul(k);
        rho_dl_streams(2 * k) = rho_dl_streams(2 * k + 1) = rho_dl(k);
    }

    // ---------- what the cells need ----------
    std::set<Scheme> ul_schemes, dl_schemes;
    bool need_sic = false;
    std::set<UniMode> uni_modes;
    std::map<UniMode, std::set<Scheme>> uni_ul_schemes, uni_dl_schemes;
    for (const Cell &c : req.cells)
    {
        switch (c.bound)
        {
        case Bound::ul_uatf: ul_schemes.insert(c.scheme); break;
        case Bound::ul_sic: need_sic = true; break;
        case Bound::dl_linear:
        case Bound::dl_sic: dl_schemes.insert(c.scheme); break;
        case Bound::uni_ul_uatf:
            uni_modes.insert(c.uni);
            uni_ul_schemes[c.uni].insert(c.scheme);
            break;
        case Bound::uni_dl_uatf:
            uni_modes.insert(c.uni);
            uni_dl_schemes[c.uni].insert(c.scheme);
            break;
        case Bound::uni_ul_mr_closed:
        case Bound::uni_dl_mr_closed: uni_modes.insert(c.uni); break;
        default: break;
        }
    }

    // ---------- dual-polarized Monte Carlo ----------
    std::map<Scheme, BilinearMomentBins> ul_bins;
    std::map<Scheme, DlMomentBins> dl_bins;
    SicBins sic_bins;
    bool zf_ridged = false;

    const bool need_dp_mc = !ul_schemes.empty() || !dl_schemes.empty() || need_sic;
    if (need_dp_mc)
    {
        arma::cx_mat fixed_ul = cfg.noise_ul_w
                                * arma::eye<arma::cx_mat>(cfg.m_ports, cfg.m_ports);
        for (int l = 0; l < num_ues; l++)
            fixed_ul += rho_ul(l) * est[l].c_v + rho_ul(l) * est[l].c_h;
        const HermPdFactor fixed_chol(fixed_ul);

        // Precoder normalizers: exact traces for MR, independent draws else.
        std::map<Scheme, arma::vec> dl_norm2;
        std::set<Scheme> norm_schemes;
        for (Scheme s : dl_schemes)
            if (s != Scheme::mr)
                norm_schemes.insert(s);
        if (dl_schemes.count(Scheme::mr) != 0)
        {
            arma::vec n2(n_streams);
            for (int k = 0; k < num_ues; k++)
            {
                n2(2 * k) = est[k].tr_gamma_v;
                n2(2 * k + 1) = est[k].tr_gamma_h;
            }
            dl_norm2[Scheme::mr] = n2;
        }
        if (!norm_schemes.empty())
        {
            std::map<Scheme, arma::vec> sums;
            for (Scheme s : norm_schemes)
                sums[s] = arma::vec(n_streams, arma::fill::zeros);
            TrialBlock block;
            arma::cx_mat h_all(cfg.m_ports, n_streams), hhat_all(cfg.m_ports, n_streams);
            for (long t0 = 0; t0 < req.norm_trials; t0 += req.batch)
            {
                const int n_t = static_cast<int>(std::min<long>(req.batch, req.norm_trials - t0));
                generate_block(cfg, ues, est, seed, setup_index, StreamPhase::normalization,
                               t0, n_t, block);
                for (int t = 0; t < n_t; t++)
                {
                    gather_trial(block, t, h_all, hhat_all);
                    for (Scheme s : norm_schemes)
                    {
                        const arma::cx_mat v = make_combiner(s, hhat_all, rho_ul_streams,
                                                             fixed_ul, &zf_ridged);
                        sums[s] += arma::sum(arma::square(arma::abs(v)), 0).t();
                    }
                }
            }
            for (Scheme s : norm_schemes)
                dl_norm2[s] = sums[s] / static_cast<double>(req.norm_trials);
        }

        for (Scheme s : ul_schemes)
            ul_bins[s].init(n_streams, n_streams, n_bins);
        for (Scheme s : dl_schemes)
            dl_bins[s].init(num_ues, n_bins);
        if (need_sic)
            sic_bins.init(num_ues, n_bins, req.per_ue_sic);

        std::set<Scheme> all_schemes = ul_schemes;
        all_schemes.insert(dl_schemes.begin(), dl_schemes.end());

        TrialBlock block;
        arma::cx_mat h_all(cfg.m_ports, n_streams), hhat_all(cfg.m_ports, n_streams);
        for (long t0 = 0; t0 < req.trials; t0 += req.batch)
        {
            const int n_t = static_cast<int>(std::min<long>(req.batch, req.trials - t0));
            generate_block(cfg, ues, est, seed, setup_index, StreamPhase::evaluation,
                           t0, n_t, block);
            for (int t = 0; t < n_t; t++)
            {
                gather_trial(block, t, h_all, hhat_all);
                const int bin = stat_bin(t0 + t, req.trials, n_bins);
                for (Scheme s : all_schemes)
                {
                    const arma::cx_mat v = make_combiner(s, hhat_all, rho_ul_streams,
                                                         fixed_ul, &zf_ridged);
                    if (ul_schemes.count(s) != 0)
                        ul_bins[s].add(bin, v, h_all);
                    if (dl_schemes.count(s) != 0)
                    {
                        const arma::cx_mat w =
                            precoder_from_combiner(v, dl_norm2[s], rho_dl_streams);
                        dl_bins[s].add(bin, h_all.t() * w);
                    }
                }
                if (need_sic)
                    sic_bins.add_trial(bin, hhat_all, rho_ul_streams, fixed_ul, fixed_chol);
            }
        }
    }

    // ---------- uni-polarized benchmark ----------
    std::map<UniMode, UniEngineResult> uni;
    for (UniMode mode : uni_modes)
    {
        UniEngineResult &u = uni[mode];
        const int m_uni = (mode == UniMode::half) ? cfg.m_ports / 2 : cfg.m_ports;
        const double power_factor = (mode == UniMode::half) ? 2.0 : 1.0;
        const int tau_uni = num_ues;
        const double p_uni = power_factor * cfg.pilot_power_w;
        u.rho_w = power_factor * cfg.dl_power_w;
        const double rho_ul_uni = power_factor * cfg.ul_power_w;
        u.prelog = prelog_factor(cfg.tau_c, tau_uni);

        u.ues = build_uni_statistics(cfg, draw, m_uni);
        u.est.reserve(num_ues);
        for (const UniUEStatistics &ue : u.ues)
            u.est.push_back(estimate_covariances_uni(ue.r_bs, p_uni, tau_uni, cfg.noise_ul_w));

        const std::set<Scheme> &uls = uni_ul_schemes[mode];
        const std::set<Scheme> &dls = uni_dl_schemes[mode];
        if (uls.empty() && dls.empty())
            continue;

        arma::cx_mat fixed = cfg.noise_ul_w * arma::eye<arma::cx_mat>(m_uni, m_uni);
        for (int l = 0; l < num_ues; l++)
            fixed += rho_ul_uni * u.est[l].c;
        const arma::vec rho_streams(num_ues, arma::fill::value(rho_ul_uni));
        const arma::vec rho_dl_uni(num_ues, arma::fill::value(u.rho_w));
        const std::uint64_t mode_tag = (mode == UniMode::half) ? 1 : 2;

        std::map<Scheme, arma::vec> norm2;
        std::set<Scheme> norm_schemes;
        for (Scheme s : dls)
            if (s != Scheme::mr)
                norm_schemes.insert(s);
        if (dls.count(Scheme::mr) != 0)
        {
            arma::vec n2(num_ues);
            for (int k = 0; k < num_ues; k++)
                n2(k) = u.est[k].tr_gamma;
            norm2[Scheme::mr] = n2;
        }
        if (!norm_schemes.empty())
        {
            std::map<Scheme, arma::vec> sums;
            for (Scheme s : norm_schemes)
                sums[s] = arma::vec(num_ues, arma::fill::zeros);
            UniBlock block;
            arma::cx_mat h_all(m_uni, num_ues), hhat_all(m_uni, num_ues);
            for (long t0 = 0; t0 < req.norm_trials; t0 += req.batch)
            {
                const int n_t = static_cast<int>(std::min<long>(req.batch, req.norm_trials - t0));
                generate_uni_block(cfg, u.ues, u.est, tau_uni, seed, setup_index,
                                   StreamPhase::normalization, mode_tag, t0, n_t, block);
                for (int t = 0; t < n_t; t++)
                {
                    for (int k = 0; k < num_ues; k++)
                        hhat_all.col(k) = block.hhat[k].col(t);
                    for (Scheme s : norm_schemes)
                    {
                        const arma::cx_mat v = make_combiner(s, hhat_all, rho_streams,
                                                             fixed, &u.zf_ridged);
                        sums[s] += arma::sum(arma::square(arma::abs(v)), 0).t();
                    }
                }
            }
            for (Scheme s : norm_schemes)
                norm2[s] = sums[s] / static_cast<double>(req.norm_trials);
        }

        for (Scheme s : uls)
            u.ul_bins[s].init(num_ues, num_ues, n_bins);
        for (Scheme s : dls)
            u.dl_bins[s].init(num_ues, num_ues, n_bins);

        std::set<Scheme> all = uls;
        all.insert(dls.begin(), dls.end());
        UniBlock block;
        arma::cx_mat h_all(m_uni, num_ues), hhat_all(m_uni, num_ues);
        for (long t0 = 0; t0 < req.trials; t0 += req.batch)
        {
            const int n_t = static_cast<int>(std::min<long>(req.batch, req.trials - t0));
            generate_uni_block(cfg, u.ues, u.est, tau_uni, seed, setup_index,
                               StreamPhase::evaluation, mode_tag, t0, n_t, block);
            for (int t = 0; t < n_t; t++)
            {
                for (int k = 0; k < num_ues; k++)
                {
                    h_all.col(k) = block.h[k].col(t);
                    hhat_all.col(k) = block.hhat[k].col(t);
                }
                const int bin = stat_bin(t0 + t, req.trials, n_bins);
                for (Scheme s : all)
                {
                    const arma::cx_mat v = make_combiner(s, hhat_all, rho_streams,
                                                         fixed, &u.zf_ridged);
                    if (uls.count(s) != 0)
                        u.ul_bins[s].add(bin, v, h_all);
                    if (dls.count(s) != 0)
                        u.dl_bins[s].add(bin, precoder_from_combiner(v, norm2[s], rho_dl_uni),
                                         h_all);
                }
            }
        }
    }

    // ---------- assemble the per-cell reports ----------
    out.reports.reserve(req.cells.size());
    for (const Cell &c : req.cells)
    {
        SEReport rep;
        switch (c.bound)
        {
        case Bound::ul_uatf:
            rep = se_ul_uatf(ul_bins.at(c.scheme), rho_ul_streams, cfg.noise_ul_w,
                             prelog, 2);
            break;
        case Bound::ul_sic:
            rep = se_ul_sic(sic_bins, prelog);
            break;
        case Bound::ul_mr_closed:
            rep = se_ul_mr_closed(ues, est, rho_ul, rho_ul, cfg.noise_ul_w, prelog);
            break;
        case Bound::dl_linear:
            rep = se_dl_linear(dl_bins.at(c.scheme), cfg.noise_dl_w, prelog);
            break;
        case Bound::dl_sic:
            rep = se_dl_sic(dl_bins.at(c.scheme), cfg.noise_dl_w, prelog);
            break;
        case Bound::dl_mr_closed:
            rep = se_dl_mr_closed(ues, est, rho_dl, rho_dl, cfg.noise_dl_w, prelog);
            break;
        case Bound::uni_ul_uatf:
        {
            const UniEngineResult &u = uni.at(c.uni);
            const double rho_ul_uni = ((c.uni == UniMode::half) ? 2.0 : 1.0) * cfg.ul_power_w;
            rep = se_ul_uatf(u.ul_bins.at(c.scheme),
                             arma::vec(num_ues, arma::fill::value(rho_ul_uni)),
                             cfg.noise_ul_w, u.prelog, 1);
            rep.bound = to_string(Bound::uni_ul_uatf);
            break;
        }
        case Bound::uni_dl_uatf:
        {
            const UniEngineResult &u = uni.at(c.uni);
            rep = se_uni_dl_uatf(u.dl_bins.at(c.scheme), cfg.noise_dl_w, u.prelog);
            break;
        }
        case Bound::uni_ul_mr_closed:
        {
            const UniEngineResult &u = uni.at(c.uni);
            const double rho_ul_uni = ((c.uni == UniMode::half) ? 2.0 : 1.0) * cfg.ul_power_w;
            rep = se_uni_ul_mr_closed(u.ues, u.est,
                                      arma::vec(num_ues, arma::fill::value(rho_ul_uni)),
                                      cfg.noise_ul_w, u.prelog);
            break;
        }
        case Bound::uni_dl_mr_closed:
        {
            const UniEngineResult &u = uni.at(c.uni);
            rep = se_uni_dl_mr_closed(u.ues, u.est,
                                      arma::vec(num_ues, arma::fill::value(u.rho_w)),
                                      cfg.noise_dl_w, u.prelog);
            break;
        }
        }
        rep.scheme = to_string(c.scheme);
        rep.zf_ridged = zf_ridged || (uni.count(c.uni) != 0 && uni.at(c.uni).zf_ridged);
        if (rep.se_per_ue.n_elem == 0 && rep.se_streams.n_rows > 0)
            rep.finalize_from_streams();
        out.reports.push_back(std::move(rep));
    }
    return out;
}

// ------------------------------------------------------------------
// plan execution
// ------------------------------------------------------------------

double CellResult::mean_sum_se() const
{
    return arma::mean(sum_se);
}

double CellResult::stderr_sum_se() const
{
    if (sum_se.n_elem < 2)
        return 0.0;
    return arma::stddev(sum_se) / std::sqrt(static_cast<double>(sum_se.n_elem));
}

namespace
{

struct GroupKey
{
    int m_ports;
    double xpd_db;
    std::complex<double> t, r;
    PowerMode power;

    bool operator<(const GroupKey &o) const
    {
        auto tup = [](const GroupKey &g) {
            return std::make_tuple(g.m_ports, g.xpd_db, g.t.real(), g.t.imag(),
                                   g.r.real(), g.r.imag(), static_cast<int>(g.power));
        };
        return tup(*this) < tup(o);
    }
};

struct Group
{
    GroupRequest req;
    std::vector<std::size_t> cell_indices;
};

} // namespace

RunRecord run_plan(const ExperimentPlan &plan, int threads)
{
    plan.validate();
    configure_blas_single_thread();
    const auto t_start = std::chrono::steady_clock::now();

    std::map<GroupKey, Group> groups;
    for (std::size_t i = 0; i < plan.cells.size(); i++)
    {
        const Cell &c = plan.cells[i];
        GroupKey key{c.m_ports, c.xpd_db, c.xpc_t, c.xpc_r, c.power};
        Group &g = groups[key];
        if (g.cell_indices.empty())
        {
            g.req.cfg = plan.base;
            g.req.cfg.m_ports = c.m_ports;
            g.req.cfg.xpd_db = c.xpd_db;
            g.req.cfg.xpc_t = c.xpc_t;
            g.req.cfg.xpc_r = c.xpc_r;
            g.req.trials = plan.trials;
            g.req.norm_trials = plan.norm_trials;
            g.req.stat_bins = plan.stat_bins;
            g.req.batch = plan.batch;
        }
        g.req.cells.push_back(c);
        g.cell_indices.push_back(i);
    }

    RunRecord record;
    record.plan_hash = plan_hash(plan);
    record.cells.resize(plan.cells.size());
    for (std::size_t i = 0; i < plan.cells.size(); i++)
    {
        record.cells[i].cell = plan.cells[i];
        record.cells[i].per_ue.set_size(plan.setups, plan.base.num_ues);
        record.cells[i].sum_se.set_size(plan.setups);
    }

    std::vector<Group *> group_list;
    for (auto &kv : groups)
        group_list.push_back(&kv.second);

    // per (group, setup) diagnostics, reduced after the join for determinism
    std::vector<std::vector<GroupSetupResult>> results(group_list.size());
    for (auto &r : results)
        r.resize(plan.setups);

    std::atomic<int> next_setup{0};
    std::atomic<bool> failed{false};
    std::string error_message;
    std::mutex error_mutex;

    auto worker = [&]() {
        for (;;)
        {
            const int s = next_setup.fetch_add(1);
            if (s >= plan.setups || failed.load())
                break;
            try
            {
                for (std::size_t g = 0; g < group_list.size(); g++)
                    results[g][s] = evaluate_setup_group(group_list[g]->req, plan.seed, s);
            }
            catch (const std::exception &e)
            {
                std::lock_guard<std::mutex> lock(error_mutex);
                error_message = e.what();
                failed.store(true);
                break;
            }
        }
    };

    const int n_workers = std::max(1, threads);
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int i = 0; i < n_workers; i++)
        pool.emplace_back(worker);
    for (auto &th : pool)
        th.join();
    if (failed.load())
        throw std::runtime_error("run_plan: " + error_message);

    // reduce in deterministic (group, setup) order
    for (std::size_t g = 0; g < group_list.size(); g++)
    {
        const Group &grp = *group_list[g];
        arma::vec nmse_v(plan.base.num_ues, arma::fill::zeros);
        arma::vec nmse_h(plan.base.num_ues, arma::fill::zeros);
        for (int s = 0; s < plan.setups; s++)
        {
            const GroupSetupResult &res = results[g][s];
            for (std::size_t j = 0; j < grp.cell_indices.size(); j++)
            {
                CellResult &cr = record.cells[grp.cell_indices[j]];
                const SEReport &rep = res.reports[j];
                cr.per_ue.row(s) = rep.se_per_ue.t();
                cr.sum_se(s) = rep.sum_se;
                cr.zf_ridged = cr.zf_ridged || rep.zf_ridged;
            }
            if (res.has_ul_alloc)
            {
                record.solver_calls += 2;
                record.solver_max_kkt = std::max({record.solver_max_kkt,
                                                  res.ul_alloc.kkt_residual,
                                                  res.dl_alloc.kkt_residual});
                record.solver_fallbacks += (res.ul_alloc.used_equal_fallback ? 1 : 0)
                                           + (res.dl_alloc.used_equal_fallback ? 1 : 0);
            }
            nmse_v += res.nmse_v;
            nmse_h += res.nmse_h;
        }
        nlohmann::json env;
        env["M"] = grp.req.cfg.m_ports;
        env["xpd_db"] = std::isinf(grp.req.cfg.xpd_db) ? nlohmann::json("inf")
                                                       : nlohmann::json(grp.req.cfg.xpd_db);
        env["nmse_v"] = std::vector<double>(nmse_v.begin(), nmse_v.end());
        env["nmse_h"] = std::vector<double>(nmse_h.begin(), nmse_h.end());
        for (auto &v : env["nmse_v"])
            v = v.get<double>() / plan.setups;
        for (auto &v : env["nmse_h"])
            v = v.get<double>() / plan.setups;
        record.nmse.push_back(env);
    }

    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return record;
}

std::string plan_hash(const ExperimentPlan &plan)
{
    const std::string dump = plan.to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (unsigned char c : dump)
    {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace
{

std::string fmt_double(double v)
{
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

fs::path hash_path(const ExperimentPlan &plan, const std::string &out_dir)
{
    return fs::path(out_dir) / (plan.name + ".plan_hash");
}

} // namespace

bool plan_already_complete(const ExperimentPlan &plan, const std::string &out_dir)
{
    const fs::path hp = hash_path(plan, out_dir);
    if (!fs::exists(hp))
        return false;
    std::ifstream in(hp);
    std::string stored;
    in >> stored;
    if (stored == plan_hash(plan))
        return true;
    throw std::invalid_argument("output directory " + out_dir + " holds results of a "
                                "different plan (hash mismatch); refusing to mix data");
}

bool write_outputs(const ExperimentPlan &plan, const RunRecord &record,
                   const std::string &out_dir)
{
    fs::create_directories(out_dir);
    if (plan_already_complete(plan, out_dir))
        return false;

    const int num_ues = plan.base.num_ues;
    const fs::path csv_path = fs::path(out_dir) / (plan.name + ".csv");
    std::ofstream csv(csv_path);
    if (!csv)
        throw std::runtime_error("cannot write " + csv_path.string());
    csv << "M,scheme,bound,setup_id,sum_se";
    for (int k = 1; k <= num_ues; k++)
        csv << ",se_ue_" << k;
    csv << ",xpd_db,xpc_t_re,xpc_t_im,xpc_r_re,xpc_r_im,power_control,uni\n";
    for (const CellResult &cr : record.cells)
    {
        for (int s = 0; s < plan.setups; s++)
        {
            csv << cr.cell.m_ports << ',' << to_string(cr.cell.scheme) << ','
                << to_string(cr.cell.bound) << ',' << s << ','
                << fmt_double(cr.sum_se(s));
            for (int k = 0; k < num_ues; k++)
                csv << ',' << fmt_double(cr.per_ue(s, k));
            csv << ',' << fmt_double(cr.cell.xpd_db) << ','
                << fmt_double(cr.cell.xpc_t.real()) << ','
                << fmt_double(cr.cell.xpc_t.imag()) << ','
                << fmt_double(cr.cell.xpc_r.real()) << ','
                << fmt_double(cr.cell.xpc_r.imag()) << ','
                << to_string(cr.cell.power) << ',' << to_string(cr.cell.uni) << '\n';
        }
    }
    csv.close();

    nlohmann::json j;
    j["figure"] = plan.name;
    j["plan_hash"] = record.plan_hash;
    j["version"] = record.version;
    j["wall_seconds"] = record.wall_seconds;
    j["setups"] = plan.setups;
    j["trials"] = plan.trials;
    j["seed"] = plan.seed;
    nlohmann::json cells = nlohmann::json::array();
    for (const CellResult &cr : record.cells)
    {
        nlohmann::json c = cr.cell.to_json();
        c["mean_sum_se"] = cr.mean_sum_se();
        c["stderr_sum_se"] = cr.stderr_sum_se();
        c["zf_ridged"] = cr.zf_ridged;
        cells.push_back(c);
    }
    j["cells"] = cells;
    j["estimation_nmse"] = record.nmse;
    if (record.solver_calls > 0)
    {
        j["power_control"] = {{"solver_calls", record.solver_calls},
                              {"max_kkt_residual", record.solver_max_kkt},
                              {"equal_power_fallbacks", record.solver_fallbacks}};
    }
    const fs::path json_path = fs::path(out_dir) / (plan.name + "_summary.json");
    std::ofstream js(json_path);
    js << j.dump(2) << '\n';
    js.close();

    std::ofstream hf(hash_path(plan, out_dir));
    hf << record.plan_hash << '\n';
    return true;
}

// ------------------------------------------------------------------
// figures
// ------------------------------------------------------------------

std::vector<std::string> figure_ids()
{
    return {"fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8",
            "fig9", "fig10"};
}

ExperimentPlan figure_plan(const std::string &figure_id, const ScenarioConfig &base)
{
    ExperimentPlan plan;
    plan.name = figure_id;
    plan.base = base;
    plan.seed = base.rng_seed;

    const std::vector<int> m_list = {20, 40, 60, 80, 100};
    SweepSpec sweep;
    sweep.m_list = m_list;
    sweep.xpd_list = {base.xpd_db};
    sweep.xpc_list = {{base.xpc_t, base.xpc_r}};
    sweep.power_list = {PowerMode::equal};
    sweep.uni_list = {UniMode::full};

    auto push = [&plan](const SweepSpec &s) {
        auto cells = expand_sweep(s);
        plan.cells.insert(plan.cells.end(), cells.begin(), cells.end());
    };

    if (figure_id == "fig1" || figure_id == "fig10")
    {
        // uplink schemes; fig10 adds the uni-polarized benchmark curves
        SweepSpec s = sweep;
        s.schemes = {Scheme::mmse};
        s.bounds = {Bound::ul_sic};
        push(s);
        s.schemes = {Scheme::mmse, Scheme::zf, Scheme::mr};
        s.bounds = {Bound::ul_uatf};
        push(s);
        s.schemes = {Scheme::mr};
        s.bounds = {Bound::ul_mr_closed};
        push(s);
        if (figure_id == "fig10")
        {
            s.schemes = {Scheme::mmse, Scheme::zf};
            s.bounds = {Bound::uni_ul_uatf};
            push(s);
            s.schemes = {Scheme::mr};
            s.bounds = {Bound::uni_ul_mr_closed};
            push(s);
        }
    }
    else if (figure_id == "fig2")
    {
        SweepSpec s = sweep;
        s.schemes = {Scheme::mmse, Scheme::zf, Scheme::mr};
        s.bounds = {Bound::dl_sic, Bound::dl_linear};
        push(s);
        s.schemes = {Scheme::mr};
        s.bounds = {Bound::dl_mr_closed};
        push(s);
    }
    else if (figure_id == "fig3" || figure_id == "fig4")
    {
        SweepSpec s = sweep;
        s.uni_list = {figure_id == "fig3" ? UniMode::full : UniMode::half};
        s.schemes = {Scheme::mmse, Scheme::zf, Scheme::mr};
        s.bounds = {Bound::dl_sic};
        push(s);
        s.schemes = {Scheme::mr};
        s.bounds = {Bound::dl_mr_closed};
        push(s);
        s.schemes = {Scheme::mmse, Scheme::zf};
        s.bounds = {Bound::uni_dl_uatf};
        push(s);
        s.schemes = {Scheme::mr};
        s.bounds = {Bound::uni_dl_mr_closed};
        push(s);
    }
    else if (figure_id == "fig5")
    {
        SweepSpec s = sweep;
        s.xpd_list = {0.0, std::numeric_limits<double>::infinity()};
        s.schemes = {Scheme::mmse};
        s.bounds = {Bound::ul_sic};
        push(s);
        s.schemes = {Scheme::mmse, Scheme::zf, Scheme::mr};
        s.bounds = {Bound::ul_uatf};
        push(s);
    }
    else if (figure_id == "fig6")
    {
        SweepSpec s = sweep;
        s.xpd_list = {0.0, std::numeric_limits<double>::infinity()};
        s.schemes = {Scheme::mmse, Scheme::zf, Scheme::mr};
        s.bounds = {Bound::dl_sic, Bound::dl_linear};
        push(s);
    }
    else if (figure_id == "fig7" || figure_id == "fig8")
    {
        // sum-SE samples for CDF plots: MR closed forms, equal vs max sum SE
        SweepSpec s = sweep;
        s.m_list = {100};
        s.power_list = {PowerMode::equal, PowerMode::maxsum};
        s.schemes = {Scheme::mr};
        s.bounds = {figure_id == "fig7" ? Bound::ul_mr_closed : Bound::dl_mr_closed};
        push(s);
    }
    else if (figure_id == "fig9")
    {
        SweepSpec s = sweep;
        s.xpc_list = {{{0.0, 0.0}, {0.0, 0.0}}, {{0.8, 0.0}, {0.8, 0.0}}};
        s.schemes = {Scheme::mmse, Scheme::zf, Scheme::mr};
        s.bounds = {Bound::dl_sic, Bound::dl_linear};
        push(s);
    }
    else
    {
        throw std::invalid_argument("unknown figure id '" + figure_id + "'");
    }
    plan.validate();
    return plan;
}

void dump_channels(const ScenarioConfig &cfg, long trials, const std::string &path)
{
    cfg.validate();
    if (trials <= 0)
        throw std::invalid_argument("dump_channels: trials must be positive");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("dump_channels: cannot write " + path);

    RngStream scen(cfg.rng_seed, 0, phase_id(StreamPhase::evaluation),
                   purpose_id(StreamPurpose::scenario), 0, 0);
    const std::vector<UEStatistics> ues = build_ue_statistics(cfg, scen);

    const std::uint32_t header[3] = {static_cast<std::uint32_t>(cfg.m_ports),
                                     static_cast<std::uint32_t>(cfg.num_ues),
                                     static_cast<std::uint32_t>(trials)};
    out.write(reinterpret_cast<const char *>(header), sizeof(header));

    std::vector<float> row(2 * cfg.m_ports * 2);
    for (long t = 0; t < trials; t++)
    {
        for (int k = 0; k < cfg.num_ues; k++)
        {
            RngStream rng(cfg.rng_seed, 0, phase_id(StreamPhase::evaluation),
                          purpose_id(StreamPurpose::channel_v), k, t);
            const arma::cx_mat h = sample_channel_general(ues[k], rng);
            std::size_t idx = 0;
            for (arma::uword rr = 0; rr < 2; rr++)
                for (arma::uword cc = 0; cc < h.n_cols; cc++)
                {
                    row[idx++] = static_cast<float>(h(rr, cc).real());
                    row[idx++] = static_cast<float>(h(rr, cc).imag());
                }
            out.write(reinterpret_cast<const char *>(row.data()),
                      static_cast<std::streamsize>(row.size() * sizeof(float)));
        }
    }
}

} // namespace dpmimo
