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

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "dpmimo/harness.hpp"

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonOpts
{
    std::string out_dir = "out";
    int setups = -1;
    long trials = -1;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    std::string config_path;
    std::vector<std::string> schemes;
    std::vector<std::string> bounds;
    std::optional<double> xpd_db;
    std::vector<double> xpc;
    std::string uni;
    std::string power;
    std::vector<int> m_list;
};

void add_common(CLI::App *cmd, CommonOpts &o)
{
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--setups", o.setups, "number of independent UE drops");
    cmd->add_option("--trials", o.trials, "Monte Carlo trials per setup");
    cmd->add_option("--seed", o.seed, "base RNG seed")->each([&o](const std::string &) {
        o.seed_set = true;
    });
    cmd->add_option("--threads", o.threads, "worker threads (default: hardware)");
    cmd->add_option("--config", o.config_path, "scenario config JSON file");
    cmd->add_option("--scheme", o.schemes, "restrict schemes (mmse, zf, mr)")->delimiter(',');
    cmd->add_option("--bound", o.bounds, "restrict bounds")->delimiter(',');
    cmd->add_option("--xpd-db", o.xpd_db, "override XPD in dB");
    cmd->add_option("--xpc", o.xpc, "override XPC: T or T_re,T_im,R_re,R_im")->delimiter(',');
    cmd->add_option("--uni", o.uni, "uni-polarized benchmark mode (off, half, full)");
    cmd->add_option("--power-control", o.power, "power control (equal, maxsum)");
    cmd->add_option("--m-list", o.m_list, "override the M sweep")->delimiter(',');
}

dpmimo::ScenarioConfig load_base(const CommonOpts &o)
{
    dpmimo::ScenarioConfig base;
    if (!o.config_path.empty())
        base = dpmimo::ScenarioConfig::from_json_file(o.config_path);
    return base;
}

void apply_overrides(dpmimo::ExperimentPlan &plan, const CommonOpts &o)
{
    if (o.setups > 0)
        plan.setups = o.setups;
    if (o.trials > 0)
        plan.trials = o.trials;
    if (o.seed_set)
        plan.seed = o.seed;

    if (!o.schemes.empty())
    {
        std::vector<dpmimo::Scheme> keep;
        for (const auto &s : o.schemes)
            keep.push_back(dpmimo::scheme_from_string(s));
        std::vector<dpmimo::Cell> filtered;
        for (const auto &c : plan.cells)
            for (auto s : keep)
                if (c.scheme == s)
                    filtered.push_back(c);
        plan.cells = filtered;
    }
    if (!o.bounds.empty())
    {
        std::vector<dpmimo::Bound> keep;
        for (const auto &b : o.bounds)
            keep.push_back(dpmimo::bound_from_string(b));
        std::vector<dpmimo::Cell> filtered;
        for (const auto &c : plan.cells)
            for (auto b : keep)
                if (c.bound == b)
                    filtered.push_back(c);
        plan.cells = filtered;
    }
    if (!o.m_list.empty())
    {
        std::vector<dpmimo::Cell> expanded;
        std::vector<dpmimo::Cell> unique_cells;
        for (const auto &c : plan.cells)
        {
            bool seen = false;
            for (const auto &u : unique_cells)
                if (u.scheme == c.scheme && u.bound == c.bound && u.xpd_db == c.xpd_db
                    && u.xpc_t == c.xpc_t && u.xpc_r == c.xpc_r && u.uni == c.uni
                    && u.power == c.power)
                    seen = true;
            if (!seen)
                unique_cells.push_back(c);
        }
        for (int m : o.m_list)
            for (auto c : unique_cells)
            {
                c.m_ports = m;
                expanded.push_back(c);
            }
        plan.cells = expanded;
    }
    if (o.xpd_db.has_value())
        for (auto &c : plan.cells)
            c.xpd_db = *o.xpd_db;
    if (!o.xpc.empty())
    {
        std::complex<double> t, r;
        if (o.xpc.size() == 1)
            t = r = {o.xpc[0], 0.0};
        else if (o.xpc.size() == 4)
        {
            t = {o.xpc[0], o.xpc[1]};
            r = {o.xpc[2], o.xpc[3]};
        }
        else
            throw std::invalid_argument("--xpc takes 1 or 4 comma-separated values");
        for (auto &c : plan.cells)
        {
            c.xpc_t = t;
            c.xpc_r = r;
        }
    }
    if (!o.uni.empty())
    {
        const auto mode = dpmimo::uni_mode_from_string(o.uni);
        if (mode == dpmimo::UniMode::off)
        {
            std::vector<dpmimo::Cell> filtered;
            for (const auto &c : plan.cells)
                if (!dpmimo::is_uni_bound(c.bound))
                    filtered.push_back(c);
            plan.cells = filtered;
        }
        else
        {
            for (auto &c : plan.cells)
                if (dpmimo::is_uni_bound(c.bound))
                    c.uni = mode;
        }
    }
    if (!o.power.empty())
    {
        const auto mode = dpmimo::power_mode_from_string(o.power);
        for (auto &c : plan.cells)
            c.power = mode;
    }
    plan.validate();
}

int execute(const dpmimo::ExperimentPlan &plan, const CommonOpts &o)
{
    const int threads = o.threads > 0
                            ? o.threads
                            : static_cast<int>(std::thread::hardware_concurrency());
    if (dpmimo::plan_already_complete(plan, o.out_dir))
    {
        std::printf("plan %s already complete in %s, skipping\n",
                    dpmimo::plan_hash(plan).c_str(), o.out_dir.c_str());
        return kExitOk;
    }
    const dpmimo::RunRecord record = dpmimo::run_plan(plan, threads);
    dpmimo::write_outputs(plan, record, o.out_dir);
    std::printf("wrote %s/%s.csv (%zu cells x %d setups, %.1f s)\n", o.out_dir.c_str(),
                plan.name.c_str(), record.cells.size(), plan.setups,
                record.wall_seconds);
    return kExitOk;
}

} // namespace

int main(int argc, char **argv)
{
    dpmimo::configure_blas_single_thread();

    CLI::App app{"dpmimo: dual-polarized massive MIMO spectral-efficiency simulator"};
    app.require_subcommand(1);

    auto *run = app.add_subcommand("run", "run an experiment");
    run->require_subcommand(1);

    CommonOpts fig_opts;
    std::string figure_id;
    auto *fig_cmd = run->add_subcommand("figure", "reproduce a paper-style figure");
    fig_cmd->add_option("id", figure_id, "figure id (fig1..fig10)")->required();
    add_common(fig_cmd, fig_opts);

    CommonOpts custom_opts;
    std::string plan_path;
    auto *custom_cmd = run->add_subcommand("custom", "run a custom sweep plan");
    custom_cmd->add_option("plan", plan_path, "plan JSON file")->required();
    add_common(custom_cmd, custom_opts);

    std::string dump_out = "channels.bin";
    long dump_trials = 100;
    std::string dump_config;
    std::uint64_t dump_seed = 0;
    bool dump_seed_set = false;
    auto *dump_cmd = app.add_subcommand("dump-channels",
                                        "write raw channel realizations (debugging)");
    dump_cmd->add_option("--out", dump_out, "output file");
    dump_cmd->add_option("--trials", dump_trials, "number of realizations");
    dump_cmd->add_option("--config", dump_config, "scenario config JSON file");
    dump_cmd->add_option("--seed", dump_seed, "RNG seed")->each([&](const std::string &) {
        dump_seed_set = true;
    });

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try
    {
        if (fig_cmd->parsed())
        {
            auto plan = dpmimo::figure_plan(figure_id, load_base(fig_opts));
            apply_overrides(plan, fig_opts);
            return execute(plan, fig_opts);
        }
        if (custom_cmd->parsed())
        {
            std::ifstream in(plan_path);
            if (!in)
                throw std::invalid_argument("cannot open plan file: " + plan_path);
            nlohmann::json j;
            try
            {
                in >> j;
            }
            catch (const nlohmann::json::exception &e)
            {
                throw std::invalid_argument(std::string("plan parse error: ") + e.what());
            }
            auto plan = dpmimo::ExperimentPlan::from_json(j);
            apply_overrides(plan, custom_opts);
            return execute(plan, custom_opts);
        }
        if (dump_cmd->parsed())
        {
            dpmimo::ScenarioConfig cfg;
            if (!dump_config.empty())
                cfg = dpmimo::ScenarioConfig::from_json_file(dump_config);
            if (dump_seed_set)
                cfg.rng_seed = dump_seed;
            dpmimo::dump_channels(cfg, dump_trials, dump_out);
            std::printf("wrote %s\n", dump_out.c_str());
            return kExitOk;
        }
    }
    catch (const std::invalid_argument &e)
    {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    }
    catch (const nlohmann::json::exception &e)
    {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    }
    catch (const std::exception &e)
    {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return kExitNumerical;
    }
    return kExitConfig;
}
