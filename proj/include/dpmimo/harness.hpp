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

#ifndef DPMIMO_HARNESS_HPP
#define DPMIMO_HARNESS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpmimo/power.hpp"
#include "dpmimo/se.hpp"

namespace dpmimo
{

inline constexpr const char *kVersion = "0.1.0";

// Pin BLAS to one thread; the harness parallelizes over setups itself and
// the outputs must not depend on the worker count.
void configure_blas_single_thread();

enum class UniMode
{
    off,
    half, // M_uni = M/2, transmit powers doubled: same aperture, same total power
    full, // M_uni = M: doubled aperture, same per-antenna power
};

const char *to_string(UniMode m);
UniMode uni_mode_from_string(const std::string &s);

// One point of an experiment sweep.
struct Cell
{
    int m_ports = 100;
    Scheme scheme = Scheme::mr;
    Bound bound = Bound::ul_uatf;
    double xpd_db = 5.0;
    std::complex<double> xpc_t{0.0, 0.0};
    std::complex<double> xpc_r{0.0, 0.0};
    UniMode uni = UniMode::off;
    PowerMode power = PowerMode::equal;

    nlohmann::json to_json() const;
    static Cell from_json(const nlohmann::json &j, const Cell &base);
};

struct ExperimentPlan
{
    std::string name = "custom";
    ScenarioConfig base;
    std::vector<Cell> cells;
    int setups = 100;
    long trials = 10000;
    int norm_trials = 2000;
    int stat_bins = 100;
    int batch = 64;
    std::uint64_t seed = 1;

    void validate() const;
    nlohmann::json to_json() const;
    static ExperimentPlan from_json(const nlohmann::json &j);
};

// Sweep lists expanded into cells; uni bounds pair with the uni list entries,
// everything else uses UniMode::off.
struct SweepSpec
{
    std::vector<int> m_list;
    std::vector<Scheme> schemes;
    std::vector<Bound> bounds;
    std::vector<double> xpd_list;
    std::vector<std::pair<std::complex<double>, std::complex<double>>> xpc_list;
    std::vector<PowerMode> power_list;
    std::vector<UniMode> uni_list;
};

std::vector<Cell> expand_sweep(const SweepSpec &sweep);

// ------------------------------------------------------------------
// per-setup evaluation
// ------------------------------------------------------------------

// Cells sharing one propagation environment (M, XPD, XPC, power mode); they
// are evaluated in a single pass over shared channel draws.
struct GroupRequest
{
    ScenarioConfig cfg; // environment already applied
    std::vector<Cell> cells;
    long trials = 10000;
    int norm_trials = 2000;
    int stat_bins = 100;
    int batch = 64;
    bool per_ue_sic = true;
};

struct GroupSetupResult
{
    std::vector<SEReport> reports; // aligned with request cells
    bool has_ul_alloc = false, has_dl_alloc = false;
    PowerAllocation ul_alloc, dl_alloc;
    arma::vec nmse_v, nmse_h; // per-UE estimation error tr(C)/tr(R)
};

GroupSetupResult evaluate_setup_group(const GroupRequest &req, std::uint64_t seed,
                                      int setup_index);

// ------------------------------------------------------------------
// plan execution and outputs
// ------------------------------------------------------------------

struct CellResult
{
    Cell cell;
    arma::mat per_ue; // setups x K
    arma::vec sum_se; // per setup
    bool zf_ridged = false;

    double mean_sum_se() const;
    double stderr_sum_se() const; // batch means over setups
};

struct RunRecord
{
    std::string plan_hash;
    std::vector<CellResult> cells;
    double wall_seconds = 0.0;
    std::string version = kVersion;
    long solver_calls = 0;
    double solver_max_kkt = 0.0;
    long solver_fallbacks = 0;
    std::vector<nlohmann::json> nmse; // per environment
};

RunRecord run_plan(const ExperimentPlan &plan, int threads);

std::string plan_hash(const ExperimentPlan &plan);

// Writes <name>.csv, <name>_summary.json and <name>.plan_hash into out_dir.
// Returns false without touching anything when the directory already holds a
// completed run of the same plan; a different plan hash raises
// std::invalid_argument (never mix data).
bool write_outputs(const ExperimentPlan &plan, const RunRecord &record,
                   const std::string &out_dir);

// True when out_dir already contains a completed run of this plan.
bool plan_already_complete(const ExperimentPlan &plan, const std::string &out_dir);

// ------------------------------------------------------------------
// figures
// ------------------------------------------------------------------

std::vector<std::string> figure_ids();
ExperimentPlan figure_plan(const std::string &figure_id, const ScenarioConfig &base);

// Binary channel dump for debugging: uint32 header (M, K, trials) followed by
// trial-major, UE-major 2xM row-major complex64 samples.
void dump_channels(const ScenarioConfig &cfg, long trials, const std::string &path);

} // namespace dpmimo

#endif
