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

#ifndef DPMIMO_RNG_HPP
#define DPMIMO_RNG_HPP

#include <armadillo>
#include <complex>
#include <cstdint>

namespace dpmimo
{

// Counter-derived xoshiro256++ stream.  Every consumer derives its own stream
// from (seed, id0, id1, ...), so the draws a given (setup, trial, purpose)
// receives never depend on thread scheduling or batch partitioning.
class RngStream
{
  public:
    explicit RngStream(std::uint64_t seed,
                       std::uint64_t id0 = 0, std::uint64_t id1 = 0,
                       std::uint64_t id2 = 0, std::uint64_t id3 = 0,
                       std::uint64_t id4 = 0);

    std::uint64_t next_u64();
    double next_uniform();               // [0, 1)
    double next_gauss();                 // N(0, 1)
    std::complex<double> next_cgauss();  // circularly symmetric CN(0, 1)

    void fill_gauss(double *dst, std::size_t n);
    void fill_cgauss(std::complex<double> *dst, std::size_t n);

    arma::cx_vec cgauss_vec(arma::uword n);
    arma::cx_mat cgauss_mat(arma::uword n_rows, arma::uword n_cols);

  private:
    std::uint64_t state_[4];
    double cached_gauss_ = 0.0;
    bool has_cached_gauss_ = false;
};

// Stream purposes used by the Monte Carlo engine when deriving sub-streams.
// Kept in one place so producers and tests agree on the layout.
enum class StreamPurpose : std::uint64_t
{
    scenario = 1,
    channel_v = 2,
    channel_h = 3,
    pilot_noise_v = 4,
    pilot_noise_h = 5,
    uni_channel = 6,
    uni_pilot_noise = 7,
};

// Evaluation phases; normalization draws must be independent from the draws
// used to estimate the SE moments.
enum class StreamPhase : std::uint64_t
{
    evaluation = 0,
    normalization = 1,
};

} // namespace dpmimo

#endif
