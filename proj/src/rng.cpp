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

#include "dpmimo/rng.hpp"

#include <cmath>

namespace dpmimo
{

namespace
{

inline std::uint64_t splitmix64(std::uint64_t &x)
{
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k)
{
    return (x << k) | (x >> (64 - k));
}

} // namespace

RngStream::RngStream(std::uint64_t seed,
                     std::uint64_t id0, std::uint64_t id1,
                     std::uint64_t id2, std::uint64_t id3, std::uint64_t id4)
{
    // Absorb the ids one at a time through the splitmix chain so that streams
    // with different (seed, ids) are decorrelated.
    std::uint64_t x = seed;
    (void)splitmix64(x);
    x ^= splitmix64(x) + id0;
    x ^= splitmix64(x) + id1;
    x ^= splitmix64(x) + id2;
    x ^= splitmix64(x) + id3;
    x ^= splitmix64(x) + id4;
    for (auto &s : state_)
        s = splitmix64(x);
    // xoshiro must not start from the all-zero state
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0)
        state_[0] = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t RngStream::next_u64()
{
    // xoshiro256++
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double RngStream::next_uniform()
{
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gauss()
{
    if (has_cached_gauss_)
    {
        has_cached_gauss_ = false;
        return cached_gauss_;
    }
    // Box-Muller; u1 is shifted into (0, 1] so the log never sees zero.
    const double u1 = 1.0 - next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_gauss_ = r * std::sin(a);
    has_cached_gauss_ = true;
    return r * std::cos(a);
}

std::complex<double> RngStream::next_cgauss()
{
    const double u1 = 1.0 - next_uniform();
    const double u2 = next_uniform();
    // radius of a CN(0,1) sample; each quadrature component has variance 1/2
    const double r = std::sqrt(-std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    return {r * std::cos(a), r * std::sin(a)};
}

void RngStream::fill_gauss(double *dst, std::size_t n)
{
    for (std::size_t i = 0; i < n; i++)
        dst[i] = next_gauss();
}

void RngStream::fill_cgauss(std::complex<double> *dst, std::size_t n)
{
    for (std::size_t i = 0; i < n; i++)
        dst[i] = next_cgauss();
}

arma::cx_vec RngStream::cgauss_vec(arma::uword n)
{
    arma::cx_vec v(n);
    fill_cgauss(v.memptr(), n);
    return v;
}

arma::cx_mat RngStream::cgauss_mat(arma::uword n_rows, arma::uword n_cols)
{
    arma::cx_mat m(n_rows, n_cols);
    fill_cgauss(m.memptr(), m.n_elem);
    return m;
}

} // namespace dpmimo
