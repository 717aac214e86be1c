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

#include "dpmimo/power.hpp"

#include <cmath>
#include <stdexcept>

namespace dpmimo
{

const char *to_string(PowerMode m)
{
    return m == PowerMode::equal ? "equal" : "maxsum";
}

PowerMode power_mode_from_string(const std::string &s)
{
    if (s == "equal")
        return PowerMode::equal;
    if (s == "maxsum")
        return PowerMode::maxsum;
    throw std::invalid_argument("unknown power-control mode '" + s
                                + "' (expected equal or maxsum)");
}

PowerCoeffs power_coeffs(int m_ports, int tau_c, int tau_p, const arma::vec &beta,
                         const arma::vec &q, double pilot_power_w, double sigma2_ul)
{
    PowerCoeffs c;
    c.m_ports = m_ports;
    c.tau_c = tau_c;
    c.tau_p = tau_p;
    c.beta = beta;
    const arma::vec p(beta.n_elem, arma::fill::value(pilot_power_w));
    const UncorrCoeffs u = uncorr_coeffs(beta, q, p, p, tau_p, sigma2_ul);
    c.g1 = u.g_v1;
    c.g2 = u.g_v2;
    return c;
}

namespace
{

double prelog2(const PowerCoeffs &c)
{
    return 2.0 * prelog_factor(c.tau_c, c.tau_p);
}

} // namespace

double ul_sum_se_objective(const PowerCoeffs &c, const arma::vec &rho_w, double sigma2_ul)
{
    const double denom = arma::dot(rho_w, c.beta) + sigma2_ul;
    const double half_m = c.m_ports / 2.0;
    double sum = 0.0;
    for (arma::uword k = 0; k < rho_w.n_elem; k++)
        sum += prelog2(c) * std::log2(1.0 + rho_w(k) * half_m * (c.g1(k) + c.g2(k)) / denom);
    return sum;
}

double dl_sum_se_objective(const PowerCoeffs &c, const arma::vec &rho_w, double sigma2_dl)
{
    const double total = arma::accu(rho_w);
    const double half_m = c.m_ports / 2.0;
    double sum = 0.0;
    for (arma::uword k = 0; k < rho_w.n_elem; k++)
    {
        const double denom = c.beta(k) * total + sigma2_dl;
        sum += prelog2(c) * std::log2(1.0 + rho_w(k) * half_m * (c.g1(k) + c.g2(k)) / denom);
    }
    return sum;
}

namespace
{

// Capped water-filling: maximize sum_k log(1 + a_k x_k) subject to
// sum_k x_k = budget and 0 <= x_k <= cap_k.  Requires sum_k cap_k >= budget.
// Bisection on the water level mu with x_k(mu) = clamp(mu - 1/a_k, 0, cap_k).
arma::vec capped_water_filling(const arma::vec &a, const arma::vec &cap, double budget,
                               int *iterations)
{
    const arma::uword n = a.n_elem;
    arma::vec x(n, arma::fill::zeros);
    if (budget <= 0.0)
        return x;

    auto fill = [&](double mu) {
        double total = 0.0;
        for (arma::uword k = 0; k < n; k++)
        {
            const double xk = (a(k) > 0.0) ? std::clamp(mu - 1.0 / a(k), 0.0, cap(k)) : 0.0;
            x(k) = xk;
            total += xk;
        }
        return total;
    };

    double lo = 0.0;
    double hi = 0.0;
    for (arma::uword k = 0; k < n; k++)
        if (a(k) > 0.0)
            hi = std::max(hi, 1.0 / a(k) + cap(k));
    hi += budget;
    while (fill(hi) < budget)
    {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi))
            break; // caps saturate below the budget; return the saturated point
    }
    int it = 0;
    for (; it < 200; it++)
    {
        const double mid = 0.5 * (lo + hi);
        if (fill(mid) < budget)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-10 * std::max(1.0, hi))
            break;
    }
    fill(hi);
    if (iterations != nullptr)
        *iterations += it;
    return x;
}

} // namespace

PowerAllocation ul_max_sum_se(const PowerCoeffs &c, double sigma2_ul, double rho_tot_w)
{
    const arma::uword n = c.beta.n_elem;
    PowerAllocation alloc;
    alloc.rho_w.zeros(n);
    if (rho_tot_w <= 0.0)
    {
        alloc.objective = 0.0;
        return alloc;
    }
    if (sigma2_ul <= 0.0)
        throw std::invalid_argument("ul_max_sum_se: noise power must be positive");

    const double cap_w = rho_tot_w / 2.0;
    const double half_m = c.m_ports / 2.0;
    arma::vec a(n, arma::fill::zeros); // per-UE concave slope
    for (arma::uword k = 0; k < n; k++)
        if (c.beta(k) > 0.0)
            a(k) = half_m * (c.g1(k) + c.g2(k)) / c.beta(k);

    // Common-denominator variable s = 1 / (sum_l rho_l beta_l + sigma2):
    // full power gives the smallest value, zero power gives 1/sigma2.
    const double s_min = 1.0 / (cap_w * arma::accu(c.beta) + sigma2_ul);
    const double s_max = 1.0 / sigma2_ul;

    int iterations = 0;
    auto inner = [&](double s, arma::vec *x_out) {
        const double budget = 1.0 - sigma2_ul * s;
        const arma::vec cap = s * cap_w * c.beta;
        arma::vec x = capped_water_filling(a, cap, budget, &iterations);
        double val = 0.0;
        for (arma::uword k = 0; k < n; k++)
            val += std::log2(1.0 + a(k) * x(k));
        if (x_out != nullptr)
            *x_out = x;
        return val;
    };

    // Golden-section search on the concave outer function.
    const double gr = 0.61803398874989484820;
    double lo = s_min, hi = s_max;
    double x1 = hi - gr * (hi - lo);
    double x2 = lo + gr * (hi - lo);
    double f1 = inner(x1, nullptr);
    double f2 = inner(x2, nullptr);
    while (hi - lo > 1e-8 * std::abs(hi) && iterations < 1000000)
    {
        if (f1 >= f2)
        {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = inner(x1, nullptr);
        }
        else
        {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = inner(x2, nullptr);
        }
        iterations++;
    }
    const double s = 0.5 * (lo + hi);
    arma::vec x;
    inner(s, &x);
    arma::vec rho(n, arma::fill::zeros);
    for (arma::uword k = 0; k < n; k++)
        if (x(k) > 0.0 && c.beta(k) > 0.0)
            rho(k) = std::clamp(x(k) / (s * c.beta(k)), 0.0, cap_w);

    alloc.iterations = iterations;
    alloc.objective = ul_sum_se_objective(c, rho, sigma2_ul);

    // KKT residual of the inner point: active water level spread across the
    // unconstrained coordinates.
    {
        const double budget = 1.0 - sigma2_ul * s;
        const arma::vec cap = s * cap_w * c.beta;
        double level_min = arma::datum::inf, level_max = -arma::datum::inf;
        for (arma::uword k = 0; k < n; k++)
        {
            const bool interior = x(k) > 1e-12 * budget && x(k) < cap(k) * (1.0 - 1e-12);
            if (interior && a(k) > 0.0)
            {
                const double level = 1.0 / a(k) + x(k);
                level_min = std::min(level_min, level);
                level_max = std::max(level_max, level);
            }
        }
        alloc.kkt_residual = (level_max >= level_min) ? (level_max - level_min)
                                                          / std::max(level_max, 1e-300)
                                                      : 0.0;
    }

    // Equal (full) power is feasible; never return anything worse.  The
    // boundary optimum s = s_min is only approached by the bracket search.
    const arma::vec equal(n, arma::fill::value(cap_w));
    const double equal_obj = ul_sum_se_objective(c, equal, sigma2_ul);
    if (equal_obj >= alloc.objective)
    {
        alloc.rho_w = equal;
        alloc.objective = equal_obj;
        alloc.used_equal_fallback = true;
    }
    else
    {
        alloc.rho_w = rho;
    }
    return alloc;
}

PowerAllocation dl_max_sum_se(const PowerCoeffs &c, double sigma2_dl, double rho_tot_w)
{
    const arma::uword n = c.beta.n_elem;
    PowerAllocation alloc;
    alloc.rho_w.zeros(n);
    if (rho_tot_w <= 0.0)
        return alloc;

    const double budget = rho_tot_w / 2.0;
    const double half_m = c.m_ports / 2.0;
    // At the full-budget optimum the denominator of UE k is fixed to
    // beta_k rho_tot/2 + sigma2, giving a per-UE channel quality a/(sigma2+b).
    arma::vec quality(n);
    for (arma::uword k = 0; k < n; k++)
    {
        const double a = half_m * (c.g1(k) + c.g2(k));
        const double b = budget * c.beta(k);
        quality(k) = (sigma2_dl + b > 0.0) ? a / (sigma2_dl + b) : 0.0;
    }
    int iterations = 0;
    arma::vec rho = capped_water_filling(quality,
                                         arma::vec(n, arma::fill::value(budget)),
                                         budget, &iterations);
    // Rescale the active set so the budget is met exactly.
    const double total = arma::accu(rho);
    if (total > 0.0)
        rho *= budget / total;

    alloc.iterations = iterations;

    // Complementary slackness residual against the recovered water level.
    double mu = 0.0;
    for (arma::uword k = 0; k < n; k++)
        if (rho(k) > 0.0 && quality(k) > 0.0)
            mu = std::max(mu, rho(k) + 1.0 / quality(k));
    double resid = 0.0;
    for (arma::uword k = 0; k < n; k++)
    {
        if (quality(k) <= 0.0)
            continue;
        if (rho(k) > 0.0)
            resid = std::max(resid, std::abs(mu - 1.0 / quality(k) - rho(k)));
        else
            resid = std::max(resid, std::max(0.0, mu - 1.0 / quality(k)));
    }
    alloc.kkt_residual = resid;
    alloc.objective = dl_sum_se_objective(c, rho, sigma2_dl);

    const arma::vec equal(n, arma::fill::value(budget / static_cast<double>(n)));
    const double equal_obj = dl_sum_se_objective(c, equal, sigma2_dl);
    if (equal_obj >= alloc.objective)
    {
        alloc.rho_w = equal;
        alloc.objective = equal_obj;
        alloc.used_equal_fallback = true;
    }
    else
    {
        alloc.rho_w = rho;
    }
    return alloc;
}

} // namespace dpmimo
