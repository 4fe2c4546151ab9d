// SPDX-License-Identifier: Apache-2.0
//
// rssim - rate-splitting Massive MIMO downlink link-level simulator
// Copyright (C) 2026 The rssim authors
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

// Hardening-bound SINRs and spectral efficiencies of the common and private
// streams. Each UE decodes the common stream first (treating all private
// streams as noise), removes it, then decodes its own private stream.

#pragma once

#include <cmath>
#include <string>

#include "errors.hpp"
#include "linalg.hpp"
#include "moments.hpp"
#include "scenario.hpp"

namespace rssim
{

struct PowerVector
{
    double rho_c = 0.0; // common stream, linear mW
    rvec rho;           // private streams, linear mW

    double total() const { return rho_c + rho.sum(); }
    std::size_t users() const noexcept { return static_cast<std::size_t>(rho.size()); }

    static PowerVector uniform_private(std::size_t K, double rho_total)
    {
        PowerVector p;
        p.rho = rvec::Constant(static_cast<Eigen::Index>(K), rho_total / static_cast<double>(K));
        return p;
    }
};

namespace detail
{

inline void check_table(const PowerVector &p, const MomentTable &t)
{
    if (p.users() != t.users())
        throw std::invalid_argument("power vector and moment table disagree on the number of UEs");
    if (p.rho_c != 0.0 && !t.has_common())
        throw std::invalid_argument("common-stream power without common-stream moments");
}

// sum_i rho_i E{|h_k^H w_i|^2}
inline double private_received_power(std::size_t k, const PowerVector &p, const MomentTable &t)
{
    return t.G_private.row(static_cast<Eigen::Index>(k)).dot(p.rho);
}

inline double common_self_interference(std::size_t k, const PowerVector &p, const MomentTable &t)
{
    return (p.rho_c != 0.0 && t.has_common()) ? p.rho_c * t.common_variance(k) : 0.0;
}

// Cancellation guard: tiny negatives are rounding, anything else means the
// table violates a variance invariant.
inline double guard_denominator(double den, double scale, double sigma2, const char *invariant, std::size_t k)
{
    if (den > 0.0)
        return den;
    if (den > -1e-12 * scale)
        return 1e-12 * sigma2;
    throw numerical_error("negative SINR denominator for UE " + std::to_string(k) + ": moment table violates " +
                          invariant);
}

} // namespace detail

// Interference plus noise seen by the private stream of UE k.
inline double private_denominator(std::size_t k, const PowerVector &p, const MomentTable &t, double sigma2)
{
    const auto kk = static_cast<Eigen::Index>(k);
    const double received = detail::private_received_power(k, p, t);
    const double useful = p.rho(kk) * std::norm(t.g_private(kk));
    const double common = detail::common_self_interference(k, p, t);
    const double den = received - useful + common + sigma2;
    return detail::guard_denominator(den, received + std::abs(common) + sigma2, sigma2,
                                     "E{|h_k^H w|^2} >= |E{h_k^H w}|^2", k);
}

// Interference plus noise seen by the common stream at UE k.
inline double common_denominator(std::size_t k, const PowerVector &p, const MomentTable &t, double sigma2)
{
    const double received = detail::private_received_power(k, p, t);
    const double common = detail::common_self_interference(k, p, t);
    return detail::guard_denominator(received + common + sigma2, received + std::abs(common) + sigma2, sigma2,
                                     "E{|h_k^H w_c|^2} >= |E{h_k^H w_c}|^2", k);
}

inline double gamma_private(std::size_t k, const PowerVector &p, const MomentTable &t, double sigma2)
{
    detail::check_table(p, t);
    const auto kk = static_cast<Eigen::Index>(k);
    const double num = p.rho(kk) * std::norm(t.g_private(kk));
    if (num == 0.0)
        return 0.0;
    return num / private_denominator(k, p, t, sigma2);
}

inline double gamma_common(std::size_t k, const PowerVector &p, const MomentTable &t, double sigma2)
{
    detail::check_table(p, t);
    if (p.rho_c == 0.0 || !t.has_common())
        return 0.0;
    const double num = p.rho_c * std::norm(t.g_common(static_cast<Eigen::Index>(k)));
    return num / common_denominator(k, p, t, sigma2);
}

struct SEReport
{
    rvec gamma_private;
    rvec gamma_common;
    std::size_t l_min = 0;
    rvec se_private;
    double se_common = 0.0;
    double sum_se = 0.0;
    double prelog = 1.0;

    double se_private_total() const { return se_private.sum(); }
};

// Index of the smallest entry, lowest index on ties.
inline std::size_t argmin_lowest(const rvec &v)
{
    std::size_t best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v(i) < v(static_cast<Eigen::Index>(best)))
            best = static_cast<std::size_t>(i);
    return best;
}

inline SEReport se_report(const PowerVector &p, const MomentTable &t, double sigma2, double prelog)
{
    detail::check_table(p, t);
    const std::size_t K = t.users();
    const auto Ki = static_cast<Eigen::Index>(K);
    SEReport r;
    r.prelog = prelog;
    r.gamma_private.resize(Ki);
    r.gamma_common.resize(Ki);
    r.se_private.resize(Ki);
    for (std::size_t k = 0; k < K; ++k)
    {
        const auto kk = static_cast<Eigen::Index>(k);
        r.gamma_private(kk) = gamma_private(k, p, t, sigma2);
        r.gamma_common(kk) = gamma_common(k, p, t, sigma2);
        r.se_private(kk) = prelog * std::log2(1.0 + r.gamma_private(kk));
    }
    r.l_min = argmin_lowest(r.gamma_common);
    r.se_common = prelog * std::log2(1.0 + r.gamma_common(static_cast<Eigen::Index>(r.l_min)));
    r.sum_se = r.se_common;
    for (Eigen::Index k = 0; k < Ki; ++k)
        r.sum_se += r.se_private(k);
    return r;
}

inline SEReport se_report(const PowerVector &p, const MomentTable &t, const ScenarioConfig &config)
{
    return se_report(p, t, config.sigma2_mw(), config.prelog());
}

} // namespace rssim
