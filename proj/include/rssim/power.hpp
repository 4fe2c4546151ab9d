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

// Power allocation by linearized water-filling (ILA-WF).
//
// The sum SE is linearized around the current powers: each stream keeps the
// log of its own useful-plus-interference term and sees every other effect
// through a linear slope. The resulting concave subproblem is solved by
// water-filling with a multiplier mu set by bisection on the power budget.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "errors.hpp"
#include "link.hpp"
#include "moments.hpp"

namespace rssim
{

enum class MuSearch
{
    nested,     // full bisection on mu for every linearization, monotone line search
    interleaved // one bisection step per outer iteration, sequential updates
};

inline const char *to_string(MuSearch m) { return m == MuSearch::nested ? "nested" : "interleaved"; }

struct SolverOptions
{
    MuSearch mu_search = MuSearch::nested;
    bool allow_common = true; // false pins the common power to zero
    int max_iterations = 500;
    double step_tolerance = 1e-10;   // relative to rho_total, nested mode
    double se_tolerance = 1e-4;      // bits/s/Hz, interleaved mode
    double budget_tolerance = 1e-6;  // relative to rho_total
    double mu_upper = 1e5;
    double mu_relative_tolerance = 1e-13;
    double min_step = 1e-6;          // line-search floor
};

// Everything the water-filling update needs, evaluated at `rho_hat`.
struct LinearizationTerms
{
    rvec sigma1_private;
    rvec sigma2_private;
    double sigma1_common = 0.0;
    double sigma2_common = 0.0;
    rvec alpha_private;
    rmat zeta;         // (i, k): slope of ln NUM_i - ln DEN_i in rho_k, zero on the diagonal
    rvec zeta_common;  // slope of the bottleneck common term in rho_k
    rvec zeta_from_common; // slope of ln NUM_i - ln DEN_i in rho_c
    double alpha_common = 0.0;
    std::size_t l_min = 0;
    PowerVector rho_hat;
};

namespace detail
{

struct stream_sums
{
    rvec num;      // private: sum_i rho_i G(k,i) + rho_c Var_k + sigma2
    rvec den;      // num - rho_k |g_k|^2
    rvec num_c;    // den_c + rho_c |g_c,k|^2
    rvec den_c;    // equals num
    rvec variance; // common-stream variance per UE (zero without a common stream)
    rvec gain_c;   // |g_c,k|^2
};

inline stream_sums evaluate_sums(const PowerVector &p, const MomentTable &t, double sigma2)
{
    const auto K = static_cast<Eigen::Index>(t.users());
    stream_sums s;
    s.variance = rvec::Zero(K);
    s.gain_c = rvec::Zero(K);
    if (t.has_common())
        for (Eigen::Index k = 0; k < K; ++k)
        {
            s.variance(k) = t.common_variance(static_cast<std::size_t>(k));
            s.gain_c(k) = std::norm(t.g_common(k));
        }
    s.num = t.G_private * p.rho + p.rho_c * s.variance + rvec::Constant(K, sigma2);
    s.den = s.num - p.rho.cwiseProduct(t.g_private.cwiseAbs2());
    s.den_c = s.num;
    s.num_c = s.den_c + p.rho_c * s.gain_c;
    return s;
}

} // namespace detail

// Bottleneck UE of the common stream. With the common stream switched off
// every common SINR is zero, so the UE whose common SINR would grow slowest
// is used instead (lowest index on ties).
inline std::size_t bottleneck_ue(const PowerVector &p, const MomentTable &t, double sigma2)
{
    const auto s = detail::evaluate_sums(p, t, sigma2);
    const auto K = static_cast<Eigen::Index>(t.users());
    rvec score(K);
    for (Eigen::Index k = 0; k < K; ++k)
        score(k) = p.rho_c > 0.0 ? s.num_c(k) / s.den_c(k) : s.gain_c(k) / s.den_c(k);
    return argmin_lowest(score);
}

inline LinearizationTerms linearization_terms(const PowerVector &rho_hat, const MomentTable &t, double sigma2,
                                              std::size_t l_min)
{
    const std::size_t K = t.users();
    const auto Ki = static_cast<Eigen::Index>(K);
    const auto l = static_cast<Eigen::Index>(l_min);
    if (rho_hat.users() != K || l_min >= K)
        throw std::invalid_argument("linearization_terms: size mismatch");
    const auto s = detail::evaluate_sums(rho_hat, t, sigma2);

    LinearizationTerms L;
    L.rho_hat = rho_hat;
    L.l_min = l_min;
    L.alpha_private.resize(Ki);
    L.sigma1_private.resize(Ki);
    L.sigma2_private.resize(Ki);
    L.zeta = rmat::Zero(Ki, Ki);
    L.zeta_common.resize(Ki);
    L.zeta_from_common.resize(Ki);

    const rvec leak = s.num.cwiseInverse() - s.den.cwiseInverse(); // <= 0
    const double leak_c = 1.0 / s.num_c(l) - 1.0 / s.den_c(l);     // <= 0

    for (Eigen::Index k = 0; k < Ki; ++k)
    {
        const double Gkk = t.G_private(k, k);
        L.alpha_private(k) = (Gkk - std::norm(t.g_private(k))) / s.den(k);
        for (Eigen::Index i = 0; i < Ki; ++i)
            if (i != k)
                L.zeta(i, k) = t.G_private(i, k) * leak(i);
        L.zeta_common(k) = t.G_private(l, k) * leak_c;
        L.sigma2_private(k) = L.alpha_private(k) - L.zeta_common(k) - L.zeta.col(k).sum();
        // interference plus noise without the UE's own stream
        L.sigma1_private(k) = Gkk / (s.num(k) - rho_hat.rho(k) * Gkk);
        L.zeta_from_common(k) = s.variance(k) * leak(k);
    }

    const double G_cl = t.has_common() ? t.G_common(l) : 0.0;
    L.alpha_common = s.variance(l) / s.den_c(l);
    L.sigma2_common = L.alpha_common - L.zeta_from_common.sum();
    L.sigma1_common = G_cl / (sigma2 + t.G_private.row(l).dot(rho_hat.rho));
    return L;
}

// (1 / (mu + sigma2) - 1 / sigma1)^+
inline double waterfill(double mu, double sigma1, double sigma2)
{
    if (!(mu + sigma2 > 0.0))
        throw numerical_error("waterfill: mu + slope must be positive");
    if (!(sigma1 > 0.0))
        return 0.0;
    return std::max(0.0, 1.0 / (mu + sigma2) - 1.0 / sigma1);
}

struct TraceEntry
{
    int iteration = 0;
    PowerVector powers;
    double sum_se = 0.0;
    double mu = 0.0;
    double mu_lower = 0.0;
    double mu_upper = 0.0;
    double step = 1.0;
};

struct PowerAllocation
{
    PowerVector powers;
    double mu = 0.0;
    int iterations = 0;
    bool converged = false;
    double initial_sum_se = 0.0;
    double sum_se = 0.0;
    std::vector<TraceEntry> trace;
};

namespace detail
{

// Water-filling response of all streams to one linearization. Returns false
// when some slope makes the subproblem unbounded at this mu (treated as over
// budget by the bisection).
inline bool respond(const LinearizationTerms &L, double mu, bool common, PowerVector &out)
{
    const auto K = L.sigma1_private.size();
    out.rho.resize(K);
    for (Eigen::Index k = 0; k < K; ++k)
    {
        if (!(mu + L.sigma2_private(k) > 0.0))
            return false;
        out.rho(k) = waterfill(mu, L.sigma1_private(k), L.sigma2_private(k));
    }
    out.rho_c = 0.0;
    if (common)
    {
        if (!(mu + L.sigma2_common > 0.0))
            return false;
        out.rho_c = waterfill(mu, L.sigma1_common, L.sigma2_common);
    }
    return true;
}

struct mu_solution
{
    double mu = 0.0;
    PowerVector target;
};

// Smallest mu whose water-filling response fits the budget.
inline mu_solution solve_mu(const LinearizationTerms &L, double rho_total, bool common, const SolverOptions &opt)
{
    mu_solution sol;
    PowerVector trial;
    if (respond(L, 0.0, common, trial) && trial.total() <= rho_total)
    {
        sol.target = trial;
        return sol;
    }
    double lo = 0.0, hi = opt.mu_upper;
    for (int guard = 0;; ++guard)
    {
        if (respond(L, hi, common, trial) && trial.total() <= rho_total)
            break;
        if (guard > 200)
            throw numerical_error("ILA-WF: no multiplier satisfies the power budget");
        lo = hi;
        hi *= 2.0;
    }
    for (int it = 0; it < 400 && hi - lo > opt.mu_relative_tolerance * hi; ++it)
    {
        const double mid = 0.5 * (lo + hi);
        if (respond(L, mid, common, trial) && trial.total() <= rho_total)
            hi = mid;
        else
            lo = mid;
    }
    sol.mu = hi;
    respond(L, hi, common, sol.target);
    return sol;
}

inline double sum_se_of(const PowerVector &p, const MomentTable &t, double sigma2, double prelog)
{
    return se_report(p, t, sigma2, prelog).sum_se;
}

inline PowerVector blend(const PowerVector &from, const PowerVector &to, double step)
{
    PowerVector p;
    p.rho_c = from.rho_c + step * (to.rho_c - from.rho_c);
    p.rho = from.rho + step * (to.rho - from.rho);
    return p;
}

inline PowerAllocation ila_wf_nested(const MomentTable &t, double rho_total, double sigma2, double prelog,
                                     const SolverOptions &opt)
{
    const bool common = opt.allow_common && t.has_common();
    PowerAllocation out;
    PowerVector cur = PowerVector::uniform_private(t.users(), rho_total);
    double se = sum_se_of(cur, t, sigma2, prelog);
    out.initial_sum_se = se;
    out.trace.push_back({0, cur, se, 0.0, 0.0, opt.mu_upper, 0.0});

    int it = 0;
    for (; it < opt.max_iterations; ++it)
    {
        const auto L = linearization_terms(cur, t, sigma2, bottleneck_ue(cur, t, sigma2));
        const auto sol = solve_mu(L, rho_total, common, opt);

        // Monotone line search toward the water-filling target.
        double step = 1.0;
        bool accepted = false;
        PowerVector next;
        double next_se = se;
        for (; step >= opt.min_step; step *= 0.5)
        {
            next = blend(cur, sol.target, step);
            next_se = sum_se_of(next, t, sigma2, prelog);
            if (next_se >= se)
            {
                accepted = true;
                break;
            }
        }
        if (!accepted)
        {
            // Rounding-level ascent failure at the fixed point counts as converged.
            const double gap = std::max(std::abs(sol.target.rho_c - cur.rho_c),
                                        (sol.target.rho - cur.rho).cwiseAbs().maxCoeff()) / rho_total;
            out.converged = gap < 1e-6;
            break;
        }
        const double change =
            std::max(std::abs(next.rho_c - cur.rho_c), (next.rho - cur.rho).cwiseAbs().maxCoeff()) / rho_total;
        cur = next;
        se = next_se;
        out.trace.push_back({it + 1, cur, se, sol.mu, 0.0, sol.mu, step});
        if (change < opt.step_tolerance)
        {
            out.converged = true;
            ++it;
            break;
        }
    }
    out.iterations = it;
    out.powers = cur;
    out.sum_se = se;
    out.mu = solve_mu(linearization_terms(cur, t, sigma2, bottleneck_ue(cur, t, sigma2)), rho_total, common, opt).mu;
    return out;
}

// Sequential updates with a single bisection step on mu per outer iteration.
inline PowerAllocation ila_wf_interleaved(const MomentTable &t, double rho_total, double sigma2, double prelog,
                                          const SolverOptions &opt)
{
    const bool common = opt.allow_common && t.has_common();
    const auto K = static_cast<Eigen::Index>(t.users());
    PowerAllocation out;
    PowerVector cur = PowerVector::uniform_private(t.users(), rho_total);
    double se = sum_se_of(cur, t, sigma2, prelog);
    out.initial_sum_se = se;
    PowerVector best = cur;
    double best_se = se;
    double lo = 0.0, hi = opt.mu_upper, mu = 0.5 * (lo + hi);
    out.trace.push_back({0, cur, se, mu, lo, hi, 0.0});

    std::size_t l = bottleneck_ue(cur, t, sigma2);
    int it = 0;
    for (; it < opt.max_iterations; ++it)
    {
        const PowerVector previous = cur;
        for (Eigen::Index k = 0; k < K; ++k)
        {
            const auto L = linearization_terms(cur, t, sigma2, l);
            cur.rho(k) = mu + L.sigma2_private(k) > 0.0
                             ? waterfill(mu, L.sigma1_private(k), L.sigma2_private(k))
                             : previous.rho(k);
        }
        if (common)
        {
            const auto L = linearization_terms(cur, t, sigma2, l);
            cur.rho_c = mu + L.sigma2_common > 0.0 ? waterfill(mu, L.sigma1_common, L.sigma2_common) : previous.rho_c;
        }
        const double total = cur.total();
        if (total > rho_total)
            lo = mu;
        else
            hi = mu;
        if (hi - lo <= opt.mu_relative_tolerance * hi && total > rho_total)
            hi *= 2.0; // upper bound binds: widen and keep bisecting
        mu = 0.5 * (lo + hi);
        l = bottleneck_ue(cur, t, sigma2);

        const double new_se = sum_se_of(cur, t, sigma2, prelog);
        out.trace.push_back({it + 1, cur, new_se, mu, lo, hi, 1.0});
        const bool feasible = total <= rho_total * (1.0 + opt.budget_tolerance);
        if (feasible && new_se > best_se)
        {
            best = cur;
            best_se = new_se;
        }
        const bool settled = std::abs(new_se - se) < opt.se_tolerance;
        se = new_se;
        if (settled && feasible && std::abs(total - rho_total) < opt.budget_tolerance * rho_total)
        {
            out.converged = true;
            ++it;
            break;
        }
    }
    out.iterations = it;
    out.powers = best;
    out.sum_se = best_se;
    out.mu = mu;
    return out;
}

} // namespace detail

// Starts from uniform private powers and no common power.
inline PowerAllocation ila_wf(const MomentTable &t, double rho_total, double sigma2, double prelog,
                              const SolverOptions &opt = {})
{
    if (!(rho_total > 0.0) || !(sigma2 > 0.0))
        throw std::invalid_argument("ila_wf: power budget and noise power must be positive");
    if (t.users() == 0)
        throw std::invalid_argument("ila_wf: empty moment table");
    return opt.mu_search == MuSearch::nested ? detail::ila_wf_nested(t, rho_total, sigma2, prelog, opt)
                                             : detail::ila_wf_interleaved(t, rho_total, sigma2, prelog, opt);
}

// Worst relative deviation of each analytic slope from Richardson-extrapolated
// central differences with step `step` (mW).
struct SlopeCheck
{
    double zeta = 0.0;
    double zeta_common = 0.0;
    double alpha_private = 0.0;
    double zeta_from_common = 0.0;
    double alpha_common = 0.0;

    double worst() const { return std::max({zeta, zeta_common, alpha_private, zeta_from_common, alpha_common}); }
};

namespace detail
{

// ln(NUM / DEN) written so that the gap NUM - DEN never cancels.
inline double private_log_ratio(const PowerVector &p, const MomentTable &t, double sigma2, Eigen::Index i)
{
    const auto s = evaluate_sums(p, t, sigma2);
    return std::log1p(p.rho(i) * std::norm(t.g_private(i)) / s.den(i));
}

inline double common_log_ratio(const PowerVector &p, const MomentTable &t, double sigma2, Eigen::Index l)
{
    const auto s = evaluate_sums(p, t, sigma2);
    return std::log1p(p.rho_c * s.gain_c(l) / s.den_c(l));
}

// Richardson extrapolation of the central difference of f along `dir`.
template <typename F>
double richardson(F &&f, const PowerVector &p, Eigen::Index dir, double h)
{
    auto central = [&](double step)
    {
        PowerVector up = p, dn = p;
        if (dir < 0)
            up.rho_c += step, dn.rho_c -= step;
        else
            up.rho(dir) += step, dn.rho(dir) -= step;
        return (f(up) - f(dn)) / (2.0 * step);
    };
    return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

inline double relative_gap(double analytic, double numeric)
{
    const double d = std::abs(analytic - numeric);
    return d == 0.0 ? 0.0 : d / std::max(std::abs(numeric), std::numeric_limits<double>::min());
}

} // namespace detail

inline SlopeCheck slope_check(const PowerVector &p, const MomentTable &t, double sigma2, double step)
{
    const auto K = static_cast<Eigen::Index>(t.users());
    const std::size_t l = bottleneck_ue(p, t, sigma2);
    const auto li = static_cast<Eigen::Index>(l);
    const auto L = linearization_terms(p, t, sigma2, l);
    auto log_den = [&](Eigen::Index k)
    { return [&, k](const PowerVector &q) { return std::log(detail::evaluate_sums(q, t, sigma2).den(k)); }; };
    auto log_ratio = [&](Eigen::Index i)
    { return [&, i](const PowerVector &q) { return detail::private_log_ratio(q, t, sigma2, i); }; };
    auto common_ratio = [&](const PowerVector &q) { return detail::common_log_ratio(q, t, sigma2, li); };

    SlopeCheck c;
    for (Eigen::Index k = 0; k < K; ++k)
    {
        for (Eigen::Index i = 0; i < K; ++i)
            if (i != k)
                c.zeta = std::max(c.zeta, detail::relative_gap(L.zeta(i, k), detail::richardson(log_ratio(i), p, k, step)));
        c.alpha_private = std::max(
            c.alpha_private, detail::relative_gap(L.alpha_private(k), detail::richardson(log_den(k), p, k, step)));
        if (t.has_common())
        {
            c.zeta_common = std::max(c.zeta_common, detail::relative_gap(L.zeta_common(k),
                                                                         detail::richardson(common_ratio, p, k, step)));
            c.zeta_from_common = std::max(
                c.zeta_from_common,
                detail::relative_gap(L.zeta_from_common(k), detail::richardson(log_ratio(k), p, -1, step)));
        }
    }
    if (t.has_common())
    {
        auto log_den_c = [&](const PowerVector &q) { return std::log(detail::evaluate_sums(q, t, sigma2).den_c(li)); };
        c.alpha_common = detail::relative_gap(L.alpha_common, detail::richardson(log_den_c, p, -1, step));
    }
    return c;
}

// Largest |E{|h_k^H w_k|^2} / NUM_k - sigma2_k - mu| over streams with
// positive power (and the common analogue), divided by mu.
inline double stationarity_residual(const PowerAllocation &a, const MomentTable &t, double sigma2)
{
    const PowerVector &p = a.powers;
    const std::size_t l = bottleneck_ue(p, t, sigma2);
    const auto L = linearization_terms(p, t, sigma2, l);
    const auto s = detail::evaluate_sums(p, t, sigma2);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < p.rho.size(); ++k)
        if (p.rho(k) > 0.0)
            worst = std::max(worst, std::abs(t.G_private(k, k) / s.num(k) - L.sigma2_private(k) - a.mu));
    if (p.rho_c > 0.0 && t.has_common())
    {
        const auto li = static_cast<Eigen::Index>(l);
        worst = std::max(worst, std::abs(t.G_common(li) / s.num_c(li) - L.sigma2_common - a.mu));
    }
    return a.mu > 0.0 ? worst / a.mu : worst;
}

} // namespace rssim
