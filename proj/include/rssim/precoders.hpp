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

// MR private precoders and the max-min common precoder.

#pragma once

#include <algorithm>
#include <vector>

#include "detail/simplex.hpp"
#include "errors.hpp"
#include "estimation.hpp"
#include "linalg.hpp"
#include "moments.hpp"

namespace rssim
{

// w_k = h_hat_k / sqrt(tr Phi_k); the normalizer is the expected estimate
// energy, not the per-realization norm.
inline std::vector<cmat> mr_precoder(const ChannelBatch &batch, const EstimationModel &model)
{
    if (!batch.has_estimates())
        throw std::invalid_argument("mr_precoder: batch carries no estimates");
    std::vector<cmat> w(batch.users());
    for (std::size_t k = 0; k < batch.users(); ++k)
    {
        const double energy = model.trPhi(k);
        if (!(energy > 0.0))
            throw invalid_ue_error(k);
        w[k] = batch.h_hat[k] / std::sqrt(energy);
    }
    return w;
}

// w_c = sum_i a_i h_hat_i / sqrt(sum_ij a_i a_j tr C_ij)
inline cmat common_precoder(const rvec &a, const ChannelBatch &batch, const EstimationModel &model)
{
    if (!batch.has_estimates())
        throw std::invalid_argument("common_precoder: batch carries no estimates");
    const double N = common_normalization(a, model);
    cmat w = cmat::Zero(model.antennas(), batch.n_samples);
    for (std::size_t i = 0; i < batch.users(); ++i)
        if (a(static_cast<Eigen::Index>(i)) != 0.0)
            w += a(static_cast<Eigen::Index>(i)) * batch.h_hat[i];
    return w / std::sqrt(N);
}

struct PrecoderSet
{
    std::vector<cmat> w_private;
    cmat w_common;
    rvec weights;
    double alpha = 0.0; // common normalization 1 / sqrt(N)

    bool has_common() const noexcept { return weights.size() > 0; }
};

inline PrecoderSet build_precoders(const ChannelBatch &batch, const EstimationModel &model, const rvec &weights = rvec())
{
    PrecoderSet p;
    p.w_private = mr_precoder(batch, model);
    if (weights.size() > 0)
    {
        p.weights = weights;
        p.alpha = 1.0 / std::sqrt(common_normalization(weights, model));
        p.w_common = common_precoder(weights, batch, model);
    }
    return p;
}

inline MomentTable mc_moments(const PrecoderSet &p, const ChannelBatch &batch)
{
    return mc_moments(batch.h, p.w_private, p.has_common() ? &p.w_common : nullptr);
}

// Max-min design of the common weights: maximize min_k sqrt(pi_k) sum_i a_i u(i, k)
// over the unit simplex.
struct CommonWeightProblem
{
    rmat u;   // (i, k) -> tr(R_i Q^{-1} R_k)
    rvec pi;  // inverse interference-plus-noise per UE
    bool include_pi = true;

    std::size_t users() const noexcept { return static_cast<std::size_t>(u.rows()); }

    // Effective coefficient of a_i in the constraint of UE k.
    double coefficient(std::size_t i, std::size_t k) const
    {
        const auto ii = static_cast<Eigen::Index>(i), kk = static_cast<Eigen::Index>(k);
        return include_pi ? std::sqrt(pi(kk)) * u(ii, kk) : u(ii, kk);
    }

    double objective(const rvec &a) const
    {
        double worst = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < users(); ++k)
        {
            double s = 0.0;
            for (std::size_t i = 0; i < users(); ++i)
                s += a(static_cast<Eigen::Index>(i)) * coefficient(i, k);
            worst = std::min(worst, s);
        }
        return worst;
    }
};

// pi_k = 1 / (sum_i rho_i G(k, i) + sigma2), evaluated at the given private powers.
inline CommonWeightProblem make_common_weight_problem(const EstimationModel &model, const MomentTable &private_moments,
                                                      const rvec &private_powers, double sigma2, bool include_pi = true)
{
    const std::size_t K = model.users();
    const auto Ki = static_cast<Eigen::Index>(K);
    if (private_powers.size() != Ki || static_cast<Eigen::Index>(private_moments.users()) != Ki)
        throw std::invalid_argument("make_common_weight_problem: size mismatch");
    CommonWeightProblem p;
    p.include_pi = include_pi;
    p.u.resize(Ki, Ki);
    const double scale = model.trace_table().cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < Ki; ++i)
        for (Eigen::Index k = 0; k < Ki; ++k)
        {
            const cplx t = model.trace_table()(i, k);
            if (std::abs(t.imag()) > 1e-10 * scale)
                throw numerical_error("common-weight coefficients tr(R_i Q^-1 R_k) are not real (UE pair " +
                                      std::to_string(i) + ", " + std::to_string(k) + ")");
            p.u(i, k) = t.real();
        }
    p.pi.resize(Ki);
    for (Eigen::Index k = 0; k < Ki; ++k)
        p.pi(k) = 1.0 / (private_moments.G_private.row(k).dot(private_powers) + sigma2);
    return p;
}

struct CommonWeights
{
    rvec a;          // on the unit simplex
    double t = 0.0;  // achieved min_k sqrt(pi_k) sum_i a_i u(i, k)
};

// Epigraph LP: maximize t subject to sum_i a_i c(i, k) >= t for every k,
// a >= 0, sum a = 1. Among optimal points the one maximizing min_i a_i is
// returned, so symmetric problems give uniform weights.
inline CommonWeights solve_common_weights(const CommonWeightProblem &problem)
{
    using detail::row_sense;
    const std::size_t K = problem.users();
    const auto Ki = static_cast<Eigen::Index>(K);
    if (K == 0)
        throw std::invalid_argument("solve_common_weights: empty problem");
    if (problem.include_pi && (problem.pi.size() != Ki || !(problem.pi.minCoeff() > 0.0)))
        throw std::invalid_argument("solve_common_weights: every pi_k must be positive");

    rmat coef(Ki, Ki); // (k, i)
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t i = 0; i < K; ++i)
            coef(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = problem.coefficient(i, k);
    for (Eigen::Index k = 0; k < Ki; ++k)
        if (!(coef.row(k).maxCoeff() > 0.0))
            throw infeasible_direction_error("no common weights give UE " + std::to_string(k) +
                                             " a positive common-stream gain");

    // The argmax is scale invariant; work with coefficients of order one.
    const double scale = coef.cwiseAbs().maxCoeff();
    const rmat v = coef / scale;
    // t = t_shifted - shift keeps the LP in nonnegative variables.
    const double shift = 2.0;

    // Stage 1: variables [a_1..a_K, t_shifted]
    rmat A = rmat::Zero(Ki + 1, Ki + 1);
    rvec b = rvec::Zero(Ki + 1);
    std::vector<row_sense> sense;
    for (Eigen::Index k = 0; k < Ki; ++k)
    {
        A.row(k).head(Ki) = -v.row(k);
        A(k, Ki) = 1.0;
        b(k) = shift;
        sense.push_back(row_sense::less_equal);
    }
    A.row(Ki).head(Ki).setOnes();
    b(Ki) = 1.0;
    sense.push_back(row_sense::equal);
    rvec c = rvec::Zero(Ki + 1);
    c(Ki) = 1.0;
    const auto first = detail::simplex_maximize(A, b, sense, c);
    const double t_star = first.objective - shift;

    // Stage 2: variables [a_1..a_K, s], maximize s with s <= a_i, keeping t >= t*.
    const double floor = t_star - 1e-12 * std::max(1.0, std::abs(t_star));
    rmat A2 = rmat::Zero(2 * Ki + 1, Ki + 1);
    rvec b2 = rvec::Zero(2 * Ki + 1);
    std::vector<row_sense> sense2;
    for (Eigen::Index k = 0; k < Ki; ++k)
    {
        A2.row(k).head(Ki) = v.row(k);
        b2(k) = floor;
        sense2.push_back(row_sense::greater_equal);
    }
    for (Eigen::Index i = 0; i < Ki; ++i)
    {
        A2(Ki + i, Ki) = 1.0;
        A2(Ki + i, i) = -1.0;
        sense2.push_back(row_sense::less_equal);
    }
    A2.row(2 * Ki).head(Ki).setOnes();
    b2(2 * Ki) = 1.0;
    sense2.push_back(row_sense::equal);
    rvec c2 = rvec::Zero(Ki + 1);
    c2(Ki) = 1.0;

    // Uniform weights maximize min a_i on the simplex, so whenever they reach
    // t* they are the exact tie-break answer.
    const rvec uniform = rvec::Constant(Ki, 1.0 / static_cast<double>(K));
    if ((v * uniform).minCoeff() >= floor)
    {
        CommonWeights out;
        out.a = uniform;
        out.t = problem.objective(uniform);
        return out;
    }

    rvec a;
    try
    {
        a = detail::simplex_maximize(A2, b2, sense2, c2).x.head(Ki);
    }
    catch (const detail::lp_infeasible &)
    {
        a = first.x.head(Ki);
    }
    a = a.cwiseMax(0.0);
    a /= a.sum();

    CommonWeights out;
    out.a = a;
    out.t = problem.objective(a);
    return out;
}

} // namespace rssim
