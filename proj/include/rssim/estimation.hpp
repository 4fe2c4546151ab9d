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

// Shared-pilot MMSE channel estimation.
//
// All K UEs send the same pilot, so the BS sees one contaminated observation
// y = sum_k h_k + n / sqrt(rho_tr) and every estimate is a linear map of it:
// h_hat_i = R_i Q^{-1} y with Q = sum_k R_k + I / rho_tr.

#pragma once

#include <cstdint>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "random.hpp"
#include "scenario.hpp"

namespace rssim
{

class EstimationModel
{
public:
    EstimationModel() = default;

    // rho_tr is the linear pilot SNR (pilot power over noise power).
    EstimationModel(const CovarianceSet &cov, double rho_tr)
    {
        if (!(rho_tr > 0.0) || !std::isfinite(rho_tr))
            throw std::invalid_argument("build_estimation_model: rho_tr must be positive and finite");
        if (cov.size() == 0)
            throw std::invalid_argument("build_estimation_model: empty covariance set");

        K_ = cov.size();
        M_ = cov.antennas();
        rho_tr_ = rho_tr;
        R_ = cov.R;

        Q_ = cmat::Identity(M_, M_) / rho_tr;
        for (const auto &R : R_)
        {
            if (R.rows() != M_ || R.cols() != M_)
                throw std::invalid_argument("build_estimation_model: covariance size mismatch");
            Q_ += R;
        }
        Q_ = hermitian_part(Q_);
        llt_.compute(Q_);
        if (llt_.info() != Eigen::Success)
            throw numerical_error("build_estimation_model: Cholesky factorization of Q failed");

        QinvR_.resize(K_);
        for (std::size_t k = 0; k < K_; ++k)
            QinvR_[k] = llt_.solve(R_[k]);

        cross_.assign(K_ * K_, cmat());
        trace_ = cmat::Zero(static_cast<Eigen::Index>(K_), static_cast<Eigen::Index>(K_));
        for (std::size_t i = 0; i < K_; ++i)
            for (std::size_t k = i; k < K_; ++k)
            {
                cmat C = R_[i] * QinvR_[k];
                if (i == k)
                    C = hermitian_part(C);
                else
                    cross_[k * K_ + i] = C.adjoint();
                cross_[i * K_ + k] = std::move(C);
            }
        for (std::size_t i = 0; i < K_; ++i)
            for (std::size_t k = 0; k < K_; ++k)
                trace_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = cross_[i * K_ + k].trace();
    }

    std::size_t users() const noexcept { return K_; }
    Eigen::Index antennas() const noexcept { return M_; }
    double rho_tr() const noexcept { return rho_tr_; }

    const cmat &Q() const noexcept { return Q_; }
    const Eigen::LLT<cmat> &Q_factor() const noexcept { return llt_; }
    const cmat &R(std::size_t k) const { return R_.at(k); }
    const std::vector<cmat> &covariances() const noexcept { return R_; }

    // Q^{-1} R_k
    const cmat &Qinv_R(std::size_t k) const { return QinvR_.at(k); }

    // C_ik = R_i Q^{-1} R_k = E{h_hat_i h_hat_k^H}; C_ii = Phi_i.
    const cmat &C(std::size_t i, std::size_t k) const { return cross_.at(i * K_ + k); }
    const cmat &Phi(std::size_t i) const { return C(i, i); }

    // tr(C_ik), which is also E{h_k^H h_hat_i}.
    cplx trC(std::size_t i, std::size_t k) const
    {
        return trace_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    }
    double trPhi(std::size_t i) const { return trC(i, i).real(); }
    const cmat &trace_table() const noexcept { return trace_; }

    template <typename Derived>
    cmat solve_Q(const Eigen::MatrixBase<Derived> &X) const { return llt_.solve(X); }

private:
    std::size_t K_ = 0;
    Eigen::Index M_ = 0;
    double rho_tr_ = 0.0;
    std::vector<cmat> R_;
    cmat Q_;
    Eigen::LLT<cmat> llt_;
    std::vector<cmat> QinvR_;
    std::vector<cmat> cross_; // row-major K x K
    cmat trace_;
};

inline EstimationModel build_estimation_model(const CovarianceSet &cov, double rho_tr)
{
    return EstimationModel(cov, rho_tr);
}

// Channel realizations, one M x n matrix per UE (column = realization).
struct ChannelBatch
{
    Eigen::Index n_samples = 0;
    std::vector<cmat> h;
    std::vector<cmat> h_hat;
    std::vector<cmat> h_tilde;
    // One M x n matrix when the pilot noise is shared, K of them otherwise.
    std::vector<cmat> pilot_noise;
    // UEs whose covariance needed eigenvalue clamping when factorized.
    std::vector<std::size_t> clamped_ues;

    std::size_t users() const noexcept { return h.size(); }
    bool has_estimates() const noexcept { return h_hat.size() == h.size() && !h.empty(); }
};

// h_k = L_k c with L_k L_k^H = R_k and c ~ CN(0, I). UE k draws from the
// substream (seed, channel, k), so adding UEs does not reshuffle the others.
inline ChannelBatch sample_channels(const CovarianceSet &cov, Eigen::Index n, std::uint64_t seed)
{
    if (n < 1)
        throw std::invalid_argument("sample_channels: n must be >= 1");
    const std::size_t K = cov.size();
    const Eigen::Index M = cov.antennas();
    ChannelBatch b;
    b.n_samples = n;
    b.h.resize(K);
    for (std::size_t k = 0; k < K; ++k)
    {
        auto f = psd_factor(cov.R[k]);
        if (f.clamped)
            b.clamped_ues.push_back(k);
        cmat c(M, n);
        fill_standard_cn(c, derive_seed(seed, {stream::channel, k}), 0);
        b.h[k] = f.factor * c;
    }
    return b;
}

// Fills h_hat and h_tilde. With `independent_noise` each UE's estimate uses
// its own pilot-noise draw instead of the single shared one.
inline void mmse_estimate(ChannelBatch &batch, const EstimationModel &model, std::uint64_t seed,
                          bool independent_noise = false)
{
    const std::size_t K = batch.users();
    if (K == 0 || K != model.users())
        throw std::invalid_argument("mmse_estimate: batch and model disagree on the number of UEs");
    const Eigen::Index M = model.antennas();
    const Eigen::Index n = batch.n_samples;
    const double scale = 1.0 / std::sqrt(model.rho_tr());

    cmat sum_h = cmat::Zero(M, n);
    for (const auto &h : batch.h)
        sum_h += h;

    const std::size_t noise_draws = independent_noise ? K : 1;
    batch.pilot_noise.assign(noise_draws, cmat(M, n));
    for (std::size_t d = 0; d < noise_draws; ++d)
        fill_standard_cn(batch.pilot_noise[d], derive_seed(seed, {stream::pilot_noise, d}), 0);

    batch.h_hat.resize(K);
    batch.h_tilde.resize(K);
    cmat z;
    if (!independent_noise)
        z = model.solve_Q(sum_h + scale * batch.pilot_noise[0]);
    for (std::size_t i = 0; i < K; ++i)
    {
        if (independent_noise)
            z = model.solve_Q(sum_h + scale * batch.pilot_noise[i]);
        batch.h_hat[i] = model.R(i) * z;
        batch.h_tilde[i] = batch.h[i] - batch.h_hat[i];
    }
}

} // namespace rssim
