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

// Shared fixtures for the test suite.

#pragma once

#include <rssim.hpp>

#include <random>

namespace rssim::test
{

// Hermitian positive definite matrices with a controlled spectrum: the
// eigenvalues lie in [floor, 1 + floor] times `scale`.
inline cmat random_covariance(Eigen::Index M, rng_engine &eng, double scale = 1.0, double floor = 0.2)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    cmat X(M, M);
    for (Eigen::Index r = 0; r < M; ++r)
        for (Eigen::Index c = 0; c < M; ++c)
            X(r, c) = cplx(nd(eng), nd(eng));
    Eigen::HouseholderQR<cmat> qr(X);
    const cmat U = qr.householderQ();
    std::uniform_real_distribution<double> ud(floor, 1.0 + floor);
    rvec ev(M);
    for (Eigen::Index i = 0; i < M; ++i)
        ev(i) = ud(eng);
    return hermitian_part(scale * U * ev.asDiagonal() * U.adjoint());
}

inline CovarianceSet random_covariance_set(Eigen::Index M, std::size_t K, std::uint64_t seed, double scale = 1.0)
{
    rng_engine eng(seed);
    CovarianceSet cov;
    cov.beta.resize(static_cast<Eigen::Index>(K));
    for (std::size_t k = 0; k < K; ++k)
    {
        cov.R.push_back(random_covariance(M, eng, scale));
        cov.beta(static_cast<Eigen::Index>(k)) = cov.R.back().trace().real() / static_cast<double>(M);
    }
    return cov;
}

inline CovarianceSet identical_covariances(Eigen::Index M, std::size_t K, double beta)
{
    CovarianceSet cov;
    cov.R.assign(K, beta * cmat::Identity(M, M));
    cov.beta = rvec::Constant(static_cast<Eigen::Index>(K), beta);
    return cov;
}

// Small local-scattering scenario with the default physical parameters.
inline ScenarioConfig small_config(int M, int K)
{
    ScenarioConfig c;
    c.M = M;
    c.K = K;
    return c;
}

// Estimates for n realizations drawn in one batch.
inline ChannelBatch estimated_batch(const CovarianceSet &cov, const EstimationModel &model, Eigen::Index n,
                                    std::uint64_t seed, bool independent = false)
{
    ChannelBatch b = sample_channels(cov, n, seed);
    mmse_estimate(b, model, seed + 1, independent);
    return b;
}

} // namespace rssim::test
