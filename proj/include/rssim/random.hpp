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

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include "linalg.hpp"

namespace rssim
{

using rng_engine = std::mt19937_64;

// SplitMix64 finalizer; used only to derive independent engine seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-style seed derivation: the same (master, tags...) always yields the
// same substream seed, independent of call order or thread count.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) noexcept
{
    std::uint64_t h = mix_seed(master);
    for (auto t : tags)
        h = mix_seed(h ^ mix_seed(t + 0x632be59bd9b4e019ULL));
    return h;
}

// Stream tags keep the substreams of different consumers apart.
namespace stream
{
inline constexpr std::uint64_t geometry = 1;
inline constexpr std::uint64_t channel = 2;
inline constexpr std::uint64_t pilot_noise = 3;
inline constexpr std::uint64_t quartic = 4;
inline constexpr std::uint64_t validation = 5;
} // namespace stream

// Realizations are drawn in fixed-size blocks, each from its own engine.
inline constexpr Eigen::Index realization_block = 4096;

// Fills `out` (rows x n) with i.i.d. CN(0, 1) entries. Column block b uses
// engine derive_seed(seed, {tag, b}), so results do not depend on threading.
inline void fill_standard_cn(cmat &out, std::uint64_t seed, std::uint64_t tag)
{
    const Eigen::Index n = out.cols();
    const Eigen::Index blocks = (n + realization_block - 1) / realization_block;
#pragma omp parallel for schedule(static)
    for (Eigen::Index b = 0; b < blocks; ++b)
    {
        rng_engine eng(derive_seed(seed, {tag, static_cast<std::uint64_t>(b)}));
        std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
        const Eigen::Index c0 = b * realization_block;
        const Eigen::Index c1 = std::min(n, c0 + realization_block);
        for (Eigen::Index c = c0; c < c1; ++c)
            for (Eigen::Index r = 0; r < out.rows(); ++r)
            {
                const double re = nd(eng);
                const double im = nd(eng);
                out(r, c) = cplx(re, im);
            }
    }
}

} // namespace rssim
