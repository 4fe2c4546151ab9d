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

#include <stdexcept>
#include <string>

namespace rssim
{

// Invalid or inconsistent user configuration. Maps to CLI exit code 1.
class config_error : public std::invalid_argument
{
public:
    config_error(const std::string &key, const std::string &what)
        : std::invalid_argument("config key '" + key + "': " + what), key_(key) {}

    const std::string &key() const noexcept { return key_; }

private:
    std::string key_;
};

// Any failure of the numerical pipeline. Maps to CLI exit code 2.
class numerical_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// A UE whose estimate carries no energy (tr(Phi_k) == 0).
class invalid_ue_error : public numerical_error
{
public:
    explicit invalid_ue_error(std::size_t ue)
        : numerical_error("UE " + std::to_string(ue) + " has a zero-energy channel estimate"), ue_(ue) {}

    std::size_t ue() const noexcept { return ue_; }

private:
    std::size_t ue_;
};

// Common-precoder weights with a non-positive normalization.
class invalid_weights_error : public numerical_error
{
public:
    using numerical_error::numerical_error;
};

// Some UE cannot receive a positive common gain from any weight vector.
class infeasible_direction_error : public numerical_error
{
public:
    using numerical_error::numerical_error;
};

} // namespace rssim
