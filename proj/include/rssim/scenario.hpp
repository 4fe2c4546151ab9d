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

// Single-cell geometry and spatially correlated channel covariances.
//
// The BS sits at the center of a square cell and uses a half-wavelength ULA.
// Each UE sees S scattering clusters whose nominal angles are spread uniformly
// around the geographical angle of the UE; each cluster contributes a Gaussian
// angular profile (local scattering model).

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "random.hpp"

namespace rssim
{

struct ScenarioConfig
{
    int M = 100; // BS antennas
    int K = 10;  // UEs, all sharing one pilot
    int tau = 200;
    int tau_p = 10;
    double rho_tr_dbm = 20.0;
    double rho_total_dbm = 20.0;
    double noise_dbm = -94.0;
    double cell_side_m = 250.0;
    double min_distance_m = 35.0;
    int num_clusters = 6;
    double angular_spread_deg = 10.0;          // per-cluster standard deviation
    double nominal_angle_halfwidth_deg = 40.0;
    double shadow_std_db = 3.1622776601683795; // N(0, 10 dB^2)
    double pathloss_reference_m = 1.0;         // distance unit inside the log10 of the path loss
    bool independent_pilot_noise = false;
    std::uint64_t seed = 1;

    int tau_d() const { return tau - tau_p; }
    double prelog() const { return static_cast<double>(tau_d()) / static_cast<double>(tau); }
    double sigma2_mw() const { return dbm_to_mw(noise_dbm); }
    double rho_total_mw() const { return dbm_to_mw(rho_total_dbm); }
    // Uplink pilot power relative to the noise floor (linear).
    double pilot_snr() const { return dbm_to_mw(rho_tr_dbm) / sigma2_mw(); }

    void validate() const
    {
        if (M < 1)
            throw config_error("M", "must be >= 1");
        if (K < 1)
            throw config_error("K", "must be >= 1");
        if (tau_p < 1)
            throw config_error("tau_p", "must be >= 1");
        if (tau_p >= tau)
            throw config_error("tau_p", "must be smaller than tau");
        auto finite = [](const char *key, double v)
        {
            if (!std::isfinite(v))
                throw config_error(key, "must be finite");
        };
        finite("rho_tr_dbm", rho_tr_dbm);
        finite("rho_total_dbm", rho_total_dbm);
        finite("noise_dbm", noise_dbm);
        if (!(dbm_to_mw(rho_tr_dbm) > 0.0))
            throw config_error("rho_tr_dbm", "linear value underflows to zero");
        if (!(dbm_to_mw(rho_total_dbm) > 0.0))
            throw config_error("rho_total_dbm", "linear value underflows to zero");
        if (!(dbm_to_mw(noise_dbm) > 0.0))
            throw config_error("noise_dbm", "linear value underflows to zero");
        if (!(cell_side_m > 0.0))
            throw config_error("cell_side_m", "must be positive");
        if (!(min_distance_m >= 0.0))
            throw config_error("min_distance_m", "must be non-negative");
        if (!(min_distance_m < cell_side_m / 2.0))
            throw config_error("min_distance_m", "must be smaller than cell_side_m / 2");
        if (num_clusters < 1)
            throw config_error("num_clusters", "must be >= 1");
        if (!(angular_spread_deg >= 0.0))
            throw config_error("angular_spread_deg", "must be non-negative");
        if (!(nominal_angle_halfwidth_deg >= 0.0))
            throw config_error("nominal_angle_halfwidth_deg", "must be non-negative");
        if (!(shadow_std_db >= 0.0))
            throw config_error("shadow_std_db", "must be non-negative");
        if (!(pathloss_reference_m > 0.0))
            throw config_error("pathloss_reference_m", "must be positive");
    }
};

struct UEGeometry
{
    std::vector<std::array<double, 2>> positions; // meters, BS at the origin
    std::vector<double> distances;                // meters
    std::vector<double> nominal_angles;           // radians
    std::vector<double> shadow_fading_db;
    std::vector<double> beta_db;
    std::vector<std::vector<double>> cluster_angles; // K x S, radians

    std::size_t size() const { return distances.size(); }
};

struct CovarianceSet
{
    std::vector<cmat> R; // K Hermitian M x M
    rvec beta;           // tr(R_i) / M

    std::size_t size() const { return R.size(); }
    Eigen::Index antennas() const { return R.empty() ? 0 : R.front().rows(); }
};

inline constexpr int max_placement_attempts = 10000;

// beta|dB = -34.53 - 38 log10(distance_ratio) + shadow_db, with the distance
// already divided by the reference distance.
inline double large_scale_gain_db(double distance_ratio, double shadow_db)
{
    if (!(distance_ratio > 0.0))
        throw std::invalid_argument("large_scale_gain_db: distance must be positive");
    return -34.53 - 38.0 * std::log10(distance_ratio) + shadow_db;
}

inline UEGeometry place_ues(const ScenarioConfig &config, rng_engine &rng)
{
    config.validate();
    const auto K = static_cast<std::size_t>(config.K);
    const auto S = static_cast<std::size_t>(config.num_clusters);
    const double half = config.cell_side_m / 2.0;
    const double halfwidth = deg_to_rad(config.nominal_angle_halfwidth_deg);

    std::uniform_real_distribution<double> coord(-half, half);
    std::uniform_real_distribution<double> offset(-halfwidth, halfwidth);
    std::normal_distribution<double> shadow(0.0, config.shadow_std_db);

    UEGeometry g;
    g.positions.reserve(K);
    for (std::size_t k = 0; k < K; ++k)
    {
        double x = 0.0, y = 0.0, d = 0.0;
        int attempt = 0;
        for (;; ++attempt)
        {
            if (attempt == max_placement_attempts)
                throw config_error("min_distance_m", "UE placement exceeded " +
                                                         std::to_string(max_placement_attempts) +
                                                         " rejection-sampling attempts");
            x = coord(rng);
            y = coord(rng);
            d = std::hypot(x, y);
            if (d >= config.min_distance_m && d > 0.0)
                break;
        }
        const double phi = std::atan2(y, x);
        const double F = config.shadow_std_db > 0.0 ? shadow(rng) : 0.0;

        std::vector<double> clusters(S);
        for (auto &c : clusters)
            c = phi + offset(rng);

        g.positions.push_back({x, y});
        g.distances.push_back(d);
        g.nominal_angles.push_back(phi);
        g.shadow_fading_db.push_back(F);
        g.beta_db.push_back(large_scale_gain_db(d / config.pathloss_reference_m, F));
        g.cluster_angles.push_back(std::move(clusters));
    }
    return g;
}

// [R]_{m1,m2} = (beta/S) sum_s exp(j pi (m1-m2) sin phi_s) exp(-(sigma^2/2) (pi (m1-m2) cos phi_s)^2)
inline cmat local_scattering_covariance(double beta, std::span<const double> cluster_angles, double sigma_phi, int M)
{
    if (cluster_angles.empty())
        throw std::invalid_argument("local_scattering_covariance: need at least one cluster");
    if (M < 1)
        throw std::invalid_argument("local_scattering_covariance: M must be >= 1");
    if (!(sigma_phi >= 0.0))
        throw std::invalid_argument("local_scattering_covariance: sigma_phi must be non-negative");

    const double S = static_cast<double>(cluster_angles.size());
    // Toeplitz: only the first column (lag m1 - m2 >= 0) is needed.
    cvec col(M);
    for (int lag = 0; lag < M; ++lag)
    {
        cplx acc(0.0, 0.0);
        for (double phi : cluster_angles)
        {
            const double spread = pi * lag * std::cos(phi);
            acc += std::polar(std::exp(-0.5 * sigma_phi * sigma_phi * spread * spread), pi * lag * std::sin(phi));
        }
        col(lag) = beta * (acc / S);
    }
    col(0) = cplx(beta, 0.0);

    cmat R(M, M);
    for (int m1 = 0; m1 < M; ++m1)
        for (int m2 = 0; m2 < M; ++m2)
            R(m1, m2) = m1 >= m2 ? col(m1 - m2) : std::conj(col(m2 - m1));
    return R;
}

inline CovarianceSet build_covariances(const UEGeometry &geometry, const ScenarioConfig &config)
{
    CovarianceSet cov;
    const std::size_t K = geometry.size();
    cov.R.resize(K);
    cov.beta.resize(static_cast<Eigen::Index>(K));
    const double sigma_phi = deg_to_rad(config.angular_spread_deg);
#pragma omp parallel for schedule(static)
    for (std::size_t k = 0; k < K; ++k)
    {
        const double beta = db_to_linear(geometry.beta_db[k]);
        cov.R[k] = local_scattering_covariance(beta, geometry.cluster_angles[k], sigma_phi, config.M);
    }
    for (std::size_t k = 0; k < K; ++k)
        cov.beta(static_cast<Eigen::Index>(k)) = cov.R[k].trace().real() / static_cast<double>(config.M);
    return cov;
}

struct Scenario
{
    UEGeometry geometry;
    CovarianceSet covariances;
};

inline Scenario generate_scenario(const ScenarioConfig &config, std::uint64_t seed)
{
    rng_engine rng(derive_seed(seed, {stream::geometry}));
    Scenario s;
    s.geometry = place_ues(config, rng);
    s.covariances = build_covariances(s.geometry, config);
    return s;
}

} // namespace rssim
