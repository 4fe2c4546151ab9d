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

#include <catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace rssim;
using Catch::Approx;

namespace
{

double grid_optimum(const CommonWeightProblem &p, int steps = 100)
{
    double best = -std::numeric_limits<double>::infinity();
    for (int x = 0; x <= steps; ++x)
        for (int y = 0; x + y <= steps; ++y)
        {
            rvec a(3);
            a << double(x) / steps, double(y) / steps, double(steps - x - y) / steps;
            best = std::max(best, p.objective(a));
        }
    return best;
}

CommonWeightProblem random_problem(rng_engine &eng, std::size_t K)
{
    std::uniform_real_distribution<double> ud(0.01, 1.0);
    CommonWeightProblem p;
    const auto Ki = static_cast<Eigen::Index>(K);
    p.u.resize(Ki, Ki);
    p.pi.resize(Ki);
    for (Eigen::Index i = 0; i < Ki; ++i)
    {
        p.pi(i) = ud(eng);
        for (Eigen::Index k = 0; k < Ki; ++k)
            p.u(i, k) = ud(eng);
    }
    return p;
}

} // namespace

TEST_CASE("MR precoder uses a deterministic normalizer", "[precoders]")
{
    const auto cov = test::random_covariance_set(4, 2, 1);
    const auto model = build_estimation_model(cov, 3.0);
    auto b = test::estimated_batch(cov, model, 100, 2);
    const auto w = mr_precoder(b, model);
    for (auto &x : b.h_hat)
        x *= 2.0;
    const auto w2 = mr_precoder(b, model);
    for (std::size_t k = 0; k < 2; ++k)
        CHECK((w2[k] - 2.0 * w[k]).norm() <= 1e-14 * w2[k].norm());

    ChannelBatch empty;
    CHECK_THROWS(mr_precoder(empty, model));
}

TEST_CASE("precoders have unit expected power", "[precoders]")
{
    const auto s = generate_scenario(test::small_config(8, 3), 4);
    const auto model = build_estimation_model(s.covariances, test::small_config(8, 3).pilot_snr());
    const auto b = test::estimated_batch(s.covariances, model, 100000, 3);
    rvec a(3);
    a << 0.6, 0.1, 0.3;
    const auto p = build_precoders(b, model, a);
    for (std::size_t k = 0; k < 3; ++k)
        CHECK(p.w_private[k].squaredNorm() / 1e5 == Approx(1.0).epsilon(0.02));
    CHECK(p.w_common.squaredNorm() / 1e5 == Approx(1.0).epsilon(0.02));
    CHECK(p.alpha == Approx(1.0 / std::sqrt(common_normalization(a, model))));

    // the analytic normalizer equals the sample energy of the unnormalized sum
    cmat sum = cmat::Zero(8, 100000);
    for (std::size_t i = 0; i < 3; ++i)
        sum += a(static_cast<Eigen::Index>(i)) * b.h_hat[i];
    CHECK(sum.squaredNorm() / 1e5 == Approx(common_normalization(a, model)).epsilon(0.02));
}

TEST_CASE("MR precoder approaches the normalized channel with perfect estimates", "[precoders]")
{
    const double beta = 0.3;
    const auto cov = test::identical_covariances(6, 1, beta);
    const auto model = build_estimation_model(cov, 1e16);
    const auto b = test::estimated_batch(cov, model, 100, 1);
    const auto w = mr_precoder(b, model);
    CHECK(relative_frobenius_error(w[0], b.h[0] / std::sqrt(6 * beta)) < 1e-6);
}

TEST_CASE("common precoder special cases", "[precoders]")
{
    const auto cov = test::random_covariance_set(5, 3, 6);
    const auto model = build_estimation_model(cov, 2.0);
    const auto b = test::estimated_batch(cov, model, 200, 7);
    const auto mr = mr_precoder(b, model);

    rvec e1 = rvec::Zero(3);
    e1(0) = 1.0;
    CHECK((common_precoder(e1, b, model) - mr[0]).norm() <= 1e-13 * mr[0].norm());

    rvec a(3);
    a << 0.2, 0.7, 0.1;
    const cmat w = common_precoder(a, b, model);
    CHECK((common_precoder(5.0 * a, b, model) - w).norm() <= 1e-13 * w.norm());
    CHECK_THROWS_AS(common_precoder(rvec::Zero(3), b, model), invalid_weights_error);
}

TEST_CASE("common weights: single UE and symmetric problems", "[precoders]")
{
    const auto cov = test::random_covariance_set(4, 1, 8);
    const auto model = build_estimation_model(cov, 2.0);
    const auto table = closed_form_table(model);
    const auto prob = make_common_weight_problem(model, table, rvec::Constant(1, 1.0), 0.5);
    const auto sol = solve_common_weights(prob);
    CHECK(sol.a(0) == 1.0);
    CHECK(sol.t == Approx(std::sqrt(prob.pi(0)) * model.trPhi(0)).epsilon(1e-12));

    CommonWeightProblem sym;
    sym.u = rmat::Constant(2, 2, 0.7);
    sym.pi = rvec::Constant(2, 3.0);
    const auto s2 = solve_common_weights(sym);
    CHECK(s2.a(0) == Approx(0.5).margin(1e-12));
    CHECK(s2.a(1) == Approx(0.5).margin(1e-12));

    // identical UEs from identical covariances
    CovarianceSet twin = test::random_covariance_set(4, 1, 9);
    twin.R.push_back(twin.R[0]);
    twin.beta = rvec::Constant(2, twin.beta(0));
    const auto mt = build_estimation_model(twin, 2.0);
    const auto pt = make_common_weight_problem(mt, closed_form_table(mt), rvec::Constant(2, 0.5), 0.1);
    const auto st = solve_common_weights(pt);
    CHECK(st.a(0) == Approx(0.5).margin(1e-12));
}

TEST_CASE("common weights match an exhaustive grid", "[precoders]")
{
    rng_engine eng(11);
    for (int trial = 0; trial < 20; ++trial)
    {
        const auto p = random_problem(eng, 3);
        const auto sol = solve_common_weights(p);
        const double grid = grid_optimum(p);
        CHECK(sol.t >= grid * (1.0 - 1e-9));
        CHECK(std::abs(sol.t - grid) <= 1e-2 * std::abs(grid));
        CHECK(sol.a.minCoeff() >= 0.0);
        CHECK(sol.a.sum() == Approx(1.0).epsilon(1e-12));

        // at least one constraint is tight
        double tight = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < 3; ++k)
        {
            double s = 0.0;
            for (std::size_t i = 0; i < 3; ++i)
                s += sol.a(static_cast<Eigen::Index>(i)) * p.coefficient(i, k);
            tight = std::min(tight, std::abs(s - sol.t));
        }
        CHECK(tight <= 1e-9 * std::abs(sol.t));

        // the direction is invariant to scaling every coefficient
        CommonWeightProblem scaled = p;
        scaled.u *= 123.0;
        CHECK(solve_common_weights(scaled).t == Approx(123.0 * sol.t).epsilon(1e-9));
    }
}

TEST_CASE("common weights without the interference weighting", "[precoders]")
{
    rng_engine eng(12);
    auto p = random_problem(eng, 3);
    p.include_pi = false;
    const auto sol = solve_common_weights(p);
    CHECK(std::abs(sol.t - grid_optimum(p)) <= 1e-2 * grid_optimum(p));
}

TEST_CASE("a UE without any positive common-gain direction is rejected", "[precoders]")
{
    CommonWeightProblem p;
    p.u.resize(2, 2);
    p.u << 1.0, -1.0, 2.0, 0.0;
    p.pi = rvec::Ones(2);
    CHECK_THROWS_AS(solve_common_weights(p), infeasible_direction_error);

    p.pi(0) = 0.0;
    p.u << 1.0, 1.0, 1.0, 1.0;
    CHECK_THROWS_AS(solve_common_weights(p), std::invalid_argument);
}

TEST_CASE("complex cross traces cannot define real common weights", "[precoders]")
{
    // Generic Hermitian covariances (not Toeplitz) give complex tr(R_i Q^-1 R_k)
    // once K >= 3; with two UEs the cross trace is real by construction.
    const auto cov = test::random_covariance_set(4, 3, 14);
    const auto model = build_estimation_model(cov, 2.0);
    CHECK(std::abs(model.trC(0, 1).imag()) > 1e-6 * std::abs(model.trC(0, 1)));
    CHECK_THROWS_AS(make_common_weight_problem(model, closed_form_table(model), rvec::Ones(3), 1.0),
                    numerical_error);

    // array covariances are real in these traces
    const auto s = generate_scenario(test::small_config(16, 4), 1);
    const auto m2 = build_estimation_model(s.covariances, test::small_config(16, 4).pilot_snr());
    CHECK_NOTHROW(make_common_weight_problem(m2, closed_form_table(m2), rvec::Ones(4), 1e-9));
}

TEST_CASE("dense simplex solver", "[precoders]")
{
    using detail::row_sense;
    // maximize 3x + 2y  s.t.  x + y <= 4, x + 3y <= 6, x <= 3
    rmat A(3, 2);
    A << 1, 1, 1, 3, 1, 0;
    rvec b(3);
    b << 4, 6, 3;
    rvec c(2);
    c << 3, 2;
    const auto r = detail::simplex_maximize(A, b, {row_sense::less_equal, row_sense::less_equal, row_sense::less_equal}, c);
    CHECK(r.objective == Approx(11.0));
    CHECK(r.x(0) == Approx(3.0));
    CHECK(r.x(1) == Approx(1.0));

    // equality and >= rows
    rmat A2(2, 2);
    A2 << 1, 1, 1, -1;
    rvec b2(2);
    b2 << 1, 0.2;
    rvec c2(2);
    c2 << -1, -1;
    const auto r2 = detail::simplex_maximize(A2, b2, {row_sense::equal, row_sense::greater_equal}, c2);
    CHECK(r2.objective == Approx(-1.0));
    CHECK(r2.x(0) - r2.x(1) >= 0.2 - 1e-12);

    rmat A3(2, 1);
    A3 << 1, 1;
    rvec b3(2);
    b3 << 1, 2;
    rvec c3(1);
    c3 << 1;
    CHECK_THROWS_AS(detail::simplex_maximize(A3, b3, {row_sense::less_equal, row_sense::greater_equal}, c3),
                    detail::lp_infeasible);
    rmat A4(1, 2);
    A4 << 1, -1;
    rvec b4(1);
    b4 << 1;
    rvec c4(2);
    c4 << 1, 1;
    CHECK_THROWS_AS(detail::simplex_maximize(A4, b4, {row_sense::less_equal}, c4), detail::lp_unbounded);
}
