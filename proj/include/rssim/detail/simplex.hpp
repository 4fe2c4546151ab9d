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

// Dense two-phase simplex with Bland's rule. Meant for the small LPs of the
// common-precoder design (a few hundred variables at most).

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace rssim::detail
{

enum class row_sense
{
    less_equal,
    equal,
    greater_equal
};

struct lp_result
{
    Eigen::VectorXd x;
    double objective = 0.0;
};

class lp_infeasible : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class lp_unbounded : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// maximize c^T x  subject to  A x (sense) b,  x >= 0
inline lp_result simplex_maximize(const Eigen::MatrixXd &A, const Eigen::VectorXd &b, std::vector<row_sense> sense,
                                  const Eigen::VectorXd &c, double tol = 1e-11)
{
    using Eigen::Index;
    const Index m = A.rows(), n = A.cols();
    if (b.size() != m || static_cast<Index>(sense.size()) != m || c.size() != n)
        throw std::invalid_argument("simplex_maximize: dimension mismatch");

    Eigen::MatrixXd Ar = A;
    Eigen::VectorXd br = b;
    for (Index r = 0; r < m; ++r)
        if (br(r) < 0.0)
        {
            Ar.row(r) *= -1.0;
            br(r) = -br(r);
            if (sense[r] == row_sense::less_equal)
                sense[r] = row_sense::greater_equal;
            else if (sense[r] == row_sense::greater_equal)
                sense[r] = row_sense::less_equal;
        }

    Index n_slack = 0, n_art = 0;
    for (auto s : sense)
    {
        n_slack += s != row_sense::equal;
        n_art += s != row_sense::less_equal;
    }
    const Index cols = n + n_slack + n_art; // last column of T holds the rhs
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, cols + 1);
    std::vector<Index> basis(static_cast<std::size_t>(m));
    std::vector<bool> artificial(static_cast<std::size_t>(cols), false);
    {
        Index s = n, a = n + n_slack;
        for (Index r = 0; r < m; ++r)
        {
            T.row(r).head(n) = Ar.row(r);
            T(r, cols) = br(r);
            if (sense[r] == row_sense::less_equal)
            {
                T(r, s) = 1.0;
                basis[r] = s++;
            }
            else
            {
                if (sense[r] == row_sense::greater_equal)
                    T(r, s++) = -1.0;
                T(r, a) = 1.0;
                artificial[a] = true;
                basis[r] = a++;
            }
        }
    }

    auto pivot = [&](Index row, Index col)
    {
        T.row(row) /= T(row, col);
        for (Index r = 0; r < T.rows(); ++r)
            if (r != row && T(r, col) != 0.0)
                T.row(r) -= T(r, col) * T.row(row);
        basis[row] = col;
    };

    // Runs simplex on objective `obj` (length cols); columns with allowed=false never enter.
    auto optimize = [&](const Eigen::VectorXd &obj, const std::vector<bool> &allowed)
    {
        const Index limit = 50 * (cols + m) + 1000;
        for (Index iter = 0; iter < limit; ++iter)
        {
            // reduced costs: obj_j - sum_r obj_basis[r] T(r, j)
            Eigen::VectorXd cb(T.rows());
            for (Index r = 0; r < T.rows(); ++r)
                cb(r) = obj(basis[r]);
            const Eigen::VectorXd red = obj - (cb.transpose() * T.leftCols(cols)).transpose();
            Index enter = -1;
            for (Index j = 0; j < cols; ++j)
                if (allowed[j] && red(j) > tol)
                {
                    enter = j;
                    break;
                }
            if (enter < 0)
                return;
            Index leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (Index r = 0; r < T.rows(); ++r)
                if (T(r, enter) > tol)
                {
                    const double ratio = T(r, cols) / T(r, enter);
                    if (ratio < best - tol || (std::abs(ratio - best) <= tol && basis[r] < basis[leave]))
                    {
                        best = ratio;
                        leave = r;
                    }
                }
            if (leave < 0)
                throw lp_unbounded("linear program is unbounded");
            pivot(leave, enter);
        }
        throw std::runtime_error("simplex iteration limit reached");
    };

    std::vector<bool> allowed(static_cast<std::size_t>(cols), true);
    if (n_art > 0)
    {
        Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(cols);
        for (Index j = 0; j < cols; ++j)
            if (artificial[j])
                phase1(j) = -1.0;
        optimize(phase1, allowed);
        double infeas = 0.0;
        for (Index r = 0; r < T.rows(); ++r)
            if (artificial[basis[r]])
                infeas += T(r, cols);
        const double scale = std::max(1.0, br.cwiseAbs().maxCoeff());
        if (infeas > 1e-9 * scale)
            throw lp_infeasible("linear program is infeasible");
        // Drive remaining (zero-level) artificials out of the basis.
        for (Index r = 0; r < T.rows(); ++r)
        {
            if (!artificial[basis[r]])
                continue;
            Index col = -1;
            for (Index j = 0; j < cols; ++j)
                if (!artificial[j] && std::abs(T(r, j)) > tol)
                {
                    col = j;
                    break;
                }
            if (col >= 0)
                pivot(r, col);
            else
            {
                // redundant row
                const Index last = T.rows() - 1;
                T.row(r) = T.row(last);
                basis[r] = basis[last];
                T.conservativeResize(last, Eigen::NoChange);
                basis.pop_back();
                --r;
            }
        }
        for (Index j = 0; j < cols; ++j)
            allowed[j] = !artificial[j];
    }

    Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(cols);
    phase2.head(n) = c;
    optimize(phase2, allowed);

    lp_result out;
    out.x = Eigen::VectorXd::Zero(n);
    for (Index r = 0; r < T.rows(); ++r)
        if (basis[r] < n)
            out.x(basis[r]) = T(r, cols);
    out.objective = c.dot(out.x);
    return out;
}

} // namespace rssim::detail
