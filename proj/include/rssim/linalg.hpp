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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "errors.hpp"

namespace rssim
{

using cplx = std::complex<double>;
using cmat = Eigen::MatrixXcd;
using cvec = Eigen::VectorXcd;
using rmat = Eigen::MatrixXd;
using rvec = Eigen::VectorXd;

// tr(A B) without forming the product
inline cplx trace_product(const cmat &A, const cmat &B)
{
    return (A.transpose().cwiseProduct(B)).sum();
}

inline cmat hermitian_part(const cmat &A)
{
    return 0.5 * (A + A.adjoint());
}

inline double relative_frobenius_error(const cmat &estimate, const cmat &reference)
{
    const double ref = reference.norm();
    const double diff = (estimate - reference).norm();
    return ref > 0.0 ? diff / ref : diff;
}

// Largest-over-smallest eigenvalue of a Hermitian matrix; +inf when the
// smallest eigenvalue is not positive.
inline double hermitian_condition_number(const cmat &A)
{
    Eigen::SelfAdjointEigenSolver<cmat> es(hermitian_part(A), Eigen::EigenvaluesOnly);
    const auto &ev = es.eigenvalues();
    const double lo = ev.minCoeff(), hi = ev.maxCoeff();
    if (lo <= 0.0)
        return std::numeric_limits<double>::infinity();
    return hi / lo;
}

// Hermitian square root of a PSD matrix. Negative eigenvalues (rounding) are
// clamped to zero; `clamped` reports whether that happened beyond rounding.
struct hermitian_root
{
    cmat root;
    bool clamped = false;
};

inline hermitian_root psd_sqrt(const cmat &A)
{
    Eigen::SelfAdjointEigenSolver<cmat> es(hermitian_part(A));
    rvec ev = es.eigenvalues();
    const double scale = std::max(ev.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    hermitian_root out;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
    {
        if (ev(i) < 0.0)
        {
            if (ev(i) < -1e-12 * scale)
                out.clamped = true;
            ev(i) = 0.0;
        }
        ev(i) = std::sqrt(ev(i));
    }
    out.root = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
    return out;
}

// Any square factor L with L L^H = R. Cholesky first, eigendecomposition
// with clamping when R is rank deficient.
struct psd_factorization
{
    cmat factor;
    bool used_eigen_fallback = false;
    bool clamped = false;
};

inline psd_factorization psd_factor(const cmat &R)
{
    psd_factorization out;
    if (R.rows() == 0)
        return out;
    if (R.cwiseAbs().maxCoeff() == 0.0)
    {
        out.factor = cmat::Zero(R.rows(), R.cols());
        return out;
    }
    Eigen::LLT<cmat> llt(hermitian_part(R));
    if (llt.info() == Eigen::Success)
    {
        out.factor = llt.matrixL();
        if (out.factor.allFinite())
            return out;
    }
    auto root = psd_sqrt(R);
    out.factor = std::move(root.root);
    out.used_eigen_fallback = true;
    out.clamped = root.clamped;
    return out;
}

// Applies R^{-1}. When cond(R) exceeds `max_condition`, the ridge
// R + ridge_eps * scale * I is inverted instead and `ridged` is set.
class ridged_inverse
{
public:
    ridged_inverse() = default;

    ridged_inverse(const cmat &R, double scale, double max_condition = 1e8, double ridge_eps = 1e-10)
    {
        condition_ = hermitian_condition_number(R);
        cmat A = hermitian_part(R);
        if (!(condition_ <= max_condition))
        {
            ridged_ = true;
            A += ridge_eps * scale * cmat::Identity(R.rows(), R.cols());
        }
        llt_.compute(A);
        if (llt_.info() != Eigen::Success)
            throw numerical_error("ridged_inverse: matrix is not positive definite even after regularization");
    }

    template <typename Derived>
    cmat solve(const Eigen::MatrixBase<Derived> &X) const { return llt_.solve(X); }

    bool ridged() const noexcept { return ridged_; }
    double condition() const noexcept { return condition_; }

private:
    Eigen::LLT<cmat> llt_;
    bool ridged_ = false;
    double condition_ = 1.0;
};

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

constexpr double pi = 3.14159265358979323846;
inline double deg_to_rad(double deg) { return deg * pi / 180.0; }

} // namespace rssim
