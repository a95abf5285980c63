// Copyright 2026 The OSAD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file linalg.hpp
 * @brief Small dense linear-algebra helpers shared by identification and design.
 *
 * All SVD-based helpers apply a deterministic sign convention so that results
 * are reproducible bit-for-bit across runs on identical input.
 */

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace osad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Default relative singular-value cutoff for pseudoinverses.
inline constexpr double kPinvCutoff = 1e-10;
/// Default relative tolerance for numerical rank.
inline constexpr double kRankTol = 1e-9;

struct Svd {
    Matrix U;
    Vector S;
    Matrix V;
};

namespace detail {

// Flip each (u_i, v_i) pair so the largest-magnitude entry of u_i is positive.
// Ties resolve to the first index.
inline void canonicalize_signs(Matrix& U, Matrix& V, Eigen::Index count) {
    for (Eigen::Index j = 0; j < count && j < U.cols(); ++j) {
        Eigen::Index best = 0;
        double best_abs = -1.0;
        for (Eigen::Index i = 0; i < U.rows(); ++i) {
            const double a = std::abs(U(i, j));
            if (a > best_abs) {
                best_abs = a;
                best = i;
            }
        }
        if (U(best, j) < 0.0) {
            U.col(j) = -U.col(j);
            if (j < V.cols()) V.col(j) = -V.col(j);
        }
    }
}

} // namespace detail

/// Thin SVD with canonical signs. Singular values are in non-increasing order.
inline Svd svd(const Matrix& M, bool full_u = false) {
    Svd out;
    if (M.size() == 0) {
        out.U = Matrix::Identity(M.rows(), full_u ? M.rows() : 0);
        out.S = Vector(0);
        out.V = Matrix(M.cols(), 0);
        return out;
    }
    const unsigned opts = (full_u ? Eigen::ComputeFullU : Eigen::ComputeThinU) | Eigen::ComputeThinV;
    if (std::min(M.rows(), M.cols()) <= 32) {
        Eigen::JacobiSVD<Matrix> s(M, opts);
        out.U = s.matrixU();
        out.S = s.singularValues();
        out.V = s.matrixV();
    } else {
        Eigen::BDCSVD<Matrix> s(M, opts);
        out.U = s.matrixU();
        out.S = s.singularValues();
        out.V = s.matrixV();
    }
    detail::canonicalize_signs(out.U, out.V, out.U.cols());
    return out;
}

/// Number of singular values above rel_tol * sigma_max. A zero matrix has rank 0.
inline Eigen::Index numerical_rank(const Matrix& M, double rel_tol = kRankTol) {
    if (M.size() == 0) return 0;
    const Vector s = svd(M).S;
    if (s.size() == 0 || s(0) == 0.0) return 0;
    const double cut = rel_tol * s(0);
    Eigen::Index r = 0;
    while (r < s.size() && s(r) > cut) ++r;
    return r;
}

/// Moore-Penrose pseudoinverse; singular values below rel_cutoff * sigma_max are dropped.
inline Matrix pinv(const Matrix& M, double rel_cutoff = kPinvCutoff) {
    Matrix out = Matrix::Zero(M.cols(), M.rows());
    if (M.size() == 0) return out;
    const Svd s = svd(M);
    if (s.S.size() == 0 || s.S(0) == 0.0) return out;
    const double cut = rel_cutoff * s.S(0);
    for (Eigen::Index i = 0; i < s.S.size(); ++i) {
        if (s.S(i) > cut) out.noalias() += s.V.col(i) * (1.0 / s.S(i)) * s.U.col(i).transpose();
    }
    return out;
}

/// Orthonormal basis of the left null space {w : w' M = 0}, one basis vector per row.
inline Matrix left_null_space(const Matrix& M, double rel_tol = kRankTol) {
    const Eigen::Index r = numerical_rank(M, rel_tol);
    const Svd s = svd(M, /*full_u=*/true);
    return s.U.rightCols(M.rows() - r).transpose();
}

/// Best rank-k approximation (Eckart-Young) by truncated SVD.
inline Matrix truncate_rank(const Matrix& M, Eigen::Index k) {
    const Svd s = svd(M);
    const Eigen::Index keep = std::min<Eigen::Index>(k, s.S.size());
    return s.U.leftCols(keep) * s.S.head(keep).asDiagonal() * s.V.leftCols(keep).transpose();
}

inline double max_abs(const Matrix& M) {
    return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
}

inline bool all_finite(const Matrix& M) {
    return M.allFinite();
}

inline double spectral_radius(const Matrix& A) {
    if (A.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Eigenvalues sorted by (real, imag) so multisets can be compared element-wise.
inline std::vector<std::complex<double>> sorted_eigenvalues(const Matrix& A) {
    Eigen::EigenSolver<Matrix> es(A, false);
    std::vector<std::complex<double>> ev(es.eigenvalues().data(),
                                         es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return ev;
}

} // namespace osad
