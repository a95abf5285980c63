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
 * @file sysid.hpp
 * @brief Identification of (A, C) from output data via block-Hankel SVD.
 *
 * The output block-Hankel matrix with s block rows factors as O_s X where
 * O_s = [C; CA; ...; CA^(s-1)] is the extended observability matrix. A rank-n
 * truncated SVD gives O_s up to a similarity transform; C is its top block and
 * A solves the shift-invariance equation O_up A = O_down in least squares.
 * When C has full column rank A is then refitted on the reconstructed states
 * C^+ y(t), which is the least-squares one-step predictor for that C.
 *
 * The spectral variant whitens the Hankel matrix (per-channel row scaling,
 * per-window column scaling) before truncation and undoes the row scaling
 * afterwards. On exact data both variants span the same column space.
 */

#pragma once

#include "osad/error.hpp"
#include "osad/linalg.hpp"
#include "osad/model.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace osad {

enum class IdMethod { subspace, spectral };

inline std::string to_string(IdMethod m) {
    return m == IdMethod::subspace ? "subspace" : "spectral";
}

inline IdMethod parse_id_method(std::string_view s) {
    if (s == "subspace") return IdMethod::subspace;
    if (s == "spectral") return IdMethod::spectral;
    throw ValidationError("unknown identification method '" + std::string(s) + "'");
}

struct IdentificationConfig {
    Eigen::Index rank = 6;
    Eigen::Index hankel_rows = 10;
    IdMethod method = IdMethod::subspace;
    /// Singular values at or below this fraction of the largest are treated as zero.
    double rank_tol = 1e-10;
    /// When C has full column rank, refit A by least squares on the states C^+ y(t).
    /// The fit then minimises one_step_rmse for the identified C, and because the
    /// column spaces of C are nested across ranks, RMSE cannot grow with rank.
    bool refit_a = true;
};

struct RankFit {
    Eigen::Index rank;
    double rmse;
};

namespace detail {

inline Matrix block_hankel(const Matrix& Y, Eigen::Index block_rows) {
    const Eigen::Index m = Y.cols();
    const Eigen::Index cols = Y.rows() - block_rows + 1;
    Matrix H(block_rows * m, cols);
    for (Eigen::Index i = 0; i < block_rows; ++i) {
        H.middleRows(i * m, m) = Y.middleRows(i, cols).transpose();
    }
    return H;
}

} // namespace detail

/// Fits an LdsModel of state dimension cfg.rank to the observations.
/// Throws InfeasibleError when cfg.rank exceeds the numerical rank of the data.
inline LdsModel identify(const TimeSeries& obs, const IdentificationConfig& cfg) {
    const Eigen::Index m = obs.channels();
    const Eigen::Index s = cfg.hankel_rows;
    const Eigen::Index r = cfg.rank;
    detail::require(s >= 2, "hankel_rows must be >= 2");
    detail::require(r >= 1 && r <= m * s, "rank must be in [1, m * hankel_rows]");
    if (obs.length() < 2 * s + r) {
        throw ValidationError("insufficient data: need at least " + std::to_string(2 * s + r) +
                              " samples, have " + std::to_string(obs.length()));
    }

    Matrix H = detail::block_hankel(obs.samples(), s);
    Vector row_scale = Vector::Ones(H.rows());
    if (cfg.method == IdMethod::spectral) {
        const Matrix& Y = obs.samples();
        for (Eigen::Index j = 0; j < m; ++j) {
            const double rms = std::sqrt(Y.col(j).squaredNorm() / static_cast<double>(Y.rows()));
            const double w = rms > 0.0 ? 1.0 / rms : 1.0;
            for (Eigen::Index i = 0; i < s; ++i) row_scale(i * m + j) = w;
        }
        H = row_scale.asDiagonal() * H;
        for (Eigen::Index c = 0; c < H.cols(); ++c) {
            const double nrm = H.col(c).norm();
            if (nrm > 0.0) H.col(c) /= nrm;
        }
    }

    const Svd dec = svd(H);
    const double smax = dec.S.size() > 0 ? dec.S(0) : 0.0;
    Eigen::Index achievable = 0;
    while (achievable < dec.S.size() && dec.S(achievable) > cfg.rank_tol * smax) ++achievable;
    if (r > achievable) {
        throw InfeasibleError("requested rank " + std::to_string(r) +
                              " exceeds the numerical rank " + std::to_string(achievable) +
                              " of the output Hankel matrix");
    }

    Matrix O = dec.U.leftCols(r) * dec.S.head(r).cwiseSqrt().asDiagonal();
    O = row_scale.cwiseInverse().asDiagonal() * O;

    Matrix C = O.topRows(m);
    const Matrix O_up = O.topRows((s - 1) * m);
    const Matrix O_down = O.bottomRows((s - 1) * m);
    Matrix A = pinv(O_up, 1e-12) * O_down;
    if (cfg.refit_a && r <= m && numerical_rank(C, 1e-12) == r) {
        const Matrix& Y = obs.samples();
        const Eigen::Index N = Y.rows();
        const Matrix Cp = pinv(C);
        const Matrix X = Cp * Y.transpose(); // r x N reconstructed states
        A = Cp * Y.bottomRows(N - 1).transpose() * pinv(X.leftCols(N - 1), 1e-12);
    }
    return LdsModel(std::move(A), std::move(C));
}

/// RMS over t of ||y(t+1) - C A C^+ y(t)||_2, i.e. the one-step prediction error
/// with the latent state reconstructed by least squares.
inline double one_step_rmse(const LdsModel& model, const TimeSeries& obs) {
    detail::require(obs.channels() == model.m(), "observation width does not match C");
    detail::require(obs.length() >= 2, "need at least two samples");
    const Matrix M = model.C() * model.A() * pinv(model.C());
    const Matrix& Y = obs.samples();
    const Eigen::Index N = Y.rows();
    const Matrix E = Y.bottomRows(N - 1) - Y.topRows(N - 1) * M.transpose();
    return std::sqrt(E.squaredNorm() / static_cast<double>(N - 1));
}

/// identify + one_step_rmse for ranks 1..max_rank, ascending.
inline std::vector<RankFit> rank_sweep(const TimeSeries& obs, Eigen::Index max_rank, IdMethod method,
                                       Eigen::Index hankel_rows = 10) {
    detail::require(max_rank >= 1 && max_rank <= obs.channels() * hankel_rows,
                    "max_rank must be in [1, m * hankel_rows]");
    std::vector<RankFit> out;
    out.reserve(static_cast<std::size_t>(max_rank));
    for (Eigen::Index r = 1; r <= max_rank; ++r) {
        IdentificationConfig cfg;
        cfg.rank = r;
        cfg.hankel_rows = hankel_rows;
        cfg.method = method;
        out.push_back({r, one_step_rmse(identify(obs, cfg), obs)});
    }
    return out;
}

} // namespace osad
