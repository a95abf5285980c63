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
 * @file model.hpp
 * @brief Linear dynamical system types, forward simulation and error signals.
 *
 * The model is
 *
 *     x(t+1) = A x(t) + P z(t)
 *     y(t)   = C x(t) + v(t)
 *
 * where z is an optional disturbance entering the latent state through the
 * pattern matrix P and v is i.i.d. Gaussian measurement noise.
 */

#pragma once

#include "osad/error.hpp"
#include "osad/linalg.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace osad {

inline constexpr double kDefaultRateHz = 200.0;

/// Half-open sample-index interval [start, end).
struct Interval {
    std::int64_t start = 0;
    std::int64_t end = 0;

    std::int64_t length() const noexcept { return end > start ? end - start : 0; }
    bool contains(std::int64_t t) const noexcept { return t >= start && t < end; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

inline std::int64_t overlap(const Interval& a, const Interval& b) noexcept {
    const std::int64_t lo = std::max(a.start, b.start);
    const std::int64_t hi = std::min(a.end, b.end);
    return hi > lo ? hi - lo : 0;
}

/// N x m multichannel record sampled at rate_hz.
class TimeSeries {
public:
    TimeSeries() = default;

    explicit TimeSeries(Matrix samples, double rate_hz = kDefaultRateHz,
                        std::vector<std::string> channel_names = {})
        : samples_(std::move(samples)), rate_hz_(rate_hz), names_(std::move(channel_names)) {
        detail::require(samples_.rows() >= 1 && samples_.cols() >= 1, "time series must be non-empty");
        detail::require(rate_hz_ > 0.0 && std::isfinite(rate_hz_), "rate_hz must be positive");
        detail::require(samples_.allFinite(), "time series contains non-finite values");
        if (names_.empty()) {
            for (Eigen::Index j = 0; j < samples_.cols(); ++j) names_.push_back("ch" + std::to_string(j + 1));
        }
        detail::require(static_cast<Eigen::Index>(names_.size()) == samples_.cols(),
                        "channel name count does not match column count");
    }

    const Matrix& samples() const noexcept { return samples_; }
    double rate_hz() const noexcept { return rate_hz_; }
    const std::vector<std::string>& channel_names() const noexcept { return names_; }
    Eigen::Index length() const noexcept { return samples_.rows(); }
    Eigen::Index channels() const noexcept { return samples_.cols(); }
    Vector at(Eigen::Index t) const { return samples_.row(t).transpose(); }

    /// Rows [begin, end) as a new series.
    TimeSeries slice(Eigen::Index begin, Eigen::Index end) const {
        detail::require(begin >= 0 && end <= length() && begin < end, "invalid slice");
        return TimeSeries(samples_.middleRows(begin, end - begin), rate_hz_, names_);
    }

private:
    Matrix samples_;
    double rate_hz_ = kDefaultRateHz;
    std::vector<std::string> names_;
};

/// State matrix A (n x n) and observation matrix C (m x n).
class LdsModel {
public:
    LdsModel() = default;

    LdsModel(Matrix A, Matrix C) : A_(std::move(A)), C_(std::move(C)) {
        detail::require(A_.rows() == A_.cols() && A_.rows() >= 1, "A must be square and non-empty");
        detail::require(C_.cols() == A_.cols() && C_.rows() >= 1, "C must be m x n with n = dim(A)");
        detail::require(A_.allFinite() && C_.allFinite(), "model contains non-finite entries");
        rho_ = osad::spectral_radius(A_);
    }

    const Matrix& A() const noexcept { return A_; }
    const Matrix& C() const noexcept { return C_; }
    Eigen::Index n() const noexcept { return A_.rows(); }
    Eigen::Index m() const noexcept { return C_.rows(); }
    double spectral_radius() const noexcept { return rho_; }
    bool stable() const noexcept { return rho_ < 1.0; }

private:
    Matrix A_;
    Matrix C_;
    double rho_ = 0.0;
};

/// Latent-space disturbance directions, n x k.
struct PatternMatrix {
    Matrix P;

    PatternMatrix() = default;
    explicit PatternMatrix(Matrix p) : P(std::move(p)) {
        detail::require(P.cols() >= 1 && P.rows() >= 1, "pattern matrix needs at least one column");
        detail::require(P.allFinite(), "pattern matrix contains non-finite entries");
    }

    Eigen::Index k() const noexcept { return P.cols(); }
};

/// Driving signal of a pattern, N x k, with the sample ranges where it is active.
class DisturbanceSignal {
public:
    DisturbanceSignal() = default;

    explicit DisturbanceSignal(Matrix values) : values_(std::move(values)) {
        detail::require(values_.allFinite(), "disturbance contains non-finite values");
        std::int64_t open = -1;
        for (Eigen::Index t = 0; t < values_.rows(); ++t) {
            const bool active = (values_.row(t).array() != 0.0).any();
            if (active && open < 0) open = t;
            if (!active && open >= 0) {
                active_.push_back({open, t});
                open = -1;
            }
        }
        if (open >= 0) active_.push_back({open, values_.rows()});
    }

    const Matrix& values() const noexcept { return values_; }
    const std::vector<Interval>& active_intervals() const noexcept { return active_; }
    Eigen::Index k() const noexcept { return values_.cols(); }

private:
    Matrix values_;
    std::vector<Interval> active_;
};

/// Paired latent and observed trajectories, one row per sample.
struct Trajectory {
    Matrix latent;
    Matrix observed;
};

struct ErrorTrace {
    Matrix latent_err;   // N x n
    Matrix observed_err; // N x m
};

struct Simulation {
    TimeSeries y;
    Matrix x;

    Trajectory trajectory() const { return {x, y.samples()}; }
};

/// Runs the model forward for `steps` samples starting from x0.
///
/// Measurement noise (std noise_std) is added to y only. The disturbance row
/// z(t) drives the transition from t to t+1, so it needs at least steps - 1 rows.
inline Simulation simulate_lds(const LdsModel& model, const Vector& x0, Eigen::Index steps,
                               const std::optional<PatternMatrix>& pattern = std::nullopt,
                               const std::optional<DisturbanceSignal>& disturbance = std::nullopt,
                               double noise_std = 0.0, std::uint64_t seed = 0,
                               double rate_hz = kDefaultRateHz) {
    detail::require(steps >= 1, "steps must be >= 1");
    detail::require(x0.size() == model.n(), "x0 dimension does not match A");
    detail::require(x0.allFinite(), "x0 contains non-finite values");
    detail::require(noise_std >= 0.0 && std::isfinite(noise_std), "noise_std must be finite and >= 0");
    detail::require(pattern.has_value() == disturbance.has_value(),
                    "pattern and disturbance must be given together");
    if (pattern) {
        detail::require(pattern->P.rows() == model.n(), "pattern rows must equal state dimension");
        detail::require(disturbance->k() == pattern->k(), "disturbance width must equal pattern columns");
        detail::require(disturbance->values().rows() >= steps - 1, "disturbance shorter than simulation");
    }

    const Matrix& A = model.A();
    const Matrix& C = model.C();
    Matrix x(steps, model.n());
    Matrix y(steps, model.m());
    Vector state = x0;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index t = 0; t < steps; ++t) {
        x.row(t) = state.transpose();
        y.row(t) = (C * state).transpose();
        if (noise_std > 0.0) {
            for (Eigen::Index j = 0; j < y.cols(); ++j) y(t, j) += noise_std * gauss(rng);
        }
        if (t + 1 < steps) {
            Vector next = A * state;
            if (pattern) next.noalias() += pattern->P * disturbance->values().row(t).transpose();
            state = std::move(next);
        }
    }
    if (!x.allFinite()) throw ValidationError("simulation diverged to non-finite values");
    return {TimeSeries(std::move(y), rate_hz), std::move(x)};
}

/// Element-wise truth - estimate for both latent and observed trajectories.
inline ErrorTrace compute_errors(const Trajectory& truth, const Trajectory& estimate) {
    detail::require(truth.latent.rows() == estimate.latent.rows() &&
                        truth.latent.cols() == estimate.latent.cols(),
                    "latent trajectories differ in shape");
    detail::require(truth.observed.rows() == estimate.observed.rows() &&
                        truth.observed.cols() == estimate.observed.cols(),
                    "observed trajectories differ in shape");
    detail::require(truth.latent.rows() == truth.observed.rows(), "latent and observed lengths differ");
    return {truth.latent - estimate.latent, truth.observed - estimate.observed};
}

/// Indices t with ||e(t)||_2 > delta, ascending.
inline std::vector<std::int64_t> threshold_anomalies(const ErrorTrace& err, double delta) {
    detail::require(delta > 0.0, "delta must be positive");
    std::vector<std::int64_t> out;
    for (Eigen::Index t = 0; t < err.observed_err.rows(); ++t) {
        if (err.observed_err.row(t).norm() > delta) out.push_back(t);
    }
    return out;
}

} // namespace osad
