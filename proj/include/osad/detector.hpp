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
 * @file detector.hpp
 * @brief Two-sided tabular CUSUM charts and the two alert streams.
 *
 * The chart is designed from the false-alarm probability alpha, the miss
 * probability beta and the shift size delta (in standard deviations):
 *
 *     J = delta * sigma / 2
 *     H = (2 / delta^2) * ln((1 - beta) / alpha) * J
 *
 *     S_hi(i) = max(0, S_hi(i-1) + x_i - mu0 - J)
 *     S_lo(i) = max(0, S_lo(i-1) + mu0 - J - x_i)
 *
 * A sample is flagged when either statistic exceeds H; both are then reset.
 */

#pragma once

#include "osad/error.hpp"
#include "osad/linalg.hpp"
#include "osad/model.hpp"

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace osad {

struct CusumConfig {
    double alpha = 1e-4;
    double beta = 1e-4;
    double delta = 1.0;
    std::int64_t calibration_len = 400;
    /// First sample of the calibration window.
    std::int64_t calibration_start = 1;

    void validate() const {
        detail::require(alpha > 0.0 && alpha < 1.0, "alpha must be in (0, 1)");
        detail::require(beta > 0.0 && beta < 1.0, "beta must be in (0, 1)");
        detail::require(delta > 0.0 && std::isfinite(delta), "delta must be positive");
        detail::require(calibration_len >= 30, "calibration_len must be >= 30");
        detail::require(calibration_start >= 0, "calibration_start must be >= 0");
    }
};

struct CusumState {
    double s_hi = 0.0;
    double s_lo = 0.0;
    double mu0 = 0.0;
    double sigma = 0.0;
    double J = 0.0; // slack
    double H = 0.0; // decision threshold
    std::int64_t sample_index = 0;
};

/// Slack and threshold for a given sigma.
inline std::pair<double, double> cusum_design(const CusumConfig& cfg, double sigma) {
    const double J = cfg.delta * sigma / 2.0;
    const double H = (2.0 / (cfg.delta * cfg.delta)) * std::log((1.0 - cfg.beta) / cfg.alpha) * J;
    return {J, H};
}

/// Estimates mu0 and sigma (unbiased) on the calibration window of `signal`.
inline CusumState calibrate(std::span<const double> signal, const CusumConfig& cfg) {
    cfg.validate();
    const auto begin = static_cast<std::size_t>(cfg.calibration_start);
    const auto len = static_cast<std::size_t>(cfg.calibration_len);
    if (signal.size() < begin + len) {
        throw ValidationError("calibration window needs " + std::to_string(begin + len) + " samples, have " +
                              std::to_string(signal.size()));
    }
    double sum = 0.0;
    for (std::size_t i = begin; i < begin + len; ++i) {
        detail::require(std::isfinite(signal[i]), "non-finite value in calibration window");
        sum += signal[i];
    }
    const double mean = sum / static_cast<double>(len);
    double ss = 0.0;
    for (std::size_t i = begin; i < begin + len; ++i) ss += (signal[i] - mean) * (signal[i] - mean);
    const double sigma = std::sqrt(ss / static_cast<double>(len - 1));
    if (!(sigma > 0.0)) throw ValidationError("calibration signal is constant (sigma = 0)");

    CusumState st;
    st.mu0 = mean;
    st.sigma = sigma;
    std::tie(st.J, st.H) = cusum_design(cfg, sigma);
    return st;
}

struct CusumStep {
    bool flagged = false;
    double statistic = 0.0; // max(S_hi, S_lo) before any reset
};

/// One chart update in place.
inline CusumStep cusum_update(CusumState& st, double value) {
    if (!std::isfinite(value)) {
        throw ValidationError("non-finite value at sample " + std::to_string(st.sample_index));
    }
    st.s_hi = std::max(0.0, st.s_hi + value - st.mu0 - st.J);
    st.s_lo = std::max(0.0, st.s_lo + st.mu0 - st.J - value);
    CusumStep out;
    out.statistic = std::max(st.s_hi, st.s_lo);
    out.flagged = st.s_hi > st.H || st.s_lo > st.H;
    if (out.flagged) {
        st.s_hi = 0.0;
        st.s_lo = 0.0;
    }
    ++st.sample_index;
    return out;
}

/// Value-semantics form of cusum_update.
inline std::pair<CusumState, bool> cusum_step(CusumState st, double value) {
    const CusumStep s = cusum_update(st, value);
    return {st, s.flagged};
}

enum class AlertStream { all_anomalies, selective };

inline std::string to_string(AlertStream s) {
    return s == AlertStream::all_anomalies ? "all_anomalies" : "selective";
}

inline AlertStream parse_alert_stream(std::string_view s) {
    if (s == "all_anomalies") return AlertStream::all_anomalies;
    if (s == "selective") return AlertStream::selective;
    throw ValidationError("unknown alert stream '" + std::string(s) + "'");
}

struct AlertInterval {
    Interval span;
    AlertStream stream = AlertStream::all_anomalies;
    double peak_stat = 0.0;
};

/// Merges a stream of per-sample flags into intervals: runs separated by at
/// most `gap` unflagged samples are joined; runs shorter than `min_len` are dropped.
class IntervalMerger {
public:
    IntervalMerger(std::int64_t gap, std::int64_t min_len, AlertStream stream = AlertStream::all_anomalies)
        : gap_(gap), min_len_(min_len), stream_(stream) {
        detail::require(gap >= 0 && min_len >= 0, "gap and min_len must be >= 0");
    }

    /// Feeds sample t (strictly increasing). Returns an interval once it can no longer grow.
    std::optional<AlertInterval> push(std::int64_t t, bool flagged, double stat = 0.0) {
        std::optional<AlertInterval> done;
        if (flagged) {
            if (open_ && t - cur_.span.end <= gap_) {
                cur_.span.end = t + 1;
                cur_.peak_stat = std::max(cur_.peak_stat, stat);
            } else {
                done = close();
                open_ = true;
                cur_ = {{t, t + 1}, stream_, stat};
            }
        } else if (open_ && t + 1 - cur_.span.end > gap_) {
            done = close();
        }
        return done;
    }

    std::optional<AlertInterval> finish() { return close(); }

private:
    std::optional<AlertInterval> close() {
        if (!open_) return std::nullopt;
        open_ = false;
        if (cur_.span.length() < min_len_) return std::nullopt;
        return cur_;
    }

    std::int64_t gap_;
    std::int64_t min_len_;
    AlertStream stream_;
    bool open_ = false;
    AlertInterval cur_;
};

inline std::vector<AlertInterval> intervals_from_flags(const std::vector<bool>& flags, std::int64_t gap,
                                                       std::int64_t min_len,
                                                       AlertStream stream = AlertStream::all_anomalies) {
    IntervalMerger merger(gap, min_len, stream);
    std::vector<AlertInterval> out;
    for (std::size_t t = 0; t < flags.size(); ++t) {
        if (auto iv = merger.push(static_cast<std::int64_t>(t), flags[t])) out.push_back(*iv);
    }
    if (auto iv = merger.finish()) out.push_back(*iv);
    return out;
}

struct DetectionConfig {
    CusumConfig cusum;
    std::int64_t gap = 20;     // samples
    std::int64_t min_len = 50; // samples

    /// Gap of 0.1 s and minimum length of 0.25 s at the given rate.
    static DetectionConfig for_rate(double rate_hz) {
        DetectionConfig c;
        c.gap = static_cast<std::int64_t>(std::lround(0.1 * rate_hz));
        c.min_len = static_cast<std::int64_t>(std::lround(0.25 * rate_hz));
        return c;
    }
};

/// A calibrated CUSUM chart feeding an interval merger. Values arriving before
/// the calibration window is complete are buffered and replayed after calibration.
class DetectionStream {
public:
    DetectionStream(const DetectionConfig& cfg, AlertStream stream)
        : cfg_(cfg), merger_(cfg.gap, cfg.min_len, stream) {
        cfg_.cusum.validate();
    }

    /// Returns every interval closed by this sample.
    std::vector<AlertInterval> push(double value) {
        std::vector<AlertInterval> out;
        if (!state_) {
            pending_.push_back(value);
            const auto need = static_cast<std::size_t>(cfg_.cusum.calibration_start + cfg_.cusum.calibration_len);
            if (pending_.size() < need) return out;
            std::vector<double> buf(pending_.begin(), pending_.end());
            state_ = calibrate(buf, cfg_.cusum);
            pending_.clear();
            for (double v : buf) feed(v, out);
            return out;
        }
        feed(value, out);
        return out;
    }

    /// Flushes the last open interval. Throws if the stream never calibrated.
    std::vector<AlertInterval> finish() {
        if (!state_) {
            std::vector<double> buf(pending_.begin(), pending_.end());
            calibrate(buf, cfg_.cusum); // throws with the precise reason
        }
        std::vector<AlertInterval> out;
        if (auto iv = merger_.finish()) out.push_back(*iv);
        return out;
    }

    const std::optional<CusumState>& state() const noexcept { return state_; }

private:
    void feed(double v, std::vector<AlertInterval>& out) {
        const std::int64_t t = state_->sample_index;
        const CusumStep s = cusum_update(*state_, v);
        if (auto iv = merger_.push(t, s.flagged, s.statistic)) out.push_back(*iv);
    }

    DetectionConfig cfg_;
    IntervalMerger merger_;
    std::optional<CusumState> state_;
    std::deque<double> pending_;
};

struct SelectiveResult {
    std::vector<AlertInterval> all_anomalies;
    std::vector<AlertInterval> selective;
};

/// Per-sample Euclidean norms of the rows of X.
inline std::vector<double> row_norms(const Matrix& X) {
    std::vector<double> out(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index t = 0; t < X.rows(); ++t) out[static_cast<std::size_t>(t)] = X.row(t).norm();
    return out;
}

/// CUSUM over ||e(t)|| gives every anomaly; CUSUM over ||r(t)|| gives only
/// anomalies the residual is not blind to.
inline SelectiveResult run_selective_detection(const Matrix& e, const Matrix& r, const DetectionConfig& cfg) {
    detail::require(e.rows() == r.rows(), "error and residual series differ in length");
    DetectionStream all(cfg, AlertStream::all_anomalies);
    DetectionStream sel(cfg, AlertStream::selective);
    SelectiveResult out;
    auto append = [](std::vector<AlertInterval>& dst, std::vector<AlertInterval>&& src) {
        dst.insert(dst.end(), src.begin(), src.end());
    };
    for (Eigen::Index t = 0; t < e.rows(); ++t) {
        append(out.all_anomalies, all.push(e.row(t).norm()));
        append(out.selective, sel.push(r.row(t).norm()));
    }
    append(out.all_anomalies, all.finish());
    append(out.selective, sel.finish());
    return out;
}

} // namespace osad
