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
 * @file bench.hpp
 * @brief Seeded synthetic EEG-like recordings with labelled disturbances.
 *
 * Each subject is a bank of lightly damped oscillators (one 2x2 block per
 * rhythm) driven by white noise and observed through a shared mixing matrix.
 * Subjects differ in their rhythm frequencies. Two kinds of events are
 * injected into the latent state:
 *
 *  - pattern events: tapered 12-14 Hz bursts entering through P, whose
 *    observation-space directions D = C P are shared by all subjects;
 *  - other events: biphasic boxcar pulses entering through a direction whose
 *    image C Q is orthogonal to D.
 *
 * Labels are the samples [onset + 1, onset + 1 + length) where an event drives
 * the observations.
 */

#pragma once

#include "osad/eval.hpp"
#include "osad/linalg.hpp"
#include "osad/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace osad {

struct BenchConfig {
    std::uint64_t seed = 7;
    int subjects = 3;
    int channels = 6;       // m; the latent dimension is 2 * rhythms.size()
    double rate_hz = kDefaultRateHz;
    double train_seconds = 60.0;
    double test_seconds = 120.0;
    int pattern_events = 10;
    int other_events = 10;
    int pattern_dim = 2;          // k
    double noise_std = 0.05;
    double pattern_amplitude = 0.5;
    double other_amplitude = 0.5;
    double min_event_seconds = 0.5;
    double max_event_seconds = 1.0;
    double quiet_seconds = 3.0;   // event-free lead-in reserved for calibration
    double spacing_seconds = 1.0; // minimum gap between events
    /// Pole radius of each rhythm; below 1 the rhythms are damped resonances.
    double rhythm_radius = 0.99;
    /// Std of the white drive exciting every latent state (0: free response only).
    double background_std = 0.1;
    /// Frequency bands (Hz) of the background rhythms; one rhythm per band.
    std::vector<std::pair<double, double>> rhythm_bands{{1.5, 4.0}, {6.0, 12.0}, {15.0, 30.0}};
};

struct SubjectTruth {
    LdsModel model;
    Matrix P;        // n x k pattern directions (latent)
    Matrix D;        // m x k pattern directions (observed), C P
    Matrix Q;        // n x 1 non-pattern direction (latent)
    std::vector<double> rhythm_hz;
};

struct SubjectBench {
    SubjectTruth truth;
    TimeSeries train;
    TimeSeries test;
    LabelSet pattern_labels;
    LabelSet other_labels;
};

namespace detail {

inline Matrix random_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix X(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) X(i, j) = g(rng);
    Eigen::HouseholderQR<Matrix> qr(X);
    Matrix Qm = qr.householderQ() * Matrix::Identity(n, n);
    // Fix the column signs so the factor is a deterministic function of X.
    const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < n; ++j)
        if (R(j, j) < 0.0) Qm.col(j) = -Qm.col(j);
    return Qm;
}

inline Matrix rotation_bank(const std::vector<double>& hz, double rate_hz, double radius) {
    const auto n = static_cast<Eigen::Index>(2 * hz.size());
    Matrix A = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < hz.size(); ++i) {
        const double th = 2.0 * std::numbers::pi * hz[i] / rate_hz;
        const auto b = static_cast<Eigen::Index>(2 * i);
        A(b, b) = radius * std::cos(th);
        A(b, b + 1) = -radius * std::sin(th);
        A(b + 1, b) = radius * std::sin(th);
        A(b + 1, b + 1) = radius * std::cos(th);
    }
    return A;
}

struct PlacedEvent {
    std::int64_t onset;
    std::int64_t length;
    bool pattern;
};

inline std::vector<PlacedEvent> place_events(const BenchConfig& cfg, std::int64_t total, std::mt19937_64& rng) {
    std::vector<bool> kinds;
    kinds.insert(kinds.end(), static_cast<std::size_t>(cfg.pattern_events), true);
    kinds.insert(kinds.end(), static_cast<std::size_t>(cfg.other_events), false);
    std::shuffle(kinds.begin(), kinds.end(), rng);

    const auto lo = static_cast<std::int64_t>(std::lround(cfg.min_event_seconds * cfg.rate_hz));
    const auto hi = static_cast<std::int64_t>(std::lround(cfg.max_event_seconds * cfg.rate_hz));
    const auto spacing = static_cast<std::int64_t>(std::lround(cfg.spacing_seconds * cfg.rate_hz));
    std::uniform_int_distribution<std::int64_t> len_dist(lo, hi);
    std::vector<std::int64_t> lengths;
    std::int64_t busy = 0;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        lengths.push_back(len_dist(rng));
        busy += lengths.back() + spacing;
    }
    const auto start = static_cast<std::int64_t>(std::lround(cfg.quiet_seconds * cfg.rate_hz));
    const std::int64_t slack = total - start - busy - spacing;
    require(slack >= 0, "test record too short for the requested events");

    // Distribute the slack as sorted random cut points.
    std::uniform_int_distribution<std::int64_t> cut(0, slack);
    std::vector<std::int64_t> cuts(kinds.size());
    for (auto& c : cuts) c = cut(rng);
    std::sort(cuts.begin(), cuts.end());

    std::vector<PlacedEvent> out;
    std::int64_t t = start;
    std::int64_t used = 0;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        t += cuts[i] - used;
        used = cuts[i];
        out.push_back({t, lengths[i], kinds[i]});
        t += lengths[i] + spacing;
    }
    return out;
}

} // namespace detail

/// steps x width i.i.d. N(0, std^2) values (all zero when std is 0).
inline Matrix white_drive(std::uint64_t seed, Eigen::Index steps, Eigen::Index width, double std_dev) {
    Matrix Z = Matrix::Zero(steps, width);
    if (std_dev <= 0.0) return Z;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, std_dev);
    for (Eigen::Index t = 0; t < steps; ++t)
        for (Eigen::Index j = 0; j < width; ++j) Z(t, j) = g(rng);
    return Z;
}

/// Generates every subject of the bench. Deterministic given cfg.seed.
inline std::vector<SubjectBench> make_bench(const BenchConfig& cfg) {
    detail::require(cfg.subjects >= 1, "need at least one subject");
    detail::require(!cfg.rhythm_bands.empty(), "need at least one rhythm band");
    const auto n = static_cast<Eigen::Index>(2 * cfg.rhythm_bands.size());
    const Eigen::Index m = cfg.channels;
    detail::require(m >= n, "the bench needs at least as many channels as latent states");
    detail::require(cfg.pattern_dim >= 1 && cfg.pattern_dim < m, "pattern_dim must be in [1, m)");
    detail::require(cfg.noise_std >= 0.0, "noise_std must be >= 0");

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    // Shared montage: C = U diag(s) V' restricted to n columns, well conditioned.
    const Matrix U = detail::random_orthogonal(m, rng);
    const Matrix V = detail::random_orthogonal(n, rng);
    Vector s(n);
    for (Eigen::Index i = 0; i < n; ++i) s(i) = 0.75 + 0.5 * u01(rng);
    const Matrix C = U.leftCols(n) * s.asDiagonal() * V.transpose();

    // Shared observed pattern directions D inside range(C), and an observed
    // non-pattern direction inside range(C) orthogonal to D.
    const Matrix Cpinv = pinv(C);
    Matrix Z(n, cfg.pattern_dim + 1);
    for (Eigen::Index i = 0; i < Z.rows(); ++i)
        for (Eigen::Index j = 0; j < Z.cols(); ++j) Z(i, j) = g(rng);
    Eigen::HouseholderQR<Matrix> qr(C * Z);
    const Matrix basis = qr.householderQ() * Matrix::Identity(m, cfg.pattern_dim + 1);
    const Matrix D = basis.leftCols(cfg.pattern_dim);
    const Matrix q_obs = basis.rightCols(1);

    const auto train_len = static_cast<Eigen::Index>(std::lround(cfg.train_seconds * cfg.rate_hz));
    const auto test_len = static_cast<Eigen::Index>(std::lround(cfg.test_seconds * cfg.rate_hz));

    // Each band is cut into one stratum per subject and strata are dealt out
    // in a random order, so no two subjects share a rhythm frequency range.
    std::vector<std::vector<int>> stratum(cfg.rhythm_bands.size());
    for (auto& perm : stratum) {
        perm.resize(static_cast<std::size_t>(cfg.subjects));
        for (int i = 0; i < cfg.subjects; ++i) perm[static_cast<std::size_t>(i)] = i;
        std::shuffle(perm.begin(), perm.end(), rng);
    }

    std::vector<SubjectBench> out;
    for (int subj = 0; subj < cfg.subjects; ++subj) {
        std::vector<double> hz;
        for (std::size_t b = 0; b < cfg.rhythm_bands.size(); ++b) {
            const auto [lo, hi] = cfg.rhythm_bands[b];
            const double pos = (stratum[b][static_cast<std::size_t>(subj)] + u01(rng)) / cfg.subjects;
            hz.push_back(lo + (hi - lo) * pos);
        }
        LdsModel model(detail::rotation_bank(hz, cfg.rate_hz, cfg.rhythm_radius), C);
        SubjectTruth truth{model, Cpinv * D, D, Cpinv * q_obs, hz};

        auto random_state = [&] {
            Vector x(n);
            for (Eigen::Index i = 0; i < n; ++i) x(i) = g(rng);
            return x;
        };

        const Vector x_train = random_state();
        const std::uint64_t train_seed = rng();
        const Matrix bg_train = white_drive(rng(), train_len, n, cfg.background_std);
        Simulation train = cfg.background_std > 0.0
                               ? simulate_lds(model, x_train, train_len, PatternMatrix(Matrix::Identity(n, n)),
                                              DisturbanceSignal(bg_train), cfg.noise_std, train_seed, cfg.rate_hz)
                               : simulate_lds(model, x_train, train_len, std::nullopt, std::nullopt, cfg.noise_std,
                                              train_seed, cfg.rate_hz);

        const auto events = detail::place_events(cfg, test_len, rng);
        Matrix drive = Matrix::Zero(test_len, cfg.pattern_dim + 1);
        std::vector<Interval> pattern_iv, other_iv;
        for (const auto& ev : events) {
            if (ev.pattern) {
                const double f = 12.0 + 2.0 * u01(rng);
                const double phase = 2.0 * std::numbers::pi * u01(rng);
                for (std::int64_t i = 0; i < ev.length; ++i) {
                    const double w = std::sin(std::numbers::pi * (static_cast<double>(i) + 0.5) /
                                              static_cast<double>(ev.length));
                    const double arg = 2.0 * std::numbers::pi * f * static_cast<double>(i) / cfg.rate_hz + phase;
                    for (int c = 0; c < cfg.pattern_dim; ++c) {
                        drive(ev.onset + i, c) = cfg.pattern_amplitude * w * std::cos(arg - c * std::numbers::pi / 2);
                    }
                }
                pattern_iv.push_back({ev.onset + 1, ev.onset + 1 + ev.length});
            } else {
                const double sign = u01(rng) < 0.5 ? -1.0 : 1.0;
                for (std::int64_t i = 0; i < ev.length; ++i) {
                    drive(ev.onset + i, cfg.pattern_dim) =
                        sign * cfg.other_amplitude * (2 * i < ev.length ? 1.0 : -1.0);
                }
                other_iv.push_back({ev.onset + 1, ev.onset + 1 + ev.length});
            }
        }
        Matrix PQ(n, cfg.pattern_dim + 1 + n);
        PQ << truth.P, truth.Q, Matrix::Identity(n, n);
        Matrix full_drive(test_len, cfg.pattern_dim + 1 + n);
        full_drive << drive, white_drive(rng(), test_len, n, cfg.background_std);
        const Vector x_test = random_state();
        const std::uint64_t test_seed = rng();
        Simulation test = simulate_lds(model, x_test, test_len, PatternMatrix(PQ), DisturbanceSignal(full_drive),
                                       cfg.noise_std, test_seed, cfg.rate_hz);

        out.push_back({std::move(truth), std::move(train.y), std::move(test.y),
                       LabelSet(std::move(pattern_iv), LabelClass::pattern),
                       LabelSet(std::move(other_iv), LabelClass::other)});
    }
    return out;
}

/// A random stable system with a pattern direction and an orthogonal
/// disturbance direction, for decoupling checks.
struct DecouplingCase {
    LdsModel model;
    PatternMatrix pattern; // n x k
    Matrix Q;              // n x 1, C Q orthogonal to C P
    Vector x0;
};

/// n = m; A is normal with eigenvalue moduli in [0.5, 0.9]; C is orthogonal.
inline DecouplingCase random_decoupling_case(std::uint64_t seed, Eigen::Index n, Eigen::Index k) {
    detail::require(n >= 2 && n % 2 == 0, "n must be even and >= 2");
    detail::require(k >= 1 && k < n, "k must be in [1, n)");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);

    const Matrix Uo = detail::random_orthogonal(n, rng);
    Matrix blocks = Matrix::Zero(n, n);
    for (Eigen::Index b = 0; b < n; b += 2) {
        const double rho = 0.5 + 0.4 * u01(rng);
        const double th = std::numbers::pi * u01(rng);
        blocks(b, b) = rho * std::cos(th);
        blocks(b, b + 1) = -rho * std::sin(th);
        blocks(b + 1, b) = rho * std::sin(th);
        blocks(b + 1, b + 1) = rho * std::cos(th);
    }
    const Matrix A = Uo * blocks * Uo.transpose();
    const Matrix C = detail::random_orthogonal(n, rng);

    const Matrix basis = detail::random_orthogonal(n, rng);
    const Matrix P = C.transpose() * basis.leftCols(k);
    const Matrix Q = C.transpose() * basis.col(k);
    Vector x0(n);
    for (Eigen::Index i = 0; i < n; ++i) x0(i) = g(rng);
    return {LdsModel(A, C), PatternMatrix(P), Q, x0};
}

/// Random bursts: `count` windows of `len` samples of Gaussian drive, zero elsewhere.
inline Matrix random_bursts(std::uint64_t seed, Eigen::Index steps, Eigen::Index width, int count,
                            Eigen::Index len, double amplitude) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<Eigen::Index> pos(0, std::max<Eigen::Index>(0, steps - len - 1));
    Matrix Z = Matrix::Zero(steps, width);
    for (int c = 0; c < count; ++c) {
        const Eigen::Index s = pos(rng);
        for (Eigen::Index t = s; t < s + len && t < steps; ++t)
            for (Eigen::Index j = 0; j < width; ++j) Z(t, j) = amplitude * g(rng);
    }
    return Z;
}

} // namespace osad
