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
 * @file eval.hpp
 * @brief Interval-overlap precision/recall, onset/offset delays, residual
 *        suppression statistics and cross-subject transfer grids.
 *
 * Interval lengths and overlaps count samples of half-open intervals.
 */

#pragma once

#include "osad/detector.hpp"
#include "osad/error.hpp"
#include "osad/linalg.hpp"
#include "osad/model.hpp"
#include "osad/residual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace osad {

enum class LabelClass { pattern, other };

inline std::string to_string(LabelClass c) { return c == LabelClass::pattern ? "pattern" : "other"; }

inline LabelClass parse_label_class(std::string_view s) {
    if (s == "pattern") return LabelClass::pattern;
    if (s == "other") return LabelClass::other;
    throw ValidationError("unknown label class '" + std::string(s) + "'");
}

struct LabelSet {
    std::vector<Interval> intervals;
    LabelClass cls = LabelClass::other;

    LabelSet() = default;
    LabelSet(std::vector<Interval> iv, LabelClass c) : intervals(std::move(iv)), cls(c) {
        for (std::size_t i = 0; i < intervals.size(); ++i) {
            detail::require(intervals[i].start < intervals[i].end, "label interval must have start < end");
            if (i > 0) {
                detail::require(intervals[i - 1].end <= intervals[i].start, "labels must be sorted and disjoint");
            }
        }
    }
};

inline std::vector<Interval> spans_of(const std::vector<AlertInterval>& alerts) {
    std::vector<Interval> out;
    out.reserve(alerts.size());
    for (const auto& a : alerts) out.push_back(a.span);
    return out;
}

namespace detail {

inline std::int64_t total_length(const std::vector<Interval>& v) {
    std::int64_t s = 0;
    for (const auto& iv : v) {
        require(iv.start < iv.end, "interval must have start < end");
        s += iv.length();
    }
    return s;
}

inline std::int64_t total_overlap(const std::vector<Interval>& a, const std::vector<Interval>& b) {
    std::int64_t s = 0;
    for (const auto& x : a)
        for (const auto& y : b) s += overlap(x, y);
    return s;
}

} // namespace detail

/// Sum of label/prediction overlaps over the total predicted length.
/// Throws UndefinedMetric when there are no predictions.
inline double interval_precision(const LabelSet& labels, const std::vector<Interval>& preds) {
    const std::int64_t denom = detail::total_length(preds);
    if (denom == 0) throw UndefinedMetric("precision is undefined without predictions");
    return static_cast<double>(detail::total_overlap(labels.intervals, preds)) / static_cast<double>(denom);
}

/// Sum of label/prediction overlaps over the total labelled length.
/// Throws UndefinedMetric when there are no labels.
inline double interval_recall(const LabelSet& labels, const std::vector<Interval>& preds) {
    const std::int64_t denom = detail::total_length(labels.intervals);
    if (denom == 0) throw UndefinedMetric("recall is undefined without labels");
    detail::total_length(preds);
    return static_cast<double>(detail::total_overlap(labels.intervals, preds)) / static_cast<double>(denom);
}

inline double interval_precision(const LabelSet& labels, const std::vector<AlertInterval>& preds) {
    return interval_precision(labels, spans_of(preds));
}

inline double interval_recall(const LabelSet& labels, const std::vector<AlertInterval>& preds) {
    return interval_recall(labels, spans_of(preds));
}

struct MatchedPair {
    Interval label;
    Interval pred;
};

/// Greedy maximum-overlap one-to-one matching. Ties go to the earlier label
/// start, then the earlier prediction start. Result is ordered by label start.
inline std::vector<MatchedPair> match_intervals(const LabelSet& labels, const std::vector<Interval>& preds) {
    struct Candidate {
        std::int64_t ov;
        std::size_t li;
        std::size_t pj;
    };
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < labels.intervals.size(); ++i) {
        for (std::size_t j = 0; j < preds.size(); ++j) {
            const std::int64_t ov = overlap(labels.intervals[i], preds[j]);
            if (ov > 0) cands.push_back({ov, i, j});
        }
    }
    std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
        if (a.ov != b.ov) return a.ov > b.ov;
        const auto la = labels.intervals[a.li].start, lb = labels.intervals[b.li].start;
        if (la != lb) return la < lb;
        return preds[a.pj].start < preds[b.pj].start;
    });
    std::vector<bool> used_l(labels.intervals.size(), false), used_p(preds.size(), false);
    std::vector<MatchedPair> out;
    for (const auto& c : cands) {
        if (used_l[c.li] || used_p[c.pj]) continue;
        used_l[c.li] = used_p[c.pj] = true;
        out.push_back({labels.intervals[c.li], preds[c.pj]});
    }
    std::sort(out.begin(), out.end(), [](const MatchedPair& a, const MatchedPair& b) {
        return a.label.start < b.label.start;
    });
    return out;
}

inline std::vector<MatchedPair> match_intervals(const LabelSet& labels, const std::vector<AlertInterval>& preds) {
    return match_intervals(labels, spans_of(preds));
}

/// Moments of (a - a') and (b - b') in seconds over matched (label, prediction)
/// pairs. A prediction that starts early gives a positive onset delay.
struct DelayStats {
    double mean_a = 0.0;
    double std_a = 0.0;
    double mean_b = 0.0;
    double std_b = 0.0;
    std::size_t count = 0;
};

inline DelayStats delay_stats(const std::vector<MatchedPair>& pairs, double rate_hz) {
    if (pairs.empty()) throw UndefinedMetric("delay statistics need at least one matched pair");
    detail::require(rate_hz > 0.0, "rate_hz must be positive");
    const double n = static_cast<double>(pairs.size());
    double sa = 0.0, sb = 0.0;
    for (const auto& p : pairs) {
        sa += static_cast<double>(p.label.start - p.pred.start) / rate_hz;
        sb += static_cast<double>(p.label.end - p.pred.end) / rate_hz;
    }
    DelayStats d;
    d.count = pairs.size();
    d.mean_a = sa / n;
    d.mean_b = sb / n;
    if (pairs.size() > 1) {
        double va = 0.0, vb = 0.0;
        for (const auto& p : pairs) {
            const double da = static_cast<double>(p.label.start - p.pred.start) / rate_hz - d.mean_a;
            const double db = static_cast<double>(p.label.end - p.pred.end) / rate_hz - d.mean_b;
            va += da * da;
            vb += db * db;
        }
        d.std_a = std::sqrt(va / (n - 1.0));
        d.std_b = std::sqrt(vb / (n - 1.0));
    }
    return d;
}

inline double median(std::vector<double> v) {
    detail::require(!v.empty(), "median of an empty set");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

struct SuppressionReport {
    double median_in = 0.0;
    double median_out = 0.0;
    /// median_in / median_out; +inf when only median_out is 0, NaN when both are.
    double separation = 0.0;
};

inline bool inside_any(const std::vector<Interval>& ivs, std::int64_t t) {
    return std::any_of(ivs.begin(), ivs.end(), [t](const Interval& iv) { return iv.contains(t); });
}

/// Medians of ||r(t) - e(t)|| inside vs outside the pattern intervals.
/// e and r must have the same shape; lift a reduced residual first (see lift_residual).
inline SuppressionReport residual_suppression_report(const Matrix& e, const Matrix& r,
                                                     const std::vector<Interval>& pattern_intervals) {
    detail::require(e.rows() == r.rows(), "error and residual series differ in length");
    detail::require(e.cols() == r.cols(), "error and residual widths differ; lift the residual first");
    std::vector<double> in, out;
    for (Eigen::Index t = 0; t < e.rows(); ++t) {
        const double v = (r.row(t) - e.row(t)).norm();
        (inside_any(pattern_intervals, t) ? in : out).push_back(v);
    }
    if (in.empty() || out.empty()) throw UndefinedMetric("suppression report needs samples inside and outside");
    SuppressionReport rep;
    rep.median_in = median(std::move(in));
    rep.median_out = median(std::move(out));
    if (rep.median_out > 0.0) {
        rep.separation = rep.median_in / rep.median_out;
    } else {
        rep.separation = rep.median_in > 0.0 ? std::numeric_limits<double>::infinity()
                                             : std::numeric_limits<double>::quiet_NaN();
    }
    return rep;
}

/// Residual expressed in observation coordinates so it can be compared with e:
/// unchanged when W is square, W' r otherwise (W has orthonormal rows).
inline Matrix lift_residual(const ResidualDesign& d, const Matrix& r) {
    if (d.W.rows() == d.W.cols()) return r;
    return r * d.W;
}

// ---------------------------------------------------------------------------
// Cross-subject transfer

struct SubjectModel {
    LdsModel model;
    ResidualDesign design;
};

struct SubjectData {
    TimeSeries test;
    LabelSet pattern_labels;
    LabelSet other_labels;
};

struct CellMetrics {
    double recall = 0.0;
    double precision = std::numeric_limits<double>::quiet_NaN(); // NaN: no selective alerts
};

struct TransferConfig {
    DetectionConfig detection;
    DesignOptions design;
    /// Common observation-space pattern directions used to design the averaged
    /// model. When empty, no averaged row is produced.
    Matrix observed_pattern;
};

struct TransferGrid {
    std::vector<std::vector<CellMetrics>> cells; // cells[i][j]: subject i's model on subject j's data
    std::vector<CellMetrics> averaged;           // averaged model on subject j's data
    std::optional<LdsModel> averaged_model;
};

/// Similarity transform to coordinates where C = I (requires square, invertible C).
inline LdsModel to_output_coordinates(const LdsModel& model) {
    detail::require(model.m() == model.n(), "output coordinates need a square C");
    Eigen::FullPivLU<Matrix> lu(model.C());
    if (!lu.isInvertible()) throw InfeasibleError("C is singular; output coordinates do not exist");
    return LdsModel(model.C() * model.A() * lu.inverse(), Matrix::Identity(model.m(), model.m()));
}

/// Unweighted element-wise mean of A and C.
inline LdsModel average_models(const std::vector<LdsModel>& models) {
    detail::require(!models.empty(), "need at least one model to average");
    Matrix A = Matrix::Zero(models[0].n(), models[0].n());
    Matrix C = Matrix::Zero(models[0].m(), models[0].n());
    for (const auto& m : models) {
        detail::require(m.n() == models[0].n() && m.m() == models[0].m(), "models differ in dimensions");
        A += m.A();
        C += m.C();
    }
    const double k = static_cast<double>(models.size());
    return LdsModel(A / k, C / k);
}

/// Runs one model/design against one record and scores the selective stream
/// against the non-pattern labels.
inline CellMetrics evaluate_cell(const LdsModel& model, const ResidualDesign& design, const SubjectData& data,
                                 const DetectionConfig& cfg) {
    CellMetrics cell;
    std::vector<AlertInterval> selective;
    try {
        const ObserverOutput obs = run_observer(design, model, data.test, initial_state_estimate(model, data.test));
        selective = run_selective_detection(obs.e, obs.r, cfg).selective;
    } catch (const ValidationError&) {
        return cell; // diverged or uncalibratable: nothing detected
    }
    cell.recall = interval_recall(data.other_labels, selective);
    if (!selective.empty()) cell.precision = interval_precision(data.other_labels, selective);
    return cell;
}

inline TransferGrid transfer_grid(const std::vector<SubjectModel>& subjects, const std::vector<SubjectData>& data,
                                  const TransferConfig& cfg) {
    detail::require(subjects.size() >= 2, "transfer grid needs at least two subjects");
    detail::require(subjects.size() == data.size(), "one data set per subject is required");
    TransferGrid grid;
    grid.cells.assign(subjects.size(), std::vector<CellMetrics>(data.size()));
    for (std::size_t i = 0; i < subjects.size(); ++i)
        for (std::size_t j = 0; j < data.size(); ++j)
            grid.cells[i][j] = evaluate_cell(subjects[i].model, subjects[i].design, data[j], cfg.detection);

    if (cfg.observed_pattern.size() > 0) {
        std::vector<LdsModel> aligned;
        for (const auto& s : subjects) aligned.push_back(to_output_coordinates(s.model));
        LdsModel avg = average_models(aligned);
        const ResidualDesign d = design_residual(avg, pattern_from_observed(avg, cfg.observed_pattern), cfg.design);
        for (const auto& dj : data) grid.averaged.push_back(evaluate_cell(avg, d, dj, cfg.detection));
        grid.averaged_model = std::move(avg);
    }
    return grid;
}

} // namespace osad
