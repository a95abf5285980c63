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

#include "osad/bench.hpp"
#include "osad/error.hpp"
#include "osad/eval.hpp"
#include "osad/pipeline.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace {

using namespace osad;

LabelSet labels(std::vector<Interval> iv) { return LabelSet(std::move(iv), LabelClass::other); }

TEST(IntervalMetrics, HandExamples) {
    EXPECT_EQ(interval_precision(labels({{0, 10}}), std::vector<Interval>{{0, 10}}), 1.0);
    EXPECT_EQ(interval_recall(labels({{0, 10}}), std::vector<Interval>{{0, 10}}), 1.0);
    EXPECT_EQ(interval_precision(labels({{0, 10}}), std::vector<Interval>{{5, 15}}), 0.5);
    EXPECT_EQ(interval_recall(labels({{0, 10}}), std::vector<Interval>{{5, 15}}), 0.5);
    EXPECT_EQ(interval_precision(labels({{0, 4}, {10, 14}}), std::vector<Interval>{{0, 14}}), 8.0 / 14.0);
    EXPECT_EQ(interval_recall(labels({{0, 4}, {10, 14}}), std::vector<Interval>{{0, 14}}), 1.0);
}

TEST(IntervalMetrics, EmptySidesAreUndefined) {
    EXPECT_THROW(interval_precision(labels({{0, 10}}), std::vector<Interval>{}), UndefinedMetric);
    EXPECT_THROW(interval_recall(labels({}), std::vector<Interval>{{0, 10}}), UndefinedMetric);
    EXPECT_EQ(interval_recall(labels({{0, 10}}), std::vector<Interval>{}), 0.0);
    EXPECT_EQ(interval_precision(labels({}), std::vector<Interval>{{0, 10}}), 0.0);
}

TEST(IntervalMetrics, InvalidLabelsRejected) {
    EXPECT_THROW(labels({{5, 5}}), ValidationError);
    EXPECT_THROW(labels({{0, 10}, {5, 15}}), ValidationError);
}

std::vector<Interval> random_disjoint(std::mt19937_64& rng, std::int64_t horizon, int count) {
    std::uniform_int_distribution<std::int64_t> pos(0, horizon - 1);
    std::vector<std::int64_t> cuts;
    for (int i = 0; i < 2 * count; ++i) cuts.push_back(pos(rng));
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<Interval> out;
    for (std::size_t i = 0; i + 1 < cuts.size(); i += 2) out.push_back({cuts[i], cuts[i + 1]});
    return out;
}

std::vector<bool> mask(const std::vector<Interval>& v, std::int64_t horizon) {
    std::vector<bool> m(static_cast<std::size_t>(horizon), false);
    for (const auto& iv : v)
        for (std::int64_t t = iv.start; t < iv.end; ++t) m[static_cast<std::size_t>(t)] = true;
    return m;
}

TEST(IntervalMetrics, MatchSampleMaskOracle) {
    std::mt19937_64 rng(21);
    const std::int64_t H = 500;
    for (int trial = 0; trial < 300; ++trial) {
        const auto L = random_disjoint(rng, H, 1 + trial % 6);
        const auto P = random_disjoint(rng, H, 1 + trial % 4);
        if (L.empty() || P.empty()) continue;
        const auto ml = mask(L, H), mp = mask(P, H);
        double both = 0, nl = 0, np = 0;
        for (std::int64_t t = 0; t < H; ++t) {
            both += ml[static_cast<std::size_t>(t)] && mp[static_cast<std::size_t>(t)];
            nl += ml[static_cast<std::size_t>(t)];
            np += mp[static_cast<std::size_t>(t)];
        }
        const LabelSet ls = labels(L);
        const double prec = interval_precision(ls, P), rec = interval_recall(ls, P);
        EXPECT_DOUBLE_EQ(prec, both / np);
        EXPECT_DOUBLE_EQ(rec, both / nl);
        EXPECT_GE(prec, 0.0);
        EXPECT_LE(prec, 1.0);
        EXPECT_GE(rec, 0.0);
        EXPECT_LE(rec, 1.0);
    }
}

TEST(IntervalMetrics, PermutationAndSplitInvariance) {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        const auto L = random_disjoint(rng, 400, 4);
        auto P = random_disjoint(rng, 400, 5);
        if (L.empty() || P.empty()) continue;
        const LabelSet ls = labels(L);
        const double prec = interval_precision(ls, P), rec = interval_recall(ls, P);
        std::shuffle(P.begin(), P.end(), rng);
        EXPECT_EQ(interval_precision(ls, P), prec);
        EXPECT_EQ(interval_recall(ls, P), rec);

        // Split every interval of length >= 2 at its midpoint.
        std::vector<Interval> Ps, Ls;
        for (const auto& iv : P) {
            if (iv.length() < 2) { Ps.push_back(iv); continue; }
            const std::int64_t mid = iv.start + iv.length() / 2;
            Ps.push_back({iv.start, mid});
            Ps.push_back({mid, iv.end});
        }
        for (const auto& iv : L) {
            if (iv.length() < 2) { Ls.push_back(iv); continue; }
            const std::int64_t mid = iv.start + iv.length() / 2;
            Ls.push_back({iv.start, mid});
            Ls.push_back({mid, iv.end});
        }
        EXPECT_DOUBLE_EQ(interval_precision(labels(Ls), Ps), prec);
        EXPECT_DOUBLE_EQ(interval_recall(labels(Ls), Ps), rec);
    }
}

TEST(MatchIntervals, Examples) {
    auto one = match_intervals(labels({{0, 10}}), std::vector<Interval>{{5, 12}});
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].pred, (Interval{5, 12}));

    auto two = match_intervals(labels({{0, 10}}), std::vector<Interval>{{0, 3}, {4, 10}});
    ASSERT_EQ(two.size(), 1u);
    EXPECT_EQ(two[0].pred, (Interval{4, 10}));

    EXPECT_TRUE(match_intervals(labels({{0, 10}}), std::vector<Interval>{{20, 30}}).empty());
}

TEST(MatchIntervals, OneToOneAndTieBreak) {
    // Both labels overlap the single prediction by 5 samples; the earlier label wins.
    auto m = match_intervals(labels({{0, 10}, {15, 25}}), std::vector<Interval>{{5, 20}});
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m[0].label, (Interval{0, 10}));
}

TEST(DelayStats, Examples) {
    const DelayStats z = delay_stats({{{0, 10}, {0, 10}}}, 200.0);
    EXPECT_EQ(z.mean_a, 0.0);
    EXPECT_EQ(z.mean_b, 0.0);
    EXPECT_EQ(z.std_a, 0.0);

    const DelayStats d = delay_stats({{{100, 200}, {98, 204}}}, 200.0);
    EXPECT_NEAR(d.mean_a, 0.01, 1e-12);
    EXPECT_NEAR(d.mean_b, -0.02, 1e-12);

    const DelayStats two = delay_stats({{{100, 200}, {98, 200}}, {{300, 400}, {302, 400}}}, 200.0);
    EXPECT_NEAR(two.mean_a, 0.0, 1e-12);
    EXPECT_NEAR(two.std_a, 0.01 * std::sqrt(2.0), 1e-12);
    EXPECT_EQ(two.count, 2u);

    EXPECT_THROW(delay_stats({}, 200.0), UndefinedMetric);
}

TEST(DelayStats, ShiftingPredictionsLaterLowersBothMeans) {
    // With delay = (label - prediction) / rate, moving every prediction k
    // samples later changes both means by exactly -k / rate.
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<std::int64_t> jitter(-30, 30);
    std::vector<MatchedPair> pairs;
    for (std::int64_t i = 0; i < 12; ++i) {
        const Interval lab{1000 * i + 100, 1000 * i + 300};
        pairs.push_back({lab, {lab.start + jitter(rng), lab.end + jitter(rng)}});
    }
    const DelayStats base = delay_stats(pairs, 200.0);
    for (std::int64_t k : {1, 7, 40}) {
        auto shifted = pairs;
        for (auto& p : shifted) p.pred = {p.pred.start + k, p.pred.end + k};
        const DelayStats s = delay_stats(shifted, 200.0);
        EXPECT_NEAR(s.mean_a - base.mean_a, -static_cast<double>(k) / 200.0, 1e-12);
        EXPECT_NEAR(s.mean_b - base.mean_b, -static_cast<double>(k) / 200.0, 1e-12);
        EXPECT_NEAR(s.std_a, base.std_a, 1e-12);
        EXPECT_NEAR(s.std_b, base.std_b, 1e-12);
    }
}

TEST(Median, OddAndEven) {
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
    EXPECT_THROW(median({}), ValidationError);
}

TEST(Suppression, IdenticalSignals) {
    std::mt19937_64 rng(24);
    const Matrix e = tu::gaussian(100, 3, rng);
    const SuppressionReport rep = residual_suppression_report(e, e, {{10, 30}});
    EXPECT_EQ(rep.median_in, 0.0);
    EXPECT_EQ(rep.median_out, 0.0);
    EXPECT_TRUE(std::isnan(rep.separation));
}

TEST(Suppression, OutsidePatternIdentity) {
    std::mt19937_64 rng(25);
    const Matrix e = tu::gaussian(101, 3, rng);
    const Matrix W = tu::orthogonal(3, rng);
    const Matrix r = e * W.transpose();
    const SuppressionReport rep = residual_suppression_report(e, r, {{0, 50}});
    std::vector<double> out;
    const Matrix WmI = W - Matrix::Identity(3, 3);
    for (Eigen::Index t = 50; t < 101; ++t) out.push_back((WmI * e.row(t).transpose()).norm());
    std::sort(out.begin(), out.end());
    EXPECT_NEAR(rep.median_out, out[out.size() / 2], 1e-12);
}

TEST(Suppression, ZeroResidualInsideSeparates) {
    std::mt19937_64 rng(26);
    Matrix e = tu::gaussian(200, 2, rng);
    Matrix r = e;
    e.middleRows(50, 50) *= 5.0;
    r.middleRows(50, 50).setZero();
    const SuppressionReport rep = residual_suppression_report(e, r, {{50, 100}});
    EXPECT_GT(rep.separation, 1.0);
    EXPECT_EQ(rep.median_out, 0.0);
    EXPECT_TRUE(std::isinf(rep.separation));
}

TEST(Suppression, EmptyPartitionIsUndefined) {
    const Matrix e = Matrix::Ones(10, 2);
    EXPECT_THROW(residual_suppression_report(e, e, {{0, 10}}), UndefinedMetric);
    EXPECT_THROW(residual_suppression_report(e, e, {}), UndefinedMetric);
}

TEST(OutputCoordinates, SimilarityPreservesOutputs) {
    std::mt19937_64 rng(27);
    const LdsModel m(tu::gaussian(4, 4, rng) * 0.3, tu::gaussian(4, 4, rng));
    const LdsModel o = to_output_coordinates(m);
    EXPECT_LE(max_abs(o.C() - Matrix::Identity(4, 4)), 0.0);
    const Vector x0 = tu::gaussian(4, 1, rng);
    const Matrix y1 = simulate_lds(m, x0, 30).y.samples();
    const Matrix y2 = simulate_lds(o, m.C() * x0, 30).y.samples();
    EXPECT_LE(max_abs(y1 - y2), 1e-10);
}

TEST(AverageModels, ElementWiseMean) {
    const LdsModel a(Matrix::Identity(2, 2) * 0.2, Matrix::Identity(2, 2));
    const LdsModel b(Matrix::Identity(2, 2) * 0.6, Matrix::Identity(2, 2) * 3.0);
    const LdsModel avg = average_models({a, b});
    EXPECT_LE(max_abs(avg.A() - Matrix::Identity(2, 2) * 0.4), 1e-15);
    EXPECT_LE(max_abs(avg.C() - Matrix::Identity(2, 2) * 2.0), 1e-15);
}

// --- transfer grid on small benches ----------------------------------------

struct GridRun {
    TransferGrid grid;
    double diag = 0.0, off = 0.0, avg = 0.0;
};

GridRun run_grid(BenchConfig cfg) {
    const auto bench = make_bench(cfg);
    IdentificationConfig id;
    id.rank = 2 * static_cast<Eigen::Index>(cfg.rhythm_bands.size());
    PatternSource src;
    src.kind = PatternSource::Kind::observed_matrix;
    src.matrix = bench.front().truth.D;
    std::vector<SubjectModel> models;
    std::vector<SubjectData> data;
    for (const auto& s : bench) {
        LearnedSubject l = learn_and_design(s.train, src, id);
        models.push_back({l.model, l.design});
        data.push_back({s.test, s.pattern_labels, s.other_labels});
    }
    TransferConfig tc;
    tc.detection = DetectionConfig::for_rate(cfg.rate_hz);
    tc.observed_pattern = src.matrix;
    GridRun out;
    out.grid = transfer_grid(models, data, tc);
    const auto S = static_cast<double>(bench.size());
    for (std::size_t i = 0; i < bench.size(); ++i) {
        for (std::size_t j = 0; j < bench.size(); ++j)
            (i == j ? out.diag : out.off) += out.grid.cells[i][j].recall;
        out.avg += out.grid.averaged[i].recall;
    }
    out.diag /= S;
    out.off /= S * (S - 1.0);
    out.avg /= S;
    return out;
}

TEST(TransferGrid, HeterogeneousSubjectsFollowTrend) {
    BenchConfig cfg;
    cfg.seed = 7;
    const GridRun g = run_grid(cfg);
    EXPECT_GT(g.diag, g.off);
    EXPECT_LE(g.avg, g.diag);
    EXPECT_GE(g.avg, g.off);
    ASSERT_TRUE(g.grid.averaged_model.has_value());
}

TEST(TransferGrid, IdenticalSubjectsTransferEqually) {
    BenchConfig cfg;
    cfg.seed = 11;
    cfg.subjects = 2;
    cfg.test_seconds = 60.0;
    cfg.other_events = 5;
    cfg.pattern_events = 5;
    const auto bench = make_bench(cfg);
    IdentificationConfig id;
    id.rank = 6;
    PatternSource src;
    src.matrix = bench[0].truth.D;
    const LearnedSubject l = learn_and_design(bench[0].train, src, id);
    const std::vector<SubjectModel> models{{l.model, l.design}, {l.model, l.design}};
    const SubjectData d{bench[0].test, bench[0].pattern_labels, bench[0].other_labels};
    TransferConfig tc;
    tc.detection = DetectionConfig::for_rate(cfg.rate_hz);
    const TransferGrid g = transfer_grid(models, {d, d}, tc);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(g.cells[i][j].recall, g.cells[0][0].recall);
    EXPECT_TRUE(g.averaged.empty());
}

TEST(TransferGrid, NeedsTwoSubjects) {
    EXPECT_THROW(transfer_grid({}, {}, TransferConfig{}), ValidationError);
}

} // namespace
