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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include "osad/bench.hpp"
#include "osad/detector.hpp"
#include "osad/eval.hpp"
#include "osad/pipeline.hpp"
#include "osad/residual.hpp"
#include "osad/sysid.hpp"

#include "test_util.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

using namespace osad;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double max_row_norm(const Matrix& X) { return X.rowwise().norm().maxCoeff(); }

// 1 -------------------------------------------------------------------------
Outcome golden_example() {
    const auto t0 = Clock::now();
    Matrix A(2, 2), P(2, 2), W(2, 2), F(2, 2);
    A << 0.5, 0.3, 0.3, 0.2;
    P << 1, 1, 2, 2;
    W << 2, -1, 2, -1;
    F << 0.0, 0.2, -0.7, 0.0;
    const Matrix C = Matrix::Identity(2, 2);

    const Matrix Wd = design_w(C, P);
    Vector dir(2);
    dir << 2, -1;
    const bool spans = Wd.rows() == 1 &&
                       std::abs(std::abs(Wd.row(0).dot(dir)) / (Wd.row(0).norm() * dir.norm()) - 1.0) <= 1e-12 &&
                       max_abs(Wd * C * P) <= 1e-12;
    const DecouplingReport r = verify_decoupling(A, C, P, W, F);
    const double dt = seconds_since(t0);
    Outcome o;
    o.pass = spans && r.pass && r.cfp_norm <= 1e-12 && r.cfaf_norm <= 1e-12 && dt < 1.0;
    o.detail = fmt("W ~ [2,-1]: %s, |CfP|=%.2e, |CfAf|=%.2e, %.3f s", spans ? "yes" : "no", r.cfp_norm,
                   r.cfaf_norm, dt);
    return o;
}

// 2 -------------------------------------------------------------------------
Outcome decoupling_suppression() {
    const auto t0 = Clock::now();
    const Eigen::Index n = 6, m = 6, k = 2, N = 10000;
    double worst_pattern = 0.0, worst_other = std::numeric_limits<double>::infinity();
    int failures = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        Matrix A = tu::gaussian(n, n, rng);
        A *= 0.9 / Eigen::EigenSolver<Matrix>(A, false).eigenvalues().cwiseAbs().maxCoeff();
        const Matrix C = tu::gaussian(m, n, rng);
        const LdsModel model(A, C);
        const Matrix P = tu::gaussian(n, k, rng);
        // Observed direction orthogonal to C P, mapped back into the state space.
        Eigen::HouseholderQR<Matrix> qr(C * P);
        const Matrix basis = qr.householderQ() * Matrix::Identity(m, m);
        const Matrix Q = pinv(C) * basis.col(k);

        const ResidualDesign d = design_residual(model, PatternMatrix(P));
        const Vector x0 = tu::gaussian(n, 1, rng);

        const Matrix zp = tu::gaussian(N, k, rng);
        const ObserverOutput op =
            run_observer(d, model, simulate_lds(model, x0, N, PatternMatrix(P), DisturbanceSignal(zp)).y, x0);
        const double ratio_p = max_row_norm(op.r) / max_row_norm(op.e);

        const Matrix zq = tu::gaussian(N, 1, rng);
        const ObserverOutput oq =
            run_observer(d, model, simulate_lds(model, x0, N, PatternMatrix(Q), DisturbanceSignal(zq)).y, x0);
        const double ratio_q = max_row_norm(oq.r) / max_row_norm(oq.e);

        worst_pattern = std::max(worst_pattern, ratio_p);
        worst_other = std::min(worst_other, ratio_q);
        failures += !(ratio_p <= 1e-6) + !(ratio_q >= 0.1);
    }
    const double dt = seconds_since(t0);
    Outcome o;
    o.pass = failures == 0 && dt < 30.0;
    o.detail = fmt("100 runs: worst pattern ratio %.2e (<= 1e-6), worst orthogonal ratio %.3f (>= 0.1), %.1f s",
                   worst_pattern, worst_other, dt);
    return o;
}

// Shared bench learning for 3, 4 and 8.
struct LearnedBench {
    std::vector<SubjectBench> bench;
    std::vector<LearnedSubject> learned;
};

LearnedBench learn_bench(std::uint64_t seed) {
    BenchConfig cfg;
    cfg.seed = seed;
    LearnedBench lb;
    lb.bench = make_bench(cfg);
    PatternSource src;
    src.matrix = lb.bench.front().truth.D;
    for (const auto& s : lb.bench) lb.learned.push_back(learn_and_design(s.train, src, IdentificationConfig{}));
    return lb;
}

// 3 -------------------------------------------------------------------------
Outcome two_tap_equivalence(const std::vector<LearnedBench>& runs) {
    int checked = 0;
    double worst = 0.0;
    for (const auto& lb : runs) {
        for (std::size_t i = 0; i < lb.bench.size(); ++i) {
            const auto& l = lb.learned[i];
            if (!(max_abs(l.design.C_f * l.design.A_f) <= kDecouplingTol)) continue;
            const TimeSeries& y = lb.bench[i].test;
            const ObserverOutput obs = run_observer(l.design, l.model, y, Vector::Zero(l.model.n()));
            TwoTapFilter f(l.design);
            const Matrix r2 = f.apply(y.samples());
            const double scale =
                std::max(max_row_norm(obs.r), max_row_norm(y.samples() * l.design.W.transpose()));
            worst = std::max(worst, max_row_norm(obs.r - r2) / scale);
            ++checked;
        }
    }
    Outcome o;
    o.pass = checked > 0 && worst <= 1e-10;
    o.detail = fmt("%d runs with CfAf = 0, worst relative difference %.2e", checked, worst);
    return o;
}

// 4 -------------------------------------------------------------------------
Outcome selectivity(const std::vector<LearnedBench>& runs, const std::vector<std::uint64_t>& seeds) {
    bool ok = true;
    std::string detail;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto& lb = runs[r];
        std::int64_t pattern_overlap = 0;
        double min_recall = 1.0;
        for (std::size_t i = 0; i < lb.bench.size(); ++i) {
            const DetectionRun run =
                detect(lb.learned[i].model, lb.learned[i].design, lb.bench[i].test, DetectionConfig::for_rate(200.0));
            for (const auto& a : run.alerts.selective)
                for (const auto& p : lb.bench[i].pattern_labels.intervals) pattern_overlap += overlap(a.span, p);
            min_recall = std::min(min_recall, interval_recall(lb.bench[i].other_labels, run.alerts.selective));
        }
        ok = ok && pattern_overlap == 0 && min_recall >= 0.95;
        detail += fmt("%sseed %llu: pattern overlap %lld, min recall %.3f", r ? "; " : "",
                      static_cast<unsigned long long>(seeds[r]), static_cast<long long>(pattern_overlap), min_recall);
    }
    return {ok, detail};
}

// 5 -------------------------------------------------------------------------
Outcome identification() {
    std::mt19937_64 rng(5);
    const Matrix A = tu::with_eigen_pairs({std::polar(0.95, 0.4), std::polar(0.85, 1.3)}, rng);
    const LdsModel truth(A, tu::gaussian(6, 4, rng));
    const TimeSeries y = simulate_lds(truth, tu::gaussian(4, 1, rng), 1000).y;
    double worst_eig = 0.0;
    for (IdMethod method : {IdMethod::subspace, IdMethod::spectral}) {
        IdentificationConfig id;
        id.rank = 4;
        id.method = method;
        const LdsModel m = identify(y, id);
        worst_eig = std::max(worst_eig, tu::multiset_distance(tu::eigenvalues(m.A()), tu::eigenvalues(A)));
    }
    const auto sweep = rank_sweep(y, 4, IdMethod::subspace);
    double worst_rise = 0.0;
    for (std::size_t i = 1; i < sweep.size(); ++i) worst_rise = std::max(worst_rise, sweep[i].rmse - sweep[i - 1].rmse);
    Outcome o;
    o.pass = worst_eig <= 1e-6 && worst_rise <= 1e-8;
    o.detail = fmt("eigenvalue error %.2e, sweep rmse %.3g %.3g %.3g %.3g (largest rise %.1e)", worst_eig,
                   sweep[0].rmse, sweep[1].rmse, sweep[2].rmse, sweep[3].rmse, worst_rise);
    return o;
}

// 6 -------------------------------------------------------------------------
Outcome cusum() {
    CusumConfig cfg; // alpha = beta = 1e-4, delta = 1
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(3.0, 2.0);
    std::vector<double> calib(cfg.calibration_start + cfg.calibration_len);
    for (double& v : calib) v = g(rng);
    const CusumState base = calibrate(calib, cfg);

    CusumState st = base;
    int delay = -1;
    for (int i = 1; i <= 1000 && delay < 0; ++i)
        if (cusum_update(st, base.mu0 + base.sigma).flagged) delay = i;

    st = base;
    long null_flags = 0;
    for (int i = 0; i < 1000000; ++i) null_flags += cusum_update(st, base.mu0).flagged;

    st = base;
    long noisy_flags = 0;
    std::normal_distribution<double> h0(base.mu0, base.sigma);
    for (int i = 0; i < 1000000; ++i) noisy_flags += cusum_update(st, h0(rng)).flagged;
    const double rate = static_cast<double>(noisy_flags) / 1e6;

    Outcome o;
    o.pass = delay >= 1 && delay <= 25 && null_flags == 0 && rate <= 10.0 * cfg.alpha;
    o.detail = fmt("+1 sigma delay %d samples, %ld flags on noise-free null, false-alarm rate %.2e (<= %.0e)",
                   delay, null_flags, rate, 10.0 * cfg.alpha);
    return o;
}

// 7 -------------------------------------------------------------------------
Outcome metrics() {
    auto L = [](std::vector<Interval> v) { return LabelSet(std::move(v), LabelClass::other); };
    using V = std::vector<Interval>;
    const bool prec = interval_precision(L({{0, 10}}), V{{0, 10}}) == 1.0 &&
                      interval_precision(L({{0, 10}}), V{{5, 15}}) == 0.5 &&
                      interval_precision(L({{0, 4}, {10, 14}}), V{{0, 14}}) == 8.0 / 14.0;
    const bool rec = interval_recall(L({{0, 10}}), V{{0, 10}}) == 1.0 &&
                     interval_recall(L({{0, 10}}), V{{5, 15}}) == 0.5 &&
                     interval_recall(L({{0, 4}, {10, 14}}), V{{0, 14}}) == 1.0;
    const DelayStats z = delay_stats({{{0, 10}, {0, 10}}}, 200.0);
    const DelayStats one = delay_stats({{{100, 200}, {98, 204}}}, 200.0);
    const DelayStats two = delay_stats({{{100, 200}, {98, 200}}, {{300, 400}, {302, 400}}}, 200.0);
    const double err = std::max({std::abs(z.mean_a), std::abs(z.std_a), std::abs(z.mean_b), std::abs(z.std_b),
                                 std::abs(one.mean_a - 0.01), std::abs(one.mean_b + 0.02), std::abs(two.mean_a),
                                 std::abs(two.std_a - 0.01 * std::sqrt(2.0))});
    Outcome o;
    o.pass = prec && rec && err <= 1e-12;
    o.detail = fmt("precision examples %s, recall examples %s, delay moment error %.1e", prec ? "exact" : "WRONG",
                   rec ? "exact" : "WRONG", err);
    return o;
}

// 8 -------------------------------------------------------------------------
Outcome transfer(const LearnedBench& lb) {
    std::vector<SubjectModel> models;
    std::vector<SubjectData> data;
    for (std::size_t i = 0; i < lb.bench.size(); ++i) {
        models.push_back({lb.learned[i].model, lb.learned[i].design});
        data.push_back({lb.bench[i].test, lb.bench[i].pattern_labels, lb.bench[i].other_labels});
    }
    TransferConfig tc;
    tc.detection = DetectionConfig::for_rate(200.0);
    tc.observed_pattern = lb.bench.front().truth.D;
    const TransferGrid g = transfer_grid(models, data, tc);
    const auto S = static_cast<double>(models.size());
    double diag = 0.0, off = 0.0, avg = 0.0;
    for (std::size_t i = 0; i < models.size(); ++i) {
        for (std::size_t j = 0; j < models.size(); ++j) (i == j ? diag : off) += g.cells[i][j].recall;
        avg += g.averaged[i].recall;
    }
    diag /= S;
    off /= S * (S - 1.0);
    avg /= S;
    Outcome o;
    o.pass = models.size() >= 3 && diag > off && avg >= off && avg <= diag;
    o.detail = fmt("%zu subjects: diagonal %.3f, off-diagonal %.3f, averaged %.3f", models.size(), diag, off, avg);
    return o;
}

// 9 -------------------------------------------------------------------------
Outcome period_expansion() {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-3.0, 4.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double T = std::pow(10.0, u(rng));
        const auto c = PeriodExpansion::from_period(T);
        const double scale = std::max({std::abs(c.alpha), std::abs(c.beta), std::abs(c.gamma), 1e-300});
        worst = std::max(worst, std::abs(c.alpha + c.beta + c.gamma) / scale);
    }
    return {worst <= 1e-9, fmt("1000 periods, worst relative |alpha+beta+gamma| %.2e", worst)};
}

Outcome guarded(const std::function<Outcome()>& f) {
    try {
        return f();
    } catch (const std::exception& e) {
        return {false, std::string("exception: ") + e.what()};
    }
}

} // namespace

int main() {
    const std::vector<std::uint64_t> seeds{7, 8, 9};
    std::vector<LearnedBench> runs;
    std::string bench_error;
    try {
        for (auto s : seeds) runs.push_back(learn_bench(s));
    } catch (const std::exception& e) {
        bench_error = e.what();
    }
    auto bench_guard = [&](const std::function<Outcome()>& f) {
        if (!bench_error.empty()) return Outcome{false, "bench setup failed: " + bench_error};
        return guarded(f);
    };

    const std::vector<std::pair<const char*, Outcome>> results{
        {"golden 2x2 design", guarded(golden_example)},
        {"decoupling suppression", guarded(decoupling_suppression)},
        {"two-tap equivalence", bench_guard([&] { return two_tap_equivalence(runs); })},
        {"end-to-end selectivity", bench_guard([&] { return selectivity(runs, seeds); })},
        {"identification", guarded(identification)},
        {"cusum", guarded(cusum)},
        {"interval metrics", guarded(metrics)},
        {"transfer trend", bench_guard([&] { return transfer(runs.front()); })},
        {"period expansion", guarded(period_expansion)},
    };
    int failed = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& [name, o] = results[i];
        std::printf("criterion %zu %-24s %s  %s\n", i + 1, name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        failed += !o.pass;
    }
    std::printf("%zu/%zu criteria passed\n", results.size() - static_cast<std::size_t>(failed), results.size());
    return failed == 0 ? 0 : 1;
}
