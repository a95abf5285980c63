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

// osad: synthetic bench, identification, residual design, streaming detection
// and evaluation from the command line.
//
// Exit codes: 0 ok, 2 invalid input or config, 3 infeasible design, 4 I/O.

#include "run_config.hpp"

#include "osad/bench.hpp"
#include "osad/detector.hpp"
#include "osad/error.hpp"
#include "osad/eval.hpp"
#include "osad/io.hpp"
#include "osad/pipeline.hpp"
#include "osad/residual.hpp"
#include "osad/sysid.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace osad;
using cli::Json;

namespace {

enum ExitCode { kOk = 0, kUnexpected = 1, kValidation = 2, kInfeasible = 3, kIo = 4 };

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    Json load() const { return cli::load_config(config_path, overrides); }
};

std::string fixed(double v, int digits = 4) {
    if (std::isnan(v)) return "undefined";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void make_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create directory '" + p.string() + "': " + ec.message());
}

std::string seed_comment(std::uint64_t seed) { return csv_comment("seed", std::to_string(seed)); }

/// Union of several label sets as one sorted, disjoint set.
LabelSet merge_labels(const std::vector<const LabelSet*>& sets, LabelClass cls) {
    std::vector<Interval> all;
    for (const LabelSet* s : sets) all.insert(all.end(), s->intervals.begin(), s->intervals.end());
    std::sort(all.begin(), all.end(), [](const Interval& a, const Interval& b) { return a.start < b.start; });
    std::vector<Interval> out;
    for (const Interval& iv : all) {
        if (!out.empty() && iv.start <= out.back().end) {
            out.back().end = std::max(out.back().end, iv.end);
        } else {
            out.push_back(iv);
        }
    }
    return LabelSet(std::move(out), cls);
}

// ---------------------------------------------------------------------------

int cmd_config_show(const Common& common) {
    std::cout << common.load().dump(2) << "\n";
    return kOk;
}

int cmd_synth(const Common& common, const std::string& out_dir) {
    const Json cfg = common.load();
    const BenchConfig bc = cli::bench_config(cfg);
    const auto bench = make_bench(bc);
    const fs::path root(out_dir);
    make_dir(root);

    Json manifest{{"seed", bc.seed}, {"rate_hz", bc.rate_hz}, {"bench", cfg.at("bench")}, {"subjects", Json::array()}};
    for (std::size_t i = 0; i < bench.size(); ++i) {
        const SubjectBench& s = bench[i];
        const std::string name = "subject" + std::to_string(i + 1);
        const fs::path dir = root / name;
        make_dir(dir);
        write_file((dir / "train.csv").string(), seed_comment(bc.seed) + time_series_to_csv(s.train));
        write_file((dir / "test.csv").string(), seed_comment(bc.seed) + time_series_to_csv(s.test));
        write_file((dir / "labels.csv").string(),
                   seed_comment(bc.seed) + labels_to_csv({s.pattern_labels, s.other_labels}));
        ModelFile truth;
        truth.model = s.truth.model;
        truth.rank = s.truth.model.n();
        truth.seed = bc.seed;
        write_model_file((dir / "truth_model.txt").string(), truth);
        manifest["subjects"].push_back({{"name", name},
                                        {"rhythm_hz", s.truth.rhythm_hz},
                                        {"pattern_events", s.pattern_labels.intervals.size()},
                                        {"other_events", s.other_labels.intervals.size()}});
    }
    // Every subject shares the observed pattern directions.
    PatternFile pf;
    pf.space = PatternSpace::observed;
    pf.P = bench.front().truth.D;
    pf.seed = bc.seed;
    write_file((root / "pattern.txt").string(), pattern_file_to_string(pf));
    write_file((root / "bench.json").string(), manifest.dump(2) + "\n");
    std::cout << "wrote " << bench.size() << " subjects to " << root.string() << " (seed " << bc.seed << ")\n";
    return kOk;
}

int cmd_learn(const Common& common, const std::string& train_path, const std::string& out_path) {
    const Json cfg = common.load();
    const IdentificationConfig id = cli::identification_config(cfg);
    const TimeSeries train = read_time_series(train_path, cli::rate_of(cfg));
    ModelFile f;
    f.model = identify(train, id);
    f.method = id.method;
    f.rank = id.rank;
    f.hankel_rows = id.hankel_rows;
    f.seed = cli::seed_of(cfg);
    write_model_file(out_path, f);
    std::cout << "model n=" << f.model.n() << " m=" << f.model.m() << " spectral_radius="
              << fixed(f.model.spectral_radius(), 6) << " one_step_rmse=" << fixed(one_step_rmse(f.model, train), 6)
              << "\n";
    return kOk;
}

int cmd_design(const Common& common, const std::string& model_path, const std::string& pattern_path,
               const std::string& out_path, const std::string& report_path) {
    const Json cfg = common.load();
    ModelFile f = read_model_file(model_path);
    const PatternMatrix pattern = resolve_pattern(f.model, cli::pattern_source(cfg, pattern_path));
    const ResidualDesign d = design_residual(f.model, pattern, cli::design_options(cfg));
    const DecouplingReport rep = verify_decoupling(f.model, d);
    const std::string text = "seed=" + std::to_string(cli::seed_of(cfg)) + "\n" + "p=" + std::to_string(d.p()) +
                             "\n" + decoupling_report_text(rep, d.kind);
    std::cout << text;
    if (!report_path.empty()) write_file(report_path, text);
    if (!rep.pass) throw InfeasibleError("decoupling verification failed");
    f.design = d;
    f.seed = cli::seed_of(cfg);
    write_model_file(out_path, f);
    return kOk;
}

ModelFile read_designed_model(const std::string& path) {
    ModelFile f = read_model_file(path);
    if (!f.design) throw ValidationError("'" + path + "' has no residual design; run 'osad design' first");
    return f;
}

int cmd_run(const Common& common, const std::string& model_path, const std::string& input_path,
            const std::string& alerts_path, const std::string& feed_path) {
    const Json cfg = common.load();
    const std::uint64_t seed = cli::seed_of(cfg);
    const DetectionConfig det = cli::detection_config(cfg);
    const ModelFile f = read_designed_model(model_path);
    const TimeSeries y = read_time_series(input_path, cli::rate_of(cfg));
    detail::require(y.channels() == f.model.m(), "input has " + std::to_string(y.channels()) +
                                                     " channels but the model expects " +
                                                     std::to_string(f.model.m()));

    std::ostringstream feed_buf;
    const bool feed_stdout = feed_path.empty() || feed_path == "-";
    auto emit = [&](const std::string& line) {
        if (feed_stdout) {
            std::cout << line << "\n" << std::flush;
        } else {
            feed_buf << line << "\n";
        }
    };
    emit("{\"event\":\"start\",\"seed\":" + std::to_string(seed) + ",\"samples\":" + std::to_string(y.length()) +
         ",\"rate_hz\":" + format_double(y.rate_hz()) + "}");

    ResidualObserver observer(f.model, *f.design, initial_state_estimate(f.model, y));
    DetectionStream all(det, AlertStream::all_anomalies);
    DetectionStream sel(det, AlertStream::selective);
    std::vector<AlertInterval> alerts;
    auto take = [&](std::vector<AlertInterval>&& v) {
        for (auto& a : v) {
            emit(alert_event_line(a));
            alerts.push_back(a);
        }
    };
    for (Eigen::Index t = 0; t < y.length(); ++t) {
        const ObserverSample s = observer.step(y.at(t));
        take(all.push(s.e.norm()));
        take(sel.push(s.r.norm()));
    }
    take(all.finish());
    take(sel.finish());
    std::stable_sort(alerts.begin(), alerts.end(), [](const AlertInterval& a, const AlertInterval& b) {
        if (a.stream != b.stream) return a.stream == AlertStream::all_anomalies;
        return a.span.start < b.span.start;
    });
    emit("{\"event\":\"end\",\"alerts\":" + std::to_string(alerts.size()) + "}");

    write_file(alerts_path, seed_comment(seed) + alerts_to_csv(alerts));
    if (!feed_stdout) write_file(feed_path, feed_buf.str());
    return kOk;
}

std::string metrics_row(const std::string& stream, const std::string& labels, const LabelSet& set,
                        const std::vector<AlertInterval>& preds, double rate) {
    double precision = std::numeric_limits<double>::quiet_NaN();
    if (!preds.empty()) precision = interval_precision(set, preds);
    const double recall = set.intervals.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                : interval_recall(set, preds);
    std::string delays = "-        -        -        -        0";
    const auto pairs = match_intervals(set, preds);
    if (!pairs.empty()) {
        const DelayStats d = delay_stats(pairs, rate);
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-8s %-8s %-8s %-8s %zu", fixed(d.mean_a).c_str(), fixed(d.std_a).c_str(),
                      fixed(d.mean_b).c_str(), fixed(d.std_b).c_str(), d.count);
        delays = buf;
    }
    char line[320];
    std::snprintf(line, sizeof line, "%-14s %-8s %-7zu %-7zu %-10s %-10s %s\n", stream.c_str(), labels.c_str(),
                  set.intervals.size(), preds.size(), fixed(precision).c_str(), fixed(recall).c_str(),
                  delays.c_str());
    return line;
}

int cmd_eval_alerts(const Common& common, const std::string& alerts_path, const std::string& labels_path,
                    const std::string& out_path) {
    const Json cfg = common.load();
    const double rate = cli::rate_of(cfg);
    const SelectiveResult alerts = alerts_from_csv(read_file(alerts_path), alerts_path);
    const Labels labels = labels_from_csv(read_file(labels_path), labels_path);
    const LabelSet any = merge_labels({&labels.pattern, &labels.other}, LabelClass::other);

    std::string text = seed_comment(cli::seed_of(cfg));
    text += "stream         labels   n_label n_pred  precision  recall     mean_a   std_a    mean_b   std_b    pairs\n";
    text += metrics_row("all_anomalies", "any", any, alerts.all_anomalies, rate);
    text += metrics_row("selective", "other", labels.other, alerts.selective, rate);
    text += metrics_row("selective", "pattern", labels.pattern, alerts.selective, rate);
    std::cout << text;
    if (!out_path.empty()) write_file(out_path, text);
    return kOk;
}

std::vector<fs::path> subject_dirs(const fs::path& root) {
    std::vector<fs::path> dirs;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(root, ec)) {
        if (entry.is_directory() && entry.path().filename().string().rfind("subject", 0) == 0)
            dirs.push_back(entry.path());
    }
    if (ec) throw IoError("cannot list '" + root.string() + "': " + ec.message());
    std::sort(dirs.begin(), dirs.end(), [](const fs::path& a, const fs::path& b) {
        const auto num = [](const fs::path& p) { return std::stoll(p.filename().string().substr(7)); };
        return num(a) < num(b);
    });
    return dirs;
}

int cmd_eval_grid(const Common& common, const std::string& bench_dir, const std::string& out_path) {
    const Json cfg = common.load();
    const double rate = cli::rate_of(cfg);
    const fs::path root(bench_dir);
    const auto dirs = subject_dirs(root);
    detail::require(dirs.size() >= 2, "transfer grid needs at least two subject directories in '" + bench_dir + "'");
    const std::string pattern_path = (root / "pattern.txt").string();
    const PatternSource src = cli::pattern_source(cfg, pattern_path);
    const IdentificationConfig id = cli::identification_config(cfg);
    const DesignOptions opt = cli::design_options(cfg);

    std::vector<SubjectModel> models;
    std::vector<SubjectData> data;
    for (const auto& dir : dirs) {
        const TimeSeries train = read_time_series((dir / "train.csv").string(), rate);
        LearnedSubject ls = learn_and_design(train, src, id, opt);
        models.push_back({ls.model, ls.design});
        const std::string lp = (dir / "labels.csv").string();
        const Labels labels = labels_from_csv(read_file(lp), lp);
        data.push_back({read_time_series((dir / "test.csv").string(), rate), labels.pattern, labels.other});
    }
    TransferConfig tc;
    tc.detection = cli::detection_config(cfg);
    tc.design = opt;
    if (src.kind == PatternSource::Kind::observed_matrix) tc.observed_pattern = src.matrix;
    const TransferGrid grid = transfer_grid(models, data, tc);

    std::string text = seed_comment(cli::seed_of(cfg));
    text += "recall / precision of the selective stream on non-pattern labels\n";
    text += "model\\data";
    for (const auto& dir : dirs) {
        char cell[40];
        std::snprintf(cell, sizeof cell, "  %-15s", dir.filename().string().c_str());
        text += cell;
    }
    text += "\n";
    auto row = [&](const std::string& name, const std::vector<CellMetrics>& cells) {
        char head[32];
        std::snprintf(head, sizeof head, "%-10s", name.c_str());
        text += head;
        for (const auto& c : cells) text += "  " + fixed(c.recall) + " / " + fixed(c.precision);
        text += "\n";
    };
    double diag = 0.0, off = 0.0;
    for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        row(dirs[i].filename().string(), grid.cells[i]);
        for (std::size_t j = 0; j < grid.cells[i].size(); ++j) (i == j ? diag : off) += grid.cells[i][j].recall;
    }
    const double k = static_cast<double>(grid.cells.size());
    diag /= k;
    off /= k * (k - 1.0);
    text += "\nmean_recall_diagonal=" + fixed(diag) + "\nmean_recall_off_diagonal=" + fixed(off) + "\n";
    if (!grid.averaged.empty()) {
        row("averaged", grid.averaged);
        double avg = 0.0;
        for (const auto& c : grid.averaged) avg += c.recall;
        text += "mean_recall_averaged=" + fixed(avg / static_cast<double>(grid.averaged.size())) + "\n";
    }
    std::cout << text;
    if (!out_path.empty()) write_file(out_path, text);
    return kOk;
}

int cmd_report(const Common& common, const std::string& model_path, const std::string& input_path,
               const std::string& labels_path, const std::string& train_path, const std::string& out_dir,
               int bins) {
    const Json cfg = common.load();
    const std::uint64_t seed = cli::seed_of(cfg);
    const double rate = cli::rate_of(cfg);
    detail::require(bins >= 1, "--bins must be >= 1");
    const ModelFile f = read_designed_model(model_path);
    const TimeSeries y = read_time_series(input_path, rate);
    const Labels labels = labels_from_csv(read_file(labels_path), labels_path);
    const fs::path root(out_dir);
    make_dir(root);

    const ObserverOutput obs = run_observer(*f.design, f.model, y, initial_state_estimate(f.model, y));
    const Matrix lifted = lift_residual(*f.design, obs.r);

    // Scatter: per-sample error and residual norms with the label class.
    std::string scatter = seed_comment(seed) + "t,e_norm,r_norm,class\n";
    std::vector<double> diff_in, diff_out;
    for (Eigen::Index t = 0; t < y.length(); ++t) {
        const char* cls = inside_any(labels.pattern.intervals, t) ? "pattern"
                          : inside_any(labels.other.intervals, t) ? "other"
                                                                  : "none";
        scatter += std::to_string(t) + "," + format_double(obs.e.row(t).norm()) + "," +
                   format_double(obs.r.row(t).norm()) + "," + cls + "\n";
        const double d = (lifted.row(t) - obs.e.row(t)).norm();
        (inside_any(labels.pattern.intervals, t) ? diff_in : diff_out).push_back(d);
    }
    write_file((root / "scatter.csv").string(), scatter);

    // Histogram of ||r - e|| inside and outside the pattern labels, shared bins.
    double hi = 0.0;
    for (double v : diff_in) hi = std::max(hi, v);
    for (double v : diff_out) hi = std::max(hi, v);
    if (!(hi > 0.0)) hi = 1.0;
    std::vector<std::size_t> cin(static_cast<std::size_t>(bins)), cout_(static_cast<std::size_t>(bins));
    auto bin_of = [&](double v) {
        const auto b = static_cast<std::size_t>(v / hi * bins);
        return std::min(b, static_cast<std::size_t>(bins - 1));
    };
    for (double v : diff_in) ++cin[bin_of(v)];
    for (double v : diff_out) ++cout_[bin_of(v)];
    std::string hist = seed_comment(seed) + "bin_lo,bin_hi,inside_pattern,outside_pattern\n";
    for (int b = 0; b < bins; ++b) {
        hist += format_double(hi * b / bins) + "," + format_double(hi * (b + 1) / bins) + "," +
                std::to_string(cin[static_cast<std::size_t>(b)]) + "," +
                std::to_string(cout_[static_cast<std::size_t>(b)]) + "\n";
    }
    write_file((root / "suppression_hist.csv").string(), hist);

    std::string summary = "seed=" + std::to_string(seed) + "\n";
    try {
        const SuppressionReport rep = residual_suppression_report(obs.e, lifted, labels.pattern.intervals);
        summary += "median_in=" + format_double(rep.median_in) + "\nmedian_out=" + format_double(rep.median_out) +
                   "\nseparation=" + format_double(rep.separation) + "\n";
    } catch (const UndefinedMetric& e) {
        summary += std::string("suppression=undefined (") + e.what() + ")\n";
    }

    if (!train_path.empty()) {
        const IdentificationConfig id = cli::identification_config(cfg);
        const TimeSeries train = read_time_series(train_path, rate);
        std::string sweep = seed_comment(seed) + "rank,rmse\n";
        for (const RankFit& r : rank_sweep(train, id.rank, id.method, id.hankel_rows))
            sweep += std::to_string(r.rank) + "," + format_double(r.rmse) + "\n";
        write_file((root / "rank_sweep.csv").string(), sweep);
    }
    write_file((root / "summary.txt").string(), summary);
    std::cout << summary;
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"osad: pattern-blind anomaly detection on multichannel time series"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--config", common.config_path, "JSON run configuration");
    app.add_option("--set", common.overrides, "Override a config key, e.g. --set cusum.alpha=1e-3");
    app.fallthrough();

    auto* config = app.add_subcommand("config", "Configuration utilities");
    config->require_subcommand(1);
    auto* show = config->add_subcommand("show", "Print the effective configuration with all defaults");

    std::string out, train, model, pattern, report, input, alerts, feed, labels, bench;
    int bins = 40;

    auto* synth = app.add_subcommand("synth", "Write a seeded synthetic bench");
    synth->add_option("--out", out, "Output directory")->required();

    auto* learn = app.add_subcommand("learn", "Identify (A, C) from a training record");
    learn->add_option("--train", train, "Training CSV")->required();
    learn->add_option("--out", out, "Model file to write")->required();

    auto* design = app.add_subcommand("design", "Design a pattern-blind residual for a model");
    design->add_option("--model", model, "Model file")->required();
    design->add_option("--pattern", pattern, "Pattern file (overrides pattern.file)");
    design->add_option("--out", out, "Model file with design to write")->required();
    design->add_option("--report", report, "Write the decoupling report here too");

    auto* run = app.add_subcommand("run", "Stream a record through the observer and both CUSUM charts");
    run->add_option("--model", model, "Model file with design")->required();
    run->add_option("--input", input, "Input CSV")->required();
    run->add_option("--alerts", alerts, "Alert CSV to write")->required();
    run->add_option("--feed", feed, "JSON-lines live feed (default: stdout)");

    auto* eval = app.add_subcommand("eval", "Score alerts against labels, or a transfer grid over a bench");
    eval->add_option("--alerts", alerts, "Alert CSV");
    eval->add_option("--labels", labels, "Label CSV");
    eval->add_option("--bench", bench, "Bench directory for the cross-subject grid");
    eval->add_option("--out", out, "Also write the table here");

    auto* rep = app.add_subcommand("report", "Write plot-ready CSVs");
    rep->add_option("--model", model, "Model file with design")->required();
    rep->add_option("--input", input, "Input CSV")->required();
    rep->add_option("--labels", labels, "Label CSV")->required();
    rep->add_option("--train", train, "Training CSV for the rank sweep");
    rep->add_option("--out", out, "Output directory")->required();
    rep->add_option("--bins", bins, "Histogram bins");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (show->parsed()) return cmd_config_show(common);
        if (synth->parsed()) return cmd_synth(common, out);
        if (learn->parsed()) return cmd_learn(common, train, out);
        if (design->parsed()) return cmd_design(common, model, pattern, out, report);
        if (run->parsed()) return cmd_run(common, model, input, alerts, feed);
        if (eval->parsed()) {
            if (!bench.empty()) return cmd_eval_grid(common, bench, out);
            detail::require(!alerts.empty() && !labels.empty(), "eval needs --alerts and --labels, or --bench");
            return cmd_eval_alerts(common, alerts, labels, out);
        }
        if (rep->parsed()) return cmd_report(common, model, input, labels, train, out, bins);
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kInfeasible;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kIo;
    } catch (const ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kValidation;
    } catch (const UndefinedMetric& e) {
        std::cerr << "undefined metric: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUnexpected;
    }
    return kValidation;
}
