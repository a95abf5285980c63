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

#include "osad/io.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

namespace {

using namespace osad;

template <typename F>
std::size_t parse_error_line(F&& f) {
    try {
        f();
    } catch (const ParseError& e) {
        return e.line();
    }
    ADD_FAILURE() << "expected ParseError";
    return 0;
}

TEST(TimeSeriesCsv, BitExactRoundTrip) {
    std::mt19937_64 rng(1);
    Matrix Y = tu::gaussian(50, 3, rng) * 1e3;
    Y(0, 0) = 1.0 / 3.0;
    Y(1, 1) = -5e-310; // subnormal
    const TimeSeries ts(Y, 200.0);
    const TimeSeries back = time_series_from_csv(time_series_to_csv(ts));
    ASSERT_EQ(back.samples().rows(), 50);
    EXPECT_TRUE((back.samples().array() == Y.array()).all());
    EXPECT_EQ(back.channel_names(), ts.channel_names());
}

TEST(TimeSeriesCsv, CommentsAreSkipped) {
    const std::string text = csv_comment("seed", "7") + "# note=x\nt,a,b\n0,1,2\n1,3,4\n";
    const TimeSeries ts = time_series_from_csv(text);
    EXPECT_EQ(ts.length(), 2);
    EXPECT_EQ(ts.at(1)(1), 4.0);
    EXPECT_EQ(parse_error_line([&] { time_series_from_csv("# c\nt,a\n0,1\n1,x\n"); }), 4u);
}

TEST(TimeSeriesCsv, ErrorsCarryLineNumbers) {
    EXPECT_EQ(parse_error_line([] { time_series_from_csv("x,a\n0,1\n"); }), 1u);
    EXPECT_EQ(parse_error_line([] { time_series_from_csv("t,a,b\n0,1,2\n1,2\n"); }), 3u);
    EXPECT_EQ(parse_error_line([] { time_series_from_csv("t,a\n0,1\n2,1\n"); }), 3u);
    EXPECT_EQ(parse_error_line([] { time_series_from_csv("t,a\n0,nan\n"); }), 2u);
    EXPECT_EQ(parse_error_line([] { time_series_from_csv("t,a\n"); }), 1u);
}

ResidualDesign sample_design() {
    Matrix A(2, 2), P(2, 2), W(1, 2);
    A << 0.5, 0.3, 0.3, 0.2;
    P << 1, 1, 2, 2;
    W << 2.0 / std::sqrt(5.0), -1.0 / std::sqrt(5.0);
    const LdsModel m(A, Matrix::Identity(2, 2));
    return design_residual(m, PatternMatrix(P));
}

TEST(ModelFile, BitExactRoundTripWithDesign) {
    Matrix A(2, 2);
    A << 0.5, 0.3, 0.3, 0.2;
    ModelFile f{LdsModel(A, Matrix::Identity(2, 2)), IdMethod::spectral, 2, 10, 42, sample_design()};
    const std::string text = model_file_to_string(f);
    const ModelFile g = model_file_from_string(text);
    EXPECT_EQ(g.model.A(), f.model.A());
    EXPECT_EQ(g.model.C(), f.model.C());
    EXPECT_EQ(g.method, IdMethod::spectral);
    EXPECT_EQ(g.rank, 2);
    EXPECT_EQ(g.hankel_rows, 10);
    EXPECT_EQ(g.seed, 42u);
    ASSERT_TRUE(g.design.has_value());
    EXPECT_EQ(g.design->W, f.design->W);
    EXPECT_EQ(g.design->F, f.design->F);
    EXPECT_EQ(g.design->A_f, f.design->A_f);
    EXPECT_EQ(g.design->minus_CfF, f.design->minus_CfF);
    EXPECT_EQ(g.design->kind, f.design->kind);
    EXPECT_EQ(model_file_to_string(g), text);
}

TEST(ModelFile, RandomMatricesRoundTrip) {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i) {
        ModelFile f{LdsModel(tu::gaussian(5, 5, rng) * 1e-3, tu::gaussian(6, 5, rng) * 1e5), IdMethod::subspace,
                    5, 10, 1, std::nullopt};
        const ModelFile g = model_file_from_string(model_file_to_string(f));
        EXPECT_TRUE((g.model.A().array() == f.model.A().array()).all());
        EXPECT_TRUE((g.model.C().array() == f.model.C().array()).all());
        EXPECT_FALSE(g.design.has_value());
    }
}

TEST(ModelFile, TamperingIsDetected) {
    ModelFile f{LdsModel(Matrix::Identity(2, 2) * 0.5, Matrix::Identity(2, 2)), IdMethod::subspace, 2, 10, 0,
                std::nullopt};
    std::string text = model_file_to_string(f);
    const auto pos = text.find("0.5");
    ASSERT_NE(pos, std::string::npos);
    text[pos + 2] = '6';
    try {
        model_file_from_string(text, "m.txt");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("hash"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("m.txt:"), std::string::npos);
    }
}

TEST(ModelFile, StructuralErrors) {
    EXPECT_EQ(parse_error_line([] { model_file_from_string("osad-model v2\n"); }), 1u);
    EXPECT_THROW(model_file_from_string("osad-model v1\nmethod subspace\n"), ParseError);
}

TEST(PatternFile, RoundTripAndSpace) {
    Matrix P(3, 2);
    P << 1, 2, 3, 4, 5, 6.125;
    const PatternFile f{PatternSpace::latent, P, 9};
    const PatternFile g = pattern_file_from_string(pattern_file_to_string(f));
    EXPECT_EQ(g.space, PatternSpace::latent);
    EXPECT_EQ(g.P, P);
    EXPECT_EQ(g.seed, 9u);
}

TEST(LabelsCsv, RoundTripWithComment) {
    const LabelSet pat({{10, 20}, {40, 60}}, LabelClass::pattern);
    const LabelSet oth({{25, 30}}, LabelClass::other);
    const Labels l = labels_from_csv(csv_comment("seed", "3") + labels_to_csv({pat, oth}));
    EXPECT_EQ(l.pattern.intervals, pat.intervals);
    EXPECT_EQ(l.other.intervals, oth.intervals);
}

TEST(LabelsCsv, Errors) {
    EXPECT_EQ(parse_error_line([] { labels_from_csv("class,begin,end\n"); }), 1u);
    EXPECT_EQ(parse_error_line([] { labels_from_csv("class,start,end\nother,5,5\n"); }), 2u);
    EXPECT_EQ(parse_error_line([] { labels_from_csv("# x=1\nclass,start,end\nspindle,1,5\n"); }), 3u);
}

TEST(AlertsCsv, RoundTrip) {
    const std::vector<AlertInterval> a{{{5, 60}, AlertStream::all_anomalies, 12.5},
                                       {{70, 130}, AlertStream::selective, 1.0 / 7.0}};
    const SelectiveResult r = alerts_from_csv(alerts_to_csv(a));
    ASSERT_EQ(r.all_anomalies.size(), 1u);
    ASSERT_EQ(r.selective.size(), 1u);
    EXPECT_EQ(r.selective[0].span, (Interval{70, 130}));
    EXPECT_EQ(r.selective[0].peak_stat, 1.0 / 7.0);
    EXPECT_EQ(parse_error_line([] { alerts_from_csv("stream,start,end,peak_stat\nboth,1,2,0\n"); }), 2u);
}

TEST(Files, MissingFileIsIoError) {
    EXPECT_THROW(read_file("/nonexistent/osad/file.csv"), IoError);
}

TEST(Files, WriteThenRead) {
    const auto path = std::filesystem::temp_directory_path() / "osad_io_test.txt";
    write_file(path.string(), "abc\n");
    EXPECT_EQ(read_file(path.string()), "abc\n");
    std::filesystem::remove(path);
}

} // namespace
