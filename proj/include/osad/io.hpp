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
 * @file io.hpp
 * @brief Text formats: time-series CSV, labels, alerts, and the versioned
 *        model file (optionally carrying a residual design).
 *
 * Model file layout (all numbers with 17 significant digits, matrices row-major):
 *
 *     osad-model v1
 *     method subspace
 *     rank 6
 *     ...
 *     matrix A 6 6
 *     <6 rows>
 *     matrix C 6 6
 *     <6 rows>
 *     design left          (optional design section)
 *     matrix W 4 6
 *     ...
 *     hash 0123456789abcdef
 *
 * The hash is 64-bit FNV-1a over every byte before the `hash` line.
 */

#pragma once

#include "osad/detector.hpp"
#include "osad/error.hpp"
#include "osad/eval.hpp"
#include "osad/linalg.hpp"
#include "osad/model.hpp"
#include "osad/residual.hpp"
#include "osad/sysid.hpp"

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace osad {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error while reading '" + path + "'");
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("error while writing '" + path + "'");
}

namespace detail {

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = s.find(sep, pos);
        out.emplace_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

inline double parse_double(const std::string& tok, const std::string& src, std::size_t line) {
    const std::string t = trim(tok);
    if (t.empty()) throw ParseError(src, line, "empty numeric field");
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) throw ParseError(src, line, "bad number '" + t + "'");
    // ERANGE on underflow still yields the correctly rounded subnormal; only overflow is an error.
    if (errno == ERANGE && std::isinf(v)) throw ParseError(src, line, "number out of range '" + t + "'");
    return v;
}

inline std::int64_t parse_int(const std::string& tok, const std::string& src, std::size_t line) {
    const std::string t = trim(tok);
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE)
        throw ParseError(src, line, "bad integer '" + t + "'");
    return v;
}

inline std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    for (auto& l : lines)
        if (!l.empty() && l.back() == '\r') l.pop_back();
    return lines;
}

/// Index of the first line that is not a `#` comment.
inline std::size_t skip_comments(const std::vector<std::string>& lines) {
    std::size_t i = 0;
    while (i < lines.size() && !lines[i].empty() && lines[i][0] == '#') ++i;
    return i;
}

/// Writer/reader for the `key value` + `matrix NAME R C` document used by
/// model and pattern files.
class KeyedDocument {
public:
    explicit KeyedDocument(std::string kind) : kind_(std::move(kind)) { body_ = kind_ + " v1\n"; }

    void put(const std::string& key, const std::string& value) { body_ += key + " " + value + "\n"; }

    void put_matrix(const std::string& name, const Matrix& M) {
        body_ += "matrix " + name + " " + std::to_string(M.rows()) + " " + std::to_string(M.cols()) + "\n";
        for (Eigen::Index i = 0; i < M.rows(); ++i) {
            for (Eigen::Index j = 0; j < M.cols(); ++j) {
                if (j) body_ += ' ';
                body_ += format_double(M(i, j));
            }
            body_ += '\n';
        }
    }

    std::string finish() const { return body_ + "hash " + hex64(fnv1a64(body_)) + "\n"; }

    struct Parsed {
        std::vector<std::pair<std::string, std::string>> scalars; // in file order
        std::map<std::string, Matrix> matrices;
        std::vector<std::string> matrix_order;
        std::map<std::string, std::size_t> lines; // key -> line number

        const std::string* find(const std::string& key) const {
            for (const auto& kv : scalars)
                if (kv.first == key) return &kv.second;
            return nullptr;
        }
    };

    static Parsed parse(const std::string& text, const std::string& kind, const std::string& src) {
        const auto lines = lines_of(text);
        if (lines.empty() || lines[0] != kind + " v1") {
            throw ParseError(src, 1, "expected header '" + kind + " v1'");
        }
        Parsed p;
        std::size_t i = 1;
        bool hashed = false;
        while (i < lines.size()) {
            const std::string& line = lines[i];
            const std::size_t lineno = i + 1;
            if (line.empty()) {
                ++i;
                continue;
            }
            const auto sp = line.find(' ');
            const std::string key = line.substr(0, sp);
            const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
            if (key == "hash") {
                const std::size_t at = text.rfind("\nhash ");
                const std::string expected = hex64(fnv1a64(std::string_view(text).substr(0, at + 1)));
                if (trim(rest) != expected) throw ParseError(src, lineno, "content hash mismatch");
                hashed = true;
                if (i + 1 != lines.size()) throw ParseError(src, lineno + 1, "content after hash line");
                break;
            }
            if (key == "matrix") {
                const auto parts = split(rest, ' ');
                if (parts.size() != 3) throw ParseError(src, lineno, "expected 'matrix NAME ROWS COLS'");
                const auto rows = parse_int(parts[1], src, lineno);
                const auto cols = parse_int(parts[2], src, lineno);
                if (rows < 0 || cols < 0) throw ParseError(src, lineno, "negative matrix shape");
                Matrix M(rows, cols);
                ++i;
                for (std::int64_t r = 0; r < rows; ++r, ++i) {
                    if (i >= lines.size()) throw ParseError(src, i + 1, "unexpected end of matrix " + parts[0]);
                    const auto vals = split(lines[i], ' ');
                    if (static_cast<std::int64_t>(vals.size()) != cols)
                        throw ParseError(src, i + 1, "expected " + std::to_string(cols) + " values");
                    for (std::int64_t c = 0; c < cols; ++c)
                        M(r, c) = parse_double(vals[static_cast<std::size_t>(c)], src, i + 1);
                }
                if (p.matrices.count(parts[0])) throw ParseError(src, lineno, "duplicate matrix " + parts[0]);
                p.matrices.emplace(parts[0], std::move(M));
                p.matrix_order.push_back(parts[0]);
                p.lines[parts[0]] = lineno;
                continue;
            }
            p.scalars.emplace_back(key, rest);
            p.lines[key] = lineno;
            ++i;
        }
        if (!hashed) throw ParseError(src, lines.size(), "missing hash line");
        return p;
    }

private:
    std::string kind_;
    std::string body_;
};

inline const Matrix& need_matrix(const KeyedDocument::Parsed& p, const std::string& name, const std::string& src) {
    const auto it = p.matrices.find(name);
    if (it == p.matrices.end()) throw ParseError(src, 1, "missing matrix " + name);
    return it->second;
}

inline const std::string& need_scalar(const KeyedDocument::Parsed& p, const std::string& key, const std::string& src) {
    const std::string* v = p.find(key);
    if (!v) throw ParseError(src, 1, "missing field '" + key + "'");
    return *v;
}

} // namespace detail

// ---------------------------------------------------------------------------
// CSV files may start with `# key=value` comment lines (provenance such as the seed).

inline std::string csv_comment(const std::string& key, const std::string& value) {
    return "# " + key + "=" + value + "\n";
}

// ---------------------------------------------------------------------------
// Time series CSV: header `t,<ch1>,...,<chm>`, t is the sample index.

inline std::string time_series_to_csv(const TimeSeries& ts) {
    std::string out = "t";
    for (const auto& n : ts.channel_names()) out += "," + n;
    out += '\n';
    const Matrix& Y = ts.samples();
    for (Eigen::Index t = 0; t < Y.rows(); ++t) {
        out += std::to_string(t);
        for (Eigen::Index j = 0; j < Y.cols(); ++j) out += "," + format_double(Y(t, j));
        out += '\n';
    }
    return out;
}

inline TimeSeries time_series_from_csv(const std::string& text, double rate_hz = kDefaultRateHz,
                                       const std::string& src = "<csv>") {
    const auto lines = detail::lines_of(text);
    const std::size_t h = detail::skip_comments(lines);
    if (h >= lines.size()) throw ParseError(src, h + 1, "empty file");
    const auto header = detail::split(lines[h], ',');
    if (header.size() < 2 || detail::trim(header[0]) != "t")
        throw ParseError(src, h + 1, "expected header 't,<channel>,...'");
    std::vector<std::string> names;
    for (std::size_t j = 1; j < header.size(); ++j) names.push_back(detail::trim(header[j]));
    const auto m = static_cast<Eigen::Index>(names.size());
    std::vector<double> vals;
    Eigen::Index rows = 0;
    for (std::size_t i = h + 1; i < lines.size(); ++i) {
        if (detail::trim(lines[i]).empty()) continue;
        const auto f = detail::split(lines[i], ',');
        if (static_cast<Eigen::Index>(f.size()) != m + 1)
            throw ParseError(src, i + 1, "expected " + std::to_string(m + 1) + " fields");
        if (detail::parse_int(f[0], src, i + 1) != rows)
            throw ParseError(src, i + 1, "sample index out of sequence");
        for (Eigen::Index j = 0; j < m; ++j) {
            const double v = detail::parse_double(f[static_cast<std::size_t>(j + 1)], src, i + 1);
            if (!std::isfinite(v)) throw ParseError(src, i + 1, "non-finite value");
            vals.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) throw ParseError(src, lines.size(), "no samples");
    Matrix Y = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(vals.data(), rows, m);
    return TimeSeries(std::move(Y), rate_hz, std::move(names));
}

inline TimeSeries read_time_series(const std::string& path, double rate_hz = kDefaultRateHz) {
    return time_series_from_csv(read_file(path), rate_hz, path);
}

inline void write_time_series(const std::string& path, const TimeSeries& ts) {
    write_file(path, time_series_to_csv(ts));
}

// ---------------------------------------------------------------------------
// Model file

struct ModelFile {
    LdsModel model;
    IdMethod method = IdMethod::subspace;
    Eigen::Index rank = 0;
    Eigen::Index hankel_rows = 0;
    std::uint64_t seed = 0;
    std::optional<ResidualDesign> design;
};

inline std::string model_file_to_string(const ModelFile& f) {
    detail::KeyedDocument doc("osad-model");
    doc.put("method", to_string(f.method));
    doc.put("rank", std::to_string(f.rank));
    doc.put("hankel_rows", std::to_string(f.hankel_rows));
    doc.put("seed", std::to_string(f.seed));
    doc.put("n", std::to_string(f.model.n()));
    doc.put("m", std::to_string(f.model.m()));
    doc.put("spectral_radius", format_double(f.model.spectral_radius()));
    doc.put_matrix("A", f.model.A());
    doc.put_matrix("C", f.model.C());
    if (f.design) {
        const ResidualDesign& d = *f.design;
        doc.put("design", to_string(d.kind));
        doc.put("p", std::to_string(d.p()));
        doc.put_matrix("P", d.P);
        doc.put_matrix("W", d.W);
        doc.put_matrix("F", d.F);
        doc.put_matrix("A_f", d.A_f);
        doc.put_matrix("C_f", d.C_f);
        doc.put_matrix("minus_CfF", d.minus_CfF);
    }
    return doc.finish();
}

inline ModelFile model_file_from_string(const std::string& text, const std::string& src = "<model>") {
    const auto p = detail::KeyedDocument::parse(text, "osad-model", src);
    auto line_of = [&](const std::string& key) {
        const auto it = p.lines.find(key);
        return it == p.lines.end() ? std::size_t{1} : it->second;
    };
    ModelFile f;
    try {
        f.method = parse_id_method(detail::need_scalar(p, "method", src));
    } catch (const ParseError&) {
        throw;
    } catch (const ValidationError& e) {
        throw ParseError(src, line_of("method"), e.what());
    }
    f.rank = detail::parse_int(detail::need_scalar(p, "rank", src), src, line_of("rank"));
    f.hankel_rows = detail::parse_int(detail::need_scalar(p, "hankel_rows", src), src, line_of("hankel_rows"));
    f.seed = static_cast<std::uint64_t>(detail::parse_int(detail::need_scalar(p, "seed", src), src, line_of("seed")));
    const auto n = detail::parse_int(detail::need_scalar(p, "n", src), src, line_of("n"));
    const auto m = detail::parse_int(detail::need_scalar(p, "m", src), src, line_of("m"));
    const Matrix& A = detail::need_matrix(p, "A", src);
    const Matrix& C = detail::need_matrix(p, "C", src);
    if (A.rows() != n || A.cols() != n) throw ParseError(src, line_of("A"), "A shape does not match n");
    if (C.rows() != m || C.cols() != n) throw ParseError(src, line_of("C"), "C shape does not match m x n");
    f.model = LdsModel(A, C);
    if (const std::string* kind = p.find("design")) {
        FeedbackKind k;
        try {
            k = parse_feedback_kind(*kind);
        } catch (const ValidationError& e) {
            throw ParseError(src, line_of("design"), e.what());
        }
        ResidualDesign d = ResidualDesign::assemble(f.model, detail::need_matrix(p, "P", src),
                                                    detail::need_matrix(p, "W", src),
                                                    detail::need_matrix(p, "F", src), k);
        // Stored derived matrices win so that loading is bit-exact.
        d.A_f = detail::need_matrix(p, "A_f", src);
        d.C_f = detail::need_matrix(p, "C_f", src);
        d.minus_CfF = detail::need_matrix(p, "minus_CfF", src);
        f.design = std::move(d);
    }
    return f;
}

inline ModelFile read_model_file(const std::string& path) { return model_file_from_string(read_file(path), path); }

inline void write_model_file(const std::string& path, const ModelFile& f) {
    write_file(path, model_file_to_string(f));
}

// ---------------------------------------------------------------------------
// Pattern file: `osad-pattern v1`, `space observed|latent`, matrix P.

enum class PatternSpace { latent, observed };

struct PatternFile {
    PatternSpace space = PatternSpace::observed;
    Matrix P;
    std::uint64_t seed = 0;
};

inline std::string pattern_file_to_string(const PatternFile& f) {
    detail::KeyedDocument doc("osad-pattern");
    doc.put("space", f.space == PatternSpace::observed ? "observed" : "latent");
    doc.put("seed", std::to_string(f.seed));
    doc.put_matrix("P", f.P);
    return doc.finish();
}

inline PatternFile pattern_file_from_string(const std::string& text, const std::string& src = "<pattern>") {
    const auto p = detail::KeyedDocument::parse(text, "osad-pattern", src);
    PatternFile f;
    const std::string& space = detail::need_scalar(p, "space", src);
    if (space == "observed") {
        f.space = PatternSpace::observed;
    } else if (space == "latent") {
        f.space = PatternSpace::latent;
    } else {
        throw ParseError(src, p.lines.at("space"), "space must be 'observed' or 'latent'");
    }
    if (const std::string* seed = p.find("seed"))
        f.seed = static_cast<std::uint64_t>(detail::parse_int(*seed, src, p.lines.at("seed")));
    f.P = detail::need_matrix(p, "P", src);
    return f;
}

// ---------------------------------------------------------------------------
// Labels CSV `class,start,end` and alert CSV `stream,start,end,peak_stat`.

inline std::string labels_to_csv(const std::vector<LabelSet>& sets) {
    std::string out = "class,start,end\n";
    for (const auto& s : sets)
        for (const auto& iv : s.intervals)
            out += to_string(s.cls) + "," + std::to_string(iv.start) + "," + std::to_string(iv.end) + "\n";
    return out;
}

struct Labels {
    LabelSet pattern{{}, LabelClass::pattern};
    LabelSet other{{}, LabelClass::other};
};

inline Labels labels_from_csv(const std::string& text, const std::string& src = "<labels>") {
    const auto lines = detail::lines_of(text);
    const std::size_t h = detail::skip_comments(lines);
    if (h >= lines.size() || detail::trim(lines[h]) != "class,start,end")
        throw ParseError(src, h + 1, "expected header 'class,start,end'");
    std::vector<Interval> pat, oth;
    for (std::size_t i = h + 1; i < lines.size(); ++i) {
        if (detail::trim(lines[i]).empty()) continue;
        const auto f = detail::split(lines[i], ',');
        if (f.size() != 3) throw ParseError(src, i + 1, "expected 3 fields");
        const Interval iv{detail::parse_int(f[1], src, i + 1), detail::parse_int(f[2], src, i + 1)};
        if (iv.start >= iv.end) throw ParseError(src, i + 1, "interval must have start < end");
        const std::string cls = detail::trim(f[0]);
        if (cls == "pattern") {
            pat.push_back(iv);
        } else if (cls == "other") {
            oth.push_back(iv);
        } else {
            throw ParseError(src, i + 1, "unknown class '" + cls + "'");
        }
    }
    try {
        return {LabelSet(std::move(pat), LabelClass::pattern), LabelSet(std::move(oth), LabelClass::other)};
    } catch (const ValidationError& e) {
        throw ParseError(src, 1, e.what());
    }
}

inline std::string alerts_to_csv(const std::vector<AlertInterval>& alerts) {
    std::string out = "stream,start,end,peak_stat\n";
    for (const auto& a : alerts) {
        out += to_string(a.stream) + "," + std::to_string(a.span.start) + "," + std::to_string(a.span.end) + "," +
               format_double(a.peak_stat) + "\n";
    }
    return out;
}

inline SelectiveResult alerts_from_csv(const std::string& text, const std::string& src = "<alerts>") {
    const auto lines = detail::lines_of(text);
    const std::size_t h = detail::skip_comments(lines);
    if (h >= lines.size() || detail::trim(lines[h]) != "stream,start,end,peak_stat")
        throw ParseError(src, h + 1, "expected header 'stream,start,end,peak_stat'");
    SelectiveResult out;
    for (std::size_t i = h + 1; i < lines.size(); ++i) {
        if (detail::trim(lines[i]).empty()) continue;
        const auto f = detail::split(lines[i], ',');
        if (f.size() != 4) throw ParseError(src, i + 1, "expected 4 fields");
        AlertInterval a;
        try {
            a.stream = parse_alert_stream(detail::trim(f[0]));
        } catch (const ValidationError& e) {
            throw ParseError(src, i + 1, e.what());
        }
        a.span = {detail::parse_int(f[1], src, i + 1), detail::parse_int(f[2], src, i + 1)};
        if (a.span.start >= a.span.end) throw ParseError(src, i + 1, "interval must have start < end");
        a.peak_stat = detail::parse_double(f[3], src, i + 1);
        (a.stream == AlertStream::selective ? out.selective : out.all_anomalies).push_back(a);
    }
    return out;
}

/// JSON-lines record for the live alert feed.
inline std::string alert_event_line(const AlertInterval& a) {
    return "{\"event\":\"alert\",\"stream\":\"" + to_string(a.stream) + "\",\"start\":" + std::to_string(a.span.start) +
           ",\"end\":" + std::to_string(a.span.end) + ",\"peak_stat\":" + format_double(a.peak_stat) + "}";
}

/// `key=value` lines for CI assertions.
inline std::string decoupling_report_text(const DecouplingReport& r, FeedbackKind kind) {
    std::string out;
    out += "feedback=" + to_string(kind) + "\n";
    out += "cfp_norm=" + format_double(r.cfp_norm) + "\n";
    out += "cfaf_norm=" + format_double(r.cfaf_norm) + "\n";
    out += "afp_norm=" + format_double(r.afp_norm) + "\n";
    out += "tol=" + format_double(r.tol) + "\n";
    out += std::string("pass=") + (r.pass ? "true" : "false") + "\n";
    return out;
}

} // namespace osad
