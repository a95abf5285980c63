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

// Run configuration for the osad tool: one JSON document, defaults below,
// overridden by --config FILE and then by --set dotted.key=value.

#pragma once

#include "osad/bench.hpp"
#include "osad/detector.hpp"
#include "osad/error.hpp"
#include "osad/io.hpp"
#include "osad/pipeline.hpp"
#include "osad/residual.hpp"
#include "osad/sysid.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace osad::cli {

using Json = nlohmann::ordered_json;

inline Json default_config() {
    const BenchConfig b;
    const CusumConfig c;
    const IdentificationConfig id;
    Json bands = Json::array();
    for (const auto& [lo, hi] : b.rhythm_bands) bands.push_back({lo, hi});
    return Json{
        {"seed", b.seed},
        {"rate_hz", b.rate_hz},
        {"bench",
         {{"subjects", b.subjects},
          {"channels", b.channels},
          {"train_seconds", b.train_seconds},
          {"test_seconds", b.test_seconds},
          {"pattern_events", b.pattern_events},
          {"other_events", b.other_events},
          {"pattern_dim", b.pattern_dim},
          {"noise_std", b.noise_std},
          {"pattern_amplitude", b.pattern_amplitude},
          {"other_amplitude", b.other_amplitude},
          {"min_event_seconds", b.min_event_seconds},
          {"max_event_seconds", b.max_event_seconds},
          {"quiet_seconds", b.quiet_seconds},
          {"spacing_seconds", b.spacing_seconds},
          {"rhythm_radius", b.rhythm_radius},
          {"background_std", b.background_std},
          {"rhythm_bands", bands}}},
        {"identification",
         {{"method", to_string(id.method)},
          {"rank", id.rank},
          {"hankel_rows", id.hankel_rows},
          {"refit_a", id.refit_a}}},
        {"pattern", {{"source", "file"}, {"file", ""}, {"period", 0.0}, {"k_max", 0}}},
        {"residual", {{"dim", 0}, {"order", to_string(FeedbackOrder::left_first)}, {"deadbeat", true}}},
        {"cusum",
         {{"alpha", c.alpha},
          {"beta", c.beta},
          {"delta", c.delta},
          {"calibration_len", c.calibration_len},
          {"calibration_start", c.calibration_start}}},
        {"merge", {{"gap_seconds", 0.1}, {"min_len_seconds", 0.25}}},
    };
}

/// Parses the right-hand side of --set: JSON when it parses, a plain string otherwise.
inline Json parse_override_value(const std::string& text) {
    Json v = Json::parse(text, nullptr, false);
    if (v.is_discarded()) return Json(text);
    return v;
}

/// Applies `a.b.c=value`. Only keys that exist in the document may be set.
inline void apply_override(Json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("--set expects key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    Json* node = &cfg;
    for (const std::string& part : osad::detail::split(key, '.')) {
        if (!node->is_object() || !node->contains(part)) throw ValidationError("unknown config key '" + key + "'");
        node = &(*node)[part];
    }
    Json value = parse_override_value(assignment.substr(eq + 1));
    if (node->is_number() && !value.is_number()) throw ValidationError("config key '" + key + "' expects a number");
    if (node->is_boolean() && !value.is_boolean()) throw ValidationError("config key '" + key + "' expects true or false");
    if (node->is_string() && !value.is_string()) value = Json(assignment.substr(eq + 1));
    *node = std::move(value);
}

inline Json load_config(const std::string& path, const std::vector<std::string>& overrides) {
    Json cfg = default_config();
    if (!path.empty()) {
        Json file = Json::parse(read_file(path), nullptr, false);
        if (file.is_discarded() || !file.is_object())
            throw ParseError(path, 1, "config file is not a JSON object");
        cfg.merge_patch(file);
    }
    for (const auto& o : overrides) apply_override(cfg, o);
    return cfg;
}

namespace key {

template <typename T>
T get(const Json& cfg, const char* section, const char* key) {
    try {
        return section ? cfg.at(section).at(key).get<T>() : cfg.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(std::string("config key '") + (section ? std::string(section) + "." : "") + key +
                              "' is missing or has the wrong type");
    }
}

} // namespace key

inline std::uint64_t seed_of(const Json& cfg) { return key::get<std::uint64_t>(cfg, nullptr, "seed"); }

inline double rate_of(const Json& cfg) {
    const double r = key::get<double>(cfg, nullptr, "rate_hz");
    osad::detail::require(r > 0.0 && std::isfinite(r), "rate_hz must be positive");
    return r;
}

inline BenchConfig bench_config(const Json& cfg) {
    BenchConfig b;
    b.seed = seed_of(cfg);
    b.rate_hz = rate_of(cfg);
    b.subjects = key::get<int>(cfg, "bench", "subjects");
    b.channels = key::get<int>(cfg, "bench", "channels");
    b.train_seconds = key::get<double>(cfg, "bench", "train_seconds");
    b.test_seconds = key::get<double>(cfg, "bench", "test_seconds");
    b.pattern_events = key::get<int>(cfg, "bench", "pattern_events");
    b.other_events = key::get<int>(cfg, "bench", "other_events");
    b.pattern_dim = key::get<int>(cfg, "bench", "pattern_dim");
    b.noise_std = key::get<double>(cfg, "bench", "noise_std");
    b.pattern_amplitude = key::get<double>(cfg, "bench", "pattern_amplitude");
    b.other_amplitude = key::get<double>(cfg, "bench", "other_amplitude");
    b.min_event_seconds = key::get<double>(cfg, "bench", "min_event_seconds");
    b.max_event_seconds = key::get<double>(cfg, "bench", "max_event_seconds");
    b.quiet_seconds = key::get<double>(cfg, "bench", "quiet_seconds");
    b.spacing_seconds = key::get<double>(cfg, "bench", "spacing_seconds");
    b.rhythm_radius = key::get<double>(cfg, "bench", "rhythm_radius");
    b.background_std = key::get<double>(cfg, "bench", "background_std");
    b.rhythm_bands = key::get<std::vector<std::pair<double, double>>>(cfg, "bench", "rhythm_bands");
    osad::detail::require(b.pattern_events >= 0 && b.other_events >= 0, "event counts must be >= 0");
    osad::detail::require(b.min_event_seconds > 0.0 && b.max_event_seconds >= b.min_event_seconds,
                          "event length range is invalid");
    return b;
}

inline IdentificationConfig identification_config(const Json& cfg) {
    IdentificationConfig id;
    id.method = parse_id_method(key::get<std::string>(cfg, "identification", "method"));
    id.rank = key::get<Eigen::Index>(cfg, "identification", "rank");
    id.hankel_rows = key::get<Eigen::Index>(cfg, "identification", "hankel_rows");
    id.refit_a = key::get<bool>(cfg, "identification", "refit_a");
    return id;
}

inline DesignOptions design_options(const Json& cfg) {
    DesignOptions o;
    o.residual_dim = key::get<Eigen::Index>(cfg, "residual", "dim");
    o.order = parse_feedback_order(key::get<std::string>(cfg, "residual", "order"));
    o.deadbeat = key::get<bool>(cfg, "residual", "deadbeat");
    osad::detail::require(o.residual_dim >= 0, "residual.dim must be >= 0");
    return o;
}

inline DetectionConfig detection_config(const Json& cfg) {
    const double rate = rate_of(cfg);
    DetectionConfig d;
    d.cusum.alpha = key::get<double>(cfg, "cusum", "alpha");
    d.cusum.beta = key::get<double>(cfg, "cusum", "beta");
    d.cusum.delta = key::get<double>(cfg, "cusum", "delta");
    d.cusum.calibration_len = key::get<std::int64_t>(cfg, "cusum", "calibration_len");
    d.cusum.calibration_start = key::get<std::int64_t>(cfg, "cusum", "calibration_start");
    d.cusum.validate();
    const double gap = key::get<double>(cfg, "merge", "gap_seconds");
    const double min_len = key::get<double>(cfg, "merge", "min_len_seconds");
    osad::detail::require(gap >= 0.0 && min_len >= 0.0, "merge settings must be >= 0");
    d.gap = static_cast<std::int64_t>(std::lround(gap * rate));
    d.min_len = static_cast<std::int64_t>(std::lround(min_len * rate));
    return d;
}

/// Pattern source from the config; `file_override` (from the command line) wins over pattern.file.
inline PatternSource pattern_source(const Json& cfg, const std::string& file_override) {
    PatternSource src;
    const std::string kind = key::get<std::string>(cfg, "pattern", "source");
    src.k_max = key::get<Eigen::Index>(cfg, "pattern", "k_max");
    if (kind == "period") {
        src.kind = PatternSource::Kind::period;
        src.period = key::get<double>(cfg, "pattern", "period");
        osad::detail::require(src.period > 0.0, "pattern.period must be > 0 for a period pattern");
        return src;
    }
    osad::detail::require(kind == "file", "pattern.source must be 'file' or 'period'");
    const std::string path =
        file_override.empty() ? key::get<std::string>(cfg, "pattern", "file") : file_override;
    osad::detail::require(!path.empty(), "no pattern file given (use --pattern or pattern.file)");
    const PatternFile pf = pattern_file_from_string(read_file(path), path);
    src.kind = pf.space == PatternSpace::observed ? PatternSource::Kind::observed_matrix
                                                  : PatternSource::Kind::latent_matrix;
    src.matrix = pf.P;
    return src;
}

} // namespace osad::cli
