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

#pragma once

#include "osad/detector.hpp"
#include "osad/eval.hpp"
#include "osad/model.hpp"
#include "osad/residual.hpp"
#include "osad/sysid.hpp"

#include <optional>

namespace osad {

/// Where the pattern comes from: a matrix (latent or observed coordinates) or a period.
struct PatternSource {
    enum class Kind { latent_matrix, observed_matrix, period } kind = Kind::observed_matrix;
    Matrix matrix;
    double period = 0.0;
    /// Rank cap for period patterns; 0 selects rank(C) - 1.
    Eigen::Index k_max = 0;
};

/// Resolves a pattern source against a learned model.
inline PatternMatrix resolve_pattern(const LdsModel& model, const PatternSource& src) {
    switch (src.kind) {
    case PatternSource::Kind::latent_matrix:
        return PatternMatrix(src.matrix);
    case PatternSource::Kind::observed_matrix:
        return pattern_from_observed(model, src.matrix);
    case PatternSource::Kind::period: {
        const PatternMatrix full = pattern_from_period(model.A(), src.period);
        Eigen::Index k = src.k_max;
        if (k == 0) k = std::max<Eigen::Index>(1, numerical_rank(model.C()) - 1);
        return reduce_pattern_rank(full, k);
    }
    }
    throw ValidationError("unknown pattern source");
}

struct LearnedSubject {
    LdsModel model;
    ResidualDesign design;
    DecouplingReport report;
};

inline LearnedSubject learn_and_design(const TimeSeries& train, const PatternSource& pattern,
                                       const IdentificationConfig& id, const DesignOptions& opt = {}) {
    LdsModel model = identify(train, id);
    ResidualDesign design = design_residual(model, resolve_pattern(model, pattern), opt);
    DecouplingReport rep = verify_decoupling(model, design);
    return {std::move(model), std::move(design), rep};
}

struct DetectionRun {
    ObserverOutput signals;
    SelectiveResult alerts;
};

/// Observer started from the least-squares state of the first sample, then both CUSUM streams.
inline DetectionRun detect(const LdsModel& model, const ResidualDesign& design, const TimeSeries& y,
                           const DetectionConfig& cfg) {
    DetectionRun run;
    run.signals = run_observer(design, model, y, initial_state_estimate(model, y));
    run.alerts = run_selective_detection(run.signals.e, run.signals.r, cfg);
    return run;
}

} // namespace osad
