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
 * @file residual.hpp
 * @brief Residual generators that are blind to a known disturbance pattern.
 *
 * An observer with feedback gain F and output weighting W,
 *
 *     xh(t+1) = (A - F C) xh(t) + F y(t)
 *     e(t)    = y(t) - C xh(t)
 *     r(t)    = W e(t),
 *
 * has latent error dynamics eps(t+1) = A_f eps(t) + P z(t), r = C_f eps with
 * A_f = A - F C and C_f = W C. The transfer gain C_f (zI - A_f)^-1 P from the
 * pattern signal z to r vanishes whenever
 *
 *     C_f P = 0   and   (C_f A_f = 0  or  A_f P = 0).
 *
 * W is taken from the left null space of C P. F is then chosen either so the
 * rows of W C are left eigenvectors of A_f for eigenvalue 0 ("left" design) or
 * so the columns of P are right eigenvectors of A_f for eigenvalue 0 ("right"
 * design). With the left design the residual only depends on the last two
 * observations: r(t) = W y(t) - C_f F y(t-1).
 */

#pragma once

#include "osad/error.hpp"
#include "osad/linalg.hpp"
#include "osad/model.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

namespace osad {

/// Tolerance (max-abs norm) for all decoupling identities.
inline constexpr double kDecouplingTol = 1e-9;

/// Coefficients of the quadratic approximation z^T ~ 1 + alpha + beta z + gamma z^2.
struct PeriodExpansion {
    double period = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;

    static PeriodExpansion from_period(double T) {
        detail::require(T > 0.0 && std::isfinite(T), "period must be positive and finite");
        return {T, 0.5 * T * (T - 3.0), 0.5 * T * (T - 1.0), -T * (T - 2.0)};
    }
};

enum class FeedbackKind { left, right };

inline std::string to_string(FeedbackKind k) { return k == FeedbackKind::left ? "left" : "right"; }

inline FeedbackKind parse_feedback_kind(std::string_view s) {
    if (s == "left") return FeedbackKind::left;
    if (s == "right") return FeedbackKind::right;
    throw ValidationError("unknown feedback kind '" + std::string(s) + "'");
}

/// Order in which the two feedback designs are attempted.
enum class FeedbackOrder { left_first, right_first, left_only, right_only };

inline FeedbackOrder parse_feedback_order(std::string_view s) {
    if (s == "left_first") return FeedbackOrder::left_first;
    if (s == "right_first") return FeedbackOrder::right_first;
    if (s == "left_only") return FeedbackOrder::left_only;
    if (s == "right_only") return FeedbackOrder::right_only;
    throw ValidationError("unknown feedback order '" + std::string(s) + "'");
}

inline std::string to_string(FeedbackOrder o) {
    switch (o) {
    case FeedbackOrder::left_first: return "left_first";
    case FeedbackOrder::right_first: return "right_first";
    case FeedbackOrder::left_only: return "left_only";
    case FeedbackOrder::right_only: return "right_only";
    }
    return "left_first";
}

struct ResidualDesign {
    Matrix P;         // n x k pattern the design is blind to
    Matrix W;         // p x m
    Matrix F;         // n x m
    Matrix A_f;       // A - F C
    Matrix C_f;       // W C
    Matrix minus_CfF; // -C_f F, second tap of the online filter
    FeedbackKind kind = FeedbackKind::left;

    Eigen::Index p() const noexcept { return W.rows(); }

    static ResidualDesign assemble(const LdsModel& model, Matrix P, Matrix W, Matrix F, FeedbackKind kind) {
        detail::require(W.cols() == model.m(), "W must have m columns");
        detail::require(W.rows() >= 1 && W.rows() <= model.m(), "residual dimension must be in [1, m]");
        detail::require(F.rows() == model.n() && F.cols() == model.m(), "F must be n x m");
        detail::require(P.rows() == model.n(), "P must have n rows");
        ResidualDesign d;
        d.A_f = model.A() - F * model.C();
        d.C_f = W * model.C();
        d.minus_CfF = -(d.C_f * F);
        d.P = std::move(P);
        d.W = std::move(W);
        d.F = std::move(F);
        d.kind = kind;
        detail::require(d.A_f.allFinite() && d.C_f.allFinite() && d.minus_CfF.allFinite(),
                        "design contains non-finite entries");
        return d;
    }
};

struct DecouplingReport {
    double cfp_norm = 0.0;  // ||C_f P||_max
    double cfaf_norm = 0.0; // ||C_f A_f||_max
    double afp_norm = 0.0;  // ||A_f P||_max
    double tol = kDecouplingTol;
    bool pass = false;
};

struct RankCheck {
    Eigen::Index rank_p = 0;
    Eigen::Index rank_c = 0;
    bool pass = false;
};

/// rank(P) <= rank(C), ranks taken at 1e-9 * sigma_max.
inline RankCheck check_rank_constraint(const Matrix& P, const Matrix& C) {
    RankCheck rc;
    rc.rank_p = numerical_rank(P, kRankTol);
    rc.rank_c = numerical_rank(C, kRankTol);
    rc.pass = rc.rank_p <= rc.rank_c;
    return rc;
}

/// Orthonormal rows spanning (part of) the left null space of C P.
///
/// `p` is the number of rows; 0 selects the full null-space dimension
/// m - rank(C P). Throws InfeasibleError when the null space is too small.
inline Matrix design_w(const Matrix& C, const Matrix& P, Eigen::Index p = 0) {
    detail::require(C.cols() == P.rows(), "C and P are not conformable");
    const Matrix CP = C * P;
    const Eigen::Index m = C.rows();
    const Eigen::Index rank_cp = numerical_rank(CP, kRankTol);
    const Eigen::Index room = m - rank_cp;
    if (room < 1) {
        throw InfeasibleError("rank(C P) = " + std::to_string(rank_cp) + " leaves no left null space in " +
                              std::to_string(m) + " observations; rank(P) <= rank(C) is required and the "
                              "pattern must not span every observed direction");
    }
    if (p == 0) p = room;
    detail::require(p >= 1, "residual dimension must be >= 1");
    if (p > room) {
        throw InfeasibleError("residual dimension " + std::to_string(p) + " exceeds the left null space "
                              "dimension " + std::to_string(room) + " of C P");
    }
    return left_null_space(CP, kRankTol).topRows(p);
}

/// Rescales each row so its smallest non-negligible entry has magnitude 1 and
/// rounds entries that are then within 1e-9 of an integer. Row directions are
/// unchanged, so the decoupling identities still hold.
inline Matrix integer_scaled(const Matrix& W) {
    Matrix out = W;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double big = out.row(i).cwiseAbs().maxCoeff();
        if (big == 0.0) continue;
        double small = big;
        for (Eigen::Index j = 0; j < out.cols(); ++j) {
            const double a = std::abs(out(i, j));
            if (a > 1e-12 * big && a < small) small = a;
        }
        out.row(i) /= small;
        for (Eigen::Index j = 0; j < out.cols(); ++j) {
            const double r = std::round(out(i, j));
            if (std::abs(out(i, j) - r) < 1e-9) out(i, j) = r;
        }
    }
    return out;
}

/// Minimal-norm F with (A - F C) v_i = lambda_i v_i for every column v_i of V.
/// Solves F (C V) = A V - V diag(lambda). Throws InfeasibleError if inconsistent.
inline Matrix assign_right_eigenpairs(const Matrix& A, const Matrix& C, const Matrix& V, const Vector& lambdas,
                                      double tol = kDecouplingTol) {
    detail::require(A.rows() == A.cols() && C.cols() == A.cols() && V.rows() == A.rows(),
                    "A, C and eigenvectors are not conformable");
    detail::require(lambdas.size() == V.cols(), "one eigenvalue per eigenvector is required");
    const Matrix rhs = A * V - V * lambdas.asDiagonal();
    const Matrix F = rhs * pinv(C * V);
    const double residual = max_abs((A - F * C) * V - V * lambdas.asDiagonal());
    if (!(residual <= tol)) {
        throw InfeasibleError("right eigenpair assignment is infeasible (residual " + std::to_string(residual) +
                              "); A P is not reachable through C P");
    }
    return F;
}

/// Minimal-norm F with k_i' (A - F C) = lambda_i k_i' for every row k_i of K.
/// Solves K F C = K A - diag(lambda) K. Throws InfeasibleError if inconsistent.
inline Matrix assign_left_eigenpairs(const Matrix& A, const Matrix& C, const Matrix& K, const Vector& lambdas,
                                     double tol = kDecouplingTol) {
    detail::require(A.rows() == A.cols() && C.cols() == A.cols() && K.cols() == A.rows(),
                    "A, C and left eigenvectors are not conformable");
    detail::require(lambdas.size() == K.rows(), "one eigenvalue per eigenvector is required");
    const Matrix rhs = K * A - lambdas.asDiagonal() * K;
    const Matrix F = pinv(K) * rhs * pinv(C);
    const double residual = max_abs(K * (A - F * C) - lambdas.asDiagonal() * K);
    if (!(residual <= tol)) {
        throw InfeasibleError("left eigenpair assignment is infeasible (residual " + std::to_string(residual) +
                              "); (W C) A is not in the row space of C");
    }
    return F;
}

/// F such that (W C)(A - F C) = 0: rows of W C become left eigenvectors of A_f for eigenvalue 0.
inline Matrix design_f_left(const Matrix& A, const Matrix& C, const Matrix& W) {
    const Matrix K = W * C;
    return assign_left_eigenpairs(A, C, K, Vector::Zero(K.rows()));
}

/// F such that (A - F C) P = 0: columns of P become right eigenvectors of A_f for eigenvalue 0.
inline Matrix design_f_right(const Matrix& A, const Matrix& C, const Matrix& P) {
    return assign_right_eigenpairs(A, C, P, Vector::Zero(P.cols()));
}

/// Checks C_f P = 0 and (C_f A_f = 0 or A_f P = 0) in the max-abs norm.
inline DecouplingReport verify_decoupling(const Matrix& A, const Matrix& C, const Matrix& P, const Matrix& W,
                                          const Matrix& F, double tol = kDecouplingTol) {
    detail::require(A.rows() == A.cols() && C.cols() == A.cols() && P.rows() == A.rows(),
                    "A, C and P are not conformable");
    detail::require(W.cols() == C.rows() && F.rows() == A.rows() && F.cols() == C.rows(),
                    "W or F has the wrong shape");
    const Matrix A_f = A - F * C;
    const Matrix C_f = W * C;
    DecouplingReport rep;
    rep.tol = tol;
    rep.cfp_norm = max_abs(C_f * P);
    rep.cfaf_norm = max_abs(C_f * A_f);
    rep.afp_norm = max_abs(A_f * P);
    rep.pass = rep.cfp_norm <= tol && (rep.cfaf_norm <= tol || rep.afp_norm <= tol);
    return rep;
}

inline DecouplingReport verify_decoupling(const LdsModel& model, const ResidualDesign& d,
                                          double tol = kDecouplingTol) {
    return verify_decoupling(model.A(), model.C(), d.P, d.W, d.F, tol);
}

/// Uses the freedom left in F by the decoupling condition to shrink the
/// observer error dynamics. For a left gain, F + A_f C^+ keeps (W C) A_f = 0 and
/// leaves A_f (I - C^+ C), which is zero when C has full column rank. For a right
/// gain the added term is projected so that A_f P = 0 still holds.
inline Matrix deadbeat_completion(const Matrix& A, const Matrix& C, const Matrix& P, const Matrix& F,
                                  FeedbackKind kind) {
    const Matrix A_f = A - F * C;
    const Matrix Cp = pinv(C);
    if (kind == FeedbackKind::left) return F + A_f * Cp;
    const Matrix CP = C * P;
    const Matrix keep = Matrix::Identity(C.rows(), C.rows()) - CP * pinv(CP);
    return F + A_f * Cp * keep;
}

struct DesignOptions {
    Eigen::Index residual_dim = 0; // 0: m - rank(C P)
    FeedbackOrder order = FeedbackOrder::left_first;
    /// Replace the minimal-norm gain by its deadbeat completion whenever that
    /// does not raise the spectral radius of A - F C. The residual r is the same
    /// for both gains; only the error e and its transients change.
    bool deadbeat = true;
};

/// Full design: rank check, W from the left null space of C P, then F by the
/// requested order of left/right eigenpair assignment. The returned design
/// always passes verify_decoupling.
inline ResidualDesign design_residual(const LdsModel& model, const PatternMatrix& pattern,
                                      const DesignOptions& opt = {}) {
    detail::require(pattern.P.rows() == model.n(), "pattern rows must equal the state dimension");
    const RankCheck rc = check_rank_constraint(pattern.P, model.C());
    if (!rc.pass) {
        throw InfeasibleError("rank constraint violated: rank(P) = " + std::to_string(rc.rank_p) +
                              " > rank(C) = " + std::to_string(rc.rank_c));
    }
    Matrix W = design_w(model.C(), pattern.P, opt.residual_dim);

    auto try_left = [&]() -> std::optional<Matrix> {
        try {
            return design_f_left(model.A(), model.C(), W);
        } catch (const InfeasibleError&) {
            return std::nullopt;
        }
    };
    auto try_right = [&]() -> std::optional<Matrix> {
        try {
            return design_f_right(model.A(), model.C(), pattern.P);
        } catch (const InfeasibleError&) {
            return std::nullopt;
        }
    };

    std::optional<Matrix> F;
    FeedbackKind kind = FeedbackKind::left;
    const bool left_allowed = opt.order != FeedbackOrder::right_only;
    const bool right_allowed = opt.order != FeedbackOrder::left_only;
    const bool left_first = opt.order == FeedbackOrder::left_first || opt.order == FeedbackOrder::left_only;
    if (left_first) {
        if (left_allowed) F = try_left();
        if (!F && right_allowed) {
            F = try_right();
            kind = FeedbackKind::right;
        }
    } else {
        kind = FeedbackKind::right;
        if (right_allowed) F = try_right();
        if (!F && left_allowed) {
            F = try_left();
            kind = FeedbackKind::left;
        }
    }
    if (!F) throw InfeasibleError("no feedback gain satisfies either decoupling condition for this pattern");
    if (opt.deadbeat) {
        Matrix G = deadbeat_completion(model.A(), model.C(), pattern.P, *F, kind);
        if (spectral_radius(model.A() - G * model.C()) <= spectral_radius(model.A() - *F * model.C()))
            F = std::move(G);
    }

    ResidualDesign d = ResidualDesign::assemble(model, pattern.P, std::move(W), std::move(*F), kind);
    const DecouplingReport rep = verify_decoupling(model, d);
    if (!rep.pass) {
        throw InfeasibleError("designed residual failed decoupling verification (C_f P = " +
                              std::to_string(rep.cfp_norm) + ")");
    }
    return d;
}

/// Stateless-per-sample form r(t) = W y(t) - C_f F y(t-1); r(0) = W y(0).
/// Valid only when C_f A_f = 0.
class TwoTapFilter {
public:
    explicit TwoTapFilter(const ResidualDesign& d, double tol = kDecouplingTol)
        : W_(d.W), minus_CfF_(d.minus_CfF) {
        const double cfaf = max_abs(d.C_f * d.A_f);
        if (!(cfaf <= tol)) {
            throw InfeasibleError("two-tap residual form requires C_f A_f = 0 (got " + std::to_string(cfaf) +
                                  "); use the observer form");
        }
    }

    Vector step(const Vector& y) {
        detail::require(y.size() == W_.cols(), "observation width does not match W");
        Vector r = W_ * y;
        if (has_prev_) r.noalias() += minus_CfF_ * prev_;
        prev_ = y;
        has_prev_ = true;
        return r;
    }

    void reset() { has_prev_ = false; }

    /// Residuals for a whole record, one row per sample.
    Matrix apply(const Matrix& Y) {
        reset();
        Matrix R(Y.rows(), W_.rows());
        for (Eigen::Index t = 0; t < Y.rows(); ++t) R.row(t) = step(Y.row(t).transpose()).transpose();
        return R;
    }

    Eigen::Index p() const noexcept { return W_.rows(); }

private:
    Matrix W_;
    Matrix minus_CfF_;
    Vector prev_;
    bool has_prev_ = false;
};

inline TwoTapFilter make_online_filter(const ResidualDesign& d) { return TwoTapFilter(d); }

struct ObserverSample {
    Vector e; // y(t) - C xh(t)
    Vector r; // W e(t)
};

/// Recursive residual generator; O(n) state, one step per observation.
class ResidualObserver {
public:
    ResidualObserver(const LdsModel& model, const ResidualDesign& d, Vector xh0)
        : C_(model.C()), A_f_(d.A_f), F_(d.F), W_(d.W), xh_(std::move(xh0)) {
        detail::require(xh_.size() == model.n(), "initial state dimension does not match the model");
        detail::require(d.A_f.rows() == model.n() && d.W.cols() == model.m(),
                        "design does not match the model dimensions");
    }

    ObserverSample step(const Vector& y) {
        detail::require(y.size() == C_.rows(), "observation width does not match C");
        ObserverSample s;
        s.e = y - C_ * xh_;
        s.r = W_ * s.e;
        xh_ = A_f_ * xh_ + F_ * y;
        if (!s.e.allFinite() || !s.r.allFinite() || !xh_.allFinite()) {
            throw ValidationError("observer produced non-finite values at sample " + std::to_string(index_));
        }
        ++index_;
        return s;
    }

    const Vector& state() const noexcept { return xh_; }
    Eigen::Index index() const noexcept { return index_; }

private:
    Matrix C_;
    Matrix A_f_;
    Matrix F_;
    Matrix W_;
    Vector xh_;
    Eigen::Index index_ = 0;
};

struct ObserverOutput {
    Matrix e; // N x m
    Matrix r; // N x p
};

inline ObserverOutput run_observer(const ResidualDesign& d, const LdsModel& model, const TimeSeries& y,
                                   const Vector& xh0) {
    ResidualObserver obs(model, d, xh0);
    ObserverOutput out{Matrix(y.length(), model.m()), Matrix(y.length(), d.p())};
    for (Eigen::Index t = 0; t < y.length(); ++t) {
        ObserverSample s = obs.step(y.at(t));
        out.e.row(t) = s.e.transpose();
        out.r.row(t) = s.r.transpose();
    }
    return out;
}

/// Least-squares latent state for the first sample; a convenient observer start.
inline Vector initial_state_estimate(const LdsModel& model, const TimeSeries& y) {
    return pinv(model.C()) * y.at(0);
}

/// P = [alpha A | beta A | gamma A] from a period of T samples.
inline PatternMatrix pattern_from_period(const Matrix& A, double T) {
    detail::require(A.rows() == A.cols() && A.rows() >= 1, "A must be square");
    const PeriodExpansion c = PeriodExpansion::from_period(T);
    const Eigen::Index n = A.rows();
    Matrix P(n, 3 * n);
    P << c.alpha * A, c.beta * A, c.gamma * A;
    return PatternMatrix(std::move(P));
}

/// Best rank-k_max approximation of P (truncated SVD); shape is preserved.
inline PatternMatrix reduce_pattern_rank(const PatternMatrix& pattern, Eigen::Index k_max) {
    detail::require(k_max >= 1, "k_max must be >= 1");
    return PatternMatrix(truncate_rank(pattern.P, k_max));
}

/// Maps observation-space pattern directions D (m x k) into the latent space of
/// `model` by least squares, P = C^+ D. Exact when C has full column rank and
/// D lies in its range.
inline PatternMatrix pattern_from_observed(const LdsModel& model, const Matrix& D) {
    detail::require(D.rows() == model.m(), "observed pattern must have m rows");
    return PatternMatrix(pinv(model.C()) * D);
}

} // namespace osad
