#ifndef ACTRACK_SMOOTHER_HPP
#define ACTRACK_SMOOTHER_HPP

#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

#include "actrack/filter.hpp"
#include "actrack/model.hpp"

namespace actrack {

/// Initial joint second moment at the anchor: E{x_k x_k^T | F_k} = diag(p_{k|k}).
inline Matrix theta_init(const Vector& filtered) {
    return Matrix(filtered.asDiagonal());
}

struct ThetaStep {
    Matrix joint;  // E{x_k x_{s}^T | F_{s}} after absorbing y_s
    Matrix theta;  // Theta_{k,s+1} = joint P^T
    bool degenerate = false;
};

/// One joint-moment recursion step: Bayes-renormalize the previous Theta by
/// the likelihood diagonal of the new observation, then push through the
/// chain. A fully underflowed normalizer keeps the predicted joint
/// (equivalent to an uninformative likelihood) and flags the step.
inline ThetaStep theta_step(const Matrix& theta_prev, const Vector& y, int control_id,
                            const MarkovModel& mm, const ObservationModel& om) {
    const Vector r = likelihood_diag_scaled(om.at(control_id), y);
    ThetaStep out;
    Matrix w = theta_prev * r.asDiagonal();
    const double s = w.sum();
    if (s > 0.0) {
        out.joint = w / s;
    } else {
        out.joint = theta_prev / theta_prev.sum();
        out.degenerate = true;
    }
    out.theta = out.joint * mm.P.transpose();
    return out;
}

/// Smoother gain C_s = (Theta_{k,s} - p_{k|s-1} p_{s|s-1}^T) M^T S^{-1},
/// sharing the filter's innovation-covariance definition. At s = k it
/// collapses to the filter gain G_k.
inline Matrix smoother_gain(const Matrix& theta, const Vector& p_anchor_given_prev,
                            const Vector& p_pred, const ControlModel& cm) {
    const GainResult g = gain(p_pred, cm);
    const Matrix a = theta - p_anchor_given_prev * p_pred.transpose();
    return g.innovation_llt.solve(cm.mean_matrix * a.transpose()).transpose();
}

struct SmoothedBelief {
    int k = 0;          // anchor time
    Vector raw;         // p_{k|k} plus accumulated corrections, unprojected
    Vector projected;   // reporting form
};

namespace detail {

/// Per-anchor running state shared by all three smoothing organizations.
struct AnchorState {
    int k = 0;
    Matrix joint;  // E{x_k x_{s-1}^T | F_{s-1}} entering step s
    Vector p_raw;  // p_{k|s-1}, raw accumulation

    explicit AnchorState(int anchor, const Vector& filtered)
        : k(anchor), joint(theta_init(filtered)), p_raw(filtered) {}

    /// Absorb filter step s (s > k): add C_s (y_s - y_{s|s-1}) and advance
    /// the joint moment. `k_mat` is M^T S^{-1} of step s, shared across
    /// anchors.
    void absorb(const FilterStep& step, const Vector& r_scaled, const Matrix& k_mat,
                const Matrix& p_transpose) {
        const Matrix theta = joint * p_transpose;  // Theta_{k,s}
        const Matrix c = (theta - p_raw * step.predicted.transpose()) * k_mat;
        p_raw += c * step.innovation;
        Matrix w = theta * r_scaled.asDiagonal();
        const double s = w.sum();
        joint = (s > 0.0) ? Matrix(w / s) : Matrix(theta / theta.sum());
    }
};

/// M^T S^{-1} of one recorded step, the anchor-independent part of C_s.
inline Matrix step_correction_matrix(const FilterStep& step, const ObservationModel& om) {
    const ControlModel& cm = om.at(step.control);
    const GainResult g = gain(step.predicted, cm);
    return g.innovation_llt.solve(cm.mean_matrix).transpose();  // n x d
}

}  // namespace detail

/// Fixed-point smoother p_{k|R}: refine the estimate of the state at anchor
/// time k with observations up to R.
inline SmoothedBelief fixed_point_smooth(const std::vector<FilterStep>& steps, int k, int R,
                                         const MarkovModel& mm, const ObservationModel& om) {
    if (k < 0 || k > R || R >= static_cast<int>(steps.size()))
        throw std::invalid_argument("fixed_point_smooth: need 0 <= k <= R < steps");
    detail::AnchorState anchor(k, steps[static_cast<std::size_t>(k)].filtered);
    const Matrix pt = mm.P.transpose();
    for (int s = k + 1; s <= R; ++s) {
        const FilterStep& st = steps[static_cast<std::size_t>(s)];
        const Vector r = likelihood_diag_scaled(om.at(st.control), st.observation);
        anchor.absorb(st, r, detail::step_correction_matrix(st, om), pt);
    }
    return SmoothedBelief{k, anchor.p_raw, project_to_simplex(anchor.p_raw)};
}

/// Fixed-interval smoother: p_{k|L} for k = 0..L-1 in one forward sweep that
/// carries every anchor simultaneously and shares the per-step innovation
/// solve. Each anchor's arithmetic is exactly the fixed-point recursion, so
/// the two agree at machine precision. L = 0 returns the lone filtered
/// belief.
inline std::vector<SmoothedBelief> fixed_interval_smooth(const std::vector<FilterStep>& steps,
                                                         int L, const MarkovModel& mm,
                                                         const ObservationModel& om) {
    if (L < 0 || L >= static_cast<int>(steps.size()))
        throw std::invalid_argument("fixed_interval_smooth: L out of range");
    std::vector<detail::AnchorState> anchors;
    anchors.reserve(static_cast<std::size_t>(L) + 1);
    const Matrix pt = mm.P.transpose();
    anchors.emplace_back(0, steps[0].filtered);
    for (int s = 1; s <= L; ++s) {
        const FilterStep& st = steps[static_cast<std::size_t>(s)];
        const Vector r = likelihood_diag_scaled(om.at(st.control), st.observation);
        const Matrix k_mat = detail::step_correction_matrix(st, om);
        for (auto& a : anchors) a.absorb(st, r, k_mat, pt);
        if (s < L) anchors.emplace_back(s, st.filtered);
    }
    std::vector<SmoothedBelief> out;
    if (L == 0) {
        out.push_back(SmoothedBelief{0, steps[0].filtered, steps[0].filtered});
        return out;
    }
    out.reserve(anchors.size());
    for (const auto& a : anchors)
        out.push_back(SmoothedBelief{a.k, a.p_raw, project_to_simplex(a.p_raw)});
    return out;
}

/// Streaming fixed-lag smoother: push filter steps in order; p_{k|k+delta}
/// becomes available once step k+delta has been absorbed. Holds exactly
/// delta+1 anchor states (joint moment + running estimate each), nothing
/// else; recorded steps need not be retained by the caller.
class FixedLagSmoother {
public:
    FixedLagSmoother(int delta, const MarkovModel& mm, const ObservationModel& om)
        : delta_(delta), mm_(mm), om_(om), p_transpose_(mm.P.transpose()) {
        if (delta < 1) throw std::invalid_argument("FixedLagSmoother: delta >= 1 required");
    }

    std::optional<SmoothedBelief> push(const FilterStep& step) {
        if (next_time_ > 0) {
            const Vector r = likelihood_diag_scaled(om_.at(step.control), step.observation);
            const Matrix k_mat = detail::step_correction_matrix(step, om_);
            for (auto& a : window_) a.absorb(step, r, k_mat, p_transpose_);
        }
        window_.emplace_back(next_time_, step.filtered);
        ++next_time_;
        if (static_cast<int>(window_.size()) > delta_) {
            detail::AnchorState done = std::move(window_.front());
            window_.pop_front();
            return SmoothedBelief{done.k, done.p_raw, project_to_simplex(done.p_raw)};
        }
        return std::nullopt;
    }

    int delta() const { return delta_; }

private:
    int delta_;
    const MarkovModel& mm_;
    const ObservationModel& om_;
    Matrix p_transpose_;
    std::deque<detail::AnchorState> window_;
    int next_time_ = 0;
};

}  // namespace actrack

#endif  // ACTRACK_SMOOTHER_HPP
