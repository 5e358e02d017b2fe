#ifndef ACTRACK_FILTER_HPP
#define ACTRACK_FILTER_HPP

#include <Eigen/Dense>
#include <Eigen/Cholesky>
#include <stdexcept>

#include "actrack/model.hpp"

namespace actrack {

/// Conditional error covariance of a belief: diag(p) - p p^T.
inline Matrix belief_covariance(const Vector& p) {
    Matrix s = (-p * p.transpose()).eval();
    s.diagonal() += p;
    return s;
}

/// tr(diag(p) - p p^T) = 1 - |p|^2 for a belief p; the per-step MSE cost.
inline double mse_trace_of(const Vector& p) { return 1.0 - p.squaredNorm(); }

/// One-step prediction p_{k|k-1} = P p_{k-1|k-1}.
inline Vector predict_belief(const Vector& prev, const MarkovModel& mm) {
    return mm.P * prev;
}

/// Predicted observation y_{k|k-1} = M(u) p_{k|k-1}.
inline Vector predict_observation(const Vector& predicted, const ControlModel& cm) {
    return cm.mean_matrix * predicted;
}

/// Memoryless feasibility transformation: clamp negatives, renormalize.
/// A zero vector maps to the uniform belief. Idempotent.
inline Vector project_to_simplex(const Vector& raw) {
    Vector q = raw.cwiseMax(0.0);
    const double s = q.sum();
    if (s > 0.0) return q / s;
    return Vector::Constant(raw.size(), 1.0 / static_cast<double>(raw.size()));
}

struct GainResult {
    Matrix gain;            // G = Sigma_pred M^T S^{-1}, n x d
    Matrix sigma_pred;      // diag(p) - p p^T
    Matrix innovation_cov;  // S = M Sigma_pred M^T + Q_tilde
    Eigen::LLT<Matrix> innovation_llt;
};

/// Filter gain for a predicted belief under one control. The innovation
/// covariance solve uses a symmetric positive definite factorization, never
/// an explicit inverse; a failed factorization is regularized once
/// (eps = 1e-10 * trace / d) before giving up.
inline GainResult gain(const Vector& predicted, const ControlModel& cm) {
    const int n = cm.n();
    const int d = cm.dim();
    if (predicted.size() != n)
        throw std::invalid_argument("gain: belief dimension mismatch");
    GainResult out;
    out.sigma_pred = belief_covariance(predicted);
    Matrix q_tilde = Matrix::Zero(d, d);
    for (int i = 0; i < n; ++i)
        q_tilde += predicted(i) * cm.states[static_cast<std::size_t>(i)].cov;
    const Matrix msig = cm.mean_matrix * out.sigma_pred;  // d x n
    out.innovation_cov = msig * cm.mean_matrix.transpose() + q_tilde;
    out.innovation_llt.compute(out.innovation_cov);
    if (out.innovation_llt.info() != Eigen::Success) {
        out.innovation_llt.compute(detail::regularize_once(out.innovation_cov));
        if (out.innovation_llt.info() != Eigen::Success)
            throw std::runtime_error("gain: innovation covariance not positive definite");
    }
    out.gain = out.innovation_llt.solve(msig).transpose();  // n x d
    return out;
}

/// Everything one measurement update produces. `filtered` is the canonical
/// belief fed forward; `raw_filtered` keeps the unprojected update for the
/// algebraic covariance identities, which hold only pre-projection.
struct FilterStep {
    int control = 0;
    Vector observation;    // y_k
    Vector predicted;      // p_{k|k-1}
    Vector predicted_obs;  // y_{k|k-1}
    Matrix gain;           // G_k
    Vector innovation;     // y_k - y_{k|k-1}
    Vector raw_filtered;   // p_{k|k-1} + G_k innovation
    Vector filtered;       // projected
    Matrix sigma_pred;     // diag(predicted) - predicted predicted^T
    Matrix sigma_filt;     // diag(filtered) - filtered filtered^T
    double mse_trace = 0.0;
};

/// Measurement update from an already-predicted belief. The first step of a
/// run passes the initial distribution directly, matching the initialization
/// Sigma = diag(pi) - pi pi^T.
inline FilterStep filter_step_from_predicted(const Vector& predicted, const Vector& y,
                                             int control_id, const ObservationModel& om) {
    const ControlModel& cm = om.at(control_id);
    if (y.size() != cm.dim())
        throw std::invalid_argument("filter_step: observation dimension mismatch");
    FilterStep st;
    st.control = control_id;
    st.observation = y;
    st.predicted = predicted;
    st.predicted_obs = predict_observation(predicted, cm);
    GainResult g = gain(predicted, cm);
    st.gain = std::move(g.gain);
    st.sigma_pred = std::move(g.sigma_pred);
    st.innovation = y - st.predicted_obs;
    st.raw_filtered = st.predicted + st.gain * st.innovation;
    st.filtered = project_to_simplex(st.raw_filtered);
    st.sigma_filt = belief_covariance(st.filtered);
    st.mse_trace = mse_trace_of(st.filtered);
    return st;
}

/// Full step: predict from the previous filtered belief, then update.
inline FilterStep filter_step(const Vector& prev, const Vector& y, int control_id,
                              const MarkovModel& mm, const ObservationModel& om) {
    return filter_step_from_predicted(predict_belief(prev, mm), y, control_id, om);
}

struct CovarianceIdentityCheck {
    double filtering = 0.0;   // update recursion vs direct form, raw belief
    double prediction = 0.0;  // prediction recursion vs direct form
};

/// Evaluates both sides of the recursive covariance identities on the raw
/// (unprojected) update, where they are exact rearrangements of the direct
/// diag(p) - p p^T forms. Returns the max absolute elementwise discrepancy
/// of each. `prev_filtered` is the belief the step was predicted from.
inline CovarianceIdentityCheck check_covariance_identities(const FilterStep& st,
                                                           const Vector& prev_filtered,
                                                           const MarkovModel& mm) {
    CovarianceIdentityCheck out;

    const Vector mu = st.raw_filtered - st.predicted;  // G_k innovation
    const Matrix cross = st.predicted * (st.gain * st.innovation).transpose();
    Matrix rhs = st.sigma_pred - (st.gain * st.innovation) * (st.gain * st.innovation).transpose()
                 - cross - cross.transpose();
    rhs.diagonal() += mu;
    const Matrix lhs = belief_covariance(st.raw_filtered);
    out.filtering = (lhs - rhs).cwiseAbs().maxCoeff();

    const Matrix sigma_prev = belief_covariance(prev_filtered);
    Matrix rhs_pred = mm.P * sigma_prev * mm.P.transpose()
                      - mm.P * Matrix(prev_filtered.asDiagonal()) * mm.P.transpose();
    rhs_pred.diagonal() += st.predicted;
    out.prediction = (st.sigma_pred - rhs_pred).cwiseAbs().maxCoeff();
    return out;
}

/// Exact Bayes posterior update from a predicted belief. If the likelihoods
/// underflow to an all-zero weight, the predicted belief is returned
/// unchanged.
inline Vector bayes_update(const Vector& predicted, const Vector& y, const ControlModel& cm) {
    const Vector r = likelihood_diag_scaled(cm, y);
    const Vector w = r.cwiseProduct(predicted);
    const double s = w.sum();
    if (s <= 0.0) return predicted;
    return w / s;
}

/// Optimal MMSE (Bayes oracle) filter step: normalize r(y,u) P p.
inline Vector bayes_filter_step(const Vector& prev, const Vector& y, int control_id,
                                const MarkovModel& mm, const ObservationModel& om) {
    return bayes_update(predict_belief(prev, mm), y, om.at(control_id));
}

/// Sufficient-statistic recursion for the controller:
/// p_{k+1|k} = P r(y,u) p_{k|k-1} / (1^T r(y,u) p_{k|k-1}).
inline Vector predicted_belief_update(const Vector& predicted, const Vector& y, int control_id,
                                      const MarkovModel& mm, const ObservationModel& om) {
    return mm.P * bayes_update(predicted, y, om.at(control_id));
}

}  // namespace actrack

#endif  // ACTRACK_FILTER_HPP
