#ifndef ACTRACK_SIM_HPP
#define ACTRACK_SIM_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "actrack/filter.hpp"
#include "actrack/model.hpp"
#include "actrack/parallel.hpp"
#include "actrack/policy.hpp"
#include "actrack/rng.hpp"
#include "actrack/smoother.hpp"

namespace actrack {

/// MAP detection: the state with the largest belief mass, lowest index on
/// ties.
inline int map_detect(const Vector& belief) {
    int best = 0;
    for (int i = 1; i < belief.size(); ++i)
        if (belief(i) > belief(best)) best = i;
    return best;
}

struct StepRecord {
    int true_state = 0;
    FilterStep filter;        // control, observation, beliefs, covariances
    Vector oracle_predicted;  // Bayes-rule predicted belief
    Vector oracle_filtered;   // Bayes-rule posterior
    int map_filter = 0;
    int map_oracle = 0;
};

struct TrajectoryRecord {
    std::vector<StepRecord> steps;

    std::vector<FilterStep> filter_steps() const {
        std::vector<FilterStep> out;
        out.reserve(steps.size());
        for (const auto& s : steps) out.push_back(s.filter);
        return out;
    }
};

/// Which estimator's predicted belief drives the control policy.
enum class BeliefSource { kalman, oracle };

/// One closed-loop rollout. The state path and transition draws come from
/// `rng_state`, the observation noise from `rng_obs`, and every step
/// consumes the maximum observation dimension worth of normals regardless of
/// the chosen control, so runs with different policies but the same streams
/// share the state path and the latent noise (common random numbers).
inline TrajectoryRecord sample_trajectory(const MarkovModel& mm, const ObservationModel& om,
                                          const PolicyFn& policy, int horizon, Rng rng_state,
                                          Rng rng_obs,
                                          BeliefSource source = BeliefSource::kalman) {
    int dmax = 0;
    for (const auto& cm : om.controls()) dmax = std::max(dmax, cm.dim());

    TrajectoryRecord traj;
    traj.steps.reserve(static_cast<std::size_t>(horizon));
    int x = rng_state.categorical(mm.pi);
    Vector pred_filter = mm.pi;
    Vector pred_oracle = mm.pi;
    for (int t = 0; t < horizon; ++t) {
        const Vector& policy_belief = source == BeliefSource::oracle ? pred_oracle : pred_filter;
        const int u = policy.select(t, policy_belief);
        const ControlModel& cm = om.at(u);
        const Vector z = rng_obs.normal_vector(dmax);
        const StateGaussian& sg = cm.states[static_cast<std::size_t>(x)];
        const Vector y = sg.mean + sg.chol_lower * z.head(cm.dim());

        StepRecord rec;
        rec.true_state = x;
        rec.filter = filter_step_from_predicted(pred_filter, y, u, om);
        rec.oracle_predicted = pred_oracle;
        rec.oracle_filtered = bayes_update(pred_oracle, y, cm);
        rec.map_filter = map_detect(rec.filter.filtered);
        rec.map_oracle = map_detect(rec.oracle_filtered);
        pred_filter = predict_belief(rec.filter.filtered, mm);
        pred_oracle = predict_belief(rec.oracle_filtered, mm);
        traj.steps.push_back(std::move(rec));

        x = rng_state.categorical(mm.P.col(x));
    }
    return traj;
}

/// Substream layout for trial-level parallelism: trial t owns streams
/// (2t, 2t+1), so serial and threaded runs are identical.
inline TrajectoryRecord sample_trial(const MarkovModel& mm, const ObservationModel& om,
                                     const PolicyFn& policy, int horizon, std::uint64_t seed,
                                     std::uint64_t trial,
                                     BeliefSource source = BeliefSource::kalman) {
    return sample_trajectory(mm, om, policy, horizon,
                             Rng::substream(seed, 2 * trial),
                             Rng::substream(seed, 2 * trial + 1), source);
}

/// Fixed-lag smoothed beliefs of a recorded run for each requested lag.
/// Result [j][k] is p_{k|k+delta_j} (projected), defined for
/// k < horizon - delta_j.
inline std::vector<std::vector<Vector>> smooth_lags(const std::vector<FilterStep>& steps,
                                                    const std::vector<int>& deltas,
                                                    const MarkovModel& mm,
                                                    const ObservationModel& om) {
    std::vector<std::vector<Vector>> out(deltas.size());
    for (std::size_t j = 0; j < deltas.size(); ++j) {
        FixedLagSmoother lag(deltas[j], mm, om);
        for (const auto& st : steps)
            if (auto sm = lag.push(st)) out[j].push_back(std::move(sm->projected));
    }
    return out;
}

/// Per-step and overall statistics of one estimator across an ensemble.
struct SeriesStats {
    std::string estimator;
    std::vector<double> mse_mean;
    std::vector<double> mse_stderr;
    std::vector<double> acc_mean;
    std::vector<double> acc_stderr;
    double overall_accuracy = 0.0;
    double overall_accuracy_stderr = 0.0;
    double mean_cumulative_mse = 0.0;
    double mean_cumulative_mse_stderr = 0.0;
};

namespace detail {

inline void finalize_series(SeriesStats& s, const std::vector<std::vector<double>>& mse_by_k,
                            const std::vector<std::vector<double>>& hit_by_k,
                            const std::vector<double>& cum_by_trial,
                            const std::vector<double>& acc_by_trial) {
    auto mean_stderr = [](const std::vector<double>& v, double& mean, double& se) {
        const std::size_t n = v.size();
        double sum = 0.0;
        for (double x : v) sum += x;
        mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        se = n > 1 ? std::sqrt(ss / (static_cast<double>(n) * (static_cast<double>(n) - 1.0)))
                   : 0.0;
    };
    s.mse_mean.resize(mse_by_k.size());
    s.mse_stderr.resize(mse_by_k.size());
    s.acc_mean.resize(hit_by_k.size());
    s.acc_stderr.resize(hit_by_k.size());
    for (std::size_t k = 0; k < mse_by_k.size(); ++k)
        mean_stderr(mse_by_k[k], s.mse_mean[k], s.mse_stderr[k]);
    for (std::size_t k = 0; k < hit_by_k.size(); ++k)
        mean_stderr(hit_by_k[k], s.acc_mean[k], s.acc_stderr[k]);
    mean_stderr(cum_by_trial, s.mean_cumulative_mse, s.mean_cumulative_mse_stderr);
    mean_stderr(acc_by_trial, s.overall_accuracy, s.overall_accuracy_stderr);
}

}  // namespace detail

/// Ensemble metrics for the filter, the Bayes oracle, and any fixed-lag
/// smoothers. Lag estimators only cover the steps where their lookahead
/// exists; their per-trial accuracy averages over that range.
inline std::vector<SeriesStats> aggregate_metrics(const std::vector<TrajectoryRecord>& records,
                                                  const std::vector<int>& lags,
                                                  const MarkovModel& mm,
                                                  const ObservationModel& om) {
    if (records.empty()) return {};
    const std::size_t horizon = records.front().steps.size();
    const std::size_t trials = records.size();

    struct Acc {
        std::vector<std::vector<double>> mse_by_k;
        std::vector<std::vector<double>> hit_by_k;
        std::vector<double> cum_by_trial;
        std::vector<double> acc_by_trial;
        Acc(std::size_t ks, std::size_t ts)
            : mse_by_k(ks), hit_by_k(ks) {
            cum_by_trial.reserve(ts);
            acc_by_trial.reserve(ts);
        }
    };
    Acc filt(horizon, trials);
    Acc oracle(horizon, trials);
    std::vector<Acc> lagged;
    for (int d : lags)
        lagged.emplace_back(horizon - static_cast<std::size_t>(std::min<std::size_t>(
                                          static_cast<std::size_t>(d), horizon)),
                            trials);

    for (const auto& traj : records) {
        double cum_f = 0.0, hits_f = 0.0, cum_o = 0.0, hits_o = 0.0;
        for (std::size_t k = 0; k < traj.steps.size(); ++k) {
            const StepRecord& st = traj.steps[k];
            const double mf = st.filter.mse_trace;
            const double mo = mse_trace_of(st.oracle_filtered);
            filt.mse_by_k[k].push_back(mf);
            filt.hit_by_k[k].push_back(st.map_filter == st.true_state ? 1.0 : 0.0);
            oracle.mse_by_k[k].push_back(mo);
            oracle.hit_by_k[k].push_back(st.map_oracle == st.true_state ? 1.0 : 0.0);
            cum_f += mf;
            cum_o += mo;
            hits_f += st.map_filter == st.true_state ? 1.0 : 0.0;
            hits_o += st.map_oracle == st.true_state ? 1.0 : 0.0;
        }
        filt.cum_by_trial.push_back(cum_f);
        filt.acc_by_trial.push_back(hits_f / static_cast<double>(traj.steps.size()));
        oracle.cum_by_trial.push_back(cum_o);
        oracle.acc_by_trial.push_back(hits_o / static_cast<double>(traj.steps.size()));

        if (!lags.empty()) {
            const auto steps = traj.filter_steps();
            const auto smoothed = smooth_lags(steps, lags, mm, om);
            for (std::size_t j = 0; j < lags.size(); ++j) {
                double cum = 0.0, hits = 0.0;
                for (std::size_t k = 0; k < smoothed[j].size(); ++k) {
                    const Vector& p = smoothed[j][k];
                    const double m = mse_trace_of(p);
                    lagged[j].mse_by_k[k].push_back(m);
                    lagged[j].hit_by_k[k].push_back(
                        map_detect(p) == traj.steps[k].true_state ? 1.0 : 0.0);
                    cum += m;
                    hits += map_detect(p) == traj.steps[k].true_state ? 1.0 : 0.0;
                }
                lagged[j].cum_by_trial.push_back(cum);
                lagged[j].acc_by_trial.push_back(
                    smoothed[j].empty() ? 0.0 : hits / static_cast<double>(smoothed[j].size()));
            }
        }
    }

    std::vector<SeriesStats> out;
    SeriesStats sf;
    sf.estimator = "filter";
    detail::finalize_series(sf, filt.mse_by_k, filt.hit_by_k, filt.cum_by_trial, filt.acc_by_trial);
    out.push_back(std::move(sf));
    SeriesStats so;
    so.estimator = "oracle";
    detail::finalize_series(so, oracle.mse_by_k, oracle.hit_by_k, oracle.cum_by_trial,
                            oracle.acc_by_trial);
    out.push_back(std::move(so));
    for (std::size_t j = 0; j < lags.size(); ++j) {
        SeriesStats sl;
        sl.estimator = "lag" + std::to_string(lags[j]);
        detail::finalize_series(sl, lagged[j].mse_by_k, lagged[j].hit_by_k, lagged[j].cum_by_trial,
                                lagged[j].acc_by_trial);
        out.push_back(std::move(sl));
    }
    return out;
}

/// Closed-loop policy evaluation: J = E{ sum_k tr Sigma_{k|k} } plus MAP
/// accuracy, with per-trial standard errors. Trials parallelize over
/// independent substreams; results are identical for any thread count.
struct EvalReport {
    std::string policy;
    double mean_total_cost = 0.0;
    double stderr_total_cost = 0.0;
    double accuracy = 0.0;
    double accuracy_stderr = 0.0;
    std::vector<double> mse_curve;
};

inline EvalReport evaluate_policy(const PolicyFn& policy, const MarkovModel& mm,
                                  const ObservationModel& om, int trials, int horizon,
                                  std::uint64_t seed, int threads = 1,
                                  BeliefSource source = BeliefSource::kalman) {
    std::vector<double> cost(static_cast<std::size_t>(trials), 0.0);
    std::vector<double> acc(static_cast<std::size_t>(trials), 0.0);
    std::vector<std::vector<double>> curves(static_cast<std::size_t>(trials));
    parallel_for(trials, threads, [&](int t) {
        const TrajectoryRecord traj =
            sample_trial(mm, om, policy, horizon, seed, static_cast<std::uint64_t>(t), source);
        double c = 0.0, hits = 0.0;
        auto& curve = curves[static_cast<std::size_t>(t)];
        curve.reserve(traj.steps.size());
        for (const auto& st : traj.steps) {
            c += st.filter.mse_trace;
            curve.push_back(st.filter.mse_trace);
            hits += st.map_filter == st.true_state ? 1.0 : 0.0;
        }
        cost[static_cast<std::size_t>(t)] = c;
        acc[static_cast<std::size_t>(t)] = hits / static_cast<double>(horizon);
    });
    EvalReport rep;
    rep.policy = policy.name;
    double sum = 0.0, asum = 0.0;
    for (int t = 0; t < trials; ++t) {
        sum += cost[static_cast<std::size_t>(t)];
        asum += acc[static_cast<std::size_t>(t)];
    }
    rep.mean_total_cost = sum / trials;
    rep.accuracy = asum / trials;
    double ss = 0.0, as = 0.0;
    for (int t = 0; t < trials; ++t) {
        ss += (cost[static_cast<std::size_t>(t)] - rep.mean_total_cost) *
              (cost[static_cast<std::size_t>(t)] - rep.mean_total_cost);
        as += (acc[static_cast<std::size_t>(t)] - rep.accuracy) *
              (acc[static_cast<std::size_t>(t)] - rep.accuracy);
    }
    if (trials > 1) {
        rep.stderr_total_cost = std::sqrt(ss / (static_cast<double>(trials) * (trials - 1.0)));
        rep.accuracy_stderr = std::sqrt(as / (static_cast<double>(trials) * (trials - 1.0)));
    }
    rep.mse_curve.assign(static_cast<std::size_t>(horizon), 0.0);
    for (int t = 0; t < trials; ++t)
        for (int k = 0; k < horizon; ++k)
            rep.mse_curve[static_cast<std::size_t>(k)] +=
                curves[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] / trials;
    return rep;
}

}  // namespace actrack

#endif  // ACTRACK_SIM_HPP
