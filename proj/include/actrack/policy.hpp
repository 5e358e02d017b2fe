#ifndef ACTRACK_POLICY_HPP
#define ACTRACK_POLICY_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "actrack/filter.hpp"
#include "actrack/grid.hpp"
#include "actrack/model.hpp"
#include "actrack/parallel.hpp"
#include "actrack/rng.hpp"

namespace actrack {

/// Per-state immediate cost components
/// h_i = 1 - tr(G^T G Q_i) - |p + G (m_i - y_hat)|^2.
inline Vector immediate_cost_components(const Vector& predicted, const ControlModel& cm) {
    const GainResult g = gain(predicted, cm);
    const Vector y_hat = cm.mean_matrix * predicted;
    const Matrix gtg = g.gain.transpose() * g.gain;
    Vector h(cm.n());
    for (int i = 0; i < cm.n(); ++i) {
        const StateGaussian& sg = cm.states[static_cast<std::size_t>(i)];
        const double tr = gtg.cwiseProduct(sg.cov).sum();
        const Vector shifted = predicted + g.gain * (sg.mean - y_hat);
        h(i) = 1.0 - tr - shifted.squaredNorm();
    }
    return h;
}

/// Expected filtered MSE after observing under this control: p^T h(p, u).
/// Equals the mixture expectation of the raw-update trace 1 - |p + G l|^2.
inline double immediate_cost(const Vector& predicted, const ControlModel& cm) {
    return predicted.dot(immediate_cost_components(predicted, cm));
}

struct FutureCostEstimate {
    double mean = 0.0;
    double stderr = 0.0;
};

/// Monte-Carlo estimate of the expected cost-to-go after one more
/// observation under `cm`: observations are drawn from the predicted-belief
/// mixture by stratified allocation (floor + largest remainder of M p_i;
/// when the budget allows, every positive-weight component gets at least one
/// draw), the sufficient statistic advances by Bayes' rule, and the next
/// stage's value is read at the nearest grid point. Deterministic for a
/// given rng state.
inline FutureCostEstimate expected_future_cost(const Vector& predicted, const ControlModel& cm,
                                               const std::vector<double>& next_values,
                                               const BeliefGrid& grid, const MarkovModel& mm,
                                               int mc_samples, Rng rng) {
    const int n = cm.n();
    if (static_cast<int>(next_values.size()) != grid.size())
        throw std::invalid_argument("expected_future_cost: value table does not match grid");
    if (mc_samples < 1) throw std::invalid_argument("expected_future_cost: mc_samples >= 1");

    // Stratified sample allocation proportional to the mixture weights.
    std::vector<int> alloc(static_cast<std::size_t>(n), 0);
    std::vector<std::pair<double, int>> remainder;
    int assigned = 0;
    for (int i = 0; i < n; ++i) {
        const double target = mc_samples * predicted(i);
        alloc[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(target));
        assigned += alloc[static_cast<std::size_t>(i)];
        remainder.emplace_back(-(target - std::floor(target)), i);
    }
    std::sort(remainder.begin(), remainder.end());
    for (int r = 0; r < mc_samples - assigned; ++r)
        ++alloc[static_cast<std::size_t>(remainder[static_cast<std::size_t>(r)].second)];
    for (int i = 0; i < n; ++i) {
        if (predicted(i) <= 0.0 || alloc[static_cast<std::size_t>(i)] > 0) continue;
        int donor = 0;
        for (int j = 1; j < n; ++j)
            if (alloc[static_cast<std::size_t>(j)] > alloc[static_cast<std::size_t>(donor)]) donor = j;
        --alloc[static_cast<std::size_t>(donor)];
        ++alloc[static_cast<std::size_t>(i)];
    }

    double mean = 0.0;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
        const int m_i = alloc[static_cast<std::size_t>(i)];
        if (m_i == 0 || predicted(i) <= 0.0) continue;
        const StateGaussian& sg = cm.states[static_cast<std::size_t>(i)];
        double sum = 0.0;
        double sumsq = 0.0;
        for (int j = 0; j < m_i; ++j) {
            const Vector y = sg.mean + sg.chol_lower * rng.normal_vector(cm.dim());
            const Vector w = likelihood_diag_scaled(cm, y).cwiseProduct(predicted);
            const double ws = w.sum();
            const Vector next_pred = ws > 0.0 ? Vector(mm.P * (w / ws)) : Vector(mm.P * predicted);
            const double v = next_values[static_cast<std::size_t>(grid.nearest(next_pred))];
            sum += v;
            sumsq += v * v;
        }
        const double m = sum / m_i;
        mean += predicted(i) * m;
        if (m_i > 1) {
            const double s2 = (sumsq - m_i * m * m) / (m_i - 1);
            var += predicted(i) * predicted(i) * std::max(s2, 0.0) / m_i;
        }
    }
    return FutureCostEstimate{mean, std::sqrt(var)};
}

struct CostSample {
    int control = 0;
    double immediate = 0.0;
    double future = 0.0;
    double total = 0.0;
    double mc_stderr = 0.0;
};

/// Finite-horizon policy over the discretized predicted-belief simplex.
/// Stage j of the table drives the (j+1)-th observation; the final stage is
/// the terminal, immediate-cost-only minimization. Rollouts past the horizon
/// clamp to the final stage.
struct Policy {
    BeliefGrid grid;
    int horizon = 0;
    int mc_samples = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<int>> table;      // [stage][point] -> control id
    std::vector<std::vector<double>> values;  // [stage][point] -> cost-to-go

    int select(int step, const Vector& predicted) const {
        const int stage = step >= horizon ? horizon - 1 : step;
        return table[static_cast<std::size_t>(stage)][static_cast<std::size_t>(grid.nearest(predicted))];
    }
};

/// Per-point cost of every control at one stage, with common random numbers:
/// each control re-derives the same substream, so the stratified state draws
/// coincide across controls.
inline std::vector<CostSample> stage_costs(const Vector& point, const ObservationModel& om,
                                           const std::vector<double>* next_values,
                                           const BeliefGrid& grid, const MarkovModel& mm,
                                           int mc_samples, std::uint64_t seed,
                                           std::uint64_t stream_id) {
    std::vector<CostSample> out;
    out.reserve(static_cast<std::size_t>(om.num_controls()));
    for (int u = 0; u < om.num_controls(); ++u) {
        CostSample cs;
        cs.control = u;
        cs.immediate = immediate_cost(point, om.at(u));
        if (next_values != nullptr) {
            const FutureCostEstimate f = expected_future_cost(
                point, om.at(u), *next_values, grid, mm, mc_samples, Rng::substream(seed, stream_id));
            cs.future = f.mean;
            cs.mc_stderr = f.stderr;
        }
        cs.total = cs.immediate + cs.future;
        out.push_back(cs);
    }
    return out;
}

/// Backward induction over the predicted-belief grid. Ties break to the
/// lowest control id; identical seeds and inputs give bit-identical tables
/// under any thread count because every (stage, point) owns its substream.
inline Policy backward_induction(const MarkovModel& mm, const ObservationModel& om,
                                 const BeliefGrid& grid, int horizon, int mc_samples,
                                 std::uint64_t seed, int threads = 1) {
    if (horizon < 1) throw std::invalid_argument("backward_induction: horizon >= 1");
    Policy pol{grid, horizon, mc_samples, seed, {}, {}};
    pol.table.assign(static_cast<std::size_t>(horizon),
                     std::vector<int>(static_cast<std::size_t>(grid.size()), 0));
    pol.values.assign(static_cast<std::size_t>(horizon),
                      std::vector<double>(static_cast<std::size_t>(grid.size()), 0.0));
    for (int stage = horizon - 1; stage >= 0; --stage) {
        const bool terminal = stage == horizon - 1;
        const std::vector<double>* next = terminal ? nullptr
                                                   : &pol.values[static_cast<std::size_t>(stage) + 1];
        parallel_for(grid.size(), threads, [&](int pt) {
            const std::uint64_t stream_id =
                static_cast<std::uint64_t>(stage) * static_cast<std::uint64_t>(grid.size()) +
                static_cast<std::uint64_t>(pt);
            const auto costs = stage_costs(grid.point(pt), om, next, grid, mm, mc_samples,
                                           seed, stream_id);
            int best = 0;
            for (int u = 1; u < static_cast<int>(costs.size()); ++u)
                if (costs[static_cast<std::size_t>(u)].total <
                    costs[static_cast<std::size_t>(best)].total)
                    best = u;
            pol.table[static_cast<std::size_t>(stage)][static_cast<std::size_t>(pt)] = best;
            pol.values[static_cast<std::size_t>(stage)][static_cast<std::size_t>(pt)] =
                costs[static_cast<std::size_t>(best)].total;
        });
    }
    return pol;
}

/// Control selector used for rollouts. The factories below capture their
/// arguments by reference; the backing policy/model must outlive the
/// selector.
struct PolicyFn {
    std::string name;
    std::function<int(int step, const Vector& predicted)> select;
};

inline PolicyFn make_static_policy(int control_id, const ObservationModel& om) {
    if (control_id < 0 || control_id >= om.num_controls())
        throw std::invalid_argument("make_static_policy: unknown control id");
    return PolicyFn{"static:" + std::to_string(control_id),
                    [control_id](int, const Vector&) { return control_id; }};
}

/// Myopic baseline: per belief, the control with the smallest immediate
/// cost (ties to the lowest id).
inline int greedy_select(const Vector& predicted, const ObservationModel& om) {
    int best = 0;
    double best_cost = immediate_cost(predicted, om.at(0));
    for (int u = 1; u < om.num_controls(); ++u) {
        const double c = immediate_cost(predicted, om.at(u));
        if (c < best_cost) {
            best_cost = c;
            best = u;
        }
    }
    return best;
}

inline PolicyFn make_greedy_policy(const ObservationModel& om) {
    return PolicyFn{"greedy", [&om](int, const Vector& p) { return greedy_select(p, om); }};
}

inline PolicyFn make_dp_policy(const Policy& pol) {
    return PolicyFn{"dp", [&pol](int step, const Vector& p) { return pol.select(step, p); }};
}

}  // namespace actrack

#endif  // ACTRACK_POLICY_HPP
