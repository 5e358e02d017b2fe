#ifndef ACTRACK_TESTS_HELPERS_HPP
#define ACTRACK_TESTS_HELPERS_HPP

#include <vector>

#include "actrack/filter.hpp"
#include "actrack/model.hpp"
#include "actrack/rng.hpp"
#include "actrack/sim.hpp"

namespace helpers {

using actrack::Matrix;
using actrack::Vector;

/// The four-state transition matrix from the physical-activity experiment
/// (columns sum to one).
inline actrack::MarkovModel activity_markov() {
    actrack::MarkovModel mm;
    mm.P.resize(4, 4);
    mm.P << 0.6, 0.2, 0.0, 0.4,
            0.1, 0.4, 0.1, 0.0,
            0.0, 0.1, 0.3, 0.3,
            0.3, 0.3, 0.6, 0.3;
    mm.pi = Vector::Constant(4, 0.25);
    return mm;
}

inline actrack::MarkovModel random_markov(int n, actrack::Rng& rng) {
    actrack::MarkovModel mm;
    mm.P.resize(n, n);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            mm.P(i, j) = rng.uniform() + 0.05;
            s += mm.P(i, j);
        }
        mm.P.col(j) /= s;
    }
    mm.pi.resize(n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        mm.pi(i) = rng.uniform() + 0.05;
        s += mm.pi(i);
    }
    mm.pi /= s;
    return mm;
}

inline actrack::ControlModel make_control(int id, const std::vector<Vector>& means,
                                          const std::vector<Matrix>& covs) {
    actrack::ControlModel cm;
    const int n = static_cast<int>(means.size());
    const int d = static_cast<int>(means.front().size());
    cm.control = actrack::Control{id, "u" + std::to_string(id), d, {}};
    cm.mean_matrix.resize(d, n);
    for (int i = 0; i < n; ++i) {
        cm.mean_matrix.col(i) = means[static_cast<std::size_t>(i)];
        cm.states.emplace_back(means[static_cast<std::size_t>(i)], covs[static_cast<std::size_t>(i)]);
    }
    return cm;
}

inline actrack::ControlModel random_control(int id, int n, int d, actrack::Rng& rng,
                                            double mean_spread = 2.0) {
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    for (int i = 0; i < n; ++i) {
        means.push_back(mean_spread * rng.normal_vector(d));
        Matrix a(d, d);
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) a(r, c) = rng.normal();
        covs.push_back(a * a.transpose() + 0.5 * Matrix::Identity(d, d));
    }
    return make_control(id, means, covs);
}

inline actrack::ObservationModel random_observation_model(int n, const std::vector<int>& dims,
                                                          actrack::Rng& rng) {
    std::vector<actrack::ControlModel> cms;
    for (std::size_t u = 0; u < dims.size(); ++u)
        cms.push_back(random_control(static_cast<int>(u), n, dims[u], rng));
    return actrack::ObservationModel(std::move(cms));
}

/// Control under which every state produces the same Gaussian: carries no
/// information about the state.
inline actrack::ControlModel uninformative_control(int id, int n, int d) {
    std::vector<Vector> means(static_cast<std::size_t>(n), Vector::Zero(d));
    std::vector<Matrix> covs(static_cast<std::size_t>(n), Matrix::Identity(d, d));
    return make_control(id, means, covs);
}

/// Two-state scalar instance used across the worked examples: state means 0
/// and 2, unit observation variance.
inline actrack::ObservationModel two_state_scalar_model() {
    Vector m0(1), m1(1);
    m0 << 0.0;
    m1 << 2.0;
    Matrix q(1, 1);
    q << 1.0;
    std::vector<actrack::ControlModel> cms;
    cms.push_back(make_control(0, {m0, m1}, {q, q}));
    return actrack::ObservationModel(std::move(cms));
}

/// Runs the filter along a randomly simulated trajectory under control 0 of
/// `om` (or random controls when several exist), returning the recorded
/// steps.
inline std::vector<actrack::FilterStep> random_filter_run(const actrack::MarkovModel& mm,
                                                          const actrack::ObservationModel& om,
                                                          int horizon, actrack::Rng& rng) {
    std::vector<actrack::FilterStep> steps;
    int x = rng.categorical(mm.pi);
    Vector pred = mm.pi;
    for (int t = 0; t < horizon; ++t) {
        const int u = om.num_controls() == 1
                          ? 0
                          : static_cast<int>(rng.next_u64() %
                                             static_cast<std::uint64_t>(om.num_controls()));
        const auto& sg = om.at(u).states[static_cast<std::size_t>(x)];
        const Vector y = sg.mean + sg.chol_lower * rng.normal_vector(om.at(u).dim());
        steps.push_back(actrack::filter_step_from_predicted(pred, y, u, om));
        pred = actrack::predict_belief(steps.back().filtered, mm);
        x = rng.categorical(mm.P.col(x));
    }
    return steps;
}

}  // namespace helpers

#endif  // ACTRACK_TESTS_HELPERS_HPP
