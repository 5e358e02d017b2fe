#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "actrack/io.hpp"
#include "actrack/sim.hpp"
// Frozen from the first verified run of the seeded activity-model
// trajectory (greedy policy, seed 20240817, horizon 25).
#ifndef ACTRACK_GOLDEN_TRAJECTORY_HASH
#define ACTRACK_GOLDEN_TRAJECTORY_HASH 14028631885160436821ULL
#endif

#include "helpers.hpp"

using namespace actrack;

namespace {

ObservationModel separated_model(int n, double spread, double var) {
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    for (int i = 0; i < n; ++i) {
        Vector m(1);
        m << spread * i;
        means.push_back(m);
        Matrix q(1, 1);
        q << var;
        covs.push_back(q);
    }
    std::vector<ControlModel> cms;
    cms.push_back(helpers::make_control(0, means, covs));
    return ObservationModel(std::move(cms));
}

}  // namespace

TEST_CASE("map detection picks the largest mass with lowest-index ties") {
    Vector e2 = Vector::Zero(4);
    e2(2) = 1.0;
    CHECK(map_detect(e2) == 2);
    CHECK(map_detect(Vector::Constant(3, 1.0 / 3.0)) == 0);
    Vector p(3);
    p << 0.2, 0.5, 0.3;
    CHECK(map_detect(p) == 1);
}

TEST_CASE("a permutation chain forces its orbit") {
    MarkovModel mm;
    mm.P.resize(3, 3);
    mm.P << 0.0, 0.0, 1.0,
            1.0, 0.0, 0.0,
            0.0, 1.0, 0.0;  // 0 -> 1 -> 2 -> 0
    mm.pi = Vector::Zero(3);
    mm.pi(0) = 1.0;
    ObservationModel om = separated_model(3, 1.0, 1.0);
    const PolicyFn pf = make_static_policy(0, om);
    const TrajectoryRecord traj = sample_trial(mm, om, pf, 9, 5, 0);
    for (int t = 0; t < 9; ++t) CHECK(traj.steps[static_cast<std::size_t>(t)].true_state == t % 3);
}

TEST_CASE("near-noiseless observations make MAP detection essentially perfect") {
    actrack::Rng rng(7);
    // Two states, one scalar sensor: the single correction direction spans
    // the belief difference, so the filter resolves the state exactly in the
    // noiseless limit.
    MarkovModel mm2 = helpers::random_markov(2, rng);
    ObservationModel om2 = separated_model(2, 5.0, 1e-6);
    const PolicyFn pf2 = make_static_policy(0, om2);
    int hits_f = 0, total = 0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        const TrajectoryRecord traj = sample_trial(mm2, om2, pf2, 30, 11, trial);
        for (const auto& st : traj.steps) {
            hits_f += st.map_filter == st.true_state ? 1 : 0;
            ++total;
        }
    }
    CHECK(static_cast<double>(hits_f) / total > 0.999);

    // Three states through one scalar channel: the filter's single linear
    // correction per step cannot always separate the middle state (its
    // innovation vanishes there), but the exact posterior can.
    MarkovModel mm3 = helpers::random_markov(3, rng);
    ObservationModel om3 = separated_model(3, 5.0, 1e-6);
    const PolicyFn pf3 = make_static_policy(0, om3);
    int hits_o = 0;
    total = 0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        const TrajectoryRecord traj = sample_trial(mm3, om3, pf3, 30, 11, trial);
        for (const auto& st : traj.steps) {
            hits_o += st.map_oracle == st.true_state ? 1 : 0;
            ++total;
        }
    }
    CHECK(static_cast<double>(hits_o) / total > 0.999);
}

TEST_CASE("identical run configurations reproduce identical trajectories") {
    MarkovModel mm = helpers::activity_markov();
    actrack::Rng rng(13);
    ObservationModel om = helpers::random_observation_model(4, {1, 2}, rng);
    const PolicyFn pf = make_greedy_policy(om);
    const TrajectoryRecord a = sample_trial(mm, om, pf, 20, 17, 3);
    const TrajectoryRecord b = sample_trial(mm, om, pf, 20, 17, 3);
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t k = 0; k < a.steps.size(); ++k) {
        CHECK(a.steps[k].true_state == b.steps[k].true_state);
        CHECK(a.steps[k].filter.control == b.steps[k].filter.control);
        CHECK((a.steps[k].filter.observation - b.steps[k].filter.observation)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
        CHECK((a.steps[k].filter.filtered - b.steps[k].filter.filtered).cwiseAbs().maxCoeff() ==
              0.0);
    }
}

TEST_CASE("policy evaluation is invariant to the thread count") {
    MarkovModel mm = helpers::activity_markov();
    actrack::Rng rng(19);
    ObservationModel om = helpers::random_observation_model(4, {1, 2}, rng);
    const PolicyFn pf = make_greedy_policy(om);
    const EvalReport serial = evaluate_policy(pf, mm, om, 64, 15, 23, 1);
    const EvalReport threaded = evaluate_policy(pf, mm, om, 64, 15, 23, 4);
    CHECK(serial.mean_total_cost == threaded.mean_total_cost);
    CHECK(serial.accuracy == threaded.accuracy);
    CHECK(serial.mse_curve == threaded.mse_curve);
}

TEST_CASE("empirical transition frequencies converge to the chain columns") {
    MarkovModel mm = helpers::activity_markov();
    ObservationModel om = separated_model(4, 1.0, 4.0);
    const PolicyFn pf = make_static_policy(0, om);
    Matrix counts = Matrix::Zero(4, 4);
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        const TrajectoryRecord traj = sample_trial(mm, om, pf, 1000, 29, trial);
        for (std::size_t k = 0; k + 1 < traj.steps.size(); ++k)
            counts(traj.steps[k + 1].true_state, traj.steps[k].true_state) += 1.0;
    }
    for (int j = 0; j < 4; ++j) {
        const double col_total = counts.col(j).sum();
        REQUIRE(col_total > 1000.0);
        for (int i = 0; i < 4; ++i) {
            const double p = mm.P(i, j);
            const double freq = counts(i, j) / col_total;
            const double sigma = std::sqrt(std::max(p * (1.0 - p), 1e-12) / col_total);
            CHECK(std::abs(freq - p) <= 5.0 * sigma + 1e-9);
        }
    }
}

TEST_CASE("observation sample moments match the per-state Gaussians") {
    MarkovModel mm;
    mm.P = Matrix::Identity(2, 2);  // freeze the state to isolate one cell
    mm.pi = Vector::Zero(2);
    mm.pi(1) = 1.0;
    actrack::Rng rng(31);
    ObservationModel om = helpers::random_observation_model(2, {2}, rng);
    const PolicyFn pf = make_static_policy(0, om);
    const int horizon = 200;
    std::vector<Vector> ys;
    for (std::uint64_t trial = 0; trial < 200; ++trial) {
        const TrajectoryRecord traj = sample_trial(mm, om, pf, horizon, 37, trial);
        for (const auto& st : traj.steps) ys.push_back(st.filter.observation);
    }
    const auto& sg = om.at(0).states[1];
    Vector mean = Vector::Zero(2);
    for (const auto& y : ys) mean += y;
    mean /= static_cast<double>(ys.size());
    Matrix cov = Matrix::Zero(2, 2);
    for (const auto& y : ys) cov += (y - mean) * (y - mean).transpose();
    cov /= static_cast<double>(ys.size()) - 1.0;
    for (int i = 0; i < 2; ++i) {
        const double se = std::sqrt(sg.cov(i, i) / static_cast<double>(ys.size()));
        CHECK(std::abs(mean(i) - sg.mean(i)) <= 4.0 * se);
    }
    CHECK((cov - sg.cov).cwiseAbs().maxCoeff() <= 0.05 * sg.cov.cwiseAbs().maxCoeff() + 0.05);
}

TEST_CASE("a single-state chain tracks for free") {
    MarkovModel mm;
    mm.P = Matrix::Ones(1, 1);
    mm.pi = Vector::Ones(1);
    Vector m(1);
    m << 0.7;
    Matrix q(1, 1);
    q << 2.0;
    std::vector<ControlModel> cms;
    cms.push_back(helpers::make_control(0, {m}, {q}));
    ObservationModel om(std::move(cms));
    const PolicyFn pf = make_static_policy(0, om);
    const EvalReport rep = evaluate_policy(pf, mm, om, 10, 8, 3);
    CHECK(rep.mean_total_cost <= 1e-12);
    CHECK(rep.accuracy == 1.0);
}

TEST_CASE("aggregate metrics report perfect detection as accuracy one") {
    MarkovModel mm;
    mm.P = Matrix::Identity(2, 2);
    mm.pi = Vector::Zero(2);
    mm.pi(0) = 1.0;
    ObservationModel om = separated_model(2, 10.0, 1e-8);
    const PolicyFn pf = make_static_policy(0, om);
    std::vector<TrajectoryRecord> records;
    for (std::uint64_t t = 0; t < 4; ++t) records.push_back(sample_trial(mm, om, pf, 10, 41, t));
    const auto series = aggregate_metrics(records, {}, mm, om);
    REQUIRE(series.size() == 2);
    CHECK(series[0].overall_accuracy == 1.0);
    CHECK(series[1].overall_accuracy == 1.0);
}

TEST_CASE("aggregate metrics average across trials arithmetically") {
    MarkovModel mm = helpers::activity_markov();
    actrack::Rng rng(43);
    ObservationModel om = helpers::random_observation_model(4, {1}, rng);
    const PolicyFn pf = make_static_policy(0, om);
    std::vector<TrajectoryRecord> records;
    records.push_back(sample_trial(mm, om, pf, 5, 47, 0));
    records.push_back(sample_trial(mm, om, pf, 5, 47, 1));
    const auto series = aggregate_metrics(records, {}, mm, om);
    const double expected =
        0.5 * (records[0].steps[2].filter.mse_trace + records[1].steps[2].filter.mse_trace);
    CHECK(series[0].mse_mean[2] == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("oracle detection is no worse than the filter on a seeded ensemble") {
    ModelFile mf = load_model(std::string(ACTRACK_CONFIG_DIR) + "/bodysense.json");
    const PolicyFn pf = make_greedy_policy(mf.observation);
    std::vector<TrajectoryRecord> records;
    for (std::uint64_t t = 0; t < 60; ++t)
        records.push_back(sample_trial(mf.markov, mf.observation, pf, 30, 53, t));
    const auto series = aggregate_metrics(records, {}, mf.markov, mf.observation);
    const double gap = series[1].overall_accuracy - series[0].overall_accuracy;
    const double tol = 3.0 * (series[0].overall_accuracy_stderr + series[1].overall_accuracy_stderr);
    CHECK(gap >= -tol);
}

TEST_CASE("seeded activity-model trajectory is regression-pinned") {
    ModelFile mf = load_model(std::string(ACTRACK_CONFIG_DIR) + "/bodysense.json");
    const PolicyFn pf = make_greedy_policy(mf.observation);
    const TrajectoryRecord traj = sample_trial(mf.markov, mf.observation, pf, 25, 20240817, 0);
    std::ostringstream csv;
    write_trajectory_csv(csv, traj, mf.observation);
    // FNV-1a over the CSV bytes; frozen from the first verified run.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : csv.str()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    MESSAGE("trajectory csv fnv1a: ", h);
    CHECK(h == ACTRACK_GOLDEN_TRAJECTORY_HASH);
}
