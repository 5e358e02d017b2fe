#ifndef ACTRACK_IO_HPP
#define ACTRACK_IO_HPP

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "actrack/grid.hpp"
#include "actrack/model.hpp"
#include "actrack/policy.hpp"
#include "actrack/sim.hpp"

namespace actrack {

/// Round-trip-exact decimal formatting; CSV and JSON payloads must be
/// byte-identical across reruns of the same seed.
inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

struct ModelFile {
    MarkovModel markov;
    ObservationModel observation;
    std::vector<std::string> state_names;
    int budget = 0;
};

namespace detail {

inline Vector to_vector(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array()) throw std::runtime_error("model file: " + what + " must be an array");
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

inline Matrix to_matrix(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.empty())
        throw std::runtime_error("model file: " + what + " must be a non-empty array of rows");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (j[r].size() != cols) throw std::runtime_error("model file: ragged rows in " + what);
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
    return m;
}

}  // namespace detail

/// Model file: states, row-major column-stochastic P, pi, and either
/// sensors+budget (AR(1) construction) or explicit per-control Gaussians.
inline ModelFile load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("model file parse error: " + std::string(e.what()));
    }

    ModelFile mf;
    if (!j.contains("states") || !j.contains("P") || !j.contains("pi"))
        throw std::runtime_error("model file: states, P and pi are required");
    for (const auto& s : j["states"]) mf.state_names.push_back(s.get<std::string>());
    const int n = static_cast<int>(mf.state_names.size());
    mf.markov.P = detail::to_matrix(j["P"], "P");
    mf.markov.pi = detail::to_vector(j["pi"], "pi");
    if (mf.markov.P.rows() != n || mf.markov.P.cols() != n || mf.markov.pi.size() != n)
        throw std::runtime_error("model file: P/pi dimensions do not match the state count");

    if (j.contains("sensors")) {
        std::vector<SensorSpec> sensors;
        for (const auto& js : j["sensors"]) {
            SensorSpec s;
            s.name = js.at("name").get<std::string>();
            s.mu = detail::to_vector(js.at("mu"), "sensor mu");
            s.sigma2 = detail::to_vector(js.at("sigma2"), "sensor sigma2");
            s.phi = js.at("phi").get<double>();
            s.noise_var = js.at("noise_var").get<double>();
            if (s.mu.size() != n || s.sigma2.size() != n)
                throw std::runtime_error("model file: sensor " + s.name +
                                         " statistics do not match the state count");
            sensors.push_back(std::move(s));
        }
        mf.budget = j.value("budget", 1);
        mf.observation = build_ar1_observation_model(sensors, mf.budget);
    } else if (j.contains("controls")) {
        std::vector<ControlModel> cms;
        int id = 0;
        for (const auto& jc : j["controls"]) {
            ControlModel cm;
            std::vector<StateGaussian> gs;
            Matrix mean_matrix;
            int dim = -1;
            for (const auto& jst : jc.at("states")) {
                Vector mean = detail::to_vector(jst.at("mean"), "control mean");
                Matrix cov = detail::to_matrix(jst.at("cov"), "control cov");
                if (dim < 0) {
                    dim = static_cast<int>(mean.size());
                    mean_matrix.resize(dim, n);
                }
                if (mean.size() != dim)
                    throw std::runtime_error("model file: control state means disagree on dimension");
                mean_matrix.col(static_cast<Eigen::Index>(gs.size())) = mean;
                gs.emplace_back(std::move(mean), std::move(cov));
            }
            if (static_cast<int>(gs.size()) != n)
                throw std::runtime_error("model file: each control needs one Gaussian per state");
            cm.control = Control{id, jc.value("label", "u" + std::to_string(id)), dim, {}};
            cm.states = std::move(gs);
            cm.mean_matrix = std::move(mean_matrix);
            cms.push_back(std::move(cm));
            ++id;
        }
        mf.observation = ObservationModel(std::move(cms));
    } else {
        throw std::runtime_error("model file: either sensors or controls must be given");
    }
    return mf;
}

inline void save_policy(const Policy& pol, const std::string& path) {
    nlohmann::json j;
    j["n"] = pol.grid.n();
    j["d"] = pol.grid.resolution();
    j["L"] = pol.horizon;
    j["M"] = pol.mc_samples;
    j["seed"] = pol.seed;
    nlohmann::json table = nlohmann::json::array();
    nlohmann::json values = nlohmann::json::array();
    for (int s = 0; s < pol.horizon; ++s)
        for (int p = 0; p < pol.grid.size(); ++p) {
            table.push_back(pol.table[static_cast<std::size_t>(s)][static_cast<std::size_t>(p)]);
            values.push_back(pol.values[static_cast<std::size_t>(s)][static_cast<std::size_t>(p)]);
        }
    j["table"] = std::move(table);
    j["values"] = std::move(values);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write policy file: " + path);
    out << j.dump(2) << "\n";
}

inline Policy load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open policy file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("policy file parse error: " + std::string(e.what()));
    }
    const int n = j.at("n").get<int>();
    const int d = j.at("d").get<int>();
    Policy pol{BeliefGrid(n, d), j.at("L").get<int>(), j.at("M").get<int>(),
               j.at("seed").get<std::uint64_t>(), {}, {}};
    const auto& table = j.at("table");
    const auto& values = j.at("values");
    const std::size_t expected =
        static_cast<std::size_t>(pol.horizon) * static_cast<std::size_t>(pol.grid.size());
    if (table.size() != expected || values.size() != expected)
        throw std::runtime_error("policy file: table/values size does not match L x grid");
    pol.table.assign(static_cast<std::size_t>(pol.horizon),
                     std::vector<int>(static_cast<std::size_t>(pol.grid.size())));
    pol.values.assign(static_cast<std::size_t>(pol.horizon),
                      std::vector<double>(static_cast<std::size_t>(pol.grid.size())));
    std::size_t i = 0;
    for (int s = 0; s < pol.horizon; ++s)
        for (int p = 0; p < pol.grid.size(); ++p, ++i) {
            pol.table[static_cast<std::size_t>(s)][static_cast<std::size_t>(p)] = table[i].get<int>();
            pol.values[static_cast<std::size_t>(s)][static_cast<std::size_t>(p)] =
                values[i].get<double>();
        }
    return pol;
}

/// Trajectory CSV: one row per step, observation padded to the widest
/// control so the column set is fixed.
inline void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& traj,
                                 const ObservationModel& om) {
    int dmax = 0;
    for (const auto& cm : om.controls()) dmax = std::max(dmax, cm.dim());
    const int n = om.controls().empty() ? 0 : om.controls().front().n();
    out << "k,true_state,control";
    for (int i = 0; i < dmax; ++i) out << ",y_" << i;
    for (int i = 0; i < n; ++i) out << ",pred_" << i;
    for (int i = 0; i < n; ++i) out << ",filt_" << i;
    out << ",mse_trace,map\n";
    for (std::size_t k = 0; k < traj.steps.size(); ++k) {
        const StepRecord& st = traj.steps[k];
        out << k << "," << st.true_state << "," << st.filter.control;
        for (int i = 0; i < dmax; ++i)
            out << "," << (i < st.filter.observation.size() ? fmt(st.filter.observation(i)) : "0");
        for (int i = 0; i < n; ++i) out << "," << fmt(st.filter.predicted(i));
        for (int i = 0; i < n; ++i) out << "," << fmt(st.filter.filtered(i));
        out << "," << fmt(st.filter.mse_trace) << "," << st.map_filter << "\n";
    }
}

struct RecordedStep {
    int k = 0;
    int true_state = -1;
    int control = 0;
    Vector y;
};

/// Reads back the (k, true_state, control, y) columns of a trajectory CSV;
/// beliefs are rebuilt by re-running the filter, not trusted from the file.
inline std::vector<RecordedStep> read_trajectory_csv(const std::string& path,
                                                     const ObservationModel& om) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("trajectory file is empty: " + path);
    std::vector<RecordedStep> steps;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 4) throw std::runtime_error("trajectory file: malformed row: " + line);
        RecordedStep rs;
        try {
            rs.k = std::stoi(cells[0]);
            rs.true_state = std::stoi(cells[1]);
            rs.control = std::stoi(cells[2]);
            const int dim = om.at(rs.control).dim();
            if (static_cast<int>(cells.size()) < 3 + dim)
                throw std::runtime_error("row too short for control dimension");
            rs.y.resize(dim);
            for (int i = 0; i < dim; ++i) rs.y(i) = std::stod(cells[static_cast<std::size_t>(3 + i)]);
        } catch (const std::exception& e) {
            throw std::runtime_error("trajectory file: malformed row (" + std::string(e.what()) +
                                     "): " + line);
        }
        steps.push_back(std::move(rs));
    }
    return steps;
}

inline void write_metrics_csv(std::ostream& out, const std::vector<SeriesStats>& series) {
    out << "estimator,k,mse_mean,mse_stderr,acc_mean,acc_stderr\n";
    for (const auto& s : series)
        for (std::size_t k = 0; k < s.mse_mean.size(); ++k)
            out << s.estimator << "," << k << "," << fmt(s.mse_mean[k]) << ","
                << fmt(s.mse_stderr[k]) << "," << fmt(s.acc_mean[k]) << ","
                << fmt(s.acc_stderr[k]) << "\n";
}

inline void write_summary_csv(std::ostream& out, const std::vector<SeriesStats>& series) {
    out << "estimator,accuracy,accuracy_stderr,mean_cumulative_mse,cumulative_mse_stderr\n";
    for (const auto& s : series)
        out << s.estimator << "," << fmt(s.overall_accuracy) << ","
            << fmt(s.overall_accuracy_stderr) << "," << fmt(s.mean_cumulative_mse) << ","
            << fmt(s.mean_cumulative_mse_stderr) << "\n";
}

/// Value surface and chosen controls of a solved policy, one row per
/// (stage, grid point).
inline void write_value_surface_csv(std::ostream& out, const Policy& pol) {
    const int n = pol.grid.n();
    out << "stage,point";
    for (int i = 0; i < n; ++i) out << ",p_" << i;
    out << ",control,value\n";
    for (int s = 0; s < pol.horizon; ++s)
        for (int p = 0; p < pol.grid.size(); ++p) {
            out << s << "," << p;
            for (int i = 0; i < n; ++i) out << "," << fmt(pol.grid.point(p)(i));
            out << "," << pol.table[static_cast<std::size_t>(s)][static_cast<std::size_t>(p)] << ","
                << fmt(pol.values[static_cast<std::size_t>(s)][static_cast<std::size_t>(p)]) << "\n";
        }
}

/// Greedy-control partition of the belief grid, for inspecting which sensor
/// wins where.
inline void write_greedy_partition_csv(std::ostream& out, const ObservationModel& om,
                                       const BeliefGrid& grid) {
    const int n = grid.n();
    out << "point";
    for (int i = 0; i < n; ++i) out << ",p_" << i;
    out << ",control,immediate_cost\n";
    for (int p = 0; p < grid.size(); ++p) {
        const int u = greedy_select(grid.point(p), om);
        out << p;
        for (int i = 0; i < n; ++i) out << "," << fmt(grid.point(p)(i));
        out << "," << u << "," << fmt(immediate_cost(grid.point(p), om.at(u))) << "\n";
    }
}

}  // namespace actrack

#endif  // ACTRACK_IO_HPP
