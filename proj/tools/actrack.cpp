// Command-line front end: validate models, solve for sensing policies,
// run closed-loop simulations, re-smooth recorded runs, and compare
// policies. Every command is a thin wrapper over the library; all
// randomness flows from --seed.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "actrack/filter.hpp"
#include "actrack/grid.hpp"
#include "actrack/io.hpp"
#include "actrack/model.hpp"
#include "actrack/policy.hpp"
#include "actrack/sim.hpp"
#include "actrack/smoother.hpp"

namespace fs = std::filesystem;
using namespace actrack;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitIo = 2;

struct PolicyChoice {
    PolicyFn fn;
    BeliefSource source = BeliefSource::kalman;
};

PolicyChoice resolve_policy(const std::string& spec, const ObservationModel& om) {
    PolicyChoice out;
    if (spec == "greedy") {
        out.fn = make_greedy_policy(om);
        return out;
    }
    if (spec == "bayes-oracle") {
        // Greedy immediate-cost selection driven by the Bayes oracle's
        // predicted belief instead of the Kalman-like filter's.
        out.fn = make_greedy_policy(om);
        out.fn.name = "bayes-oracle";
        out.source = BeliefSource::oracle;
        return out;
    }
    if (spec.rfind("static:", 0) == 0) {
        const int id = std::stoi(spec.substr(7));
        out.fn = make_static_policy(id, om);
        return out;
    }
    auto pol = std::make_shared<const Policy>(load_policy(spec));
    if (pol->grid.n() != om.controls().front().n())
        throw std::invalid_argument("policy file state count does not match the model");
    for (const auto& stage : pol->table)
        for (int u : stage)
            if (u < 0 || u >= om.num_controls())
                throw std::invalid_argument("policy file references an unknown control id");
    out.fn = PolicyFn{"dp:" + spec,
                      [pol](int step, const Vector& p) { return pol->select(step, p); }};
    return out;
}

std::vector<int> parse_lags(const std::string& csv) {
    std::vector<int> lags;
    if (csv.empty()) return lags;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const int d = std::stoi(item);
        if (d < 1) throw std::invalid_argument("--lags entries must be >= 1");
        lags.push_back(d);
    }
    return lags;
}

ModelFile load_and_check(const std::string& path) {
    ModelFile mf = load_model(path);
    const auto report = validate_model(mf.markov, mf.observation);
    if (!report.empty()) {
        for (const auto& line : report) std::cerr << "violation: " << line << "\n";
        throw std::invalid_argument("model failed validation");
    }
    return mf;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write: " + path.string());
    return out;
}

int cmd_validate(const std::string& model_path) {
    const ModelFile mf = load_model(model_path);
    const auto report = validate_model(mf.markov, mf.observation);
    if (report.empty()) {
        std::cout << "ok: " << mf.state_names.size() << " states, "
                  << mf.observation.num_controls() << " controls\n";
        return kExitOk;
    }
    for (const auto& line : report) std::cout << "violation: " << line << "\n";
    return kExitDomain;
}

int cmd_solve(const std::string& model_path, int resolution, int horizon, int mc_samples,
              std::uint64_t seed, int threads, const std::string& out_dir,
              bool greedy_partition) {
    const ModelFile mf = load_and_check(model_path);
    const BeliefGrid grid(static_cast<int>(mf.state_names.size()), resolution);
    const Policy pol =
        backward_induction(mf.markov, mf.observation, grid, horizon, mc_samples, seed, threads);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    save_policy(pol, (dir / "policy.json").string());
    {
        auto out = open_out(dir / "values.csv");
        write_value_surface_csv(out, pol);
    }
    if (greedy_partition) {
        auto out = open_out(dir / "greedy_partition.csv");
        write_greedy_partition_csv(out, mf.observation, grid);
    }
    std::cout << "solved horizon " << horizon << " over " << grid.size() << " grid points; wrote "
              << (dir / "policy.json").string() << "\n";
    return kExitOk;
}

int cmd_simulate(const std::string& model_path, const std::string& policy_spec, int trials,
                 int horizon, std::uint64_t seed, const std::string& lags_csv, int threads,
                 const std::string& out_dir) {
    const ModelFile mf = load_and_check(model_path);
    const PolicyChoice pc = resolve_policy(policy_spec, mf.observation);
    const std::vector<int> lags = parse_lags(lags_csv);

    std::vector<TrajectoryRecord> records(static_cast<std::size_t>(trials));
    parallel_for(trials, threads, [&](int t) {
        records[static_cast<std::size_t>(t)] =
            sample_trial(mf.markov, mf.observation, pc.fn, horizon, seed,
                         static_cast<std::uint64_t>(t), pc.source);
    });

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    {
        auto out = open_out(dir / "trajectory.csv");
        write_trajectory_csv(out, records.front(), mf.observation);
    }
    const auto series = aggregate_metrics(records, lags, mf.markov, mf.observation);
    {
        auto out = open_out(dir / "metrics.csv");
        write_metrics_csv(out, series);
    }
    {
        auto out = open_out(dir / "summary.csv");
        write_summary_csv(out, series);
    }
    for (const auto& s : series)
        std::cout << s.estimator << ": accuracy " << s.overall_accuracy << " (se "
                  << s.overall_accuracy_stderr << "), mean cumulative mse "
                  << s.mean_cumulative_mse << "\n";
    return kExitOk;
}

int cmd_smooth(const std::string& model_path, const std::string& traj_path,
               const std::string& mode, int anchor, int stage, int lag,
               const std::string& out_path) {
    const ModelFile mf = load_and_check(model_path);
    const auto recorded = read_trajectory_csv(traj_path, mf.observation);
    if (recorded.empty()) throw std::runtime_error("trajectory file has no rows");

    // Rebuild the filter pass; beliefs in the file are not trusted.
    std::vector<FilterStep> steps;
    Vector pred = mf.markov.pi;
    for (const auto& rs : recorded) {
        steps.push_back(filter_step_from_predicted(pred, rs.y, rs.control, mf.observation));
        pred = predict_belief(steps.back().filtered, mf.markov);
    }
    const int horizon = static_cast<int>(steps.size());
    const int n = static_cast<int>(mf.state_names.size());

    auto out = open_out(out_path);
    out << "k,R";
    for (int i = 0; i < n; ++i) out << ",p_" << i;
    out << ",map\n";
    auto emit = [&](int k, int r, const Vector& p) {
        out << k << "," << r;
        for (int i = 0; i < n; ++i) out << "," << fmt(p(i));
        out << "," << map_detect(p) << "\n";
    };

    if (mode == "fixed-point") {
        if (anchor < 0 || anchor >= horizon)
            throw std::invalid_argument("--anchor must name a recorded step");
        const int last = stage < 0 ? horizon - 1 : stage;
        if (last < anchor || last >= horizon)
            throw std::invalid_argument("--stage must satisfy anchor <= stage < horizon");
        // The whole sweep anchor..last: one row per smoothing stage.
        for (int r = anchor; r <= last; ++r)
            emit(anchor, r,
                 fixed_point_smooth(steps, anchor, r, mf.markov, mf.observation).projected);
    } else if (mode == "fixed-interval") {
        const int last = stage < 0 ? horizon - 1 : stage;
        if (last < 0 || last >= horizon)
            throw std::invalid_argument("--stage must name a recorded step");
        const auto smoothed = fixed_interval_smooth(steps, last, mf.markov, mf.observation);
        for (const auto& sm : smoothed) emit(sm.k, last, sm.projected);
    } else if (mode == "fixed-lag") {
        if (lag < 1) throw std::invalid_argument("--lag must be >= 1");
        FixedLagSmoother smoother(lag, mf.markov, mf.observation);
        for (const auto& st : steps)
            if (auto sm = smoother.push(st)) emit(sm->k, sm->k + lag, sm->projected);
    } else {
        throw std::invalid_argument("unknown mode: " + mode);
    }
    return kExitOk;
}

int cmd_evaluate(const std::string& model_path, const std::vector<std::string>& policy_specs,
                 int trials, int horizon, std::uint64_t seed, int threads,
                 const std::string& out_path) {
    const ModelFile mf = load_and_check(model_path);
    std::vector<EvalReport> reports;
    for (const auto& spec : policy_specs) {
        const PolicyChoice pc = resolve_policy(spec, mf.observation);
        reports.push_back(evaluate_policy(pc.fn, mf.markov, mf.observation, trials, horizon, seed,
                                          threads, pc.source));
    }
    std::ostringstream csv;
    csv << "policy,mean_total_cost,cost_stderr,accuracy,accuracy_stderr\n";
    for (const auto& r : reports) {
        csv << r.policy << "," << fmt(r.mean_total_cost) << "," << fmt(r.stderr_total_cost) << ","
            << fmt(r.accuracy) << "," << fmt(r.accuracy_stderr) << "\n";
        std::cout << r.policy << ": cost " << r.mean_total_cost << " (se " << r.stderr_total_cost
                  << "), accuracy " << r.accuracy << " (se " << r.accuracy_stderr << ")\n";
    }
    if (!out_path.empty()) {
        auto out = open_out(out_path);
        out << csv.str();
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Active state tracking for controlled hidden Markov chains"};
    app.require_subcommand(1);

    std::string model_path, policy_spec = "greedy", out_dir = "out", traj_path, mode = "fixed-point";
    std::string lags_csv, out_file;
    std::vector<std::string> policy_specs;
    int resolution = 20, horizon = 5, mc_samples = 256, trials = 1, threads = 1;
    int anchor = 0, stage = -1, lag = 1;
    std::uint64_t seed = 0;

    auto* validate = app.add_subcommand("validate", "check a model file");
    validate->add_option("--model", model_path, "model JSON file")->required();

    auto* solve = app.add_subcommand("solve", "backward-induction policy synthesis");
    solve->add_option("--model", model_path)->required();
    solve->add_option("-d,--resolution", resolution, "belief grid resolution");
    solve->add_option("-L,--horizon", horizon, "planning horizon");
    solve->add_option("-M,--mc-samples", mc_samples, "Monte-Carlo draws per stage point");
    solve->add_option("--seed", seed);
    solve->add_option("--threads", threads);
    solve->add_option("--out", out_dir, "output directory");
    bool greedy_partition = false;
    solve->add_flag("--greedy-partition", greedy_partition, "also dump the greedy control partition");

    auto* simulate = app.add_subcommand("simulate", "closed-loop rollouts with metrics");
    simulate->add_option("--model", model_path)->required();
    simulate->add_option("--policy", policy_spec,
                         "policy.json path | static:<id> | greedy | bayes-oracle");
    simulate->add_option("--trials", trials);
    simulate->add_option("--horizon", horizon);
    simulate->add_option("--seed", seed);
    simulate->add_option("--lags", lags_csv, "fixed-lag smoother depths, e.g. 1,2,3,4");
    simulate->add_option("--threads", threads);
    simulate->add_option("--out", out_dir);

    auto* smooth = app.add_subcommand("smooth", "re-estimate a recorded trajectory");
    smooth->add_option("--model", model_path)->required();
    smooth->add_option("--trajectory", traj_path)->required();
    smooth->add_option("--mode", mode, "fixed-point | fixed-interval | fixed-lag");
    smooth->add_option("--anchor", anchor, "fixed-point anchor step k");
    smooth->add_option("--stage", stage, "last observation index to use (default: end of file)");
    smooth->add_option("--lag", lag, "fixed-lag depth");
    smooth->add_option("--out", out_file, "output CSV")->required();

    auto* evaluate = app.add_subcommand("evaluate", "compare policies on one model");
    evaluate->add_option("--model", model_path)->required();
    evaluate->add_option("--policy", policy_specs, "repeatable policy spec")->required();
    evaluate->add_option("--trials", trials);
    evaluate->add_option("--horizon", horizon);
    evaluate->add_option("--seed", seed);
    evaluate->add_option("--threads", threads);
    evaluate->add_option("--out", out_file, "metrics CSV (optional)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitIo;
    }

    try {
        if (app.got_subcommand(validate)) return cmd_validate(model_path);
        if (app.got_subcommand(solve))
            return cmd_solve(model_path, resolution, horizon, mc_samples, seed, threads, out_dir,
                             greedy_partition);
        if (app.got_subcommand(simulate))
            return cmd_simulate(model_path, policy_spec, trials, horizon, seed, lags_csv, threads,
                                out_dir);
        if (app.got_subcommand(smooth))
            return cmd_smooth(model_path, traj_path, mode, anchor, stage, lag, out_file);
        if (app.got_subcommand(evaluate))
            return cmd_evaluate(model_path, policy_specs, trials, horizon, seed, threads, out_file);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}
