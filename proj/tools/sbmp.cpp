// Command-line interface: dataset generation, training, sampling, and
// evaluation of Schrödinger-bridge flow motion planners.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "sbmp/bridge.hpp"
#include "sbmp/checkpoint.hpp"
#include "sbmp/dataset_io.hpp"
#include "sbmp/envs.hpp"
#include "sbmp/errors.hpp"
#include "sbmp/metrics.hpp"
#include "sbmp/model.hpp"
#include "sbmp/run_config.hpp"
#include "sbmp/sampler.hpp"
#include "sbmp/svg.hpp"
#include "sbmp/training.hpp"

namespace {

using nlohmann::json;
using namespace sbmp;

void echo_config(const std::string& command, const cli::RunConfig& cfg) {
    json j;
    j["command"] = command;
    j["effective_config"] = cli::run_config_to_json(cfg);
    std::cout << j.dump() << "\n";
}

json rows_json(const std::vector<double>& a, int length, int dim) {
    json r = json::array();
    for (int i = 0; i < length; ++i) {
        json row = json::array();
        for (int j = 0; j < dim; ++j) row.push_back(a[static_cast<std::size_t>(i) * dim + j]);
        r.push_back(std::move(row));
    }
    return r;
}

json trajectory_json(const Trajectory& t) {
    return json{{"dt", t.dt},
                {"q", rows_json(t.q, t.length, t.dim)},
                {"qd", rows_json(t.qd, t.length, t.dim)},
                {"qdd", rows_json(t.qdd, t.length, t.dim)}};
}

json report_json(const metrics::EvalReport& r) {
    json verdicts = json::array();
    for (const auto& v : r.verdicts)
        verdicts.push_back(
            {{"goal_reached", v.goal_reached}, {"collision_free", v.collision_free}, {"success", v.success()}});
    return json{{"mmd", r.mmd},
                {"tj_mean", r.tj_mean},
                {"tj_std", r.tj_std},
                {"ec_mean", r.ec_mean},
                {"ec_std", r.ec_std},
                {"feasibility", {{"successes", r.successes}, {"total", r.total}, {"verdicts", verdicts}}},
                {"plan_time_mean", r.plan_time_mean},
                {"plan_time_std", r.plan_time_std},
                {"length", r.length},
                {"goal_tol", r.goal_tol}};
}

bool report_finite(const metrics::EvalReport& r) {
    return std::isfinite(r.mmd) && std::isfinite(r.tj_mean) && std::isfinite(r.tj_std) &&
           std::isfinite(r.ec_mean) && std::isfinite(r.ec_std) && std::isfinite(r.plan_time_mean) &&
           std::isfinite(r.plan_time_std);
}

Dataset prepare_training_data(Dataset ds, int target_length, const model::ArchSpec& arch) {
    int L = target_length;
    if (L <= 0) L = ds.trajectories[0].length;
    const int div = arch.length_divisor();
    if (L % div != 0)
        throw invalid_input_error("trajectory length " + std::to_string(L) + " is not divisible by " +
                                  std::to_string(div) + "; pick --length accordingly");
    for (auto& t : ds.trajectories)
        if (t.length != L) t = resample(t, L);
    for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
        ds.tasks[i].start = ds.trajectories[i].start();
        ds.tasks[i].goal = ds.trajectories[i].goal();
    }
    return ds;
}

std::vector<Task> eval_task_list(const Dataset& ds, const cli::RunConfig& cfg) {
    std::vector<Task> tasks;
    if (cfg.held_out_fraction > 0.0) {
        Rng split_rng(cfg.split_seed);
        tasks = envs::split_tasks(ds, cfg.held_out_fraction, split_rng).second;
    } else {
        for (std::size_t i = 0; i < ds.tasks.size(); ++i) {
            bool seen = false;
            for (std::size_t u = 0; u < tasks.size() && !seen; ++u)
                if (tasks[u].start == ds.tasks[i].start && tasks[u].goal == ds.tasks[i].goal) seen = true;
            if (!seen) tasks.push_back(ds.tasks[i]);
        }
    }
    if (cfg.eval_tasks > 0 && static_cast<int>(tasks.size()) > cfg.eval_tasks)
        tasks.resize(static_cast<std::size_t>(cfg.eval_tasks));
    return tasks;
}

sampler::SamplerConfig sampler_config_for(const Planner& planner, const cli::RunConfig& cfg) {
    sampler::SamplerConfig sc = cfg.sampler;
    sc.sigma = planner.bridge.sigma;
    sc.t_clamp = planner.bridge.t_clamp;
    sc.score_correction = planner.bridge.uses_score();
    return sc;
}

int cmd_gen_data(const cli::RunConfig& cfg, const std::string& out_path) {
    echo_config("gen-data", cfg);
    Rng rng(cfg.data_seed);
    Dataset ds;
    if (cfg.preset == "maze") {
        ds = envs::generate_maze_dataset(cfg.maze, rng);
    } else if (cfg.preset == "letters") {
        ds = envs::generate_letters_dataset(cfg.letters, rng);
    } else {
        throw invalid_input_error("unknown preset \"" + cfg.preset + "\" (expected maze or letters)");
    }
    envs::save_dataset(ds, out_path);
    json summary = {{"trajectories", ds.size()},
                    {"length", ds.trajectories[0].length},
                    {"dim", ds.dim()},
                    {"obstacles", ds.workspace.obstacles.size()},
                    {"out", out_path}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_train(const cli::RunConfig& cfg, const std::string& data_path, const std::string& out_path,
              const std::string& log_path, const std::string& resume_path) {
    echo_config("train", cfg);
    Dataset raw = envs::load_dataset(data_path);
    Dataset sized = prepare_training_data(std::move(raw), cfg.train_length, cfg.train.arch);
    if (cfg.held_out_fraction > 0.0) {
        Rng split_rng(cfg.split_seed);
        sized = envs::split_tasks(sized, cfg.held_out_fraction, split_rng).first;
    }
    auto [normalized, stats] = normalize(sized);

    training::TrainConfig tc = cfg.train;
    if (tc.bridge.family == bridge::Family::OTCFM) tc.coupling = bridge::CouplingMode::MinibatchOT;

    Planner resumed;
    const model::FieldModel* resume_from = nullptr;
    if (!resume_path.empty()) {
        resumed = load_planner(resume_path);
        resume_from = &resumed.field;
    }

    std::ofstream log_file;
    if (!log_path.empty()) {
        log_file.open(log_path, std::ios::trunc);
        if (!log_file) throw invalid_input_error("cannot open log file: " + log_path);
    }
    auto log = [&](int epoch, const training::EpochLog& el) {
        json line = {{"epoch", epoch}, {"flow_loss", el.flow_loss}, {"score_loss", el.score_loss}, {"secs", el.secs}};
        std::cout << line.dump() << "\n";
        if (log_file) log_file << line.dump() << "\n";
    };

    auto [field, report] = training::train(normalized, tc, log, resume_from);

    Planner planner;
    planner.field = std::move(field);
    planner.bridge = tc.bridge;
    planner.norm = stats;
    planner.workspace = sized.workspace;
    double dt_sum = 0.0;
    for (const auto& t : sized.trajectories) dt_sum += t.dt;
    planner.traj_dt = dt_sum / sized.trajectories.size();
    planner.train_seed = tc.seed;
    save_planner(planner, out_path);
    json done = {{"checkpoint", out_path},
                 {"epochs", static_cast<int>(report.epochs.size())},
                 {"final_flow_loss", report.epochs.back().flow_loss},
                 {"final_score_loss", report.epochs.back().score_loss}};
    std::cout << done.dump() << "\n";
    return 0;
}

int cmd_sample(const cli::RunConfig& cfg, const std::string& ckpt_path, std::vector<double> start,
               std::vector<double> goal, int task_index, const std::string& data_path,
               const std::string& out_path, const std::string& svg_path, bool snapshots) {
    echo_config("sample", cfg);
    Planner planner = load_planner(ckpt_path);

    Dataset overlay;
    bool have_overlay = false;
    if (!data_path.empty()) {
        overlay = envs::load_dataset(data_path);
        have_overlay = true;
    }

    Task task;
    if (task_index >= 0) {
        if (!have_overlay) throw invalid_input_error("--task-index requires --data");
        if (task_index >= overlay.size()) throw invalid_input_error("--task-index out of range");
        task = overlay.tasks[static_cast<std::size_t>(task_index)];
    } else {
        if (start.empty() || goal.empty()) throw invalid_input_error("need --start and --goal, or --task-index");
        task.start = std::move(start);
        task.goal = std::move(goal);
    }

    sampler::SamplerConfig sc = sampler_config_for(planner, cfg);
    if (snapshots && sc.snapshot_times.empty()) sc.snapshot_times = {0.0, 0.25, 0.5, 0.75, 1.0};

    Rng rng(cfg.sample_seed);
    sampler::GenerationResult result = sampler::generate(planner, task, sc, rng);

    json out = {{"task", {{"start", result.task.start}, {"goal", result.task.goal}}},
                {"wall_secs", result.wall_secs},
                {"trajectory", trajectory_json(result.trajectory)}};
    if (!result.snapshots.empty()) {
        json snaps = json::array();
        for (const auto& s : result.snapshots)
            snaps.push_back({{"t", s.t}, {"q", rows_json(s.state.q, s.state.length, s.state.dim)}});
        out["snapshots"] = std::move(snaps);
    }
    if (!out_path.empty()) {
        std::ofstream os(out_path, std::ios::trunc);
        if (!os) throw invalid_input_error("cannot open output file: " + out_path);
        os << out.dump(1) << "\n";
    } else {
        std::cout << out.dump() << "\n";
    }

    if (!svg_path.empty()) {
        svg::Figure fig(planner.workspace);
        if (have_overlay)
            for (const auto& t : overlay.trajectories) fig.add_trajectory(t, "#8dc3f0", 1.0, 0.5);
        for (const auto& s : result.snapshots)
            fig.add_polyline(s.state.q, s.state.length, s.state.dim, "#c9a0dc", 1.0, 0.6);
        fig.add_trajectory(result.trajectory, "#d62728", 2.0);
        fig.add_marker(task.start, "#2ca02c");
        fig.add_marker(task.goal, "#111111");
        std::ofstream os(svg_path, std::ios::trunc);
        if (!os) throw invalid_input_error("cannot open svg file: " + svg_path);
        os << fig.str();
    }
    std::cout << json{{"wall_secs", result.wall_secs}}.dump() << "\n";
    return 0;
}

int cmd_eval(const cli::RunConfig& cfg, const std::vector<std::string>& ckpt_paths, const std::string& data_path,
             const std::string& out_path, const std::string& csv_path) {
    echo_config("eval", cfg);
    Dataset ds = envs::load_dataset(data_path);
    const std::vector<Task> tasks = eval_task_list(ds, cfg);
    if (tasks.empty()) throw invalid_input_error("no evaluation tasks");

    metrics::EvalConfig ec;
    ec.kernel = cfg.kernel;
    ec.goal_tol = cfg.goal_tol;
    ec.seed = cfg.eval_seed;

    std::vector<metrics::EvalReport> reports;
    for (const std::string& path : ckpt_paths) {
        Planner planner = load_planner(path);
        ec.sampler = sampler_config_for(planner, cfg);
        Dataset sized = ds;
        for (auto& t : sized.trajectories)
            if (t.length != planner.field.L) t = resample(t, planner.field.L);
        reports.push_back(metrics::evaluate(planner, sized, tasks, ec));
    }

    std::printf("%-28s %12s %22s %22s %8s %22s\n", "checkpoint", "MMD", "TJ", "EC", "feas", "plan time (s)");
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        std::printf("%-28s %12.6g %10.4g ± %-9.4g %10.4g ± %-9.4g %3d/%-3d %10.4g ± %-9.4g\n",
                    ckpt_paths[i].c_str(), r.mmd, r.tj_mean, r.tj_std, r.ec_mean, r.ec_std, r.successes, r.total,
                    r.plan_time_mean, r.plan_time_std);
    }

    json out = ckpt_paths.size() == 1 ? report_json(reports[0]) : json::array();
    if (ckpt_paths.size() > 1)
        for (std::size_t i = 0; i < reports.size(); ++i)
            out.push_back(json{{"checkpoint", ckpt_paths[i]}, {"report", report_json(reports[i])}});
    if (!out_path.empty()) {
        std::ofstream os(out_path, std::ios::trunc);
        if (!os) throw invalid_input_error("cannot open report file: " + out_path);
        os << out.dump(1) << "\n";
    } else {
        std::cout << out.dump() << "\n";
    }
    if (!csv_path.empty()) {
        std::ofstream os(csv_path, std::ios::trunc);
        if (!os) throw invalid_input_error("cannot open csv file: " + csv_path);
        os << "checkpoint,mmd,tj_mean,tj_std,ec_mean,ec_std,successes,total,plan_time_mean,plan_time_std,length\n";
        for (std::size_t i = 0; i < reports.size(); ++i) {
            const auto& r = reports[i];
            os << ckpt_paths[i] << "," << r.mmd << "," << r.tj_mean << "," << r.tj_std << "," << r.ec_mean << ","
               << r.ec_std << "," << r.successes << "," << r.total << "," << r.plan_time_mean << ","
               << r.plan_time_std << "," << r.length << "\n";
        }
    }
    for (const auto& r : reports)
        if (!report_finite(r)) throw error("evaluation produced non-finite metrics");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Schrödinger-bridge flow motion planning"};
    app.require_subcommand(1);

    std::string config_path, out_path, data_path, log_path, resume_path, svg_path, csv_path;
    std::vector<std::string> ckpt_paths;
    std::vector<double> start_vec, goal_vec;
    int task_index = -1;
    bool snapshots = false;

    cli::RunConfig cfg;
    // flag storage: only values the user actually passed override the config file
    auto add_common = [&](CLI::App* sub) { sub->add_option("--config", config_path, "JSON run configuration"); };

    CLI::App* gen = app.add_subcommand("gen-data", "generate a dataset file");
    add_common(gen);
    gen->add_option("--out", out_path, "output dataset path")->required();
    std::string preset;
    std::uint64_t data_seed = 0;
    bool data_seed_set = false, preset_set = false;
    gen->add_option_function<std::string>(
           "--preset", [&](const std::string& v) { preset = v; preset_set = true; }, "maze or letters");
    gen->add_option_function<std::uint64_t>(
           "--seed", [&](std::uint64_t v) { data_seed = v; data_seed_set = true; }, "dataset seed");
    int n_obstacles = -1, n_tasks = -1, experts_per_task = -1, length = -1, demos_per_shape = -1;
    gen->add_option("--n-obstacles", n_obstacles, "circle count");
    gen->add_option("--n-tasks", n_tasks, "task count (maze)");
    gen->add_option("--experts-per-task", experts_per_task, "expert demos per task (maze)");
    gen->add_option("--length", length, "trajectory length");
    gen->add_option("--demos-per-shape", demos_per_shape, "demos per letter shape");

    CLI::App* train = app.add_subcommand("train", "train a planner on a dataset");
    add_common(train);
    train->add_option("--data", data_path, "dataset path")->required();
    train->add_option("--out", out_path, "checkpoint path")->required();
    train->add_option("--log", log_path, "epoch log file (JSON lines)");
    train->add_option("--resume", resume_path, "checkpoint to continue from");
    std::string family, coupling;
    int epochs = -1, batch = -1, steps_per_epoch = -1, order = -1, train_length = -1, threads = -1;
    double lr = -1.0, sigma = -1.0, grad_clip = -1.0;
    std::uint64_t train_seed = 0;
    bool train_seed_set = false, two_networks = false;
    train->add_option("--family", family, "sb|cfm|trig|otcfm");
    train->add_option("--coupling", coupling, "independent|minibatch_ot");
    train->add_option("--epochs", epochs, "training epochs");
    train->add_option("--batch-size", batch, "minibatch size");
    train->add_option("--steps-per-epoch", steps_per_epoch, "steps per epoch (0 = dataset size / batch)");
    train->add_option("--lr", lr, "learning rate");
    train->add_option("--sigma", sigma, "diffusion strength");
    train->add_option("--order", order, "interpolant order 1..3");
    train->add_option("--grad-clip", grad_clip, "max gradient norm (0 = off)");
    train->add_option("--length", train_length, "resample trajectories to this length");
    train->add_option("--threads", threads, "worker threads");
    train->add_flag("--two-networks", two_networks, "separate flow and score trunks");
    train->add_option_function<std::uint64_t>(
             "--seed", [&](std::uint64_t v) { train_seed = v; train_seed_set = true; }, "training seed");
    double held_out = -1.0;
    train->add_option("--held-out-fraction", held_out, "task fraction excluded from training");
    std::uint64_t split_seed = 0;
    bool split_seed_set = false;
    train->add_option_function<std::uint64_t>(
             "--split-seed", [&](std::uint64_t v) { split_seed = v; split_seed_set = true; }, "task split seed");

    CLI::App* sample = app.add_subcommand("sample", "generate one trajectory from a checkpoint");
    add_common(sample);
    std::string sample_ckpt, sample_out;
    sample->add_option("--ckpt", sample_ckpt, "checkpoint path")->required();
    sample->add_option("--data", data_path, "dataset for --task-index and SVG overlays");
    sample->add_option("--start", start_vec, "start coordinates")->expected(-1);
    sample->add_option("--goal", goal_vec, "goal coordinates")->expected(-1);
    sample->add_option("--task-index", task_index, "pick the task of this dataset entry");
    sample->add_option("--out", sample_out, "write GenerationResult JSON here");
    sample->add_option("--svg", svg_path, "write an SVG figure here");
    sample->add_flag("--snapshots", snapshots, "record states at t = 0, .25, .5, .75, 1");
    int sample_steps = -1;
    std::uint64_t sample_seed = 0;
    bool sample_seed_set = false;
    sample->add_option("--steps", sample_steps, "Euler steps");
    sample->add_option_function<std::uint64_t>(
              "--seed", [&](std::uint64_t v) { sample_seed = v; sample_seed_set = true; }, "sampling seed");

    CLI::App* eval = app.add_subcommand("eval", "evaluate checkpoints on a dataset");
    add_common(eval);
    eval->add_option("--ckpt", ckpt_paths, "checkpoints (several rows with --compare style lists)")
        ->required()
        ->expected(-1);
    eval->add_option("--data", data_path, "dataset path")->required();
    eval->add_option("--out", out_path, "report JSON path");
    eval->add_option("--csv", csv_path, "append-style CSV row path");
    int eval_n_tasks = -1, eval_steps = -1;
    double eval_held_out = -1.0, goal_tol = -1.0, bandwidth = -1.0;
    std::uint64_t eval_seed = 0, eval_split_seed = 0;
    bool eval_seed_set = false, eval_split_seed_set = false;
    eval->add_option("--n-tasks", eval_n_tasks, "number of evaluation tasks");
    eval->add_option("--steps", eval_steps, "Euler steps");
    eval->add_option("--held-out-fraction", eval_held_out, "task fraction to evaluate on");
    eval->add_option("--goal-tol", goal_tol, "goal tolerance (workspace units)");
    eval->add_option("--bandwidth", bandwidth, "RBF bandwidth (0 = median heuristic)");
    eval->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t v) { eval_seed = v; eval_seed_set = true; }, "evaluation seed");
    eval->add_option_function<std::uint64_t>(
            "--split-seed", [&](std::uint64_t v) { eval_split_seed = v; eval_split_seed_set = true; },
            "task split seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (!config_path.empty()) cfg = cli::load_run_config(config_path);

        if (gen->parsed()) {
            if (preset_set) cfg.preset = preset;
            if (data_seed_set) cfg.data_seed = data_seed;
            if (n_obstacles >= 0) cfg.maze.n_obstacles = n_obstacles;
            if (n_tasks >= 0) cfg.maze.n_tasks = n_tasks;
            if (experts_per_task >= 0) cfg.maze.experts_per_task = experts_per_task;
            if (length >= 0) {
                cfg.maze.length = length;
                cfg.letters.length = length;
            }
            if (demos_per_shape >= 0) cfg.letters.demos_per_shape = demos_per_shape;
            return cmd_gen_data(cfg, out_path);
        }
        if (train->parsed()) {
            if (!family.empty()) cfg.train.bridge.family = bridge::family_from_name(family);
            if (!coupling.empty()) {
                if (coupling == "independent")
                    cfg.train.coupling = bridge::CouplingMode::Independent;
                else if (coupling == "minibatch_ot")
                    cfg.train.coupling = bridge::CouplingMode::MinibatchOT;
                else
                    throw invalid_input_error("unknown coupling \"" + coupling + "\"");
            }
            if (epochs >= 0) cfg.train.epochs = epochs;
            if (batch >= 0) cfg.train.batch_size = batch;
            if (steps_per_epoch >= 0) cfg.train.steps_per_epoch = steps_per_epoch;
            if (lr >= 0.0) cfg.train.lr = lr;
            if (sigma >= 0.0) cfg.train.bridge.sigma = sigma;
            if (order >= 0) cfg.train.bridge.order = order;
            if (grad_clip >= 0.0) cfg.train.grad_clip = grad_clip;
            if (train_length >= 0) cfg.train_length = train_length;
            if (threads >= 0) cfg.train.threads = threads;
            if (two_networks) cfg.train.arch.two_networks = true;
            if (train_seed_set) cfg.train.seed = train_seed;
            if (held_out >= 0.0) cfg.held_out_fraction = held_out;
            if (split_seed_set) cfg.split_seed = split_seed;
            return cmd_train(cfg, data_path, out_path, log_path, resume_path);
        }
        if (sample->parsed()) {
            if (sample_steps >= 1) cfg.sampler.steps = sample_steps;
            if (sample_seed_set) cfg.sample_seed = sample_seed;
            return cmd_sample(cfg, sample_ckpt, start_vec, goal_vec, task_index, data_path, sample_out, svg_path,
                              snapshots);
        }
        if (eval->parsed()) {
            if (eval_n_tasks >= 0) cfg.eval_tasks = eval_n_tasks;
            if (eval_steps >= 1) cfg.sampler.steps = eval_steps;
            if (eval_held_out >= 0.0) cfg.held_out_fraction = eval_held_out;
            if (goal_tol >= 0.0) cfg.goal_tol = goal_tol;
            if (bandwidth >= 0.0) cfg.kernel.bandwidth = bandwidth;
            if (eval_seed_set) cfg.eval_seed = eval_seed;
            if (eval_split_seed_set) cfg.split_seed = eval_split_seed;
            return cmd_eval(cfg, ckpt_paths, data_path, out_path, csv_path);
        }
    } catch (const invalid_input_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const parse_error& e) {
        std::cerr << "dataset error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
