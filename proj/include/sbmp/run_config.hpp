#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbmp/bridge.hpp"
#include "sbmp/envs.hpp"
#include "sbmp/errors.hpp"
#include "sbmp/metrics.hpp"
#include "sbmp/sampler.hpp"
#include "sbmp/training.hpp"

namespace sbmp::cli {

// Everything a run needs, loadable from one JSON file. Every field has a
// default; command-line flags override file values; unknown keys are
// rejected so typos cannot silently fall back to defaults.
struct RunConfig {
    std::string preset = "maze";
    envs::MazeSpec maze;
    envs::LettersSpec letters;
    std::uint64_t data_seed = 7;

    training::TrainConfig train;
    int train_length = 0;  // resample target; 0 keeps the dataset length

    sampler::SamplerConfig sampler;
    std::uint64_t sample_seed = 1;

    metrics::KernelSpec kernel;
    double goal_tol = 0.0;  // 0: 2% of the workspace diagonal
    int eval_tasks = 10;
    double held_out_fraction = 0.0;  // 0: no split
    std::uint64_t split_seed = 99;
    std::uint64_t eval_seed = 3;
};

namespace cfg_detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw invalid_input_error("config " + where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw invalid_input_error("config " + where + ": unknown key \"" + it.key() + "\"");
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace cfg_detail

inline nlohmann::json run_config_to_json(const RunConfig& c) {
    using nlohmann::json;
    json j;
    j["dataset"] = {{"preset", c.preset},
                    {"seed", c.data_seed},
                    {"bounds_min", c.maze.lo},
                    {"bounds_max", c.maze.hi},
                    {"n_obstacles", c.maze.n_obstacles},
                    {"radius_min", c.maze.radius_min},
                    {"radius_max", c.maze.radius_max},
                    {"n_tasks", c.maze.n_tasks},
                    {"experts_per_task", c.maze.experts_per_task},
                    {"length", c.maze.length},
                    {"min_task_separation", c.maze.min_task_separation},
                    {"grid_resolution", c.maze.grid_resolution},
                    {"inflation_frac", c.maze.inflation_frac},
                    {"jitter_frac", c.maze.jitter_frac},
                    {"demos_per_shape", c.letters.demos_per_shape},
                    {"letters_length", c.letters.length},
                    {"letters_jitter", c.letters.jitter}};
    j["train"] = {{"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"steps_per_epoch", c.train.steps_per_epoch},
                  {"lr", c.train.lr},
                  {"lr_final", c.train.lr_final},
                  {"grad_clip", c.train.grad_clip},
                  {"seed", c.train.seed},
                  {"family", bridge::family_name(c.train.bridge.family)},
                  {"sigma", c.train.bridge.sigma},
                  {"order", c.train.bridge.order},
                  {"t_clamp", c.train.bridge.t_clamp},
                  {"sigma_min", c.train.bridge.sigma_min},
                  {"coupling", c.train.coupling == bridge::CouplingMode::MinibatchOT ? "minibatch_ot" : "independent"},
                  {"scheduler", c.train.scheduler == training::Scheduler::SigmaSq ? "sigma_sq" : "constant"},
                  {"noise_vel_scale", c.train.noise_vel_scale},
                  {"noise_acc_scale", c.train.noise_acc_scale},
                  {"threads", c.train.threads},
                  {"length", c.train_length},
                  {"levels", c.train.arch.levels},
                  {"widths", c.train.arch.widths},
                  {"time_embed_dim", c.train.arch.time_embed_dim},
                  {"cond_dim", c.train.arch.cond_dim},
                  {"kernel", c.train.arch.kernel},
                  {"two_networks", c.train.arch.two_networks}};
    j["sampler"] = {{"steps", c.sampler.steps},
                    {"t_clamp", c.sampler.t_clamp},
                    {"score_correction", c.sampler.score_correction},
                    {"noise_vel_scale", c.sampler.noise_vel_scale},
                    {"noise_acc_scale", c.sampler.noise_acc_scale},
                    {"snapshots", c.sampler.snapshot_times},
                    {"threads", c.sampler.threads},
                    {"seed", c.sample_seed}};
    j["eval"] = {{"bandwidth", c.kernel.bandwidth}, {"goal_tol", c.goal_tol},
                 {"n_tasks", c.eval_tasks},         {"held_out_fraction", c.held_out_fraction},
                 {"split_seed", c.split_seed},      {"seed", c.eval_seed}};
    return j;
}

inline void apply_run_config_json(const nlohmann::json& j, RunConfig& c) {
    using namespace cfg_detail;
    check_keys(j, {"dataset", "train", "sampler", "eval"}, "(top level)");
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        check_keys(d,
                   {"preset", "seed", "bounds_min", "bounds_max", "n_obstacles", "radius_min", "radius_max",
                    "n_tasks", "experts_per_task", "length", "min_task_separation", "grid_resolution",
                    "inflation_frac", "jitter_frac", "demos_per_shape", "letters_length", "letters_jitter"},
                   "dataset");
        maybe(d, "preset", c.preset);
        maybe(d, "seed", c.data_seed);
        maybe(d, "bounds_min", c.maze.lo);
        maybe(d, "bounds_max", c.maze.hi);
        maybe(d, "n_obstacles", c.maze.n_obstacles);
        maybe(d, "radius_min", c.maze.radius_min);
        maybe(d, "radius_max", c.maze.radius_max);
        maybe(d, "n_tasks", c.maze.n_tasks);
        maybe(d, "experts_per_task", c.maze.experts_per_task);
        maybe(d, "length", c.maze.length);
        maybe(d, "min_task_separation", c.maze.min_task_separation);
        maybe(d, "grid_resolution", c.maze.grid_resolution);
        maybe(d, "inflation_frac", c.maze.inflation_frac);
        maybe(d, "jitter_frac", c.maze.jitter_frac);
        maybe(d, "demos_per_shape", c.letters.demos_per_shape);
        maybe(d, "letters_length", c.letters.length);
        maybe(d, "letters_jitter", c.letters.jitter);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        check_keys(t,
                   {"epochs", "batch_size", "steps_per_epoch", "lr", "lr_final", "grad_clip", "seed", "family", "sigma",
                    "order", "t_clamp", "sigma_min", "coupling", "scheduler", "noise_vel_scale", "noise_acc_scale",
                    "threads", "length", "levels", "widths", "time_embed_dim", "cond_dim", "kernel",
                    "two_networks"},
                   "train");
        maybe(t, "epochs", c.train.epochs);
        maybe(t, "batch_size", c.train.batch_size);
        maybe(t, "steps_per_epoch", c.train.steps_per_epoch);
        maybe(t, "lr", c.train.lr);
        maybe(t, "lr_final", c.train.lr_final);
        maybe(t, "grad_clip", c.train.grad_clip);
        maybe(t, "seed", c.train.seed);
        if (t.contains("family")) c.train.bridge.family = bridge::family_from_name(t.at("family").get<std::string>());
        maybe(t, "sigma", c.train.bridge.sigma);
        maybe(t, "order", c.train.bridge.order);
        maybe(t, "t_clamp", c.train.bridge.t_clamp);
        maybe(t, "sigma_min", c.train.bridge.sigma_min);
        if (t.contains("coupling")) {
            const std::string mode = t.at("coupling").get<std::string>();
            if (mode == "independent")
                c.train.coupling = bridge::CouplingMode::Independent;
            else if (mode == "minibatch_ot")
                c.train.coupling = bridge::CouplingMode::MinibatchOT;
            else
                throw invalid_input_error("config train/coupling: unknown mode \"" + mode + "\"");
        }
        if (t.contains("scheduler")) {
            const std::string s = t.at("scheduler").get<std::string>();
            if (s == "sigma_sq")
                c.train.scheduler = training::Scheduler::SigmaSq;
            else if (s == "constant")
                c.train.scheduler = training::Scheduler::Constant;
            else
                throw invalid_input_error("config train/scheduler: unknown value \"" + s + "\"");
        }
        maybe(t, "noise_vel_scale", c.train.noise_vel_scale);
        maybe(t, "noise_acc_scale", c.train.noise_acc_scale);
        maybe(t, "threads", c.train.threads);
        maybe(t, "length", c.train_length);
        maybe(t, "levels", c.train.arch.levels);
        maybe(t, "widths", c.train.arch.widths);
        maybe(t, "time_embed_dim", c.train.arch.time_embed_dim);
        maybe(t, "cond_dim", c.train.arch.cond_dim);
        maybe(t, "kernel", c.train.arch.kernel);
        maybe(t, "two_networks", c.train.arch.two_networks);
        if (t.contains("levels") && !t.contains("widths"))
            throw invalid_input_error("config train: levels given without widths");
    }
    if (j.contains("sampler")) {
        const auto& s = j.at("sampler");
        check_keys(s,
                   {"steps", "t_clamp", "score_correction", "noise_vel_scale", "noise_acc_scale", "snapshots",
                    "threads", "seed"},
                   "sampler");
        maybe(s, "steps", c.sampler.steps);
        maybe(s, "t_clamp", c.sampler.t_clamp);
        maybe(s, "score_correction", c.sampler.score_correction);
        maybe(s, "noise_vel_scale", c.sampler.noise_vel_scale);
        maybe(s, "noise_acc_scale", c.sampler.noise_acc_scale);
        maybe(s, "snapshots", c.sampler.snapshot_times);
        maybe(s, "threads", c.sampler.threads);
        maybe(s, "seed", c.sample_seed);
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        check_keys(e, {"bandwidth", "goal_tol", "n_tasks", "held_out_fraction", "split_seed", "seed"}, "eval");
        maybe(e, "bandwidth", c.kernel.bandwidth);
        maybe(e, "goal_tol", c.goal_tol);
        maybe(e, "n_tasks", c.eval_tasks);
        maybe(e, "held_out_fraction", c.held_out_fraction);
        maybe(e, "split_seed", c.split_seed);
        maybe(e, "seed", c.eval_seed);
    }
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw invalid_input_error("cannot open config file: " + path);
    nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
    if (j.is_discarded()) throw invalid_input_error("config file is not valid JSON: " + path);
    RunConfig c;
    apply_run_config_json(j, c);
    return c;
}

}  // namespace sbmp::cli
