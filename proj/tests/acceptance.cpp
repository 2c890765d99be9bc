// Acceptance suite: one pass/fail line per criterion. Each check pins its
// tolerances in code; the binary exits nonzero if any gated criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sbmp/bridge.hpp"
#include "sbmp/checkpoint.hpp"
#include "sbmp/dataset_io.hpp"
#include "sbmp/envs.hpp"
#include "sbmp/metrics.hpp"
#include "sbmp/model.hpp"
#include "sbmp/sampler.hpp"
#include "sbmp/traj_ops.hpp"
#include "sbmp/training.hpp"

#ifndef SBMP_CLI_PATH
#define SBMP_CLI_PATH "sbmp"
#endif

using namespace sbmp;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("%s criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

void report_soft(int criterion, const std::string& detail) {
    std::printf("REPORT criterion %2d: %s\n", criterion, detail.c_str());
    std::fflush(stdout);
}

double now_secs() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

StateBlock scalar_block(double q, double qd, double qdd) {
    StateBlock b = StateBlock::zeros(1, 1);
    b.q[0] = q;
    b.qd[0] = qd;
    b.qdd[0] = qdd;
    return b;
}

bridge::BridgeEndpoints toy_endpoints() {
    bridge::BridgeEndpoints ep;
    ep.noise = scalar_block(0.3, -0.2, 0.1);
    ep.target = scalar_block(-0.7, 0.4, 0.0);
    return ep;
}

// ---------------------------------------------------------------- criterion 1
// Euler-Maruyama simulation of the conditional SDE built from target_drift
// and target_score (Eq. 6 rearranged: SDE drift = flow field + s^2/2 score)
// must reproduce the closed-form marginal moments for orders 1..3.
void criterion_1() {
    const double t0 = now_secs();
    bridge::BridgeSpec spec;
    spec.sigma = 0.5;
    bridge::BridgeEndpoints ep = toy_endpoints();
    const std::vector<double> times{0.25, 0.5, 0.75};
    const int n_paths = 10000, n_steps = 1000;
    bool ok = true;
    std::ostringstream msg;
    for (int order = 1; order <= 3 && ok; ++order) {
        spec.order = order;
        const double eps = spec.t_clamp;
        const double t_end = times.back();
        const double h = (t_end - eps) / n_steps;
        std::vector<std::vector<double>> samples(times.size(), std::vector<double>(n_paths));
        const int n_threads = 2;
        std::vector<std::thread> pool;
        for (int w = 0; w < n_threads; ++w) {
            pool.emplace_back([&, w]() {
                Rng root(4242 + order);
                for (int p = w; p < n_paths; p += n_threads) {
                    Rng rng = root.split("path", static_cast<std::uint64_t>(p));
                    StateBlock x = bridge::interpolate(eps, ep, spec, rng);
                    std::size_t next_time = 0;
                    for (int s = 0; s < n_steps; ++s) {
                        const double t = eps + s * h;
                        while (next_time < times.size() && t >= times[next_time] - 1e-12) {
                            samples[next_time][p] = x.q[0];
                            ++next_time;
                        }
                        StateBlock drift = bridge::sde_drift(t, x, ep, spec);
                        for (int c = 0; c < 3; ++c)
                            for (std::size_t i = 0; i < x.channel(c).size(); ++i)
                                x.channel(c)[i] += h * drift.channel(c)[i] + spec.sigma * std::sqrt(h) * rng.normal();
                    }
                    while (next_time < times.size()) {
                        samples[next_time][p] = x.q[0];
                        ++next_time;
                    }
                }
            });
        }
        for (auto& th : pool) th.join();

        for (std::size_t i = 0; i < times.size(); ++i) {
            auto [mu, var] = bridge::marginal(times[i], ep, spec);
            const double mean =
                std::accumulate(samples[i].begin(), samples[i].end(), 0.0) / static_cast<double>(n_paths);
            double v = 0.0;
            for (double s : samples[i]) v += (s - mean) * (s - mean);
            v /= static_cast<double>(n_paths);
            const double mean_tol = 3.0 * std::sqrt(var) / std::sqrt(static_cast<double>(n_paths));
            if (std::abs(mean - mu.q[0]) > mean_tol) {
                ok = false;
                msg << "order " << order << " t=" << times[i] << " mean off by " << std::abs(mean - mu.q[0])
                    << " (tol " << mean_tol << ")";
                break;
            }
            if (std::abs(v - var) > 0.05 * var) {
                ok = false;
                msg << "order " << order << " t=" << times[i] << " var " << v << " vs " << var;
                break;
            }
        }
    }
    const double secs = now_secs() - t0;
    if (secs >= 30.0) ok = false;
    if (ok)
        msg << "bridge-marginal oracle: 1e4 paths x 1e3 steps, orders 1-3, mean within 3s/sqrt(N), var within 5%, "
            << std::fixed << std::setprecision(1) << secs << "s";
    report(1, ok, msg.str());
}

// ---------------------------------------------------------------- criterion 2
void criterion_2() {
    bridge::BridgeSpec spec;
    spec.sigma = 0.5;
    bridge::BridgeEndpoints ep = toy_endpoints();
    const double eps = spec.t_clamp;
    const double t_end = 1.0 - 1e-3;
    const int n_paths = 2000, n_steps = 8000;
    const double h = (t_end - eps) / n_steps;
    const double band = 3.0 * std::sqrt(bridge::variance_at(t_end, spec));
    std::vector<int> inside_per_thread(2, 0);
    std::vector<std::thread> pool;
    for (int w = 0; w < 2; ++w) {
        pool.emplace_back([&, w]() {
            Rng root(777);
            int inside = 0;
            for (int p = w; p < n_paths; p += 2) {
                Rng rng = root.split("path", static_cast<std::uint64_t>(p));
                StateBlock x = bridge::interpolate(eps, ep, spec, rng);
                for (int s = 0; s < n_steps; ++s) {
                    const double t = eps + s * h;
                    StateBlock drift = bridge::sde_drift(t, x, ep, spec);
                    for (int c = 0; c < 3; ++c)
                        for (std::size_t i = 0; i < x.channel(c).size(); ++i)
                            x.channel(c)[i] += h * drift.channel(c)[i] + spec.sigma * std::sqrt(h) * rng.normal();
                }
                if (std::abs(x.q[0] - ep.target.q[0]) <= band) ++inside;
            }
            inside_per_thread[w] = inside;
        });
    }
    for (auto& th : pool) th.join();
    const double frac = static_cast<double>(inside_per_thread[0] + inside_per_thread[1]) / n_paths;
    std::ostringstream msg;
    msg << "endpoint pinning: " << 100.0 * frac << "% of simulated bridges within 3*sqrt(var) of pi1 at t=1-1e-3";
    report(2, frac >= 0.99, msg.str());
}

// ---------------------------------------------------------------- criterion 3
void criterion_3() {
    const double t0 = now_secs();
    model::ArchSpec arch;
    arch.levels = 2;
    arch.widths = {4, 8};
    arch.time_embed_dim = 8;
    arch.cond_dim = 8;
    arch.kernel = 3;
    Rng init_rng(11);
    model::FieldModel fm = model::FieldModel::init(arch, 1, 8, init_rng);
    Rng head_rng(13);
    for (const auto& e : fm.layout.entries)
        if (e.name.find("head") != std::string::npos)
            for (std::size_t i = 0; i < e.count(); ++i) fm.params[e.offset + i] = 0.1 * head_rng.normal();

    Rng rng(7);
    StateBlock x = StateBlock::zeros(8, 1);
    StateBlock r1 = StateBlock::zeros(8, 1);
    StateBlock r2 = StateBlock::zeros(8, 1);
    for (int c = 0; c < 3; ++c) {
        for (double& v : x.channel(c)) v = rng.normal();
        for (double& v : r1.channel(c)) v = rng.normal();
        for (double& v : r2.channel(c)) v = rng.normal();
    }
    Task task;
    task.start = {0.3};
    task.goal = {-0.8};
    const double t = 0.37;

    auto eval_loss = [&]() {
        model::FieldModel::TrainCache cache;
        auto [drift, score] = fm.forward_train(t, x, task, cache);
        double s = 0.0;
        for (int c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < drift.channel(c).size(); ++i)
                s += drift.channel(c)[i] * r1.channel(c)[i] + score.channel(c)[i] * r2.channel(c)[i];
        return s;
    };
    std::vector<double> grads(fm.param_count(), 0.0);
    {
        model::FieldModel::TrainCache cache;
        fm.forward_train(t, x, task, cache);
        fm.backward_train(cache, r1, r2, grads.data());
    }
    double worst = 0.0;
    const double h = 1e-5;
    for (std::size_t i = 0; i < fm.param_count(); ++i) {
        const double keep = fm.params[i];
        fm.params[i] = keep + h;
        const double up = eval_loss();
        fm.params[i] = keep - h;
        const double down = eval_loss();
        fm.params[i] = keep;
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, std::abs(grads[i] - fd) / std::max({1.0, std::abs(grads[i]), std::abs(fd)}));
    }
    const double secs = now_secs() - t0;
    std::ostringstream msg;
    msg << "gradient check: full model with " << fm.param_count() << " params (conv/groupnorm/linear/silu paths), "
        << "max rel err " << std::scientific << std::setprecision(2) << worst << ", " << std::fixed
        << std::setprecision(1) << secs << "s";
    report(3, worst < 1e-4 && fm.param_count() <= 5000 && secs < 60.0, msg.str());
}

// ---------------------------------------------------------------- criterion 4
void criterion_4() {
    Dataset ds;
    ds.workspace.lo = {-1.0};
    ds.workspace.hi = {1.0};
    std::vector<double> q(8);
    for (int i = 0; i < 8; ++i) {
        const double u = i / 7.0;
        q[i] = -0.7 + 1.4 * u + 0.15 * std::sin(3.0 * u);
    }
    Trajectory traj = make_trajectory(std::move(q), 8, 1, 0.1);
    Task task;
    task.start = traj.start();
    task.goal = traj.goal();
    ds.trajectories.push_back(std::move(traj));
    ds.tasks.push_back(std::move(task));

    training::TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.steps_per_epoch = 1;
    cfg.seed = 314;
    cfg.arch.levels = 2;
    cfg.arch.widths = {4, 8};
    cfg.arch.time_embed_dim = 8;
    cfg.arch.cond_dim = 8;
    cfg.arch.kernel = 3;
    cfg.threads = 1;
    auto [fm, rep] = training::train(ds, cfg);
    (void)fm;

    Rng root(cfg.seed);
    auto batch = training::detail::prepare_batch(ds, cfg, root.split("step", 0), 8, 1);
    double flow = 0.0, score = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b)
        for (int c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < batch.targets[b].drift.channel(c).size(); ++i) {
                flow += batch.targets[b].drift.channel(c)[i] * batch.targets[b].drift.channel(c)[i];
                score += batch.targets[b].score_scaled.channel(c)[i] * batch.targets[b].score_scaled.channel(c)[i];
            }
    const double expect = (flow + score) / (cfg.batch_size * 3.0 * 8);
    const double err = std::abs(rep.first_step_total - expect);
    std::ostringstream msg;
    msg << "zero-init first loss " << rep.first_step_total << " vs analytic mean squared target norm " << expect
        << " (|diff| = " << std::scientific << std::setprecision(2) << err << ")";
    report(4, err < 1e-9, msg.str());
}

// ---------------------------------------------------------------- criterion 5
struct ExactBridgeField final : sampler::FieldProvider {
    bridge::BridgeEndpoints ep;
    bridge::BridgeSpec spec;
    void eval(double t, const StateBlock& x, const Task&, StateBlock& d, StateBlock& s) const override {
        d = bridge::target_drift(t, x, ep, spec);
        s = bridge::target_score_scaled(t, x, ep, spec);
    }
};

void criterion_5() {
    ExactBridgeField f;
    f.spec.sigma = 0.5;
    f.spec.order = 3;
    f.ep.noise = scalar_block(0.1, -0.05, 0.15);
    f.ep.target = scalar_block(-0.05, 0.02, -0.03);
    Task task;
    task.start = {0.0};
    task.goal = {1.0};

    sampler::SamplerConfig cfg;
    cfg.steps = 1000;
    cfg.sigma = f.spec.sigma;
    StateBlock end = sampler::integrate_flow(f, bridge::mean_at(cfg.t_clamp, f.ep, f.spec), task, cfg);
    const double terminal_err = std::abs(end.q[0] - f.ep.target.q[0]);

    // convergence order measured away from the clamp boundary layer
    std::vector<double> errs;
    for (int k : {10, 100, 1000}) {
        sampler::SamplerConfig ck;
        ck.steps = k;
        ck.sigma = f.spec.sigma;
        ck.t_clamp = 0.02;
        StateBlock e = sampler::integrate_flow(f, bridge::mean_at(ck.t_clamp, f.ep, f.spec), task, ck);
        errs.push_back(std::abs(e.q[0] - bridge::mean_at(1.0 - ck.t_clamp, f.ep, f.spec).q[0]));
    }
    const double order01 = std::log10(errs[0] / errs[1]);
    const double order12 = std::log10(errs[1] / errs[2]);
    const bool mono = errs[1] < errs[0] && errs[2] < errs[1];
    const bool first_order = std::abs(order01 - 1.0) < 0.2 && std::abs(order12 - 1.0) < 0.2;
    std::ostringstream msg;
    msg << "closed-form sampler oracle: terminal err " << std::scientific << std::setprecision(2) << terminal_err
        << " at k=1000 (< 1e-3), observed orders " << std::fixed << std::setprecision(2) << order01 << ", "
        << order12;
    report(5, terminal_err < 1e-3 && mono && first_order, msg.str());
}

// ---------------------------------------------------------------- criterion 7
void criterion_7() {
    bool ok = true;
    std::ostringstream msg;

    {
        const int L = 1000;
        std::vector<double> q(L);
        const double dt = 1.0 / (L - 1);
        for (int i = 0; i < L; ++i) q[i] = (i * dt) * (i * dt);
        Trajectory t = make_trajectory(std::move(q), L, 1, dt);
        const double tj = metrics::trajectory_jerkiness(t);
        if (std::abs(tj - 4.0) > 0.04) {
            ok = false;
            msg << "TJ(t^2) = " << tj << "; ";
        }
    }
    {
        const int L = 1000;
        std::vector<double> q(L);
        const double dt = 1.0 / (L - 1);
        for (int i = 0; i < L; ++i) q[i] = 2.0 * i * dt;
        Trajectory t = make_trajectory(std::move(q), L, 1, dt);
        const double ec = metrics::energy_consumption(t);
        if (std::abs(ec - 4.0) > 0.04) {
            ok = false;
            msg << "EC(line) = " << ec << "; ";
        }
    }
    {
        Rng rng(31);
        std::vector<std::vector<double>> xs(12, std::vector<double>(6));
        for (auto& v : xs)
            for (double& x : v) x = rng.normal();
        const double self = metrics::mmd(xs, xs);
        if (!(std::abs(self) < 1e-12)) {
            ok = false;
            msg << "mmd(X,X) = " << self << "; ";
        }
    }
    {
        Rng rng(32);
        for (int n = 1; n <= 6 && ok; ++n) {
            for (int trial = 0; trial < 10 && ok; ++trial) {
                std::vector<double> cost(static_cast<std::size_t>(n) * n);
                for (double& c : cost) c = rng.uniform(0.0, 10.0);
                auto assign = bridge::hungarian(cost, n);
                double total = 0.0;
                for (int i = 0; i < n; ++i) total += cost[static_cast<std::size_t>(i) * n + assign[i]];
                std::vector<int> perm(n);
                for (int i = 0; i < n; ++i) perm[i] = i;
                double best = 1e300;
                do {
                    double s = 0.0;
                    for (int i = 0; i < n; ++i) s += cost[static_cast<std::size_t>(i) * n + perm[i]];
                    best = std::min(best, s);
                } while (std::next_permutation(perm.begin(), perm.end()));
                if (std::abs(total - best) > 1e-9) {
                    ok = false;
                    msg << "hungarian n=" << n << " cost " << total << " vs brute " << best << "; ";
                }
            }
        }
    }
    if (ok)
        msg << "metric analytic checks: TJ(t^2)=4 and EC(line)=4 within 1%, mmd(X,X)<1e-12, Hungarian == brute "
               "force for n<=6";
    report(7, ok, msg.str());
}

// ------------------------------------------------------------ toy maze setup
struct ToyMazeRun {
    Dataset full;
    Dataset train_side;
    std::vector<Task> held_out;
    Planner planner;
    metrics::EvalReport report;
    double mmd_noise = 0.0;
    double secs = 0.0;
};

// The end-to-end toy problem: 8 training tasks x 10 experts, 10 held-out
// tasks, 30 epochs. Obstacle layout and optimizer settings are fixed here.
ToyMazeRun run_toy_maze(bridge::Family family, std::uint64_t train_seed, int steps_per_epoch) {
    const double t0 = now_secs();
    ToyMazeRun run;
    envs::MazeSpec ms;
    ms.n_tasks = 18;
    ms.experts_per_task = 10;
    ms.length = 64;
    ms.n_obstacles = 3;
    ms.radius_min = 0.07;
    ms.radius_max = 0.14;
    Rng data_rng(7);
    run.full = envs::generate_maze_dataset(ms, data_rng);
    Rng split_rng(99);
    auto [train_side, held_out] = envs::split_tasks(run.full, 10.0 / 18.0, split_rng);
    run.train_side = std::move(train_side);
    run.held_out = std::move(held_out);
    auto [norm_ds, stats] = normalize(run.train_side);

    training::TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 32;
    tc.steps_per_epoch = steps_per_epoch;
    tc.lr = 2e-3;
    tc.seed = train_seed;
    tc.bridge.sigma = 0.1;
    tc.bridge.family = family;
    tc.threads = 2;
    tc.arch.levels = 3;
    tc.arch.widths = {16, 32, 64};
    auto [field, train_report] = training::train(norm_ds, tc);
    (void)train_report;

    run.planner.field = std::move(field);
    run.planner.bridge = tc.bridge;
    run.planner.norm = stats;
    run.planner.workspace = run.train_side.workspace;
    double dt_sum = 0.0;
    for (const auto& t : run.train_side.trajectories) dt_sum += t.dt;
    run.planner.traj_dt = dt_sum / run.train_side.size();

    metrics::EvalConfig ec;
    ec.sampler.steps = 200;
    ec.sampler.sigma = tc.bridge.sigma;
    ec.sampler.score_correction = run.planner.bridge.uses_score();
    ec.sampler.threads = 2;
    ec.seed = 3;
    run.report = metrics::evaluate(run.planner, run.full, run.held_out, ec);

    // noise baseline: raw workspace noise trajectories against the experts
    Workspace norm_ws = normalize_workspace(stats, run.full.workspace);
    Rng noise_rng(17);
    std::vector<Trajectory> noise_trajs;
    for (std::size_t i = 0; i < run.held_out.size(); ++i) {
        StateBlock nb = bridge::sample_noise(64, 2, norm_ws, noise_rng);
        Trajectory t;
        t.length = 64;
        t.dim = 2;
        t.dt = run.planner.traj_dt;
        t.q = std::move(nb.q);
        t.qd = std::move(nb.qd);
        t.qdd = std::move(nb.qdd);
        noise_trajs.push_back(denormalize_trajectory(stats, t));
    }
    run.mmd_noise = metrics::mmd_trajectories(noise_trajs, run.full.trajectories);
    run.secs = now_secs() - t0;
    return run;
}

void criterion_6(const ToyMazeRun& run) {
    const double ratio = run.report.mmd / run.mmd_noise;
    std::ostringstream msg;
    msg << "toy maze end-to-end: feasibility " << run.report.successes << "/" << run.report.total
        << " held-out tasks at 2% goal tol, mmd " << std::setprecision(4) << run.report.mmd << " vs noise "
        << run.mmd_noise << " (ratio " << std::setprecision(3) << ratio << ", need <= 0.2), " << std::fixed
        << std::setprecision(0) << run.secs << "s (< 600s)";
    report(6, run.report.successes >= 9 && ratio <= 0.2 && run.secs < 600.0, msg.str());
}

// ---------------------------------------------------------------- criterion 8
void criterion_8(double sb_seed1_mmd) {
    // soft directional comparison over 3 paired seeds; reported, not gated
    std::vector<double> sb_mmd{sb_seed1_mmd}, cfm_mmd;
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        if (seed != 1ull) sb_mmd.push_back(run_toy_maze(bridge::Family::SchrodingerBridge, seed, 40).report.mmd);
        cfm_mmd.push_back(run_toy_maze(bridge::Family::LinearCFM, seed, 40).report.mmd);
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    std::ostringstream msg;
    msg << "directional baseline ordering (seeds 1,2,3): SB mmd {";
    for (double m : sb_mmd) msg << std::setprecision(4) << m << " ";
    msg << "} median " << median(sb_mmd) << ", LinearCFM mmd {";
    for (double m : cfm_mmd) msg << m << " ";
    msg << "} median " << median(cfm_mmd) << " -> "
        << (median(sb_mmd) <= median(cfm_mmd) ? "SB <= CFM as in the reference ordering"
                                              : "ordering NOT reproduced on these seeds");
    report_soft(8, msg.str());
}

// ------------------------------------------------------- CLI-level criteria
struct Cmd {
    int exit_code = -1;
    std::string out;
};

Cmd run_cli(const std::string& args) {
    const std::string cmd = std::string(SBMP_CLI_PATH) + " " + args + " > acc_cli_out.txt 2>&1";
    const int rc = std::system(cmd.c_str());
    Cmd r;
    r.exit_code = WEXITSTATUS(rc);
    std::ifstream f("acc_cli_out.txt");
    std::stringstream ss;
    ss << f.rdbuf();
    r.out = ss.str();
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// wall-clock fields differ across runs by nature; zero them before diffing
std::string normalize_timing(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    for (const char* key : {"plan_time_mean", "plan_time_std", "wall_secs", "secs"})
        if (j.contains(key)) j[key] = 0.0;
    return j.dump();
}

std::string normalize_log(const std::string& text) {
    std::istringstream is(text);
    std::ostringstream os;
    std::string line;
    while (std::getline(is, line)) {
        nlohmann::json j = nlohmann::json::parse(line);
        if (j.contains("secs")) j["secs"] = 0.0;
        os << j.dump() << "\n";
    }
    return os.str();
}

void write_acc_config(const std::string& path) {
    std::ofstream os(path);
    os << R"({
  "dataset": {"n_obstacles": 2, "n_tasks": 3, "experts_per_task": 2, "length": 16,
               "grid_resolution": 96, "seed": 5},
  "train": {"epochs": 2, "batch_size": 4, "steps_per_epoch": 2, "seed": 9,
             "levels": 2, "widths": [4, 8], "time_embed_dim": 8, "cond_dim": 8, "kernel": 3},
  "sampler": {"steps": 8, "seed": 2},
  "eval": {"n_tasks": 3, "seed": 4}
})";
}

void criterion_9() {
    write_acc_config("acc_cfg.json");
    bool ok = true;
    std::ostringstream msg;

    if (run_cli("gen-data --config acc_cfg.json --out acc_ds1.json").exit_code != 0) ok = false;
    if (run_cli("gen-data --config acc_cfg.json --out acc_ds2.json").exit_code != 0) ok = false;
    const bool ds_same = slurp("acc_ds1.json") == slurp("acc_ds2.json");

    if (run_cli("train --config acc_cfg.json --data acc_ds1.json --out acc_m1.ckpt --log acc_l1.jsonl").exit_code != 0)
        ok = false;
    if (run_cli("train --config acc_cfg.json --data acc_ds1.json --out acc_m2.ckpt --log acc_l2.jsonl").exit_code != 0)
        ok = false;
    const bool ckpt_same = slurp("acc_m1.ckpt") == slurp("acc_m2.ckpt");
    const bool log_same = normalize_log(slurp("acc_l1.jsonl")) == normalize_log(slurp("acc_l2.jsonl"));

    if (run_cli("eval --config acc_cfg.json --ckpt acc_m1.ckpt --data acc_ds1.json --out acc_r1.json").exit_code != 0)
        ok = false;
    if (run_cli("eval --config acc_cfg.json --ckpt acc_m1.ckpt --data acc_ds1.json --out acc_r2.json").exit_code != 0)
        ok = false;
    const bool rep_same = normalize_timing(slurp("acc_r1.json")) == normalize_timing(slurp("acc_r2.json"));

    ok = ok && ds_same && ckpt_same && log_same && rep_same;
    msg << "repeat-run determinism: dataset bytes " << (ds_same ? "identical" : "DIFFER") << ", checkpoint bytes "
        << (ckpt_same ? "identical" : "DIFFER") << ", logs/report identical up to wall-clock fields "
        << ((log_same && rep_same) ? "yes" : "NO");
    report(9, ok, msg.str());
    for (const char* f : {"acc_cfg.json", "acc_ds1.json", "acc_ds2.json", "acc_m1.ckpt", "acc_m2.ckpt",
                          "acc_l1.jsonl", "acc_l2.jsonl", "acc_r1.json", "acc_r2.json", "acc_cli_out.txt"})
        std::remove(f);
}

void criterion_10() {
    bool ok = true;
    std::ostringstream msg;
    msg << "planning-time report: ";
    struct Case {
        const char* label;
        int length;
        std::string gen_args;
    };
    const std::vector<Case> cases{
        {"L=256", 256, "gen-data --preset maze --seed 5 --out acc10_ds.json --n-tasks 3 --experts-per-task 2 "
                       "--length 64 --n-obstacles 2"},
        {"L=1000", 1000, "gen-data --preset letters --seed 5 --out acc10_ds.json --demos-per-shape 2 --length 250"},
    };
    for (const Case& c : cases) {
        if (run_cli(c.gen_args).exit_code != 0) {
            ok = false;
            break;
        }
        std::ostringstream train_cmd;
        train_cmd << "train --data acc10_ds.json --out acc10.ckpt --epochs 1 --batch-size 4 --steps-per-epoch 2 "
                  << "--seed 3 --length " << c.length << " ";
        // small net so the timing harness itself stays quick
        {
            std::ofstream os("acc10_cfg.json");
            os << R"({"train": {"levels": 2, "widths": [4, 8], "time_embed_dim": 8, "cond_dim": 8, "kernel": 3}})";
        }
        train_cmd << "--config acc10_cfg.json";
        if (run_cli(train_cmd.str()).exit_code != 0) {
            ok = false;
            break;
        }
        if (run_cli("eval --ckpt acc10.ckpt --data acc10_ds.json --out acc10_rep.json --n-tasks 3 --steps 50 "
                    "--seed 2")
                .exit_code != 0) {
            ok = false;
            break;
        }
        nlohmann::json rep = nlohmann::json::parse(slurp("acc10_rep.json"));
        const double mean = rep.at("plan_time_mean").get<double>();
        const double std_ = rep.at("plan_time_std").get<double>();
        const int length = rep.at("length").get<int>();
        if (!(std::isfinite(mean) && mean > 0.0 && std::isfinite(std_) && std_ >= 0.0 && length == c.length))
            ok = false;
        msg << c.label << ": " << std::setprecision(4) << mean << " +- " << std_ << " s/trajectory;  ";
    }
    report(10, ok, msg.str());
    for (const char* f : {"acc10_ds.json", "acc10.ckpt", "acc10_rep.json", "acc10_cfg.json", "acc_cli_out.txt"})
        std::remove(f);
}

}  // namespace

int main(int argc, char** argv) {
    const bool quick = argc > 1 && std::string(argv[1]) == "--quick";
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_7();
    criterion_9();
    criterion_10();
    if (!quick) {
        ToyMazeRun sb_run = run_toy_maze(bridge::Family::SchrodingerBridge, 1, 40);
        criterion_6(sb_run);
        criterion_8(sb_run.report.mmd);
    } else {
        std::printf("SKIP criteria 6 and 8 (--quick)\n");
    }
    return failures == 0 ? 0 : 1;
}
