#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sbmp/checkpoint.hpp"
#include "sbmp/errors.hpp"
#include "sbmp/sampler.hpp"
#include "sbmp/traj_ops.hpp"
#include "sbmp/types.hpp"

namespace sbmp::metrics {

struct KernelSpec {
    double bandwidth = 0.0;  // 0: median heuristic on the pooled set

    void validate() const {
        if (bandwidth < 0.0) throw invalid_input_error("kernel bandwidth must be positive or 0 (median)");
    }
};

inline std::vector<double> flatten_positions(const Trajectory& t) { return t.q; }

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double median_bandwidth(const std::vector<std::vector<double>>& pooled) {
    std::vector<double> dists;
    dists.reserve(pooled.size() * (pooled.size() - 1) / 2);
    for (std::size_t i = 0; i < pooled.size(); ++i)
        for (std::size_t j = i + 1; j < pooled.size(); ++j) dists.push_back(std::sqrt(sq_dist(pooled[i], pooled[j])));
    if (dists.empty()) return 1.0;
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    const double med = dists[dists.size() / 2];
    return med > 0.0 ? med : 1.0;
}

}  // namespace detail

// Biased V-statistic MMD^2 with an RBF kernel on flattened positions:
//   1/M^2 sum k(g,g') - 2/(MN) sum k(g,e) + 1/N^2 sum k(e,e').
inline double mmd(const std::vector<std::vector<double>>& gen, const std::vector<std::vector<double>>& expert,
                  const KernelSpec& kernel = {}) {
    kernel.validate();
    if (gen.empty() || expert.empty()) throw invalid_input_error("mmd needs nonempty sets");
    const std::size_t dim = gen[0].size();
    for (const auto& x : gen)
        if (x.size() != dim) throw invalid_input_error("mmd inputs must share dimensions");
    for (const auto& x : expert)
        if (x.size() != dim) throw invalid_input_error("mmd inputs must share dimensions");

    double h = kernel.bandwidth;
    if (h <= 0.0) {
        std::vector<std::vector<double>> pooled = gen;
        pooled.insert(pooled.end(), expert.begin(), expert.end());
        h = detail::median_bandwidth(pooled);
    }
    const double inv2h2 = 1.0 / (2.0 * h * h);
    const double M = static_cast<double>(gen.size());
    const double N = static_cast<double>(expert.size());

    // symmetric sums computed over the upper triangle
    double kgg = gen.size() * 1.0;  // diagonal terms k(x,x)=1
    for (std::size_t i = 0; i < gen.size(); ++i)
        for (std::size_t j = i + 1; j < gen.size(); ++j)
            kgg += 2.0 * std::exp(-detail::sq_dist(gen[i], gen[j]) * inv2h2);
    double kee = expert.size() * 1.0;
    for (std::size_t i = 0; i < expert.size(); ++i)
        for (std::size_t j = i + 1; j < expert.size(); ++j)
            kee += 2.0 * std::exp(-detail::sq_dist(expert[i], expert[j]) * inv2h2);
    double kge = 0.0;
    for (const auto& g : gen)
        for (const auto& e : expert) kge += std::exp(-detail::sq_dist(g, e) * inv2h2);

    return kgg / (M * M) - 2.0 * kge / (M * N) + kee / (N * N);
}

inline double mmd_trajectories(const std::vector<Trajectory>& gen, const std::vector<Trajectory>& expert,
                               const KernelSpec& kernel = {}) {
    std::vector<std::vector<double>> a, b;
    a.reserve(gen.size());
    b.reserve(expert.size());
    for (const auto& t : gen) a.push_back(flatten_positions(t));
    for (const auto& t : expert) b.push_back(flatten_positions(t));
    return mmd(a, b, kernel);
}

// Integrated squared acceleration (left Riemann sum at the native dt).
inline double trajectory_jerkiness(const Trajectory& t) {
    double s = 0.0;
    for (int i = 0; i + 1 < t.length; ++i) {
        double n2 = 0.0;
        for (int j = 0; j < t.dim; ++j) n2 += t.acc(i, j) * t.acc(i, j);
        s += n2;
    }
    return s * t.dt;
}

// Integrated squared velocity (total kinetic energy up to constants).
inline double energy_consumption(const Trajectory& t) {
    double s = 0.0;
    for (int i = 0; i + 1 < t.length; ++i) {
        double n2 = 0.0;
        for (int j = 0; j < t.dim; ++j) n2 += t.vel(i, j) * t.vel(i, j);
        s += n2;
    }
    return s * t.dt;
}

struct FeasibilityVerdict {
    bool goal_reached = false;
    bool collision_free = false;

    bool success() const { return goal_reached && collision_free; }
};

inline double default_goal_tolerance(const Workspace& w) { return 0.02 * w.diagonal(); }

// Goal attainment within tolerance plus continuous collision checking:
// obstacle checks are spaced at most a quarter of the smallest radius apart
// along every segment; the axis-aligned bounds only need the vertices.
inline FeasibilityVerdict feasibility(const Trajectory& traj, const Task& task, const Workspace& workspace,
                                      double goal_tol) {
    if (traj.dim != workspace.dim() || task.dim() != traj.dim)
        throw invalid_input_error("feasibility dimension mismatch");
    FeasibilityVerdict v;
    double dist2 = 0.0;
    for (int j = 0; j < traj.dim; ++j) {
        const double d = traj.pos(traj.length - 1, j) - task.goal[j];
        dist2 += d * d;
    }
    v.goal_reached = std::sqrt(dist2) <= goal_tol;

    double r_min = 0.0;
    for (const Circle& c : workspace.obstacles)
        r_min = r_min == 0.0 ? c.radius : std::min(r_min, c.radius);
    const double max_spacing = workspace.obstacles.empty() ? 0.0 : 0.25 * r_min;

    v.collision_free = true;
    std::vector<double> p(traj.dim);
    for (int i = 0; i < traj.length && v.collision_free; ++i) {
        for (int j = 0; j < traj.dim; ++j) p[j] = traj.pos(i, j);
        if (!workspace.contains(p.data()) || workspace.in_obstacle(p.data())) v.collision_free = false;
    }
    if (v.collision_free && !workspace.obstacles.empty()) {
        for (int i = 0; i + 1 < traj.length && v.collision_free; ++i) {
            double seg2 = 0.0;
            for (int j = 0; j < traj.dim; ++j) {
                const double d = traj.pos(i + 1, j) - traj.pos(i, j);
                seg2 += d * d;
            }
            const double seg = std::sqrt(seg2);
            const int nsub = std::max(1, static_cast<int>(std::ceil(seg / max_spacing)));
            for (int s = 1; s < nsub && v.collision_free; ++s) {
                const double f = static_cast<double>(s) / nsub;
                for (int j = 0; j < traj.dim; ++j) p[j] = (1.0 - f) * traj.pos(i, j) + f * traj.pos(i + 1, j);
                if (workspace.in_obstacle(p.data())) v.collision_free = false;
            }
        }
    }
    return v;
}

struct EvalReport {
    double mmd = 0.0;
    double tj_mean = 0.0, tj_std = 0.0;
    double ec_mean = 0.0, ec_std = 0.0;
    int successes = 0, total = 0;
    std::vector<FeasibilityVerdict> verdicts;
    double plan_time_mean = 0.0, plan_time_std = 0.0;
    int length = 0;
    double goal_tol = 0.0;
};

struct EvalConfig {
    sampler::SamplerConfig sampler;
    KernelSpec kernel;
    double goal_tol = 0.0;  // 0: 2% of the workspace diagonal
    std::uint64_t seed = 0;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());  // population std
    return {mean, std::sqrt(var)};
}

}  // namespace detail

// Run the planner over held-out tasks and assemble the full report. Items
// whose sampling diverged count as failed verdicts and are excluded from
// the distribution metrics.
inline EvalReport evaluate(const Planner& planner, const Dataset& dataset, const std::vector<Task>& eval_tasks,
                           const EvalConfig& cfg) {
    if (eval_tasks.empty()) throw invalid_input_error("evaluate needs at least one task");
    EvalReport report;
    report.length = planner.field.L;
    report.goal_tol = cfg.goal_tol > 0.0 ? cfg.goal_tol : default_goal_tolerance(dataset.workspace);

    Rng rng(cfg.seed);
    const auto outcomes = sampler::batch_generate(planner, eval_tasks, cfg.sampler, rng);

    std::vector<Trajectory> generated;
    std::vector<double> times, tjs, ecs;
    report.total = static_cast<int>(outcomes.size());
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (!outcomes[i].ok) {
            report.verdicts.push_back({});
            continue;
        }
        const auto& r = outcomes[i].result;
        FeasibilityVerdict v = feasibility(r.trajectory, eval_tasks[i], dataset.workspace, report.goal_tol);
        report.verdicts.push_back(v);
        if (v.success()) ++report.successes;
        generated.push_back(r.trajectory);
        times.push_back(r.wall_secs);
        tjs.push_back(trajectory_jerkiness(r.trajectory));
        ecs.push_back(energy_consumption(r.trajectory));
    }

    if (!generated.empty()) {
        std::vector<Trajectory> experts;
        experts.reserve(dataset.trajectories.size());
        for (const Trajectory& t : dataset.trajectories)
            experts.push_back(t.length == planner.field.L ? t : resample(t, planner.field.L));
        report.mmd = mmd_trajectories(generated, experts, cfg.kernel);
        auto [tjm, tjs_] = detail::mean_std(tjs);
        auto [ecm, ecs_] = detail::mean_std(ecs);
        auto [ptm, pts_] = detail::mean_std(times);
        report.tj_mean = tjm;
        report.tj_std = tjs_;
        report.ec_mean = ecm;
        report.ec_std = ecs_;
        report.plan_time_mean = ptm;
        report.plan_time_std = pts_;
    }
    return report;
}

}  // namespace sbmp::metrics
