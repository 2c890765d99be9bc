#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <utility>
#include <vector>

#include "sbmp/errors.hpp"
#include "sbmp/metrics.hpp"
#include "sbmp/rng.hpp"
#include "sbmp/spline.hpp"
#include "sbmp/traj_ops.hpp"
#include "sbmp/types.hpp"

namespace sbmp::envs {

// 2-D point-mass maze generation. Experts come from a grid-search oracle:
// shortest path on a fine occupancy grid, random shortcutting, corner
// cutting plus cubic-spline smoothing, and a min-jerk time profile with
// zero boundary velocity/acceleration.
struct MazeSpec {
    std::vector<double> lo{-1.0, -1.0};
    std::vector<double> hi{1.0, 1.0};
    int n_obstacles = 4;
    double radius_min = 0.08;
    double radius_max = 0.18;
    int n_tasks = 8;
    int experts_per_task = 10;
    int length = 64;
    double min_task_separation = 0.3;  // fraction of the diagonal
    int grid_resolution = 256;
    double inflation_frac = 0.02;  // obstacle inflation during planning, fraction of diagonal
    int max_retries = 64;
    double nominal_speed = 0.35;  // workspace units per second
    double min_duration = 0.8;
    double jitter_frac = 0.04;  // waypoint jitter as a fraction of the diagonal

    void validate() const {
        if (lo.size() != 2 || hi.size() != 2) throw invalid_input_error("maze is 2-D");
        if (lo[0] >= hi[0] || lo[1] >= hi[1]) throw invalid_input_error("maze bounds need min < max");
        if (n_obstacles < 0) throw invalid_input_error("n_obstacles must be >= 0");
        if (n_obstacles > 0 && (radius_min <= 0.0 || radius_max < radius_min))
            throw invalid_input_error("bad obstacle radius range");
        if (n_tasks < 1 || experts_per_task < 1) throw invalid_input_error("need tasks and experts");
        if (length < 8) throw invalid_input_error("maze trajectory length too small");
        if (grid_resolution < 32) throw invalid_input_error("grid resolution too coarse");
    }
};

namespace detail {

struct Grid {
    int res = 0;
    std::vector<char> blocked;  // res x res, row = y index
    double x0 = 0, y0 = 0, cell = 0;

    int idx(int ix, int iy) const { return iy * res + ix; }

    void point_of(int ix, int iy, double* p) const {
        p[0] = x0 + (ix + 0.5) * cell;
        p[1] = y0 + (iy + 0.5) * cell;
    }

    int cell_of(double x, double lo) const {
        int i = static_cast<int>((x - lo) / cell);
        return std::clamp(i, 0, res - 1);
    }
};

inline Grid build_grid(const Workspace& w, int res, double inflation) {
    Grid g;
    g.res = res;
    g.x0 = w.lo[0];
    g.y0 = w.lo[1];
    g.cell = std::max(w.hi[0] - w.lo[0], w.hi[1] - w.lo[1]) / res;
    g.blocked.assign(static_cast<std::size_t>(res) * res, 0);
    double p[2];
    for (int iy = 0; iy < res; ++iy)
        for (int ix = 0; ix < res; ++ix) {
            g.point_of(ix, iy, p);
            if (p[0] > w.hi[0] || p[1] > w.hi[1]) {
                g.blocked[g.idx(ix, iy)] = 1;
                continue;
            }
            for (const Circle& c : w.obstacles) {
                const double dx = p[0] - c.center[0], dy = p[1] - c.center[1];
                const double r = c.radius + inflation;
                if (dx * dx + dy * dy < r * r) {
                    g.blocked[g.idx(ix, iy)] = 1;
                    break;
                }
            }
        }
    return g;
}

inline bool grid_connected(const Grid& g) {
    int start = -1;
    int free_count = 0;
    for (int i = 0; i < g.res * g.res; ++i) {
        if (!g.blocked[i]) {
            ++free_count;
            if (start < 0) start = i;
        }
    }
    if (start < 0) return false;
    std::vector<char> seen(g.blocked.size(), 0);
    std::vector<int> stack{start};
    seen[start] = 1;
    int reached = 0;
    while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        ++reached;
        const int ix = cur % g.res, iy = cur / g.res;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const int nx = ix + dx, ny = iy + dy;
                if (nx < 0 || ny < 0 || nx >= g.res || ny >= g.res) continue;
                const int ni = g.idx(nx, ny);
                if (!g.blocked[ni] && !seen[ni]) {
                    seen[ni] = 1;
                    stack.push_back(ni);
                }
            }
    }
    return reached == free_count;
}

// A* over the 8-connected grid; returns cell index path (empty on failure).
inline std::vector<int> astar(const Grid& g, int start, int goal) {
    if (g.blocked[start] || g.blocked[goal]) return {};
    const int n = g.res * g.res;
    const double inf = 1e300;
    std::vector<double> dist(n, inf);
    std::vector<int> parent(n, -1);
    auto heuristic = [&](int i) {
        const double dx = static_cast<double>(i % g.res - goal % g.res);
        const double dy = static_cast<double>(i / g.res - goal / g.res);
        return std::sqrt(dx * dx + dy * dy);
    };
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> open;
    dist[start] = 0.0;
    open.push({heuristic(start), start});
    const double diag = std::sqrt(2.0);
    while (!open.empty()) {
        const auto [f, cur] = open.top();
        open.pop();
        if (cur == goal) break;
        if (f > dist[cur] + heuristic(cur) + 1e-12) continue;
        const int ix = cur % g.res, iy = cur / g.res;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const int nx = ix + dx, ny = iy + dy;
                if (nx < 0 || ny < 0 || nx >= g.res || ny >= g.res) continue;
                const int ni = g.idx(nx, ny);
                if (g.blocked[ni]) continue;
                const double nd = dist[cur] + ((dx == 0 || dy == 0) ? 1.0 : diag);
                if (nd < dist[ni]) {
                    dist[ni] = nd;
                    parent[ni] = cur;
                    open.push({nd + heuristic(ni), ni});
                }
            }
    }
    if (dist[goal] == inf) return {};
    std::vector<int> path;
    for (int cur = goal; cur != -1; cur = parent[cur]) path.push_back(cur);
    std::reverse(path.begin(), path.end());
    return path;
}

inline bool segment_free(const Grid& g, const double* a, const double* b, const Workspace& w, double inflation) {
    double len = std::hypot(b[0] - a[0], b[1] - a[1]);
    const int nsub = std::max(2, static_cast<int>(std::ceil(len / (0.5 * g.cell))));
    for (int s = 0; s <= nsub; ++s) {
        const double f = static_cast<double>(s) / nsub;
        const double p[2] = {(1 - f) * a[0] + f * b[0], (1 - f) * a[1] + f * b[1]};
        if (p[0] < w.lo[0] || p[0] > w.hi[0] || p[1] < w.lo[1] || p[1] > w.hi[1]) return false;
        for (const Circle& c : w.obstacles) {
            const double dx = p[0] - c.center[0], dy = p[1] - c.center[1];
            const double r = c.radius + inflation;
            if (dx * dx + dy * dy < r * r) return false;
        }
    }
    return true;
}

}  // namespace detail

// One expert for (start, goal). Diversity across experts comes from random
// waypoint jitter and randomized shortcutting before smoothing.
inline Trajectory plan_expert(const Workspace& w, const detail::Grid& grid, const Task& task,
                              const MazeSpec& spec, Rng& rng) {
    const double diag = w.diagonal();
    const double inflation = spec.inflation_frac * diag;
    const int s = grid.idx(grid.cell_of(task.start[0], w.lo[0]), grid.cell_of(task.start[1], w.lo[1]));
    const int g = grid.idx(grid.cell_of(task.goal[0], w.lo[0]), grid.cell_of(task.goal[1], w.lo[1]));
    std::vector<int> cells = detail::astar(grid, s, g);
    if (cells.empty()) throw generation_error("no grid path between task endpoints");

    for (int attempt = 0; attempt < 8; ++attempt) {
        const double jitter = spec.jitter_frac * diag * std::pow(0.5, attempt);
        // decimated waypoints with exact endpoints
        std::vector<double> pts;
        pts.push_back(task.start[0]);
        pts.push_back(task.start[1]);
        for (std::size_t i = 3; i + 3 < cells.size(); i += 3) {
            double p[2];
            grid.point_of(cells[i] % grid.res, cells[i] / grid.res, p);
            pts.push_back(p[0]);
            pts.push_back(p[1]);
        }
        pts.push_back(task.goal[0]);
        pts.push_back(task.goal[1]);
        int n = static_cast<int>(pts.size()) / 2;

        // jitter interior waypoints inside the inflated-free region
        for (int i = 1; i + 1 < n; ++i) {
            for (int t = 0; t < 4; ++t) {
                const double cand[2] = {pts[2 * i] + jitter * rng.normal(), pts[2 * i + 1] + jitter * rng.normal()};
                bool ok = cand[0] > w.lo[0] && cand[0] < w.hi[0] && cand[1] > w.lo[1] && cand[1] < w.hi[1];
                for (const Circle& c : w.obstacles) {
                    const double dx = cand[0] - c.center[0], dy = cand[1] - c.center[1];
                    const double r = c.radius + inflation;
                    if (dx * dx + dy * dy < r * r) ok = false;
                }
                if (ok) {
                    pts[2 * i] = cand[0];
                    pts[2 * i + 1] = cand[1];
                    break;
                }
            }
        }

        // randomized shortcutting
        for (int it = 0; it < 40 && n > 3; ++it) {
            const int i = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n - 1));
            const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n));
            const int a = std::min(i, j), b = std::max(i, j);
            if (b - a < 2) continue;
            if (detail::segment_free(grid, &pts[2 * a], &pts[2 * b], w, inflation)) {
                pts.erase(pts.begin() + 2 * (a + 1), pts.begin() + 2 * b);
                n = static_cast<int>(pts.size()) / 2;
            }
        }

        // repair: every remaining segment must clear the inflated obstacles
        bool segments_ok = true;
        for (int i = 0; i + 1 < n; ++i)
            if (!detail::segment_free(grid, &pts[2 * i], &pts[2 * (i + 1)], w, inflation)) segments_ok = false;
        if (!segments_ok) continue;

        std::vector<double> smooth = chaikin(pts, n, 2);
        smooth = chaikin(smooth, static_cast<int>(smooth.size()) / 2, 2);
        CubicSpline spline = CubicSpline::fit(smooth, static_cast<int>(smooth.size()) / 2, 2);
        double arc = 0.0;
        std::vector<double> q = sample_min_jerk(spline, spec.length, &arc);
        // pin the endpoints exactly
        q[0] = task.start[0];
        q[1] = task.start[1];
        q[static_cast<std::size_t>(spec.length - 1) * 2] = task.goal[0];
        q[static_cast<std::size_t>(spec.length - 1) * 2 + 1] = task.goal[1];
        const double duration = std::max(spec.min_duration, arc / spec.nominal_speed);
        Trajectory traj = make_trajectory(std::move(q), spec.length, 2, duration / (spec.length - 1));

        const auto verdict = metrics::feasibility(traj, task, w, 1e-9);
        if (verdict.success()) return traj;
    }
    throw generation_error("expert smoothing kept colliding; task too tight");
}

inline Dataset generate_maze_dataset(const MazeSpec& spec, Rng& rng) {
    spec.validate();
    Workspace w;
    w.lo = spec.lo;
    w.hi = spec.hi;
    const double diag = w.diagonal();

    detail::Grid grid;
    Rng obs_rng = rng.split("obstacles");
    bool ok = false;
    for (int attempt = 0; attempt < spec.max_retries && !ok; ++attempt) {
        w.obstacles.clear();
        for (int i = 0; i < spec.n_obstacles; ++i) {
            Circle c;
            c.radius = obs_rng.uniform(spec.radius_min, spec.radius_max);
            c.center = {obs_rng.uniform(w.lo[0] + c.radius, w.hi[0] - c.radius),
                        obs_rng.uniform(w.lo[1] + c.radius, w.hi[1] - c.radius)};
            w.obstacles.push_back(std::move(c));
        }
        grid = detail::build_grid(w, spec.grid_resolution, spec.inflation_frac * diag);
        ok = detail::grid_connected(grid);
    }
    if (!ok) throw generation_error("could not sample obstacles leaving a connected free space");

    Dataset ds;
    ds.workspace = w;
    Rng task_rng = rng.split("tasks");
    const double wall_margin = 0.03 * diag;
    for (int ti = 0; ti < spec.n_tasks; ++ti) {
        Task task;
        bool found = false;
        for (int attempt = 0; attempt < spec.max_retries * 4 && !found; ++attempt) {
            auto sample_free = [&]() -> std::vector<double> {
                for (int tries = 0; tries < 256; ++tries) {
                    std::vector<double> p{task_rng.uniform(w.lo[0] + wall_margin, w.hi[0] - wall_margin),
                                          task_rng.uniform(w.lo[1] + wall_margin, w.hi[1] - wall_margin)};
                    const int ci = grid.idx(grid.cell_of(p[0], w.lo[0]), grid.cell_of(p[1], w.lo[1]));
                    if (!grid.blocked[ci]) return p;
                }
                throw generation_error("free space too small to sample task endpoints");
            };
            task.start = sample_free();
            task.goal = sample_free();
            double dist = std::hypot(task.goal[0] - task.start[0], task.goal[1] - task.start[1]);
            if (dist < spec.min_task_separation * diag) continue;
            const int s = grid.idx(grid.cell_of(task.start[0], w.lo[0]), grid.cell_of(task.start[1], w.lo[1]));
            const int g = grid.idx(grid.cell_of(task.goal[0], w.lo[0]), grid.cell_of(task.goal[1], w.lo[1]));
            found = !detail::astar(grid, s, g).empty();
        }
        if (!found) throw generation_error("could not sample a connected task pair");

        for (int e = 0; e < spec.experts_per_task; ++e) {
            Rng expert_rng = rng.split("expert", static_cast<std::uint64_t>(ti) * 1000 + e);
            Trajectory traj = plan_expert(w, grid, task, spec, expert_rng);
            Task stored;
            stored.start = traj.start();
            stored.goal = traj.goal();
            ds.tasks.push_back(std::move(stored));
            ds.trajectories.push_back(std::move(traj));
        }
    }
    validate_dataset(ds);
    return ds;
}

// Synthetic handwriting-like dataset: a few stroke shapes, several jittered
// demonstrations each, long horizons after resampling.
struct LettersSpec {
    int demos_per_shape = 7;
    int length = 1000;
    double jitter = 0.04;

    void validate() const {
        if (demos_per_shape < 1) throw invalid_input_error("need at least one demo per shape");
        if (length < 8) throw invalid_input_error("letters trajectory length too small");
    }
};

inline Dataset generate_letters_dataset(const LettersSpec& spec, Rng& rng) {
    spec.validate();
    Dataset ds;
    ds.workspace.lo = {-1.0, -1.0};
    ds.workspace.hi = {1.0, 1.0};

    // control polylines of three stroke shapes, roughly letter-like
    const std::vector<std::vector<double>> shapes = {
        // C: open arc
        {0.55, 0.62, 0.05, 0.80, -0.45, 0.62, -0.62, 0.12, -0.45, -0.38, 0.05, -0.56, 0.55, -0.38},
        // S: two stacked arcs
        {0.45, 0.70, -0.05, 0.80, -0.42, 0.58, -0.15, 0.22, 0.25, -0.02, 0.42, -0.35, 0.00, -0.62, -0.45, -0.52},
        // J: bar and hook
        {-0.10, 0.75, 0.30, 0.75, 0.30, 0.10, 0.28, -0.40, -0.02, -0.62, -0.35, -0.50},
    };

    int demo_id = 0;
    for (std::size_t si = 0; si < shapes.size(); ++si) {
        for (int dmo = 0; dmo < spec.demos_per_shape; ++dmo, ++demo_id) {
            Rng demo_rng = rng.split("letter", static_cast<std::uint64_t>(demo_id));
            std::vector<double> pts = shapes[si];
            const int n = static_cast<int>(pts.size()) / 2;
            const double offset[2] = {0.25 * demo_rng.normal() * spec.jitter / 0.04,
                                      0.25 * demo_rng.normal() * spec.jitter / 0.04};
            for (int i = 0; i < n; ++i) {
                pts[2 * i] += spec.jitter * demo_rng.normal() + offset[0] * 0.3;
                pts[2 * i + 1] += spec.jitter * demo_rng.normal() + offset[1] * 0.3;
                pts[2 * i] = std::clamp(pts[2 * i], -0.95, 0.95);
                pts[2 * i + 1] = std::clamp(pts[2 * i + 1], -0.95, 0.95);
            }
            CubicSpline spline = CubicSpline::fit(pts, n, 2);
            double arc = 0.0;
            std::vector<double> q = sample_min_jerk(spline, spec.length, &arc);
            const double duration = std::max(1.5, arc / 0.5);
            Trajectory traj = make_trajectory(std::move(q), spec.length, 2, duration / (spec.length - 1));
            Task task;
            task.start = traj.start();
            task.goal = traj.goal();
            ds.tasks.push_back(std::move(task));
            ds.trajectories.push_back(std::move(traj));
        }
    }
    validate_dataset(ds);
    return ds;
}

// Disjoint split by task identity; the evaluation side keeps tasks only
// (generation starts from noise, never from held-out trajectories).
inline std::pair<Dataset, std::vector<Task>> split_tasks(const Dataset& ds, double held_out_fraction, Rng& rng) {
    if (!(held_out_fraction > 0.0 && held_out_fraction < 1.0))
        throw invalid_input_error("held_out_fraction must lie in (0,1)");
    validate_dataset(ds);

    std::vector<Task> unique_tasks;
    std::vector<int> group(ds.size(), -1);
    for (int i = 0; i < ds.size(); ++i) {
        for (std::size_t u = 0; u < unique_tasks.size(); ++u) {
            if (unique_tasks[u].start == ds.tasks[i].start && unique_tasks[u].goal == ds.tasks[i].goal) {
                group[i] = static_cast<int>(u);
                break;
            }
        }
        if (group[i] < 0) {
            group[i] = static_cast<int>(unique_tasks.size());
            unique_tasks.push_back(ds.tasks[i]);
        }
    }
    const int n_unique = static_cast<int>(unique_tasks.size());
    int n_eval = static_cast<int>(std::lround(held_out_fraction * n_unique));
    if (n_eval < 1 || n_eval >= n_unique)
        throw invalid_input_error("held_out_fraction leaves an empty split side");

    std::vector<int> order(n_unique);
    for (int i = 0; i < n_unique; ++i) order[i] = i;
    for (int i = n_unique - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
        std::swap(order[i], order[j]);
    }
    std::vector<char> is_eval(n_unique, 0);
    for (int i = 0; i < n_eval; ++i) is_eval[order[i]] = 1;

    Dataset train;
    train.workspace = ds.workspace;
    std::vector<Task> eval_tasks;
    for (int u = 0; u < n_unique; ++u)
        if (is_eval[u]) eval_tasks.push_back(unique_tasks[u]);
    for (int i = 0; i < ds.size(); ++i) {
        if (!is_eval[group[i]]) {
            train.trajectories.push_back(ds.trajectories[i]);
            train.tasks.push_back(ds.tasks[i]);
        }
    }
    if (train.trajectories.empty()) throw invalid_input_error("held_out_fraction leaves an empty training side");
    return {std::move(train), std::move(eval_tasks)};
}

}  // namespace sbmp::envs
