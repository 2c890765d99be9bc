#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "sbmp/errors.hpp"
#include "sbmp/types.hpp"

namespace sbmp {

// Central differences in the interior, first-order one-sided at the ends.
inline std::vector<double> difference_rows(const std::vector<double>& q, int length, int dim, double dt) {
    std::vector<double> out(q.size());
    const double inv = 1.0 / dt;
    const double inv2 = 0.5 / dt;
    for (int j = 0; j < dim; ++j) {
        out[j] = (q[dim + j] - q[j]) * inv;
        const std::size_t last = static_cast<std::size_t>(length - 1) * dim;
        out[last + j] = (q[last + j] - q[last - dim + j]) * inv;
    }
    for (int i = 1; i + 1 < length; ++i) {
        const std::size_t r = static_cast<std::size_t>(i) * dim;
        for (int j = 0; j < dim; ++j) out[r + j] = (q[r + dim + j] - q[r - dim + j]) * inv2;
    }
    return out;
}

inline std::pair<std::vector<double>, std::vector<double>> finite_differences(const std::vector<double>& q,
                                                                              int length, int dim, double dt) {
    if (length < 3) throw invalid_input_error("finite_differences needs L >= 3");
    if (dim < 1 || q.size() != static_cast<std::size_t>(length) * dim)
        throw invalid_input_error("finite_differences shape mismatch");
    if (dt <= 0.0) throw invalid_input_error("finite_differences needs dt > 0");
    if (!all_finite(q)) throw invalid_input_error("finite_differences on non-finite input");
    std::vector<double> qd = difference_rows(q, length, dim, dt);
    std::vector<double> qdd = difference_rows(qd, length, dim, dt);
    return {std::move(qd), std::move(qdd)};
}

inline Trajectory make_trajectory(std::vector<double> q, int length, int dim, double dt) {
    Trajectory t;
    t.length = length;
    t.dim = dim;
    t.dt = dt;
    t.q = std::move(q);
    auto [qd, qdd] = finite_differences(t.q, length, dim, dt);
    t.qd = std::move(qd);
    t.qdd = std::move(qdd);
    t.derived_derivatives = true;
    return t;
}

// Linear interpolation of q onto a uniform grid of L_new samples. Duration
// is preserved; derivatives are recomputed by finite differences.
inline Trajectory resample(const Trajectory& traj, int length_new) {
    if (length_new < 2) throw invalid_input_error("resample needs L_new >= 2");
    validate_trajectory(traj);
    const double total = traj.duration();
    const int d = traj.dim;
    std::vector<double> q(static_cast<std::size_t>(length_new) * d);
    for (int i = 0; i < length_new; ++i) {
        const double u = static_cast<double>(i) / (length_new - 1) * (traj.length - 1);
        int k = static_cast<int>(std::floor(u));
        if (k >= traj.length - 1) k = traj.length - 2;
        const double frac = u - k;
        for (int j = 0; j < d; ++j)
            q[static_cast<std::size_t>(i) * d + j] = (1.0 - frac) * traj.pos(k, j) + frac * traj.pos(k + 1, j);
    }
    const double dt_new = total / (length_new - 1);
    if (length_new >= 3) return make_trajectory(std::move(q), length_new, d, dt_new);
    Trajectory t;
    t.length = length_new;
    t.dim = d;
    t.dt = dt_new;
    t.q = std::move(q);
    t.qd.assign(t.q.size(), 0.0);
    t.qdd.assign(t.q.size(), 0.0);
    t.derived_derivatives = true;
    return t;
}

inline NormStats norm_stats_for(const Workspace& w) {
    validate_workspace(w);
    NormStats s;
    const int d = w.dim();
    s.center.resize(d);
    s.half_extent.resize(d);
    for (int j = 0; j < d; ++j) {
        s.center[j] = 0.5 * (w.lo[j] + w.hi[j]);
        s.half_extent[j] = 0.5 * (w.hi[j] - w.lo[j]);
        if (s.half_extent[j] <= 0.0) throw invalid_input_error("degenerate workspace bounds");
    }
    return s;
}

inline void normalize_point(const NormStats& s, double* p) {
    for (int j = 0; j < s.dim(); ++j) p[j] = (p[j] - s.center[j]) / s.half_extent[j];
}

inline void denormalize_point(const NormStats& s, double* p) {
    for (int j = 0; j < s.dim(); ++j) p[j] = p[j] * s.half_extent[j] + s.center[j];
}

inline Task normalize_task(const NormStats& s, Task t) {
    normalize_point(s, t.start.data());
    normalize_point(s, t.goal.data());
    return t;
}

inline Trajectory normalize_trajectory(const NormStats& s, Trajectory t) {
    const int d = t.dim;
    for (int i = 0; i < t.length; ++i) {
        for (int j = 0; j < d; ++j) {
            t.at(t.q, i, j) = (t.pos(i, j) - s.center[j]) / s.half_extent[j];
            t.at(t.qd, i, j) = t.vel(i, j) / s.half_extent[j];
            t.at(t.qdd, i, j) = t.acc(i, j) / s.half_extent[j];
        }
    }
    return t;
}

inline Trajectory denormalize_trajectory(const NormStats& s, Trajectory t) {
    const int d = t.dim;
    for (int i = 0; i < t.length; ++i) {
        for (int j = 0; j < d; ++j) {
            t.at(t.q, i, j) = t.pos(i, j) * s.half_extent[j] + s.center[j];
            t.at(t.qd, i, j) = t.vel(i, j) * s.half_extent[j];
            t.at(t.qdd, i, j) = t.acc(i, j) * s.half_extent[j];
        }
    }
    return t;
}

inline Workspace normalize_workspace(const NormStats& s, Workspace w) {
    const int d = w.dim();
    if (!w.obstacles.empty()) {
        for (int j = 1; j < d; ++j)
            if (std::abs(s.half_extent[j] - s.half_extent[0]) > 1e-12 * s.half_extent[0])
                throw invalid_input_error("circular obstacles require isotropic bounds to normalize");
    }
    for (int j = 0; j < d; ++j) {
        w.lo[j] = -1.0;
        w.hi[j] = 1.0;
    }
    for (Circle& c : w.obstacles) {
        normalize_point(s, c.center.data());
        c.radius /= s.half_extent[0];
    }
    return w;
}

// Maps the whole dataset so bounds become [-1,1]^d.
inline std::pair<Dataset, NormStats> normalize(const Dataset& ds) {
    validate_dataset(ds);
    NormStats s = norm_stats_for(ds.workspace);
    Dataset out;
    out.workspace = normalize_workspace(s, ds.workspace);
    out.trajectories.reserve(ds.trajectories.size());
    out.tasks.reserve(ds.tasks.size());
    for (const Trajectory& t : ds.trajectories) out.trajectories.push_back(normalize_trajectory(s, t));
    for (const Task& t : ds.tasks) out.tasks.push_back(normalize_task(s, t));
    return {std::move(out), std::move(s)};
}

}  // namespace sbmp
