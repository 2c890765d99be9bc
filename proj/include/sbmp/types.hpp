#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sbmp/errors.hpp"

namespace sbmp {

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// A fixed-length motion: positions, velocities, accelerations sampled on a
// uniform time grid. Row-major L x d; duration is (length-1)*dt.
struct Trajectory {
    int length = 0;
    int dim = 0;
    double dt = 0.0;
    std::vector<double> q;    // positions, L x d
    std::vector<double> qd;   // velocities
    std::vector<double> qdd;  // accelerations
    // True when qd/qdd were finite-differenced from q rather than recorded.
    bool derived_derivatives = false;

    double& at(std::vector<double>& a, int i, int j) { return a[static_cast<std::size_t>(i) * dim + j]; }
    double pos(int i, int j) const { return q[static_cast<std::size_t>(i) * dim + j]; }
    double vel(int i, int j) const { return qd[static_cast<std::size_t>(i) * dim + j]; }
    double acc(int i, int j) const { return qdd[static_cast<std::size_t>(i) * dim + j]; }

    double duration() const { return (length - 1) * dt; }

    std::vector<double> start() const { return {q.begin(), q.begin() + dim}; }
    std::vector<double> goal() const {
        return {q.end() - dim, q.end()};
    }
};

inline void validate_trajectory(const Trajectory& t) {
    if (t.length < 2 || t.dim < 1) throw invalid_input_error("trajectory needs L >= 2 and d >= 1");
    if (t.dt <= 0.0) throw invalid_input_error("trajectory dt must be positive");
    const std::size_t n = static_cast<std::size_t>(t.length) * t.dim;
    if (t.q.size() != n || t.qd.size() != n || t.qdd.size() != n)
        throw invalid_input_error("trajectory q/qd/qdd must share shape L x d");
    if (!all_finite(t.q) || !all_finite(t.qd) || !all_finite(t.qdd))
        throw invalid_input_error("trajectory contains non-finite entries");
}

// A start-goal conditioning pair.
struct Task {
    std::vector<double> start;
    std::vector<double> goal;

    int dim() const { return static_cast<int>(start.size()); }
};

struct Circle {
    std::vector<double> center;
    double radius = 0.0;
};

// Axis-aligned bounds plus circular obstacles.
struct Workspace {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<Circle> obstacles;

    int dim() const { return static_cast<int>(lo.size()); }

    double diagonal() const {
        double s = 0.0;
        for (int j = 0; j < dim(); ++j) s += (hi[j] - lo[j]) * (hi[j] - lo[j]);
        return std::sqrt(s);
    }

    bool contains(const double* p) const {
        for (int j = 0; j < dim(); ++j)
            if (p[j] < lo[j] || p[j] > hi[j]) return false;
        return true;
    }

    bool in_obstacle(const double* p) const {
        for (const Circle& c : obstacles) {
            double s = 0.0;
            for (int j = 0; j < dim(); ++j) s += (p[j] - c.center[j]) * (p[j] - c.center[j]);
            if (s < c.radius * c.radius) return true;
        }
        return false;
    }

    bool free_at(const double* p) const { return contains(p) && !in_obstacle(p); }
};

inline void validate_workspace(const Workspace& w) {
    if (w.lo.empty() || w.lo.size() != w.hi.size())
        throw invalid_input_error("workspace bounds must be nonempty and consistent");
    for (int j = 0; j < w.dim(); ++j)
        if (!(w.lo[j] < w.hi[j])) throw invalid_input_error("workspace bounds need min < max per dimension");
    for (const Circle& c : w.obstacles) {
        if (static_cast<int>(c.center.size()) != w.dim())
            throw invalid_input_error("obstacle center dimension mismatch");
        if (!all_finite(c.center) || !std::isfinite(c.radius))
            throw invalid_input_error("obstacle with non-finite values");
        if (c.radius <= 0.0) throw invalid_input_error("obstacle radius must be positive");
    }
}

inline void validate_task(const Task& t, const Workspace* w = nullptr) {
    if (t.start.empty() || t.start.size() != t.goal.size())
        throw invalid_input_error("task start/goal dimension mismatch");
    if (!all_finite(t.start) || !all_finite(t.goal)) throw invalid_input_error("task with non-finite values");
    bool same = true;
    for (std::size_t j = 0; j < t.start.size(); ++j)
        if (t.start[j] != t.goal[j]) same = false;
    if (same) throw invalid_input_error("task start equals goal");
    if (w) {
        if (w->dim() != t.dim()) throw invalid_input_error("task dimension does not match workspace");
        if (!w->contains(t.start.data()) || !w->contains(t.goal.data()))
            throw invalid_input_error("task endpoints outside workspace bounds");
    }
}

// Expert demonstrations with one task per trajectory (trajectory endpoints).
struct Dataset {
    Workspace workspace;
    std::vector<Trajectory> trajectories;
    std::vector<Task> tasks;

    int dim() const { return workspace.dim(); }
    int size() const { return static_cast<int>(trajectories.size()); }
};

inline void validate_dataset(const Dataset& ds) {
    validate_workspace(ds.workspace);
    if (ds.trajectories.empty()) throw invalid_input_error("dataset has no trajectories");
    if (ds.trajectories.size() != ds.tasks.size())
        throw invalid_input_error("dataset needs one task per trajectory");
    for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
        const Trajectory& t = ds.trajectories[i];
        validate_trajectory(t);
        if (t.dim != ds.dim()) throw invalid_input_error("trajectory dimension does not match workspace");
        validate_task(ds.tasks[i], &ds.workspace);
        for (int j = 0; j < t.dim; ++j) {
            if (t.pos(0, j) != ds.tasks[i].start[j] || t.pos(t.length - 1, j) != ds.tasks[i].goal[j])
                throw invalid_input_error("task endpoints must equal trajectory endpoints");
        }
    }
}

// Affine map taking workspace bounds to [-1,1]^d. Velocities and
// accelerations are scaled by the half-extent only (time axis untouched).
struct NormStats {
    std::vector<double> center;
    std::vector<double> half_extent;

    int dim() const { return static_cast<int>(center.size()); }
};

// The (q, qd, qdd) block the generative flow acts on: a trajectory-shaped
// state without a time step, in normalized units.
struct StateBlock {
    int length = 0;
    int dim = 0;
    std::vector<double> q;
    std::vector<double> qd;
    std::vector<double> qdd;

    static StateBlock zeros(int length, int dim) {
        StateBlock b;
        b.length = length;
        b.dim = dim;
        const std::size_t n = static_cast<std::size_t>(length) * dim;
        b.q.assign(n, 0.0);
        b.qd.assign(n, 0.0);
        b.qdd.assign(n, 0.0);
        return b;
    }

    static StateBlock from_trajectory(const Trajectory& t) {
        StateBlock b;
        b.length = t.length;
        b.dim = t.dim;
        b.q = t.q;
        b.qd = t.qd;
        b.qdd = t.qdd;
        return b;
    }

    std::size_t channel_size() const { return static_cast<std::size_t>(length) * dim; }

    std::vector<double>& channel(int c) { return c == 0 ? q : (c == 1 ? qd : qdd); }
    const std::vector<double>& channel(int c) const { return c == 0 ? q : (c == 1 ? qd : qdd); }

    bool finite() const { return all_finite(q) && all_finite(qd) && all_finite(qdd); }

    bool same_shape(const StateBlock& o) const { return length == o.length && dim == o.dim; }
};

}  // namespace sbmp
