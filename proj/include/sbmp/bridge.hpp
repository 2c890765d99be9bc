#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sbmp/errors.hpp"
#include "sbmp/rng.hpp"
#include "sbmp/types.hpp"

namespace sbmp::bridge {

enum class Family { SchrodingerBridge, LinearCFM, TrigInterpolant, OTCFM };

enum class CouplingMode { Independent, MinibatchOT };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::SchrodingerBridge: return "sb";
        case Family::LinearCFM: return "cfm";
        case Family::TrigInterpolant: return "trig";
        case Family::OTCFM: return "otcfm";
    }
    return "sb";
}

inline Family family_from_name(const std::string& s) {
    if (s == "sb") return Family::SchrodingerBridge;
    if (s == "cfm") return Family::LinearCFM;
    if (s == "trig") return Family::TrigInterpolant;
    if (s == "otcfm") return Family::OTCFM;
    throw invalid_input_error("unknown interpolant family: " + s);
}

// Interpolant family, diffusion strength, and dynamics order. sigma and
// lengths are in normalized units.
struct BridgeSpec {
    double sigma = 0.5;
    int order = 1;            // 1..3; selects the position-channel interpolant
    double t_clamp = 1e-3;    // flow time restricted to [t_clamp, 1 - t_clamp]
    Family family = Family::SchrodingerBridge;
    double sigma_min = 1e-2;  // LinearCFM / OTCFM jitter

    void validate() const {
        if (sigma <= 0.0) throw invalid_input_error("bridge sigma must be positive");
        if (order < 1 || order > 3) throw invalid_input_error("bridge order must be in {1,2,3}");
        if (!(t_clamp > 0.0 && t_clamp < 0.5)) throw invalid_input_error("t_clamp must lie in (0, 0.5)");
        if (sigma_min <= 0.0) throw invalid_input_error("sigma_min must be positive");
    }

    double clamp_time(double t) const { return std::min(std::max(t, t_clamp), 1.0 - t_clamp); }

    bool uses_score() const { return family == Family::SchrodingerBridge; }
};

// One training pair: a noise draw, an expert sample, and the task read off
// the expert's endpoints.
struct BridgeEndpoints {
    StateBlock noise;   // (eps_q, eps_qd, eps_qdd)
    StateBlock target;  // (q1, qd1, qdd1)
    Task task;
};

inline BridgeEndpoints make_endpoints(StateBlock noise, const Trajectory& expert) {
    BridgeEndpoints e;
    e.target = StateBlock::from_trajectory(expert);
    if (!noise.same_shape(e.target)) throw invalid_input_error("noise/expert shape mismatch");
    e.noise = std::move(noise);
    e.task.start = expert.start();
    e.task.goal = expert.goal();
    return e;
}

struct BridgeTargets {
    StateBlock x_t;
    StateBlock drift;         // target field at x_t
    StateBlock score_scaled;  // sigma_t * grad log p_t, the bounded regression target
    StateBlock mean;
    double var = 0.0;
};

// Transport weighting of the Gaussian-path flow field: the unique alpha for
// which mu_t + alpha(t) (x - mu_t) moves N(mu_t, sigma^2 t(1-t)) along the
// bridge marginals.
inline double alpha(double t) { return (1.0 - 2.0 * t) / (2.0 * t * (1.0 - t)); }

namespace detail {

// Position-channel mean coefficients: weight on (eps_q, eps_qd, eps_qdd, q1).
inline void order_coeffs(int order, double t, double* c) {
    switch (order) {
        case 1:
            c[0] = 1.0 - t;
            c[1] = 0.0;
            c[2] = 0.0;
            c[3] = t;
            break;
        case 2:
            c[0] = 1.0 - t * t;
            c[1] = t - t * t;
            c[2] = 0.0;
            c[3] = t * t;
            break;
        default:
            c[0] = 1.0 - t * t * t;
            c[1] = t - t * t * t;
            c[2] = 0.5 * (t * t - t * t * t);
            c[3] = t * t * t;
            break;
    }
}

inline void order_coeffs_dot(int order, double t, double* c) {
    switch (order) {
        case 1:
            c[0] = -1.0;
            c[1] = 0.0;
            c[2] = 0.0;
            c[3] = 1.0;
            break;
        case 2:
            c[0] = -2.0 * t;
            c[1] = 1.0 - 2.0 * t;
            c[2] = 0.0;
            c[3] = 2.0 * t;
            break;
        default:
            c[0] = -3.0 * t * t;
            c[1] = 1.0 - 3.0 * t * t;
            c[2] = 0.5 * (2.0 * t - 3.0 * t * t);
            c[3] = 3.0 * t * t;
            break;
    }
}

}  // namespace detail

// Mean of p_t per channel. The position channel follows the order-k
// interpolant (mixing velocity/acceleration noise); the velocity and
// acceleration channels bridge their own endpoints linearly.
inline StateBlock mean_at(double t, const BridgeEndpoints& e, const BridgeSpec& spec) {
    StateBlock m = StateBlock::zeros(e.target.length, e.target.dim);
    const std::size_t n = m.channel_size();
    if (spec.family == Family::TrigInterpolant) {
        const double a = std::cos(1.5707963267948966 * t);
        const double b = std::sin(1.5707963267948966 * t);
        for (int c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < n; ++i)
                m.channel(c)[i] = a * e.noise.channel(c)[i] + b * e.target.channel(c)[i];
        return m;
    }
    double co[4];
    detail::order_coeffs(spec.family == Family::SchrodingerBridge ? spec.order : 1, t, co);
    for (std::size_t i = 0; i < n; ++i)
        m.q[i] = co[0] * e.noise.q[i] + co[1] * e.noise.qd[i] + co[2] * e.noise.qdd[i] + co[3] * e.target.q[i];
    for (int c = 1; c < 3; ++c)
        for (std::size_t i = 0; i < n; ++i)
            m.channel(c)[i] = (1.0 - t) * e.noise.channel(c)[i] + t * e.target.channel(c)[i];
    return m;
}

inline StateBlock mean_dot_at(double t, const BridgeEndpoints& e, const BridgeSpec& spec) {
    StateBlock m = StateBlock::zeros(e.target.length, e.target.dim);
    const std::size_t n = m.channel_size();
    if (spec.family == Family::TrigInterpolant) {
        const double h = 1.5707963267948966;
        const double a = -h * std::sin(h * t);
        const double b = h * std::cos(h * t);
        for (int c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < n; ++i)
                m.channel(c)[i] = a * e.noise.channel(c)[i] + b * e.target.channel(c)[i];
        return m;
    }
    double co[4];
    detail::order_coeffs_dot(spec.family == Family::SchrodingerBridge ? spec.order : 1, t, co);
    for (std::size_t i = 0; i < n; ++i)
        m.q[i] = co[0] * e.noise.q[i] + co[1] * e.noise.qd[i] + co[2] * e.noise.qdd[i] + co[3] * e.target.q[i];
    for (int c = 1; c < 3; ++c)
        for (std::size_t i = 0; i < n; ++i)
            m.channel(c)[i] = e.target.channel(c)[i] - e.noise.channel(c)[i];
    return m;
}

inline double variance_at(double t, const BridgeSpec& spec) {
    switch (spec.family) {
        case Family::SchrodingerBridge: return spec.sigma * spec.sigma * t * (1.0 - t);
        case Family::LinearCFM:
        case Family::OTCFM: return spec.sigma_min * spec.sigma_min;
        case Family::TrigInterpolant: return 0.0;
    }
    return 0.0;
}

// sigma_t of the bridge's Gaussian marginal; 0 exactly at the pinned ends.
inline double sigma_t(double t, const BridgeSpec& spec) { return std::sqrt(variance_at(t, spec)); }

inline std::pair<StateBlock, double> marginal(double t, const BridgeEndpoints& e, const BridgeSpec& spec) {
    if (t < 0.0 || t > 1.0) throw invalid_input_error("flow time outside [0,1]");
    return {mean_at(t, e, spec), variance_at(t, spec)};
}

// Draw x_t ~ p_t(. | endpoints).
inline StateBlock interpolate(double t, const BridgeEndpoints& e, const BridgeSpec& spec, Rng& rng) {
    if (t < 0.0 || t > 1.0) throw invalid_input_error("flow time outside [0,1]");
    StateBlock x = mean_at(t, e, spec);
    const double sd = sigma_t(t, spec);
    if (sd > 0.0) {
        for (int c = 0; c < 3; ++c) {
            auto& ch = x.channel(c);
            for (double& v : ch) v += sd * rng.normal();
        }
    }
    return x;
}

// The flow-field regression target evaluated at x_t. Schroedinger-bridge
// family: alpha(t) (x - mu_t) + mu_dot_t; singular at t in {0,1}.
inline StateBlock target_drift(double t, const StateBlock& x_t, const BridgeEndpoints& e, const BridgeSpec& spec) {
    if (!x_t.same_shape(e.target)) throw invalid_input_error("target_drift shape mismatch");
    if (spec.family == Family::LinearCFM || spec.family == Family::OTCFM) {
        StateBlock d = StateBlock::zeros(x_t.length, x_t.dim);
        for (int c = 0; c < 3; ++c) {
            const std::size_t n = d.channel_size();
            for (std::size_t i = 0; i < n; ++i)
                d.channel(c)[i] = e.target.channel(c)[i] - e.noise.channel(c)[i];
        }
        return d;
    }
    if (spec.family == Family::TrigInterpolant) return mean_dot_at(t, e, spec);
    if (t <= 0.0 || t >= 1.0) throw singular_time_error("target_drift singular at t in {0,1}");
    const double a = alpha(t);
    StateBlock mu = mean_at(t, e, spec);
    StateBlock md = mean_dot_at(t, e, spec);
    StateBlock d = StateBlock::zeros(x_t.length, x_t.dim);
    for (int c = 0; c < 3; ++c) {
        const std::size_t n = d.channel_size();
        for (std::size_t i = 0; i < n; ++i)
            d.channel(c)[i] = a * (x_t.channel(c)[i] - mu.channel(c)[i]) + md.channel(c)[i];
    }
    return d;
}

// Raw score (mu - x)/var; throws when the marginal is degenerate.
inline StateBlock target_score(double t, const StateBlock& x_t, const BridgeEndpoints& e, const BridgeSpec& spec) {
    if (!x_t.same_shape(e.target)) throw invalid_input_error("target_score shape mismatch");
    const double var = variance_at(t, spec);
    if (var <= 0.0) throw singular_time_error("score singular where the marginal variance vanishes");
    StateBlock mu = mean_at(t, e, spec);
    StateBlock s = StateBlock::zeros(x_t.length, x_t.dim);
    for (int c = 0; c < 3; ++c) {
        const std::size_t n = s.channel_size();
        for (std::size_t i = 0; i < n; ++i) s.channel(c)[i] = (mu.channel(c)[i] - x_t.channel(c)[i]) / var;
    }
    return s;
}

// sigma_t-scaled score (mu - x)/sigma_t: the unit-variance quantity the
// score head regresses. For the noise-free trig family this is zero.
inline StateBlock target_score_scaled(double t, const StateBlock& x_t, const BridgeEndpoints& e,
                                      const BridgeSpec& spec) {
    if (!x_t.same_shape(e.target)) throw invalid_input_error("target_score shape mismatch");
    StateBlock s = StateBlock::zeros(x_t.length, x_t.dim);
    if (spec.family == Family::TrigInterpolant) return s;
    const double sd = sigma_t(t, spec);
    if (sd <= 0.0) throw singular_time_error("score singular where the marginal variance vanishes");
    StateBlock mu = mean_at(t, e, spec);
    for (int c = 0; c < 3; ++c) {
        const std::size_t n = s.channel_size();
        for (std::size_t i = 0; i < n; ++i) s.channel(c)[i] = (mu.channel(c)[i] - x_t.channel(c)[i]) / sd;
    }
    return s;
}

// Drift of the conditional SDE sharing the bridge marginals: the flow field
// plus half sigma^2 times the score. Simulating dx = sde_drift dt + sigma dW
// reproduces N(mu_t, sigma^2 t(1-t)); this is the Fokker-Planck check.
inline StateBlock sde_drift(double t, const StateBlock& x_t, const BridgeEndpoints& e, const BridgeSpec& spec) {
    StateBlock d = target_drift(t, x_t, e, spec);
    StateBlock s = target_score(t, x_t, e, spec);
    const double half_s2 = 0.5 * spec.sigma * spec.sigma;
    for (int c = 0; c < 3; ++c) {
        const std::size_t n = d.channel_size();
        for (std::size_t i = 0; i < n; ++i) d.channel(c)[i] += half_s2 * s.channel(c)[i];
    }
    return d;
}

inline BridgeTargets make_targets(double t, const BridgeEndpoints& e, const BridgeSpec& spec, Rng& rng) {
    BridgeTargets out;
    out.x_t = interpolate(t, e, spec, rng);
    out.drift = target_drift(t, out.x_t, e, spec);
    out.score_scaled = target_score_scaled(t, out.x_t, e, spec);
    out.mean = mean_at(t, e, spec);
    out.var = variance_at(t, spec);
    return out;
}

// Exact minimum-cost assignment (Jonker-Volgenant style shortest augmenting
// paths, O(n^3)). cost is row-major n x n; returns column assigned to each row.
inline std::vector<int> hungarian(const std::vector<double>& cost, int n) {
    if (n <= 0 || cost.size() != static_cast<std::size_t>(n) * n)
        throw invalid_input_error("hungarian needs a square cost matrix");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

inline double sq_position_distance(const StateBlock& a, const StateBlock& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.q.size(); ++i) {
        const double d = a.q[i] - b.q[i];
        s += d * d;
    }
    return s;
}

// Pair noise draws with expert samples. Independent keeps the sampled
// order; MinibatchOT solves the assignment minimizing total squared
// displacement of the position channel.
inline std::vector<int> couple(const std::vector<StateBlock>& noise, const std::vector<StateBlock>& experts,
                               CouplingMode mode) {
    if (noise.size() != experts.size() || noise.empty())
        throw invalid_input_error("couple needs equal nonempty batches");
    const int n = static_cast<int>(noise.size());
    std::vector<int> assign(n);
    if (mode == CouplingMode::Independent) {
        for (int i = 0; i < n; ++i) assign[i] = i;
        return assign;
    }
    std::vector<double> cost(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            cost[static_cast<std::size_t>(i) * n + j] = sq_position_distance(noise[i], experts[j]);
    return hungarian(cost, n);
}

// Noise init: positions uniform over the (normalized) bounds, velocity and
// acceleration channels zero-mean Gaussian.
inline StateBlock sample_noise(int length, int dim, const Workspace& workspace, Rng& rng,
                               double vel_scale = 1.0, double acc_scale = 1.0) {
    validate_workspace(workspace);
    if (workspace.dim() != dim) throw invalid_input_error("sample_noise workspace dimension mismatch");
    StateBlock b = StateBlock::zeros(length, dim);
    for (int i = 0; i < length; ++i)
        for (int j = 0; j < dim; ++j)
            b.q[static_cast<std::size_t>(i) * dim + j] = rng.uniform(workspace.lo[j], workspace.hi[j]);
    for (double& v : b.qd) v = vel_scale * rng.normal();
    for (double& v : b.qdd) v = acc_scale * rng.normal();
    return b;
}

}  // namespace sbmp::bridge
