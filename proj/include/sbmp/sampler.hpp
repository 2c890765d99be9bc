#pragma once

#include <chrono>
#include <cmath>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sbmp/bridge.hpp"
#include "sbmp/checkpoint.hpp"
#include "sbmp/errors.hpp"
#include "sbmp/model.hpp"
#include "sbmp/rng.hpp"
#include "sbmp/traj_ops.hpp"
#include "sbmp/types.hpp"

namespace sbmp::sampler {

struct SamplerConfig {
    int steps = 100;
    double sigma = 0.5;      // must equal the training sigma; 0 disables the score term
    double t_clamp = 1e-3;
    bool score_correction = true;  // subtract 0.5 sigma^2 * score from the field
    double noise_vel_scale = 1.0;
    double noise_acc_scale = 1.0;
    std::vector<double> snapshot_times;  // flow times whose states to record
    int threads = 1;

    double delta() const { return 1.0 / steps; }

    void validate() const {
        if (steps < 1) throw invalid_input_error("sampler needs steps >= 1");
        if (!(t_clamp > 0.0 && t_clamp < 0.5)) throw invalid_input_error("t_clamp must lie in (0, 0.5)");
        if (sigma < 0.0) throw invalid_input_error("sampler sigma must be nonnegative");
    }
};

struct Snapshot {
    double t = 0.0;
    StateBlock state;
};

struct GenerationResult {
    Trajectory trajectory;
    Task task;
    double wall_secs = 0.0;
    std::vector<Snapshot> snapshots;
};

// Anything that evaluates (flow field, sigma_t-scaled score) at (t, x, task).
// The trained model is one provider; tests plug in closed-form fields.
class FieldProvider {
public:
    virtual ~FieldProvider() = default;
    virtual void eval(double t, const StateBlock& x, const Task& task, StateBlock& drift,
                      StateBlock& score_scaled) const = 0;
};

class ModelField final : public FieldProvider {
public:
    explicit ModelField(const model::FieldModel& fm) : fm_(&fm) {
        if (!all_finite(fm.params)) throw corrupt_model_error("model parameters are not finite");
    }

    void eval(double t, const StateBlock& x, const Task& task, StateBlock& drift,
              StateBlock& score_scaled) const override {
        model::FieldModel::TrainCache scratch;
        auto out = fm_->forward_train(t, x, task, scratch);
        drift = std::move(out.first);
        score_scaled = std::move(out.second);
    }

private:
    const model::FieldModel* fm_;
};

// Fixed-step Euler integration of the score-corrected flow over the clamped
// interval [eps, 1-eps]. The update applies
//   state += h * (drift - 0.5 * sigma * score_scaled / sqrt(t(1-t)))
// which is the probability-flow update with the scaled score converted back
// to the raw score via sigma_t = sigma sqrt(t(1-t)).
inline StateBlock integrate_flow(const FieldProvider& field, StateBlock state, const Task& task,
                                 const SamplerConfig& cfg, std::vector<Snapshot>* snapshots = nullptr) {
    cfg.validate();
    const double eps = cfg.t_clamp;
    const int k = cfg.steps;
    const double h = (1.0 - 2.0 * eps) / k;
    std::size_t next_snap = 0;
    auto maybe_snapshot = [&](double t_now) {
        if (!snapshots) return;
        while (next_snap < cfg.snapshot_times.size() && t_now >= cfg.snapshot_times[next_snap] - 1e-12) {
            snapshots->push_back({cfg.snapshot_times[next_snap], state});
            ++next_snap;
        }
    };
    maybe_snapshot(eps);
    StateBlock drift, score;
    for (int i = 0; i < k; ++i) {
        const double t = eps + i * h;
        field.eval(t, state, task, drift, score);
        double corr = 0.0;
        if (cfg.score_correction && cfg.sigma > 0.0) corr = 0.5 * cfg.sigma / std::sqrt(t * (1.0 - t));
        for (int c = 0; c < 3; ++c) {
            auto& s = state.channel(c);
            const auto& dch = drift.channel(c);
            const auto& sch = score.channel(c);
            for (std::size_t e = 0; e < s.size(); ++e) s[e] += h * (dch[e] - corr * sch[e]);
        }
        if (!state.finite())
            throw sampling_diverged_error("non-finite state at integration step " + std::to_string(i));
        maybe_snapshot(eps + (i + 1) * h);
    }
    if (snapshots) {
        while (next_snap < cfg.snapshot_times.size()) {
            snapshots->push_back({cfg.snapshot_times[next_snap], state});
            ++next_snap;
        }
    }
    return state;
}

// Roll a single task-conditioned trajectory out of workspace noise.
// Wall-clock covers noise draw, integration, and denormalization; model
// loading and normalization setup stay outside the timed section.
inline GenerationResult generate(const Planner& planner, const Task& task, const SamplerConfig& cfg, Rng& rng) {
    validate_task(task, &planner.workspace);
    const int L = planner.field.L;
    const int d = planner.field.d;
    const Workspace norm_ws = normalize_workspace(planner.norm, planner.workspace);
    const Task norm_task = normalize_task(planner.norm, task);
    ModelField field(planner.field);

    const auto t0 = std::chrono::steady_clock::now();
    StateBlock state = bridge::sample_noise(L, d, norm_ws, rng, cfg.noise_vel_scale, cfg.noise_acc_scale);
    std::vector<Snapshot> snaps;
    state = integrate_flow(field, std::move(state), norm_task, cfg, cfg.snapshot_times.empty() ? nullptr : &snaps);

    GenerationResult out;
    out.task = task;
    Trajectory traj;
    traj.length = L;
    traj.dim = d;
    traj.dt = planner.traj_dt > 0.0 ? planner.traj_dt : 1.0 / (L - 1);
    traj.q = std::move(state.q);
    traj.qd = std::move(state.qd);
    traj.qdd = std::move(state.qdd);
    traj.derived_derivatives = false;  // dynamics channels are generated, not differenced
    out.trajectory = denormalize_trajectory(planner.norm, std::move(traj));
    for (Snapshot& s : snaps) {
        Trajectory tmp;
        tmp.length = L;
        tmp.dim = d;
        tmp.dt = out.trajectory.dt;
        tmp.q = std::move(s.state.q);
        tmp.qd = std::move(s.state.qd);
        tmp.qdd = std::move(s.state.qdd);
        tmp = denormalize_trajectory(planner.norm, std::move(tmp));
        s.state.q = std::move(tmp.q);
        s.state.qd = std::move(tmp.qd);
        s.state.qdd = std::move(tmp.qdd);
    }
    out.snapshots = std::move(snaps);
    out.wall_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

struct GenerationOutcome {
    bool ok = false;
    std::string error;
    GenerationResult result;
};

// Element-wise generate() with split rng streams; per-item failures are
// reported in place so one divergence does not abort the batch.
inline std::vector<GenerationOutcome> batch_generate(const Planner& planner, const std::vector<Task>& tasks,
                                                     const SamplerConfig& cfg, const Rng& rng) {
    std::vector<GenerationOutcome> out(tasks.size());
    int n_threads = cfg.threads;
    if (n_threads <= 0) {
        n_threads = static_cast<int>(std::thread::hardware_concurrency());
        if (n_threads < 1) n_threads = 1;
    }
    auto work = [&](std::size_t i) {
        Rng item_rng = rng.split("traj", static_cast<std::uint64_t>(i));
        try {
            out[i].result = generate(planner, tasks[i], cfg, item_rng);
            out[i].ok = true;
        } catch (const std::exception& e) {
            out[i].ok = false;
            out[i].error = e.what();
        }
    };
    if (n_threads <= 1 || tasks.size() <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_threads; ++w)
            pool.emplace_back([&, w]() {
                for (std::size_t i = static_cast<std::size_t>(w); i < tasks.size(); i += n_threads) work(i);
            });
        for (auto& th : pool) th.join();
    }
    return out;
}

}  // namespace sbmp::sampler
