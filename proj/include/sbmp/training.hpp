#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sbmp/bridge.hpp"
#include "sbmp/errors.hpp"
#include "sbmp/model.hpp"
#include "sbmp/rng.hpp"
#include "sbmp/types.hpp"

namespace sbmp::training {

// lambda(t) of the score-matching term. SigmaSq cancels the 1/sigma_t^2
// magnitude of the raw score target, making the score loss the MSE of a
// unit-variance quantity; Constant keeps lambda = 1 on the raw score.
enum class Scheduler { SigmaSq, Constant };

struct TrainConfig {
    int epochs = 30;
    int batch_size = 64;
    int steps_per_epoch = 0;  // 0: ceil(N / batch_size)
    double lr = 1e-3;
    double lr_final = -1.0;  // < 0: constant lr; otherwise cosine decay to this
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip = 0.0;  // max gradient norm; 0 disables
    std::uint64_t seed = 0;
    bridge::BridgeSpec bridge;
    bridge::CouplingMode coupling = bridge::CouplingMode::Independent;
    model::ArchSpec arch;
    Scheduler scheduler = Scheduler::SigmaSq;
    double noise_vel_scale = 1.0;
    double noise_acc_scale = 1.0;
    int threads = 0;  // 0: hardware concurrency (capped by the chunk count)

    void validate() const {
        if (epochs < 1) throw invalid_input_error("epochs must be >= 1");
        if (batch_size < 1) throw invalid_input_error("batch_size must be >= 1");
        if (steps_per_epoch < 0) throw invalid_input_error("steps_per_epoch must be >= 0");
        if (lr <= 0.0) throw invalid_input_error("learning rate must be positive");
        bridge.validate();
        arch.validate();
    }
};

struct EpochLog {
    double flow_loss = 0.0;
    double score_loss = 0.0;
    double secs = 0.0;
};

struct TrainReport {
    std::vector<EpochLog> epochs;
    double first_step_total = 0.0;
    double first_step_flow = 0.0;
    double first_step_score = 0.0;
    std::string checkpoint_path;
};

struct LossParts {
    double total = 0.0;
    double flow = 0.0;
    double score = 0.0;
};

// Per-element weight of the scaled-score MSE realizing lambda(t). The score
// head predicts sigma_t * grad log p, so lambda = sigma_t^2 gives weight 1.
inline double score_weight(double t, const bridge::BridgeSpec& spec, Scheduler sched) {
    if (spec.family == bridge::Family::TrigInterpolant) return 1.0;
    if (sched == Scheduler::SigmaSq) return 1.0;
    const double var = bridge::variance_at(t, spec);
    if (var <= 0.0) throw singular_time_error("constant scheduler undefined where variance vanishes");
    return 1.0 / var;
}

inline LossParts loss(const StateBlock& drift_pred, const StateBlock& score_pred,
                      const bridge::BridgeTargets& targets, double t, const bridge::BridgeSpec& spec,
                      Scheduler sched = Scheduler::SigmaSq) {
    if (!drift_pred.same_shape(targets.drift) || !score_pred.same_shape(targets.score_scaled))
        throw invalid_input_error("loss shape mismatch");
    const double w = score_weight(t, spec, sched);
    const std::size_t n = drift_pred.channel_size() * 3;
    double flow = 0.0, score = 0.0;
    for (int c = 0; c < 3; ++c) {
        const auto& dp = drift_pred.channel(c);
        const auto& dt_ = targets.drift.channel(c);
        const auto& sp = score_pred.channel(c);
        const auto& st = targets.score_scaled.channel(c);
        for (std::size_t i = 0; i < dp.size(); ++i) {
            const double fd = dp[i] - dt_[i];
            const double sd = sp[i] - st[i];
            flow += fd * fd;
            score += w * sd * sd;
        }
    }
    LossParts parts;
    parts.flow = flow / static_cast<double>(n);
    parts.score = score / static_cast<double>(n);
    parts.total = parts.flow + parts.score;
    if (!std::isfinite(parts.total)) throw diverged_training_error("non-finite loss");
    return parts;
}

// One adaptive-moment update; a zero gradient leaves parameters unchanged.
inline void adam_step(std::vector<double>& params, std::vector<double>& m, std::vector<double>& v,
                      const std::vector<double>& grad, long step, const TrainConfig& cfg, double lr = -1.0) {
    if (lr < 0.0) lr = cfg.lr;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double gi = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
        const double mh = m[i] / bc1;
        const double vh = v[i] / bc2;
        params[i] -= lr * mh / (std::sqrt(vh) + cfg.adam_eps);
    }
}

// Cosine schedule from cfg.lr down to cfg.lr_final over the whole run.
inline double effective_lr(const TrainConfig& cfg, double progress) {
    if (cfg.lr_final < 0.0) return cfg.lr;
    return cfg.lr_final + 0.5 * (cfg.lr - cfg.lr_final) * (1.0 + std::cos(3.14159265358979323846 * progress));
}

namespace detail {

// Fixed chunking: results are independent of the number of worker threads.
constexpr int kGradChunks = 8;

struct SampleBatch {
    std::vector<double> ts;
    std::vector<bridge::BridgeEndpoints> endpoints;
    std::vector<bridge::BridgeTargets> targets;
};

inline SampleBatch prepare_batch(const Dataset& ds, const TrainConfig& cfg, const Rng& step_rng, int length,
                                 int dim) {
    SampleBatch batch;
    const int B = cfg.batch_size;
    const int N = ds.size();
    Rng pick = step_rng.split("pick");
    batch.ts.resize(B);
    for (int b = 0; b < B; ++b)
        batch.ts[b] = cfg.bridge.clamp_time(pick.uniform());
    std::vector<int> expert_idx(B);
    for (int b = 0; b < B; ++b) expert_idx[b] = static_cast<int>(pick.next_u64() % static_cast<std::uint64_t>(N));
    std::vector<StateBlock> noise(B);
    for (int b = 0; b < B; ++b) {
        Rng nr = step_rng.split("noise", static_cast<std::uint64_t>(b));
        noise[b] = bridge::sample_noise(length, dim, ds.workspace, nr, cfg.noise_vel_scale, cfg.noise_acc_scale);
    }
    std::vector<StateBlock> experts(B);
    for (int b = 0; b < B; ++b) experts[b] = StateBlock::from_trajectory(ds.trajectories[expert_idx[b]]);
    const std::vector<int> assign = bridge::couple(noise, experts, cfg.coupling);
    batch.endpoints.resize(B);
    batch.targets.resize(B);
    for (int b = 0; b < B; ++b) {
        const int j = expert_idx[assign[b]];
        const Trajectory& expert = ds.trajectories[j];
        batch.endpoints[b] = bridge::make_endpoints(std::move(noise[b]), expert);
        // The conditioning task must be exactly the sampled expert's endpoints.
        const Task& stored = ds.tasks[j];
        for (int c = 0; c < dim; ++c) {
            if (batch.endpoints[b].task.start[c] != stored.start[c] ||
                batch.endpoints[b].task.goal[c] != stored.goal[c])
                throw invalid_input_error("dataset task does not match trajectory endpoints");
        }
        Rng ir = step_rng.split("interp", static_cast<std::uint64_t>(b));
        batch.targets[b] = bridge::make_targets(batch.ts[b], batch.endpoints[b], cfg.bridge, ir);
    }
    return batch;
}

template <typename Fn>
void run_chunked(int n_items, int n_threads, Fn&& fn) {
    const int chunks = kGradChunks;
    if (n_threads <= 1) {
        for (int c = 0; c < chunks; ++c) fn(c, c * n_items / chunks, (c + 1) * n_items / chunks);
        return;
    }
    std::vector<std::thread> pool;
    for (int w = 0; w < n_threads; ++w) {
        pool.emplace_back([&, w]() {
            for (int c = w; c < chunks; c += n_threads) fn(c, c * n_items / chunks, (c + 1) * n_items / chunks);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

using LogFn = std::function<void(int /*epoch*/, const EpochLog&)>;

// Algorithm: sample t and a minibatch, couple noise to experts, interpolate,
// regress the analytic flow and scaled-score targets, Adam step. Fully
// deterministic for a fixed config and seed.
inline std::pair<model::FieldModel, TrainReport> train(const Dataset& normalized, const TrainConfig& cfg,
                                                       const LogFn& log = nullptr,
                                                       const model::FieldModel* resume_from = nullptr) {
    cfg.validate();
    validate_dataset(normalized);
    const int N = normalized.size();
    const int length = normalized.trajectories[0].length;
    const int dim = normalized.dim();
    for (const Trajectory& t : normalized.trajectories)
        if (t.length != length) throw invalid_input_error("training requires equal-length trajectories");

    Rng root(cfg.seed);
    model::FieldModel fm = [&]() {
        if (resume_from) {
            if (resume_from->d != dim || resume_from->L != length)
                throw invalid_input_error("resume checkpoint does not match dataset shape");
            return *resume_from;
        }
        Rng init_rng = root.split("init");
        return model::FieldModel::init(cfg.arch, dim, length, init_rng);
    }();

    const std::size_t P = fm.param_count();
    std::vector<double> m(P, 0.0), v(P, 0.0), grad(P, 0.0);
    std::vector<std::vector<double>> chunk_grads(detail::kGradChunks, std::vector<double>(P, 0.0));
    long adam_t = 0;

    const int steps_per_epoch = cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : (N + cfg.batch_size - 1) / cfg.batch_size;
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    const int n_threads = std::min(detail::kGradChunks, cfg.threads > 0 ? cfg.threads : hw);
    const double inv_scale = 1.0 / (static_cast<double>(cfg.batch_size) * 3.0 * length * dim);

    TrainReport report;
    long global_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        double epoch_flow = 0.0, epoch_score = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step, ++global_step) {
            const Rng step_rng = root.split("step", static_cast<std::uint64_t>(global_step));
            detail::SampleBatch batch = detail::prepare_batch(normalized, cfg, step_rng, length, dim);

            for (auto& cg : chunk_grads) std::fill(cg.begin(), cg.end(), 0.0);
            std::vector<double> flows(cfg.batch_size, 0.0), scores(cfg.batch_size, 0.0);
            detail::run_chunked(cfg.batch_size, n_threads, [&](int chunk, int begin, int end) {
                model::FieldModel::TrainCache cache;
                for (int b = begin; b < end; ++b) {
                    const double t = batch.ts[b];
                    auto [drift_pred, score_pred] =
                        fm.forward_train(t, batch.targets[b].x_t, batch.endpoints[b].task, cache);
                    const double w = score_weight(t, cfg.bridge, cfg.scheduler);
                    StateBlock d_drift = StateBlock::zeros(length, dim);
                    StateBlock d_score = StateBlock::zeros(length, dim);
                    double fl = 0.0, sc = 0.0;
                    for (int c = 0; c < 3; ++c) {
                        const auto& dp = drift_pred.channel(c);
                        const auto& dt_ = batch.targets[b].drift.channel(c);
                        const auto& sp = score_pred.channel(c);
                        const auto& st = batch.targets[b].score_scaled.channel(c);
                        auto& gd = d_drift.channel(c);
                        auto& gs = d_score.channel(c);
                        for (std::size_t i = 0; i < dp.size(); ++i) {
                            const double fd = dp[i] - dt_[i];
                            const double sd = sp[i] - st[i];
                            fl += fd * fd;
                            sc += w * sd * sd;
                            gd[i] = 2.0 * fd * inv_scale;
                            gs[i] = 2.0 * w * sd * inv_scale;
                        }
                    }
                    flows[b] = fl;
                    scores[b] = sc;
                    fm.backward_train(cache, d_drift, d_score, chunk_grads[chunk].data());
                }
            });

            std::fill(grad.begin(), grad.end(), 0.0);
            for (const auto& cg : chunk_grads)
                for (std::size_t i = 0; i < P; ++i) grad[i] += cg[i];

            double step_flow = 0.0, step_score = 0.0;
            for (int b = 0; b < cfg.batch_size; ++b) {
                step_flow += flows[b];
                step_score += scores[b];
            }
            const double denom = static_cast<double>(cfg.batch_size) * 3.0 * length * dim;
            step_flow /= denom;
            step_score /= denom;
            const double step_total = step_flow + step_score;
            if (!std::isfinite(step_total))
                throw diverged_training_error("non-finite loss at epoch " + std::to_string(epoch) + " step " +
                                              std::to_string(step));
            if (global_step == 0) {
                report.first_step_total = step_total;
                report.first_step_flow = step_flow;
                report.first_step_score = step_score;
            }
            epoch_flow += step_flow;
            epoch_score += step_score;

            if (cfg.grad_clip > 0.0) {
                double norm2 = 0.0;
                for (double gval : grad) norm2 += gval * gval;
                const double norm = std::sqrt(norm2);
                if (norm > cfg.grad_clip) {
                    const double scale = cfg.grad_clip / norm;
                    for (double& gval : grad) gval *= scale;
                }
            }

            for (std::size_t i = 0; i < P; ++i) {
                if (!std::isfinite(grad[i])) {
                    // identify the offending tensor for the error message
                    for (const auto& e : fm.layout.entries) {
                        if (i >= e.offset && i < e.offset + e.count())
                            throw diverged_training_error("non-finite gradient in tensor " + e.name);
                    }
                    throw diverged_training_error("non-finite gradient");
                }
            }
            ++adam_t;
            const double total_steps = static_cast<double>(cfg.epochs) * steps_per_epoch;
            adam_step(fm.params, m, v, grad, adam_t, cfg, effective_lr(cfg, (adam_t - 1) / total_steps));
            if (!all_finite(fm.params))
                throw diverged_training_error("non-finite parameters after update at epoch " +
                                              std::to_string(epoch) + " step " + std::to_string(step));
        }
        EpochLog el;
        el.flow_loss = epoch_flow / steps_per_epoch;
        el.score_loss = epoch_score / steps_per_epoch;
        el.secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.epochs.push_back(el);
        if (log) log(epoch, el);
    }
    return {std::move(fm), std::move(report)};
}

}  // namespace sbmp::training
