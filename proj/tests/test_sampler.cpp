#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sbmp/bridge.hpp"
#include "sbmp/checkpoint.hpp"
#include "sbmp/model.hpp"
#include "sbmp/sampler.hpp"

using namespace sbmp;
using namespace sbmp::bridge;
using namespace sbmp::sampler;

namespace {

// Exact conditional-bridge fields: the closed-form drift and scaled score
// for one fixed endpoint pair. This is the hand-coded oracle the learned
// model is supposed to approximate.
struct ExactBridgeField final : FieldProvider {
    BridgeEndpoints ep;
    BridgeSpec spec;

    void eval(double t, const StateBlock& x, const Task&, StateBlock& d, StateBlock& s) const override {
        d = target_drift(t, x, ep, spec);
        s = target_score_scaled(t, x, ep, spec);
    }
};

ExactBridgeField make_toy() {
    ExactBridgeField f;
    f.spec.sigma = 0.5;
    f.spec.order = 3;
    f.ep.noise = StateBlock::zeros(1, 1);
    f.ep.target = StateBlock::zeros(1, 1);
    f.ep.noise.q[0] = 0.1;
    f.ep.noise.qd[0] = -0.05;
    f.ep.noise.qdd[0] = 0.15;
    f.ep.target.q[0] = -0.05;
    f.ep.target.qd[0] = 0.02;
    f.ep.target.qdd[0] = -0.03;
    return f;
}

Task dummy_task() {
    Task t;
    t.start = {0.0};
    t.goal = {1.0};
    return t;
}

Planner tiny_planner(std::uint64_t seed = 21) {
    model::ArchSpec arch;
    arch.levels = 2;
    arch.widths = {4, 8};
    arch.time_embed_dim = 8;
    arch.cond_dim = 8;
    arch.kernel = 3;
    Rng rng(seed);
    Planner p;
    p.field = model::FieldModel::init(arch, 2, 8, rng);
    Rng head_rng(seed + 1);
    for (const auto& e : p.field.layout.entries)
        if (e.name.find("head") != std::string::npos)
            for (std::size_t i = 0; i < e.count(); ++i) p.field.params[e.offset + i] = 0.05 * head_rng.normal();
    p.bridge.sigma = 0.3;
    p.norm.center = {0.0, 0.0};
    p.norm.half_extent = {1.0, 1.0};
    p.workspace.lo = {-1.0, -1.0};
    p.workspace.hi = {1.0, 1.0};
    p.traj_dt = 0.05;
    return p;
}

Task square_task() {
    Task t;
    t.start = {-0.5, -0.5};
    t.goal = {0.5, 0.5};
    return t;
}

}  // namespace

TEST_CASE("closed-form toy: score-corrected flow lands on the target mean") {
    ExactBridgeField f = make_toy();
    SamplerConfig cfg;
    cfg.steps = 1000;
    cfg.sigma = f.spec.sigma;
    cfg.t_clamp = f.spec.t_clamp;

    StateBlock init = mean_at(cfg.t_clamp, f.ep, f.spec);
    StateBlock end = integrate_flow(f, init, dummy_task(), cfg);
    REQUIRE(std::abs(end.q[0] - f.ep.target.q[0]) < 1e-3);
    // the velocity/acceleration channels bridge to their own endpoints
    REQUIRE(std::abs(end.qd[0] - f.ep.target.qd[0]) < 1e-3);
    REQUIRE(std::abs(end.qdd[0] - f.ep.target.qdd[0]) < 1e-3);
    // against the exact flow (the mean path) the Euler error is far smaller
    StateBlock mu_end = mean_at(1.0 - cfg.t_clamp, f.ep, f.spec);
    REQUIRE(std::abs(end.q[0] - mu_end.q[0]) < 2e-4);

    // probability-flow equivalence: dropping the score term still reaches
    // the target mean with exact fields
    cfg.score_correction = false;
    StateBlock end_pf = integrate_flow(f, mean_at(cfg.t_clamp, f.ep, f.spec), dummy_task(), cfg);
    REQUIRE(std::abs(end_pf.q[0] - f.ep.target.q[0]) < 1e-3);
}

TEST_CASE("closed-form toy: Euler converges at first order") {
    ExactBridgeField f = make_toy();
    // measured away from the t_clamp boundary layer so the scheme's own
    // order is visible rather than the stiff-start transient
    std::vector<double> errs;
    for (int k : {10, 100, 1000}) {
        SamplerConfig cfg;
        cfg.steps = k;
        cfg.sigma = f.spec.sigma;
        cfg.t_clamp = 0.02;
        StateBlock init = mean_at(cfg.t_clamp, f.ep, f.spec);
        StateBlock end = integrate_flow(f, init, dummy_task(), cfg);
        StateBlock mu_end = mean_at(1.0 - cfg.t_clamp, f.ep, f.spec);
        errs.push_back(std::abs(end.q[0] - mu_end.q[0]));
    }
    REQUIRE(errs[1] < errs[0]);
    REQUIRE(errs[2] < errs[1]);
    const double order01 = std::log10(errs[0] / errs[1]);
    const double order12 = std::log10(errs[1] / errs[2]);
    INFO("observed orders " << order01 << " " << order12);
    REQUIRE(order01 == Catch::Approx(1.0).margin(0.15));
    REQUIRE(order12 == Catch::Approx(1.0).margin(0.15));
}

TEST_CASE("degenerate single-step run completes with finite output") {
    ExactBridgeField f = make_toy();
    SamplerConfig cfg;
    cfg.steps = 1;
    cfg.sigma = f.spec.sigma;
    StateBlock end = integrate_flow(f, mean_at(cfg.t_clamp, f.ep, f.spec), dummy_task(), cfg);
    REQUIRE(end.finite());
}

namespace {

struct ExplodingField final : FieldProvider {
    void eval(double, const StateBlock& x, const Task&, StateBlock& d, StateBlock& s) const override {
        d = StateBlock::zeros(x.length, x.dim);
        s = StateBlock::zeros(x.length, x.dim);
        for (std::size_t i = 0; i < d.q.size(); ++i) d.q[i] = 1e200 * x.q[i] + 1e300;
    }
};

}  // namespace

TEST_CASE("non-finite states abort with the step index") {
    ExplodingField f;
    SamplerConfig cfg;
    cfg.steps = 10;
    cfg.sigma = 0.0;
    StateBlock init = StateBlock::zeros(4, 1);
    try {
        integrate_flow(f, init, dummy_task(), cfg);
        FAIL("expected sampling_diverged_error");
    } catch (const sampling_diverged_error& e) {
        REQUIRE(std::string(e.what()).find("step") != std::string::npos);
    }
}

TEST_CASE("snapshots record the requested flow times") {
    ExactBridgeField f = make_toy();
    SamplerConfig cfg;
    cfg.steps = 100;
    cfg.sigma = f.spec.sigma;
    cfg.snapshot_times = {0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<Snapshot> snaps;
    integrate_flow(f, mean_at(cfg.t_clamp, f.ep, f.spec), dummy_task(), cfg, &snaps);
    REQUIRE(snaps.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) REQUIRE(snaps[i].t == cfg.snapshot_times[i]);
    // the snapshot at t=0.5 sits near the mean path
    REQUIRE(std::abs(snaps[2].state.q[0] - mean_at(0.5, f.ep, f.spec).q[0]) < 5e-3);
}

TEST_CASE("generate is deterministic per seed and diverse across seeds") {
    Planner p = tiny_planner();
    SamplerConfig cfg;
    cfg.steps = 20;
    cfg.sigma = p.bridge.sigma;
    Task task = square_task();

    Rng r1(5), r2(5), r3(6);
    auto a = generate(p, task, cfg, r1);
    auto b = generate(p, task, cfg, r2);
    auto c = generate(p, task, cfg, r3);
    REQUIRE(a.trajectory.q == b.trajectory.q);
    REQUIRE(a.trajectory.q != c.trajectory.q);
    REQUIRE(a.wall_secs >= 0.0);
    REQUIRE(a.trajectory.length == 8);
    REQUIRE(a.trajectory.dim == 2);
    REQUIRE(a.trajectory.dt == p.traj_dt);
    validate_trajectory(a.trajectory);

    Task outside;
    outside.start = {-2.0, 0.0};
    outside.goal = {0.5, 0.5};
    Rng r4(7);
    REQUIRE_THROWS_AS(generate(p, outside, cfg, r4), invalid_input_error);
}

TEST_CASE("the score correction changes outputs on a generic model") {
    Planner p = tiny_planner();
    SamplerConfig cfg;
    cfg.steps = 20;
    cfg.sigma = p.bridge.sigma;
    Task task = square_task();
    Rng r1(11), r2(11);
    auto with = generate(p, task, cfg, r1);
    cfg.score_correction = false;
    auto without = generate(p, task, cfg, r2);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < with.trajectory.q.size(); ++i)
        max_diff = std::max(max_diff, std::abs(with.trajectory.q[i] - without.trajectory.q[i]));
    REQUIRE(max_diff > 0.0);
}

TEST_CASE("batch generation matches sequential split-seed calls") {
    Planner p = tiny_planner();
    SamplerConfig cfg;
    cfg.steps = 15;
    cfg.sigma = p.bridge.sigma;
    cfg.threads = 2;
    std::vector<Task> tasks;
    for (int i = 0; i < 4; ++i) {
        Task t;
        t.start = {-0.6 + 0.05 * i, -0.5};
        t.goal = {0.5, 0.4 + 0.05 * i};
        tasks.push_back(t);
    }
    Rng root(42);
    auto batch = batch_generate(p, tasks, cfg, root);
    REQUIRE(batch.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        REQUIRE(batch[i].ok);
        Rng item = root.split("traj", i);
        auto single = generate(p, tasks[i], cfg, item);
        REQUIRE(batch[i].result.trajectory.q == single.trajectory.q);
    }

    // a batch of one equals the single call bit for bit
    std::vector<Task> one{tasks[0]};
    auto b1 = batch_generate(p, one, cfg, root);
    Rng item0 = root.split("traj", 0);
    auto s1 = generate(p, tasks[0], cfg, item0);
    REQUIRE(b1[0].result.trajectory.q == s1.trajectory.q);

    // per-item failures are reported, not thrown
    std::vector<Task> mixed{tasks[0]};
    Task bad;
    bad.start = {5.0, 0.0};
    bad.goal = {0.0, 0.5};
    mixed.push_back(bad);
    auto outcomes = batch_generate(p, mixed, cfg, root);
    REQUIRE(outcomes[0].ok);
    REQUIRE(!outcomes[1].ok);
    REQUIRE(!outcomes[1].error.empty());
}

TEST_CASE("sampler config invariants") {
    SamplerConfig cfg;
    REQUIRE(cfg.delta() * cfg.steps == 1.0);
    cfg.steps = 0;
    REQUIRE_THROWS_AS(cfg.validate(), invalid_input_error);
    cfg = SamplerConfig{};
    cfg.t_clamp = 0.7;
    REQUIRE_THROWS_AS(cfg.validate(), invalid_input_error);
}
