#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sbmp/errors.hpp"
#include "sbmp/nn.hpp"
#include "sbmp/rng.hpp"
#include "sbmp/types.hpp"

namespace sbmp::model {

// Encoder-decoder shape. Defaults are desk-scale; the gradient-check suite
// runs a much smaller instance of the same code paths.
struct ArchSpec {
    int levels = 3;
    std::vector<int> widths{32, 64, 128};
    int time_embed_dim = 64;
    int cond_dim = 64;
    int kernel = 5;
    // Paper-style variant: separate trunks for the flow and score heads.
    bool two_networks = false;

    void validate() const {
        if (levels < 1) throw invalid_input_error("arch needs levels >= 1");
        if (static_cast<int>(widths.size()) != levels) throw invalid_input_error("arch needs one width per level");
        for (int i = 0; i < levels; ++i) {
            if (widths[i] < 1) throw invalid_input_error("arch widths must be positive");
            if (i > 0 && widths[i] <= widths[i - 1])
                throw invalid_input_error("arch widths must be strictly increasing");
        }
        if (time_embed_dim < 2 || time_embed_dim % 2 != 0)
            throw invalid_input_error("time_embed_dim must be even and >= 2");
        if (cond_dim < 1) throw invalid_input_error("cond_dim must be positive");
        if (kernel < 1 || kernel % 2 == 0) throw invalid_input_error("kernel must be odd");
    }

    int length_divisor() const { return 1 << (levels - 1); }
};

inline nn::FeatureMap block_to_map(const StateBlock& s) {
    nn::FeatureMap f = nn::FeatureMap::zeros(3 * s.dim, s.length);
    for (int ch = 0; ch < 3; ++ch) {
        const std::vector<double>& src = s.channel(ch);
        for (int j = 0; j < s.dim; ++j) {
            double* row = &f.v[static_cast<std::size_t>(ch * s.dim + j) * s.length];
            for (int t = 0; t < s.length; ++t) row[t] = src[static_cast<std::size_t>(t) * s.dim + j];
        }
    }
    return f;
}

inline StateBlock map_to_block(const nn::FeatureMap& f, int dim) {
    StateBlock s = StateBlock::zeros(f.length, dim);
    for (int ch = 0; ch < 3; ++ch) {
        std::vector<double>& dst = s.channel(ch);
        for (int j = 0; j < dim; ++j) {
            const double* row = &f.v[static_cast<std::size_t>(ch * dim + j) * f.length];
            for (int t = 0; t < f.length; ++t) dst[static_cast<std::size_t>(t) * dim + j] = row[t];
        }
    }
    return s;
}

// One encoder-decoder trunk with 1 or 2 output heads.
struct UNet {
    ArchSpec arch;
    int d = 0, L = 0, n_heads = 1;

    nn::Conv1d stem;
    std::vector<nn::ResBlock> enc;
    std::vector<nn::Conv1d> down;
    nn::ResBlock mid;
    std::vector<nn::Conv1d> up;  // decoder convs applied after x2 upsampling
    std::vector<nn::ResBlock> dec;
    std::vector<nn::Conv1d> heads;
    nn::Linear time_l1, time_l2, task_l1, task_l2;

    UNet() = default;

    UNet(nn::ParamLayout& layout, const std::string& prefix, const ArchSpec& a, int d_, int L_, int n_heads_)
        : arch(a), d(d_), L(L_), n_heads(n_heads_) {
        const int cin = 3 * d;
        // the stem also sees a fixed position ramp so per-row location along
        // the horizon is directly available (convs are shift-equivariant)
        stem = nn::Conv1d(layout, prefix + ".stem", cin + 1, a.widths[0], a.kernel);
        for (int i = 0; i < a.levels; ++i)
            enc.emplace_back(layout, prefix + ".enc" + std::to_string(i), a.widths[i], a.cond_dim, a.kernel);
        for (int i = 0; i + 1 < a.levels; ++i)
            down.emplace_back(layout, prefix + ".down" + std::to_string(i), a.widths[i], a.widths[i + 1], a.kernel, 2);
        mid = nn::ResBlock(layout, prefix + ".mid", a.widths[a.levels - 1], a.cond_dim, a.kernel);
        for (int i = a.levels - 2; i >= 0; --i) {
            up.emplace_back(layout, prefix + ".up" + std::to_string(i), a.widths[i + 1], a.widths[i], a.kernel);
            dec.emplace_back(layout, prefix + ".dec" + std::to_string(i), a.widths[i], a.cond_dim, a.kernel);
        }
        for (int h = 0; h < n_heads; ++h)
            heads.emplace_back(layout, prefix + ".head" + std::to_string(h), a.widths[0], cin, a.kernel);
        time_l1 = nn::Linear(layout, prefix + ".time_l1", a.time_embed_dim, a.cond_dim);
        time_l2 = nn::Linear(layout, prefix + ".time_l2", a.cond_dim, a.cond_dim);
        task_l1 = nn::Linear(layout, prefix + ".task_l1", 2 * d, a.cond_dim);
        task_l2 = nn::Linear(layout, prefix + ".task_l2", a.cond_dim, a.cond_dim);
    }

    void init(double* p, Rng& rng) const {
        stem.init(p, rng);
        for (const auto& b : enc) b.init(p, rng);
        for (const auto& c : down) c.init(p, rng);
        mid.init(p, rng);
        for (const auto& c : up) c.init(p, rng);
        for (const auto& b : dec) b.init(p, rng);
        for (const auto& h : heads) h.init_zero(p);
        time_l1.init(p, rng);
        time_l2.init(p, rng);
        task_l1.init(p, rng);
        task_l2.init(p, rng);
    }

    struct Cache {
        std::vector<double> sin_embed, time_h1, time_act, task_in, task_h1, task_act;
        nn::FeatureMap input;
        std::vector<nn::ResBlock::Cache> enc_c;
        std::vector<nn::FeatureMap> enc_out;  // skip sources / mid input
        nn::ResBlock::Cache mid_c;
        std::vector<nn::FeatureMap> up_in;  // upsampled maps fed to up convs
        std::vector<nn::ResBlock::Cache> dec_c;
        nn::FeatureMap trunk_out;
    };

    std::vector<double> make_cond(const double* p, double t, const std::vector<double>& task_vec,
                                  Cache& cache) const {
        cache.sin_embed = nn::sinusoidal_embedding(t, arch.time_embed_dim);
        cache.time_h1 = time_l1.forward(p, cache.sin_embed);
        cache.time_act = cache.time_h1;
        for (double& v : cache.time_act) v = nn::silu(v);
        std::vector<double> time_out = time_l2.forward(p, cache.time_act);
        cache.task_in = task_vec;
        cache.task_h1 = task_l1.forward(p, task_vec);
        cache.task_act = cache.task_h1;
        for (double& v : cache.task_act) v = nn::silu(v);
        std::vector<double> task_out = task_l2.forward(p, cache.task_act);
        for (int i = 0; i < arch.cond_dim; ++i) time_out[i] += task_out[i];
        return time_out;
    }

    // Returns one FeatureMap per head (channels = 3d, length = L).
    std::vector<nn::FeatureMap> forward(const double* p, double t, const nn::FeatureMap& input,
                                        const std::vector<double>& task_vec, Cache& cache) const {
        const int n = arch.levels;
        const std::vector<double> cond = make_cond(p, t, task_vec, cache);
        nn::FeatureMap augmented = nn::FeatureMap::zeros(input.channels + 1, L);
        std::copy(input.v.begin(), input.v.end(), augmented.v.begin());
        for (int tt = 0; tt < L; ++tt)
            augmented.at(input.channels, tt) = 2.0 * tt / (L - 1) - 1.0;
        cache.input = std::move(augmented);
        nn::FeatureMap x = stem.forward(p, cache.input);
        cache.enc_c.resize(n);
        cache.enc_out.resize(n);
        for (int i = 0; i < n; ++i) {
            x = enc[i].forward(p, x, cond, cache.enc_c[i]);
            cache.enc_out[i] = x;
            if (i + 1 < n) x = down[i].forward(p, x);
        }
        x = mid.forward(p, x, cond, cache.mid_c);
        cache.up_in.resize(n - 1);
        cache.dec_c.resize(n - 1);
        for (int j = 0; j + 1 < n; ++j) {
            const int lvl = n - 2 - j;
            nn::FeatureMap u = nn::upsample2(x);
            cache.up_in[j] = u;
            x = up[j].forward(p, u);
            const nn::FeatureMap& skip = cache.enc_out[lvl];
            for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] += skip.v[i];
            x = dec[j].forward(p, x, cond, cache.dec_c[j]);
        }
        cache.trunk_out = x;
        std::vector<nn::FeatureMap> outs;
        outs.reserve(n_heads);
        for (int h = 0; h < n_heads; ++h) outs.push_back(heads[h].forward(p, x));
        return outs;
    }

    void backward(const double* p, double* g, const std::vector<nn::FeatureMap>& dheads,
                  const Cache& cache) const {
        const int n = arch.levels;
        std::vector<double> dcond(arch.cond_dim, 0.0);
        nn::FeatureMap dx = nn::FeatureMap::zeros(arch.widths[0], L);
        for (int h = 0; h < n_heads; ++h) {
            nn::FeatureMap dh = heads[h].backward(p, g, cache.trunk_out, dheads[h]);
            for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dh.v[i];
        }
        std::vector<nn::FeatureMap> dskip(n > 1 ? n - 1 : 0);
        for (int j = n - 2; j >= 0; --j) {
            const int lvl = n - 2 - j;
            dx = dec[j].backward(p, g, dx, cache.dec_c[j], dcond);
            dskip[lvl] = dx;  // the skip branch sees the same gradient
            nn::FeatureMap du = up[j].backward(p, g, cache.up_in[j], dx);
            dx = nn::upsample2_backward(du);
        }
        dx = mid.backward(p, g, dx, cache.mid_c, dcond);
        for (int i = n - 1; i >= 0; --i) {
            if (i < n - 1)
                for (std::size_t e = 0; e < dx.v.size(); ++e) dx.v[e] += dskip[i].v[e];
            dx = enc[i].backward(p, g, dx, cache.enc_c[i], dcond);
            if (i > 0) dx = down[i - 1].backward(p, g, cache.enc_out[i - 1], dx);
        }
        stem.backward(p, g, cache.input, dx);

        // conditioning branches (cond = time MLP + task MLP)
        std::vector<double> d_act = time_l2.backward(p, g, cache.time_act, dcond);
        for (std::size_t i = 0; i < d_act.size(); ++i) d_act[i] *= nn::silu_grad(cache.time_h1[i]);
        time_l1.backward(p, g, cache.sin_embed, d_act);
        d_act = task_l2.backward(p, g, cache.task_act, dcond);
        for (std::size_t i = 0; i < d_act.size(); ++i) d_act[i] *= nn::silu_grad(cache.task_h1[i]);
        task_l1.backward(p, g, cache.task_in, d_act);
    }
};

// The trainable conditional field: a joint (flow, scaled-score) approximator
// over trajectory-shaped state blocks with time and task conditioning.
struct FieldModel {
    ArchSpec arch;
    int d = 0, L = 0;
    nn::ParamLayout layout;
    std::vector<UNet> nets;  // one shared trunk with two heads, or two trunks
    std::vector<double> params;

    FieldModel() = default;

    FieldModel(const ArchSpec& a, int d_, int L_) : arch(a), d(d_), L(L_) {
        arch.validate();
        if (d < 1) throw invalid_input_error("model needs d >= 1");
        if (L < 2 || L % arch.length_divisor() != 0)
            throw invalid_input_error("trajectory length must be divisible by 2^(levels-1)");
        if (arch.two_networks) {
            nets.emplace_back(layout, "flow", arch, d, L, 1);
            nets.emplace_back(layout, "score", arch, d, L, 1);
        } else {
            nets.emplace_back(layout, "net", arch, d, L, 2);
        }
        params.assign(layout.total, 0.0);
    }

    std::size_t param_count() const { return layout.total; }

    static FieldModel init(const ArchSpec& a, int d, int L, Rng& rng) {
        FieldModel m(a, d, L);
        for (const UNet& net : m.nets) net.init(m.params.data(), rng);
        return m;
    }

    static std::vector<double> task_vector(const Task& task) {
        std::vector<double> v;
        v.reserve(task.start.size() * 2);
        v.insert(v.end(), task.start.begin(), task.start.end());
        v.insert(v.end(), task.goal.begin(), task.goal.end());
        return v;
    }

    struct TrainCache {
        std::vector<UNet::Cache> net_caches;
    };

    void check_shapes(double t, const StateBlock& state, const Task& task) const {
        if (t < 0.0 || t > 1.0) throw invalid_input_error("flow time outside [0,1]");
        if (state.length != L || state.dim != d) throw invalid_input_error("state block shape mismatch");
        if (task.dim() != d) throw invalid_input_error("task dimension mismatch");
    }

    // (flow field, sigma_t-scaled score) prediction with caches retained for
    // a subsequent backward pass.
    std::pair<StateBlock, StateBlock> forward_train(double t, const StateBlock& state, const Task& task,
                                                    TrainCache& cache) const {
        check_shapes(t, state, task);
        const nn::FeatureMap input = block_to_map(state);
        const std::vector<double> task_vec = task_vector(task);
        cache.net_caches.resize(nets.size());
        if (nets.size() == 1) {
            auto outs = nets[0].forward(params.data(), t, input, task_vec, cache.net_caches[0]);
            return {map_to_block(outs[0], d), map_to_block(outs[1], d)};
        }
        auto flow_out = nets[0].forward(params.data(), t, input, task_vec, cache.net_caches[0]);
        auto score_out = nets[1].forward(params.data(), t, input, task_vec, cache.net_caches[1]);
        return {map_to_block(flow_out[0], d), map_to_block(score_out[0], d)};
    }

    void backward_train(const TrainCache& cache, const StateBlock& d_drift, const StateBlock& d_score,
                        double* g) const {
        if (nets.size() == 1) {
            nets[0].backward(params.data(), g, {block_to_map(d_drift), block_to_map(d_score)}, cache.net_caches[0]);
        } else {
            nets[0].backward(params.data(), g, {block_to_map(d_drift)}, cache.net_caches[0]);
            nets[1].backward(params.data(), g, {block_to_map(d_score)}, cache.net_caches[1]);
        }
    }

    // Inference entry point; validates parameters before evaluating.
    std::pair<StateBlock, StateBlock> forward(double t, const StateBlock& state, const Task& task) const {
        if (!all_finite(params)) throw corrupt_model_error("model parameters are not finite");
        TrainCache scratch;
        return forward_train(t, state, task, scratch);
    }
};

}  // namespace sbmp::model
