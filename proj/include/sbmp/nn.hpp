#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sbmp/errors.hpp"
#include "sbmp/rng.hpp"

namespace sbmp::nn {

// Channel-major activation buffer: v[c * length + t].
struct FeatureMap {
    int channels = 0;
    int length = 0;
    std::vector<double> v;

    static FeatureMap zeros(int channels, int length) {
        FeatureMap f;
        f.channels = channels;
        f.length = length;
        f.v.assign(static_cast<std::size_t>(channels) * length, 0.0);
        return f;
    }

    double& at(int c, int t) { return v[static_cast<std::size_t>(c) * length + t]; }
    double at(int c, int t) const { return v[static_cast<std::size_t>(c) * length + t]; }
};

// Flat parameter arena. Layers record (name, offset, dims) at construction;
// values, gradients, and optimizer state are parallel flat vectors.
struct ParamLayout {
    struct Entry {
        std::string name;
        std::size_t offset = 0;
        std::vector<int> dims;

        std::size_t count() const {
            std::size_t n = 1;
            for (int d : dims) n *= static_cast<std::size_t>(d);
            return n;
        }
    };

    std::vector<Entry> entries;
    std::size_t total = 0;

    std::size_t add(std::string name, std::vector<int> dims) {
        Entry e;
        e.name = std::move(name);
        e.offset = total;
        e.dims = std::move(dims);
        total += e.count();
        entries.push_back(std::move(e));
        return entries.back().offset;
    }
};

inline double silu(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return x * s;
}

inline double silu_grad(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

inline void silu_forward(FeatureMap& x) {
    for (double& v : x.v) v = silu(v);
}

// dy in place becomes dx; x_pre is the pre-activation input.
inline void silu_backward(FeatureMap& dy, const FeatureMap& x_pre) {
    for (std::size_t i = 0; i < dy.v.size(); ++i) dy.v[i] *= silu_grad(x_pre.v[i]);
}

// Same-padded 1-D convolution over the temporal axis; stride 2 halves the
// length (inputs are kept divisible upstream).
struct Conv1d {
    int cin = 0, cout = 0, k = 1, stride = 1, pad = 0;
    std::size_t w_off = 0, b_off = 0;

    Conv1d() = default;

    Conv1d(ParamLayout& layout, const std::string& name, int cin_, int cout_, int k_, int stride_ = 1)
        : cin(cin_), cout(cout_), k(k_), stride(stride_), pad((k_ - 1) / 2) {
        w_off = layout.add(name + ".w", {cout, cin, k});
        b_off = layout.add(name + ".b", {cout});
    }

    int out_length(int lin) const { return (lin + 2 * pad - k) / stride + 1; }

    void init(double* p, Rng& rng) const {
        const double bound = 1.0 / std::sqrt(static_cast<double>(cin) * k);
        const std::size_t nw = static_cast<std::size_t>(cout) * cin * k;
        for (std::size_t i = 0; i < nw; ++i) p[w_off + i] = rng.uniform(-bound, bound);
        for (int i = 0; i < cout; ++i) p[b_off + i] = rng.uniform(-bound, bound);
    }

    void init_zero(double* p) const {
        const std::size_t nw = static_cast<std::size_t>(cout) * cin * k;
        for (std::size_t i = 0; i < nw; ++i) p[w_off + i] = 0.0;
        for (int i = 0; i < cout; ++i) p[b_off + i] = 0.0;
    }

    FeatureMap forward(const double* p, const FeatureMap& x) const {
        const int lout = out_length(x.length);
        FeatureMap y = FeatureMap::zeros(cout, lout);
        for (int co = 0; co < cout; ++co) {
            double* yrow = &y.v[static_cast<std::size_t>(co) * lout];
            const double bias = p[b_off + co];
            for (int t = 0; t < lout; ++t) yrow[t] = bias;
            for (int ci = 0; ci < cin; ++ci) {
                const double* xrow = &x.v[static_cast<std::size_t>(ci) * x.length];
                const double* wrow = p + w_off + (static_cast<std::size_t>(co) * cin + ci) * k;
                for (int kk = 0; kk < k; ++kk) {
                    const double wv = wrow[kk];
                    if (wv == 0.0) continue;
                    const int shift = kk - pad;
                    int t0 = 0;
                    while (t0 < lout && t0 * stride + shift < 0) ++t0;
                    int t1 = lout;
                    while (t1 > t0 && (t1 - 1) * stride + shift >= x.length) --t1;
                    for (int t = t0; t < t1; ++t) yrow[t] += wv * xrow[t * stride + shift];
                }
            }
        }
        return y;
    }

    // Accumulates parameter grads into g, returns dL/dx.
    FeatureMap backward(const double* p, double* g, const FeatureMap& x, const FeatureMap& dy) const {
        const int lout = dy.length;
        FeatureMap dx = FeatureMap::zeros(cin, x.length);
        for (int co = 0; co < cout; ++co) {
            const double* dyrow = &dy.v[static_cast<std::size_t>(co) * lout];
            double gb = 0.0;
            for (int t = 0; t < lout; ++t) gb += dyrow[t];
            g[b_off + co] += gb;
            for (int ci = 0; ci < cin; ++ci) {
                const double* xrow = &x.v[static_cast<std::size_t>(ci) * x.length];
                double* dxrow = &dx.v[static_cast<std::size_t>(ci) * x.length];
                const double* wrow = p + w_off + (static_cast<std::size_t>(co) * cin + ci) * k;
                double* gwrow = g + w_off + (static_cast<std::size_t>(co) * cin + ci) * k;
                for (int kk = 0; kk < k; ++kk) {
                    const int shift = kk - pad;
                    int t0 = 0;
                    while (t0 < lout && t0 * stride + shift < 0) ++t0;
                    int t1 = lout;
                    while (t1 > t0 && (t1 - 1) * stride + shift >= x.length) --t1;
                    double gw = 0.0;
                    const double wv = wrow[kk];
                    for (int t = t0; t < t1; ++t) {
                        const int u = t * stride + shift;
                        gw += dyrow[t] * xrow[u];
                        dxrow[u] += wv * dyrow[t];
                    }
                    gwrow[kk] += gw;
                }
            }
        }
        return dx;
    }
};

struct Linear {
    int in = 0, out = 0;
    std::size_t w_off = 0, b_off = 0;

    Linear() = default;

    Linear(ParamLayout& layout, const std::string& name, int in_, int out_) : in(in_), out(out_) {
        w_off = layout.add(name + ".w", {out, in});
        b_off = layout.add(name + ".b", {out});
    }

    void init(double* p, Rng& rng) const {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        for (std::size_t i = 0; i < static_cast<std::size_t>(out) * in; ++i) p[w_off + i] = rng.uniform(-bound, bound);
        for (int i = 0; i < out; ++i) p[b_off + i] = rng.uniform(-bound, bound);
    }

    std::vector<double> forward(const double* p, const std::vector<double>& x) const {
        std::vector<double> y(out);
        for (int o = 0; o < out; ++o) {
            double s = p[b_off + o];
            const double* wrow = p + w_off + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) s += wrow[i] * x[i];
            y[o] = s;
        }
        return y;
    }

    std::vector<double> backward(const double* p, double* g, const std::vector<double>& x,
                                 const std::vector<double>& dy) const {
        std::vector<double> dx(in, 0.0);
        for (int o = 0; o < out; ++o) {
            const double d = dy[o];
            g[b_off + o] += d;
            const double* wrow = p + w_off + static_cast<std::size_t>(o) * in;
            double* gwrow = g + w_off + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) {
                gwrow[i] += d * x[i];
                dx[i] += wrow[i] * d;
            }
        }
        return dx;
    }
};

// Group normalization over (channels-in-group x length); batch independent.
struct GroupNorm {
    int channels = 0, groups = 1;
    std::size_t gamma_off = 0, beta_off = 0;
    static constexpr double kEps = 1e-5;

    GroupNorm() = default;

    GroupNorm(ParamLayout& layout, const std::string& name, int channels_) : channels(channels_) {
        groups = 1;
        for (int cand = std::min(8, channels); cand >= 1; --cand) {
            if (channels % cand == 0) {
                groups = cand;
                break;
            }
        }
        gamma_off = layout.add(name + ".gamma", {channels});
        beta_off = layout.add(name + ".beta", {channels});
    }

    void init(double* p) const {
        for (int c = 0; c < channels; ++c) {
            p[gamma_off + c] = 1.0;
            p[beta_off + c] = 0.0;
        }
    }

    struct Cache {
        std::vector<double> xhat;
        std::vector<double> inv_std;  // per group
        int length = 0;
    };

    FeatureMap forward(const double* p, const FeatureMap& x, Cache& cache) const {
        const int L = x.length;
        const int per = channels / groups;
        const std::size_t m = static_cast<std::size_t>(per) * L;
        cache.xhat.resize(x.v.size());
        cache.inv_std.assign(groups, 0.0);
        cache.length = L;
        FeatureMap y = FeatureMap::zeros(channels, L);
        for (int gidx = 0; gidx < groups; ++gidx) {
            const std::size_t base = static_cast<std::size_t>(gidx) * per * L;
            double mean = 0.0;
            for (std::size_t i = 0; i < m; ++i) mean += x.v[base + i];
            mean /= static_cast<double>(m);
            double var = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double d = x.v[base + i] - mean;
                var += d * d;
            }
            var /= static_cast<double>(m);
            const double inv_std = 1.0 / std::sqrt(var + kEps);
            cache.inv_std[gidx] = inv_std;
            for (int c = 0; c < per; ++c) {
                const int ch = gidx * per + c;
                const double gamma = p[gamma_off + ch];
                const double beta = p[beta_off + ch];
                for (int t = 0; t < L; ++t) {
                    const std::size_t i = base + static_cast<std::size_t>(c) * L + t;
                    const double xh = (x.v[i] - mean) * inv_std;
                    cache.xhat[i] = xh;
                    y.v[i] = gamma * xh + beta;
                }
            }
        }
        return y;
    }

    FeatureMap backward(const double* p, double* g, const FeatureMap& dy, const Cache& cache) const {
        const int L = cache.length;
        const int per = channels / groups;
        const std::size_t m = static_cast<std::size_t>(per) * L;
        FeatureMap dx = FeatureMap::zeros(channels, L);
        for (int gidx = 0; gidx < groups; ++gidx) {
            const std::size_t base = static_cast<std::size_t>(gidx) * per * L;
            double sum_dxh = 0.0, sum_dxh_xh = 0.0;
            for (int c = 0; c < per; ++c) {
                const int ch = gidx * per + c;
                const double gamma = p[gamma_off + ch];
                double dgamma = 0.0, dbeta = 0.0;
                for (int t = 0; t < L; ++t) {
                    const std::size_t i = base + static_cast<std::size_t>(c) * L + t;
                    const double d = dy.v[i];
                    dgamma += d * cache.xhat[i];
                    dbeta += d;
                    const double dxh = d * gamma;
                    sum_dxh += dxh;
                    sum_dxh_xh += dxh * cache.xhat[i];
                }
                g[gamma_off + ch] += dgamma;
                g[beta_off + ch] += dbeta;
            }
            const double inv_m = 1.0 / static_cast<double>(m);
            const double inv_std = cache.inv_std[gidx];
            for (int c = 0; c < per; ++c) {
                const int ch = gidx * per + c;
                const double gamma = p[gamma_off + ch];
                for (int t = 0; t < L; ++t) {
                    const std::size_t i = base + static_cast<std::size_t>(c) * L + t;
                    const double dxh = dy.v[i] * gamma;
                    dx.v[i] = inv_std * (dxh - inv_m * sum_dxh - cache.xhat[i] * inv_m * sum_dxh_xh);
                }
            }
        }
        return dx;
    }
};

inline FeatureMap upsample2(const FeatureMap& x) {
    FeatureMap y = FeatureMap::zeros(x.channels, x.length * 2);
    for (int c = 0; c < x.channels; ++c) {
        const double* xr = &x.v[static_cast<std::size_t>(c) * x.length];
        double* yr = &y.v[static_cast<std::size_t>(c) * y.length];
        for (int t = 0; t < x.length; ++t) {
            yr[2 * t] = xr[t];
            yr[2 * t + 1] = xr[t];
        }
    }
    return y;
}

inline FeatureMap upsample2_backward(const FeatureMap& dy) {
    FeatureMap dx = FeatureMap::zeros(dy.channels, dy.length / 2);
    for (int c = 0; c < dy.channels; ++c) {
        const double* dyr = &dy.v[static_cast<std::size_t>(c) * dy.length];
        double* dxr = &dx.v[static_cast<std::size_t>(c) * dx.length];
        for (int t = 0; t < dx.length; ++t) dxr[t] = dyr[2 * t] + dyr[2 * t + 1];
    }
    return dx;
}

// Log-spaced sinusoidal features of the flow time.
inline std::vector<double> sinusoidal_embedding(double t, int dim) {
    std::vector<double> e(dim);
    const int half = dim / 2;
    for (int j = 0; j < half; ++j) {
        const double freq = half > 1 ? std::exp(std::log(1000.0) * j / (half - 1)) : 1.0;
        e[2 * j] = std::sin(freq * t);
        e[2 * j + 1] = std::cos(freq * t);
    }
    return e;
}

// conv -> norm -> +cond -> silu -> conv -> norm -> silu, with a residual
// skip around the whole block.
struct ResBlock {
    Conv1d c1, c2;
    GroupNorm n1, n2;
    Linear cond;

    ResBlock() = default;

    ResBlock(ParamLayout& layout, const std::string& name, int channels, int cond_dim, int kernel)
        : c1(layout, name + ".c1", channels, channels, kernel),
          c2(layout, name + ".c2", channels, channels, kernel),
          n1(layout, name + ".n1", channels),
          n2(layout, name + ".n2", channels),
          cond(layout, name + ".cond", cond_dim, channels) {}

    void init(double* p, Rng& rng) const {
        c1.init(p, rng);
        c2.init(p, rng);
        n1.init(p);
        n2.init(p);
        cond.init(p, rng);
    }

    struct Cache {
        FeatureMap x;       // block input (also the residual)
        FeatureMap c_pre;   // pre-activation after cond add
        FeatureMap e;       // input of c2
        FeatureMap h_pre;   // pre-activation after n2
        GroupNorm::Cache g1, g2;
        std::vector<double> cond_in;
    };

    FeatureMap forward(const double* p, const FeatureMap& x, const std::vector<double>& cond_vec,
                       Cache& cache) const {
        cache.x = x;
        cache.cond_in = cond_vec;
        FeatureMap a = c1.forward(p, x);
        FeatureMap b = n1.forward(p, a, cache.g1);
        const std::vector<double> proj = cond.forward(p, cond_vec);
        for (int c = 0; c < b.channels; ++c) {
            double* row = &b.v[static_cast<std::size_t>(c) * b.length];
            for (int t = 0; t < b.length; ++t) row[t] += proj[c];
        }
        cache.c_pre = b;
        silu_forward(b);
        cache.e = b;
        FeatureMap f = c2.forward(p, b);
        FeatureMap h = n2.forward(p, f, cache.g2);
        cache.h_pre = h;
        silu_forward(h);
        for (std::size_t i = 0; i < h.v.size(); ++i) h.v[i] += x.v[i];
        return h;
    }

    // dcond accumulates the gradient w.r.t. the conditioning vector.
    FeatureMap backward(const double* p, double* g, const FeatureMap& dy, const Cache& cache,
                        std::vector<double>& dcond) const {
        FeatureMap ds = dy;
        silu_backward(ds, cache.h_pre);
        FeatureMap df = n2.backward(p, g, ds, cache.g2);
        FeatureMap de = c2.backward(p, g, cache.e, df);
        silu_backward(de, cache.c_pre);
        std::vector<double> dproj(cond.out, 0.0);
        for (int c = 0; c < de.channels; ++c) {
            const double* row = &de.v[static_cast<std::size_t>(c) * de.length];
            double s = 0.0;
            for (int t = 0; t < de.length; ++t) s += row[t];
            dproj[c] = s;
        }
        const std::vector<double> dcond_local = cond.backward(p, g, cache.cond_in, dproj);
        for (std::size_t i = 0; i < dcond.size(); ++i) dcond[i] += dcond_local[i];
        FeatureMap da = n1.backward(p, g, de, cache.g1);
        FeatureMap dx = c1.backward(p, g, cache.x, da);
        for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dy.v[i];
        return dx;
    }
};

}  // namespace sbmp::nn
