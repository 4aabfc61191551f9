#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "pcc/common.hpp"
#include "pcc/rng.hpp"
#include "pcc/tensor.hpp"

// Fixed-graph neural toolkit. Networks here are built from a handful of
// layer types, each of which caches whatever its hand-derived backward pass
// needs. There is no general autodiff; the caller composes forward calls and
// then runs backward in reverse order.
//
// Batches are vectors of per-sample tensors shaped [channels x points].
// Fully-connected layers are the points==1 special case of the pointwise
// convolution, so the decoder reuses the same layer types.

namespace pcc {

template <typename T>
using batch = std::vector<tensor<T>>;

// ---------------------------------------------------------------------------
// parameter store + Adam

template <typename T>
struct param {
    std::string name;
    tensor<T> value;
    tensor<T> grad;
    tensor<T> m;  // Adam first moment
    tensor<T> v;  // Adam second moment
};

template <typename T>
struct param_store {
    std::vector<param<T>> params;
    int64_t step = 0;

    std::size_t add(const std::string& name, tensor<T> init) {
        param<T> p;
        p.name = name;
        p.grad = tensor<T>(init.shape);
        p.m = tensor<T>(init.shape);
        p.v = tensor<T>(init.shape);
        p.value = std::move(init);
        params.push_back(std::move(p));
        return params.size() - 1;
    }

    param<T>& operator[](std::size_t h) { return params[h]; }
    const param<T>& operator[](std::size_t h) const { return params[h]; }

    void zero_grad() {
        for (auto& p : params) p.grad.fill(T(0));
    }

    std::size_t total_values() const {
        std::size_t n = 0;
        for (const auto& p : params) n += p.value.numel();
        return n;
    }

    // One Adam update with bias correction. Throws if any gradient is not
    // finite, naming the offending parameter.
    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8) {
        ++step;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (auto& p : params) {
            for (std::size_t i = 0; i < p.value.numel(); ++i) {
                const double g = static_cast<double>(p.grad[i]);
                if (!std::isfinite(g))
                    throw std::runtime_error("non-finite gradient in parameter '" +
                                             p.name + "' at step " +
                                             std::to_string(step));
                double m = beta1 * static_cast<double>(p.m[i]) + (1.0 - beta1) * g;
                double v = beta2 * static_cast<double>(p.v[i]) + (1.0 - beta2) * g * g;
                p.m[i] = static_cast<T>(m);
                p.v[i] = static_cast<T>(v);
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) -
                                            lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }
};

// ---------------------------------------------------------------------------
// pointwise convolution (kernel size 1), optionally grouped
//
// out[co, p] = bias[co] + sum_ci w[co, ci_local] * in[group_base + ci_local, p]
// Column p of the output depends only on column p of the input.

template <typename T>
struct conv1x1 {
    std::size_t in_ch = 0, out_ch = 0, groups = 1;
    std::size_t w = 0, b = 0;  // param handles
    batch<T> cache_in;

    static conv1x1 create(param_store<T>& store, const std::string& name,
                          std::size_t in_ch, std::size_t out_ch, std::size_t groups,
                          rng& r) {
        check_arg(groups >= 1, name + ": groups must be >= 1");
        check_arg(in_ch % groups == 0 && out_ch % groups == 0,
                  name + ": groups must divide channel counts");
        conv1x1 c;
        c.in_ch = in_ch;
        c.out_ch = out_ch;
        c.groups = groups;
        const std::size_t fan_in = in_ch / groups;
        tensor<T> weights({out_ch, fan_in});
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (auto& v : weights.data) v = static_cast<T>(r.uniform(-bound, bound));
        c.w = store.add(name + ".weight", std::move(weights));
        c.b = store.add(name + ".bias", tensor<T>({out_ch}));
        return c;
    }

    std::size_t macs_per_point() const { return in_ch * out_ch / groups; }

    tensor<T> forward_one(const param_store<T>& store, const tensor<T>& x) const {
        check_arg(x.shape.size() == 2 && x.rows() == in_ch,
                  "conv: input shape " + shape_str(x) + " does not match " +
                      std::to_string(in_ch) + " channels");
        const std::size_t P = x.cols();
        const std::size_t gs_in = in_ch / groups;
        const std::size_t gs_out = out_ch / groups;
        const tensor<T>& W = store[w].value;
        const tensor<T>& B = store[b].value;
        tensor<T> out({out_ch, P});
        for (std::size_t co = 0; co < out_ch; ++co) {
            const std::size_t g0 = (co / gs_out) * gs_in;
            T* orow = &out.data[co * P];
            const T bias = B[co];
            for (std::size_t p = 0; p < P; ++p) orow[p] = bias;
            for (std::size_t cil = 0; cil < gs_in; ++cil) {
                const T wv = W.at(co, cil);
                const T* irow = &x.data[(g0 + cil) * P];
                for (std::size_t p = 0; p < P; ++p) orow[p] += wv * irow[p];
            }
        }
        return out;
    }

    batch<T> forward(const param_store<T>& store, const batch<T>& in, bool record) {
        batch<T> out(in.size());
        for (std::size_t s = 0; s < in.size(); ++s) out[s] = forward_one(store, in[s]);
        if (record) cache_in = in;
        return out;
    }

    batch<T> backward(param_store<T>& store, const batch<T>& grad_out) {
        check(cache_in.size() == grad_out.size(), "conv: no recorded forward");
        const std::size_t gs_in = in_ch / groups;
        const std::size_t gs_out = out_ch / groups;
        const tensor<T>& W = store[w].value;
        tensor<T>& dW = store[w].grad;
        tensor<T>& dB = store[b].grad;
        batch<T> grad_in(grad_out.size());
        for (std::size_t s = 0; s < grad_out.size(); ++s) {
            const tensor<T>& x = cache_in[s];
            const tensor<T>& g = grad_out[s];
            const std::size_t P = x.cols();
            tensor<T> dx({in_ch, P});
            for (std::size_t co = 0; co < out_ch; ++co) {
                const std::size_t g0 = (co / gs_out) * gs_in;
                const T* grow = &g.data[co * P];
                T gsum = T(0);
                for (std::size_t p = 0; p < P; ++p) gsum += grow[p];
                dB[co] += gsum;
                for (std::size_t cil = 0; cil < gs_in; ++cil) {
                    const T* irow = &x.data[(g0 + cil) * P];
                    T* dxrow = &dx.data[(g0 + cil) * P];
                    const T wv = W.at(co, cil);
                    T acc = T(0);
                    for (std::size_t p = 0; p < P; ++p) {
                        acc += grow[p] * irow[p];
                        dxrow[p] += wv * grow[p];
                    }
                    dW.at(co, cil) += acc;
                }
            }
            grad_in[s] = std::move(dx);
        }
        return grad_in;
    }
};

// ---------------------------------------------------------------------------
// channel shuffle: the transpose-of-groups permutation from grouped-conv
// architectures. Values are untouched; only channel order changes.
// Output channel q is sourced from input channel (q % g) * (C/g) + q / g.

inline std::size_t shuffle_source(std::size_t q, std::size_t channels, std::size_t groups) {
    return (q % groups) * (channels / groups) + q / groups;
}

template <typename T>
struct channel_shuffle {
    std::size_t channels = 0, groups = 1;

    channel_shuffle() = default;
    channel_shuffle(std::size_t channels, std::size_t groups)
        : channels(channels), groups(groups) {
        check_arg(groups >= 1 && channels % groups == 0,
                  "channel_shuffle: groups must divide channel count");
    }

    tensor<T> apply_one(const tensor<T>& x) const {
        check_arg(x.shape.size() == 2 && x.rows() == channels,
                  "channel_shuffle: bad input shape " + shape_str(x));
        const std::size_t P = x.cols();
        tensor<T> out({channels, P});
        for (std::size_t q = 0; q < channels; ++q) {
            const std::size_t src = shuffle_source(q, channels, groups);
            std::copy_n(&x.data[src * P], P, &out.data[q * P]);
        }
        return out;
    }

    batch<T> forward(const batch<T>& in, bool /*record*/) const {
        batch<T> out(in.size());
        for (std::size_t s = 0; s < in.size(); ++s) out[s] = apply_one(in[s]);
        return out;
    }

    batch<T> backward(const batch<T>& grad_out) const {
        batch<T> grad_in(grad_out.size());
        for (std::size_t s = 0; s < grad_out.size(); ++s) {
            const tensor<T>& g = grad_out[s];
            const std::size_t P = g.cols();
            tensor<T> dx({channels, P});
            for (std::size_t q = 0; q < channels; ++q) {
                const std::size_t src = shuffle_source(q, channels, groups);
                std::copy_n(&g.data[q * P], P, &dx.data[src * P]);
            }
            grad_in[s] = std::move(dx);
        }
        return grad_in;
    }
};

// ---------------------------------------------------------------------------
// relu

template <typename T>
struct relu {
    batch<T> cache_in;

    batch<T> forward(const batch<T>& in, bool record) {
        batch<T> out(in.size());
        for (std::size_t s = 0; s < in.size(); ++s) {
            out[s] = in[s];
            for (auto& v : out[s].data) v = v > T(0) ? v : T(0);
        }
        if (record) cache_in = in;
        return out;
    }

    batch<T> backward(const batch<T>& grad_out) {
        check(cache_in.size() == grad_out.size(), "relu: no recorded forward");
        batch<T> grad_in(grad_out.size());
        for (std::size_t s = 0; s < grad_out.size(); ++s) {
            grad_in[s] = grad_out[s];
            for (std::size_t i = 0; i < grad_in[s].numel(); ++i)
                if (!(cache_in[s][i] > T(0))) grad_in[s][i] = T(0);
        }
        return grad_in;
    }
};

// ---------------------------------------------------------------------------
// batch normalization
//
// Train mode normalizes with statistics over every column of every sample in
// the batch; eval mode is a per-channel affine map using running statistics,
// so it commutes with point permutation bit-for-bit.

template <typename T>
struct batch_norm {
    std::string name;
    std::size_t channels = 0;
    std::size_t gamma = 0, beta = 0;  // param handles
    tensor<T> running_mean, running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    // backward caches
    batch<T> cache_xhat;
    tensor<T> cache_inv_std;
    double cache_n = 0;
    bool cache_train = false;

    static batch_norm create(param_store<T>& store, const std::string& name,
                             std::size_t channels) {
        batch_norm bn;
        bn.name = name;
        bn.channels = channels;
        bn.gamma = store.add(name + ".gamma", tensor<T>({channels}, T(1)));
        bn.beta = store.add(name + ".beta", tensor<T>({channels}));
        bn.running_mean = tensor<T>({channels});
        bn.running_var = tensor<T>({channels}, T(1));
        return bn;
    }

    // eval-mode map for one sample without touching any caches; safe for
    // concurrent callers on frozen parameters
    tensor<T> forward_one_eval(const param_store<T>& store, const tensor<T>& x) const {
        check_arg(x.shape.size() == 2 && x.rows() == channels,
                  "batch_norm: bad input shape " + shape_str(x));
        const tensor<T>& G = store[gamma].value;
        const tensor<T>& B = store[beta].value;
        const std::size_t P = x.cols();
        tensor<T> y({channels, P});
        for (std::size_t c = 0; c < channels; ++c) {
            const double sd = static_cast<double>(G[c]) /
                              std::sqrt(static_cast<double>(running_var[c]) + eps);
            const T scale = static_cast<T>(sd);
            const T shift = static_cast<T>(static_cast<double>(B[c]) -
                                           sd * static_cast<double>(running_mean[c]));
            for (std::size_t p = 0; p < P; ++p) y.at(c, p) = scale * x.at(c, p) + shift;
        }
        return y;
    }

    batch<T> forward(param_store<T>& store, const batch<T>& in, bool train,
                     bool record) {
        for (const auto& x : in)
            check_arg(x.shape.size() == 2 && x.rows() == channels,
                      "batch_norm: bad input shape " + shape_str(x));
        const tensor<T>& G = store[gamma].value;
        const tensor<T>& B = store[beta].value;
        batch<T> out(in.size());
        if (!train) {
            // per-channel affine: scale = gamma / sqrt(rv + eps)
            std::vector<T> scale(channels), shift(channels);
            for (std::size_t c = 0; c < channels; ++c) {
                const double s = static_cast<double>(G[c]) /
                                 std::sqrt(static_cast<double>(running_var[c]) + eps);
                scale[c] = static_cast<T>(s);
                shift[c] = static_cast<T>(static_cast<double>(B[c]) -
                                          s * static_cast<double>(running_mean[c]));
            }
            for (std::size_t s = 0; s < in.size(); ++s) {
                const tensor<T>& x = in[s];
                const std::size_t P = x.cols();
                tensor<T> y({channels, P});
                for (std::size_t c = 0; c < channels; ++c)
                    for (std::size_t p = 0; p < P; ++p)
                        y.at(c, p) = scale[c] * x.at(c, p) + shift[c];
                out[s] = std::move(y);
            }
            if (record) {
                cache_train = false;
                cache_xhat.resize(in.size());
                for (std::size_t s = 0; s < in.size(); ++s) {
                    const tensor<T>& x = in[s];
                    tensor<T> xh(x.shape);
                    for (std::size_t c = 0; c < channels; ++c) {
                        const double inv =
                            1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps);
                        for (std::size_t p = 0; p < x.cols(); ++p)
                            xh.at(c, p) = static_cast<T>(
                                (static_cast<double>(x.at(c, p)) -
                                 static_cast<double>(running_mean[c])) * inv);
                    }
                    cache_xhat[s] = std::move(xh);
                }
                cache_inv_std = tensor<T>({channels});
                for (std::size_t c = 0; c < channels; ++c)
                    cache_inv_std[c] = static_cast<T>(
                        1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps));
            } else {
                cache_xhat.clear();
            }
            return out;
        }

        // batch statistics in double to keep the mean/variance properties tight
        std::size_t n = 0;
        std::vector<double> mean(channels, 0.0), var(channels, 0.0);
        for (const auto& x : in) {
            n += x.cols();
            for (std::size_t c = 0; c < channels; ++c)
                for (std::size_t p = 0; p < x.cols(); ++p)
                    mean[c] += static_cast<double>(x.at(c, p));
        }
        check_arg(n > 0, "batch_norm: empty batch");
        for (std::size_t c = 0; c < channels; ++c) mean[c] /= static_cast<double>(n);
        for (const auto& x : in)
            for (std::size_t c = 0; c < channels; ++c)
                for (std::size_t p = 0; p < x.cols(); ++p) {
                    const double d = static_cast<double>(x.at(c, p)) - mean[c];
                    var[c] += d * d;
                }
        for (std::size_t c = 0; c < channels; ++c) var[c] /= static_cast<double>(n);

        std::vector<double> inv_std(channels);
        for (std::size_t c = 0; c < channels; ++c)
            inv_std[c] = 1.0 / std::sqrt(var[c] + eps);

        cache_xhat.assign(in.size(), tensor<T>());
        for (std::size_t s = 0; s < in.size(); ++s) {
            const tensor<T>& x = in[s];
            const std::size_t P = x.cols();
            tensor<T> xh({channels, P});
            tensor<T> y({channels, P});
            for (std::size_t c = 0; c < channels; ++c)
                for (std::size_t p = 0; p < P; ++p) {
                    const double v =
                        (static_cast<double>(x.at(c, p)) - mean[c]) * inv_std[c];
                    xh.at(c, p) = static_cast<T>(v);
                    y.at(c, p) = static_cast<T>(static_cast<double>(G[c]) * v +
                                                static_cast<double>(B[c]));
                }
            cache_xhat[s] = std::move(xh);
            out[s] = std::move(y);
        }

        // running stats use the unbiased variance, as is conventional
        const double unbias = n > 1 ? static_cast<double>(n) / (n - 1.0) : 1.0;
        for (std::size_t c = 0; c < channels; ++c) {
            running_mean[c] = static_cast<T>(
                (1.0 - momentum) * static_cast<double>(running_mean[c]) +
                momentum * mean[c]);
            running_var[c] = static_cast<T>(
                (1.0 - momentum) * static_cast<double>(running_var[c]) +
                momentum * var[c] * unbias);
        }

        if (record) {
            cache_train = true;
            cache_n = static_cast<double>(n);
            cache_inv_std = tensor<T>({channels});
            for (std::size_t c = 0; c < channels; ++c)
                cache_inv_std[c] = static_cast<T>(inv_std[c]);
        } else {
            cache_xhat.clear();
        }
        return out;
    }

    batch<T> backward(param_store<T>& store, const batch<T>& grad_out) {
        check(cache_xhat.size() == grad_out.size(), "batch_norm: no recorded forward");
        const tensor<T>& G = store[gamma].value;
        tensor<T>& dG = store[gamma].grad;
        tensor<T>& dB = store[beta].grad;
        batch<T> grad_in(grad_out.size());

        if (!cache_train) {
            for (std::size_t s = 0; s < grad_out.size(); ++s) {
                const tensor<T>& g = grad_out[s];
                const tensor<T>& xh = cache_xhat[s];
                tensor<T> dx(g.shape);
                for (std::size_t c = 0; c < channels; ++c) {
                    const T k = static_cast<T>(G[c] * cache_inv_std[c]);
                    for (std::size_t p = 0; p < g.cols(); ++p) {
                        dG[c] += g.at(c, p) * xh.at(c, p);
                        dB[c] += g.at(c, p);
                        dx.at(c, p) = k * g.at(c, p);
                    }
                }
                grad_in[s] = std::move(dx);
            }
            return grad_in;
        }

        const double n = cache_n;
        std::vector<double> sum_dxhat(channels, 0.0), sum_dxhat_xhat(channels, 0.0);
        for (std::size_t s = 0; s < grad_out.size(); ++s) {
            const tensor<T>& g = grad_out[s];
            const tensor<T>& xh = cache_xhat[s];
            for (std::size_t c = 0; c < channels; ++c)
                for (std::size_t p = 0; p < g.cols(); ++p) {
                    const double dxh = static_cast<double>(g.at(c, p)) *
                                       static_cast<double>(G[c]);
                    sum_dxhat[c] += dxh;
                    sum_dxhat_xhat[c] += dxh * static_cast<double>(xh.at(c, p));
                    dG[c] += g.at(c, p) * xh.at(c, p);
                    dB[c] += g.at(c, p);
                }
        }
        for (std::size_t s = 0; s < grad_out.size(); ++s) {
            const tensor<T>& g = grad_out[s];
            const tensor<T>& xh = cache_xhat[s];
            tensor<T> dx(g.shape);
            for (std::size_t c = 0; c < channels; ++c) {
                const double inv = static_cast<double>(cache_inv_std[c]);
                const double gm = static_cast<double>(G[c]);
                for (std::size_t p = 0; p < g.cols(); ++p) {
                    const double dxh = static_cast<double>(g.at(c, p)) * gm;
                    const double v = inv * (dxh - sum_dxhat[c] / n -
                                            static_cast<double>(xh.at(c, p)) *
                                                sum_dxhat_xhat[c] / n);
                    dx.at(c, p) = static_cast<T>(v);
                }
            }
            grad_in[s] = std::move(dx);
        }
        return grad_in;
    }
};

// ---------------------------------------------------------------------------
// max pool over the point dimension: [C x P] -> [C x 1], keeping the argmax
// point index per channel. Ties go to the lowest point index.

template <typename T>
struct max_pool {
    std::vector<std::vector<std::size_t>> argmax;  // per sample, per channel
    std::vector<std::size_t> cache_cols;

    batch<T> forward(const batch<T>& in, bool record) {
        batch<T> out(in.size());
        argmax.assign(in.size(), {});
        cache_cols.assign(in.size(), 0);
        for (std::size_t s = 0; s < in.size(); ++s) {
            const tensor<T>& x = in[s];
            check_arg(x.shape.size() == 2 && x.cols() >= 1,
                      "max_pool: input needs at least one point");
            const std::size_t C = x.rows(), P = x.cols();
            tensor<T> y({C, std::size_t(1)});
            std::vector<std::size_t> am(C, 0);
            for (std::size_t c = 0; c < C; ++c) {
                T best = x.at(c, 0);
                std::size_t bi = 0;
                for (std::size_t p = 1; p < P; ++p)
                    if (x.at(c, p) > best) {
                        best = x.at(c, p);
                        bi = p;
                    }
                y.at(c, 0) = best;
                am[c] = bi;
            }
            out[s] = std::move(y);
            argmax[s] = std::move(am);
            cache_cols[s] = P;
        }
        if (!record) cache_cols.clear();  // argmax kept: needed for critical points
        return out;
    }

    batch<T> backward(const batch<T>& grad_out) {
        check(cache_cols.size() == grad_out.size(), "max_pool: no recorded forward");
        batch<T> grad_in(grad_out.size());
        for (std::size_t s = 0; s < grad_out.size(); ++s) {
            const std::size_t C = grad_out[s].rows();
            tensor<T> dx({C, cache_cols[s]});
            for (std::size_t c = 0; c < C; ++c)
                dx.at(c, argmax[s][c]) += grad_out[s].at(c, 0);
            grad_in[s] = std::move(dx);
        }
        return grad_in;
    }
};

// ---------------------------------------------------------------------------
// trainable per-channel gain followed by a constant scale: y = k * (v .* x)

template <typename T>
struct gain_scale {
    std::size_t channels = 0;
    T scale = T(1);
    std::size_t v = 0;  // param handle
    batch<T> cache_in;

    static gain_scale create(param_store<T>& store, const std::string& name,
                             std::size_t channels, T scale) {
        gain_scale g;
        g.channels = channels;
        g.scale = scale;
        g.v = store.add(name + ".gain", tensor<T>({channels}, T(1)));
        return g;
    }

    batch<T> forward(const param_store<T>& store, const batch<T>& in, bool record) {
        const tensor<T>& V = store[v].value;
        batch<T> out(in.size());
        for (std::size_t s = 0; s < in.size(); ++s) {
            check_arg(in[s].rows() == channels && in[s].cols() == 1,
                      "gain_scale: expected [" + std::to_string(channels) + " x 1]");
            out[s] = in[s];
            for (std::size_t c = 0; c < channels; ++c)
                out[s].at(c, 0) = scale * V[c] * in[s].at(c, 0);
        }
        if (record) cache_in = in;
        return out;
    }

    batch<T> backward(param_store<T>& store, const batch<T>& grad_out) {
        check(cache_in.size() == grad_out.size(), "gain_scale: no recorded forward");
        const tensor<T>& V = store[v].value;
        tensor<T>& dV = store[v].grad;
        batch<T> grad_in(grad_out.size());
        for (std::size_t s = 0; s < grad_out.size(); ++s) {
            tensor<T> dx(grad_out[s].shape);
            for (std::size_t c = 0; c < channels; ++c) {
                dV[c] += scale * cache_in[s].at(c, 0) * grad_out[s].at(c, 0);
                dx.at(c, 0) = scale * V[c] * grad_out[s].at(c, 0);
            }
            grad_in[s] = std::move(dx);
        }
        return grad_in;
    }
};

// ---------------------------------------------------------------------------
// inverted dropout: train mode zeroes each element with probability `rate`
// and scales survivors by 1/(1-rate); eval mode is the identity.

template <typename T>
struct dropout {
    double rate = 0.3;
    batch<T> cache_mask;  // already includes the 1/(1-rate) scaling

    explicit dropout(double rate = 0.3) : rate(rate) {
        check_arg(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
    }

    batch<T> forward(const batch<T>& in, bool train, rng& r, bool record) {
        if (!train) {
            if (record) cache_mask.clear();
            return in;
        }
        const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
        batch<T> out(in.size());
        cache_mask.assign(in.size(), tensor<T>());
        for (std::size_t s = 0; s < in.size(); ++s) {
            tensor<T> mask(in[s].shape);
            out[s] = in[s];
            for (std::size_t i = 0; i < in[s].numel(); ++i) {
                const T m = r.bernoulli(rate) ? T(0) : keep_scale;
                mask[i] = m;
                out[s][i] *= m;
            }
            cache_mask[s] = std::move(mask);
        }
        if (!record) cache_mask.clear();
        return out;
    }

    batch<T> backward(const batch<T>& grad_out) {
        if (cache_mask.empty()) return grad_out;  // eval mode: identity
        check(cache_mask.size() == grad_out.size(), "dropout: no recorded forward");
        batch<T> grad_in(grad_out.size());
        for (std::size_t s = 0; s < grad_out.size(); ++s) {
            grad_in[s] = grad_out[s];
            for (std::size_t i = 0; i < grad_in[s].numel(); ++i)
                grad_in[s][i] *= cache_mask[s][i];
        }
        return grad_in;
    }
};

// ---------------------------------------------------------------------------
// softmax cross-entropy (natural log), on a [classes x 1] logit tensor

template <typename T>
struct ce_result {
    double loss = 0;       // nats
    tensor<T> dlogits;     // softmax - onehot
};

template <typename T>
ce_result<T> softmax_cross_entropy(const tensor<T>& logits, std::size_t label) {
    check_arg(logits.shape.size() == 2 && logits.cols() == 1,
              "softmax_cross_entropy: expected [classes x 1] logits");
    const std::size_t C = logits.rows();
    check_arg(label < C, "softmax_cross_entropy: label out of range");
    double mx = static_cast<double>(logits[0]);
    for (std::size_t c = 1; c < C; ++c)
        mx = std::max(mx, static_cast<double>(logits[c]));
    double sum = 0;
    for (std::size_t c = 0; c < C; ++c)
        sum += std::exp(static_cast<double>(logits[c]) - mx);
    const double lse = mx + std::log(sum);
    ce_result<T> r;
    r.loss = lse - static_cast<double>(logits[label]);
    r.dlogits = tensor<T>({C, 1});
    for (std::size_t c = 0; c < C; ++c) {
        double p = std::exp(static_cast<double>(logits[c]) - lse);
        r.dlogits[c] = static_cast<T>(c == label ? p - 1.0 : p);
    }
    return r;
}

template <typename T>
std::size_t argmax_class(const tensor<T>& logits) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.numel(); ++c)
        if (logits[c] > logits[best]) best = c;
    return best;
}

}  // namespace pcc
