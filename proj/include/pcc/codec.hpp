#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pcc/common.hpp"
#include "pcc/entropy.hpp"
#include "pcc/nn.hpp"
#include "pcc/rng.hpp"
#include "pcc/tensor.hpp"

// The codec itself: an analysis transform g_a mapping a point cloud to a
// latent vector, and a synthesis transform g_s mapping the quantized latent
// to class logits.
//
// g_a = x -> [conv 1x1 + BN + ReLU]* -> max pool over points -> 10 * gain
// g_s = yhat -> [FC + BN + ReLU]* -> dropout -> FC -> logits

namespace pcc {

struct conv_spec {
    std::size_t out_ch;
    std::size_t groups;
};

struct shuffle_spec {
    std::size_t before_block;  // encoder block index the shuffle precedes
    std::size_t groups;
};

struct codec_config {
    std::string name;
    uint8_t id = 0;
    std::size_t points = 0;  // P the model is trained for
    std::vector<conv_spec> encoder;
    std::vector<shuffle_spec> shuffles;
    std::size_t latent = 0;  // N
    std::vector<std::size_t> decoder;  // hidden and output widths
    double dropout_rate = 0.3;
    std::size_t classes = 40;
};

// Registry of the three architectures, keyed by (name, P).
//
// The "lite" encoder uses grouped convolutions with two channel shuffles:
//
//   in(3) -> conv 3->8 -> conv 8->8 -> conv 8->16
//         -> shuffle(16, g=2) -> conv 16->16 /g2
//         -> shuffle(16, g=2) -> conv 16->32 /g4
//         -> max pool -> 10 * gain
//
inline codec_config make_codec_config(const std::string& name, std::size_t points) {
    check_arg(points >= 1, "config: point count must be >= 1");
    codec_config c;
    c.name = name;
    c.points = points;
    c.decoder = {512, 256, 40};
    if (name == "full") {
        c.id = 0;
        c.encoder = {{64, 1}, {64, 1}, {64, 1}, {128, 1}, {1024, 1}};
        c.latent = 1024;
    } else if (name == "lite") {
        c.id = 1;
        c.encoder = {{8, 1}, {8, 1}, {16, 1}, {16, 2}, {32, 4}};
        c.shuffles = {{3, 2}, {4, 2}};
        c.latent = 32;
    } else if (name == "micro") {
        c.id = 2;
        c.encoder = {{16, 1}};
        c.latent = 16;
    } else {
        throw std::invalid_argument("unknown codec config '" + name +
                                    "' (expected full, lite, or micro)");
    }
    return c;
}

inline codec_config config_from_id(uint8_t id, std::size_t points) {
    switch (id) {
        case 0: return make_codec_config("full", points);
        case 1: return make_codec_config("lite", points);
        case 2: return make_codec_config("micro", points);
        default: throw std::invalid_argument("unknown codec config id");
    }
}

// ---------------------------------------------------------------------------
// MAC accounting

struct mac_report {
    std::size_t encoder_per_point = 0;
    std::size_t decoder_total = 0;
};

inline mac_report mac_count(const codec_config& cfg) {
    mac_report r;
    std::size_t in_ch = 3;
    for (const auto& l : cfg.encoder) {
        r.encoder_per_point += in_ch * l.out_ch / l.groups;
        in_ch = l.out_ch;
    }
    std::size_t in = cfg.latent;
    for (std::size_t out : cfg.decoder) {
        r.decoder_total += in * out;
        in = out;
    }
    return r;
}

// round to a given number of significant figures (for Table-style reporting)
inline double round_sig_figs(double v, int figs) {
    if (v == 0) return 0;
    const double mag = std::pow(10.0, figs - 1 - std::floor(std::log10(std::abs(v))));
    return std::round(v * mag) / mag;
}

// ---------------------------------------------------------------------------
// critical point set

struct critical_point_set {
    std::vector<std::size_t> indices;         // sorted, unique
    std::vector<std::size_t> channel_argmax;  // per latent channel
};

// ---------------------------------------------------------------------------

template <typename T>
struct pointnet_codec {
    codec_config cfg;
    param_store<T> store;

    std::vector<conv1x1<T>> enc_conv;
    std::vector<batch_norm<T>> enc_bn;
    std::vector<relu<T>> enc_relu;
    std::map<std::size_t, channel_shuffle<T>> enc_shuffle;  // keyed by block index
    max_pool<T> pool;
    gain_scale<T> gain;

    std::vector<conv1x1<T>> dec_fc;
    std::vector<batch_norm<T>> dec_bn;
    std::vector<relu<T>> dec_relu;
    dropout<T> drop;

    factorized_prior<T> prior;

    bool training_active = false;

    static pointnet_codec create(const codec_config& cfg, uint64_t seed) {
        pointnet_codec m;
        m.cfg = cfg;
        m.drop = dropout<T>(cfg.dropout_rate);
        rng r(mix_seed(seed, 0x11));
        std::size_t in_ch = 3;
        for (std::size_t i = 0; i < cfg.encoder.size(); ++i) {
            const std::string base = "enc" + std::to_string(i);
            m.enc_conv.push_back(conv1x1<T>::create(m.store, base + ".conv", in_ch,
                                                    cfg.encoder[i].out_ch,
                                                    cfg.encoder[i].groups, r));
            m.enc_bn.push_back(batch_norm<T>::create(m.store, base + ".bn",
                                                     cfg.encoder[i].out_ch));
            m.enc_relu.emplace_back();
            in_ch = cfg.encoder[i].out_ch;
        }
        check_arg(in_ch == cfg.latent, "config: last encoder width must equal N");
        for (const auto& s : cfg.shuffles) {
            check_arg(s.before_block <= cfg.encoder.size(), "config: bad shuffle position");
            const std::size_t ch = s.before_block == 0
                                       ? 3
                                       : cfg.encoder[s.before_block - 1].out_ch;
            m.enc_shuffle.emplace(s.before_block, channel_shuffle<T>(ch, s.groups));
        }
        m.gain = gain_scale<T>::create(m.store, "enc", cfg.latent, T(10));

        std::size_t in = cfg.latent;
        for (std::size_t i = 0; i < cfg.decoder.size(); ++i) {
            const std::string base = "dec" + std::to_string(i);
            m.dec_fc.push_back(
                conv1x1<T>::create(m.store, base + ".fc", in, cfg.decoder[i], 1, r));
            if (i + 1 < cfg.decoder.size()) {
                m.dec_bn.push_back(
                    batch_norm<T>::create(m.store, base + ".bn", cfg.decoder[i]));
                m.dec_relu.emplace_back();
            }
            in = cfg.decoder[i];
        }
        m.prior = factorized_prior<T>::create(m.store, "eb", cfg.latent, r);
        return m;
    }

    static void check_cloud(const tensor<T>& cloud) {
        check_arg(cloud.shape.size() == 2 && cloud.rows() == 3,
                  "analyze: cloud must be [3 x P], got " + shape_str(cloud));
        check_arg(cloud.cols() >= 1, "analyze: empty point cloud");
    }

    // ---- eval paths (const, cache-free, safe for concurrent callers) ----

    tensor<T> prepool_features(const tensor<T>& cloud) const {
        check_cloud(cloud);
        tensor<T> x = cloud;
        for (std::size_t i = 0; i < enc_conv.size(); ++i) {
            auto sh = enc_shuffle.find(i);
            if (sh != enc_shuffle.end()) x = sh->second.apply_one(x);
            x = enc_conv[i].forward_one(store, x);
            x = enc_bn[i].forward_one_eval(store, x);
            for (auto& v : x.data) v = v > T(0) ? v : T(0);
        }
        return x;
    }

    tensor<T> analyze_one(const tensor<T>& cloud,
                          std::vector<std::size_t>* argmax_out = nullptr) const {
        tensor<T> h = prepool_features(cloud);
        const std::size_t C = h.rows(), P = h.cols();
        tensor<T> y({C, std::size_t(1)});
        std::vector<std::size_t> am(C, 0);
        for (std::size_t c = 0; c < C; ++c) {
            T best = h.at(c, 0);
            std::size_t bi = 0;
            for (std::size_t p = 1; p < P; ++p)
                if (h.at(c, p) > best) {
                    best = h.at(c, p);
                    bi = p;
                }
            y.at(c, 0) = best;
            am[c] = bi;
        }
        const tensor<T>& V = store[gain.v].value;
        for (std::size_t c = 0; c < C; ++c)
            y.at(c, 0) = gain.scale * V[c] * y.at(c, 0);
        if (argmax_out) *argmax_out = std::move(am);
        return y;
    }

    tensor<T> synthesize_one(const tensor<T>& yhat) const {
        check_arg(yhat.numel() == cfg.latent,
                  "synthesize: latent length " + std::to_string(yhat.numel()) +
                      " != N = " + std::to_string(cfg.latent));
        tensor<T> x = yhat;
        x.shape = {cfg.latent, 1};
        for (std::size_t i = 0; i < dec_fc.size(); ++i) {
            x = dec_fc[i].forward_one(store, x);
            if (i + 1 < dec_fc.size()) {
                x = dec_bn[i].forward_one_eval(store, x);
                for (auto& v : x.data) v = v > T(0) ? v : T(0);
            }
            // dropout before the last layer is identity in eval mode
        }
        return x;
    }

    critical_point_set critical_points(const tensor<T>& cloud) const {
        std::vector<std::size_t> am;
        analyze_one(cloud, &am);
        critical_point_set cs;
        cs.channel_argmax = am;
        std::set<std::size_t> uniq(am.begin(), am.end());
        cs.indices.assign(uniq.begin(), uniq.end());
        return cs;
    }

    // ---- batched training paths (record caches for backward) ----

    batch<T> analyze_batch(const batch<T>& clouds, bool train, bool record) {
        for (const auto& c : clouds) check_cloud(c);
        batch<T> x = clouds;
        for (std::size_t i = 0; i < enc_conv.size(); ++i) {
            auto sh = enc_shuffle.find(i);
            if (sh != enc_shuffle.end()) x = sh->second.forward(x, record);
            x = enc_conv[i].forward(store, x, record);
            x = enc_bn[i].forward(store, x, train, record);
            x = enc_relu[i].forward(x, record);
        }
        x = pool.forward(x, record);
        x = gain.forward(store, x, record);
        return x;
    }

    batch<T> analyze_backward(const batch<T>& grad_latent) {
        batch<T> g = gain.backward(store, grad_latent);
        g = pool.backward(g);
        for (std::size_t i = enc_conv.size(); i-- > 0;) {
            g = enc_relu[i].backward(g);
            g = enc_bn[i].backward(store, g);
            g = enc_conv[i].backward(store, g);
            auto sh = enc_shuffle.find(i);
            if (sh != enc_shuffle.end()) g = sh->second.backward(g);
        }
        return g;
    }

    batch<T> synthesize_batch(const batch<T>& latents, bool train, bool record,
                              rng& r) {
        batch<T> x(latents.size());
        for (std::size_t s = 0; s < latents.size(); ++s) {
            check_arg(latents[s].numel() == cfg.latent,
                      "synthesize: latent length mismatch");
            x[s] = latents[s];
            x[s].shape = {cfg.latent, 1};
        }
        for (std::size_t i = 0; i < dec_fc.size(); ++i) {
            if (i + 1 == dec_fc.size()) x = drop.forward(x, train, r, record);
            x = dec_fc[i].forward(store, x, record);
            if (i + 1 < dec_fc.size()) {
                x = dec_bn[i].forward(store, x, train, record);
                x = dec_relu[i].forward(x, record);
            }
        }
        return x;
    }

    batch<T> synthesize_backward(const batch<T>& grad_logits) {
        batch<T> g = grad_logits;
        for (std::size_t i = dec_fc.size(); i-- > 0;) {
            g = dec_fc[i].backward(store, g);
            if (i + 1 == dec_fc.size()) g = drop.backward(g);
            if (i > 0) {
                g = dec_relu[i - 1].backward(g);
                g = dec_bn[i - 1].backward(store, g);
            }
        }
        return g;
    }

    // every tensor that defines the trained model, for serialization
    std::vector<std::pair<std::string, tensor<T>*>> named_state() {
        std::vector<std::pair<std::string, tensor<T>*>> out;
        for (auto& p : store.params) out.emplace_back(p.name, &p.value);
        for (auto& bn : enc_bn) {
            out.emplace_back(bn.name + ".running_mean", &bn.running_mean);
            out.emplace_back(bn.name + ".running_var", &bn.running_var);
        }
        for (auto& bn : dec_bn) {
            out.emplace_back(bn.name + ".running_mean", &bn.running_mean);
            out.emplace_back(bn.name + ".running_var", &bn.running_var);
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// gain + batch-norm fusion (eval-mode only)
//
// Each encoder block is conv -> BN -> ReLU. In eval mode BN is a per-channel
// affine map, so it folds into the convolution weights. The trailing
// 10 * gain acts after max pooling; a nonnegative per-channel factor commutes
// with ReLU and max, so its magnitude folds into the last convolution and
// only its sign remains as a post-pool multiplier.

struct fused_encoder {
    struct layer {
        tensor<double> w;  // [out_ch x in_ch/groups]
        tensor<double> b;  // [out_ch]
        std::size_t in_ch, out_ch, groups;
    };
    std::vector<layer> layers;
    std::map<std::size_t, channel_shuffle<double>> shuffles;
    std::vector<double> post_pool_sign;  // -1 where the trained gain went negative
    std::size_t latent = 0;

    std::size_t macs_per_point() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.in_ch * l.out_ch / l.groups;
        return n;
    }

    template <typename T>
    tensor<T> analyze(const tensor<T>& cloud) const {
        pointnet_codec<T>::check_cloud(cloud);
        tensor<double> x = cloud.template cast<double>();
        for (std::size_t i = 0; i < layers.size(); ++i) {
            auto sh = shuffles.find(i);
            if (sh != shuffles.end()) x = sh->second.apply_one(x);
            const layer& l = layers[i];
            const std::size_t P = x.cols();
            const std::size_t gs_in = l.in_ch / l.groups;
            const std::size_t gs_out = l.out_ch / l.groups;
            tensor<double> y({l.out_ch, P});
            for (std::size_t co = 0; co < l.out_ch; ++co) {
                const std::size_t g0 = (co / gs_out) * gs_in;
                double* orow = &y.data[co * P];
                for (std::size_t p = 0; p < P; ++p) orow[p] = l.b[co];
                for (std::size_t cil = 0; cil < gs_in; ++cil) {
                    const double wv = l.w.at(co, cil);
                    const double* irow = &x.data[(g0 + cil) * P];
                    for (std::size_t p = 0; p < P; ++p) orow[p] += wv * irow[p];
                }
            }
            for (auto& v : y.data) v = v > 0 ? v : 0;
            x = std::move(y);
        }
        const std::size_t C = x.rows(), P = x.cols();
        tensor<T> y({C, std::size_t(1)});
        for (std::size_t c = 0; c < C; ++c) {
            double best = x.at(c, 0);
            for (std::size_t p = 1; p < P; ++p) best = std::max(best, x.at(c, p));
            y.at(c, 0) = static_cast<T>(post_pool_sign[c] * best);
        }
        return y;
    }
};

// Folds eval-mode batch norm into each convolution and the 10 * gain into
// the final one. A nonnegative factor commutes with ReLU and max, so the
// gain magnitude folds in and only its sign survives past the pool; a
// negative trained gain thus stays exact.
template <typename T>
fused_encoder fuse_gain_bn(const pointnet_codec<T>& m) {
    check(!m.training_active,
          "fuse_gain_bn: model is training; batch-norm statistics are not frozen");
    fused_encoder f;
    f.latent = m.cfg.latent;
    for (const auto& s : m.cfg.shuffles) {
        const std::size_t ch =
            s.before_block == 0 ? 3 : m.cfg.encoder[s.before_block - 1].out_ch;
        f.shuffles.emplace(s.before_block, channel_shuffle<double>(ch, s.groups));
    }
    const std::size_t last = m.enc_conv.size() - 1;
    const tensor<T>& gains = m.store[m.gain.v].value;
    f.post_pool_sign.assign(m.cfg.latent, 1.0);
    for (std::size_t i = 0; i < m.enc_conv.size(); ++i) {
        const conv1x1<T>& conv = m.enc_conv[i];
        const batch_norm<T>& bn = m.enc_bn[i];
        const tensor<T>& W = m.store[conv.w].value;
        const tensor<T>& B = m.store[conv.b].value;
        const tensor<T>& G = m.store[bn.gamma].value;
        const tensor<T>& Beta = m.store[bn.beta].value;
        fused_encoder::layer l;
        l.in_ch = conv.in_ch;
        l.out_ch = conv.out_ch;
        l.groups = conv.groups;
        l.w = tensor<double>(W.shape);
        l.b = tensor<double>({conv.out_ch});
        const std::size_t gs_in = conv.in_ch / conv.groups;
        for (std::size_t co = 0; co < conv.out_ch; ++co) {
            const double scale =
                static_cast<double>(G[co]) /
                std::sqrt(static_cast<double>(bn.running_var[co]) + bn.eps);
            const double shift = static_cast<double>(Beta[co]) -
                                 scale * static_cast<double>(bn.running_mean[co]);
            double post = 1.0;
            if (i == last) {
                const double g =
                    static_cast<double>(m.gain.scale) * static_cast<double>(gains[co]);
                post = std::abs(g);
                if (g < 0) f.post_pool_sign[co] = -1.0;
            }
            for (std::size_t ci = 0; ci < gs_in; ++ci)
                l.w.at(co, ci) =
                    post * scale * static_cast<double>(W.at(co, ci));
            l.b[co] = post * (scale * static_cast<double>(B[co]) + shift);
        }
        f.layers.push_back(std::move(l));
    }
    return f;
}

}  // namespace pcc
