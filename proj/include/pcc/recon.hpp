#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pcc/codec.hpp"
#include "pcc/dataset.hpp"
#include "pcc/metrics.hpp"
#include "pcc/nn.hpp"
#include "pcc/serialize.hpp"

// Auxiliary reconstruction network: maps a quantized latent back to a P x 3
// point set, trained with Chamfer distance against the original cloud while
// the codec stays frozen. Purely diagnostic; it visualizes what survives in
// the task-specialized bitstream.

namespace pcc {

inline constexpr char recon_magic[4] = {'P', 'C', 'C', 'R'};

template <typename T>
struct recon_net {
    std::size_t latent = 0;
    std::size_t out_points = 0;
    param_store<T> store;
    conv1x1<T> fc1, fc2, fc3;  // latent -> 256 -> 512 -> 3P
    relu<T> act1, act2;

    static recon_net create(std::size_t latent, std::size_t out_points,
                            uint64_t seed) {
        recon_net n;
        n.latent = latent;
        n.out_points = out_points;
        rng r(mix_seed(seed, 0x9E));
        n.fc1 = conv1x1<T>::create(n.store, "rec0.fc", latent, 256, 1, r);
        n.fc2 = conv1x1<T>::create(n.store, "rec1.fc", 256, 512, 1, r);
        n.fc3 = conv1x1<T>::create(n.store, "rec2.fc", 512, 3 * out_points, 1, r);
        return n;
    }

    // [3P x 1] column -> [3 x P] cloud tensor (row-major: axis, then point)
    tensor<T> to_cloud(const tensor<T>& flat) const {
        tensor<T> out = flat;
        out.shape = {3, out_points};
        return out;
    }

    tensor<T> forward_one(const tensor<T>& yhat) const {
        check_arg(yhat.numel() == latent, "recon: latent length mismatch");
        tensor<T> x = yhat;
        x.shape = {latent, 1};
        x = fc1.forward_one(store, x);
        for (auto& v : x.data) v = v > T(0) ? v : T(0);
        x = fc2.forward_one(store, x);
        for (auto& v : x.data) v = v > T(0) ? v : T(0);
        x = fc3.forward_one(store, x);
        return to_cloud(x);
    }

    batch<T> forward_batch(const batch<T>& latents, bool record) {
        batch<T> x = latents;
        for (auto& t : x) {
            check_arg(t.numel() == latent, "recon: latent length mismatch");
            t.shape = {latent, 1};
        }
        x = fc1.forward(store, x, record);
        x = act1.forward(x, record);
        x = fc2.forward(store, x, record);
        x = act2.forward(x, record);
        x = fc3.forward(store, x, record);
        for (auto& t : x) t.shape = {3, out_points};
        return x;
    }

    void backward_batch(batch<T> grad_clouds) {
        for (auto& t : grad_clouds) t.shape = {3 * out_points, 1};
        batch<T> g = fc3.backward(store, grad_clouds);
        g = act2.backward(g);
        g = fc2.backward(store, g);
        g = act1.backward(g);
        fc1.backward(store, g);
    }
};

// Chamfer distance between a predicted [3 x P] tensor and a target cloud,
// with the gradient w.r.t. the prediction.
template <typename T>
double chamfer_with_grad(const tensor<T>& pred, const std::vector<point3>& target,
                         tensor<T>& grad_out) {
    const std::size_t np = pred.cols();
    const std::size_t nt = target.size();
    check_arg(np > 0 && nt > 0, "chamfer: empty cloud");
    grad_out = tensor<T>(pred.shape);
    auto px = [&](std::size_t k, int axis) {
        return static_cast<double>(pred.at(static_cast<std::size_t>(axis), k));
    };
    // prediction -> target
    double loss = 0;
    std::vector<std::size_t> nn_of_pred(np);
    for (std::size_t k = 0; k < np; ++k) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0;
        for (std::size_t t = 0; t < nt; ++t) {
            const double dx = px(k, 0) - target[t][0];
            const double dy = px(k, 1) - target[t][1];
            const double dz = px(k, 2) - target[t][2];
            const double d = dx * dx + dy * dy + dz * dz;
            if (d < best) {
                best = d;
                bi = t;
            }
        }
        nn_of_pred[k] = bi;
        loss += best / static_cast<double>(np);
        for (int a = 0; a < 3; ++a)
            grad_out.at(static_cast<std::size_t>(a), k) += static_cast<T>(
                2.0 / static_cast<double>(np) * (px(k, a) - target[bi][a]));
    }
    // target -> prediction
    for (std::size_t t = 0; t < nt; ++t) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bk = 0;
        for (std::size_t k = 0; k < np; ++k) {
            const double dx = px(k, 0) - target[t][0];
            const double dy = px(k, 1) - target[t][1];
            const double dz = px(k, 2) - target[t][2];
            const double d = dx * dx + dy * dy + dz * dz;
            if (d < best) {
                best = d;
                bk = k;
            }
        }
        loss += best / static_cast<double>(nt);
        for (int a = 0; a < 3; ++a)
            grad_out.at(static_cast<std::size_t>(a), bk) += static_cast<T>(
                2.0 / static_cast<double>(nt) * (px(bk, a) - target[t][a]));
    }
    return loss;
}

struct recon_train_spec {
    std::size_t epochs = 30;
    double lr = 1e-3;
    std::size_t batch_size = 32;
    uint64_t seed = 0;
};

struct recon_epoch {
    std::size_t epoch = 0;
    double chamfer_mean = 0;
};

// Trains the reconstruction net on quantized latents of the frozen codec.
template <typename T>
std::vector<recon_epoch> train_recon(recon_net<T>& net, const pointnet_codec<T>& model,
                                     const std::vector<point_cloud>& clouds,
                                     const recon_train_spec& spec) {
    check_arg(!clouds.empty(), "recon: empty training set");
    // latents are fixed while the codec is frozen, so compute them once
    batch<T> latents(clouds.size());
    for (std::size_t i = 0; i < clouds.size(); ++i) {
        const tensor<T> y = model.analyze_one(cloud_tensor<T>(clouds[i].pts));
        const std::vector<int32_t> q = quantize_latent(y);
        tensor<T> yhat({model.cfg.latent, 1});
        for (std::size_t k = 0; k < q.size(); ++k) yhat[k] = static_cast<T>(q[k]);
        latents[i] = std::move(yhat);
    }
    rng shuffle_rng(mix_seed(spec.seed, 0xA1));
    std::vector<std::size_t> order(clouds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<recon_epoch> log;
    for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) {
            const std::size_t j = i + static_cast<std::size_t>(
                                          shuffle_rng.below(order.size() - i));
            std::swap(order[i], order[j]);
        }
        double total = 0;
        std::size_t count = 0;
        for (std::size_t start = 0; start < order.size(); start += spec.batch_size) {
            const std::size_t bsz = std::min(spec.batch_size, order.size() - start);
            batch<T> in(bsz);
            for (std::size_t s = 0; s < bsz; ++s) in[s] = latents[order[start + s]];
            net.store.zero_grad();
            batch<T> pred = net.forward_batch(in, true);
            batch<T> grads(bsz);
            const double inv_b = 1.0 / static_cast<double>(bsz);
            for (std::size_t s = 0; s < bsz; ++s) {
                tensor<T> g;
                total += chamfer_with_grad(pred[s], clouds[order[start + s]].pts, g);
                for (auto& v : g.data) v = static_cast<T>(v * inv_b);
                grads[s] = std::move(g);
                ++count;
            }
            net.backward_batch(std::move(grads));
            net.store.adam_step(spec.lr);
        }
        log.push_back({epoch, total / static_cast<double>(count)});
    }
    return log;
}

template <typename T>
std::vector<uint8_t> save_recon(recon_net<T>& net) {
    byte_writer w;
    w.raw(reinterpret_cast<const uint8_t*>(recon_magic), 4);
    w.u8(format_version);
    w.u32(static_cast<uint32_t>(net.latent));
    w.u32(static_cast<uint32_t>(net.out_points));
    w.u32(static_cast<uint32_t>(net.store.params.size()));
    for (auto& p : net.store.params) {
        w.str(p.name);
        w.u8(static_cast<uint8_t>(p.value.shape.size()));
        for (std::size_t d : p.value.shape) w.u32(static_cast<uint32_t>(d));
        for (const T& v : p.value.data) w.f32(static_cast<float>(v));
    }
    return std::move(w.bytes);
}

template <typename T>
recon_net<T> load_recon(const std::vector<uint8_t>& bytes) {
    byte_reader r(bytes);
    uint8_t magic[4];
    r.raw(magic, 4);
    check(std::equal(magic, magic + 4, recon_magic), "recon: bad magic");
    check(r.u8() == format_version, "recon: unsupported format version");
    const uint32_t latent = r.u32();
    const uint32_t out_points = r.u32();
    recon_net<T> net = recon_net<T>::create(latent, out_points, 0);
    const uint32_t count = r.u32();
    check(count == net.store.params.size(), "recon: tensor count mismatch");
    for (uint32_t i = 0; i < count; ++i) {
        const std::string name = r.str();
        param<T>* slot = nullptr;
        for (auto& p : net.store.params)
            if (p.name == name) slot = &p;
        check(slot != nullptr, "recon: unexpected tensor '" + name + "'");
        const uint8_t ndim = r.u8();
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = r.u32();
        check(shape == slot->value.shape, "recon: shape mismatch for '" + name + "'");
        for (auto& v : slot->value.data) v = static_cast<T>(r.f32());
    }
    check(r.remaining() == 0, "recon: trailing bytes");
    return net;
}

}  // namespace pcc
