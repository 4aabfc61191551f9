#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "pcc/bitstream.hpp"
#include "pcc/checkpoint.hpp"
#include "pcc/codec.hpp"
#include "pcc/dataset.hpp"
#include "pcc/entropy.hpp"
#include "pcc/metrics.hpp"
#include "pcc/nn.hpp"

// Rate-distortion training: minimize  R + lambda * CE  over the joint
// parameters of the transforms and the entropy model. R is the estimated
// rate in bits of the noise-quantized latent; CE is softmax cross-entropy in
// nats. Training runs single-threaded so that a fixed seed reproduces runs
// bit-for-bit.

namespace pcc {

inline const std::vector<std::size_t>& allowed_point_counts() {
    static const std::vector<std::size_t> p = {8, 16, 32, 64, 128, 256, 512, 1024};
    return p;
}

struct train_spec {
    std::string config_name = "micro";
    std::size_t points = 1024;
    double lambda = 1000;
    double lr = 1e-3;
    std::size_t batch_size = 32;
    std::size_t epochs = 200;
    std::size_t patience = 20;   // early stop on validation loss plateau
    double val_fraction = 0.1;   // carved from the training split
    uint64_t seed = 0;

    void validate() const {
        check_arg(lambda > 0, "train: lambda must be positive");
        check_arg(lr > 0, "train: learning rate must be positive");
        check_arg(batch_size >= 2, "train: batch size must be >= 2");
        const auto& ok = allowed_point_counts();
        check_arg(std::find(ok.begin(), ok.end(), points) != ok.end(),
                  "train: P must be one of {8, 16, 32, 64, 128, 256, 512, 1024}");
    }
};

struct step_entry {
    std::size_t step = 0;
    std::size_t epoch = 0;
    double loss = 0;
    double rate_bits = 0;
    double ce_nats = 0;
    double accuracy = 0;  // batch top-1, percent
};

struct epoch_entry {
    std::size_t epoch = 0;
    double train_loss = 0, train_rate = 0, train_accuracy = 0;
    double val_loss = 0, val_rate = 0, val_accuracy = 0;
};

struct train_result {
    std::vector<uint8_t> best_checkpoint;  // serialized, includes coding tables
    std::vector<epoch_entry> log;
    std::size_t best_epoch = 0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::size_t steps_run = 0;
    bool diverged = false;
    std::string divergence_message;
};

// the training objective for one sample
template <typename T>
double rd_loss(const tensor<T>& logits, std::size_t label, double rate_bits,
               double lambda) {
    check_arg(lambda > 0, "loss: lambda must be positive");
    check(rate_bits >= 0 && std::isfinite(rate_bits), "loss: bad rate term");
    const double ce = softmax_cross_entropy(logits, label).loss;
    const double loss = rate_bits + lambda * ce;
    check(std::isfinite(loss), "loss: non-finite value (lambda = " +
                                   std::to_string(lambda) + ")");
    return loss;
}

namespace detail {

template <typename T>
struct val_stats {
    double loss = 0, rate = 0, accuracy = 0;
};

// deterministic eval-mode pass: rounded latent, estimated rate, no dropout
template <typename T>
val_stats<T> validate_pass(const pointnet_codec<T>& model,
                           const std::vector<const point_cloud*>& clouds,
                           double lambda) {
    val_stats<T> s;
    std::size_t correct = 0;
    for (const point_cloud* pc : clouds) {
        const tensor<T> x = cloud_tensor<T>(pc->pts);
        const tensor<T> y = model.analyze_one(x);
        const std::vector<int32_t> q = quantize_latent(y);
        tensor<T> yhat({model.cfg.latent, 1});
        for (std::size_t i = 0; i < q.size(); ++i) yhat[i] = static_cast<T>(q[i]);
        const double rate = model.prior.rate_bits(model.store, yhat);
        const tensor<T> logits = model.synthesize_one(yhat);
        const double ce = softmax_cross_entropy(logits, pc->label).loss;
        s.loss += rate + lambda * ce;
        s.rate += rate;
        if (argmax_class(logits) == pc->label) ++correct;
    }
    const double n = static_cast<double>(clouds.size());
    s.loss /= n;
    s.rate /= n;
    s.accuracy = 100.0 * static_cast<double>(correct) / n;
    return s;
}

}  // namespace detail

template <typename T>
train_result train_codec(const train_spec& spec, const dataset& ds,
                         const std::function<void(const step_entry&)>& on_step = {}) {
    spec.validate();
    check_arg(ds.points_per_cloud == spec.points,
              "train: dataset P = " + std::to_string(ds.points_per_cloud) +
                  " does not match spec P = " + std::to_string(spec.points));
    check_arg(!ds.train.empty(), "train: empty training split");
    check_arg(ds.class_names.size() <= 40, "train: more than 40 classes");

    pointnet_codec<T> model =
        pointnet_codec<T>::create(make_codec_config(spec.config_name, spec.points),
                                  spec.seed);
    model.training_active = true;

    rng shuffle_rng(mix_seed(spec.seed, 0x51));
    rng noise_rng(mix_seed(spec.seed, 0x52));
    rng dropout_rng(mix_seed(spec.seed, 0x53));

    // carve a validation split off the training data
    std::vector<std::size_t> order(ds.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t j = i + static_cast<std::size_t>(
                                      shuffle_rng.below(order.size() - i));
        std::swap(order[i], order[j]);
    }
    std::size_t n_val = static_cast<std::size_t>(
        spec.val_fraction * static_cast<double>(order.size()));
    std::vector<const point_cloud*> val_clouds;
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < n_val)
            val_clouds.push_back(&ds.train[order[i]]);
        else
            train_idx.push_back(order[i]);
    }
    if (val_clouds.empty())  // tiny datasets validate on the training data
        for (const auto& c : ds.train) val_clouds.push_back(&c);

    train_result result;
    std::size_t since_best = 0;
    auto snapshot = [&](std::size_t epoch, double val_loss) {
        model.training_active = false;
        const coding_table tables = build_tables(model.store, model.prior);
        result.best_checkpoint = save_checkpoint(model, tables, spec.lambda);
        model.training_active = true;
        result.best_epoch = epoch;
        result.best_val_loss = val_loss;
    };

    for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
        // shuffle
        for (std::size_t i = 0; i < train_idx.size(); ++i) {
            const std::size_t j = i + static_cast<std::size_t>(
                                          shuffle_rng.below(train_idx.size() - i));
            std::swap(train_idx[i], train_idx[j]);
        }
        double ep_loss = 0, ep_rate = 0;
        std::size_t ep_correct = 0, ep_samples = 0, ep_batches = 0;
        try {
            for (std::size_t start = 0; start < train_idx.size();
                 start += spec.batch_size) {
                const std::size_t bsz =
                    std::min(spec.batch_size, train_idx.size() - start);
                if (bsz < 2 && train_idx.size() >= 2) break;  // drop tiny tail batch
                batch<T> clouds(bsz);
                std::vector<std::size_t> labels(bsz);
                for (std::size_t s = 0; s < bsz; ++s) {
                    const point_cloud& pc = ds.train[train_idx[start + s]];
                    clouds[s] = cloud_tensor<T>(pc.pts);
                    labels[s] = pc.label;
                }
                model.store.zero_grad();
                batch<T> y = model.analyze_batch(clouds, true, true);
                batch<T> noisy(bsz);
                for (std::size_t s = 0; s < bsz; ++s)
                    noisy[s] = noise_quantize(y[s], noise_rng);
                batch<T> logits =
                    model.synthesize_batch(noisy, true, true, dropout_rng);

                const double inv_b = 1.0 / static_cast<double>(bsz);
                batch<T> grad_logits(bsz);
                double batch_ce = 0;
                std::size_t correct = 0;
                for (std::size_t s = 0; s < bsz; ++s) {
                    ce_result<T> ce = softmax_cross_entropy(logits[s], labels[s]);
                    batch_ce += ce.loss;
                    if (argmax_class(logits[s]) == labels[s]) ++correct;
                    grad_logits[s] = std::move(ce.dlogits);
                    const T scale = static_cast<T>(spec.lambda * inv_b);
                    for (auto& v : grad_logits[s].data) v *= scale;
                }
                batch<T> grad_latent = model.synthesize_backward(grad_logits);
                double batch_rate = 0;
                for (std::size_t s = 0; s < bsz; ++s)
                    batch_rate += model.prior.rate_backward(model.store, noisy[s],
                                                            inv_b, grad_latent[s]);
                model.analyze_backward(grad_latent);
                model.store.adam_step(spec.lr);

                const double loss =
                    (batch_rate + spec.lambda * batch_ce) * inv_b;
                check(std::isfinite(loss),
                      "train: non-finite loss (lambda = " +
                          std::to_string(spec.lambda) + ", step " +
                          std::to_string(result.steps_run) + ")");
                ++result.steps_run;
                ep_loss += loss;
                ep_rate += batch_rate * inv_b;
                ep_correct += correct;
                ep_samples += bsz;
                ++ep_batches;
                if (on_step) {
                    step_entry e;
                    e.step = result.steps_run;
                    e.epoch = epoch;
                    e.loss = loss;
                    e.rate_bits = batch_rate * inv_b;
                    e.ce_nats = batch_ce * inv_b;
                    e.accuracy = 100.0 * static_cast<double>(correct) /
                                 static_cast<double>(bsz);
                    on_step(e);
                }
            }
        } catch (const std::exception& e) {
            result.diverged = true;
            result.divergence_message = e.what();
            if (result.best_checkpoint.empty()) snapshot(epoch, 0);
            break;
        }
        if (ep_batches == 0) break;

        model.training_active = false;
        const auto vs = detail::validate_pass(model, val_clouds, spec.lambda);
        model.training_active = true;

        epoch_entry ee;
        ee.epoch = epoch;
        ee.train_loss = ep_loss / static_cast<double>(ep_batches);
        ee.train_rate = ep_rate / static_cast<double>(ep_batches);
        ee.train_accuracy =
            100.0 * static_cast<double>(ep_correct) / static_cast<double>(ep_samples);
        ee.val_loss = vs.loss;
        ee.val_rate = vs.rate;
        ee.val_accuracy = vs.accuracy;
        result.log.push_back(ee);

        if (vs.loss < result.best_val_loss) {
            snapshot(epoch, vs.loss);
            since_best = 0;
        } else if (++since_best > spec.patience) {
            break;
        }
    }
    if (result.best_checkpoint.empty()) snapshot(0, 0);
    model.training_active = false;
    return result;
}

// ---------------------------------------------------------------------------
// evaluation with real bitstreams

struct eval_result {
    ra_point point;                  // measured payload bits + top-1 accuracy
    double mean_table_bits = 0;      // ideal table entropy of the coded latents
    double mean_estimated_bits = 0;  // differentiable model estimate
    std::size_t clouds = 0;
};

template <typename T>
eval_result evaluate_codec(const pointnet_codec<T>& model, const coding_table& tables,
                           const std::vector<point_cloud>& test, double lambda = 0) {
    check_arg(!test.empty(), "evaluate: empty test set");
    struct slot {
        double payload_bits = 0, table_bits_v = 0, est_bits = 0;
        bool correct = false;
    };
    std::vector<slot> slots(test.size());
    parallel_for(test.size(), [&](std::size_t i) {
        const tensor<T> x = cloud_tensor<T>(test[i].pts);
        const std::vector<uint8_t> stream = compress_cloud(model, tables, x);
        const decompress_result<T> dec = decompress_cloud(model, tables, stream);
        slots[i].payload_bits = static_cast<double>(payload_bits(stream));
        slots[i].table_bits_v = table_bits(dec.latent, tables);
        tensor<T> yhat({model.cfg.latent, 1});
        for (std::size_t k = 0; k < dec.latent.size(); ++k)
            yhat[k] = static_cast<T>(dec.latent[k]);
        slots[i].est_bits = model.prior.rate_bits(model.store, yhat);
        slots[i].correct = argmax_class(dec.logits) == test[i].label;
    });
    eval_result r;
    r.clouds = test.size();
    std::size_t correct = 0;
    for (const auto& s : slots) {
        r.point.rate_bits += s.payload_bits;
        r.mean_table_bits += s.table_bits_v;
        r.mean_estimated_bits += s.est_bits;
        if (s.correct) ++correct;
    }
    const double n = static_cast<double>(test.size());
    r.point.rate_bits /= n;
    r.mean_table_bits /= n;
    r.mean_estimated_bits /= n;
    r.point.accuracy = 100.0 * static_cast<double>(correct) / n;
    r.point.lambda = lambda;
    return r;
}

}  // namespace pcc
