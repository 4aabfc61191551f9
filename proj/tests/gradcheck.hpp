#pragma once

// Central-finite-difference gradient checking at 64-bit precision, plus the
// randomized-shape battery shared by the unit tests and the acceptance
// suite. Each op is checked by projecting its output onto a fixed random
// direction (making a scalar), computing analytic gradients through the
// layer's backward pass, and comparing against (f(x+h) - f(x-h)) / 2h for
// every input element and every parameter element.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pcc/codec.hpp"
#include "pcc/entropy.hpp"
#include "pcc/nn.hpp"
#include "pcc/rng.hpp"
#include "pcc/tensor.hpp"

namespace gradcheck {

using pcc::batch;
using pcc::tensor;

struct fd_options {
    double h = 1e-4;
    double rtol = 1e-4;
    double atol = 1e-7;
};

struct fd_failure {
    std::string what;
};

// compares d(eval)/d(t[i]) against analytic[i] for every i
inline void check_tensor_grad(tensor<double>& t, const tensor<double>& analytic,
                              const std::function<double()>& eval,
                              const std::string& label, const fd_options& opt = {}) {
    for (std::size_t i = 0; i < t.numel(); ++i) {
        const double orig = t[i];
        t[i] = orig + opt.h;
        const double fp = eval();
        t[i] = orig - opt.h;
        const double fm = eval();
        t[i] = orig;
        const double fd = (fp - fm) / (2 * opt.h);
        const double a = analytic[i];
        const double tol = opt.atol + opt.rtol * std::max(std::abs(a), std::abs(fd));
        if (!(std::abs(a - fd) <= tol))
            throw fd_failure{label + "[" + std::to_string(i) + "]: analytic " +
                             std::to_string(a) + " vs fd " + std::to_string(fd)};
    }
}

// random input kept away from relu/max kinks so finite differences are valid
inline tensor<double> random_input(pcc::rng& r, std::size_t rows, std::size_t cols,
                                   double kink_margin = 0.0) {
    tensor<double> t({rows, cols});
    for (auto& v : t.data) {
        v = r.uniform(-2.0, 2.0);
        if (kink_margin > 0 && std::abs(v) < kink_margin)
            v = v >= 0 ? v + kink_margin : v - kink_margin;
    }
    return t;
}

inline tensor<double> random_direction(pcc::rng& r,
                                       const std::vector<std::size_t>& shape) {
    tensor<double> t(shape);
    for (auto& v : t.data) v = r.uniform(-1.0, 1.0);
    return t;
}

inline double project(const batch<double>& out, const batch<double>& dir) {
    double s = 0;
    for (std::size_t b = 0; b < out.size(); ++b)
        for (std::size_t i = 0; i < out[b].numel(); ++i) s += out[b][i] * dir[b][i];
    return s;
}

// one full check of an op: forward + backward once for the analytic
// gradients, then finite differences over input and every parameter
struct op_check {
    pcc::param_store<double> store;
    batch<double> input;
    batch<double> dir;

    template <typename Forward, typename Backward>
    void run(Forward&& fwd, Backward&& bwd, const std::string& label,
             const fd_options& opt = {}) {
        dir.clear();
        {
            const batch<double> out = fwd();
            pcc::rng r(0xD12 + out.size() + out[0].numel());
            for (const auto& o : out) dir.push_back(random_direction(r, o.shape));
        }
        store.zero_grad();
        const batch<double> grad_in = bwd(dir);
        auto eval = [&]() { return project(fwd(), dir); };
        for (std::size_t b = 0; b < input.size(); ++b)
            check_tensor_grad(input[b], grad_in[b], eval, label + ".input", opt);
        for (auto& p : store.params)
            check_tensor_grad(p.value, p.grad, eval, label + "." + p.name, opt);
    }
};

// ---------------------------------------------------------------------------
// per-op batteries; each call covers one random shape

inline void conv_case(pcc::rng& r, bool as_linear) {
    const std::size_t groups = as_linear ? 1 : (1 + r.below(3));
    const std::size_t gs_in = 1 + r.below(3), gs_out = 1 + r.below(3);
    const std::size_t in_ch = groups * gs_in, out_ch = groups * gs_out;
    const std::size_t points = as_linear ? 1 : 1 + r.below(5);
    const std::size_t bsz = 1 + r.below(2);
    op_check c;
    pcc::conv1x1<double> conv =
        pcc::conv1x1<double>::create(c.store, "op", in_ch, out_ch, groups, r);
    for (std::size_t b = 0; b < bsz; ++b)
        c.input.push_back(random_input(r, in_ch, points));
    c.run([&]() { return conv.forward(c.store, c.input, true); },
          [&](const batch<double>& g) { return conv.backward(c.store, g); },
          as_linear ? "linear" : "conv1x1");
}

inline void shuffle_case(pcc::rng& r) {
    const std::size_t groups = 1 + r.below(3);
    const std::size_t channels = groups * (1 + r.below(4));
    const std::size_t points = 1 + r.below(5);
    op_check c;
    pcc::channel_shuffle<double> sh(channels, groups);
    c.input.push_back(random_input(r, channels, points));
    c.run([&]() { return sh.forward(c.input, true); },
          [&](const batch<double>& g) { return sh.backward(g); }, "channel_shuffle");
}

inline void relu_case(pcc::rng& r) {
    op_check c;
    pcc::relu<double> op;
    c.input.push_back(random_input(r, 1 + r.below(5), 1 + r.below(6), 0.05));
    c.run([&]() { return op.forward(c.input, true); },
          [&](const batch<double>& g) { return op.backward(g); }, "relu");
}

inline void batch_norm_case(pcc::rng& r, bool train) {
    const std::size_t channels = 1 + r.below(4);
    const std::size_t points = train ? 2 + r.below(5) : 1 + r.below(5);
    const std::size_t bsz = train ? 2 : 1 + r.below(2);
    op_check c;
    pcc::batch_norm<double> bn = pcc::batch_norm<double>::create(c.store, "op", channels);
    for (std::size_t i = 0; i < channels; ++i) {
        c.store[bn.gamma].value[i] = r.uniform(0.5, 1.5);
        c.store[bn.beta].value[i] = r.uniform(-0.5, 0.5);
        bn.running_mean[i] = r.uniform(-0.5, 0.5);
        bn.running_var[i] = r.uniform(0.5, 1.5);
    }
    for (std::size_t b = 0; b < bsz; ++b)
        c.input.push_back(random_input(r, channels, points));
    c.run([&]() { return bn.forward(c.store, c.input, train, true); },
          [&](const batch<double>& g) { return bn.backward(c.store, g); },
          train ? "batch_norm.train" : "batch_norm.eval");
}

inline void max_pool_case(pcc::rng& r) {
    const std::size_t channels = 1 + r.below(5);
    const std::size_t points = 1 + r.below(6);
    op_check c;
    pcc::max_pool<double> op;
    tensor<double> x = random_input(r, channels, points);
    // keep a clear gap between the top two values per channel
    for (std::size_t ch = 0; ch < channels; ++ch) {
        std::size_t best = 0;
        for (std::size_t p = 1; p < points; ++p)
            if (x.at(ch, p) > x.at(ch, best)) best = p;
        x.at(ch, best) += 0.1;
    }
    c.input.push_back(std::move(x));
    c.run([&]() { return op.forward(c.input, true); },
          [&](const batch<double>& g) { return op.backward(g); }, "max_pool");
}

inline void gain_case(pcc::rng& r) {
    const std::size_t channels = 1 + r.below(6);
    op_check c;
    pcc::gain_scale<double> op =
        pcc::gain_scale<double>::create(c.store, "op", channels, 10.0);
    for (std::size_t i = 0; i < channels; ++i)
        c.store[op.v].value[i] = r.uniform(-1.5, 1.5);
    c.input.push_back(random_input(r, channels, 1));
    c.run([&]() { return op.forward(c.store, c.input, true); },
          [&](const batch<double>& g) { return op.backward(c.store, g); },
          "gain_scale");
}

inline void dropout_case(pcc::rng& r) {
    const std::size_t channels = 1 + r.below(6);
    const uint64_t mask_seed = r.next_u64();
    op_check c;
    pcc::dropout<double> op(0.3);
    c.input.push_back(random_input(r, channels, 1));
    // the mask is part of the function under test, so every evaluation
    // replays the same rng stream
    c.run(
        [&]() {
            pcc::rng mask_rng(mask_seed);
            return op.forward(c.input, true, mask_rng, true);
        },
        [&](const batch<double>& g) { return op.backward(g); }, "dropout");
}

inline void softmax_ce_case(pcc::rng& r) {
    const std::size_t classes = 2 + r.below(8);
    const std::size_t label = r.below(classes);
    tensor<double> logits = random_input(r, classes, 1);
    const auto res = pcc::softmax_cross_entropy(logits, label);
    auto eval = [&]() { return pcc::softmax_cross_entropy(logits, label).loss; };
    check_tensor_grad(logits, res.dlogits, eval, "softmax_ce");
}

inline void entropy_rate_case(pcc::rng& r) {
    const std::size_t channels = 1 + r.below(4);
    pcc::param_store<double> store;
    pcc::factorized_prior<double> fp =
        pcc::factorized_prior<double>::create(store, "eb", channels, r);
    // wobble the parameters so the check is not specific to initialization
    for (auto& p : store.params)
        for (auto& v : p.value.data) v += r.uniform(-0.2, 0.2);
    tensor<double> y({channels, 1});
    for (auto& v : y.data) v = r.uniform(-3.0, 3.0);
    tensor<double> dy({channels, 1});
    store.zero_grad();
    fp.rate_backward(store, y, 1.0, dy);
    auto eval = [&]() { return fp.rate_bits(store, y); };
    check_tensor_grad(y, dy, eval, "rate_bits.y");
    for (auto& p : store.params)
        check_tensor_grad(p.value, p.grad, eval, "rate_bits." + p.name);
}

// runs `shapes` random cases of every differentiable op; throws fd_failure on
// any mismatch
inline void run_battery(std::size_t shapes, uint64_t seed) {
    pcc::rng r(seed);
    for (std::size_t i = 0; i < shapes; ++i) {
        conv_case(r, false);
        conv_case(r, true);
        shuffle_case(r);
        relu_case(r);
        batch_norm_case(r, true);
        batch_norm_case(r, false);
        max_pool_case(r);
        gain_case(r);
        dropout_case(r);
        softmax_ce_case(r);
        entropy_rate_case(r);
    }
}

}  // namespace gradcheck
