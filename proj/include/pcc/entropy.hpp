#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <vector>

#include "pcc/common.hpp"
#include "pcc/nn.hpp"
#include "pcc/rng.hpp"
#include "pcc/tensor.hpp"

// Fully-factorized learned entropy model. Each latent channel gets an
// independent monotone CDF c(x) built from a tiny MLP with nonnegative
// weights:
//
//   u_0 = x
//   z_k = softplus(H_k) u_{k-1} + b_k          k = 1..4, dims 1-3-3-3-1
//   u_k = z_k + tanh(a_k) .* tanh(z_k)         k < 4
//   c(x) = sigmoid(z_4)
//
// softplus keeps the weights nonnegative and |tanh(a)| < 1 keeps every gate
// strictly increasing, so c is nondecreasing with limits 0 and 1. The
// likelihood of an integer bin is p(n) = c(n + 0.5) - c(n - 0.5).
//
// The same model serves two roles: differentiable likelihoods for the rate
// term during training, and frozen 16-bit integer tables for the range coder.

namespace pcc {

inline constexpr double likelihood_floor = 0x1.0p-24;
inline constexpr double default_tail_mass = 1e-9;
inline constexpr uint32_t cdf_total = 1u << 16;
inline constexpr int32_t table_support_cap = 16384;

namespace detail {

inline double softplus(double x) {
    if (x > 30.0) return x;
    return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace detail

template <typename T>
struct factorized_prior {
    static constexpr int num_layers = 4;
    // per-layer output dims for the 1-3-3-3-1 chain
    static constexpr std::array<std::size_t, 4> dims = {3, 3, 3, 1};

    std::size_t channels = 0;
    std::array<std::size_t, 4> h{};  // matrix handles, shape [N, d_k, d_{k-1}]
    std::array<std::size_t, 4> b{};  // bias handles,  shape [N, d_k]
    std::array<std::size_t, 3> a{};  // gate handles,  shape [N, d_k], k < 4

    static std::size_t in_dim(int k) { return k == 0 ? 1 : dims[k - 1]; }

    static factorized_prior create(param_store<T>& store, const std::string& name,
                                   std::size_t channels, rng& r) {
        factorized_prior fp;
        fp.channels = channels;
        const double init_scale = 10.0;
        const double scale = std::pow(init_scale, 1.0 / num_layers);
        for (int k = 0; k < num_layers; ++k) {
            const std::size_t dk = dims[k], dp = in_dim(k);
            const double hinit =
                std::log(std::expm1(1.0 / (scale * static_cast<double>(dk))));
            tensor<T> H({channels, dk, dp}, static_cast<T>(hinit));
            fp.h[k] = store.add(name + ".h" + std::to_string(k), std::move(H));
            tensor<T> B({channels, dk});
            for (auto& v : B.data) v = static_cast<T>(r.uniform(-0.5, 0.5));
            fp.b[k] = store.add(name + ".b" + std::to_string(k), std::move(B));
            if (k < num_layers - 1)
                fp.a[k] = store.add(name + ".a" + std::to_string(k),
                                    tensor<T>({channels, dk}));
        }
        return fp;
    }

    // forward cache for one (channel, point) evaluation
    struct chain {
        std::array<std::array<double, 3>, 4> z{};  // pre-gate
        std::array<std::array<double, 3>, 4> u{};  // post-gate
        double x = 0;
        double logit = 0;
    };

    chain eval_chain(const param_store<T>& store, std::size_t ch, double x) const {
        chain c;
        c.x = x;
        std::array<double, 3> prev{};
        prev[0] = x;
        std::size_t prev_d = 1;
        for (int k = 0; k < num_layers; ++k) {
            const std::size_t dk = dims[k];
            const tensor<T>& H = store[h[k]].value;
            const tensor<T>& B = store[b[k]].value;
            for (std::size_t i = 0; i < dk; ++i) {
                double z = static_cast<double>(B.data[ch * dk + i]);
                for (std::size_t j = 0; j < prev_d; ++j)
                    z += detail::softplus(static_cast<double>(
                             H.data[(ch * dk + i) * prev_d + j])) * prev[j];
                c.z[k][i] = z;
                if (k < num_layers - 1) {
                    const double gate = std::tanh(static_cast<double>(
                        store[a[k]].value.data[ch * dk + i]));
                    c.u[k][i] = z + gate * std::tanh(z);
                } else {
                    c.u[k][i] = z;
                }
            }
            for (std::size_t i = 0; i < dk; ++i) prev[i] = c.u[k][i];
            prev_d = dk;
        }
        c.logit = c.u[num_layers - 1][0];
        return c;
    }

    // d(logit)/dx plus parameter gradients, all scaled by gscale
    double backward_chain(param_store<T>& store, std::size_t ch, const chain& c,
                          double gscale) const {
        std::array<double, 3> dz{};
        dz[0] = gscale;  // gradient wrt z_4
        for (int k = num_layers - 1; k >= 0; --k) {
            const std::size_t dk = dims[k], dp = in_dim(k);
            const tensor<T>& H = store[h[k]].value;
            tensor<T>& dH = store[h[k]].grad;
            tensor<T>& dB = store[b[k]].grad;
            std::array<double, 3> dprev{};
            for (std::size_t i = 0; i < dk; ++i) {
                const double g = dz[i];
                if (g == 0.0) continue;
                dB.data[ch * dk + i] += static_cast<T>(g);
                const double* uprev = (k == 0) ? &c.x : c.u[k - 1].data();
                for (std::size_t j = 0; j < dp; ++j) {
                    const double hraw =
                        static_cast<double>(H.data[(ch * dk + i) * dp + j]);
                    // d softplus(h)/dh = sigmoid(h)
                    dH.data[(ch * dk + i) * dp + j] +=
                        static_cast<T>(g * detail::sigmoid(hraw) * uprev[j]);
                    dprev[j] += g * detail::softplus(hraw);
                }
            }
            if (k == 0) return dprev[0];
            // through the gate of layer k-1: u = z + tanh(a) tanh(z)
            const std::size_t dkm = dims[k - 1];
            tensor<T>& dA = store[a[k - 1]].grad;
            for (std::size_t i = 0; i < dkm; ++i) {
                const double du = dprev[i];
                if (du == 0.0) {
                    dz[i] = 0.0;
                    continue;
                }
                const double araw = static_cast<double>(
                    store[a[k - 1]].value.data[ch * dkm + i]);
                const double gate = std::tanh(araw);
                const double tz = std::tanh(c.z[k - 1][i]);
                dz[i] = du * (1.0 + gate * (1.0 - tz * tz));
                dA.data[ch * dkm + i] +=
                    static_cast<T>(du * tz * (1.0 - gate * gate));
            }
        }
        return 0;  // unreachable
    }

    double logit_at(const param_store<T>& store, std::size_t ch, double x) const {
        return eval_chain(store, ch, x).logit;
    }

    double cdf(const param_store<T>& store, std::size_t ch, double x) const {
        return detail::sigmoid(logit_at(store, ch, x));
    }

    // unclamped bin probability; evaluated on the smaller-magnitude side of
    // the sigmoid to avoid cancellation in the tails
    double raw_likelihood(const param_store<T>& store, std::size_t ch, double x) const {
        const double lu = logit_at(store, ch, x + 0.5);
        const double ll = logit_at(store, ch, x - 0.5);
        const double s = (ll + lu) > 0 ? -1.0 : 1.0;
        return std::abs(detail::sigmoid(s * lu) - detail::sigmoid(s * ll));
    }

    double likelihood_one(const param_store<T>& store, std::size_t ch, double x) const {
        return std::max(raw_likelihood(store, ch, x), likelihood_floor);
    }

    std::vector<double> likelihood(const param_store<T>& store,
                                   const tensor<T>& y) const {
        check_arg(y.numel() == channels,
                  "likelihood: latent length " + std::to_string(y.numel()) +
                      " != " + std::to_string(channels) + " channels");
        std::vector<double> p(channels);
        for (std::size_t c = 0; c < channels; ++c)
            p[c] = likelihood_one(store, c, static_cast<double>(y[c]));
        return p;
    }

    double rate_bits(const param_store<T>& store, const tensor<T>& y) const {
        double r = 0;
        for (double p : likelihood(store, y)) r -= std::log2(p);
        return r;
    }

    // rate in bits; accumulates d(rate)/d(params) * gscale and adds
    // d(rate)/dy * gscale into dy
    double rate_backward(param_store<T>& store, const tensor<T>& y, double gscale,
                         tensor<T>& dy) {
        check_arg(y.numel() == channels && dy.numel() == channels,
                  "rate_backward: latent length mismatch");
        constexpr double inv_ln2 = 1.4426950408889634;
        double rate = 0;
        for (std::size_t c = 0; c < channels; ++c) {
            const double x = static_cast<double>(y[c]);
            const chain cu = eval_chain(store, c, x + 0.5);
            const chain cl = eval_chain(store, c, x - 0.5);
            const double s = (cl.logit + cu.logit) > 0 ? -1.0 : 1.0;
            const double praw =
                std::abs(detail::sigmoid(s * cu.logit) - detail::sigmoid(s * cl.logit));
            const double p = std::max(praw, likelihood_floor);
            rate -= std::log2(p);
            // d(-log2 p)/dp, with the clamped value in the denominator; the
            // upstream gradient always pushes p upward so it is allowed
            // through the floor
            const double dp = -inv_ln2 / p * gscale;
            const double su = detail::sigmoid(cu.logit);
            const double sl = detail::sigmoid(cl.logit);
            const double dlu = dp * su * (1.0 - su);
            const double dll = -dp * sl * (1.0 - sl);
            double dx = 0;
            if (dlu != 0.0) dx += backward_chain(store, c, cu, dlu);
            if (dll != 0.0) dx += backward_chain(store, c, cl, dll);
            dy[c] += static_cast<T>(dx);
        }
        return rate;
    }
};

// additive uniform noise, the training-time stand-in for rounding; the
// gradient passes through unchanged since the noise is an additive constant
template <typename T>
tensor<T> noise_quantize(const tensor<T>& y, rng& r) {
    tensor<T> out = y;
    for (auto& v : out.data) v += static_cast<T>(r.uniform() - 0.5);
    return out;
}

// integer rounding, half away from zero; latents beyond int32 cannot be
// meaningful, so they saturate rather than overflow
template <typename T>
std::vector<int32_t> quantize_latent(const tensor<T>& y) {
    std::vector<int32_t> q(y.numel());
    for (std::size_t i = 0; i < y.numel(); ++i) {
        const double v = static_cast<double>(y[i]);
        check(std::isfinite(v), "quantize: non-finite latent value");
        const double r = std::round(v);
        q[i] = r >= 2147483647.0
                   ? 2147483647
                   : (r <= -2147483647.0 ? -2147483647
                                         : static_cast<int32_t>(r));
    }
    return q;
}

// ---------------------------------------------------------------------------
// integer coding tables

struct channel_table {
    int32_t min_v = 0;
    int32_t max_v = 0;
    // cumulative frequencies, length symbol_count()+1, cdf[0]=0, back()=65536,
    // strictly increasing; the last symbol slot is the escape symbol
    std::vector<uint32_t> cdf;

    std::size_t symbol_count() const { return cdf.size() - 1; }
    std::size_t escape_symbol() const { return symbol_count() - 1; }
    uint32_t freq(std::size_t s) const { return cdf[s + 1] - cdf[s]; }

    bool contains(int32_t v) const { return v >= min_v && v <= max_v; }
    std::size_t symbol_of(int32_t v) const {
        return contains(v) ? static_cast<std::size_t>(v - min_v) : escape_symbol();
    }

    void validate() const {
        check(cdf.size() >= 2, "coding table: empty cdf");
        check(cdf.front() == 0 && cdf.back() == cdf_total,
              "coding table: cdf must span [0, 65536]");
        for (std::size_t i = 1; i < cdf.size(); ++i)
            check(cdf[i] > cdf[i - 1], "coding table: cdf not strictly increasing");
    }
};

struct coding_table {
    std::vector<channel_table> channels;
};

// Largest-remainder quantization of a pmf to 16-bit frequencies: every slot
// gets at least one unit and the total is exactly 65536, so per-symbol error
// stays within a couple of units.
inline std::vector<uint32_t> quantize_pmf(std::vector<double> pmf) {
    const std::size_t n = pmf.size();
    check_arg(n >= 1 && n <= cdf_total, "quantize_pmf: bad symbol count");
    double sum = 0;
    for (double& p : pmf) {
        if (!(p > 0)) p = 0;
        sum += p;
    }
    if (sum <= 0) {
        pmf.assign(n, 1.0);
        sum = static_cast<double>(n);
    }
    std::vector<uint32_t> freq(n);
    std::vector<std::pair<double, std::size_t>> rem(n);
    uint64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ideal = pmf[i] / sum * cdf_total;
        const double fl = std::floor(ideal);
        freq[i] = static_cast<uint32_t>(fl);
        rem[i] = {ideal - fl, i};
        total += freq[i];
    }
    // distribute the leftover units by descending remainder (index breaks ties)
    std::sort(rem.begin(), rem.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
    });
    int64_t leftover = static_cast<int64_t>(cdf_total) - static_cast<int64_t>(total);
    std::size_t ri = 0;
    while (leftover > 0) {
        freq[rem[ri % n].second] += 1;
        ++ri;
        --leftover;
    }
    while (leftover < 0) {  // float drift; take back from the largest slots
        std::size_t big = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (freq[i] > freq[big]) big = i;
        check(freq[big] > 1, "quantize_pmf: cannot renormalize");
        freq[big] -= 1;
        ++leftover;
    }
    // Every symbol must stay codable: zero slots get one unit each, paid for
    // by cycling over the largest donors so no single symbol's probability
    // drifts by more than a unit or two.
    std::size_t need = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (freq[i] == 0) {
            freq[i] = 1;
            ++need;
        }
    }
    if (need > 0) {
        std::vector<std::size_t> donors(n);
        for (std::size_t i = 0; i < n; ++i) donors[i] = i;
        std::sort(donors.begin(), donors.end(), [&](std::size_t a, std::size_t b) {
            if (freq[a] != freq[b]) return freq[a] > freq[b];
            return a < b;
        });
        std::size_t failures = 0;
        for (std::size_t di = 0; need > 0; ++di) {
            check(failures <= n, "quantize_pmf: not enough mass to give every "
                                 "symbol a unit");
            const std::size_t cand = donors[di % n];
            if (freq[cand] > 1) {
                freq[cand] -= 1;
                --need;
                failures = 0;
            } else {
                ++failures;
            }
        }
    }
    return freq;
}

inline channel_table make_channel_table(const std::vector<double>& pmf,
                                        double escape_mass, int32_t min_v) {
    std::vector<double> full = pmf;
    full.push_back(std::max(escape_mass, 0.0));
    channel_table t;
    t.min_v = min_v;
    t.max_v = min_v + static_cast<int32_t>(pmf.size()) - 1;
    const auto freq = quantize_pmf(std::move(full));
    t.cdf.resize(freq.size() + 1);
    t.cdf[0] = 0;
    for (std::size_t i = 0; i < freq.size(); ++i) t.cdf[i + 1] = t.cdf[i] + freq[i];
    t.validate();
    return t;
}

// Chooses per-channel integer supports so that at most `tail_mass` probability
// falls outside on each side, then freezes 16-bit tables. Channels whose CDF
// stays numerically flat out to the support cap get clamped with a warning;
// the escape symbol absorbs whatever mass is left outside.
template <typename T>
coding_table build_tables(const param_store<T>& store, const factorized_prior<T>& fp,
                          double tail_mass = default_tail_mass) {
    coding_table tables;
    tables.channels.resize(fp.channels);
    for (std::size_t c = 0; c < fp.channels; ++c) {
        // seed the support scan at the channel median so the table holds the
        // mass region itself, not a detour through zero
        int32_t median = 0;
        while (fp.cdf(store, c, median) < 0.5 && median < table_support_cap) ++median;
        while (fp.cdf(store, c, median) > 0.5 && median > -table_support_cap) --median;
        int32_t min_v = median, max_v = median;
        bool clamped = false;
        while (fp.cdf(store, c, min_v - 0.5) > tail_mass) {
            if (min_v <= -table_support_cap) {
                clamped = true;
                break;
            }
            --min_v;
        }
        while (1.0 - fp.cdf(store, c, max_v + 0.5) > tail_mass) {
            if (max_v >= table_support_cap) {
                clamped = true;
                break;
            }
            ++max_v;
        }
        if (clamped)
            std::cerr << "warning: entropy model channel " << c
                      << " has a nearly flat CDF; clamping support to ["
                      << min_v << ", " << max_v << "]\n";
        std::vector<double> pmf(static_cast<std::size_t>(max_v - min_v + 1));
        for (int32_t v = min_v; v <= max_v; ++v)
            pmf[static_cast<std::size_t>(v - min_v)] =
                fp.raw_likelihood(store, c, static_cast<double>(v));
        const double escape =
            fp.cdf(store, c, min_v - 0.5) + (1.0 - fp.cdf(store, c, max_v + 0.5));
        tables.channels[c] = make_channel_table(pmf, escape, min_v);
    }
    return tables;
}

}  // namespace pcc
