#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pcc/common.hpp"
#include "pcc/sampling.hpp"

namespace pcc {

// one (rate, accuracy) measurement of a trained model on a test set
struct ra_point {
    double rate_bits = 0;   // mean payload bits per cloud
    double accuracy = 0;    // top-1, percent
    double lambda = 0;
    std::string checkpoint_id;
};

// Points not dominated by any other (lower-or-equal rate and
// higher-or-equal accuracy, at least one strict), sorted by rate. Exact
// duplicates collapse to one point, so the result has strictly increasing
// rate and accuracy regardless of input order.
inline std::vector<ra_point> pareto_front(std::vector<ra_point> points) {
    std::sort(points.begin(), points.end(), [](const ra_point& a, const ra_point& b) {
        if (a.rate_bits != b.rate_bits) return a.rate_bits < b.rate_bits;
        return a.accuracy > b.accuracy;
    });
    std::vector<ra_point> front;
    double best_acc = -std::numeric_limits<double>::infinity();
    for (const auto& p : points) {
        if (p.accuracy > best_acc) {
            front.push_back(p);
            best_acc = p.accuracy;
        }
    }
    return front;
}

// ---------------------------------------------------------------------------
// Bjontegaard-Delta metrics
//
// Both metrics fit a cubic polynomial to each curve (accuracy over
// log10(rate) for BD-accuracy, log10(rate) over accuracy for BD-rate),
// integrate the difference in closed form over the overlapping interval,
// and average. BD-rate converts the mean log-rate difference back to a
// relative percentage. Curves whose abscissae have fewer than four distinct
// values fall back to piecewise-linear integration.

struct bd_report {
    double bd_rate_percent = 0;
    double bd_accuracy = 0;
};

namespace detail {

struct curve_fit {
    bool cubic = false;
    std::array<double, 4> coeff{};  // about x_center
    double x_center = 0;
    std::vector<double> xs, ys;  // kept for the piecewise-linear fallback

    double integral(double lo, double hi) const {
        if (cubic) {
            auto anti = [&](double x) {
                const double t = x - x_center;
                return coeff[0] * t + coeff[1] * t * t / 2 + coeff[2] * t * t * t / 3 +
                       coeff[3] * t * t * t * t / 4;
            };
            return anti(hi) - anti(lo);
        }
        // trapezoid over the piecewise-linear interpolant restricted to [lo, hi]
        auto value = [&](double x) {
            if (x <= xs.front()) return ys.front();
            if (x >= xs.back()) return ys.back();
            const auto it = std::upper_bound(xs.begin(), xs.end(), x);
            const std::size_t i = static_cast<std::size_t>(it - xs.begin());
            const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            return ys[i - 1] + t * (ys[i] - ys[i - 1]);
        };
        double acc = 0;
        double prev_x = lo, prev_y = value(lo);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (xs[i] <= lo || xs[i] >= hi) continue;
            acc += (xs[i] - prev_x) * (prev_y + value(xs[i])) / 2;
            prev_x = xs[i];
            prev_y = value(xs[i]);
        }
        acc += (hi - prev_x) * (prev_y + value(hi)) / 2;
        return acc;
    }
};

// least-squares cubic via normal equations on centered x
inline curve_fit fit_curve(std::vector<double> xs, std::vector<double> ys) {
    check_arg(xs.size() == ys.size() && xs.size() >= 4,
              "bd_metrics: need at least 4 points per curve");
    // sort by x and merge duplicate abscissae (average their ordinates)
    std::vector<std::size_t> order(xs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> sx, sy;
    for (std::size_t k : order) {
        if (!sx.empty() && xs[k] == sx.back()) {
            sy.back() = (sy.back() + ys[k]) / 2;
        } else {
            sx.push_back(xs[k]);
            sy.push_back(ys[k]);
        }
    }
    curve_fit fit;
    fit.xs = sx;
    fit.ys = sy;
    if (sx.size() < 4) return fit;  // degenerate; piecewise-linear fallback

    double mean = 0;
    for (double x : sx) mean += x;
    mean /= static_cast<double>(sx.size());
    fit.x_center = mean;

    // normal equations A c = b for the cubic basis (1, t, t^2, t^3)
    double S[7] = {0};
    double b[4] = {0};
    for (std::size_t i = 0; i < sx.size(); ++i) {
        const double t = sx[i] - mean;
        double tp = 1;
        for (int k = 0; k <= 6; ++k) {
            S[k] += tp;
            if (k <= 3) b[k] += tp * sy[i];
            tp *= t;
        }
    }
    double A[4][5];
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) A[r][c] = S[r + c];
        A[r][4] = b[r];
    }
    // gaussian elimination with partial pivoting
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        if (std::abs(A[piv][col]) < 1e-12) return fit;  // singular; fallback
        if (piv != col)
            for (int c = 0; c < 5; ++c) std::swap(A[piv][c], A[col][c]);
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = A[r][col] / A[col][col];
            for (int c = col; c < 5; ++c) A[r][c] -= f * A[col][c];
        }
    }
    for (int r = 0; r < 4; ++r) fit.coeff[r] = A[r][4] / A[r][r];
    fit.cubic = true;
    return fit;
}

inline double bd_average_difference(const std::vector<double>& x_test,
                                    const std::vector<double>& y_test,
                                    const std::vector<double>& x_anchor,
                                    const std::vector<double>& y_anchor) {
    const curve_fit ft = fit_curve(x_test, y_test);
    const curve_fit fa = fit_curve(x_anchor, y_anchor);
    const double lo = std::max(ft.xs.front(), fa.xs.front());
    const double hi = std::min(ft.xs.back(), fa.xs.back());
    check_arg(hi > lo, "bd_metrics: curves do not overlap");
    return (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
}

}  // namespace detail

inline bd_report bd_metrics(const std::vector<ra_point>& test,
                            const std::vector<ra_point>& anchor) {
    check_arg(test.size() >= 4 && anchor.size() >= 4,
              "bd_metrics: need at least 4 points per curve");
    std::vector<double> lr_t, acc_t, lr_a, acc_a;
    for (const auto& p : test) {
        check_arg(p.rate_bits > 0, "bd_metrics: rates must be positive");
        lr_t.push_back(std::log10(p.rate_bits));
        acc_t.push_back(p.accuracy);
    }
    for (const auto& p : anchor) {
        check_arg(p.rate_bits > 0, "bd_metrics: rates must be positive");
        lr_a.push_back(std::log10(p.rate_bits));
        acc_a.push_back(p.accuracy);
    }
    bd_report r;
    const double dlog =
        detail::bd_average_difference(acc_t, lr_t, acc_a, lr_a);  // log10 rate over acc
    r.bd_rate_percent = (std::pow(10.0, dlog) - 1.0) * 100.0;
    r.bd_accuracy = detail::bd_average_difference(lr_t, acc_t, lr_a, acc_a);
    return r;
}

// ---------------------------------------------------------------------------
// Chamfer distance: symmetric mean squared nearest-neighbor distance

inline double chamfer(const std::vector<point3>& a, const std::vector<point3>& b) {
    check_arg(!a.empty() && !b.empty(), "chamfer: empty cloud");
    auto one_way = [](const std::vector<point3>& from, const std::vector<point3>& to) {
        double total = 0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) {
                const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
                best = std::min(best, dx * dx + dy * dy + dz * dz);
            }
            total += best;
        }
        return total / static_cast<double>(from.size());
    };
    return one_way(a, b) + one_way(b, a);
}

}  // namespace pcc
