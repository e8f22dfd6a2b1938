#pragma once

// Monte Carlo estimators with confidence intervals: power means with a
// percentile bootstrap, tail frequencies with Wilson intervals.

#include "chaosmom/error.hpp"
#include "chaosmom/random.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace chaosmom {

struct MCEstimate {
    double value = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    bool heavy_tail_warning = false;
};

inline constexpr double kZ95 = 1.959963984540054;
inline constexpr int kBootstrapResamples = 400;
inline constexpr std::size_t kBootstrapBatches = 2000;
inline constexpr double kHeavyTailP = 16.0;

namespace detail {

// Contiguous batches of nearly equal size; with n <= kBootstrapBatches each
// sample is its own batch and this is the ordinary bootstrap.
inline std::vector<std::size_t> batch_bounds(std::size_t n) {
    std::size_t m = std::min(n, kBootstrapBatches);
    std::vector<std::size_t> b(m + 1);
    for (std::size_t j = 0; j <= m; ++j) b[j] = j * n / m;
    return b;
}

inline double percentile_sorted(const std::vector<double>& xs, double q) {
    double h = q * static_cast<double>(xs.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

inline double percentile(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    return percentile_sorted(xs, q);
}

inline double max_of(std::span<const double> s) {
    double m = 0.0;
    for (double x : s) {
        if (!(x >= 0.0)) throw InvalidArgument("samples must be finite and >= 0");
        m = std::max(m, x);
    }
    return m;
}

// Sum of (x / scale)^p over a range.
inline double scaled_power_sum(std::span<const double> s, double scale, double p) {
    double acc = 0.0;
    for (double x : s) acc += std::pow(x / scale, p);
    return acc;
}

} // namespace detail

/// (mean of s^p)^{1/p} with a 95% percentile bootstrap over
/// min(n, 2000) contiguous batches. Warns when p > 16 and the ten largest
/// samples carry more than half of the p-th moment sum.
inline MCEstimate empirical_moment(std::span<const double> samples, double p, std::uint64_t seed = 0,
                                   int resamples = kBootstrapResamples) {
    if (samples.empty()) throw InvalidArgument("samples must be nonempty");
    if (!(p >= 1.0)) throw InvalidArgument("moment order p must be >= 1");
    MCEstimate est;
    est.samples = samples.size();
    est.seed = seed;
    const double scale = detail::max_of(samples);
    if (scale == 0.0) return est;

    auto bounds = detail::batch_bounds(samples.size());
    const std::size_t m = bounds.size() - 1;
    std::vector<double> sums(m);
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        sums[j] = detail::scaled_power_sum(samples.subspan(bounds[j], bounds[j + 1] - bounds[j]), scale, p);
        total += sums[j];
    }
    const double n = static_cast<double>(samples.size());
    est.value = scale * std::pow(total / n, 1.0 / p);

    Stream rng(seed, {0xb007ULL, static_cast<std::uint64_t>(p * 1024.0)});
    std::vector<double> boot(static_cast<std::size_t>(resamples));
    for (auto& b : boot) {
        double s = 0.0, count = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            std::size_t pick = rng.index(m);
            s += sums[pick];
            count += static_cast<double>(bounds[pick + 1] - bounds[pick]);
        }
        b = scale * std::pow(s / count, 1.0 / p);
    }
    est.ci_low = std::min(est.value, detail::percentile(boot, 0.025));
    est.ci_high = std::max(est.value, detail::percentile(boot, 0.975));

    if (p > kHeavyTailP) {
        std::vector<double> top(samples.begin(), samples.end());
        std::size_t k = std::min<std::size_t>(10, top.size());
        std::partial_sort(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(k), top.end(), std::greater<>());
        double head = detail::scaled_power_sum(std::span<const double>(top.data(), k), scale, p);
        est.heavy_tail_warning = head > 0.5 * total;
    }
    return est;
}

/// Ratio of p-th moment norms of two equally long sample arrays, with a
/// paired batch bootstrap (pairs (x_j, y_j) are resampled together, which
/// is valid for independent and for common-random-number pairs alike).
/// Both-zero arrays give 0 with a zero interval.
inline MCEstimate moment_ratio(std::span<const double> x, std::span<const double> y, double p, std::uint64_t seed = 0,
                               int resamples = kBootstrapResamples) {
    if (x.empty() || x.size() != y.size()) throw InvalidArgument("ratio needs two nonempty arrays of equal length");
    if (!(p >= 1.0)) throw InvalidArgument("moment order p must be >= 1");
    MCEstimate est;
    est.samples = x.size();
    est.seed = seed;
    const double sx = detail::max_of(x), sy = detail::max_of(y);
    if (sy == 0.0) {
        if (sx == 0.0) return est;
        throw DegenerateInput("denominator samples are all zero");
    }
    if (sx == 0.0) return est;
    auto bounds = detail::batch_bounds(x.size());
    const std::size_t m = bounds.size() - 1;
    std::vector<double> ax(m), ay(m);
    double tx = 0.0, ty = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        std::size_t len = bounds[j + 1] - bounds[j];
        tx += ax[j] = detail::scaled_power_sum(x.subspan(bounds[j], len), sx, p);
        ty += ay[j] = detail::scaled_power_sum(y.subspan(bounds[j], len), sy, p);
    }
    auto ratio = [&](double a, double b) { return (sx / sy) * std::pow(a / b, 1.0 / p); };
    est.value = ratio(tx, ty);
    Stream rng(seed, {0xb008ULL, static_cast<std::uint64_t>(p * 1024.0)});
    std::vector<double> boot;
    boot.reserve(static_cast<std::size_t>(resamples));
    for (int r = 0; r < resamples; ++r) {
        double a = 0.0, b = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            std::size_t pick = rng.index(m);
            a += ax[pick];
            b += ay[pick];
        }
        if (b > 0.0) boot.push_back(ratio(a, b));
    }
    est.ci_low = boot.empty() ? est.value : std::min(est.value, detail::percentile(boot, 0.025));
    est.ci_high = boot.empty() ? est.value : std::max(est.value, detail::percentile(boot, 0.975));
    return est;
}

/// Wilson score interval for a binomial proportion at 95%.
inline MCEstimate wilson(std::size_t hits, std::size_t n) {
    if (n == 0) throw InvalidArgument("samples must be nonempty");
    MCEstimate est;
    est.samples = n;
    const double nn = static_cast<double>(n), ph = static_cast<double>(hits) / nn, z2 = kZ95 * kZ95;
    const double denom = 1.0 + z2 / nn;
    const double centre = (ph + z2 / (2.0 * nn)) / denom;
    const double half = kZ95 * std::sqrt(ph * (1.0 - ph) / nn + z2 / (4.0 * nn * nn)) / denom;
    est.value = ph;
    est.ci_low = std::max(0.0, std::min(ph, centre - half));
    est.ci_high = std::min(1.0, std::max(ph, centre + half));
    return est;
}

/// Empirical P(S >= u) with a Wilson interval.
inline MCEstimate empirical_tail(std::span<const double> samples, double u) {
    if (samples.empty()) throw InvalidArgument("samples must be nonempty");
    std::size_t hits = 0;
    for (double s : samples) hits += s >= u ? 1 : 0;
    return wilson(hits, samples.size());
}

/// Type-7 empirical quantile.
inline double empirical_quantile(std::span<const double> samples, double q) {
    if (samples.empty()) throw InvalidArgument("samples must be nonempty");
    std::vector<double> xs(samples.begin(), samples.end());
    return detail::percentile(std::move(xs), std::clamp(q, 0.0, 1.0));
}

} // namespace chaosmom
