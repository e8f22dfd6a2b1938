#pragma once

// Audits of the moment-growth hypothesis ||X||_{2p} <= 2^k ||X||_p and of the
// tail-growth inequality N(C t x) >= t^{1/k} N(x) that it implies.

#include "chaosmom/distributions.hpp"

#include <cmath>
#include <vector>

namespace chaosmom {

/// {1, 2, 4, ..., p_max}: the condition is a doubling condition.
inline std::vector<double> doubling_grid(double p_max = 128.0) {
    std::vector<double> g;
    for (double p = 1.0; p <= p_max * (1.0 + 1e-12); p *= 2.0) g.push_back(p);
    return g;
}

struct GrowthReport {
    int k_tested = 0;
    std::vector<double> p_grid;
    double max_ratio = 0.0;
    double worst_p = 0.0;
    bool passed = false;
};

inline GrowthReport check_moment_growth(const TailDistribution& dist, int k,
                                        const std::vector<double>& p_grid) {
    if (p_grid.empty()) throw InvalidArgument("p_grid must be nonempty");
    if (k < 0) throw InvalidArgument("k must be nonnegative");
    GrowthReport r;
    r.k_tested = k;
    r.p_grid = p_grid;
    for (double p : p_grid) {
        if (!(p >= 1.0)) throw InvalidArgument("p_grid entries must be >= 1");
        double ratio = moment_norm(dist, 2.0 * p) / moment_norm(dist, p);
        if (ratio > r.max_ratio) {
            r.max_ratio = ratio;
            r.worst_p = p;
        }
    }
    r.passed = r.max_ratio <= std::ldexp(1.0, k) * (1.0 + 1e-9);
    return r;
}

struct GrowthLemmaReport {
    double min_margin = kInf;  // min of N(C t x) - t^beta N(x)
    double worst_t = 0.0;
    double worst_x = 0.0;
    std::size_t points_checked = 0;
    bool passed = true;
};

/// Checks N(C t x) >= t^beta N(x) on the grid; points with N(x) = +inf are skipped.
inline GrowthLemmaReport check_growth_inequality(const TailDistribution& dist, double C, double beta,
                                                 const std::vector<double>& t_grid,
                                                 const std::vector<double>& x_grid) {
    GrowthLemmaReport r;
    for (double t : t_grid) {
        for (double x : x_grid) {
            if (!(t >= 1.0) || !(x >= 1.0)) throw InvalidArgument("grid entries must be >= 1");
            double nx = dist.n_value(x);
            if (std::isinf(nx)) continue;
            double lhs = dist.n_value(C * t * x);
            double margin = std::isinf(lhs) ? kInf : lhs - std::pow(t, beta) * nx;
            ++r.points_checked;
            if (margin < r.min_margin) {
                r.min_margin = margin;
                r.worst_t = t;
                r.worst_x = x;
            }
        }
    }
    r.passed = r.min_margin >= -1e-9;
    return r;
}

/// N(C t x) >= t^{1/k} N(x) for all grid t, x >= 1; C = 8^{k+1} always suffices
/// under the moment-growth condition with constant 2^k.
inline GrowthLemmaReport check_growth_lemma(const TailDistribution& dist, int k, double C,
                                            const std::vector<double>& t_grid,
                                            const std::vector<double>& x_grid) {
    if (k < 1) throw InvalidArgument("k must be positive");
    return check_growth_inequality(dist, C, 1.0 / k, t_grid, x_grid);
}

inline double growth_lemma_constant(int k) { return std::pow(8.0, k + 1); }

inline const std::vector<double>& default_lemma_grid() {
    static const std::vector<double> g{1.0, 2.0, 5.0, 10.0, 100.0};
    return g;
}

inline constexpr int kMaxGrowthK = 16;

/// Smallest k in [1, 16] passing the moment-growth audit on {1, 2, ..., p_max}.
inline int estimate_k(const TailDistribution& dist, double p_max = 128.0) {
    if (!(p_max >= 2.0)) throw InvalidArgument("p_max must be >= 2");
    auto grid = doubling_grid(p_max);
    // One pass suffices: passing for k only depends on the maximal ratio.
    auto report = check_moment_growth(dist, 0, grid);
    for (int k = 1; k <= kMaxGrowthK; ++k) {
        if (report.max_ratio <= std::ldexp(1.0, k) * (1.0 + 1e-9)) return k;
    }
    throw NoFiniteK(dist.describe() + ": doubling ratio " + std::to_string(report.max_ratio) +
                    " exceeds 2^16");
}

struct ConverseReport {
    double k_bar = 0.0;  // max over the grid of ||X||_{2p} / ||X||_p
    double worst_p = 0.0;
    GrowthLemmaReport audit;
};

/// If N(C t x) >= t^beta N(x) then the doubling ratio stays bounded; reports
/// the empirical bound on p_grid after auditing the hypothesis.
inline ConverseReport converse_check(const TailDistribution& dist, double C, double beta,
                                     const std::vector<double>& p_grid,
                                     const std::vector<double>& audit_grid = default_lemma_grid()) {
    ConverseReport r;
    r.audit = check_growth_inequality(dist, C, beta, audit_grid, audit_grid);
    if (!r.audit.passed)
        throw PreconditionViolated("growth inequality fails at t=" + std::to_string(r.audit.worst_t) +
                                   ", x=" + std::to_string(r.audit.worst_x));
    auto g = check_moment_growth(dist, 0, p_grid);
    r.k_bar = g.max_ratio;
    r.worst_p = g.worst_p;
    return r;
}

} // namespace chaosmom
