#pragma once

// Factorization of a moment-growth law X into k i.i.d. log-concave factors:
// H is a convex nondecreasing minorant of M(t) = N(t^k) that vanishes on
// [0, t0], and Y with P(Y >= t) = e^{-H(t)} is the factor law.

#include "chaosmom/distributions.hpp"
#include "chaosmom/growth.hpp"
#include "chaosmom/random.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace chaosmom {

using TailFn = std::function<double(double)>;

/// Piecewise-linear convex nondecreasing H with H = 0 on [0, t0].
class ConvexEnvelope {
public:
    ConvexEnvelope() = default;

    /// `knots` start at (t0, 0); slopes must be nonnegative and nondecreasing.
    ConvexEnvelope(std::vector<TailPoint> knots, double final_slope)
        : knots_(std::move(knots)), final_slope_(final_slope) {
        if (knots_.size() < 2) throw DegenerateInput("envelope needs at least two knots");
        if (!(knots_.front().t > 0.0) || knots_.front().n != 0.0)
            throw InvalidArgument("envelope must start at (t0, 0) with t0 > 0");
        double prev = 0.0;
        for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
            double dt = knots_[i + 1].t - knots_[i].t;
            if (!(dt > 0.0)) throw InvalidArgument("envelope knots must increase in t");
            double s = (knots_[i + 1].n - knots_[i].n) / dt;
            if (s < prev - 1e-12 * std::max(1.0, prev)) throw InvalidArgument("envelope is not convex");
            prev = s;
        }
        if (!(final_slope_ > 0.0) || final_slope_ < prev - 1e-12 * std::max(1.0, prev))
            throw InvalidArgument("envelope final slope must be positive and at least the last slope");
    }

    double t0() const { return knots_.front().t; }
    const std::vector<TailPoint>& knots() const { return knots_; }
    double final_slope() const { return final_slope_; }

    double operator()(double t) const {
        if (t <= t0()) return 0.0;
        const auto& last = knots_.back();
        if (t >= last.t) return last.n + final_slope_ * (t - last.t);
        auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                                   [](double v, const TailPoint& k) { return v < k.t; });
        const auto& b = *it;
        const auto& a = *(it - 1);
        return a.n + (t - a.t) * ((b.n - a.n) / (b.t - a.t));
    }

    /// Factor law P(Y >= t) = e^{-H(t)}, not renormalized.
    TailDistribution as_tail() const {
        std::vector<TailPoint> pts(knots_.begin(), knots_.end());
        pts.insert(pts.begin(), TailPoint{0.0, 0.0});
        auto d = TailDistribution::tabulated(std::move(pts), false);
        return d;
    }

private:
    std::vector<TailPoint> knots_;
    double final_slope_ = 0.0;
};

/// M(t) = N(t^k), evaluated lazily.
inline TailFn build_m(const TailDistribution& dist, int k) {
    if (k < 1) throw InvalidArgument("k must be positive");
    return [dist, k](double t) { return dist.n_value(std::pow(t, k)); };
}

/// Geometric grid of `points` values from t0 up to the level where M reaches
/// -ln(1e-9), i.e. the 1 - 1e-9 quantile of X^{1/k}.
inline std::vector<double> default_envelope_grid(const TailDistribution& dist, int k, double t0 = 1.0,
                                                 std::size_t points = 512) {
    double x_top = dist.n_inverse(-std::log(1e-9));
    // Bounded laws: stop just inside the support so M stays finite.
    if (std::isinf(dist.n_value(x_top))) x_top *= 1.0 - 1e-9;
    double top = std::pow(x_top, 1.0 / k);
    if (!(top > t0)) throw DegenerateInput("t0 is beyond the 1 - 1e-9 quantile of X^{1/k}");
    std::vector<double> grid(points);
    double ratio = std::log(top / t0) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) grid[i] = t0 * std::exp(ratio * static_cast<double>(i));
    grid.back() = top;
    return grid;
}

/// Greatest convex minorant of the points (t0, 0), (t_i, M(t_i)): the lower
/// convex hull, extended beyond the last knot with the last hull slope.
inline ConvexEnvelope convex_minorant(const TailFn& M, double t0, const std::vector<double>& grid) {
    if (!(t0 > 0.0)) throw InvalidArgument("t0 must be positive");
    if (grid.empty() || grid.front() != t0) throw InvalidArgument("grid must start at t0");
    std::vector<TailPoint> pts{{t0, 0.0}};
    bool any_positive = false;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) throw InvalidArgument("grid must be increasing");
        double m = M(grid[i]);
        if (!std::isfinite(m)) throw InvalidArgument("M must be finite on the grid");
        any_positive = any_positive || m > 0.0;
        pts.push_back({grid[i], m});
    }
    if (!any_positive) throw DegenerateInput("M vanishes on the whole grid; t0 is too large");

    // Andrew's monotone chain, lower hull only; points are sorted by t.
    std::vector<TailPoint> hull;
    auto cross = [](const TailPoint& o, const TailPoint& a, const TailPoint& b) {
        return (a.t - o.t) * (b.n - o.n) - (a.n - o.n) * (b.t - o.t);
    };
    for (const auto& p : pts) {
        while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), p) <= 0.0) hull.pop_back();
        hull.push_back(p);
    }
    if (hull.size() < 2) throw DegenerateInput("hull has a single vertex");
    std::size_t m = hull.size();
    double slope = (hull[m - 1].n - hull[m - 2].n) / (hull[m - 1].t - hull[m - 2].t);
    if (!(slope > 0.0)) throw DegenerateInput("envelope has zero final slope");
    return ConvexEnvelope(std::move(hull), slope);
}

struct SandwichReport {
    bool passed = false;        // both inequalities with the requested C
    bool left_holds = false;    // H(t) <= M(t) on the grid
    bool left_exact_at_knots = false;  // H(knot) <= M(knot) with no tolerance
    bool right_holds = false;   // M(t) <= H(C t) + 1e-9 on the grid
    double left_margin = kInf;  // min over grid of M(t) - H(t)
    double right_margin = kInf; // min over grid of H(C t) - M(t)
    double worst_margin = kInf; // min of the two
    double C_prime = kInf;      // smallest power of two making the right side hold
};

/// Checks H(t) <= M(t) <= H(C t) on `grid` and scans C' = 1, 2, 4, ..., 2^64.
inline SandwichReport verify_sandwich(const ConvexEnvelope& H, const TailFn& M, double C,
                                      const std::vector<double>& grid) {
    SandwichReport r;
    std::vector<double> m(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < H.t0()) throw InvalidArgument("grid must lie in [t0, inf)");
        m[i] = M(grid[i]);
        r.left_margin = std::min(r.left_margin, m[i] - H(grid[i]));
        r.right_margin = std::min(r.right_margin, H(C * grid[i]) - m[i]);
    }
    // Interpolating a hull edge through a collinear grid point may round by an ulp.
    double scale = 1.0;
    for (double v : m) scale = std::max(scale, std::abs(v));
    r.left_holds = r.left_margin >= -1e-12 * scale;
    r.left_exact_at_knots = true;
    for (const auto& kn : H.knots()) r.left_exact_at_knots = r.left_exact_at_knots && kn.n <= M(kn.t);
    r.right_holds = r.right_margin >= -1e-9;
    r.passed = r.left_holds && r.right_holds;
    r.worst_margin = std::min(r.left_margin, r.right_margin);
    for (int e = 0; e <= 64; ++e) {
        double c = std::ldexp(1.0, e);
        bool ok = true;
        for (std::size_t i = 0; i < grid.size() && ok; ++i) ok = m[i] <= H(c * grid[i]) + 1e-9;
        if (ok) {
            r.C_prime = c;
            break;
        }
    }
    return r;
}

/// Scale the growth lemma gives for C': 8^{k+1} k^k e.
inline double envelope_constant_bound(int k) {
    return growth_lemma_constant(k) * std::pow(static_cast<double>(k), k) * std::numbers::e;
}

struct FactorLaw {
    ConvexEnvelope envelope;
    int k = 1;
    TailDistribution parent = TailDistribution::exponential();
    TailDistribution y = TailDistribution::exponential();  // e^{-H} law
    double y_mean = 0.0;
    double C_certified = 0.0;  // mean(Y) in [1/C, C]
    SandwichReport sandwich;
    std::vector<double> grid;
};

inline TailDistribution y_distribution(const FactorLaw& f) { return f.y; }

/// Builds the envelope on the default grid, audits the sandwich with the
/// growth-lemma scale, and certifies the factor mean.
inline FactorLaw build_factor_law(const TailDistribution& dist, int k, double t0 = 1.0,
                                  std::size_t grid_points = 512) {
    FactorLaw f;
    f.k = k;
    f.parent = dist;
    f.grid = default_envelope_grid(dist, k, t0, grid_points);
    auto M = build_m(dist, k);
    f.envelope = convex_minorant(M, t0, f.grid);
    f.sandwich = verify_sandwich(f.envelope, M, envelope_constant_bound(k), f.grid);
    f.y = f.envelope.as_tail();
    f.y_mean = mean(f.y);
    double upper = std::numbers::e * f.sandwich.C_prime * (1.0 + t0);
    f.C_certified = std::max(upper, 1.0 / t0);
    return f;
}

/// inf{t >= 0 : f(t) >= 1}, by bisection to 1e-10 relative.
inline double normalization_point(const TailFn& f) {
    constexpr double kRange = 1e12;
    if (f(0.0) >= 1.0) return 0.0;
    double hi = 1.0;
    while (f(hi) < 1.0) {
        if (hi >= kRange) throw Unreachable("function stays below 1 on [0, 1e12]");
        hi = std::min(hi * 2.0, kRange);
    }
    double lo = 0.0;
    while (hi - lo > 1e-10 * hi) {
        double mid = 0.5 * (lo + hi);
        if (f(mid) >= 1.0)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

struct ProductComparison {
    std::vector<double> q_grid;
    std::vector<double> q_x;     // quantiles of X
    std::vector<double> q_y;     // quantiles of Y_1 ... Y_k
    double C1 = 0.0;             // smallest C with C (q_X + t0) >= q_Y
    double C2 = 0.0;             // smallest C with C (q_Y + t0) >= q_X
    std::size_t samples = 0;
};

namespace detail {

inline double empirical_quantile(const std::vector<double>& sorted, double q) {
    double h = q * static_cast<double>(sorted.size() - 1);
    auto i = static_cast<std::size_t>(std::floor(h));
    if (i + 1 >= sorted.size()) return sorted.back();
    return sorted[i] + (h - static_cast<double>(i)) * (sorted[i + 1] - sorted[i]);
}

} // namespace detail

/// Quantile domination between X and a product of k i.i.d. copies of Y.
inline ProductComparison compare_product_quantiles(const TailDistribution& x_law,
                                                   const TailDistribution& y_law, int k, double t0,
                                                   std::size_t samples,
                                                   const std::vector<double>& q_grid,
                                                   std::uint64_t seed) {
    if (samples < 100000) throw InvalidArgument("product comparison needs at least 1e5 samples");
    ProductComparison r;
    r.q_grid = q_grid;
    r.samples = samples;
    Stream sx(seed, {1});
    Stream sy(seed, {2});
    std::vector<double> xs(samples), ys(samples);
    for (auto& x : xs) x = x_law.sample(sx);
    for (auto& y : ys) {
        y = 1.0;
        for (int l = 0; l < k; ++l) y *= y_law.sample(sy);
    }
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    for (double q : q_grid) {
        if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("quantile levels must be in (0, 1)");
        double qx = detail::empirical_quantile(xs, q), qy = detail::empirical_quantile(ys, q);
        r.q_x.push_back(qx);
        r.q_y.push_back(qy);
        r.C1 = std::max(r.C1, qy / (qx + t0));
        r.C2 = std::max(r.C2, qx / (qy + t0));
    }
    return r;
}

inline ProductComparison product_comparison(const TailDistribution& dist, const FactorLaw& f,
                                            std::size_t samples, const std::vector<double>& q_grid,
                                            std::uint64_t seed) {
    return compare_product_quantiles(dist, f.y, f.k, f.envelope.t0(), samples, q_grid, seed);
}

} // namespace chaosmom
