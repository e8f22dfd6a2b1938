#pragma once

// Budget sets B_p = {v >= 0 : sum_i N_i(v_i) <= p} and the separable
// subproblem sup{ sum_i c_i v_i : v in B_p } every norm computation reduces to.

#include "chaosmom/distributions.hpp"
#include "chaosmom/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

namespace chaosmom {

/// A tail exponent N used as a budget constraint: nondecreasing, N(0) = 0.
class TailFunction {
public:
    using Fn = std::function<double(double)>;

    /// General N; `inverse` must be sup{t : N(t) <= y}. Without one the
    /// inverse is found by bisection (1e-10 relative).
    static TailFunction custom(Fn n, std::optional<Fn> inverse, bool convex) {
        auto impl = std::make_shared<Impl>();
        impl->n = std::move(n);
        impl->inverse = std::move(inverse);
        impl->convex = convex;
        return TailFunction(std::move(impl));
    }

    /// N(t) = t^gamma.
    static TailFunction power(double gamma) {
        if (!(gamma > 0.0)) throw InvalidArgument("power exponent must be positive");
        auto f = custom([gamma](double t) { return t > 0 ? std::pow(t, gamma) : 0.0; },
                        [gamma](double y) { return y > 0 ? std::pow(y, 1.0 / gamma) : 0.0; }, gamma >= 1.0);
        f.impl_->power = gamma;
        return f;
    }

    static TailFunction of(const TailDistribution& dist) {
        return custom([dist](double t) { return dist.n_value(t); },
                      [dist](double y) { return dist.n_inverse(y); }, dist.log_concave_tails());
    }

    /// t -> N(t^k); the constraint of one layer of a k-fold flattened block.
    static TailFunction composed(const TailFunction& base, int k) {
        if (k < 1) throw InvalidArgument("k must be positive");
        if (k == 1) return base;
        auto b = base;
        std::optional<double> gamma;
        if (base.power_exponent()) gamma = *base.power_exponent() * k;
        auto f = custom([b, k](double t) { return b(std::pow(t, k)); },
                        [b, k](double y) { return std::pow(b.inverse(y), 1.0 / k); },
                        gamma ? *gamma >= 1.0 : false);
        f.impl_->power = gamma;
        return f;
    }

    double operator()(double t) const { return impl_->n(t); }

    double inverse(double y) const {
        if (impl_->inverse) return (*impl_->inverse)(y);
        return bisect(y);
    }

    bool convex() const { return impl_->convex; }
    std::optional<double> power_exponent() const { return impl_->power; }
    const void* identity() const { return impl_.get(); }

private:
    struct Impl {
        Fn n;
        std::optional<Fn> inverse;
        bool convex = false;
        std::optional<double> power;
    };
    explicit TailFunction(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

    double bisect(double y) const {
        if (y < 0.0) return 0.0;
        double lo = 0.0, hi = 1.0;
        while ((*this)(hi) <= y) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e300) return kInf;
        }
        while (hi - lo > 1e-10 * hi && hi > 1e-300) {
            double mid = 0.5 * (lo + hi);
            if ((*this)(mid) <= y)
                lo = mid;
            else
                hi = mid;
        }
        return lo;
    }

    std::shared_ptr<Impl> impl_;
};

struct BudgetSet {
    std::vector<TailFunction> n_functions;
    double budget = 1.0;

    std::size_t size() const { return n_functions.size(); }

    static BudgetSet uniform(const TailFunction& f, std::size_t n, double p) {
        return BudgetSet{std::vector<TailFunction>(n, f), p};
    }

    /// sum_i N_i(v_i) - p; nonpositive for feasible v.
    double excess(std::span<const double> v) const {
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) s += n_functions[i](v[i]);
        return s - budget;
    }
};

struct BudgetOptions {
    std::size_t grid = 256;      // DP budget points on [0, p]
    bool self_check = true;      // re-solve with 2G - 1 points; GridTooCoarse past 1%
    bool allow_fast_path = true; // Lagrangian bisection when every N_i is convex
};

struct LinearMaxResult {
    double value = 0.0;
    std::vector<double> v;
    bool fast_path = false;
};

/// Reusable solver for one budget set: caches N_i^{-1} on the budget grids,
/// shared between coordinates with the same N.
class BudgetSolver {
public:
    BudgetSolver(BudgetSet set, BudgetOptions opts = {}) : set_(std::move(set)), opts_(opts) {
        if (!(set_.budget >= 0.0) || !std::isfinite(set_.budget)) throw InvalidArgument("budget must be >= 0");
        if (opts_.grid < 2) throw InvalidArgument("budget grid needs at least two points");
        convex_ = std::all_of(set_.n_functions.begin(), set_.n_functions.end(),
                              [](const TailFunction& f) { return f.convex(); });
        std::map<const void*, std::size_t> ids;
        for (const auto& f : set_.n_functions) {
            auto [it, fresh] = ids.emplace(f.identity(), unique_.size());
            if (fresh) unique_.push_back(f);
            slot_.push_back(it->second);
        }
    }

    const BudgetSet& set() const { return set_; }
    bool uses_fast_path() const { return opts_.allow_fast_path && convex_; }

    LinearMaxResult solve(std::span<const double> c, std::optional<bool> self_check = std::nullopt) const {
        if (c.size() != set_.size()) throw InvalidArgument("coefficient length must match the budget set");
        for (double ci : c)
            if (!(ci >= 0.0)) throw InvalidArgument("coefficients must be >= 0");
        if (uses_fast_path()) return lagrangian(c);
        bool check = self_check.value_or(opts_.self_check);
        auto coarse = dp(c, opts_.grid);
        if (!check) return coarse;
        auto fine = dp(c, 2 * opts_.grid - 1);
        if (fine.value - coarse.value > 0.01 * std::abs(fine.value)) {
            std::ostringstream os;
            os << "value moved from " << coarse.value << " to " << fine.value << " when doubling the grid";
            throw GridTooCoarse(os.str());
        }
        return fine;
    }

private:
    const std::vector<double>& inverse_table(std::size_t u, std::size_t points) const {
        auto key = std::make_pair(u, points);
        auto it = tables_.find(key);
        if (it != tables_.end()) return it->second;
        std::vector<double> tab(points);
        for (std::size_t j = 0; j < points; ++j)
            tab[j] = unique_[u].inverse(set_.budget * static_cast<double>(j) / static_cast<double>(points - 1));
        return tables_.emplace(key, std::move(tab)).first->second;
    }

    // Knapsack over a uniform budget grid. Item i receives x units; ties (to
    // 1e-12 relative) keep the smallest x for later items, so lower
    // coordinates win.
    LinearMaxResult dp(std::span<const double> c, std::size_t points) const {
        const std::size_t n = c.size(), U = points - 1;
        std::vector<double> best(U + 1, 0.0), next(U + 1);
        std::vector<std::vector<std::uint32_t>> choice(n, std::vector<std::uint32_t>(U + 1, 0));
        for (std::size_t i = 0; i < n; ++i) {
            const auto& inv = inverse_table(slot_[i], points);
            for (std::size_t j = 0; j <= U; ++j) {
                double top = best[j] + c[i] * inv[0];
                std::uint32_t arg = 0;
                for (std::size_t x = 1; x <= j; ++x) {
                    double val = best[j - x] + c[i] * inv[x];
                    if (val > top + 1e-12 * std::abs(top)) {
                        top = val;
                        arg = static_cast<std::uint32_t>(x);
                    }
                }
                next[j] = top;
                choice[i][j] = arg;
            }
            std::swap(best, next);
        }
        LinearMaxResult r;
        r.v.assign(n, 0.0);
        std::size_t j = U;
        for (std::size_t i = n; i-- > 0;) {
            std::size_t x = choice[i][j];
            r.v[i] = inverse_table(slot_[i], points)[x];
            j -= x;
        }
        for (std::size_t i = 0; i < n; ++i) r.value += c[i] * r.v[i];
        return r;
    }

    // argmax over b in [0, p] of c N^{-1}(b) - lambda b for concave profit.
    double best_budget(const TailFunction& f, double ci, double lambda) const {
        const double p = set_.budget;
        if (ci == 0.0) return 0.0;
        auto obj = [&](double b) { return ci * f.inverse(b) - lambda * b; };
        constexpr double kPhi = 0.6180339887498949;
        double a = 0.0, b = p;
        double x1 = b - kPhi * (b - a), x2 = a + kPhi * (b - a);
        double f1 = obj(x1), f2 = obj(x2);
        for (int it = 0; it < 90 && b - a > 1e-13 * p; ++it) {
            if (f1 < f2) {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + kPhi * (b - a);
                f2 = obj(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - kPhi * (b - a);
                f1 = obj(x1);
            }
        }
        double mid = 0.5 * (a + b), fm = obj(mid);
        double f0 = obj(0.0), fp = obj(p);
        if (fp >= fm && fp >= f0) return p;
        if (f0 >= fm) return 0.0;
        return mid;
    }

    std::vector<double> allocation(std::span<const double> c, double lambda) const {
        std::vector<double> b(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) b[i] = best_budget(unique_[slot_[i]], c[i], lambda);
        return b;
    }

    static double total(const std::vector<double>& b) {
        double s = 0.0;
        for (double x : b) s += x;
        return s;
    }

    // Concave profits: bisect the multiplier of the budget constraint, then
    // fill the leftover budget in index order between the two bracketing
    // allocations (exact up to the bracket width).
    LinearMaxResult lagrangian(std::span<const double> c) const {
        const double p = set_.budget;
        auto finish = [&](std::vector<double> b) {
            LinearMaxResult r;
            r.fast_path = true;
            r.v.resize(b.size());
            for (std::size_t i = 0; i < b.size(); ++i) {
                r.v[i] = unique_[slot_[i]].inverse(b[i]);
                r.value += c[i] * r.v[i];
            }
            return r;
        };
        auto b_lo = allocation(c, 0.0);
        if (total(b_lo) <= p * (1.0 + 1e-15)) return finish(b_lo);
        double lo = 0.0, hi = 1.0;
        auto b_hi = allocation(c, hi);
        while (total(b_hi) > p) {
            lo = hi;
            b_lo = std::move(b_hi);
            hi *= 2.0;
            b_hi = allocation(c, hi);
            if (hi > 1e300) throw NonConvergent("multiplier search diverged");
        }
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            double mid = 0.5 * (lo + hi);
            auto b = allocation(c, mid);
            if (total(b) > p) {
                lo = mid;
                b_lo = std::move(b);
            } else {
                hi = mid;
                b_hi = std::move(b);
            }
        }
        double left = p - total(b_hi);
        std::vector<double> b = b_hi;
        for (std::size_t i = 0; i < b.size() && left > 0.0; ++i) {
            double add = std::min(left, std::max(0.0, b_lo[i] - b_hi[i]));
            b[i] += add;
            left -= add;
        }
        return finish(std::move(b));
    }

    BudgetSet set_;
    BudgetOptions opts_;
    bool convex_ = false;
    std::vector<TailFunction> unique_;
    std::vector<std::size_t> slot_;
    mutable std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> tables_;
};

/// sup{ sum_i c_i v_i : v >= 0, sum_i N_i(v_i) <= p } and a maximizer.
inline LinearMaxResult linear_max_over_budget(std::span<const double> c, const BudgetSet& B,
                                              const BudgetOptions& opts = {}) {
    return BudgetSolver(B, opts).solve(c);
}

} // namespace chaosmom
