#pragma once

// Exhaustive oracle for the chaos norm on tiny instances. Shares nothing with
// the ascent or the budget DP beyond TailFunction::inverse.

#include "chaosmom/budget.hpp"
#include "chaosmom/error.hpp"
#include "chaosmom/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

namespace chaosmom {

inline constexpr int kBruteMaxSide = 4;
inline constexpr int kBruteMaxOrder = 2;
inline constexpr int kBruteMaxGrid = 50;

namespace detail {

// Calls visit(b) for every allocation b_i = p m_i / (G - 1) with sum m_i = G - 1.
// Spending the whole budget loses nothing: the objective is nondecreasing in v.
inline void for_each_allocation(std::size_t n, int grid, double p, const std::function<void(const std::vector<double>&)>& visit) {
    const int U = grid - 1;
    std::vector<int> m(n, 0);
    std::vector<double> b(n);
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
        if (i + 1 == n) {
            m[i] = left;
            for (std::size_t j = 0; j < n; ++j) b[j] = p * m[j] / U;
            visit(b);
            return;
        }
        for (int x = 0; x <= left; ++x) {
            m[i] = x;
            rec(i + 1, left - x);
        }
    };
    rec(0, U);
}

// Local exhaustive refinement around b: 9 offsets per free coordinate,
// step shrinking fourfold per level. Returns the best value seen.
inline double zoom(std::vector<double> b, double value, double p, int grid,
                   const std::function<double(const std::vector<double>&)>& eval) {
    const std::size_t n = b.size();
    if (n < 2 || p == 0.0) return value;
    double h = p / (grid - 1);
    std::vector<double> trial(n);
    for (int level = 0; level < 8; ++level, h /= 4.0) {
        auto center = b;
        std::vector<int> off(n - 1, -4);
        while (true) {
            double used = 0.0;
            bool ok = true;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                trial[i] = center[i] + off[i] * h;
                if (trial[i] < 0.0) ok = false;
                used += trial[i];
            }
            trial[n - 1] = p - used;
            if (ok && trial[n - 1] >= 0.0) {
                double v = eval(trial);
                if (v > value) {
                    value = v;
                    b = trial;
                }
            }
            std::size_t j = 0;
            while (j < n - 1 && ++off[j] > 4) off[j++] = -4;
            if (j == n - 1) break;
        }
    }
    return value;
}

inline std::optional<double> common_power(const BudgetSet& B) {
    std::optional<double> g;
    for (const auto& f : B.n_functions) {
        auto e = f.power_exponent();
        if (!e || (g && *g != *e)) return std::nullopt;
        g = e;
    }
    return g;
}

// sup{ sum c_j v_j : sum v_j^gamma <= p } in closed form.
inline double power_budget_max(const std::vector<double>& c, double gamma, double p) {
    if (gamma <= 1.0) return std::pow(p, 1.0 / gamma) * *std::max_element(c.begin(), c.end());
    double dual = gamma / (gamma - 1.0), s = 0.0;
    for (double x : c) s += std::pow(x, dual);
    return std::pow(p, 1.0 / gamma) * std::pow(s, 1.0 / dual);
}

// sup over v in B of sum c_j (1 + v_j), by closed form or enumeration plus zoom.
inline double block_max(const std::vector<double>& c, const BudgetSet& B, int grid) {
    double base = 0.0;
    for (double x : c) base += x;
    if (auto g = common_power(B)) return base + power_budget_max(c, *g, B.budget);
    auto eval = [&](const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t j = 0; j < c.size(); ++j) s += c[j] * B.n_functions[j].inverse(b[j]);
        return s;
    };
    double best = -1.0;
    std::vector<double> arg;
    for_each_allocation(c.size(), grid, B.budget, [&](const std::vector<double>& b) {
        double v = eval(b);
        if (v > best) {
            best = v;
            arg = b;
        }
    });
    return base + zoom(arg, best, B.budget, grid, eval);
}

inline double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

} // namespace detail

/// Exhaustive search over per-coordinate budget allocations on a simplex grid
/// of `grid_points` levels, refined by local zooming. Caps: n <= 4, d <= 2,
/// grid <= 50. For d = 2 the inner block is solved in closed form when all its
/// N_i equal one power t^gamma, otherwise enumerated as well.
inline double brute_force_norm(const CoefficientTensor& a, const std::vector<BudgetSet>& B, int grid_points = 50) {
    if (a.side() > kBruteMaxSide || a.order() > kBruteMaxOrder || grid_points > kBruteMaxGrid)
        throw TooLarge("brute force caps: n <= 4, d <= 2, grid <= 50");
    if (grid_points < 2) throw InvalidArgument("grid needs at least two points");
    if (static_cast<int>(B.size()) != a.order()) throw InvalidArgument("need one budget set per tensor index");
    const std::size_t n = static_cast<std::size_t>(a.side());
    for (const auto& set : B)
        if (set.size() != n) throw InvalidArgument("budget set size must equal the tensor side");

    if (a.order() == 1) {
        std::vector<double> c(a.entries().begin(), a.entries().end());
        return detail::block_max(c, B[0], grid_points);
    }

    // Outer block enumerated, inner block maximized; prefer a closed-form inner.
    std::vector<std::vector<double>> m(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m[i][j] = a.entries()[i * n + j];
    const BudgetSet* outer = &B[0];
    const BudgetSet* inner = &B[1];
    if (!detail::common_power(B[1]) && detail::common_power(B[0])) {
        std::swap(outer, inner);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) std::swap(m[i][j], m[j][i]);
    }
    if (!detail::common_power(*inner)) {
        double count = detail::binomial(grid_points - 1 + static_cast<int>(n) - 1, static_cast<int>(n) - 1);
        if (count * count > 5e7) throw TooLarge("neither block has a closed form and the grid product is too large");
    }

    auto eval = [&](const std::vector<double>& b) {
        std::vector<double> c(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double u = 1.0 + outer->n_functions[i].inverse(b[i]);
            for (std::size_t j = 0; j < n; ++j) c[j] += m[i][j] * u;
        }
        return detail::block_max(c, *inner, grid_points);
    };
    double best = -1.0;
    std::vector<double> arg;
    detail::for_each_allocation(n, grid_points, outer->budget, [&](const std::vector<double>& b) {
        double v = eval(b);
        if (v > best) {
            best = v;
            arg = b;
        }
    });
    return detail::zoom(arg, best, outer->budget, grid_points, eval);
}

} // namespace chaosmom
