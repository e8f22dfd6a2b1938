#pragma once

#include "chaosmom/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <vector>

namespace chaosmom::quadrature {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
inline constexpr std::array<double, 8> kXgk{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Piece {
    double a, b;
    int fn;  // 0: integrand on t, 1: mapped tail on u
    double value, error;
    bool operator<(const Piece& o) const { return error < o.error; }
};

template <class F>
std::pair<double, double> gk15(F&& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double fc = f(c);
    double k = fc * kWgk[7], g = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        double x = h * kXgk[j];
        double s = f(c - x) + f(c + x);
        k += kWgk[j] * s;
        if (j % 2 == 1) g += kWg[j / 2] * s;
    }
    return {k * h, std::abs((k - g) * h)};
}

} // namespace detail

struct LogIntegral {
    double log_value;  // log of the integral
    double rel_error;  // estimated relative error
};

/// Integrates exp(log_f(t)) over [lo, hi], hi possibly +inf. Pieces cut at
/// `breaks` are refined adaptively by bisecting the piece with the largest
/// error until the summed Gauss-Kronrod error is below rel_tol of the total.
/// The integrand is shifted by its largest sampled log value so moments of
/// order several hundred stay representable. An unbounded last piece
/// [c, inf) is mapped onto [0, 1) by t = c / (1 - u).
template <class LogF>
LogIntegral log_integrate(LogF&& log_f, double lo, double hi, std::vector<double> breaks,
                          double rel_tol = 1e-8, std::size_t max_pieces = 100000) {
    breaks.push_back(lo);
    if (std::isfinite(hi)) breaks.push_back(hi);
    std::erase_if(breaks, [&](double x) { return !(x >= lo && x <= hi) || !std::isfinite(x); });
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    const bool tail = !std::isfinite(hi);
    const double c = breaks.back();
    if (!tail && breaks.size() < 2) return {-kInf, 0.0};

    double shift = -kInf;
    auto probe = [&](double t) {
        double v = log_f(t);
        if (std::isfinite(v)) shift = std::max(shift, v);
    };
    for (std::size_t i = 0; i < breaks.size(); ++i) {
        probe(breaks[i]);
        if (i + 1 < breaks.size())
            for (int j = 1; j < 4; ++j) probe(breaks[i] + (breaks[i + 1] - breaks[i]) * j / 4.0);
    }
    if (tail)
        for (double m : {1.5, 2.0, 4.0, 16.0}) probe(c > 0 ? c * m : m - 1.0);
    if (!std::isfinite(shift)) return {-kInf, 0.0};

    auto f = [&](double t) {
        double v = log_f(t) - shift;
        return v < -745.0 ? 0.0 : std::exp(v);
    };
    auto g = [&](double u) {
        if (u >= 1.0) return 0.0;
        double d = 1.0 - u;
        double t = c > 0 ? c / d : u / d;
        double jac = c > 0 ? c / (d * d) : 1.0 / (d * d);
        double v = f(t);
        return v == 0.0 ? 0.0 : v * jac;
    };
    auto eval = [&](double a, double b, int fn) {
        auto [v, e] = fn == 0 ? detail::gk15(f, a, b) : detail::gk15(g, a, b);
        return detail::Piece{a, b, fn, v, e};
    };

    std::priority_queue<detail::Piece> heap;
    double total = 0.0, err = 0.0;
    auto push = [&](const detail::Piece& p) {
        total += p.value;
        err += p.error;
        heap.push(p);
    };
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) push(eval(breaks[i], breaks[i + 1], 0));
    if (tail) push(eval(0.0, 1.0, 1));

    // Summation drift is bounded by re-summing whenever the loop exits.
    while (err > rel_tol * std::abs(total) && heap.size() < max_pieces) {
        detail::Piece top = heap.top();
        heap.pop();
        total -= top.value;
        err -= top.error;
        double mid = 0.5 * (top.a + top.b);
        if (!(mid > top.a && mid < top.b)) {
            // Interval exhausted at double precision; accept its estimate.
            top.error = 0.0;
            push(top);
            continue;
        }
        push(eval(top.a, mid, top.fn));
        push(eval(mid, top.b, top.fn));
    }
    total = 0.0;
    err = 0.0;
    for (auto h = heap; !h.empty(); h.pop()) {
        total += h.top().value;
        err += h.top().error;
    }

    if (!(total > 0.0) || !std::isfinite(total)) {
        std::ostringstream os;
        os << "integral evaluated to " << total;
        throw NonConvergent(os.str());
    }
    double rel = err / total;
    if (rel > rel_tol) {
        std::ostringstream os;
        os << "relative error estimate " << rel << " exceeds " << rel_tol;
        throw NonConvergent(os.str());
    }
    return {shift + std::log(total), rel};
}

/// Plain-value convenience wrapper for integrands that cannot overflow.
template <class F>
double integrate(F&& f, double lo, double hi, std::vector<double> breaks = {},
                 double rel_tol = 1e-8) {
    auto r = log_integrate(
        [&](double t) {
            double v = f(t);
            return v > 0 ? std::log(v) : -kInf;
        },
        lo, hi, std::move(breaks), rel_tol);
    return std::exp(r.log_value);
}

} // namespace chaosmom::quadrature
