#pragma once

// Nonnegative random variables described by their tail exponent
// N(t) = -ln P(X >= t), normalized to unit mean.

#include "chaosmom/error.hpp"
#include "chaosmom/quadrature.hpp"
#include "chaosmom/random.hpp"

#include <boost/math/special_functions/bessel.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace chaosmom {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Family { exponential, weibull, product_exponential, tabulated };

struct TailPoint {
    double t;
    double n;
};

namespace detail {

// log K_1(z); switches to the large-argument expansion before K_1 underflows.
inline double log_bessel_k1(double z) {
    if (z < 500.0) return std::log(boost::math::cyl_bessel_k(1, z));
    double s = 1.0 + 3.0 / (8.0 * z) - 15.0 / (128.0 * z * z) + 315.0 / (3072.0 * z * z * z);
    return -z + 0.5 * std::log(std::numbers::pi / (2.0 * z)) + std::log(s);
}

// log P(E_1 * ... * E_k >= t) for i.i.d. unit exponentials.
inline double log_survival_product(int k, double t) {
    if (t <= 0.0) return 0.0;
    if (k == 1) return -t;
    if (k == 2) {
        double z = 2.0 * std::sqrt(t);
        return std::log(z) + log_bessel_k1(z);
    }
    // Condition on the last factor: P(prod >= t) = E[ P(prod_{k-1} >= t / E_k) ].
    double centre = std::pow(t, 1.0 / k);
    std::vector<double> breaks;
    for (double m : {0.0625, 0.25, 0.5, 1.0, 2.0, 4.0, 16.0}) breaks.push_back(centre * m);
    auto r = quadrature::log_integrate(
        [&](double x) {
            if (x <= 0.0) return -kInf;
            return -x + log_survival_product(k - 1, t / x);
        },
        0.0, kInf, std::move(breaks), 1e-9);
    return std::min(r.log_value, 0.0);
}

struct Table {
    std::vector<double> t;
    std::vector<double> n;
    double last_slope = 0.0;
    double support = kInf;
};

} // namespace detail

/// A unit-mean nonnegative law given by its tail exponent. Cheap to copy;
/// tabulated tails share their knot storage.
class TailDistribution {
public:
    static TailDistribution exponential() {
        TailDistribution d;
        d.family_ = Family::exponential;
        return d;
    }

    /// P(X >= t) = exp(-(t / scale)^alpha), scale fixed by E X = 1.
    static TailDistribution weibull(double alpha) {
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw InvalidArgument("weibull shape must be positive");
        TailDistribution d;
        d.family_ = Family::weibull;
        d.alpha_ = alpha;
        d.scale_ = std::exp(-std::lgamma(1.0 + 1.0 / alpha));
        return d;
    }

    /// Product of k i.i.d. unit exponentials (already unit mean).
    static TailDistribution product_of_exponentials(int k) {
        if (k < 1 || k > 4) throw InvalidArgument("product_exponential needs 1 <= k <= 4");
        TailDistribution d;
        d.family_ = Family::product_exponential;
        d.factors_ = k;
        return d;
    }

    /// Piecewise-linear N through `points`. t must increase strictly and N be
    /// nondecreasing; a row with N = +inf marks the essential supremum. Beyond
    /// the last finite knot N continues with the last slope. With
    /// `normalize_mean` the t axis is rescaled so that E X = 1.
    static TailDistribution tabulated(std::vector<TailPoint> points, bool normalize_mean = true) {
        detail::Table tab;
        for (const auto& p : points) {
            if (std::isnan(p.t) || std::isnan(p.n) || p.t < 0.0)
                throw InvalidArgument("tabulated tail has an invalid row");
            if (!tab.t.empty() && !(p.t > tab.t.back()))
                throw InvalidArgument("tabulated tail grid must be strictly increasing in t");
            if (std::isinf(p.n)) {
                tab.support = p.t;
                break;
            }
            if (!tab.n.empty() && p.n < tab.n.back())
                throw InvalidArgument("tabulated tail must be nondecreasing in N");
            if (p.n < 0.0) throw InvalidArgument("tabulated tail must be nonnegative");
            tab.t.push_back(p.t);
            tab.n.push_back(p.n);
        }
        if (tab.t.empty() || tab.t.front() > 0.0) {
            tab.t.insert(tab.t.begin(), 0.0);
            tab.n.insert(tab.n.begin(), 0.0);
        }
        if (tab.n.front() != 0.0) throw InvalidArgument("tabulated tail needs N(0) = 0");
        if (tab.t.size() < 2) throw InvalidArgument("tabulated tail needs two finite knots");
        std::size_t m = tab.t.size();
        tab.last_slope = (tab.n[m - 1] - tab.n[m - 2]) / (tab.t[m - 1] - tab.t[m - 2]);
        if (!(tab.last_slope > 0.0) && std::isinf(tab.support))
            throw InvalidArgument("unbounded tabulated tail needs a positive final slope");

        if (normalize_mean) {
            double mean = raw_mean(tab);
            for (auto& t : tab.t) t /= mean;
            tab.support /= mean;
            tab.last_slope *= mean;
        }

        TailDistribution d;
        d.family_ = Family::tabulated;
        d.table_ = std::make_shared<const detail::Table>(std::move(tab));
        return d;
    }

    Family family() const { return family_; }
    double alpha() const { return alpha_; }
    int factors() const { return factors_; }
    double scale() const { return scale_; }
    double support_upper() const { return family_ == Family::tabulated ? table_->support : kInf; }

    /// True when N is convex, i.e. the law has log-concave tails.
    bool log_concave_tails() const {
        switch (family_) {
        case Family::exponential: return true;
        case Family::weibull: return alpha_ >= 1.0;
        case Family::product_exponential: return factors_ == 1;
        case Family::tabulated: {
            const auto& tb = *table_;
            double prev = 0.0;
            for (std::size_t i = 0; i + 1 < tb.t.size(); ++i) {
                double s = (tb.n[i + 1] - tb.n[i]) / (tb.t[i + 1] - tb.t[i]);
                if (s < prev * (1.0 - 1e-12) - 1e-15) return false;
                prev = s;
            }
            return true;
        }
        }
        return false;
    }

    /// Knots of a tabulated tail after normalization (empty otherwise).
    std::vector<TailPoint> knots() const {
        std::vector<TailPoint> out;
        if (family_ != Family::tabulated) return out;
        for (std::size_t i = 0; i < table_->t.size(); ++i) out.push_back({table_->t[i], table_->n[i]});
        return out;
    }

    std::string describe() const {
        std::ostringstream os;
        switch (family_) {
        case Family::exponential: os << "exponential"; break;
        case Family::weibull: os << "weibull(alpha=" << alpha_ << ")"; break;
        case Family::product_exponential: os << "product_exponential(k=" << factors_ << ")"; break;
        case Family::tabulated: os << "tabulated(" << table_->t.size() << " knots)"; break;
        }
        return os.str();
    }

    /// N(t) = -ln P(X >= t); +inf at or beyond the support end.
    double n_value(double t) const {
        if (!(t > 0.0)) return 0.0;
        switch (family_) {
        case Family::exponential: return t;
        case Family::weibull: return std::pow(t / scale_, alpha_);
        case Family::product_exponential: return -detail::log_survival_product(factors_, t);
        case Family::tabulated: return table_n(t);
        }
        return 0.0;
    }

    /// sup{t >= 0 : N(t) <= y}; doubles as the quantile at tail level e^-y.
    double n_inverse(double y) const {
        if (!(y > 0.0)) {
            if (family_ == Family::tabulated && y == 0.0) return table_inverse(0.0);
            return 0.0;
        }
        switch (family_) {
        case Family::exponential: return y;
        case Family::weibull: return scale_ * std::pow(y, 1.0 / alpha_);
        case Family::product_exponential: return bisect_inverse(y);
        case Family::tabulated: return table_inverse(y);
        }
        return 0.0;
    }

    double sample(Stream& rng) const {
        switch (family_) {
        case Family::exponential: return rng.exponential();
        case Family::weibull: return scale_ * std::pow(rng.exponential(), 1.0 / alpha_);
        case Family::product_exponential: {
            double x = 1.0;
            for (int l = 0; l < factors_; ++l) x *= rng.exponential();
            return x;
        }
        case Family::tabulated: return table_inverse(rng.exponential());
        }
        return 0.0;
    }

    /// log E X^p in closed form, when the family has one.
    std::optional<double> closed_form_log_moment(double p) const {
        switch (family_) {
        case Family::exponential: return std::lgamma(1.0 + p);
        case Family::weibull: return p * std::log(scale_) + std::lgamma(1.0 + p / alpha_);
        case Family::product_exponential: return factors_ * std::lgamma(1.0 + p);
        case Family::tabulated: return std::nullopt;
        }
        return std::nullopt;
    }

    /// Points where the moment integrand changes shape (table kinks).
    std::vector<double> breakpoints() const {
        if (family_ == Family::tabulated) return table_->t;
        return {};
    }

private:
    TailDistribution() = default;

    static double raw_mean(const detail::Table& tb) {
        double mean = 0.0;
        auto piece = [](double n0, double slope, double len) {
            if (slope * len < 1e-12) return std::exp(-n0) * len;
            return std::exp(-n0) * (-std::expm1(-slope * len)) / slope;
        };
        for (std::size_t i = 0; i + 1 < tb.t.size(); ++i) {
            double len = tb.t[i + 1] - tb.t[i];
            mean += piece(tb.n[i], (tb.n[i + 1] - tb.n[i]) / len, len);
        }
        double tl = tb.t.back(), nl = tb.n.back();
        if (std::isinf(tb.support))
            mean += std::exp(-nl) / tb.last_slope;
        else if (tb.support > tl)
            mean += piece(nl, tb.last_slope, tb.support - tl);
        return mean;
    }

    double table_n(double t) const {
        const auto& tb = *table_;
        if (t >= tb.support) return kInf;
        if (t >= tb.t.back()) return tb.n.back() + tb.last_slope * (t - tb.t.back());
        auto it = std::upper_bound(tb.t.begin(), tb.t.end(), t);
        std::size_t j = static_cast<std::size_t>(it - tb.t.begin()) - 1;
        double w = (t - tb.t[j]) / (tb.t[j + 1] - tb.t[j]);
        return tb.n[j] + w * (tb.n[j + 1] - tb.n[j]);
    }

    double table_inverse(double y) const {
        const auto& tb = *table_;
        auto it = std::upper_bound(tb.n.begin(), tb.n.end(), y);
        std::size_t j = static_cast<std::size_t>(it - tb.n.begin()) - 1;
        double t;
        if (j + 1 == tb.n.size()) {
            t = tb.last_slope > 0.0 ? tb.t.back() + (y - tb.n.back()) / tb.last_slope : kInf;
        } else {
            double w = (y - tb.n[j]) / (tb.n[j + 1] - tb.n[j]);
            t = tb.t[j] + w * (tb.t[j + 1] - tb.t[j]);
        }
        return std::min(t, tb.support);
    }

    // Bisection in log t on the monotone N, relative tolerance 1e-12.
    double bisect_inverse(double y) const {
        double lo = 1.0, hi = 1.0;
        if (n_value(1.0) <= y) {
            while (n_value(hi) <= y) {
                lo = hi;
                hi *= 4.0;
            }
        } else {
            while (n_value(lo) > y) {
                hi = lo;
                lo /= 4.0;
                if (lo < 1e-300) return 0.0;
            }
        }
        for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
            double mid = std::sqrt(lo * hi);
            if (n_value(mid) <= y)
                lo = mid;
            else
                hi = mid;
        }
        return lo;
    }

    Family family_ = Family::exponential;
    double alpha_ = 1.0;
    int factors_ = 1;
    double scale_ = 1.0;
    std::shared_ptr<const detail::Table> table_;
};

inline double n_value(const TailDistribution& dist, double t) { return dist.n_value(t); }

/// log E X^p by adaptive quadrature of p t^{p-1} e^{-N(t)}, split at the
/// quantile points N^{-1}(1), N^{-1}(p), N^{-1}(4p) around the integrand peak.
inline double log_moment_quadrature(const TailDistribution& dist, double p, double rel_tol = 1e-8) {
    if (!(p >= 1.0)) throw InvalidArgument("moment order must be >= 1");
    std::vector<double> breaks = dist.breakpoints();
    for (double level : {1.0, p, 4.0 * p}) breaks.push_back(dist.n_inverse(level));
    // Extra cuts near the origin isolate t^{alpha} type kinks of N at zero.
    for (double level : {1e-6, 1e-3, 0.1}) breaks.push_back(dist.n_inverse(level));
    const double log_p = std::log(p);
    auto log_f = [&](double t) {
        if (t <= 0.0) return p == 1.0 ? -dist.n_value(0.0) : -kInf;
        double n = dist.n_value(t);
        if (std::isinf(n)) return -kInf;
        return log_p + (p - 1.0) * std::log(t) - n;
    };
    return quadrature::log_integrate(log_f, 0.0, dist.support_upper(), std::move(breaks), rel_tol)
        .log_value;
}

/// ||X||_p by quadrature only; the independent cross-check for closed forms.
inline double moment_norm_quadrature(const TailDistribution& dist, double p) {
    return std::exp(log_moment_quadrature(dist, p) / p);
}

/// ||X||_p = (E X^p)^{1/p}: closed form where the family has one,
/// quadrature otherwise.
inline double moment_norm(const TailDistribution& dist, double p) {
    if (!(p >= 1.0)) throw InvalidArgument("moment order must be >= 1");
    if (auto lm = dist.closed_form_log_moment(p)) return std::exp(*lm / p);
    return moment_norm_quadrature(dist, p);
}

inline double mean(const TailDistribution& dist) { return moment_norm(dist, 1.0); }

inline std::vector<double> sample(const TailDistribution& dist, Stream& rng, std::size_t count) {
    if (count < 1) throw InvalidArgument("sample count must be >= 1");
    std::vector<double> out(count);
    for (auto& x : out) x = dist.sample(rng);
    return out;
}

} // namespace chaosmom
