#pragma once

#include "chaosmom/error.hpp"
#include "chaosmom/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace chaosmom {

inline constexpr int kMaxOrder = 4;
inline constexpr int kMaxSide = 64;

/// Dense order-d array of nonnegative coefficients, row-major.
class CoefficientTensor {
public:
    struct Term {
        std::array<int, kMaxOrder> index{};
        double value = 0.0;
    };

    CoefficientTensor(int order, int side, std::vector<double> entries, bool tetrahedral = false,
                      bool symmetric = false)
        : order_(order), side_(side), entries_(std::move(entries)), tetrahedral_(tetrahedral),
          symmetric_(symmetric) {
        if (order_ < 1 || order_ > kMaxOrder) throw InvalidArgument("tensor order must be in [1, 4]");
        if (side_ < 1 || side_ > kMaxSide) throw InvalidArgument("tensor side must be in [1, 64]");
        std::size_t size = 1;
        for (int r = 0; r < order_; ++r) size *= static_cast<std::size_t>(side_);
        if (entries_.size() != size) throw InvalidArgument("tensor needs n^d entries");
        for (double a : entries_)
            if (!(a >= 0.0) || !std::isfinite(a)) throw InvalidArgument("tensor entries must be finite and >= 0");
        if (tetrahedral_ && !has_zero_diagonal())
            throw NotTetrahedral("an entry with two equal indices is nonzero");
        if (symmetric_ && !is_symmetric()) throw InvalidArgument("tensor flagged symmetric is not");
        for (std::size_t f = 0; f < entries_.size(); ++f) {
            if (entries_[f] == 0.0) continue;
            Term t;
            t.index = unflatten(f);
            t.value = entries_[f];
            terms_.push_back(t);
        }
    }

    /// Order-1 tensor holding a coefficient vector.
    static CoefficientTensor vector(std::vector<double> b) {
        int n = static_cast<int>(b.size());
        return CoefficientTensor(1, n, std::move(b));
    }

    /// Entries uniform on (0, 1] with probability `density`, zero otherwise.
    /// With `tetrahedral`, draws one value per strictly increasing index tuple
    /// and copies it to every permutation, so the result is symmetric with a
    /// zero generalized diagonal.
    static CoefficientTensor random_sparse(int order, int side, double density, std::uint64_t seed,
                                           bool tetrahedral) {
        if (!(density >= 0.0 && density <= 1.0)) throw InvalidArgument("density must be in [0, 1]");
        if (order < 1 || order > kMaxOrder || side < 1 || side > kMaxSide)
            throw InvalidArgument("tensor shape out of range");
        std::size_t size = 1;
        for (int r = 0; r < order; ++r) size *= static_cast<std::size_t>(side);
        std::vector<double> e(size, 0.0);
        Stream rng(seed, {0x7e45ULL});
        CoefficientTensor shape(order, side, std::vector<double>(size, 0.0));
        for (std::size_t f = 0; f < size; ++f) {
            auto idx = shape.unflatten(f);
            if (tetrahedral) {
                bool increasing = true;
                for (int r = 1; r < order; ++r) increasing = increasing && idx[r - 1] < idx[r];
                if (!increasing) continue;
            }
            double u = rng.uniform();
            double v = 1.0 - rng.uniform();
            if (u >= density) continue;
            if (!tetrahedral) {
                e[f] = v;
                continue;
            }
            std::array<int, kMaxOrder> perm = idx;
            std::sort(perm.begin(), perm.begin() + order);
            do {
                e[shape.flatten(perm)] = v;
            } while (std::next_permutation(perm.begin(), perm.begin() + order));
        }
        return CoefficientTensor(order, side, std::move(e), tetrahedral, tetrahedral);
    }

    int order() const { return order_; }
    int side() const { return side_; }
    bool tetrahedral_flag() const { return tetrahedral_; }
    bool symmetric_flag() const { return symmetric_; }
    std::span<const double> entries() const { return entries_; }
    const std::vector<Term>& terms() const { return terms_; }

    double at(std::span<const int> idx) const {
        std::array<int, kMaxOrder> a{};
        std::copy(idx.begin(), idx.end(), a.begin());
        return entries_[flatten(a)];
    }

    std::size_t flatten(const std::array<int, kMaxOrder>& idx) const {
        std::size_t f = 0;
        for (int r = 0; r < order_; ++r) f = f * static_cast<std::size_t>(side_) + static_cast<std::size_t>(idx[r]);
        return f;
    }

    std::array<int, kMaxOrder> unflatten(std::size_t f) const {
        std::array<int, kMaxOrder> idx{};
        for (int r = order_ - 1; r >= 0; --r) {
            idx[r] = static_cast<int>(f % static_cast<std::size_t>(side_));
            f /= static_cast<std::size_t>(side_);
        }
        return idx;
    }

    /// a_I = 0 whenever two indices of I coincide.
    bool has_zero_diagonal() const {
        for (std::size_t f = 0; f < entries_.size(); ++f) {
            if (entries_[f] == 0.0) continue;
            auto idx = unflatten(f);
            for (int l = 0; l < order_; ++l)
                for (int m = l + 1; m < order_; ++m)
                    if (idx[l] == idx[m]) return false;
        }
        return true;
    }

    bool is_symmetric() const {
        for (std::size_t f = 0; f < entries_.size(); ++f) {
            auto idx = unflatten(f);
            std::array<int, kMaxOrder> perm = idx;
            std::sort(perm.begin(), perm.begin() + order_);
            do {
                if (entries_[flatten(perm)] != entries_[f]) return false;
            } while (std::next_permutation(perm.begin(), perm.begin() + order_));
        }
        return true;
    }

    bool is_zero() const { return terms_.empty(); }

    CoefficientTensor scaled(double lambda) const {
        if (!(lambda >= 0.0)) throw InvalidArgument("scale must be >= 0");
        std::vector<double> e(entries_);
        for (auto& a : e) a *= lambda;
        return CoefficientTensor(order_, side_, std::move(e), tetrahedral_, symmetric_);
    }

private:
    int order_;
    int side_;
    std::vector<double> entries_;
    bool tetrahedral_;
    bool symmetric_;
    std::vector<Term> terms_;
};

} // namespace chaosmom
