#pragma once

// Chaos sampling and the Monte Carlo reports comparing simulated moments and
// tails with the deterministic norm.

#include "chaosmom/chaos_norm.hpp"
#include "chaosmom/distributions.hpp"
#include "chaosmom/envelope.hpp"
#include "chaosmom/estimate.hpp"
#include "chaosmom/random.hpp"
#include "chaosmom/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <thread>
#include <vector>

namespace chaosmom {

enum class ChaosMode { decoupled, undecoupled };

inline constexpr std::size_t kChunkSize = 65536;

/// S = sum_I a_I X_{i_1} ... X_{i_d} (undecoupled, one law) or its decoupled
/// version with an independent family X^(r) per index slot (one law per slot).
class ChaosInstance {
public:
    ChaosInstance(CoefficientTensor tensor, ChaosMode mode, std::vector<TailDistribution> laws)
        : tensor_(std::move(tensor)), mode_(mode), laws_(std::move(laws)) {
        if (mode_ == ChaosMode::undecoupled) {
            if (laws_.size() != 1) throw InvalidArgument("undecoupled chaos takes exactly one law");
            if (!tensor_.has_zero_diagonal()) throw NotTetrahedral("undecoupled chaos needs a_I = 0 on repeated indices");
            if (!tensor_.is_symmetric()) throw PreconditionViolated("undecoupled chaos needs a symmetric tensor");
        } else {
            if (laws_.size() == 1) laws_.resize(static_cast<std::size_t>(tensor_.order()), laws_.front());
            if (static_cast<int>(laws_.size()) != tensor_.order())
                throw InvalidArgument("decoupled chaos takes one law per index slot");
        }
    }

    const CoefficientTensor& tensor() const { return tensor_; }
    ChaosMode mode() const { return mode_; }
    const std::vector<TailDistribution>& laws() const { return laws_; }

    /// Law of slot r.
    const TailDistribution& law(int r) const { return laws_[mode_ == ChaosMode::undecoupled ? 0 : static_cast<std::size_t>(r)]; }

    /// The budget sets of the norm at level p: one per slot, or d copies of
    /// the shared one.
    std::vector<BudgetSet> budget_sets(double p) const {
        std::vector<BudgetSet> B;
        const auto n = static_cast<std::size_t>(tensor_.order());
        std::vector<TailFunction> fs;
        for (std::size_t r = 0; r < n; ++r) fs.push_back(TailFunction::of(law(static_cast<int>(r))));
        for (std::size_t r = 0; r < n; ++r) B.push_back(BudgetSet::uniform(fs[r], static_cast<std::size_t>(tensor_.side()), p));
        return B;
    }

private:
    CoefficientTensor tensor_;
    ChaosMode mode_;
    std::vector<TailDistribution> laws_;
};

/// One product factor: the variable family drawn from `stream_tag`, indexed
/// by tensor slot `axis`. Factors with equal tags share the same draws.
struct SampleFactor {
    int axis = 0;
    std::uint64_t stream_tag = 0;
    TailDistribution law = TailDistribution::exponential();
};

/// Samples sum_I a_I prod_f X^{tag(f)}_{i_axis(f)}. Chunk c of 65536
/// replicates draws family `tag` from Stream(seed, {c, tag}), so the output is
/// independent of the worker count.
inline std::vector<double> sample_multilinear(const CoefficientTensor& a, const std::vector<SampleFactor>& factors,
                                              std::uint64_t seed, std::size_t count, int threads = 1) {
    if (count < 1) throw InvalidArgument("batch must be >= 1");
    std::vector<std::uint64_t> tags;
    std::vector<std::size_t> family(factors.size());
    std::vector<const TailDistribution*> family_law;
    for (std::size_t f = 0; f < factors.size(); ++f) {
        auto it = std::find(tags.begin(), tags.end(), factors[f].stream_tag);
        if (it == tags.end()) {
            tags.push_back(factors[f].stream_tag);
            family_law.push_back(&factors[f].law);
            it = tags.end() - 1;
        }
        family[f] = static_cast<std::size_t>(it - tags.begin());
    }
    const auto n = static_cast<std::size_t>(a.side());
    const auto& terms = a.terms();
    std::vector<double> out(count, 0.0);
    const std::size_t chunks = (count + kChunkSize - 1) / kChunkSize;

    auto do_chunk = [&](std::size_t c) {
        std::vector<Stream> streams;
        for (auto tag : tags) streams.emplace_back(seed, std::initializer_list<std::uint64_t>{c, tag});
        std::vector<std::vector<double>> x(tags.size(), std::vector<double>(n));
        std::size_t end = std::min(count, (c + 1) * kChunkSize);
        for (std::size_t s = c * kChunkSize; s < end; ++s) {
            for (std::size_t g = 0; g < tags.size(); ++g)
                for (std::size_t i = 0; i < n; ++i) x[g][i] = family_law[g]->sample(streams[g]);
            double total = 0.0;
            for (const auto& term : terms) {
                double prod = term.value;
                for (std::size_t f = 0; f < factors.size(); ++f) prod *= x[family[f]][term.index[factors[f].axis]];
                total += prod;
            }
            out[s] = total;
        }
    };

    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || chunks == 1) {
        for (std::size_t c = 0; c < chunks; ++c) do_chunk(c);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < std::min(workers, chunks); ++w)
            pool.emplace_back([&, w] {
                for (std::size_t c = w; c < chunks; c += workers) do_chunk(c);
            });
        for (auto& t : pool) t.join();
    }
    return out;
}

/// Decoupled: slot r draws from its own family (tag r). Undecoupled: every
/// slot reads the tag-0 family. For d = 1 both modes give identical draws.
inline std::vector<double> sample_chaos(const ChaosInstance& inst, std::uint64_t seed, std::size_t count,
                                        int threads = 1) {
    std::vector<SampleFactor> factors;
    for (int r = 0; r < inst.tensor().order(); ++r) {
        std::uint64_t tag = inst.mode() == ChaosMode::decoupled ? static_cast<std::uint64_t>(r) : 0;
        factors.push_back({r, tag, inst.law(r)});
    }
    return sample_multilinear(inst.tensor(), factors, seed, count, threads);
}

/// Norm at level p for the instance's mode.
inline NormResult instance_norm(const ChaosInstance& inst, double p, const AscentOptions& opts = {}) {
    auto B = inst.budget_sets(p);
    if (inst.mode() == ChaosMode::undecoupled) return chaos_norm_undecoupled(inst.tensor(), B[0], opts);
    return chaos_norm_decoupled(inst.tensor(), B, opts);
}

struct SimulationOptions {
    std::size_t samples = 1000000;
    std::uint64_t seed = 0;
    int threads = 1;
    double p_ceiling = kHeavyTailP;  // rows above are not asserted for d >= 2
    AscentOptions ascent{};
};

// ---------------------------------------------------------------- sandwich

struct SandwichRow {
    double p = 1.0;
    MCEstimate moment;
    double norm = 0.0;
    double ratio = 0.0, ratio_low = 0.0, ratio_high = 0.0;
    bool asserted = false;
    bool degenerate = false;
};

struct SandwichTable {
    std::vector<SandwichRow> rows;
    double band = 16.0;
    double spread = 0.0;       // max r_p / min r_p over asserted rows
    double spread_ci = 0.0;    // max ratio_high / min ratio_low, for reference
    bool passed = false;
};

/// r_p = ||S||_p (simulated) / norm_p on one sample set. Passes when the
/// asserted ratios stay within a factor `band` of each other. Zero chaoses
/// give 0/0 rows flagged degenerate and not asserted.
inline SandwichTable sandwich_report(const ChaosInstance& inst, const std::vector<double>& p_grid,
                                     const SimulationOptions& opts, double band = 16.0) {
    if (p_grid.empty()) throw InvalidArgument("p grid must be nonempty");
    auto s = sample_chaos(inst, opts.seed, opts.samples, opts.threads);
    SandwichTable t;
    t.band = band;
    double lo = kInf, hi = 0.0, lo_ci = kInf, hi_ci = 0.0;
    for (double p : p_grid) {
        SandwichRow row;
        row.p = p;
        row.moment = empirical_moment(s, p, opts.seed);
        row.norm = instance_norm(inst, p, opts.ascent).value;
        if (row.norm == 0.0 || row.moment.value == 0.0) {
            row.degenerate = true;
        } else {
            row.ratio = row.moment.value / row.norm;
            row.ratio_low = row.moment.ci_low / row.norm;
            row.ratio_high = row.moment.ci_high / row.norm;
            row.asserted = inst.tensor().order() == 1 || p <= opts.p_ceiling;
        }
        if (row.asserted) {
            lo = std::min(lo, row.ratio);
            hi = std::max(hi, row.ratio);
            lo_ci = std::min(lo_ci, row.ratio_low);
            hi_ci = std::max(hi_ci, row.ratio_high);
        }
        t.rows.push_back(row);
    }
    bool any = hi > 0.0;
    t.spread = any ? hi / lo : 0.0;
    t.spread_ci = any && lo_ci > 0.0 ? hi_ci / lo_ci : 0.0;
    t.passed = !any || t.spread <= band;
    return t;
}

// ---------------------------------------------------------------- tails

struct TailRow {
    double t = 0.0;
    double norm = 0.0;
    double bound = 1.0;        // e^{-t}
    double upper_threshold = 0.0;
    MCEstimate upper;          // P(S >= C_hat norm_t)
    bool upper_pass = true;
    double lower_threshold = 0.0;
    double lower_target = 0.0; // min(floor, e^{-t})
    MCEstimate lower;          // P(S >= c_hat norm_t)
    bool lower_pass = true;
    bool asserted = false;
};

struct TailTable {
    std::vector<TailRow> rows;
    double C_hat = 0.0;
    double c_hat = 0.0;
    std::uint64_t calibration_seed = 0;
    std::uint64_t evaluation_seed = 0;
    bool passed = false;
};

struct TailOptions {
    double margin = 1.0;        // C_hat multiplier over the calibrated value
    double lower_floor = 0.1;   // lower rows assert P >= min(floor, e^{-t})
    std::optional<double> C_hat;  // skip calibration when given
    std::optional<double> c_hat;
};

/// Upper tail rows P(S >= C_hat norm_t) <= e^{-t}, judged at the upper 95%
/// Wilson edge, and lower rows P(S >= c_hat norm_t) >= min(floor, e^{-t}),
/// judged at the lower edge. Unless given, C_hat and c_hat are calibrated on
/// a separate seed: C_hat puts the calibration tail at e^{-t}/2 for the
/// worst t, c_hat puts it at twice the lower target. The t = 0 row is
/// reported, not asserted.
inline TailTable tail_report(const ChaosInstance& inst, const std::vector<double>& t_grid, const SimulationOptions& opts,
                             std::uint64_t calibration_seed, const TailOptions& topts = {}) {
    if (t_grid.empty()) throw InvalidArgument("t grid must be nonempty");
    for (double t : t_grid) {
        if (!(t >= 0.0)) throw InvalidArgument("t must be >= 0");
        if (std::exp(-t) < 30.0 / static_cast<double>(opts.samples)) {
            std::ostringstream os;
            os << "t = " << t << " needs e^{-t} >= 30/samples; samples = " << opts.samples;
            throw ResolutionExceeded(os.str());
        }
    }
    if (calibration_seed == opts.seed) throw InvalidArgument("calibration and evaluation seeds must differ");
    TailTable tab;
    tab.calibration_seed = calibration_seed;
    tab.evaluation_seed = opts.seed;
    std::vector<double> norms;
    for (double t : t_grid) norms.push_back(instance_norm(inst, t, opts.ascent).value);

    auto target = [&](double t) { return std::min(topts.lower_floor, std::exp(-t)); };
    if (!topts.C_hat || !topts.c_hat) {
        auto cal = sample_chaos(inst, calibration_seed, opts.samples, opts.threads);
        std::sort(cal.begin(), cal.end());
        double up = 0.0, low = kInf;
        for (std::size_t j = 0; j < t_grid.size(); ++j) {
            if (t_grid[j] == 0.0 || norms[j] == 0.0) continue;
            up = std::max(up, detail::percentile_sorted(cal, 1.0 - 0.5 * std::exp(-t_grid[j])) / norms[j]);
            low = std::min(low, detail::percentile_sorted(cal, std::max(0.0, 1.0 - 2.0 * target(t_grid[j]))) / norms[j]);
        }
        tab.C_hat = topts.C_hat.value_or(topts.margin * up);
        tab.c_hat = topts.c_hat.value_or(std::isfinite(low) ? low : 0.0);
    } else {
        tab.C_hat = *topts.C_hat;
        tab.c_hat = *topts.c_hat;
    }

    auto s = sample_chaos(inst, opts.seed, opts.samples, opts.threads);
    tab.passed = true;
    for (std::size_t j = 0; j < t_grid.size(); ++j) {
        TailRow row;
        row.t = t_grid[j];
        row.norm = norms[j];
        row.bound = std::exp(-row.t);
        row.upper_threshold = tab.C_hat * row.norm;
        row.upper = empirical_tail(s, row.upper_threshold);
        row.lower_threshold = tab.c_hat * row.norm;
        row.lower_target = target(row.t);
        row.lower = empirical_tail(s, row.lower_threshold);
        row.asserted = row.t > 0.0 && row.norm > 0.0;
        row.upper_pass = row.upper.ci_high <= row.bound;
        row.lower_pass = row.lower.ci_low >= row.lower_target;
        if (row.asserted) tab.passed = tab.passed && row.upper_pass && row.lower_pass;
        tab.rows.push_back(row);
    }
    return tab;
}

// ---------------------------------------------------------------- decoupling

struct RatioRow {
    double p = 1.0;
    MCEstimate ratio;
    bool asserted = false;
    bool pass = true;
    bool degenerate = false;
};

struct DecouplingTable {
    std::vector<RatioRow> rows;
    double band_low = 0.125, band_high = 8.0;
    bool identical = false;  // d = 1: S and S' coincide sample by sample
    bool passed = false;
};

/// ||S||_p / ||S'||_p for the undecoupled chaos S and its decoupled version
/// S' (common random numbers on slot 0). Each asserted row must have its
/// whole 95% interval inside [band_low, band_high].
inline DecouplingTable decoupling_report(const CoefficientTensor& a, const TailDistribution& law,
                                         const std::vector<double>& p_grid, const SimulationOptions& opts,
                                         double band_low = 0.125, double band_high = 8.0) {
    if (p_grid.empty()) throw InvalidArgument("p grid must be nonempty");
    ChaosInstance und(a, ChaosMode::undecoupled, {law});
    ChaosInstance dec(a, ChaosMode::decoupled, {law});
    auto s = sample_chaos(und, opts.seed, opts.samples, opts.threads);
    auto s2 = sample_chaos(dec, opts.seed, opts.samples, opts.threads);
    DecouplingTable tab;
    tab.band_low = band_low;
    tab.band_high = band_high;
    tab.identical = s == s2;
    tab.passed = a.order() != 1 || tab.identical;
    for (double p : p_grid) {
        RatioRow row;
        row.p = p;
        row.ratio = moment_ratio(s, s2, p, opts.seed);
        row.degenerate = row.ratio.value == 0.0;
        row.asserted = !row.degenerate && (a.order() == 1 || p <= opts.p_ceiling);
        if (a.order() == 1) row.pass = row.ratio.value == 1.0;
        else row.pass = row.ratio.ci_low >= band_low && row.ratio.ci_high <= band_high;
        if (row.asserted) tab.passed = tab.passed && row.pass;
        tab.rows.push_back(row);
    }
    return tab;
}

// ---------------------------------------------------------------- factorization

struct FactorizationTable {
    std::vector<RatioRow> rows;
    int k = 1;
    double band = 16.0;
    double spread = 0.0;  // max / min ratio over asserted rows
    bool passed = false;
};

/// ||sum a_I prod_r X^(r)||_p against ||sum a_I prod_r prod_{l<k} Y^(r,l)||_p.
/// Layer l = 0 of slot r reuses the X^(r) stream (common random numbers), so
/// with Y = X and k = 1 the two chaoses coincide. Passes when the ratios stay
/// within a factor `band` of each other across p.
inline FactorizationTable factorization_report(const CoefficientTensor& a, const std::vector<TailDistribution>& x_laws,
                                               const std::vector<TailDistribution>& y_laws, int k,
                                               const std::vector<double>& p_grid, const SimulationOptions& opts,
                                               double band = 16.0) {
    const int d = a.order();
    if (static_cast<int>(x_laws.size()) != d || static_cast<int>(y_laws.size()) != d)
        throw InvalidArgument("need one X law and one Y law per index slot");
    if (k < 1) throw InvalidArgument("k must be positive");
    if (p_grid.empty()) throw InvalidArgument("p grid must be nonempty");
    std::vector<SampleFactor> xf, yf;
    for (int r = 0; r < d; ++r) {
        xf.push_back({r, static_cast<std::uint64_t>(r), x_laws[static_cast<std::size_t>(r)]});
        for (int l = 0; l < k; ++l)
            yf.push_back({r, static_cast<std::uint64_t>(r + d * l), y_laws[static_cast<std::size_t>(r)]});
    }
    auto sx = sample_multilinear(a, xf, opts.seed, opts.samples, opts.threads);
    auto sy = sample_multilinear(a, yf, opts.seed, opts.samples, opts.threads);
    FactorizationTable tab;
    tab.k = k;
    tab.band = band;
    double lo = kInf, hi = 0.0;
    for (double p : p_grid) {
        RatioRow row;
        row.p = p;
        row.ratio = moment_ratio(sx, sy, p, opts.seed);
        row.degenerate = row.ratio.value == 0.0;
        row.asserted = !row.degenerate && (d == 1 || p <= opts.p_ceiling);
        if (row.asserted) {
            lo = std::min(lo, row.ratio.value);
            hi = std::max(hi, row.ratio.value);
        }
        tab.rows.push_back(row);
    }
    tab.spread = hi > 0.0 ? hi / lo : 0.0;
    tab.passed = hi == 0.0 || tab.spread <= band;
    for (auto& row : tab.rows) row.pass = !row.asserted || tab.passed;
    return tab;
}

/// Builds the factor laws Y^(r) from the envelopes of the X^(r) laws.
inline FactorizationTable factorization_report(const CoefficientTensor& a, const std::vector<TailDistribution>& x_laws,
                                               int k, const std::vector<double>& p_grid, const SimulationOptions& opts,
                                               double band = 16.0) {
    std::vector<TailDistribution> ys;
    for (const auto& x : x_laws) ys.push_back(build_factor_law(x, k).y);
    return factorization_report(a, x_laws, ys, k, p_grid, opts, band);
}

} // namespace chaosmom
