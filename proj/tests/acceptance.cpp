// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned here.
// Exit status is nonzero if any criterion fails.

#include "chaosmom/brute_force.hpp"
#include "chaosmom/chaos_norm.hpp"
#include "chaosmom/envelope.hpp"
#include "chaosmom/experiment.hpp"
#include "chaosmom/growth.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace chaosmom;
namespace fs = std::filesystem;

namespace {

constexpr double kOracleLow = 0.95;
constexpr double kOracleHigh = 1.0001;
constexpr int kOracleInstances = 60;
constexpr int kOracleGrid = 50;
constexpr double kOracleSeconds = 120.0;
constexpr double kClosedFormTol = 1e-9;
constexpr double kQuadratureTol = 1e-6;
constexpr double kFlattenLower = 1.0 - 1e-6;
constexpr int kFlattenTrials = 60;
constexpr double kFlattenStability = 0.10;
constexpr double kSandwichBand = 16.0;
constexpr double kDecouplingLow = 1.0 / 8.0;
constexpr double kDecouplingHigh = 8.0;

const fs::path kConfigs = fs::path(CHAOSMOM_SOURCE_DIR) / "configs";
const std::vector<std::string> kSuite{"exp_d1",     "weibull_d1", "exp_d2_tetra", "weibull_d2_undecoupled",
                                      "product_d2", "uniform_d2"};

struct Outcome {
    bool passed = false;
    std::string detail;
};

std::string num(double x) {
    std::ostringstream os;
    os.precision(7);
    os << x;
    return os.str();
}

// A CSV report as header name -> column of raw cells.
using Columns = std::map<std::string, std::vector<std::string>>;

Columns read_csv(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("missing report " + file.string());
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        return cells;
    };
    std::string line;
    std::getline(in, line);
    auto header = split(line);
    Columns cols;
    for (const auto& h : header) cols[h];
    while (std::getline(in, line)) {
        auto cells = split(line);
        for (std::size_t i = 0; i < header.size(); ++i) cols[header[i]].push_back(cells.at(i));
    }
    return cols;
}

double as_double(const std::string& s) { return std::stod(s); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const fs::path& scratch() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "chaosmom_acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

RunOutcome run_config(const std::string& name, const std::string& command, const std::string& tag,
                      std::optional<std::uint64_t> seed = {}) {
    auto cfg = load_config(kConfigs / (name + ".json"));
    if (seed) cfg.seed = *seed;
    cfg.output_dir = (scratch() / tag / name).string();
    std::ostringstream log;
    return Experiment(cfg, log).run(command);
}

// Every bundled config is simulated once; criteria 8 to 10 read its reports.
const fs::path& simulated(const std::string& name) {
    static std::map<std::string, fs::path> done;
    auto it = done.find(name);
    if (it != done.end()) return it->second;
    run_config(name, "simulate", "simulate");
    return done[name] = scratch() / "simulate" / name;
}

// ------------------------------------------------------------------ criteria

Outcome oracle_equivalence() {
    const double gammas[] = {1.0, 0.5, 2.0};
    const double budgets[] = {1.0, 2.0, 4.0};
    auto start = std::chrono::steady_clock::now();
    double lo = kInf, hi = 0.0;
    int bad = 0;
    for (int t = 0; t < kOracleInstances; ++t) {
        int d = 1 + t % 2, n = 2 + (t / 2) % 3;
        double g = gammas[(t / 6) % 3], p = budgets[(t / 18) % 3];
        auto a = CoefficientTensor::random_sparse(d, n, 1.0, derive_seed(1001, static_cast<std::uint64_t>(t)), false);
        std::vector<BudgetSet> B(static_cast<std::size_t>(d),
                                 BudgetSet::uniform(TailFunction::power(g), static_cast<std::size_t>(n), p));
        double oracle = brute_force_norm(a, B, kOracleGrid);
        double value = chaos_norm_decoupled(a, B).value;
        double r = value / oracle;
        lo = std::min(lo, r);
        hi = std::max(hi, r);
        if (!(r >= kOracleLow && r <= kOracleHigh)) ++bad;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {bad == 0 && secs < kOracleSeconds,
            std::to_string(kOracleInstances) + " instances, ratio in [" + num(lo) + ", " + num(hi) + "], " +
                num(secs) + " s"};
}

Outcome d1_closed_form() {
    auto exp = TailDistribution::exponential();
    auto B = [&](double p) { return std::vector<BudgetSet>{BudgetSet::uniform(TailFunction::of(exp), 1, p)}; };
    auto e1 = CoefficientTensor::vector({1.0});
    double worst_norm = 0.0, worst_quad = 0.0, rmin = kInf, rmax = 0.0;
    for (int p = 1; p <= 50; ++p) {
        double norm = chaos_norm_decoupled(e1, B(p)).value;
        worst_norm = std::max(worst_norm, std::abs(norm - (1.0 + p)));
        double quad = moment_norm_quadrature(exp, p);
        double exact = std::exp(std::lgamma(p + 1.0) / p);
        worst_quad = std::max(worst_quad, std::abs(quad / exact - 1.0));
        rmin = std::min(rmin, quad / (1.0 + p));
        rmax = std::max(rmax, quad / (1.0 + p));
    }
    bool ok = worst_norm <= kClosedFormTol && worst_quad <= kQuadratureTol && rmin >= 1.0 / (2.0 * std::numbers::e) &&
              rmax <= 1.0;
    return {ok, "|norm - (1+p)| <= " + num(worst_norm) + ", quadrature rel err <= " + num(worst_quad) +
                    ", ratio in [" + num(rmin) + ", " + num(rmax) + "]"};
}

Outcome growth_audit() {
    auto grid = doubling_grid(128);
    auto e = check_moment_growth(TailDistribution::exponential(), 1, grid);
    auto w = check_moment_growth(TailDistribution::weibull(0.5), 2, grid);
    bool ok = e.passed && e.max_ratio < 2.0 && w.passed;
    return {ok, "exponential k=1 max ratio " + num(e.max_ratio) + ", weibull(1/2) k=2 max ratio " + num(w.max_ratio) +
                    " (limit 4), p up to 128"};
}

Outcome growth_lemma() {
    std::string detail;
    bool ok = true;
    for (int k = 1; k <= 3; ++k) {
        auto r = check_growth_lemma(TailDistribution::weibull(1.0 / k), k, growth_lemma_constant(k), default_lemma_grid(),
                                    default_lemma_grid());
        ok = ok && r.points_checked > 0 && r.min_margin >= 0.0;
        detail += (k > 1 ? ", " : "") + std::string("k=") + std::to_string(k) + " margin " + num(r.min_margin);
    }
    return {ok, detail};
}

std::vector<std::pair<std::string, TailDistribution>> envelope_families() {
    std::vector<TailPoint> pts;
    for (int i = 0; i < 2000; ++i) pts.push_back({2.0 * i / 2000.0, -std::log1p(-i / 2000.0)});
    pts.push_back({2.0, kInf});
    return {{"exponential", TailDistribution::exponential()},
            {"weibull(1/2)", TailDistribution::weibull(0.5)},
            {"weibull(1/3)", TailDistribution::weibull(1.0 / 3.0)},
            {"weibull(2)", TailDistribution::weibull(2.0)},
            {"product(2)", TailDistribution::product_of_exponentials(2)},
            {"product(3)", TailDistribution::product_of_exponentials(3)},
            {"tabulated uniform", TailDistribution::tabulated(pts)}};
}

std::vector<FactorLaw>& factor_laws() {
    static std::vector<FactorLaw> laws = [] {
        std::vector<FactorLaw> out;
        for (const auto& [name, dist] : envelope_families())
            for (int k = 1; k <= 3; ++k) out.push_back(build_factor_law(dist, k));
        return out;
    }();
    return laws;
}

Outcome envelope_sandwich() {
    int bad = 0;
    double worst_c = 0.0;
    for (const auto& f : factor_laws()) {
        bool ok = f.sandwich.right_margin >= 0.0 && std::isfinite(f.sandwich.C_prime) && f.sandwich.left_exact_at_knots &&
                  f.sandwich.passed && f.grid.size() == 512;
        if (!ok) ++bad;
        worst_c = std::max(worst_c, f.sandwich.C_prime);
    }
    return {bad == 0, std::to_string(factor_laws().size()) + " laws (7 families x k in 1..3), largest C' " +
                          num(worst_c) + ", failures " + std::to_string(bad)};
}

Outcome factor_means() {
    int bad = 0;
    double lo = kInf, hi = 0.0;
    for (const auto& f : factor_laws()) {
        double m = mean(f.y);
        double t0 = f.envelope.t0();
        double upper = std::numbers::e * f.sandwich.C_prime * (1.0 + t0);
        if (!(m >= t0 && m <= upper)) ++bad;
        lo = std::min(lo, m / t0);
        hi = std::max(hi, m / upper);
    }
    return {bad == 0, "min mean/t0 " + num(lo) + ", max mean/(e C' (1+t0)) " + num(hi)};
}

Outcome flattening() {
    auto a = flatten_equiv_check(2, kFlattenTrials, 7001);
    auto b = flatten_equiv_check(2, kFlattenTrials, 9002);
    double drift = std::abs(a.max_ratio - b.max_ratio) / std::min(a.max_ratio, b.max_ratio);
    bool ok = a.passed && b.passed && std::min(a.min_ratio, b.min_ratio) >= kFlattenLower && drift <= kFlattenStability;
    return {ok, "min ratio " + num(std::min(a.min_ratio, b.min_ratio)) + ", max ratio " + num(a.max_ratio) + " vs " +
                    num(b.max_ratio) + " (drift " + num(100 * drift) + "%)"};
}

Outcome sandwich_suite() {
    std::string detail;
    bool ok = true;
    for (const auto& name : kSuite) {
        auto cols = read_csv(simulated(name) / "sandwich.csv");
        double lo = kInf, hi = 0.0;
        for (std::size_t i = 0; i < cols["p"].size(); ++i) {
            double p = as_double(cols["p"][i]);
            if (p != 1 && p != 2 && p != 4 && p != 8) continue;
            double r = as_double(cols["ratio"][i]);
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        double spread = hi / lo;
        ok = ok && lo > 0.0 && spread <= kSandwichBand;
        detail += (detail.empty() ? "" : ", ") + name + " " + num(spread);
    }
    return {ok, "max/min r_p: " + detail};
}

Outcome tail_suite() {
    int rows = 0, bad = 0;
    double worst = 0.0;
    for (const auto& name : kSuite) {
        auto cols = read_csv(simulated(name) / "tail.csv");
        for (std::size_t i = 0; i < cols["t"].size(); ++i) {
            double t = as_double(cols["t"][i]);
            if (t != 1 && t != 3 && t != 5 && t != 7 && t != 9) continue;
            ++rows;
            double edge = as_double(cols["upper_ci_high"][i]);
            worst = std::max(worst, edge / std::exp(-t));
            if (!(edge <= std::exp(-t))) ++bad;
        }
    }
    return {bad == 0 && rows == 5 * static_cast<int>(kSuite.size()),
            std::to_string(rows) + " rows, worst upper CI edge / e^-t = " + num(worst)};
}

Outcome decoupling_suite() {
    std::string detail;
    bool ok = true;
    double lo = kInf, hi = 0.0;
    for (const auto& name : kSuite) {
        auto cfg = load_config(kConfigs / (name + ".json"));
        auto a = cfg.coefficient_tensor();
        if (!(a.has_zero_diagonal() && a.is_symmetric() && cfg.distributions.size() == 1)) continue;
        auto cols = read_csv(simulated(name) / "decoupling.csv");
        for (std::size_t i = 0; i < cols["p"].size(); ++i) {
            if (a.order() == 1) {
                ok = ok && cols["ratio"][i] == "1" && cols["ci_low"][i] == "1" && cols["ci_high"][i] == "1";
                continue;
            }
            double l = as_double(cols["ci_low"][i]), h = as_double(cols["ci_high"][i]);
            lo = std::min(lo, l);
            hi = std::max(hi, h);
            ok = ok && l >= kDecouplingLow && h <= kDecouplingHigh;
        }
        detail += (detail.empty() ? "" : ", ") + name;
    }
    return {ok, "d=2 CI range [" + num(lo) + ", " + num(hi) + "], d=1 exactly 1; configs: " + detail};
}

Outcome determinism() {
    const std::string name = "exp_d2_tetra";
    auto first = run_config(name, "verify", "det_a");
    auto second = run_config(name, "verify", "det_b");
    auto cfg = load_config(kConfigs / (name + ".json"));
    auto other = run_config(name, "verify", "det_c", cfg.seed + 1);
    int csvs = 0, differ = 0;
    for (const auto& f : first.files) {
        if (!f.ends_with(".csv")) continue;
        ++csvs;
        if (slurp(scratch() / "det_a" / name / f) != slurp(scratch() / "det_b" / name / f)) ++differ;
    }
    bool ok = first.passed && second.passed && other.passed && csvs > 0 && differ == 0;
    return {ok, std::to_string(csvs) + " CSVs compared, " + std::to_string(differ) + " differ; other seed " +
                    (other.passed ? "passes" : "fails")};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"oracle equivalence (ascent vs exhaustive search)", oracle_equivalence},
        {"d = 1 closed form", d1_closed_form},
        {"moment-growth audit", growth_audit},
        {"growth lemma with C = 8^(k+1)", growth_lemma},
        {"envelope sandwich", envelope_sandwich},
        {"factor mean bounds", factor_means},
        {"flattening lower bound and stability", flattening},
        {"moment sandwich p-stability", sandwich_suite},
        {"tail bounds", tail_suite},
        {"decoupling", decoupling_suite},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.passed ? 0 : 1;
        std::printf("[%s] %2zu %s: %s\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
