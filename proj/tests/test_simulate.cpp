#include "chaosmom/simulate.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace chaosmom;
using Catch::Approx;

namespace {

CoefficientTensor pair_tensor() { return CoefficientTensor(2, 2, {0.0, 1.0, 1.0, 0.0}, true, true); }

SimulationOptions sim(std::size_t samples, std::uint64_t seed) {
    SimulationOptions o;
    o.samples = samples;
    o.seed = seed;
    return o;
}

} // namespace

TEST_CASE("empirical_moment", "[estimate]") {
    std::vector<double> c(500, 3.25);
    for (double p : {1.0, 2.0, 7.5, 40.0}) {
        auto e = empirical_moment(c, p, 1);
        CHECK(e.value == Approx(3.25).epsilon(1e-14));
        CHECK(e.ci_low == Approx(3.25).epsilon(1e-14));
        CHECK(e.ci_high == Approx(3.25).epsilon(1e-14));
    }

    Stream rng(2024);
    auto x = sample(TailDistribution::exponential(), rng, 1000000);
    auto m2 = empirical_moment(x, 2.0, 5);
    CHECK(m2.ci_low <= std::sqrt(2.0));
    CHECK(m2.ci_high >= std::sqrt(2.0));
    CHECK(m2.ci_low <= m2.value);
    CHECK(m2.value <= m2.ci_high);

    auto w = TailDistribution::weibull(0.5);
    Stream rw(77);
    auto y = sample(w, rw, 1000000);
    auto m4 = empirical_moment(y, 4.0, 6);
    double exact = moment_norm(w, 4.0);
    CHECK(m4.ci_low <= exact);
    CHECK(m4.ci_high >= exact);

    // Power means are nondecreasing in p on a fixed sample.
    double prev = 0.0;
    for (double p = 1.0; p <= 64.0; p *= 1.5) {
        double v = empirical_moment(std::span<const double>(y.data(), 20000), p).value;
        CHECK(v >= prev * (1 - 1e-14));
        prev = v;
    }

    std::vector<double> zero(10, 0.0);
    CHECK(empirical_moment(zero, 3.0).value == 0.0);
    CHECK_THROWS_AS(empirical_moment(std::vector<double>{}, 2.0), InvalidArgument);
    CHECK_THROWS_AS(empirical_moment(c, 0.5), InvalidArgument);
}

TEST_CASE("heavy-tail warning", "[estimate]") {
    std::vector<double> s(10000, 1.0);
    s[17] = 50.0;
    CHECK(empirical_moment(s, 32.0).heavy_tail_warning);
    CHECK_FALSE(empirical_moment(s, 8.0).heavy_tail_warning);  // p <= 16 never warns
    std::vector<double> flat(10000, 1.0);
    CHECK_FALSE(empirical_moment(flat, 32.0).heavy_tail_warning);
}

TEST_CASE("bootstrap interval coverage", "[estimate][property]") {
    int covered = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Stream rng(seed, {31});
        auto x = sample(TailDistribution::exponential(), rng, 20000);
        auto e = empirical_moment(x, 2.0, seed);
        covered += e.ci_low <= std::sqrt(2.0) && std::sqrt(2.0) <= e.ci_high;
    }
    CHECK(covered >= 90);
}

TEST_CASE("empirical_tail", "[estimate]") {
    Stream rng(9);
    auto x = sample(TailDistribution::exponential(), rng, 1000000);
    auto t0 = empirical_tail(x, 0.0);
    CHECK(t0.value == 1.0);
    auto above = empirical_tail(x, 1e9);
    CHECK(above.value == 0.0);
    CHECK(above.ci_low == 0.0);
    CHECK(above.ci_high > 0.0);
    CHECK(above.ci_high < 1e-5);
    auto t = empirical_tail(x, std::log(100.0));
    CHECK(t.ci_low <= 0.01);
    CHECK(t.ci_high >= 0.01);

    // Wilson against a hand-computed interval: 10 of 100.
    auto w = wilson(10, 100);
    CHECK(w.ci_low == Approx(0.0552).margin(1e-4));
    CHECK(w.ci_high == Approx(0.1744).margin(1e-4));
}

TEST_CASE("sample_chaos", "[simulate]") {
    const std::uint64_t seed = 123;
    SECTION("d = 1, a = e_1 reproduces the raw exponential stream") {
        ChaosInstance inst(CoefficientTensor::vector({1.0}), ChaosMode::decoupled, {TailDistribution::exponential()});
        auto s = sample_chaos(inst, seed, 1000);
        Stream ref(seed, {0, 0});
        for (double v : s) CHECK(v == ref.exponential());
    }
    SECTION("zero tensor") {
        ChaosInstance inst(CoefficientTensor(2, 3, std::vector<double>(9, 0.0)), ChaosMode::decoupled,
                           {TailDistribution::exponential()});
        for (double v : sample_chaos(inst, seed, 1000)) CHECK(v == 0.0);
    }
    SECTION("undecoupled pair: S = 2 X_1 X_2, mean 2") {
        ChaosInstance inst(pair_tensor(), ChaosMode::undecoupled, {TailDistribution::exponential()});
        auto s = sample_chaos(inst, seed, 1000000);
        Stream ref(seed, {0, 0});
        for (std::size_t j = 0; j < 100; ++j) {
            double x1 = ref.exponential(), x2 = ref.exponential();
            CHECK(s[j] == Approx(2.0 * x1 * x2).epsilon(1e-15));
        }
        auto m = empirical_moment(s, 1.0, seed);
        CHECK(m.ci_low <= 2.0);
        CHECK(m.ci_high >= 2.0);
    }
    SECTION("worker count does not change the stream") {
        ChaosInstance inst(CoefficientTensor::random_sparse(2, 4, 0.5, 3, true), ChaosMode::undecoupled,
                           {TailDistribution::weibull(0.5)});
        auto one = sample_chaos(inst, seed, 200000, 1);
        auto three = sample_chaos(inst, seed, 200000, 3);
        CHECK(one == three);
        for (double v : one) CHECK(v >= 0.0);
    }
    SECTION("undecoupled needs a tetrahedral tensor") {
        CHECK_THROWS_AS(ChaosInstance(CoefficientTensor(2, 2, {1.0, 0.0, 0.0, 1.0}), ChaosMode::undecoupled,
                                      {TailDistribution::exponential()}),
                        NotTetrahedral);
    }
}

TEST_CASE("sandwich_report", "[simulate]") {
    ChaosInstance inst(CoefficientTensor::vector({1.0}), ChaosMode::decoupled, {TailDistribution::exponential()});
    std::vector<double> grid;
    for (int p = 1; p <= 16; ++p) grid.push_back(p);
    auto t = sandwich_report(inst, grid, sim(200000, 4));
    CHECK(t.passed);
    for (const auto& row : t.rows) {
        CHECK(row.norm == Approx(1.0 + row.p).epsilon(1e-9));
        CHECK(row.ratio >= 1.0 / (2.0 * std::numbers::e));
        CHECK(row.ratio <= 1.0);
        CHECK(row.asserted);
    }

    ChaosInstance zero(CoefficientTensor(2, 2, std::vector<double>(4, 0.0)), ChaosMode::decoupled,
                       {TailDistribution::exponential()});
    auto z = sandwich_report(zero, {1.0, 2.0}, sim(5000, 4));
    CHECK(z.passed);
    for (const auto& row : z.rows) {
        CHECK(row.degenerate);
        CHECK_FALSE(row.asserted);
    }
}

TEST_CASE("tail_report", "[simulate]") {
    ChaosInstance inst(CoefficientTensor::vector({1.0}), ChaosMode::decoupled, {TailDistribution::exponential()});
    // P(X >= e (1 + t)) = e^{-e (1 + t)} <= e^{-t}.
    TailOptions given;
    given.C_hat = std::numbers::e;
    given.c_hat = 0.1;
    auto t = tail_report(inst, {0.0, 1.0, 2.0, 4.0}, sim(100000, 7), 8, given);
    CHECK(t.passed);
    CHECK(t.rows[0].norm == Approx(1.0));
    CHECK_FALSE(t.rows[0].asserted);
    for (const auto& row : t.rows) CHECK(row.upper.value <= std::exp(-std::numbers::e * (1 + row.t)) + 0.003);

    auto cal = tail_report(inst, {1.0, 3.0, 5.0}, sim(100000, 7), 8);
    CHECK(cal.passed);
    CHECK(cal.C_hat > 0.0);

    CHECK_THROWS_AS(tail_report(inst, {12.0}, sim(10000, 7), 8), ResolutionExceeded);
    CHECK_THROWS_AS(tail_report(inst, {1.0}, sim(10000, 7), 7), InvalidArgument);
}

TEST_CASE("decoupling_report", "[simulate]") {
    auto d1 = decoupling_report(CoefficientTensor::vector({0.5, 2.0}), TailDistribution::weibull(0.5),
                                {1.0, 2.0, 4.0, 8.0}, sim(20000, 3));
    CHECK(d1.identical);
    CHECK(d1.passed);
    for (const auto& row : d1.rows) CHECK(row.ratio.value == 1.0);

    auto d2 = decoupling_report(pair_tensor(), TailDistribution::exponential(), {1.0, 2.0, 4.0, 8.0}, sim(1000000, 3));
    CHECK(d2.passed);
    CHECK(d2.rows[0].ratio.ci_low <= 1.0);
    CHECK(d2.rows[0].ratio.ci_high >= 1.0);

    CHECK_THROWS_AS(decoupling_report(CoefficientTensor(2, 2, {1.0, 1.0, 1.0, 0.0}), TailDistribution::exponential(),
                                      {1.0}, sim(1000, 3)),
                    NotTetrahedral);
}

TEST_CASE("factorization_report", "[simulate]") {
    auto e1 = CoefficientTensor::vector({1.0});
    auto w = TailDistribution::weibull(0.5);
    auto same = factorization_report(e1, {w}, {w}, 1, {1.0, 2.0, 4.0}, sim(20000, 5));
    CHECK(same.passed);
    for (const auto& row : same.rows) CHECK(row.ratio.value == Approx(1.0).epsilon(1e-14));

    auto k2 = factorization_report(e1, {w}, 2, {1.0, 2.0, 4.0, 8.0}, sim(200000, 5));
    CHECK(k2.passed);
    CHECK(std::isfinite(k2.spread));

    auto zero = factorization_report(CoefficientTensor::vector({0.0}), {w}, {w}, 1, {1.0}, sim(1000, 5));
    CHECK(zero.passed);
    CHECK(zero.rows[0].degenerate);
}
