#include "chaosmom/budget.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace chaosmom;
using Catch::Approx;

namespace {

std::vector<double> vec(std::initializer_list<double> xs) { return xs; }

// Hoelder dual closed form: sup{ c.v : sum v^g <= p } for g > 1.
double power_oracle(const std::vector<double>& c, double g, double p) {
    double q = g / (g - 1.0), s = 0.0;
    for (double x : c) s += std::pow(x, q);
    return std::pow(p, 1.0 / g) * std::pow(s, 1.0 / q);
}

} // namespace

TEST_CASE("TailFunction factories", "[budget]") {
    auto sq = TailFunction::power(2.0);
    CHECK(sq(3.0) == Approx(9.0));
    CHECK(sq.inverse(9.0) == Approx(3.0));
    CHECK(sq.convex());
    CHECK_FALSE(TailFunction::power(0.5).convex());

    auto comp = TailFunction::composed(TailFunction::power(0.5), 2);
    CHECK(comp(4.0) == Approx(4.0));
    CHECK(comp.convex());
    REQUIRE(comp.power_exponent());
    CHECK(*comp.power_exponent() == 1.0);

    auto exp_n = TailFunction::of(TailDistribution::exponential());
    CHECK(exp_n.convex());
    CHECK(exp_n(2.5) == Approx(2.5));

    // Bisection inverse matches the closed form to 1e-10 relative.
    auto cube = TailFunction::custom([](double t) { return t * t * t; }, std::nullopt, true);
    CHECK(cube.inverse(27.0) == Approx(3.0).epsilon(1e-9));
    CHECK(cube.inverse(0.0) == Approx(0.0).margin(1e-100));
}

TEST_CASE("linear_max_over_budget examples", "[budget]") {
    auto c = vec({3.0, 1.0});
    SECTION("N(t) = t puts everything on the largest coefficient") {
        for (bool fast : {true, false}) {
            auto r = linear_max_over_budget(c, BudgetSet::uniform(TailFunction::power(1.0), 2, 2.0),
                                            {256, true, fast});
            CHECK(r.value == Approx(6.0).epsilon(1e-9));
            CHECK(r.v[0] == Approx(2.0).epsilon(1e-9));
            CHECK(r.v[1] == Approx(0.0).margin(1e-9));
        }
    }
    SECTION("N(t) = sqrt t: convex inverse, extreme allocation") {
        auto r = linear_max_over_budget(c, BudgetSet::uniform(TailFunction::power(0.5), 2, 2.0));
        CHECK_FALSE(r.fast_path);
        CHECK(r.value == Approx(12.0).epsilon(1e-12));
        CHECK(r.v[0] == Approx(4.0));
        CHECK(r.v[1] == 0.0);
    }
    SECTION("zero coefficients") {
        auto zero = vec({0.0, 0.0, 0.0});
        for (double g : {0.5, 1.0, 2.0}) {
            auto r = linear_max_over_budget(zero, BudgetSet::uniform(TailFunction::power(g), 3, 4.0));
            CHECK(r.value == 0.0);
            for (double v : r.v) CHECK(v == 0.0);
        }
    }
}

TEST_CASE("fast path and DP agree with the Hoelder closed form", "[budget]") {
    std::vector<std::vector<double>> cs{{3.0, 4.0}, {1.0, 2.0, 0.5}, {0.2, 0.0, 5.0, 1.0}};
    for (const auto& c : cs) {
        for (double g : {1.5, 2.0, 3.0}) {
            for (double p : {1.0, 2.0, 4.0}) {
                auto B = BudgetSet::uniform(TailFunction::power(g), c.size(), p);
                double exact = power_oracle(c, g, p);
                auto fast = linear_max_over_budget(c, B);
                CHECK(fast.fast_path);
                CHECK(fast.value == Approx(exact).epsilon(1e-8));
                CHECK(B.excess(fast.v) <= 1e-9);
                auto dp = linear_max_over_budget(c, B, {256, true, false});
                CHECK_FALSE(dp.fast_path);
                CHECK(dp.value <= exact * (1 + 1e-12));
                CHECK(dp.value >= exact * 0.999);
                CHECK(B.excess(dp.v) <= 1e-9);
            }
        }
    }
    CHECK(linear_max_over_budget(vec({3.0, 4.0}), BudgetSet::uniform(TailFunction::power(2.0), 2, 1.0)).value ==
          Approx(5.0));
}

TEST_CASE("mixed budget functions and a non-convex law", "[budget]") {
    // Weibull alpha = 1/2: N(t) = sqrt(t / s), inverse s b^2 is convex, so the
    // optimum concentrates on the largest coefficient.
    auto w = TailDistribution::weibull(0.5);
    auto B = BudgetSet::uniform(TailFunction::of(w), 3, 3.0);
    auto r = linear_max_over_budget(vec({1.0, 2.5, 2.0}), B);
    CHECK(r.value == Approx(2.5 * w.scale() * 9.0).epsilon(1e-9));
    CHECK(r.v[1] > 0.0);

    // One linear coordinate next to a quadratic one: the optimum spends
    // budget on both; checked against a fine one-dimensional scan.
    BudgetSet mixed{{TailFunction::power(1.0), TailFunction::power(2.0)}, 2.0};
    auto c = vec({1.0, 3.0});
    double scan = 0.0;
    for (int j = 0; j <= 200000; ++j) {
        double b = 2.0 * j / 200000.0;
        scan = std::max(scan, c[0] * b + c[1] * std::sqrt(2.0 - b));
    }
    auto m = linear_max_over_budget(c, mixed);
    CHECK(m.fast_path);
    CHECK(m.value == Approx(scan).epsilon(1e-9));
}

TEST_CASE("ties go to the lowest index", "[budget]") {
    auto c = vec({2.0, 2.0, 2.0});
    for (bool fast : {true, false}) {
        auto r = linear_max_over_budget(c, BudgetSet::uniform(TailFunction::power(1.0), 3, 1.0), {256, true, fast});
        CHECK(r.v[0] == Approx(1.0));
        CHECK(r.v[1] == Approx(0.0).margin(1e-12));
        CHECK(r.v[2] == Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("GridTooCoarse when the grid misses a jump", "[budget]") {
    // Inverse jumps at b = p/2. With 256 points (255 cells) no two coordinates
    // can both reach p/2; the doubled grid can, doubling the value.
    const double p = 1.0;
    auto step = TailFunction::custom([](double t) { return t < 10.0 ? std::min(t, 0.5 - 1e-12) : 0.5; },
                                     [](double y) { return y >= 0.5 ? 10.0 : y; }, false);
    auto B = BudgetSet::uniform(step, 2, p);
    CHECK_THROWS_AS(linear_max_over_budget(vec({1.0, 1.0}), B), GridTooCoarse);
    auto unchecked = linear_max_over_budget(vec({1.0, 1.0}), B, {256, false, true});
    CHECK(unchecked.value == Approx(10.0 + 127.0 / 255.0));
}

TEST_CASE("budget solver preconditions", "[budget]") {
    auto B = BudgetSet::uniform(TailFunction::power(1.0), 2, 1.0);
    CHECK_THROWS_AS(linear_max_over_budget(vec({1.0}), B), InvalidArgument);
    CHECK_THROWS_AS(linear_max_over_budget(vec({-1.0, 1.0}), B), InvalidArgument);
    CHECK_THROWS_AS(linear_max_over_budget(vec({1.0, 1.0}), BudgetSet::uniform(TailFunction::power(1.0), 2, -1.0)),
                    InvalidArgument);
    // Budget zero is the t = 0 row of a tail table.
    CHECK(linear_max_over_budget(vec({1.0, 1.0}), BudgetSet::uniform(TailFunction::power(1.0), 2, 0.0)).value == 0.0);
}

TEST_CASE("value is nondecreasing in the budget", "[budget][property]") {
    auto c = vec({0.7, 1.3, 0.4});
    for (double g : {0.5, 1.0, 2.0}) {
        double prev = 0.0;
        for (double p = 0.5; p <= 16.0; p *= 2.0) {
            double v = linear_max_over_budget(c, BudgetSet::uniform(TailFunction::power(g), 3, p)).value;
            CHECK(v >= prev);
            prev = v;
        }
    }
}
