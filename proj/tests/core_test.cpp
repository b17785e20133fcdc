#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "qcal/batch.hpp"
#include "qcal/core.hpp"
#include "testutil.hpp"

using namespace qcal;

TEST_CASE("validate_sample rejects degenerate fields") {
    CHECK_NOTHROW(validate_sample({1.0, 2.0, 3.0}));
    CHECK_THROWS_AS(validate_sample({std::nan(""), 0.0, 1.0}), InvalidInputError);
    CHECK_THROWS_AS(validate_sample({0.0, HUGE_VAL, 1.0}), InvalidInputError);
    CHECK_THROWS_AS(validate_sample({0.0, 0.0, 0.0}), InvalidInputError);
    CHECK_THROWS_AS(validate_sample({0.0, 0.0, -1.0}), InvalidInputError);
}

TEST_CASE("grid construction validates its input") {
    CHECK_THROWS_AS(QuantizationGrid::explicit_levels({}), InvalidInputError);
    CHECK_THROWS_AS(QuantizationGrid::explicit_levels({0.0, 0.0}), InvalidInputError);
    CHECK_THROWS_AS(QuantizationGrid::explicit_levels({1.0, 0.0}), InvalidInputError);
    CHECK_THROWS_AS(QuantizationGrid::lattice(0.0, 0.0), InvalidInputError);
    CHECK_THROWS_AS(QuantizationGrid::lattice(0.0, -1.0), InvalidInputError);
    CHECK_THROWS_AS(QuantizationGrid::lattice(0.0, 1.0, 2.0, 1.0), InvalidInputError);
    // Bounds that bracket no lattice point at all.
    CHECK_THROWS_AS(QuantizationGrid::lattice(0.0, 1.0, 0.2, 0.8), InvalidInputError);
}

TEST_CASE("projection picks the nearest level, ties low, clamps") {
    auto g = QuantizationGrid::explicit_levels({0.0, 0.5, 1.0});
    CHECK(g.project(0.3) == 0.5);
    CHECK(g.project(0.25) == 0.0);  // exact tie goes to the lower level
    CHECK(g.project(2.0) == 1.0);
    CHECK(g.project(-3.0) == 0.0);
    CHECK(g.project(0.75) == 0.5);  // tie again, upper pair
    CHECK_THROWS_AS(g.project(std::nan("")), InvalidInputError);

    auto lat = QuantizationGrid::lattice(0.0, 0.1);
    CHECK(lat.project(0.34) == doctest::Approx(0.3));
    CHECK(lat.project(-0.26) == doctest::Approx(-0.3));

    auto half = QuantizationGrid::lattice(0.0, 0.5);
    CHECK(half.project(0.25) == 0.0);  // exact lattice tie, lower again

    auto bounded = QuantizationGrid::lattice(0.0, 0.25, 0.0, 1.0);
    CHECK(bounded.project(3.0) == 1.0);
    CHECK(bounded.project(-3.0) == 0.0);
    CHECK(bounded.project(0.6) == doctest::Approx(0.5));
}

TEST_CASE("projection is monotone and idempotent") {
    test::Rng rng(20260822);
    std::uniform_real_distribution<double> val(-2.0, 3.0);
    for (int trial = 0; trial < 500; ++trial) {
        QuantizationGrid g = (trial % 2 == 0)
                                 ? test::random_grid(rng, 1 + trial % 5)
                                 : QuantizationGrid::lattice(val(rng), 0.01 + 0.3 * (trial % 7),
                                                             -1.0, 2.0);
        double a = val(rng);
        double b = val(rng);
        if (a > b) std::swap(a, b);
        double pa = g.project(a);
        double pb = g.project(b);
        CHECK(pa <= pb);
        CHECK(g.project(pa) == pa);
        CHECK(g.project(pb) == pb);
    }
}

TEST_CASE("level_count and levels_in_range") {
    auto g = QuantizationGrid::explicit_levels({0.0, 0.5, 1.0});
    CHECK(g.level_count() == 3);
    CHECK(g.levels_in_range(0.2, 1.0) == std::vector<double>{0.5, 1.0});

    auto bounded = QuantizationGrid::lattice(0.0, 0.25, 0.0, 1.0);
    CHECK(bounded.level_count() == 5);
    CHECK(bounded.levels_in_range(0.0, 1.0).size() == 5);

    auto open = QuantizationGrid::lattice(0.0, 1.0);
    CHECK(!open.level_count().has_value());
    CHECK(open.levels_in_range(-2.0, 2.0) == std::vector<double>{-2.0, -1.0, 0.0, 1.0, 2.0});

    auto fine = QuantizationGrid::lattice(0.0, 1e-9);
    CHECK_THROWS_AS(fine.levels_in_range(0.0, 1.0), TooLargeError);
}

TEST_CASE("compensated sums round correctly and ignore association order") {
    ExactSum s;
    for (int i = 0; i < 10; ++i) s.add(0.1);
    CHECK(s.value() == 1.0);

    test::Rng rng(7);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    std::vector<double> terms(100);
    for (double& t : terms) t = u(rng);

    ExactSum forward;
    for (double t : terms) forward.add(t);
    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(terms.begin(), terms.end(), rng);
        // Random pairwise tree: fold accumulated partials in random order.
        std::vector<ExactSum> parts;
        for (double t : terms) parts.emplace_back(t);
        while (parts.size() > 1) {
            std::size_t i =
                std::uniform_int_distribution<std::size_t>(0, parts.size() - 2)(rng);
            parts[i].add(parts[i + 1]);
            parts.erase(parts.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        }
        CHECK(parts[0].value() == forward.value());
    }
}

TEST_CASE("merge_blocks pools sums and re-projects") {
    auto g = QuantizationGrid::explicit_levels({0.0, 0.5, 1.0});
    Block a = make_block({1.0, 0.2, 1.0}, g);
    Block b = make_block({2.0, 0.1, 1.0}, g);
    Block m = merge_blocks(a, b, g);
    CHECK(m.weighted_target() == doctest::Approx(0.3));
    CHECK(m.weight() == 2.0);
    CHECK(m.mean() == doctest::Approx(0.15));
    CHECK(m.level == 0.0);
    CHECK(m.score_min == 1.0);
    CHECK(m.score_max == 2.0);

    Block hi = make_block({1.0, 0.9, 1.0}, g);
    Block lo = make_block({2.0, 0.1, 1.0}, g);
    CHECK(merge_blocks(hi, lo, g).level == 0.5);

    auto two = QuantizationGrid::explicit_levels({0.0, 1.0});
    Block p = make_block({1.0, 0.6, 1.0}, two);
    Block q = make_block({2.0, 0.4, 1.0}, two);
    CHECK(merge_blocks(p, q, two).level == 0.0);  // mean 0.5 ties down

    CHECK_THROWS_AS(merge_blocks(b, a, g), StructureError);
}

TEST_CASE("mean_violates is the cross-multiplied >= test") {
    auto g = QuantizationGrid::explicit_levels({0.0, 1.0});
    Block hi = make_block({1.0, 0.9, 1.0}, g);
    Block lo = make_block({2.0, 0.1, 1.0}, g);
    CHECK(mean_violates(hi, lo));
    CHECK(!mean_violates(lo, hi));

    Block even1 = make_block({1.0, 0.5, 1.0}, g);
    Block even2 = make_block({2.0, 0.5, 1.0}, g);
    CHECK(mean_violates(even1, even2));  // equality counts as a violation

    // Against the plain mean comparison on exactly representable sums.
    test::Rng rng(11);
    std::uniform_int_distribution<int> num(-8, 8);
    std::uniform_int_distribution<int> den(1, 8);
    for (int trial = 0; trial < 2000; ++trial) {
        Block x, y;
        x.sum_wy = ExactSum(num(rng));
        x.sum_w = ExactSum(den(rng));
        y.sum_wy = ExactSum(num(rng));
        y.sum_w = ExactSum(den(rng));
        bool direct = x.mean() >= y.mean();
        CHECK(mean_violates(x, y) == direct);
    }
}

TEST_CASE("residual_loss matches the quadratic expansion") {
    auto g = QuantizationGrid::explicit_levels({0.5});
    Block b = make_block({0.0, 1.0, 2.0}, g);
    CHECK(b.level == 0.5);
    CHECK(b.residual_loss() == 0.5);  // 2 * (1 - 0.5)^2
}

TEST_CASE("total_loss on assignments") {
    std::vector<Sample> one{{0.0, 1.0, 2.0}};
    std::vector<double> half{0.5};
    CHECK(total_loss(half, one) == 0.5);

    std::vector<Sample> pair{{0.0, 1.0, 1.0}, {1.0, 0.0, 1.0}};
    std::vector<double> both{0.5, 0.5};
    CHECK(total_loss(both, pair) == 0.5);

    std::vector<Sample> exact{{0.0, 0.0, 1.0}, {1.0, 0.5, 3.0}, {2.0, 1.0, 0.5}};
    std::vector<double> identity{0.0, 0.5, 1.0};
    CHECK(total_loss(identity, exact) == 0.0);

    CHECK_THROWS_AS(total_loss(half, pair), InvalidInputError);
}

TEST_CASE("evaluate_map covers extents, gaps and the outside") {
    auto g = QuantizationGrid::explicit_levels({0.0, 1.0});
    Block b0 = merge_blocks(make_block({0.0, 0.0, 1.0}, g), make_block({1.0, 0.0, 1.0}, g), g);
    Block b1 = merge_blocks(make_block({2.0, 1.0, 1.0}, g), make_block({3.0, 1.0, 1.0}, g), g);
    CalibrationMap map{g, {b0, b1}};

    CHECK(map.evaluate(0.5) == 0.0);
    CHECK(map.evaluate(2.5) == 1.0);
    CHECK(map.evaluate(1.4) == 0.0);  // below the 1.5 midpoint
    CHECK(map.evaluate(1.5) == 1.0);  // midpoint goes right
    CHECK(map.evaluate(-5.0) == 0.0);
    CHECK(map.evaluate(10.0) == 1.0);
    CHECK_THROWS_AS(map.evaluate(std::nan("")), InvalidInputError);

    CHECK(total_loss(map, std::vector<Sample>{{0.5, 0.0, 1.0}, {2.5, 1.0, 1.0}}) == 0.0);

    CalibrationMap hollow{g, {}};
    CHECK_THROWS_AS(hollow.evaluate(0.0), NoModelError);
    CHECK_THROWS_AS(total_loss(hollow, std::vector<Sample>{{0.0, 0.0, 1.0}}), NoModelError);
}

TEST_CASE("evaluate_map is monotone on fitted maps") {
    test::Rng rng(23);
    std::uniform_real_distribution<double> probe(-5.0, 25.0);
    for (int trial = 0; trial < 200; ++trial) {
        auto samples = test::random_samples(rng, 1 + trial % 20);
        auto grid = test::random_grid(rng, 1 + trial % 5);
        CalibrationMap map = fit_batch(samples, grid);
        double a = probe(rng);
        double b = probe(rng);
        if (a > b) std::swap(a, b);
        CHECK(map.evaluate(a) <= map.evaluate(b));
    }
}
