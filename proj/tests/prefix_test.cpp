#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "qcal/batch.hpp"
#include "qcal/oracle.hpp"
#include "qcal/prefix.hpp"
#include "testutil.hpp"

using namespace qcal;

TEST_CASE("ordered pushes reproduce the pinned fits") {
    auto two = QuantizationGrid::explicit_levels({0.0, 1.0});

    SUBCASE("violating pair pools and ties down") {
        PrefixCalibrator cal(two);
        cal.push({1.0, 1.0, 1.0});
        cal.push({2.0, 0.0, 1.0});
        auto map = cal.snapshot();
        REQUIRE(map.size() == 1);
        CHECK(map.blocks[0].level == 0.0);
        CHECK(map.blocks[0].mean() == 0.5);
    }

    SUBCASE("rising pair with one shared level joins anyway") {
        PrefixCalibrator cal(two);
        cal.push({1.0, 0.1, 1.0});
        cal.push({2.0, 0.2, 1.0});
        auto map = cal.snapshot();
        REQUIRE(map.size() == 1);
        CHECK(map.blocks[0].level == 0.0);
        CHECK(map.blocks[0].mean() == doctest::Approx(0.15));
        CHECK(cal.join_count() == 1);

        // The equal-level join does not cost any optimality.
        std::vector<Sample> seen{{1.0, 0.1, 1.0}, {2.0, 0.2, 1.0}};
        auto dp = oracle::dp_exact(seen, two.levels());
        CHECK(test::close(total_loss(map, seen), dp.min_loss));
    }

    SUBCASE("separated pair stays split") {
        PrefixCalibrator cal(two);
        cal.push({1.0, 0.1, 1.0});
        cal.push({2.0, 0.9, 1.0});
        auto map = cal.snapshot();
        REQUIRE(map.size() == 2);
        CHECK(map.blocks[0].level == 0.0);
        CHECK(map.blocks[1].level == 1.0);
        CHECK(cal.join_count() == 0);
    }

    SUBCASE("single push projects directly") {
        PrefixCalibrator cal(two);
        cal.push({1.0, 0.7, 1.0});
        CHECK(cal.snapshot().blocks[0].level == 1.0);
    }
}

TEST_CASE("ordering and emptiness are enforced") {
    auto two = QuantizationGrid::explicit_levels({0.0, 1.0});
    PrefixCalibrator cal(two);
    CHECK_THROWS_AS(cal.snapshot(), NoDataError);
    cal.push({2.0, 0.5, 1.0});
    CHECK_THROWS_AS(cal.push({1.0, 0.5, 1.0}), OrderingError);
    CHECK_THROWS_AS(cal.push({3.0, 0.5, 0.0}), InvalidInputError);
    CHECK(cal.sample_count() == 1);
}

TEST_CASE("equal scores fold into the open block") {
    auto g = QuantizationGrid::explicit_levels({0.0, 0.5, 1.0});
    PrefixCalibrator cal(g);
    cal.push({5.0, 0.0, 1.0});
    cal.push({5.0, 1.0, 3.0});
    auto map = cal.snapshot();
    REQUIRE(map.size() == 1);
    CHECK(map.blocks[0].mean() == 0.75);
    CHECK(map.blocks[0].weight() == 4.0);

    std::vector<Sample> both{{5.0, 0.0, 1.0}, {5.0, 1.0, 3.0}};
    auto batch = fit_batch(both, g);
    CHECK(map.blocks[0] == batch.blocks[0]);
}

TEST_CASE("snapshots are stable against later pushes") {
    auto g = QuantizationGrid::explicit_levels({0.0, 0.5, 1.0});
    PrefixCalibrator cal(g);
    cal.push({1.0, 0.9, 1.0});
    auto early = cal.snapshot();
    cal.push({2.0, 0.1, 1.0});
    CHECK(early.size() == 1);
    CHECK(early.blocks[0].level == 1.0);
    CHECK(cal.snapshot().blocks[0].level == 0.5);
}

TEST_CASE("every prefix equals the batch fit") {
    test::Rng rng(20260820);
    for (int stream = 0; stream < 200; ++stream) {
        std::size_t n = 1 + stream % 40;
        auto samples = test::random_samples(rng, n);
        std::sort(samples.begin(), samples.end(),
                  [](const Sample& a, const Sample& b) { return a.score < b.score; });
        auto grid = test::random_grid(rng, 1 + stream % 5);

        PrefixCalibrator cal(grid);
        for (std::size_t i = 0; i < n; ++i) {
            cal.push(samples[i]);
            std::span<const Sample> seen(samples.data(), i + 1);
            auto batch = fit_batch(seen, grid);
            auto snap = cal.snapshot();
            REQUIRE(snap.size() == batch.size());
            for (std::size_t b = 0; b < batch.size(); ++b) {
                CHECK(snap.blocks[b] == batch.blocks[b]);
            }
            if (i + 1 <= 10 && grid.levels().size() <= 5) {
                auto dp = oracle::dp_exact(seen, grid.levels());
                CHECK(test::close(total_loss(snap, seen), dp.min_loss));
            }
        }
    }
}

TEST_CASE("group stack never outgrows the grid") {
    test::Rng rng(55);
    for (int stream = 0; stream < 100; ++stream) {
        std::size_t m = 1 + stream % 5;
        auto grid = test::random_grid(rng, m);
        auto samples = test::random_samples(rng, 60);
        std::sort(samples.begin(), samples.end(),
                  [](const Sample& a, const Sample& b) { return a.score < b.score; });
        PrefixCalibrator cal(grid);
        std::uint64_t pushes = 0;
        for (const Sample& s : samples) {
            cal.push(s);
            ++pushes;
            CHECK(cal.group_count() <= grid.levels().size());
            CHECK(cal.join_count() < pushes);
        }
        CHECK(cal.sample_count() == pushes);
    }
}

TEST_CASE("duplicate scores rejoin correctly once their group stops growing") {
    // A duplicate shifts its group's mean after earlier joins were decided,
    // so the newest group must stay out of committed joins until a strictly
    // greater score closes it. Every push must still match the batch fit.
    test::Rng rng(91);
    std::uniform_int_distribution<int> score(0, 8);
    std::uniform_real_distribution<double> target(0.0, 1.0);
    std::uniform_real_distribution<double> weight(0.25, 2.0);
    for (int stream = 0; stream < 150; ++stream) {
        auto grid = test::random_grid(rng, 1 + stream % 5);
        std::vector<Sample> scores_sorted;
        for (int i = 0; i < 30; ++i) {
            scores_sorted.push_back({static_cast<double>(score(rng)), target(rng), weight(rng)});
        }
        std::sort(scores_sorted.begin(), scores_sorted.end(),
                  [](const Sample& a, const Sample& b) { return a.score < b.score; });

        PrefixCalibrator cal(grid);
        std::vector<Sample> seen;
        for (const Sample& s : scores_sorted) {
            cal.push(s);
            seen.push_back(s);
            auto batch = fit_batch(seen, grid);
            auto snap = cal.snapshot();
            REQUIRE(snap.size() == batch.size());
            for (std::size_t b = 0; b < batch.size(); ++b) {
                CHECK(snap.blocks[b] == batch.blocks[b]);
            }
        }
    }
}
