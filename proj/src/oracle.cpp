#include "qcal/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qcal::oracle {

namespace {

void check_instance(std::span<const Sample> samples, std::span<const double> levels) {
    if (levels.empty()) {
        throw InvalidInputError("oracle needs at least one level");
    }
    for (std::size_t i = 1; i < levels.size(); ++i) {
        if (!(levels[i - 1] < levels[i])) {
            throw InvalidInputError("oracle levels must be strictly increasing");
        }
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        validate_sample(samples[i]);
        if (i > 0 && !(samples[i - 1].score < samples[i].score)) {
            throw InvalidInputError("oracle samples must have strictly increasing scores");
        }
    }
}

// Number of monotone assignments C(n + m - 1, n), saturating at huge.
double assignment_count(std::size_t n, std::size_t m) {
    double c = 1.0;
    for (std::size_t i = 1; i <= n; ++i) {
        c *= static_cast<double>(m - 1 + i) / static_cast<double>(i);
        if (c > 1e18) return c;
    }
    return c;
}

}  // namespace

ExactSolution dp_exact(std::span<const Sample> samples, std::span<const double> levels) {
    check_instance(samples, levels);
    const std::size_t n = samples.size();
    const std::size_t m = levels.size();
    if (n == 0) {
        return {};
    }

    // best[i][q]: minimal loss of samples 0..i with sample i at level q,
    // stored with a running prefix minimum so each row is O(m).
    std::vector<std::vector<double>> best(n, std::vector<double>(m));
    for (std::size_t i = 0; i < n; ++i) {
        double prefix = std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < m; ++q) {
            if (i > 0) {
                prefix = std::min(prefix, best[i - 1][q]);
            } else {
                prefix = 0.0;
            }
            double r = samples[i].target - levels[q];
            best[i][q] = samples[i].weight * r * r + prefix;
        }
    }

    ExactSolution sol;
    sol.assignment.resize(n);
    // Lowest level attaining the optimum, then backtrack keeping each step
    // as low as allowed.
    std::size_t q = 0;
    for (std::size_t cand = 1; cand < m; ++cand) {
        if (best[n - 1][cand] < best[n - 1][q]) q = cand;
    }
    sol.min_loss = best[n - 1][q];
    sol.assignment[n - 1] = levels[q];
    for (std::size_t i = n - 1; i > 0; --i) {
        std::size_t pick = 0;
        for (std::size_t cand = 1; cand <= q; ++cand) {
            if (best[i - 1][cand] < best[i - 1][pick]) pick = cand;
        }
        q = pick;
        sol.assignment[i - 1] = levels[q];
    }
    return sol;
}

ExactSolution enumerate_exact(std::span<const Sample> samples,
                              std::span<const double> levels, std::uint64_t guard) {
    check_instance(samples, levels);
    const std::size_t n = samples.size();
    const std::size_t m = levels.size();
    if (n == 0) {
        return {};
    }
    if (assignment_count(n, m) > static_cast<double>(guard)) {
        throw TooLargeError("too many monotone assignments to enumerate");
    }

    ExactSolution best;
    best.min_loss = std::numeric_limits<double>::infinity();
    std::vector<double> current(n);

    // Depth-first over nondecreasing level sequences, lowest levels first, so
    // the first optimum found is the tie-lowered one. The loss accumulates
    // left to right, matching dp_exact's summation order.
    auto walk = [&](auto&& self, std::size_t i, std::size_t q_min, double acc) -> void {
        if (i == n) {
            if (acc < best.min_loss) {
                best.min_loss = acc;
                best.assignment = current;
            }
            return;
        }
        for (std::size_t q = q_min; q < m; ++q) {
            double r = samples[i].target - levels[q];
            current[i] = levels[q];
            self(self, i + 1, q, acc + samples[i].weight * r * r);
        }
    };
    walk(walk, 0, 0, 0.0);
    return best;
}

std::vector<double> oracle_levels(const QuantizationGrid& grid,
                                  std::span<const Sample> samples) {
    if (grid.kind() == QuantizationGrid::Kind::ExplicitLevels) {
        return grid.levels();
    }
    if (samples.empty()) {
        throw NoDataError("lattice oracle levels need samples");
    }
    double ymin = samples[0].target;
    double ymax = samples[0].target;
    for (const Sample& s : samples) {
        ymin = std::min(ymin, s.target);
        ymax = std::max(ymax, s.target);
    }
    // No level outside the padded target range can be optimal for L2.
    std::vector<double> out =
        grid.levels_in_range(ymin - grid.step(), ymax + grid.step());
    if (out.empty()) {
        // All targets sit beyond a bound; the clamped extreme level is the
        // only candidate.
        out.push_back(grid.project(std::midpoint(ymin, ymax)));
    }
    return out;
}

}  // namespace qcal::oracle
