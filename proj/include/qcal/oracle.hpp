#pragma once

#include <span>
#include <vector>

#include "qcal/core.hpp"

namespace qcal::oracle {

/// Exact solution: minimum weighted squared error over all monotone
/// assignments into `levels`, plus one minimizing assignment.
struct ExactSolution {
    double min_loss = 0.0;
    std::vector<double> assignment;
};

/// Dynamic program over (sample, level) states. Samples must be sorted by
/// strictly increasing score; levels must be non-empty and increasing.
/// O(N * levels) time. Ties in the assignment resolve toward lower levels.
ExactSolution dp_exact(std::span<const Sample> sorted_samples,
                       std::span<const double> levels);

/// Brute force over every monotone assignment; validation instrument for
/// dp_exact. Refuses instances with more than `guard` assignments.
ExactSolution enumerate_exact(std::span<const Sample> sorted_samples,
                              std::span<const double> levels,
                              std::uint64_t guard = 1'000'000);

/// Finite level list a grid induces for the given samples: explicit grids
/// contribute every level, lattices the points covering the target range
/// padded by one step on each side.
std::vector<double> oracle_levels(const QuantizationGrid& grid,
                                  std::span<const Sample> samples);

}  // namespace qcal::oracle
