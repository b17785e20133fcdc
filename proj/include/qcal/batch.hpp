#pragma once

#include <span>
#include <vector>

#include "qcal/core.hpp"

namespace qcal {

/// Join-count diagnostics for a batch fit.
struct FitStats {
    std::size_t violation_joins = 0;
    std::size_t level_joins = 0;

    std::size_t total_joins() const { return violation_joins + level_joins; }
};

/// Sort samples by score and pool samples sharing a score into one block.
/// The result is strictly increasing in score.
std::vector<Block> sort_and_coalesce(std::span<const Sample> samples,
                                     const QuantizationGrid& grid);

/// Batch solver: pool-adjacent-violators over the sorted blocks, project the
/// pooled means onto the grid, and coalesce adjacent blocks that landed on
/// the same level. Linear in the number of blocks after sorting.
CalibrationMap fit_batch(std::span<const Sample> samples, const QuantizationGrid& grid,
                         FitStats* stats = nullptr);

}  // namespace qcal
