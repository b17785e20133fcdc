#include "qcal/batch.hpp"

#include <algorithm>

namespace qcal {

std::vector<Block> sort_and_coalesce(std::span<const Sample> samples,
                                     const QuantizationGrid& grid) {
    std::vector<Sample> sorted(samples.begin(), samples.end());
    for (const Sample& s : sorted) {
        validate_sample(s);
    }
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Sample& a, const Sample& b) { return a.score < b.score; });

    std::vector<Block> blocks;
    blocks.reserve(sorted.size());
    for (const Sample& s : sorted) {
        if (!blocks.empty() && blocks.back().score_max == s.score) {
            blocks.back() = merge_blocks(blocks.back(), make_block(s, grid), grid);
        } else {
            blocks.push_back(make_block(s, grid));
        }
    }
    return blocks;
}

CalibrationMap fit_batch(std::span<const Sample> samples, const QuantizationGrid& grid,
                         FitStats* stats) {
    if (samples.empty()) {
        throw NoDataError("fit_batch needs at least one sample");
    }
    std::vector<Block> pending = sort_and_coalesce(samples, grid);

    // Left-to-right pool-adjacent-violators; equal pooled means join too.
    std::vector<Block> stack;
    stack.reserve(pending.size());
    for (Block& b : pending) {
        stack.push_back(std::move(b));
        while (stack.size() >= 2 &&
               mean_violates(stack[stack.size() - 2], stack.back())) {
            Block merged = merge_blocks(stack[stack.size() - 2], stack.back(), grid);
            stack.pop_back();
            stack.back() = std::move(merged);
            if (stats) ++stats->violation_joins;
        }
    }

    // Means are strictly increasing now; runs that project onto one level
    // collapse into a single map block. Sweep with the same stack discipline
    // so a merge that lands on a new level gets rechecked against its
    // predecessor and the result is always fully pooled.
    CalibrationMap map{grid, {}};
    map.blocks.reserve(stack.size());
    for (Block& b : stack) {
        map.blocks.push_back(std::move(b));
        while (map.blocks.size() >= 2) {
            const Block& a = map.blocks[map.blocks.size() - 2];
            const Block& c = map.blocks.back();
            bool same_level = a.level == c.level;
            if (!same_level && !mean_violates(a, c)) break;
            Block merged = merge_blocks(a, c, grid);
            map.blocks.pop_back();
            map.blocks.back() = std::move(merged);
            if (stats) {
                if (same_level) {
                    ++stats->level_joins;
                } else {
                    ++stats->violation_joins;
                }
            }
        }
    }
    return map;
}

}  // namespace qcal
