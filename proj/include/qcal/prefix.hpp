#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "qcal/core.hpp"

namespace qcal {

/// Streaming calibrator for scores arriving in nondecreasing order.
///
/// The state is a stack of committed groups plus one open group collecting
/// samples at the newest score. A join between committed groups stays valid
/// forever because later samples can only land strictly to their right, so
/// the stack only ever grows or pools at its end. The open group's mean is
/// still moving while duplicates of its score keep arriving, so it takes
/// part in joins only virtually: snapshot() pushes it onto a copy of the
/// stack, and it is committed for real once a strictly greater score shows
/// up. With a finite grid the stack never exceeds the level count, so a push
/// costs amortized O(1) joins against a constant-size stack.
class PrefixCalibrator {
public:
    explicit PrefixCalibrator(QuantizationGrid grid) : grid_(std::move(grid)) {}

    /// Absorb the next sample; score must be >= the previous one.
    void push(const Sample& s);

    /// Immutable copy of the current staircase.
    CalibrationMap snapshot() const;

    bool empty() const { return !open_; }
    std::size_t group_count() const;
    std::uint64_t sample_count() const { return samples_seen_; }
    std::uint64_t join_count() const;
    const QuantizationGrid& grid() const { return grid_; }
    std::optional<double> last_score() const;

private:
    /// Pushes incoming onto stack, then joins the trailing pair while the
    /// pooled means violate monotonicity or the levels coincide. Returns the
    /// number of joins performed.
    std::uint64_t settle(std::vector<Block>& stack, Block incoming) const;

    /// Committed stack with the open group joined on, plus the join count of
    /// that final push; exactly what the batch sweep would produce.
    std::pair<std::vector<Block>, std::uint64_t> assembled() const;

    QuantizationGrid grid_;
    std::vector<Block> stack_;   // groups whose score range is final
    std::optional<Block> open_;  // growing group at the newest score
    std::uint64_t samples_seen_ = 0;
    std::uint64_t committed_joins_ = 0;
};

}  // namespace qcal
