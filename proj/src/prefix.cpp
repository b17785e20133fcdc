#include "qcal/prefix.hpp"

#include <string>
#include <utility>

namespace qcal {

std::uint64_t PrefixCalibrator::settle(std::vector<Block>& stack, Block incoming) const {
    std::uint64_t joins = 0;
    stack.push_back(std::move(incoming));
    while (stack.size() >= 2) {
        const Block& a = stack[stack.size() - 2];
        const Block& b = stack.back();
        if (!mean_violates(a, b) && a.level != b.level) break;
        Block joined = merge_blocks(a, b, grid_);
        stack.pop_back();
        stack.back() = std::move(joined);
        ++joins;
    }
    return joins;
}

void PrefixCalibrator::push(const Sample& s) {
    validate_sample(s);
    if (open_ && s.score < open_->score_max) {
        throw OrderingError("score " + std::to_string(s.score) + " arrived after " +
                            std::to_string(open_->score_max));
    }

    Block unit = make_block(s, grid_);
    if (open_ && open_->score_max == s.score) {
        *open_ = merge_blocks(*open_, unit, grid_);
    } else {
        if (open_) committed_joins_ += settle(stack_, std::move(*open_));
        open_ = std::move(unit);
    }
    ++samples_seen_;
}

std::pair<std::vector<Block>, std::uint64_t> PrefixCalibrator::assembled() const {
    std::vector<Block> stack = stack_;
    std::uint64_t joins = 0;
    if (open_) joins = settle(stack, *open_);
    return {std::move(stack), joins};
}

CalibrationMap PrefixCalibrator::snapshot() const {
    if (!open_) throw NoDataError("no samples pushed");
    return CalibrationMap{grid_, assembled().first};
}

std::size_t PrefixCalibrator::group_count() const { return assembled().first.size(); }

std::uint64_t PrefixCalibrator::join_count() const {
    return committed_joins_ + assembled().second;
}

std::optional<double> PrefixCalibrator::last_score() const {
    if (!open_) return std::nullopt;
    return open_->score_max;
}

}  // namespace qcal
