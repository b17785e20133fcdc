#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "qcal/core.hpp"

namespace qcal {

/// Fully pooled staircase over one contiguous span of the score order: no
/// adjacent pair violates mean monotonicity and no adjacent pair shares a
/// level.
struct SetSummary {
    std::vector<Block> blocks;

    std::size_t group_count() const { return blocks.size(); }
};

/// Pool two summaries covering adjacent score ranges. Blocks of `right` are
/// appended one by one; the trailing pair is joined while it violates
/// monotonicity or sits on one level, so only seam groups are reworked. Each
/// join bumps *join_count, which makes the counter advance by exactly
/// I_left + I_right - I_result per call. An empty side returns the other
/// side unchanged.
SetSummary merge_summaries(const SetSummary& left, const SetSummary& right,
                           const QuantizationGrid& grid,
                           std::uint64_t* join_count = nullptr);

/// One set in the merge recursion. A Leaf holds a single distinct score, a
/// Lifted node carries one child up a level unchanged, a Merged node pools
/// two adjacent children from the level below. Nodes are owned by the
/// calibrator's arena; all pointers here are non-owning wiring.
struct TreeNode {
    enum class Kind { Leaf, Lifted, Merged };

    Kind kind = Kind::Leaf;
    int level = 0;
    SetSummary summary;
    TreeNode* left = nullptr;    // only child of a Lifted node lives here
    TreeNode* right = nullptr;   // second child, Merged nodes only
    TreeNode* parent = nullptr;
    TreeNode* prev = nullptr;    // same-level neighbors in score order
    TreeNode* next = nullptr;
    std::uint64_t touch_gen = 0; // insertion that last touched this node
};

/// Work counters accumulated by a calibrator since construction.
struct UpdateStats {
    std::uint64_t inserts = 0;
    std::uint64_t depth = 0;               // levels in the tree, leaves count as one
    std::uint64_t last_nodes_touched = 0;  // nodes created or refreshed by the last insert
    std::uint64_t total_nodes_touched = 0;
    std::uint64_t merge_work = 0;          // cumulative seam joins across all re-merges
};

/// Out-of-order streaming calibrator. Samples insert at their score position
/// in a binary merge structure whose root always carries the same staircase
/// a batch fit over the samples seen so far would produce; an insertion only
/// reworks the sets on the affected root path, logarithmically many.
class MergeTreeCalibrator {
public:
    /// stop_on_unchanged cuts refresh propagation once a recomputed summary
    /// reproduces its old value; switch it off to force full root paths.
    explicit MergeTreeCalibrator(QuantizationGrid grid, bool stop_on_unchanged = true);

    void insert(const Sample& s);

    /// Staircase for everything inserted so far.
    CalibrationMap root_map() const;

    UpdateStats stats() const;

    bool empty() const { return root_ == nullptr; }
    std::uint64_t sample_count() const { return samples_; }
    std::size_t leaf_count() const { return leaves_.size(); }
    const QuantizationGrid& grid() const { return grid_; }

    /// Read-only structure access for audits and instrumentation.
    const TreeNode* root() const { return root_; }

private:
    TreeNode* new_node(TreeNode::Kind kind, int level);
    void touch(TreeNode* n);
    void recompute(TreeNode* n);
    void refresh_upward(TreeNode* n);
    void splice_above(TreeNode* p);
    void integrate(TreeNode* climber);

    QuantizationGrid grid_;
    bool stop_on_unchanged_;
    std::vector<std::unique_ptr<TreeNode>> arena_;
    std::map<double, TreeNode*> leaves_;
    TreeNode* root_ = nullptr;
    std::uint64_t samples_ = 0;
    std::uint64_t gen_ = 0;
    std::uint64_t touched_now_ = 0;
    std::uint64_t last_touched_ = 0;
    std::uint64_t total_touched_ = 0;
    std::uint64_t merge_work_ = 0;
};

}  // namespace qcal
