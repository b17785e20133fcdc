#include "qcal/mergetree.hpp"

#include <algorithm>
#include <utility>

namespace qcal {

SetSummary merge_summaries(const SetSummary& left, const SetSummary& right,
                           const QuantizationGrid& grid, std::uint64_t* join_count) {
    if (left.blocks.empty()) return right;
    if (right.blocks.empty()) return left;
    if (!(left.blocks.back().score_max < right.blocks.front().score_min)) {
        throw StructureError("summaries overlap or are out of score order");
    }
    SetSummary out;
    out.blocks = left.blocks;
    out.blocks.reserve(left.blocks.size() + right.blocks.size());
    for (const Block& b : right.blocks) {
        out.blocks.push_back(b);
        while (out.blocks.size() >= 2) {
            const Block& a = out.blocks[out.blocks.size() - 2];
            const Block& c = out.blocks.back();
            if (!mean_violates(a, c) && a.level != c.level) break;
            Block joined = merge_blocks(a, c, grid);
            out.blocks.pop_back();
            out.blocks.back() = std::move(joined);
            if (join_count) ++*join_count;
        }
    }
    return out;
}

MergeTreeCalibrator::MergeTreeCalibrator(QuantizationGrid grid, bool stop_on_unchanged)
    : grid_(std::move(grid)), stop_on_unchanged_(stop_on_unchanged) {}

TreeNode* MergeTreeCalibrator::new_node(TreeNode::Kind kind, int level) {
    arena_.push_back(std::make_unique<TreeNode>());
    TreeNode* n = arena_.back().get();
    n->kind = kind;
    n->level = level;
    return n;
}

void MergeTreeCalibrator::touch(TreeNode* n) {
    if (n->touch_gen != gen_) {
        n->touch_gen = gen_;
        ++touched_now_;
    }
}

void MergeTreeCalibrator::recompute(TreeNode* n) {
    touch(n);
    switch (n->kind) {
        case TreeNode::Kind::Leaf:
            break;  // leaf blocks are edited in place
        case TreeNode::Kind::Lifted:
            n->summary = n->left->summary;
            break;
        case TreeNode::Kind::Merged:
            n->summary = merge_summaries(n->left->summary, n->right->summary, grid_,
                                         &merge_work_);
            break;
    }
}

/// Refresh the ancestor chain of n after a child content change.
void MergeTreeCalibrator::refresh_upward(TreeNode* n) {
    while (n) {
        SetSummary before = n->summary;
        recompute(n);
        if (stop_on_unchanged_ && n->summary.blocks == before.blocks) break;
        n = n->parent;
    }
}

/// Wire a freshly created parent into its level's neighbor order. The
/// anchors are the parents of the nearest placed siblings of its children.
void MergeTreeCalibrator::splice_above(TreeNode* p) {
    TreeNode* lo = p->left;
    TreeNode* hi = p->right ? p->right : p->left;
    TreeNode* before = nullptr;
    for (TreeNode* q = lo->prev; q; q = q->prev) {
        if (q->parent) {
            before = q->parent;
            break;
        }
    }
    TreeNode* after = nullptr;
    for (TreeNode* q = hi->next; q; q = q->next) {
        if (q->parent) {
            after = q->parent;
            break;
        }
    }
    if ((before && before->next != after) || (after && after->prev != before)) {
        throw StructureError("parent level order is inconsistent");
    }
    p->prev = before;
    p->next = after;
    if (before) before->next = p;
    if (after) after->prev = p;
}

/// Give a parentless node at some level a place in the structure, applying
/// the scheduling rules one level at a time:
///   - a node whose neighbors are the two halves of an existing pair adopts
///     the pair's place: the pair keeps its left child plus the newcomer and
///     the right child is evicted to find a new spot (left-biased rewrite);
///   - otherwise the node pairs with an adjacent set that moved up alone, or
///     with a bare top node, or moves up alone itself.
/// Each structural edit marks the edited parent dirty; dirty summaries are
/// refreshed level by level while the climb continues above them.
void MergeTreeCalibrator::integrate(TreeNode* climber) {
    std::vector<TreeNode*> dirty;  // nodes one level up awaiting a refresh
    auto mark = [&dirty](TreeNode* n) {
        if (std::find(dirty.begin(), dirty.end(), n) == dirty.end()) {
            dirty.push_back(n);
        }
    };

    while (climber || !dirty.empty()) {
        TreeNode* risen = nullptr;
        while (climber) {
            TreeNode* lt = climber->prev;
            TreeNode* rt = climber->next;

            if (!lt && !rt) {  // alone on its level: the new top
                root_ = climber;
                climber = nullptr;
                break;
            }
            if (lt && rt && lt->parent && lt->parent == rt->parent) {
                // Lands inside an existing pair: replace the pair's right
                // child, whose place in the structure is forfeit.
                TreeNode* p = lt->parent;
                p->right = climber;
                climber->parent = p;
                rt->parent = nullptr;
                mark(p);
                climber = rt;  // same level, resolve the evicted set next
                continue;
            }
            if (lt && lt->parent && lt->parent->kind == TreeNode::Kind::Lifted) {
                // A left neighbor moved up alone; complete it into a pair.
                TreeNode* p = lt->parent;
                p->kind = TreeNode::Kind::Merged;
                p->right = climber;
                climber->parent = p;
                mark(p);
                climber = nullptr;
                break;
            }
            if (rt && rt->parent && rt->parent->kind == TreeNode::Kind::Lifted) {
                TreeNode* p = rt->parent;
                p->kind = TreeNode::Kind::Merged;
                p->left = climber;
                p->right = rt;
                climber->parent = p;
                mark(p);
                climber = nullptr;
                break;
            }
            if ((lt && !lt->parent) || (rt && !rt->parent)) {
                // Neighbor is the current top of the structure: pair with it.
                TreeNode* p = new_node(TreeNode::Kind::Merged, climber->level + 1);
                if (lt && !lt->parent) {
                    p->left = lt;
                    p->right = climber;
                } else {
                    p->left = climber;
                    p->right = rt;
                }
                p->left->parent = p;
                p->right->parent = p;
                splice_above(p);
                mark(p);
                risen = p;
                climber = nullptr;
                break;
            }
            // No partner on this level: move up alone.
            TreeNode* p = new_node(TreeNode::Kind::Lifted, climber->level + 1);
            p->left = climber;
            climber->parent = p;
            splice_above(p);
            mark(p);
            risen = p;
            climber = nullptr;
        }

        // This level is structurally settled; refresh its summaries and
        // queue the parents whose inputs changed.
        std::vector<TreeNode*> up;
        for (TreeNode* n : dirty) {
            SetSummary before = n->summary;
            recompute(n);
            bool unchanged = stop_on_unchanged_ && !before.blocks.empty() &&
                             n->summary.blocks == before.blocks;
            if (!unchanged && n->parent &&
                std::find(up.begin(), up.end(), n->parent) == up.end()) {
                up.push_back(n->parent);
            }
        }
        dirty = std::move(up);
        climber = risen;
    }
}

void MergeTreeCalibrator::insert(const Sample& s) {
    Block unit = make_block(s, grid_);  // validates the sample
    ++gen_;
    touched_now_ = 0;

    auto it = leaves_.find(s.score);
    if (it != leaves_.end()) {
        // Same score, same leaf: pool and refresh the root path.
        TreeNode* leaf = it->second;
        leaf->summary.blocks.front() =
            merge_blocks(leaf->summary.blocks.front(), unit, grid_);
        touch(leaf);
        refresh_upward(leaf->parent);
    } else {
        TreeNode* leaf = new_node(TreeNode::Kind::Leaf, 0);
        leaf->summary.blocks.push_back(unit);
        touch(leaf);
        auto pos = leaves_.emplace(s.score, leaf).first;
        TreeNode* ln = (pos == leaves_.begin()) ? nullptr : std::prev(pos)->second;
        auto nxt = std::next(pos);
        TreeNode* rn = (nxt == leaves_.end()) ? nullptr : nxt->second;
        leaf->prev = ln;
        leaf->next = rn;
        if (ln) ln->next = leaf;
        if (rn) rn->prev = leaf;
        integrate(leaf);
    }

    ++samples_;
    last_touched_ = touched_now_;
    total_touched_ += touched_now_;
}

CalibrationMap MergeTreeCalibrator::root_map() const {
    if (!root_) {
        throw NoDataError("no samples inserted");
    }
    return CalibrationMap{grid_, root_->summary.blocks};
}

UpdateStats MergeTreeCalibrator::stats() const {
    UpdateStats st;
    st.inserts = samples_;
    st.depth = root_ ? static_cast<std::uint64_t>(root_->level) + 1 : 0;
    st.last_nodes_touched = last_touched_;
    st.total_nodes_touched = total_touched_;
    st.merge_work = merge_work_;
    return st;
}

}  // namespace qcal
