#include "qcal/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qcal {

void validate_sample(const Sample& s) {
    if (!std::isfinite(s.score) || !std::isfinite(s.target) || !std::isfinite(s.weight)) {
        throw InvalidInputError("sample has a non-finite field");
    }
    if (s.weight <= 0.0) {
        throw InvalidInputError("sample weight must be positive");
    }
}

// ---------------------------------------------------------------------------
// QuantizationGrid
// ---------------------------------------------------------------------------

QuantizationGrid QuantizationGrid::explicit_levels(std::vector<double> levels) {
    if (levels.empty()) {
        throw InvalidInputError("grid needs at least one level");
    }
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!std::isfinite(levels[i])) {
            throw InvalidInputError("grid level is not finite");
        }
        if (i > 0 && !(levels[i - 1] < levels[i])) {
            throw InvalidInputError("grid levels must be strictly increasing");
        }
    }
    QuantizationGrid g;
    g.kind_ = Kind::ExplicitLevels;
    g.levels_ = std::move(levels);
    return g;
}

double QuantizationGrid::lattice_level(double k) const {
    return std::fma(k, step_, offset_);
}

namespace {

// Smallest integer index k (returned as a double) with fma(k, step, offset)
// >= x. The floor-based guess can be off by one ulp near lattice points, so
// probe a small window instead of trusting it.
double first_index_at_or_above(double x, double offset, double step) {
    double k = std::floor((x - offset) / step) - 1.0;
    for (int i = 0; i < 8 && std::fma(k, step, offset) < x; ++i) {
        k += 1.0;
    }
    return k;
}

double last_index_at_or_below(double x, double offset, double step) {
    double k = std::floor((x - offset) / step) + 2.0;
    for (int i = 0; i < 8 && std::fma(k, step, offset) > x; ++i) {
        k -= 1.0;
    }
    return k;
}

}  // namespace

QuantizationGrid QuantizationGrid::lattice(double offset, double step,
                                           std::optional<double> lower,
                                           std::optional<double> upper) {
    if (!std::isfinite(offset) || !std::isfinite(step) || step <= 0.0) {
        throw InvalidInputError("lattice needs finite offset and positive step");
    }
    if ((lower && !std::isfinite(*lower)) || (upper && !std::isfinite(*upper))) {
        throw InvalidInputError("lattice bound is not finite");
    }
    if (lower && upper && *lower > *upper) {
        throw InvalidInputError("lattice lower bound exceeds upper bound");
    }
    QuantizationGrid g;
    g.kind_ = Kind::UniformLattice;
    g.offset_ = offset;
    g.step_ = step;
    g.lower_ = lower;
    g.upper_ = upper;
    if (lower) g.kmin_ = first_index_at_or_above(*lower, offset, step);
    if (upper) g.kmax_ = last_index_at_or_below(*upper, offset, step);
    if (g.kmin_ && g.kmax_ && *g.kmin_ > *g.kmax_) {
        throw InvalidInputError("lattice bounds contain no level");
    }
    return g;
}

double QuantizationGrid::project(double value) const {
    if (!std::isfinite(value)) {
        throw InvalidInputError("cannot project a non-finite value");
    }
    if (kind_ == Kind::ExplicitLevels) {
        const auto& ls = levels_;
        if (value <= ls.front()) return ls.front();
        if (value >= ls.back()) return ls.back();
        auto it = std::lower_bound(ls.begin(), ls.end(), value);
        double up = *it;
        double down = *(it - 1);
        // Exact tie resolves to the lower level.
        return (value - down <= up - value) ? down : up;
    }
    double kd = std::floor((value - offset_) / step_);
    double best_k = kd - 1.0;
    double best_d = std::abs(value - lattice_level(best_k));
    for (double k : {kd, kd + 1.0}) {
        double d = std::abs(value - lattice_level(k));
        if (d < best_d) {
            best_d = d;
            best_k = k;
        }
    }
    if (kmin_ && best_k < *kmin_) best_k = *kmin_;
    if (kmax_ && best_k > *kmax_) best_k = *kmax_;
    return lattice_level(best_k);
}

std::optional<std::uint64_t> QuantizationGrid::level_count() const {
    if (kind_ == Kind::ExplicitLevels) {
        return levels_.size();
    }
    if (kmin_ && kmax_) {
        double count = *kmax_ - *kmin_ + 1.0;
        if (count <= 1e18) return static_cast<std::uint64_t>(count);
    }
    return std::nullopt;
}

std::vector<double> QuantizationGrid::levels_in_range(double lo, double hi,
                                                      std::uint64_t guard) const {
    if (!(lo <= hi)) {
        throw InvalidInputError("levels_in_range needs lo <= hi");
    }
    std::vector<double> out;
    if (kind_ == Kind::ExplicitLevels) {
        for (double l : levels_) {
            if (l >= lo && l <= hi) out.push_back(l);
        }
        return out;
    }
    double klo = first_index_at_or_above(lo, offset_, step_);
    double khi = last_index_at_or_below(hi, offset_, step_);
    if (kmin_ && klo < *kmin_) klo = *kmin_;
    if (kmax_ && khi > *kmax_) khi = *kmax_;
    if (klo > khi) return out;
    double count = khi - klo + 1.0;
    if (count > static_cast<double>(guard)) {
        throw TooLargeError("lattice range holds too many levels");
    }
    out.reserve(static_cast<std::size_t>(count));
    for (double k = klo; k <= khi; k += 1.0) {
        out.push_back(lattice_level(k));
    }
    return out;
}

bool operator==(const QuantizationGrid& a, const QuantizationGrid& b) {
    if (a.kind_ != b.kind_) return false;
    if (a.kind_ == QuantizationGrid::Kind::ExplicitLevels) {
        return a.levels_ == b.levels_;
    }
    return a.offset_ == b.offset_ && a.step_ == b.step_ && a.lower_ == b.lower_ &&
           a.upper_ == b.upper_;
}

// ---------------------------------------------------------------------------
// Blocks
// ---------------------------------------------------------------------------

double Block::residual_loss() const {
    double l = level;
    double loss = std::fma(l, std::fma(l, sum_w.value(), -2.0 * sum_wy.value()), sum_wyy);
    return loss < 0.0 ? 0.0 : loss;
}

bool operator==(const Block& a, const Block& b) {
    return a.sum_wy == b.sum_wy && a.sum_w == b.sum_w && a.level == b.level &&
           a.score_min == b.score_min && a.score_max == b.score_max;
}

Block make_block(const Sample& s, const QuantizationGrid& grid) {
    validate_sample(s);
    Block b;
    b.sum_wy = ExactSum(s.weight * s.target);
    b.sum_w = ExactSum(s.weight);
    b.sum_wyy = s.weight * s.target * s.target;
    b.score_min = s.score;
    b.score_max = s.score;
    b.level = grid.project(b.mean());
    return b;
}

bool mean_violates(const Block& a, const Block& b) {
    // Sign of a.sum_wy*b.sum_w - b.sum_wy*a.sum_w via Kahan's determinant.
    double w = b.sum_wy.value() * a.sum_w.value();
    double e = std::fma(b.sum_wy.value(), a.sum_w.value(), -w);
    double f = std::fma(a.sum_wy.value(), b.sum_w.value(), -w);
    return (f - e) >= 0.0;
}

Block merge_blocks(const Block& a, const Block& b, const QuantizationGrid& grid) {
    if (!(a.score_max <= b.score_min)) {
        throw StructureError("merge_blocks arguments are not in score order");
    }
    Block m;
    m.sum_wy = a.sum_wy;
    m.sum_wy.add(b.sum_wy);
    m.sum_w = a.sum_w;
    m.sum_w.add(b.sum_w);
    m.sum_wyy = a.sum_wyy + b.sum_wyy;
    m.score_min = a.score_min;
    m.score_max = b.score_max;
    m.level = grid.project(m.mean());
    return m;
}

// ---------------------------------------------------------------------------
// CalibrationMap
// ---------------------------------------------------------------------------

double CalibrationMap::evaluate(double score) const {
    if (blocks.empty()) {
        throw NoModelError("calibration map is empty");
    }
    if (!std::isfinite(score)) {
        throw InvalidInputError("cannot evaluate a non-finite score");
    }
    // Last block starting at or before the score.
    auto it = std::upper_bound(blocks.begin(), blocks.end(), score,
                               [](double s, const Block& b) { return s < b.score_min; });
    if (it == blocks.begin()) {
        return blocks.front().level;
    }
    const Block& here = *(it - 1);
    if (score <= here.score_max || it == blocks.end()) {
        return here.level;
    }
    // In the gap: nearest block by midpoint, ties to the right.
    double cut = std::midpoint(here.score_max, it->score_min);
    return score < cut ? here.level : it->level;
}

double CalibrationMap::stored_loss() const {
    double loss = 0.0;
    for (const Block& b : blocks) {
        loss += b.residual_loss();
    }
    return loss;
}

double total_loss(const CalibrationMap& map, std::span<const Sample> samples) {
    if (map.empty()) {
        throw NoModelError("calibration map is empty");
    }
    double loss = 0.0;
    for (const Sample& s : samples) {
        validate_sample(s);
        double r = s.target - map.evaluate(s.score);
        loss += s.weight * r * r;
    }
    return loss;
}

double total_loss(std::span<const double> assignment, std::span<const Sample> samples) {
    if (assignment.size() != samples.size()) {
        throw InvalidInputError("assignment does not cover every sample");
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        validate_sample(samples[i]);
        double r = samples[i].target - assignment[i];
        loss += samples[i].weight * r * r;
    }
    return loss;
}

}  // namespace qcal
