#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcal {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Rejected sample or malformed argument.
struct InvalidInputError : Error {
    using Error::Error;
};

/// Operation needs at least one sample.
struct NoDataError : Error {
    using Error::Error;
};

/// Operation needs a non-empty calibration map.
struct NoModelError : Error {
    using Error::Error;
};

/// Ordered-mode push received a score below the previous one.
struct OrderingError : Error {
    using Error::Error;
};

/// Malformed serialized map or report.
struct FormatError : Error {
    using Error::Error;
};

/// Requested computation exceeds a resource guard.
struct TooLargeError : Error {
    using Error::Error;
};

/// Internal structural precondition violated (non-adjacent summaries, ...).
struct StructureError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Compensated accumulation
// ---------------------------------------------------------------------------

/// Double-double accumulator for weighted sums.
///
/// Block statistics are built by merging sub-blocks in whatever order the
/// calibrator at hand dictates, and the batch, ordered and unordered routes
/// merge in different orders. Keeping ~106 bits per sum makes value() the
/// correctly rounded total independent of association, so all routes agree
/// bit-for-bit on every derived quantity.
struct ExactSum {
    double hi = 0.0;
    double lo = 0.0;

    ExactSum() = default;
    explicit ExactSum(double x) : hi(x) {}

    void add(double x) {
        double s = hi + x;
        double bv = s - hi;
        double err = (hi - (s - bv)) + (x - bv);
        err += lo;
        hi = s + err;
        lo = err - (hi - s);
    }

    void add(const ExactSum& o) {
        double s = hi + o.hi;
        double bv = s - hi;
        double err = (hi - (s - bv)) + (o.hi - bv);
        err += lo + o.lo;
        hi = s + err;
        lo = err - (hi - s);
    }

    /// Correctly rounded total.
    double value() const { return hi; }

    /// Equality of the rounded totals. The compensation tail is allowed to
    /// differ between association orders; every observable decision and every
    /// serialized byte depends on value() alone.
    friend bool operator==(const ExactSum& a, const ExactSum& b) {
        return a.hi == b.hi;
    }
};

// ---------------------------------------------------------------------------
// Samples
// ---------------------------------------------------------------------------

/// One observation: an uncalibrated score, its target value and a positive
/// weight.
struct Sample {
    double score = 0.0;
    double target = 0.0;
    double weight = 1.0;
};

/// Throws InvalidInputError unless all fields are finite and weight > 0.
void validate_sample(const Sample& s);

// ---------------------------------------------------------------------------
// Quantization grids
// ---------------------------------------------------------------------------

/// The admissible output levels: either an explicit strictly increasing list
/// or a uniform lattice offset + k*step with optional level bounds.
class QuantizationGrid {
public:
    enum class Kind { ExplicitLevels, UniformLattice };

    static QuantizationGrid explicit_levels(std::vector<double> levels);
    static QuantizationGrid lattice(double offset, double step,
                                    std::optional<double> lower = std::nullopt,
                                    std::optional<double> upper = std::nullopt);

    Kind kind() const { return kind_; }

    /// Nearest level to value; exact ties between adjacent levels resolve to
    /// the lower level, values past the grid's range clamp to the extreme
    /// level. Monotone nondecreasing in value.
    double project(double value) const;

    /// Number of levels, when finite.
    std::optional<std::uint64_t> level_count() const;

    /// All levels within [lo, hi], ascending. Guarded against enormous
    /// enumerations (TooLargeError).
    std::vector<double> levels_in_range(double lo, double hi,
                                        std::uint64_t guard = 10'000'000) const;

    // Explicit-grid accessors.
    const std::vector<double>& levels() const { return levels_; }

    // Lattice accessors.
    double offset() const { return offset_; }
    double step() const { return step_; }
    std::optional<double> lower_bound() const { return lower_; }
    std::optional<double> upper_bound() const { return upper_; }

    friend bool operator==(const QuantizationGrid& a, const QuantizationGrid& b);

private:
    QuantizationGrid() = default;

    double lattice_level(double k) const;

    Kind kind_ = Kind::ExplicitLevels;
    std::vector<double> levels_;
    double offset_ = 0.0;
    double step_ = 1.0;
    std::optional<double> lower_;
    std::optional<double> upper_;
    // Index range induced by the bounds; lattice levels are offset + k*step
    // for k in [kmin_, kmax_].
    std::optional<double> kmin_;
    std::optional<double> kmax_;
};

// ---------------------------------------------------------------------------
// Blocks
// ---------------------------------------------------------------------------

/// A pooled group of consecutive samples: weighted sums, the projected level
/// of the pooled mean and the score extent covered by the group.
struct Block {
    ExactSum sum_wy;       // sum of weight*target
    ExactSum sum_w;        // sum of weight, positive
    double sum_wyy = 0.0;  // sum of weight*target^2, for residual loss
    double level = 0.0;
    double score_min = 0.0;
    double score_max = 0.0;

    double weight() const { return sum_w.value(); }
    double weighted_target() const { return sum_wy.value(); }
    double mean() const { return sum_wy.value() / sum_w.value(); }

    /// Weighted squared error of the group's samples against its level.
    double residual_loss() const;

    /// Bitwise equality on the observable fields: rounded sums, level and
    /// extent. sum_wyy is excluded; it is a diagnostic whose last bits depend
    /// on merge order.
    friend bool operator==(const Block& a, const Block& b);
};

/// Single-sample block; validates the sample.
Block make_block(const Sample& s, const QuantizationGrid& grid);

/// True iff mean(a) >= mean(b), decided by cross-multiplication of the
/// weighted sums so no division is involved.
bool mean_violates(const Block& a, const Block& b);

/// Pool two adjacent blocks (a precedes b); the level is re-projected from
/// the merged mean.
Block merge_blocks(const Block& a, const Block& b, const QuantizationGrid& grid);

// ---------------------------------------------------------------------------
// Calibration maps
// ---------------------------------------------------------------------------

/// The fitted staircase: blocks with strictly increasing levels and ordered,
/// non-overlapping score extents.
struct CalibrationMap {
    QuantizationGrid grid;
    std::vector<Block> blocks;

    bool empty() const { return blocks.empty(); }
    std::size_t size() const { return blocks.size(); }

    /// Level for an arbitrary score. Inside a block's extent: that block's
    /// level. In the gap between two blocks: the nearer block by midpoint,
    /// ties going right. Outside all extents: the nearest extreme level.
    double evaluate(double score) const;

    /// Training loss reconstructed from block statistics alone.
    double stored_loss() const;
};

/// Weighted squared error of samples under the map's staircase.
double total_loss(const CalibrationMap& map, std::span<const Sample> samples);

/// Weighted squared error of samples under a per-sample level assignment.
double total_loss(std::span<const double> assignment, std::span<const Sample> samples);

}  // namespace qcal
