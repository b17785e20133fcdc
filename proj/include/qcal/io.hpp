#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "qcal/core.hpp"

namespace qcal {

/// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double x);

/// Strict parse of a full token (no stray characters); FormatError otherwise.
double parse_double(std::string_view text);

/// A sample together with the 1-based line it came from, so later stages can
/// point at the offending row.
struct ParsedSample {
    Sample sample;
    std::uint64_t line = 0;
};

/// Reads CSV rows `score,target[,weight]` with weight defaulting to 1.
/// Blank lines and lines starting with '#' are skipped. Malformed or invalid
/// rows throw FormatError naming the line.
std::vector<ParsedSample> read_samples(std::istream& in);

/// Reads one score per line, same comment and blank-line rules.
std::vector<ParsedSample> read_scores(std::istream& in);

/// Grid micro-grammar: `levels=v1,v2,...` or `lattice=offset:step[:lo:hi]`.
QuantizationGrid parse_grid_spec(const std::string& spec);

/// Canonical spec text for a grid; parse_grid_spec round-trips it.
std::string grid_spec(const QuantizationGrid& grid);

/// One block of a serialized map: what evaluation needs plus the pooled
/// weight.
struct MapRecord {
    double score_min = 0.0;
    double score_max = 0.0;
    double level = 0.0;
    double sum_w = 0.0;

    friend bool operator==(const MapRecord&, const MapRecord&) = default;
};

/// Serialized calibration map: version tag, grid spec text and the block
/// records in score order.
struct MapFile {
    int version = 1;
    std::string grid;
    std::vector<MapRecord> records;

    friend bool operator==(const MapFile&, const MapFile&) = default;
};

MapFile to_map_file(const CalibrationMap& map);

/// Canonical text form; serialize(parse(text)) reproduces text byte for byte.
std::string serialize_map(const MapFile& mf);

/// Parses and fully validates a serialized map; FormatError on anything
/// corrupt, truncated or inconsistent.
MapFile parse_map(std::istream& in);

/// Rebuilds an evaluable map. Pooled targets collapse onto each record's
/// level, so extents, levels and weights survive; per-block residual history
/// is not stored in the file.
CalibrationMap to_calibration_map(const MapFile& mf);

}  // namespace qcal
