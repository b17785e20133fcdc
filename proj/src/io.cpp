#include "qcal/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <sstream>
#include <system_error>

namespace qcal {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    while (true) {
        auto pos = s.find(sep);
        if (pos == std::string_view::npos) {
            out.push_back(s);
            return out;
        }
        out.push_back(s.substr(0, pos));
        s.remove_prefix(pos + 1);
    }
}

[[noreturn]] void fail_line(std::uint64_t line, const std::string& what) {
    throw FormatError("line " + std::to_string(line) + ": " + what);
}

bool skippable(std::string_view trimmed) {
    return trimmed.empty() || trimmed.front() == '#';
}

Sample sample_from_fields(const std::vector<std::string_view>& fields) {
    Sample s;
    s.score = parse_double(trim(fields[0]));
    s.target = parse_double(trim(fields[1]));
    s.weight = fields.size() == 3 ? parse_double(trim(fields[2])) : 1.0;
    validate_sample(s);
    return s;
}

}  // namespace

std::string format_double(double x) {
    std::array<char, 64> buf;
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view text) {
    double value = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || text.empty()) {
        throw FormatError("not a number: '" + std::string(text) + "'");
    }
    return value;
}

std::vector<ParsedSample> read_samples(std::istream& in) {
    std::vector<ParsedSample> out;
    std::string raw;
    std::uint64_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view body = trim(raw);
        if (skippable(body)) continue;
        auto fields = split(body, ',');
        if (fields.size() != 2 && fields.size() != 3) {
            fail_line(line, "expected score,target[,weight]");
        }
        try {
            out.push_back({sample_from_fields(fields), line});
        } catch (const FormatError& e) {
            fail_line(line, e.what());
        } catch (const InvalidInputError& e) {
            fail_line(line, e.what());
        }
    }
    return out;
}

std::vector<ParsedSample> read_scores(std::istream& in) {
    std::vector<ParsedSample> out;
    std::string raw;
    std::uint64_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view body = trim(raw);
        if (skippable(body)) continue;
        try {
            double score = parse_double(body);
            if (!std::isfinite(score)) throw FormatError("score must be finite");
            out.push_back({Sample{score, 0.0, 1.0}, line});
        } catch (const FormatError& e) {
            fail_line(line, e.what());
        }
    }
    return out;
}

QuantizationGrid parse_grid_spec(const std::string& spec) {
    std::string_view body = trim(spec);
    auto eq = body.find('=');
    if (eq == std::string_view::npos) {
        throw FormatError("grid spec must be levels=v1,v2,... or lattice=offset:step[:lo:hi]");
    }
    std::string_view key = trim(body.substr(0, eq));
    std::string_view rest = body.substr(eq + 1);
    try {
        if (key == "levels") {
            std::vector<double> levels;
            for (auto field : split(rest, ',')) {
                levels.push_back(parse_double(trim(field)));
            }
            return QuantizationGrid::explicit_levels(std::move(levels));
        }
        if (key == "lattice") {
            auto parts = split(rest, ':');
            if (parts.size() != 2 && parts.size() != 4) {
                throw FormatError("lattice spec takes offset:step or offset:step:lo:hi");
            }
            double offset = parse_double(trim(parts[0]));
            double step = parse_double(trim(parts[1]));
            if (parts.size() == 2) return QuantizationGrid::lattice(offset, step);
            double lo = parse_double(trim(parts[2]));
            double hi = parse_double(trim(parts[3]));
            return QuantizationGrid::lattice(offset, step, lo, hi);
        }
    } catch (const InvalidInputError& e) {
        throw FormatError(std::string("grid spec: ") + e.what());
    } catch (const FormatError& e) {
        throw FormatError(std::string("grid spec: ") + e.what());
    }
    throw FormatError("unknown grid kind '" + std::string(key) + "'");
}

std::string grid_spec(const QuantizationGrid& grid) {
    if (grid.kind() == QuantizationGrid::Kind::ExplicitLevels) {
        std::string out = "levels=";
        bool first = true;
        for (double l : grid.levels()) {
            if (!first) out += ',';
            out += format_double(l);
            first = false;
        }
        return out;
    }
    std::string out = "lattice=" + format_double(grid.offset()) + ":" + format_double(grid.step());
    if (grid.lower_bound() && grid.upper_bound()) {
        out += ":" + format_double(*grid.lower_bound()) + ":" + format_double(*grid.upper_bound());
    }
    return out;
}

MapFile to_map_file(const CalibrationMap& map) {
    MapFile mf;
    mf.grid = grid_spec(map.grid);
    mf.records.reserve(map.blocks.size());
    for (const Block& b : map.blocks) {
        mf.records.push_back({b.score_min, b.score_max, b.level, b.weight()});
    }
    return mf;
}

std::string serialize_map(const MapFile& mf) {
    std::string out = "qcal-map " + std::to_string(mf.version) + "\n";
    out += "grid " + mf.grid + "\n";
    out += "blocks " + std::to_string(mf.records.size()) + "\n";
    for (const MapRecord& r : mf.records) {
        out += "block " + format_double(r.score_min) + " " + format_double(r.score_max) +
               " " + format_double(r.level) + " " + format_double(r.sum_w) + "\n";
    }
    return out;
}

namespace {

void validate_records(const MapFile& mf, const QuantizationGrid& grid) {
    const MapRecord* prev = nullptr;
    for (const MapRecord& r : mf.records) {
        if (!std::isfinite(r.score_min) || !std::isfinite(r.score_max) ||
            !std::isfinite(r.level) || !std::isfinite(r.sum_w)) {
            throw FormatError("map record has a non-finite field");
        }
        if (r.sum_w <= 0.0) throw FormatError("map record weight must be positive");
        if (r.score_min > r.score_max) throw FormatError("map record extent is reversed");
        if (grid.project(r.level) != r.level) {
            throw FormatError("map level " + format_double(r.level) + " is not on the grid");
        }
        if (prev) {
            if (!(prev->score_max < r.score_min)) {
                throw FormatError("map extents must be disjoint and ascending");
            }
            if (!(prev->level < r.level)) {
                throw FormatError("map levels must be strictly increasing");
            }
        }
        prev = &r;
    }
}

}  // namespace

MapFile parse_map(std::istream& in) {
    MapFile mf;
    std::string raw;
    std::uint64_t line = 0;

    auto next_line = [&](const char* missing) -> std::string_view {
        if (!std::getline(in, raw)) throw FormatError(std::string("truncated map: missing ") + missing);
        ++line;
        return trim(raw);
    };

    auto header = next_line("header");
    if (!header.starts_with("qcal-map ")) fail_line(line, "expected 'qcal-map <version>' header");
    {
        auto tag = trim(header.substr(9));
        int v = 0;
        auto res = std::from_chars(tag.data(), tag.data() + tag.size(), v);
        if (res.ec != std::errc{} || res.ptr != tag.data() + tag.size()) {
            fail_line(line, "bad version tag");
        }
        if (v != 1) fail_line(line, "unsupported map version " + std::to_string(v));
        mf.version = v;
    }

    auto grid_line = next_line("grid line");
    if (!grid_line.starts_with("grid ")) fail_line(line, "expected 'grid <spec>'");
    mf.grid = std::string(trim(grid_line.substr(5)));
    QuantizationGrid grid = parse_grid_spec(mf.grid);

    auto count_line = next_line("block count");
    if (!count_line.starts_with("blocks ")) fail_line(line, "expected 'blocks <count>'");
    std::uint64_t count = 0;
    {
        auto tag = trim(count_line.substr(7));
        auto res = std::from_chars(tag.data(), tag.data() + tag.size(), count);
        if (res.ec != std::errc{} || res.ptr != tag.data() + tag.size()) {
            fail_line(line, "bad block count");
        }
    }

    for (std::uint64_t i = 0; i < count; ++i) {
        auto body = next_line("block record");
        if (!body.starts_with("block ")) fail_line(line, "expected 'block <min> <max> <level> <w>'");
        std::vector<std::string_view> fields;
        for (auto f : split(body.substr(6), ' ')) {
            if (!trim(f).empty()) fields.push_back(trim(f));
        }
        if (fields.size() != 4) fail_line(line, "block record takes four fields");
        try {
            mf.records.push_back({parse_double(fields[0]), parse_double(fields[1]),
                                  parse_double(fields[2]), parse_double(fields[3])});
        } catch (const FormatError& e) {
            fail_line(line, e.what());
        }
    }

    while (std::getline(in, raw)) {
        ++line;
        if (!skippable(trim(raw))) fail_line(line, "trailing content after block records");
    }

    try {
        validate_records(mf, grid);
    } catch (const FormatError& e) {
        throw FormatError(std::string("invalid map: ") + e.what());
    }
    return mf;
}

CalibrationMap to_calibration_map(const MapFile& mf) {
    QuantizationGrid grid = parse_grid_spec(mf.grid);
    validate_records(mf, grid);
    CalibrationMap map{grid, {}};
    map.blocks.reserve(mf.records.size());
    for (const MapRecord& r : mf.records) {
        Block b;
        b.sum_w = ExactSum(r.sum_w);
        b.sum_wy = ExactSum(r.level * r.sum_w);
        b.sum_wyy = r.level * r.level * r.sum_w;
        b.level = r.level;
        b.score_min = r.score_min;
        b.score_max = r.score_max;
        map.blocks.push_back(b);
    }
    return map;
}

}  // namespace qcal
