#include "qcal/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include "qcal/batch.hpp"
#include "qcal/io.hpp"
#include "qcal/mergetree.hpp"
#include "qcal/prefix.hpp"

namespace qcal::cli {

namespace {

std::vector<ParsedSample> load_samples(const std::string& path) {
    if (path == "-") return read_samples(std::cin);
    std::ifstream in(path);
    if (!in) throw Error("cannot open input: " + path);
    return read_samples(in);
}

std::vector<ParsedSample> load_scores(const std::string& path) {
    if (path == "-") return read_scores(std::cin);
    std::ifstream in(path);
    if (!in) throw Error("cannot open input: " + path);
    return read_scores(in);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open output: " + path);
    out << text;
    out.flush();
    if (!out) throw Error("write failed: " + path);
}

std::vector<Sample> strip_lines(const std::vector<ParsedSample>& parsed) {
    std::vector<Sample> samples;
    samples.reserve(parsed.size());
    for (const ParsedSample& ps : parsed) samples.push_back(ps.sample);
    return samples;
}

void print_summary(std::ostream& out, std::size_t n, const CalibrationMap& map,
                   double loss) {
    out << "N=" << n << " groups=" << map.size() << " loss=" << format_double(loss)
        << "\n";
}

int run_fit(const std::string& input, const std::string& grid_text,
            const std::string& output, std::ostream& out) {
    auto parsed = load_samples(input);
    if (parsed.empty()) throw NoDataError("no samples in " + input);
    auto grid = parse_grid_spec(grid_text);
    auto samples = strip_lines(parsed);
    auto map = fit_batch(samples, grid);
    write_text(output, serialize_map(to_map_file(map)));
    print_summary(out, samples.size(), map, total_loss(map, samples));
    return 0;
}

int run_stream(const std::string& input, const std::string& grid_text,
               const std::string& output, const std::string& mode,
               std::uint64_t snapshot_every, std::ostream& out) {
    auto parsed = load_samples(input);
    if (parsed.empty()) throw NoDataError("no samples in " + input);
    auto grid = parse_grid_spec(grid_text);

    auto snapshot_line = [&](std::size_t i, const CalibrationMap& map) {
        if (snapshot_every > 0 && i % snapshot_every == 0) {
            out << "snapshot " << i << " " << format_double(map.stored_loss()) << "\n";
        }
    };

    CalibrationMap final_map{grid, {}};
    if (mode == "ordered") {
        PrefixCalibrator cal(grid);
        std::size_t i = 0;
        for (const ParsedSample& ps : parsed) {
            try {
                cal.push(ps.sample);
            } catch (const OrderingError& e) {
                throw OrderingError("line " + std::to_string(ps.line) + ": " + e.what());
            }
            snapshot_line(++i, cal.snapshot());
        }
        final_map = cal.snapshot();
    } else {
        MergeTreeCalibrator cal(grid);
        std::size_t i = 0;
        for (const ParsedSample& ps : parsed) {
            cal.insert(ps.sample);
            snapshot_line(++i, cal.root_map());
        }
        final_map = cal.root_map();
    }

    write_text(output, serialize_map(to_map_file(final_map)));
    auto samples = strip_lines(parsed);
    print_summary(out, samples.size(), final_map, total_loss(final_map, samples));
    return 0;
}

int run_apply(const std::string& map_path, const std::string& input,
              const std::string& output, std::ostream& out) {
    std::ifstream map_in(map_path);
    if (!map_in) throw Error("cannot open map: " + map_path);
    auto map = to_calibration_map(parse_map(map_in));

    auto scores = load_scores(input);
    std::string lines;
    for (const ParsedSample& ps : scores) {
        lines += format_double(map.evaluate(ps.sample.score));
        lines += '\n';
    }
    if (output.empty()) {
        out << lines;
    } else {
        write_text(output, lines);
    }
    return 0;
}

double median_of(std::vector<std::uint64_t> v) {
    std::sort(v.begin(), v.end());
    std::size_t m = v.size() / 2;
    if (v.size() % 2 == 1) return static_cast<double>(v[m]);
    return (static_cast<double>(v[m - 1]) + static_cast<double>(v[m])) / 2.0;
}

double fitted_slope(const std::vector<std::array<double, 2>>& pts) {
    if (pts.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0.0;
    double my = 0.0;
    for (const auto& p : pts) {
        mx += p[0];
        my += p[1];
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double num = 0.0;
    double den = 0.0;
    for (const auto& p : pts) {
        num += (p[0] - mx) * (p[1] - my);
        den += (p[0] - mx) * (p[0] - mx);
    }
    if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return num / den;
}

int run_bench(const std::vector<std::uint64_t>& ns, const std::string& grid_text,
              std::uint64_t seed, const std::string& output, std::ostream& out) {
    auto grid = parse_grid_spec(grid_text);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::string report = "# seed=" + std::to_string(seed) + "\n";
    report += "N,depth,median_touched,max_touched,merge_work,seconds\n";

    std::vector<std::array<double, 2>> pts;
    double depth_slack = 0.0;
    for (std::uint64_t n : ns) {
        std::vector<double> scores(n);
        std::iota(scores.begin(), scores.end(), 0.0);
        std::shuffle(scores.begin(), scores.end(), rng);

        MergeTreeCalibrator cal(grid);
        std::vector<std::uint64_t> touched;
        touched.reserve(n);
        auto t0 = std::chrono::steady_clock::now();
        for (double score : scores) {
            cal.insert({score, unit(rng), 1.0});
            touched.push_back(cal.stats().last_nodes_touched);
        }
        auto t1 = std::chrono::steady_clock::now();
        double seconds = std::chrono::duration<double>(t1 - t0).count();

        auto st = cal.stats();
        std::uint64_t max_touched = *std::max_element(touched.begin(), touched.end());
        char secs[32];
        std::snprintf(secs, sizeof secs, "%.6f", seconds);
        report += std::to_string(n) + "," + std::to_string(st.depth) + "," +
                  format_double(median_of(touched)) + "," + std::to_string(max_touched) +
                  "," + std::to_string(st.merge_work) + "," + secs + "\n";

        pts.push_back({std::log2(static_cast<double>(n)),
                       static_cast<double>(max_touched)});
        double rate = std::ceil(std::log(static_cast<double>(n)) / std::log(1.5));
        depth_slack = std::max(depth_slack, static_cast<double>(st.depth) - rate);
    }

    write_text(output, report);
    out << "slope=" << format_double(fitted_slope(pts)) << " depth_slack="
        << format_double(depth_slack) << "\n";
    return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"quantized monotone calibration"};
    app.name("qcal");
    app.require_subcommand(1);

    std::string input = "-";
    std::string output;
    std::string grid_text;
    std::string mode;
    std::string map_path;
    std::uint64_t snapshot_every = 0;
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> ns;

    auto* fit = app.add_subcommand("fit", "fit a calibration map from a CSV file");
    fit->add_option("--input", input, "CSV rows score,target[,weight]; - for stdin")
        ->required();
    fit->add_option("--grid", grid_text, "levels=v1,v2,... or lattice=offset:step[:lo:hi]")
        ->required();
    fit->add_option("--output", output, "map file to write")->required();

    auto* stream = app.add_subcommand("stream", "fit incrementally, one sample per line");
    stream->add_option("--input", input, "CSV rows score,target[,weight]; - for stdin")
        ->required();
    stream->add_option("--grid", grid_text, "levels=v1,v2,... or lattice=offset:step[:lo:hi]")
        ->required();
    stream->add_option("--output", output, "map file to write")->required();
    stream->add_option("--mode", mode, "ordered (nondecreasing scores) or unordered")
        ->required()
        ->check(CLI::IsMember({"ordered", "unordered"}));
    stream->add_option("--snapshot-every", snapshot_every,
                       "print the running loss every k samples");

    auto* apply = app.add_subcommand("apply", "calibrate a stream of scores with a saved map");
    apply->add_option("map", map_path, "map file written by fit or stream")->required();
    apply->add_option("--input", input, "one score per line; - for stdin");
    apply->add_option("--output", output, "levels file to write; stdout if omitted");

    auto* bench = app.add_subcommand("bench", "measure merge-tree cost on shuffled inserts");
    bench->add_option("n", ns, "sample counts to run")
        ->required()
        ->check(CLI::PositiveNumber);
    bench->add_option("--grid", grid_text, "levels=v1,v2,... or lattice=offset:step[:lo:hi]")
        ->required();
    bench->add_option("--seed", seed, "generator seed, embedded in the report");
    bench->add_option("--output", output, "report CSV to write")->required();

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("qcal");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (fit->parsed()) return run_fit(input, grid_text, output, out);
        if (stream->parsed()) {
            return run_stream(input, grid_text, output, mode, snapshot_every, out);
        }
        if (apply->parsed()) return run_apply(map_path, input, output, out);
        if (bench->parsed()) return run_bench(ns, grid_text, seed, output, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace qcal::cli
