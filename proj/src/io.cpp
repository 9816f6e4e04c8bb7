#include "vsnn/io.hpp"

#include <charconv>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "vsnn/config.hpp"

namespace vsnn {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt(double v) {
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create " + path);
    return out;
}

void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw IoError("failed writing " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// Splits into lines, dropping a trailing '\r' and skipping blank lines.
std::vector<std::string> read_lines(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

template <typename T>
T parse_number(const std::string& field, const std::string& where) {
    T value{};
    const char* first = field.data();
    const char* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw ParseError(where + ": expected a number, got \"" + field + "\"");
    return value;
}

double to_double(const std::string& field, const std::string& where) {
    return parse_number<double>(field, where);
}

long long to_int(const std::string& field, const std::string& where) {
    return parse_number<long long>(field, where);
}

}  // namespace

void write_trace_csv(const std::string& path, const IntensityTrace& trace) {
    std::ofstream out = open_out(path);
    out << "time_s,power_au\n";
    for (std::size_t i = 0; i < trace.samples.size(); ++i)
        out << fmt(trace.time_at(i)) << ',' << fmt(trace.samples[i]) << '\n';
    finish(out, path);
}

void write_waveform_csv(const std::string& path, const DriveWaveform& waveform) {
    std::ofstream out = open_out(path);
    out << "sample_index,level\n";
    for (std::size_t i = 0; i < waveform.samples.size(); ++i)
        out << i << ',' << fmt(waveform.samples[i]) << '\n';
    finish(out, path);
}

void write_waveform_sidecar(const std::string& path, const DriveWaveform& waveform) {
    ordered_json j;
    j["node_duration"] = waveform.node_duration;
    j["sample_rate"] = waveform.sample_rate;
    j["gap_duration"] = waveform.gap_duration;
    j["n_nodes"] = waveform.n_nodes;
    j["scale_min"] = waveform.scale_min;
    j["scale_max"] = waveform.scale_max;
    j["n_samples"] = waveform.samples.size();
    ordered_json layout = ordered_json::array();
    for (const auto& segment : waveform.layout.segments) {
        ordered_json s;
        s["point_id"] = segment.point_id;
        s["start_sample"] = segment.start_sample;
        s["end_sample"] = segment.end_sample;
        layout.push_back(s);
    }
    j["layout"] = layout;

    std::ofstream out = open_out(path);
    out << j.dump(2) << '\n';
    finish(out, path);
}

DriveWaveform read_waveform(const std::string& csv_path, const std::string& sidecar_path) {
    DriveWaveform waveform;

    ordered_json j;
    try {
        j = ordered_json::parse(read_file(sidecar_path));
        waveform.node_duration = j.at("node_duration").get<double>();
        waveform.sample_rate = j.at("sample_rate").get<double>();
        waveform.gap_duration = j.at("gap_duration").get<double>();
        waveform.n_nodes = j.at("n_nodes").get<int>();
        waveform.scale_min = j.at("scale_min").get<double>();
        waveform.scale_max = j.at("scale_max").get<double>();
        for (const auto& s : j.at("layout")) {
            WaveformLayout::Segment segment;
            segment.point_id = s.at("point_id").get<int>();
            segment.start_sample = s.at("start_sample").get<std::int64_t>();
            segment.end_sample = s.at("end_sample").get<std::int64_t>();
            waveform.layout.segments.push_back(segment);
        }
    } catch (const ordered_json::exception& e) {
        throw ParseError(sidecar_path + ": " + e.what());
    }
    if (waveform.sample_rate <= 0.0)
        throw ParseError(sidecar_path + ": sample_rate must be positive");
    if (waveform.n_nodes <= 0) throw ParseError(sidecar_path + ": n_nodes must be positive");

    const std::vector<std::string> lines = read_lines(csv_path);
    if (lines.empty() || lines[0] != "sample_index,level")
        throw ParseError(csv_path + ": expected header sample_index,level");
    waveform.samples.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string where = csv_path + ":" + std::to_string(i + 1);
        const std::vector<std::string> fields = split_csv(lines[i]);
        if (fields.size() != 2) throw ParseError(where + ": expected 2 fields");
        if (to_int(fields[0], where) != static_cast<long long>(i - 1))
            throw ParseError(where + ": sample indices must count up from 0");
        waveform.samples.push_back(to_double(fields[1], where));
    }

    if (j.at("n_samples").get<std::size_t>() != waveform.samples.size())
        throw ParseError(csv_path + ": sample count does not match the sidecar");
    std::int64_t previous_end = 0;
    for (const auto& segment : waveform.layout.segments) {
        if (segment.start_sample < previous_end || segment.end_sample <= segment.start_sample ||
            segment.end_sample > static_cast<std::int64_t>(waveform.samples.size()))
            throw ParseError(sidecar_path + ": layout segments must be ordered and in range");
        previous_end = segment.end_sample;
    }
    return waveform;
}

void write_raster_csv(const std::string& path, const SpikeRaster& raster) {
    std::ofstream out = open_out(path);
    out << "point_id";
    for (int node = 0; node < raster.n_nodes; ++node) out << ",node_" << node;
    out << '\n';
    for (int point = 0; point < raster.n_points; ++point) {
        out << raster.point_ids[static_cast<std::size_t>(point)];
        for (int node = 0; node < raster.n_nodes; ++node)
            out << ',' << static_cast<int>(raster.at(point, node));
        out << '\n';
    }
    finish(out, path);
}

void write_weights_csv(const std::string& path, const ReadoutWeights& weights) {
    std::ofstream out = open_out(path);
    const TrainingMeta& meta = weights.meta;
    out << "# seed=" << meta.seed << " rank=" << meta.rank << " residual=" << fmt(meta.residual)
        << " degenerate_labels=" << (meta.degenerate_labels ? 1 : 0) << '\n';
    out << "# training_indices=";
    for (std::size_t i = 0; i < meta.training_indices.size(); ++i)
        out << (i ? ";" : "") << meta.training_indices[i];
    out << '\n';
    out << "node";
    for (const auto& name : kSpeciesNames) out << ',' << name;
    out << '\n';
    for (Eigen::Index node = 0; node < weights.entries.rows(); ++node) {
        out << node;
        for (Eigen::Index cls = 0; cls < weights.entries.cols(); ++cls)
            out << ',' << fmt(weights.entries(node, cls));
        out << '\n';
    }
    finish(out, path);
}

ReadoutWeights read_weights_csv(const std::string& path) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.size() < 3) throw ParseError(path + ": truncated weights file");

    ReadoutWeights weights;
    {
        unsigned long long seed = 0;
        int rank = 0, degenerate = 0;
        double residual = 0.0;
        if (std::sscanf(lines[0].c_str(), "# seed=%llu rank=%d residual=%lg degenerate_labels=%d",
                        &seed, &rank, &residual, &degenerate) != 4)
            throw ParseError(path + ":1: malformed metadata line");
        weights.meta.seed = seed;
        weights.meta.rank = rank;
        weights.meta.residual = residual;
        weights.meta.degenerate_labels = degenerate != 0;
    }
    {
        const std::string prefix = "# training_indices=";
        if (lines[1].rfind(prefix, 0) != 0)
            throw ParseError(path + ":2: expected training_indices line");
        const std::string list = lines[1].substr(prefix.size());
        std::size_t start = 0;
        while (start < list.size()) {
            std::size_t sep = list.find(';', start);
            if (sep == std::string::npos) sep = list.size();
            weights.meta.training_indices.push_back(static_cast<int>(
                to_int(list.substr(start, sep - start), path + ":2")));
            start = sep + 1;
        }
    }
    {
        std::string expected = "node";
        for (const auto& name : kSpeciesNames) expected += "," + std::string(name);
        if (lines[2] != expected) throw ParseError(path + ":3: unexpected column header");
    }

    const std::size_t n_nodes = lines.size() - 3;
    weights.entries.resize(static_cast<Eigen::Index>(n_nodes), kNumClasses);
    for (std::size_t row = 0; row < n_nodes; ++row) {
        const std::string where = path + ":" + std::to_string(row + 4);
        const std::vector<std::string> fields = split_csv(lines[row + 3]);
        if (fields.size() != 1 + kNumClasses)
            throw ParseError(where + ": expected " + std::to_string(1 + kNumClasses) + " fields");
        if (to_int(fields[0], where) != static_cast<long long>(row))
            throw ParseError(where + ": node indices must count up from 0");
        for (int cls = 0; cls < kNumClasses; ++cls)
            weights.entries(static_cast<Eigen::Index>(row), cls) =
                to_double(fields[static_cast<std::size_t>(cls + 1)], where);
    }
    return weights;
}

void write_confusion_csv(const std::string& path, const ConfusionMatrix& confusion) {
    std::ofstream out = open_out(path);
    out << "true_class";
    for (const auto& name : kSpeciesNames) out << ',' << name;
    out << '\n';
    for (std::size_t row = 0; row < 3; ++row) {
        out << kSpeciesNames[row];
        for (std::size_t col = 0; col < 3; ++col) out << ',' << confusion.counts[row][col];
        out << '\n';
    }
    finish(out, path);
}

void write_error_curve_csv(const std::string& path, const ErrorCurve& curve) {
    std::ofstream out = open_out(path);
    out << "run";
    for (int size : curve.training_sizes) out << ',' << size;
    out << '\n';
    for (std::size_t run = 0; run < curve.per_run_errors.size(); ++run) {
        out << run;
        for (double error : curve.per_run_errors[run]) out << ',' << fmt(error);
        out << '\n';
    }
    out << "mean";
    for (double error : curve.mean_error) out << ',' << fmt(error);
    out << '\n';
    finish(out, path);
}

void write_report_json(const std::string& path, const ExperimentReport& report,
                       const IrisDataset& dataset) {
    ordered_json j;
    j["accuracy"] = report.accuracy;
    j["threshold"] = report.threshold;
    j["threshold_was_auto"] = report.threshold_was_auto;
    j["waveform_duration_s"] = report.waveform_duration;
    j["seed"] = report.seed;
    j["n_train"] = report.split.train.size();
    j["n_test"] = report.split.test.size();
    j["readout_rank"] = report.weights.meta.rank;
    j["readout_residual"] = report.weights.meta.residual;

    ordered_json confusion;
    for (std::size_t row = 0; row < 3; ++row)
        confusion[std::string(kSpeciesNames[row])] = report.confusion.counts[row];
    j["confusion"] = confusion;

    ordered_json tests = ordered_json::array();
    for (std::size_t i = 0; i < report.split.test.size(); ++i) {
        const int index = report.split.test[i];
        ordered_json t;
        t["index"] = index;
        t["truth"] = kSpeciesNames[static_cast<std::size_t>(
            dataset.labels[static_cast<std::size_t>(index)] - 1)];
        t["predicted"] =
            kSpeciesNames[static_cast<std::size_t>(report.predictions[i] - 1)];
        tests.push_back(t);
    }
    j["test_points"] = tests;

    std::ofstream out = open_out(path);
    out << j.dump(2) << '\n';
    finish(out, path);
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
    ordered_json j;
    j["tool_version"] = manifest.tool_version;
    j["command"] = manifest.command;
    std::string created = manifest.created_utc;
    if (created.empty()) {
        char buffer[32];
        const std::time_t now = std::time(nullptr);
        std::tm tm_utc{};
        gmtime_r(&now, &tm_utc);
        std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
        created = buffer;
    }
    j["created_utc"] = created;
    j["config"] = ordered_json::parse(config_to_json_text(manifest.config));
    ordered_json artifacts;
    for (const auto& [name, artifact_path] : manifest.artifacts) artifacts[name] = artifact_path;
    j["artifacts"] = artifacts;

    std::ofstream out = open_out(path);
    out << j.dump(2) << '\n';
    finish(out, path);
}

}  // namespace vsnn
