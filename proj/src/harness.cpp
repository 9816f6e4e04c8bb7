#include "vsnn/harness.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "vsnn/rng.hpp"

namespace vsnn {

namespace {

// Stream tags for deriving independent sub-seeds from the experiment seed.
constexpr std::uint64_t kMaskTag = 0x6d61736bULL;   // input mask entries
constexpr std::uint64_t kNoiseTag = 0x6e6f6973ULL;  // laser noise stream
constexpr std::uint64_t kSplitTag = 0x73706c74ULL;  // train/test selection
constexpr std::uint64_t kSweepTag = 0x73776570ULL;  // per-run seeds of a size sweep

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

double parse_double(const std::string& field, const std::string& where) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw ParseError(where + ": expected a number, got \"" + field + "\"");
    return value;
}

int species_index(std::string field, const std::string& where) {
    std::transform(field.begin(), field.end(), field.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (field.rfind("iris-", 0) == 0) field = field.substr(5);
    for (int i = 0; i < 3; ++i)
        if (field == kSpeciesNames[static_cast<std::size_t>(i)]) return i + 1;
    throw ParseError(where + ": unknown species \"" + field + "\"");
}

void check_dataset(const Config& config, const IrisDataset& dataset) {
    config.validate();
    if (dataset.n_points() == 0) throw EmptyInput("experiment: dataset has no points");
    for (int label : dataset.labels)
        if (label < 1 || label > kNumClasses)
            throw InvalidDimension("experiment: class label " + std::to_string(label) +
                                   " outside 1.." + std::to_string(kNumClasses));
}

// Waveform feeding order: flowers grouped by species (stable within a
// class) so the raster and any exported trace show contiguous class bands.
std::vector<int> class_grouped_order(const IrisDataset& dataset) {
    std::vector<int> order(static_cast<std::size_t>(dataset.n_points()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return dataset.labels[static_cast<std::size_t>(a)] <
               dataset.labels[static_cast<std::size_t>(b)];
    });
    return order;
}

std::vector<NodeSequence> masked_sequences(const MaskMatrix& mask, const IrisDataset& dataset,
                                           const std::vector<int>& order) {
    std::vector<NodeSequence> sequences;
    sequences.reserve(order.size());
    for (int idx : order)
        sequences.push_back(mask_datapoint(mask, dataset.points[static_cast<std::size_t>(idx)]));
    return sequences;
}

SimulateOptions simulate_options(const Config& config) {
    SimulateOptions opts;
    opts.dt = config.simulation.dt;
    opts.trace_sample_period = config.simulation.trace_sample_period;
    opts.mapping = config.drive;
    opts.readout = config.simulation.readout;
    opts.seed = mix_seed(config.experiment.seed, kNoiseTag);
    return opts;
}

}  // namespace

MaskMatrix experiment_mask(const Config& config) {
    return build_mask(mix_seed(config.experiment.seed, kMaskTag), config.pipeline.n_nodes, 4,
                      config.pipeline.mask_distribution);
}

RasterBundle simulate_raster(const Config& config, const IrisDataset& dataset) {
    check_dataset(config, dataset);

    const MaskMatrix mask = experiment_mask(config);
    const std::vector<int> order = class_grouped_order(dataset);
    const std::vector<NodeSequence> sequences = masked_sequences(mask, dataset, order);

    const DriveWaveform drive =
        synthesize_waveform(sequences, order, config.pipeline.node_duration,
                            config.pipeline.sample_rate, config.pipeline.gap_duration,
                            config.pipeline.scale);

    const SimulateOptions opts = simulate_options(config);
    const IntensityTrace trace = config.experiment.simulation_mode == SimulationMode::continuous
                                     ? simulate(config.laser, drive, opts)
                                     : simulate_per_point(config.laser, drive, opts);

    RasterBundle bundle;
    bundle.threshold_was_auto = config.detector.threshold <= 0.0;
    bundle.threshold = bundle.threshold_was_auto
                           ? auto_threshold(trace, config.detector.iqr_factor)
                           : config.detector.threshold;
    bundle.waveform_duration = drive.duration();

    const SpikeRaster by_segment =
        bin_and_threshold(trace, drive, bundle.threshold, config.detector.latency_offset);

    // Re-order rows from waveform segment order back to dataset order.
    SpikeRaster& raster = bundle.raster;
    raster = by_segment;
    raster.point_ids.assign(static_cast<std::size_t>(by_segment.n_points), 0);
    std::iota(raster.point_ids.begin(), raster.point_ids.end(), 0);
    for (int row = 0; row < by_segment.n_points; ++row) {
        const int dataset_index = by_segment.point_ids[static_cast<std::size_t>(row)];
        for (int node = 0; node < by_segment.n_nodes; ++node)
            raster.at(dataset_index, node) = by_segment.at(row, node);
    }
    return bundle;
}

DriveWaveform single_point_waveform(const Config& config, const IrisDataset& dataset, int index) {
    check_dataset(config, dataset);
    if (index < 0 || index >= dataset.n_points())
        throw InvalidDimension("point index " + std::to_string(index) + " outside 0.." +
                               std::to_string(dataset.n_points() - 1));

    const MaskMatrix mask = experiment_mask(config);
    AffineScale scale = config.pipeline.scale;
    if (scale.mode != AffineScale::Mode::fixed) {
        // Pin the window to the one the full waveform would resolve, so this
        // one segment is normalized exactly as it would be inside it. The
        // full-mode window covers every value, so the fixed-mode clamp
        // stays a no-op for it.
        const std::vector<NodeSequence> all =
            masked_sequences(mask, dataset, class_grouped_order(dataset));
        const auto [lo, hi] = resolve_scale_window(all, scale);
        scale.mode = AffineScale::Mode::fixed;
        scale.min = lo;
        scale.max = hi;
    }

    DriveWaveform wf = synthesize_waveform({mask_datapoint(mask, dataset.points[static_cast<
                                               std::size_t>(index)])},
                                           {index}, config.pipeline.node_duration,
                                           config.pipeline.sample_rate,
                                           config.pipeline.gap_duration, scale);
    wf.samples.insert(wf.samples.end(), static_cast<std::size_t>(wf.gap_samples()), 0.0);
    return wf;
}

namespace {

Eigen::VectorXd raster_row(const SpikeRaster& raster, int row) {
    Eigen::VectorXd v(raster.n_nodes);
    for (int node = 0; node < raster.n_nodes; ++node)
        v(node) = static_cast<double>(raster.at(row, node));
    return v;
}

struct Evaluation {
    ReadoutWeights weights;
    ConfusionMatrix confusion;
    std::vector<int> predictions;
};

Evaluation evaluate_split(const SpikeRaster& raster, const std::vector<int>& labels,
                          const Split& split, std::uint64_t split_seed) {
    Eigen::MatrixXd S(static_cast<Eigen::Index>(split.train.size()), raster.n_nodes);
    std::vector<int> train_labels;
    train_labels.reserve(split.train.size());
    for (std::size_t r = 0; r < split.train.size(); ++r) {
        S.row(static_cast<Eigen::Index>(r)) = raster_row(raster, split.train[r]).transpose();
        train_labels.push_back(labels[static_cast<std::size_t>(split.train[r])]);
    }

    Evaluation eval;
    eval.weights = train(S, one_hot_labels(train_labels));
    eval.weights.meta.seed = split_seed;
    eval.weights.meta.training_indices = split.train;

    eval.predictions.reserve(split.test.size());
    for (int test_index : split.test) {
        const Prediction p = predict(eval.weights, raster_row(raster, test_index));
        eval.predictions.push_back(p.class_index);
        const int truth = labels[static_cast<std::size_t>(test_index)];
        ++eval.confusion.counts[static_cast<std::size_t>(truth - 1)]
                              [static_cast<std::size_t>(p.class_index - 1)];
    }
    return eval;
}

DistanceReport distance_report_impl(const SpikeRaster& raster, const std::vector<int>& labels,
                                    bool parallel) {
    const int n = raster.n_points;
    if (static_cast<int>(labels.size()) != n)
        throw DimensionMismatch("distance report: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(n) + " raster rows");
    for (int label : labels)
        if (label < 1 || label > kNumClasses)
            throw InvalidDimension("distance report: class label " + std::to_string(label) +
                                   " outside 1.." + std::to_string(kNumClasses));

    // Integer accumulators keep the result independent of summation order,
    // so the threaded variant is bit-identical to the serial one.
    std::uint64_t bit_sums[3][3] = {};
    std::uint64_t pair_counts[3][3] = {};

#pragma omp parallel if (parallel)
    {
        std::uint64_t local_bits[3][3] = {};
        std::uint64_t local_pairs[3][3] = {};
#pragma omp for schedule(dynamic, 4) nowait
        for (int i = 0; i < n - 1; ++i) {
            const std::uint8_t* a = &raster.states[static_cast<std::size_t>(i) *
                                                   static_cast<std::size_t>(raster.n_nodes)];
            const int ca = labels[static_cast<std::size_t>(i)] - 1;
            for (int j = i + 1; j < n; ++j) {
                const std::uint8_t* b = &raster.states[static_cast<std::size_t>(j) *
                                                       static_cast<std::size_t>(raster.n_nodes)];
                std::uint64_t differing = 0;
                for (int node = 0; node < raster.n_nodes; ++node)
                    differing += static_cast<std::uint64_t>(a[node] != b[node]);
                const int cb = labels[static_cast<std::size_t>(j)] - 1;
                const int lo = std::min(ca, cb), hi = std::max(ca, cb);
                local_bits[lo][hi] += differing;
                ++local_pairs[lo][hi];
            }
        }
#pragma omp critical
        for (int a_cls = 0; a_cls < 3; ++a_cls)
            for (int b_cls = 0; b_cls < 3; ++b_cls) {
                bit_sums[a_cls][b_cls] += local_bits[a_cls][b_cls];
                pair_counts[a_cls][b_cls] += local_pairs[a_cls][b_cls];
            }
    }

    DistanceReport report;
    const double nodes = static_cast<double>(raster.n_nodes);
    auto mean = [&](int a, int b) {
        const std::uint64_t pairs = pair_counts[a][b];
        if (pairs == 0 || raster.n_nodes == 0) return 0.0;
        return static_cast<double>(bit_sums[a][b]) / (static_cast<double>(pairs) * nodes);
    };
    for (int c = 0; c < 3; ++c) report.intra[static_cast<std::size_t>(c)] = mean(c, c);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            report.inter[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
                a == b ? report.intra[static_cast<std::size_t>(a)]
                       : mean(std::min(a, b), std::max(a, b));
    return report;
}

}  // namespace

IrisDataset parse_iris_csv(std::string_view text, const std::string& source_name) {
    IrisDataset dataset;
    std::array<int, 3> per_class{};

    std::size_t pos = 0;
    int line_number = 0;
    bool header_seen = false;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view line =
            nl == std::string_view::npos ? text.substr(pos) : text.substr(pos, nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_number;

        if (trim(line).empty()) continue;
        const std::string where = source_name + ":" + std::to_string(line_number);
        const std::vector<std::string> fields = split_fields(line);

        if (!header_seen) {
            const std::vector<std::string> expected = {"sepal_length", "sepal_width",
                                                       "petal_length", "petal_width", "species"};
            if (fields != expected)
                throw ParseError(where +
                                 ": header must be "
                                 "sepal_length,sepal_width,petal_length,petal_width,species");
            header_seen = true;
            continue;
        }

        if (fields.size() != 5)
            throw ParseError(where + ": expected 5 fields, got " +
                             std::to_string(fields.size()));
        FeatureVector features;
        features.sepal_length = parse_double(fields[0], where);
        features.sepal_width = parse_double(fields[1], where);
        features.petal_length = parse_double(fields[2], where);
        features.petal_width = parse_double(fields[3], where);
        if (!features.in_range())
            throw ParseError(where + ": measurements must lie in (0, 10) cm");
        const int label = species_index(fields[4], where);

        dataset.points.push_back(features);
        dataset.labels.push_back(label);
        ++per_class[static_cast<std::size_t>(label - 1)];
    }

    if (!header_seen) throw ParseError(source_name + ": empty input");
    for (int c = 0; c < 3; ++c)
        if (per_class[static_cast<std::size_t>(c)] != 50)
            throw ClassCountError(source_name + ": expected 50 " +
                                  std::string(kSpeciesNames[static_cast<std::size_t>(c)]) +
                                  " rows, got " +
                                  std::to_string(per_class[static_cast<std::size_t>(c)]));
    return dataset;
}

IrisDataset load_iris(const std::string& path) {
    if (path.empty()) return parse_iris_csv(bundled_iris_csv(), "<bundled>");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset file " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_iris_csv(buffer.str(), path);
}

Split split_train_test(const IrisDataset& dataset, int train_per_class, std::uint64_t seed) {
    if (train_per_class < 1 || train_per_class > 49)
        throw InvalidSize("train_per_class must lie in [1, 49], got " +
                          std::to_string(train_per_class));

    Rng rng(seed);
    std::vector<char> in_train(static_cast<std::size_t>(dataset.n_points()), 0);
    for (int cls = 1; cls <= kNumClasses; ++cls) {
        std::vector<int> pool;
        for (int i = 0; i < dataset.n_points(); ++i)
            if (dataset.labels[static_cast<std::size_t>(i)] == cls) pool.push_back(i);
        if (static_cast<int>(pool.size()) <= train_per_class)
            throw InvalidSize("class " + std::string(kSpeciesNames[static_cast<std::size_t>(
                                  cls - 1)]) +
                              " has " + std::to_string(pool.size()) +
                              " points; cannot reserve " + std::to_string(train_per_class) +
                              " for training plus at least one for testing");
        rng.shuffle(pool);  // same seed => same order, so smaller sizes nest in larger ones
        for (int k = 0; k < train_per_class; ++k)
            in_train[static_cast<std::size_t>(pool[static_cast<std::size_t>(k)])] = 1;
    }

    Split split;
    for (int i = 0; i < dataset.n_points(); ++i)
        (in_train[static_cast<std::size_t>(i)] ? split.train : split.test).push_back(i);
    return split;
}

int ConfusionMatrix::total() const {
    int sum = 0;
    for (const auto& row : counts)
        for (int c : row) sum += c;
    return sum;
}

int ConfusionMatrix::diagonal() const {
    int sum = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) sum += counts[i][i];
    return sum;
}

double ConfusionMatrix::accuracy() const {
    const int n = total();
    return n > 0 ? static_cast<double>(diagonal()) / static_cast<double>(n) : 0.0;
}

ExperimentReport run_experiment(const Config& config, const IrisDataset& dataset) {
    const RasterBundle bundle = simulate_raster(config, dataset);
    const std::uint64_t split_seed = mix_seed(config.experiment.seed, kSplitTag);
    const Split split = split_train_test(dataset, config.experiment.train_per_class, split_seed);
    Evaluation eval = evaluate_split(bundle.raster, dataset.labels, split, split_seed);

    ExperimentReport report;
    report.raster = bundle.raster;
    report.weights = std::move(eval.weights);
    report.confusion = eval.confusion;
    report.accuracy = eval.confusion.accuracy();
    report.split = split;
    report.predictions = std::move(eval.predictions);
    report.threshold = bundle.threshold;
    report.threshold_was_auto = bundle.threshold_was_auto;
    report.waveform_duration = bundle.waveform_duration;
    report.seed = config.experiment.seed;
    return report;
}

ErrorCurve sweep_training_size(const Config& config, const IrisDataset& dataset,
                               const std::vector<int>& sizes, int n_runs) {
    if (sizes.empty()) throw InvalidSize("sweep: no training sizes given");
    if (n_runs < 1) throw InvalidSize("sweep: n_runs must be at least 1");

    ErrorCurve curve;
    curve.training_sizes = sizes;
    curve.per_run_errors.assign(static_cast<std::size_t>(n_runs),
                                std::vector<double>(sizes.size(), 0.0));
    curve.mean_error.assign(sizes.size(), 0.0);

    const std::uint64_t sweep_seed = mix_seed(config.experiment.seed, kSweepTag);

    if (config.experiment.resimulate_per_size) {
        // Fresh mask, waveform and laser run per (run, size); slow but free
        // of any shared-raster correlation between curve points.
        for (int run = 0; run < n_runs; ++run)
            for (std::size_t s = 0; s < sizes.size(); ++s) {
                Config per_point_config = config;
                per_point_config.experiment.train_per_class = sizes[s];
                per_point_config.experiment.seed =
                    mix_seed(sweep_seed, static_cast<std::uint64_t>(run) * 1009ULL +
                                             static_cast<std::uint64_t>(sizes[s]));
                const ExperimentReport report = run_experiment(per_point_config, dataset);
                curve.per_run_errors[static_cast<std::size_t>(run)][s] = 1.0 - report.accuracy;
            }
    } else {
        const RasterBundle bundle = simulate_raster(config, dataset);
        for (int run = 0; run < n_runs; ++run) {
            const std::uint64_t split_seed =
                mix_seed(sweep_seed, static_cast<std::uint64_t>(run));
            for (std::size_t s = 0; s < sizes.size(); ++s) {
                const Split split = split_train_test(dataset, sizes[s], split_seed);
                const Evaluation eval =
                    evaluate_split(bundle.raster, dataset.labels, split, split_seed);
                curve.per_run_errors[static_cast<std::size_t>(run)][s] =
                    1.0 - eval.confusion.accuracy();
            }
        }
    }

    for (std::size_t s = 0; s < sizes.size(); ++s) {
        double sum = 0.0;
        for (int run = 0; run < n_runs; ++run)
            sum += curve.per_run_errors[static_cast<std::size_t>(run)][s];
        curve.mean_error[s] = sum / static_cast<double>(n_runs);
    }
    return curve;
}

DistanceReport raster_distance_report(const SpikeRaster& raster, const std::vector<int>& labels) {
    return distance_report_impl(raster, labels, true);
}

DistanceReport raster_distance_report_serial(const SpikeRaster& raster,
                                             const std::vector<int>& labels) {
    return distance_report_impl(raster, labels, false);
}

}  // namespace vsnn
