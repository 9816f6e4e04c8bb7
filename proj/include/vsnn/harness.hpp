#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vsnn/config.hpp"
#include "vsnn/detector.hpp"
#include "vsnn/pipeline.hpp"
#include "vsnn/readout.hpp"

namespace vsnn {

inline constexpr std::array<std::string_view, 3> kSpeciesNames = {"setosa", "versicolor",
                                                                 "virginica"};

// The 150-flower dataset; labels are 1=setosa, 2=versicolor, 3=virginica.
struct IrisDataset {
    std::vector<FeatureVector> points;
    std::vector<int> labels;

    int n_points() const { return static_cast<int>(points.size()); }
};

// The CSV bundled into the library (identical to data/iris.csv).
std::string_view bundled_iris_csv();

// Parses the documented CSV schema
// (sepal_length,sepal_width,petal_length,petal_width,species) and validates
// 50 flowers per species.
IrisDataset parse_iris_csv(std::string_view text, const std::string& source_name);
IrisDataset load_iris(const std::string& path);  // empty path -> bundled copy

struct Split {
    std::vector<int> train;  // dataset indices, train_per_class per class
    std::vector<int> test;   // the remaining indices, ascending
};

// Deterministic per seed; throws InvalidSize outside [1, 49].
Split split_train_test(const IrisDataset& dataset, int train_per_class, std::uint64_t seed);

struct ConfusionMatrix {
    std::array<std::array<int, 3>, 3> counts{};  // [true][predicted]

    int total() const;
    int diagonal() const;
    double accuracy() const;
};

// Everything one end-to-end run produces, with the inputs needed to replay it.
struct ExperimentReport {
    SpikeRaster raster;        // rows in dataset order
    ReadoutWeights weights;
    ConfusionMatrix confusion;
    double accuracy = 0.0;
    Split split;
    std::vector<int> predictions;  // per test point, aligned with split.test
    double threshold = 0.0;        // detector level actually used
    bool threshold_was_auto = false;
    double waveform_duration = 0.0;  // seconds
    std::uint64_t seed = 0;
};

// Mask -> waveform -> laser -> raster -> split -> train -> evaluate.
// The returned raster rows are re-ordered to dataset index order.
ExperimentReport run_experiment(const Config& config, const IrisDataset& dataset);

// The input mask run_experiment derives from the experiment seed; exposed so
// replay tooling regenerates the identical mask.
MaskMatrix experiment_mask(const Config& config);

// The experiment pipeline cut short after binarization: the raster (rows in
// dataset order) plus the detector level that produced it.
struct RasterBundle {
    SpikeRaster raster;
    double threshold = 0.0;
    bool threshold_was_auto = false;
    double waveform_duration = 0.0;  // seconds
};

RasterBundle simulate_raster(const Config& config, const IrisDataset& dataset);

// Drive waveform for one dataset point, scaled exactly as the full
// experiment scales it (the scale window resolves over all points) and
// padded with one trailing inter-point gap so the response tail stays in
// frame.
DriveWaveform single_point_waveform(const Config& config, const IrisDataset& dataset, int index);

struct ErrorCurve {
    std::vector<int> training_sizes;
    std::vector<std::vector<double>> per_run_errors;  // [run][size]
    std::vector<double> mean_error;                   // [size]
};

// Re-splits one simulated raster n_runs times (fresh split seed per run) and
// evaluates every training size; config.experiment.resimulate_per_size
// forces a fresh simulation per (run, size) instead.
ErrorCurve sweep_training_size(const Config& config, const IrisDataset& dataset,
                               const std::vector<int>& sizes, int n_runs);

// Mean pairwise normalized Hamming distances between raster rows, within
// and across classes. inter[a][b] for a != b; inter[a][a] duplicates
// intra[a] for convenience.
struct DistanceReport {
    std::array<double, 3> intra{};
    std::array<std::array<double, 3>, 3> inter{};
};

DistanceReport raster_distance_report(const SpikeRaster& raster, const std::vector<int>& labels);
DistanceReport raster_distance_report_serial(const SpikeRaster& raster,
                                             const std::vector<int>& labels);

}  // namespace vsnn
