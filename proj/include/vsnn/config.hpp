#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vsnn/laser.hpp"
#include "vsnn/pipeline.hpp"

namespace vsnn {

enum class SimulationMode { continuous, per_point };

std::string to_string(SimulationMode m);
SimulationMode simulation_mode_from_string(const std::string& s);

// Numerical settings shared by every simulation call.
struct SimulationSection {
    double dt = 1.0e-13;
    double trace_sample_period = 2.0e-12;
    ReadoutMode readout = ReadoutMode::subsidiary;
};

struct PipelineSection {
    int n_nodes = 512;
    double node_duration = 250.0e-12;  // theta
    double sample_rate = 12.0e9;
    double gap_duration = 2.0e-9;
    MaskDistribution mask_distribution = MaskDistribution::uniform01;
    AffineScale scale{};
};

struct DetectorSection {
    double threshold = 0.0;  // <= 0 selects auto_threshold
    double iqr_factor = 3.0;
    double latency_offset = 0.0;
};

struct ExperimentSection {
    int train_per_class = 10;
    std::uint64_t seed = 42;
    SimulationMode simulation_mode = SimulationMode::per_point;
    std::string iris_path;  // empty: use the bundled dataset
    bool resimulate_per_size = false;
};

// Numbers cmd_calibrate copies out of CalibrationResult for the record.
struct CalibrationDiagnostics {
    double perturbation_threshold = 0.0;
    double locked_intensity = 0.0;
    double spike_peak = 0.0;
    double spike_fwhm = 0.0;
    double refractory_window = 0.0;
    double margin = 0.0;
};

struct CalibrationSection {
    bool calibrated = false;
    SearchGrid grid;
    CalibrationSettings settings{};
    CalibrationDiagnostics diagnostics{};
};

struct Config {
    LaserParams laser{};
    DriveMapping drive{};
    SimulationSection simulation{};
    PipelineSection pipeline{};
    DetectorSection detector{};
    ExperimentSection experiment{};
    CalibrationSection calibration{};

    void validate() const;  // throws ConfigError naming the offending key
};

// Defaults match an operating point the bundled calibration grid finds.
Config default_config();

Config load_config(const std::string& path);
void save_config(const Config& config, const std::string& path);

// Default config serialized with a _doc line per section explaining its
// keys; load_config ignores every key starting with '_'.
void write_config_template(const std::string& path);

std::string config_to_json_text(const Config& config);
Config config_from_json_text(const std::string& text, const std::string& source_name);

}  // namespace vsnn
