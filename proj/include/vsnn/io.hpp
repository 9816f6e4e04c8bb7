#pragma once

#include <map>
#include <string>
#include <string_view>

#include "vsnn/harness.hpp"

namespace vsnn {

inline constexpr std::string_view kToolVersion = "1.0.0";

// Every writer formats floating-point values with 17 significant digits so
// the emitted text round-trips to the exact double, and writes in binary
// mode; identical inputs therefore produce byte-identical files. All
// writers throw IoError when the file cannot be created or written.

// Two-column power trace: time_s,power_au.
void write_trace_csv(const std::string& path, const IntensityTrace& trace);

// Normalized drive waveform as sample_index,level rows plus a JSON sidecar
// (theta, sample rate, gap, affine scale, segment layout) carrying
// everything needed to replay it against real hardware.
void write_waveform_csv(const std::string& path, const DriveWaveform& waveform);
void write_waveform_sidecar(const std::string& path, const DriveWaveform& waveform);
DriveWaveform read_waveform(const std::string& csv_path, const std::string& sidecar_path);

// Binary node states: point_id column then one 0/1 column per node.
void write_raster_csv(const std::string& path, const SpikeRaster& raster);

// Readout matrix with the training metadata in comment lines, importable.
void write_weights_csv(const std::string& path, const ReadoutWeights& weights);
ReadoutWeights read_weights_csv(const std::string& path);

// 3x3 counts, rows = true class, columns = predicted class.
void write_confusion_csv(const std::string& path, const ConfusionMatrix& confusion);

// One row per run (the faint lines of an error-vs-size plot) plus a final
// "mean" row; columns are the training sizes.
void write_error_curve_csv(const std::string& path, const ErrorCurve& curve);

// Per-run summary of an experiment: accuracy, threshold, split sizes and
// the per-test-point predictions.
void write_report_json(const std::string& path, const ExperimentReport& report,
                       const IrisDataset& dataset);

// Record of one CLI invocation: the full configuration (sufficient to
// replay the run bit-exactly), the emitted artifacts and a timestamp.
struct RunManifest {
    Config config;
    std::map<std::string, std::string> artifacts;  // output name -> path
    std::string command;
    std::string created_utc;  // filled by write_manifest when empty
    std::string tool_version = std::string(kToolVersion);
};

void write_manifest(const std::string& path, const RunManifest& manifest);

}  // namespace vsnn
