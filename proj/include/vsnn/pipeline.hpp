#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vsnn/errors.hpp"

namespace vsnn {

// One Iris data point: the four flower measurements in centimetres.
struct FeatureVector {
    double sepal_length = 0.0;
    double sepal_width = 0.0;
    double petal_length = 0.0;
    double petal_width = 0.0;

    double operator[](int i) const {
        switch (i) {
            case 0: return sepal_length;
            case 1: return sepal_width;
            case 2: return petal_length;
            default: return petal_width;
        }
    }
    // Dataset sanity bounds: every measurement in (0, 10) cm.
    bool in_range() const {
        for (int i = 0; i < 4; ++i)
            if (!((*this)[i] > 0.0 && (*this)[i] < 10.0)) return false;
        return true;
    }
};

enum class MaskDistribution { uniform01, uniform_pm1, bernoulli01 };

std::string to_string(MaskDistribution d);
MaskDistribution mask_distribution_from_string(const std::string& s);

// Random input weight matrix: n_nodes rows x n_features columns.
// Regenerating with the same seed reproduces identical entries.
struct MaskMatrix {
    Eigen::MatrixXd entries;
    std::uint64_t seed = 0;
    MaskDistribution distribution = MaskDistribution::uniform01;

    int n_nodes() const { return static_cast<int>(entries.rows()); }
    int n_features() const { return static_cast<int>(entries.cols()); }
};

// Per-node drive levels for one data point (length = n_nodes).
struct NodeSequence {
    std::vector<double> values;
};

// Ordered segment index of a synthesized waveform. Sample indices are in
// drive samples, half-open [start_sample, end_sample).
struct WaveformLayout {
    struct Segment {
        int point_id = 0;  // caller-supplied id (dataset index)
        std::int64_t start_sample = 0;
        std::int64_t end_sample = 0;
    };
    std::vector<Segment> segments;
};

// How raw masked node values map into the modulator's normalized [0, 1]
// range. full covers the global min/max over all sequences; fixed and
// quantile are saturating windows: values outside the window pin to 0 or 1.
// A quantile window is taken over all masked values, so it adapts to the
// mask realization and node count.
struct AffineScale {
    enum class Mode { full, fixed, quantile };
    Mode mode = Mode::full;
    double min = 0.0;   // fixed window, raw value units
    double max = 1.0;
    double qlo = 0.55;  // quantile window, ranks in [0, 1]
    double qhi = 0.90;
};

std::string to_string(AffineScale::Mode m);
AffineScale::Mode scale_mode_from_string(const std::string& s);

// The raw-unit window [lo, hi] that a scale resolves to over these
// sequences (what synthesize_waveform will apply).
std::pair<double, double> resolve_scale_window(const std::vector<NodeSequence>& sequences,
                                               const AffineScale& scale);

// Sampled normalized drive waveform: node values held for theta each, data
// points separated by gap_duration of zero modulation, no trailing gap.
struct DriveWaveform {
    std::vector<double> samples;     // normalized modulation levels in [0, 1]
    double sample_rate = 0.0;        // samples per second
    double node_duration = 0.0;      // theta, seconds
    double gap_duration = 0.0;       // seconds
    int n_nodes = 0;                 // virtual nodes per data point
    WaveformLayout layout;
    double scale_min = 0.0;          // affine mapping actually applied:
    double scale_max = 1.0;          // level = (value - scale_min) / (scale_max - scale_min)

    int samples_per_node() const;
    std::int64_t gap_samples() const;
    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

MaskMatrix build_mask(std::uint64_t seed, int n_nodes, int n_features,
                      MaskDistribution distribution = MaskDistribution::uniform01);

// values[i] = sum_j mask[i,j] * features[j]
NodeSequence mask_datapoint(const MaskMatrix& mask, const FeatureVector& features);

// Concatenates the sequences in the given order. point_ids[i] is recorded in
// the layout for sequence i; theta * sample_rate must be an integer number of
// samples, as must gap * sample_rate.
DriveWaveform synthesize_waveform(const std::vector<NodeSequence>& sequences,
                                  const std::vector<int>& point_ids, double theta,
                                  double sample_rate, double gap,
                                  const AffineScale& scale = {});

// Re-slices one data point's segment out of the waveform and decimates it
// back to per-node levels (inverse of the hold step; used by the layout
// round-trip property and by replay tooling).
NodeSequence reslice_segment(const DriveWaveform& wf, std::size_t segment_index);

}  // namespace vsnn
