#pragma once

#include <cstdint>
#include <vector>

#include "vsnn/laser.hpp"
#include "vsnn/pipeline.hpp"

namespace vsnn {

// Binary node-state matrix: one row per data point (in waveform segment
// order), one column per virtual node.
struct SpikeRaster {
    std::vector<std::uint8_t> states;  // row-major, n_points x n_nodes, 0/1
    int n_points = 0;
    int n_nodes = 0;
    double node_duration = 0.0;  // theta, seconds
    double threshold = 0.0;      // power level the raster was cut at
    std::vector<int> point_ids;  // layout point id per row

    std::uint8_t at(int point, int node) const {
        return states[static_cast<std::size_t>(point) * static_cast<std::size_t>(n_nodes) +
                      static_cast<std::size_t>(node)];
    }
    std::uint8_t& at(int point, int node) {
        return states[static_cast<std::size_t>(point) * static_cast<std::size_t>(n_nodes) +
                      static_cast<std::size_t>(node)];
    }
};

// Summary of super-threshold excursions in a trace.
struct SpikeStats {
    std::size_t spike_count = 0;
    std::vector<double> widths;       // FWHM per spike, seconds
    std::vector<double> intervals;    // between consecutive spike peaks, seconds
    std::vector<double> peak_powers;
    std::vector<double> peak_times;   // seconds
};

// Cuts the trace into per-node bins of theta following the waveform layout
// and marks a node 1 iff the peak power in its bin exceeds threshold. Bins
// are half-open in time; a sample landing exactly on an edge belongs to the
// later bin. Gap periods fall outside every bin. latency_offset shifts all
// bin windows by a whole number of trace samples (drive-to-output delay).
// The _serial variant is the reference; the unqualified one splits rows
// across OpenMP threads and returns bit-identical states.
SpikeRaster bin_and_threshold(const IntensityTrace& trace, const DriveWaveform& drive,
                              double threshold, double latency_offset = 0.0);
SpikeRaster bin_and_threshold_serial(const IntensityTrace& trace, const DriveWaveform& drive,
                                     double threshold, double latency_offset = 0.0);

// Threshold halfway between the locked baseline (trace median) and the top
// peak. When the trace has no clear spikes the midpoint rule would shave the
// baseline, so it falls back to median + iqr_factor * IQR, nudged strictly
// above a perfectly flat level.
double auto_threshold(const IntensityTrace& trace, double iqr_factor = 3.0);

// Contiguous super-threshold excursions: FWHM (at half of each spike's peak
// above the trace median), peak powers/times and inter-peak intervals.
// merge_time > 0 folds excursions closer than that into one spike, so a
// relaxation ring trailing a spike is not counted separately.
SpikeStats spike_statistics(const IntensityTrace& trace, double threshold,
                            double merge_time = 0.0);

}  // namespace vsnn
