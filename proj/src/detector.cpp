#include "vsnn/detector.hpp"

#include <algorithm>
#include <cmath>

#include "vsnn/errors.hpp"
#include "vsnn/rational.hpp"

namespace vsnn {

namespace {

struct BinGrid {
    Rational drive_to_trace;  // trace samples per drive sample
    std::int64_t offset;      // latency shift in trace samples
    std::int64_t spn;         // drive samples per node
    std::int64_t n_trace;
};

// Trace-sample range of one theta bin. The bin covers drive samples
// [d0, d1); ceil maps a time boundary to the first trace sample at or after
// it, which is exactly the half-open edge rule.
std::pair<std::int64_t, std::int64_t> bin_range(const BinGrid& g, std::int64_t d0,
                                                std::int64_t d1) {
    return {g.drive_to_trace.ceil_mul(d0) + g.offset, g.drive_to_trace.ceil_mul(d1) + g.offset};
}

BinGrid make_grid(const IntensityTrace& trace, const DriveWaveform& drive,
                  double latency_offset) {
    if (trace.samples.empty()) throw EmptyTrace("bin_and_threshold: trace has no samples");
    if (!(trace.sample_period > 0.0))
        throw ConfigError("bin_and_threshold: trace sample period must be positive");
    if (drive.layout.segments.empty())
        throw LayoutMismatch("bin_and_threshold: waveform layout has no segments");

    BinGrid g;
    g.drive_to_trace =
        approximate_ratio(1.0 / (drive.sample_rate * trace.sample_period), "bin_and_threshold");
    const double off = latency_offset / trace.sample_period;
    g.offset = std::llround(off);
    if (std::abs(off - static_cast<double>(g.offset)) > 1.0e-6)
        throw ConfigError("bin_and_threshold: latency offset must be a whole number of trace "
                          "samples");
    g.spn = drive.samples_per_node();
    g.n_trace = static_cast<std::int64_t>(trace.samples.size());

    // The layout must fit inside the trace after the shift.
    const auto& first = drive.layout.segments.front();
    const auto& last = drive.layout.segments.back();
    const auto lo = bin_range(g, first.start_sample, first.start_sample + g.spn).first;
    const auto hi = bin_range(g, last.end_sample - g.spn, last.end_sample).second;
    if (hi > g.n_trace || lo < 0)
        throw LayoutMismatch("bin_and_threshold: trace does not cover the waveform layout");
    return g;
}

template <bool Parallel>
SpikeRaster bin_impl(const IntensityTrace& trace, const DriveWaveform& drive, double threshold,
                     double latency_offset) {
    if (!(threshold > 0.0)) throw ConfigError("bin_and_threshold: threshold must be positive");
    const BinGrid g = make_grid(trace, drive, latency_offset);

    SpikeRaster raster;
    raster.n_points = static_cast<int>(drive.layout.segments.size());
    raster.n_nodes = drive.n_nodes;
    raster.node_duration = drive.node_duration;
    raster.threshold = threshold;
    raster.states.assign(
        static_cast<std::size_t>(raster.n_points) * static_cast<std::size_t>(raster.n_nodes), 0);
    raster.point_ids.resize(static_cast<std::size_t>(raster.n_points));

    const auto row = [&](int p) {
        const auto& seg = drive.layout.segments[static_cast<std::size_t>(p)];
        raster.point_ids[static_cast<std::size_t>(p)] = seg.point_id;
        for (int node = 0; node < raster.n_nodes; ++node) {
            const std::int64_t d0 = seg.start_sample + static_cast<std::int64_t>(node) * g.spn;
            const auto [lo, hi] = bin_range(g, d0, d0 + g.spn);
            double peak = 0.0;
            for (std::int64_t k = lo; k < hi; ++k)
                peak = std::max(peak, trace.samples[static_cast<std::size_t>(k)]);
            raster.at(p, node) = peak > threshold ? 1 : 0;
        }
    };

    if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
        for (int p = 0; p < raster.n_points; ++p) row(p);
    } else {
        for (int p = 0; p < raster.n_points; ++p) row(p);
    }
    return raster;
}

}  // namespace

SpikeRaster bin_and_threshold(const IntensityTrace& trace, const DriveWaveform& drive,
                              double threshold, double latency_offset) {
    return bin_impl<true>(trace, drive, threshold, latency_offset);
}

SpikeRaster bin_and_threshold_serial(const IntensityTrace& trace, const DriveWaveform& drive,
                                     double threshold, double latency_offset) {
    return bin_impl<false>(trace, drive, threshold, latency_offset);
}

double auto_threshold(const IntensityTrace& trace, double iqr_factor) {
    if (trace.samples.empty()) throw EmptyTrace("auto_threshold: trace has no samples");
    std::vector<double> sorted = trace.samples;
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    const auto at_quantile = [&](double q) {
        // Linear interpolation between order statistics.
        const double pos = q * static_cast<double>(n - 1);
        const auto i = static_cast<std::size_t>(pos);
        const double f = pos - static_cast<double>(i);
        return i + 1 < n ? sorted[i] * (1.0 - f) + sorted[i + 1] * f : sorted[i];
    };
    const double median = at_quantile(0.5);
    const double iqr = at_quantile(0.75) - at_quantile(0.25);
    const double top = sorted.back();

    const bool has_spikes = top > median + 6.0 * iqr && top > 1.2 * median + 1.0e-12;
    if (has_spikes) return 0.5 * (median + top);
    const double fallback = median + iqr_factor * iqr;
    // A perfectly flat trace must still yield a level strictly above it.
    if (fallback > median) return fallback;
    return median + 1.0e-9 * (std::abs(median) + 1.0);
}

SpikeStats spike_statistics(const IntensityTrace& trace, double threshold, double merge_time) {
    if (trace.samples.empty()) throw EmptyTrace("spike_statistics: trace has no samples");
    std::vector<double> sorted = trace.samples;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2),
                     sorted.end());
    const double baseline = sorted[sorted.size() / 2];

    struct Region {
        std::int64_t first, last, peak_index;
        double peak;
    };
    std::vector<Region> regions;
    const auto n = static_cast<std::int64_t>(trace.samples.size());
    const std::int64_t merge =
        merge_time > 0.0 ? std::llround(merge_time / trace.sample_period) : 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double v = trace.samples[static_cast<std::size_t>(i)];
        if (!(v > threshold)) continue;
        if (!regions.empty() && i - regions.back().last <= merge + 1) {
            Region& r = regions.back();
            r.last = i;
            if (v > r.peak) {
                r.peak = v;
                r.peak_index = i;
            }
        } else {
            regions.push_back({i, i, i, v});
        }
    }

    SpikeStats stats;
    stats.spike_count = regions.size();
    stats.widths.reserve(regions.size());
    stats.peak_powers.reserve(regions.size());
    stats.peak_times.reserve(regions.size());
    for (const Region& r : regions) {
        const double half = baseline + 0.5 * (r.peak - baseline);
        // Walk out from the peak to the half-power crossings, interpolating
        // between the bracketing samples.
        std::int64_t left = r.peak_index;
        while (left > 0 && trace.samples[static_cast<std::size_t>(left - 1)] > half) --left;
        std::int64_t right = r.peak_index;
        while (right + 1 < n && trace.samples[static_cast<std::size_t>(right + 1)] > half) ++right;
        double lo = static_cast<double>(left);
        if (left > 0) {
            const double a = trace.samples[static_cast<std::size_t>(left - 1)];
            const double b = trace.samples[static_cast<std::size_t>(left)];
            if (b > a) lo -= (b - half) / (b - a);
        }
        double hi = static_cast<double>(right);
        if (right + 1 < n) {
            const double a = trace.samples[static_cast<std::size_t>(right + 1)];
            const double b = trace.samples[static_cast<std::size_t>(right)];
            if (b > a) hi += (b - half) / (b - a);
        }
        stats.widths.push_back((hi - lo) * trace.sample_period);
        stats.peak_powers.push_back(r.peak);
        stats.peak_times.push_back(trace.time_at(static_cast<std::size_t>(r.peak_index)));
    }
    for (std::size_t i = 1; i < stats.peak_times.size(); ++i)
        stats.intervals.push_back(stats.peak_times[i] - stats.peak_times[i - 1]);
    return stats;
}

}  // namespace vsnn
