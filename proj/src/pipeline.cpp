#include "vsnn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vsnn/rng.hpp"

namespace vsnn {

std::string to_string(MaskDistribution d) {
    switch (d) {
        case MaskDistribution::uniform01: return "uniform01";
        case MaskDistribution::uniform_pm1: return "uniform_pm1";
        case MaskDistribution::bernoulli01: return "bernoulli01";
    }
    return "uniform01";
}

MaskDistribution mask_distribution_from_string(const std::string& s) {
    if (s == "uniform01") return MaskDistribution::uniform01;
    if (s == "uniform_pm1") return MaskDistribution::uniform_pm1;
    if (s == "bernoulli01") return MaskDistribution::bernoulli01;
    throw ConfigError("unknown mask distribution '" + s + "'");
}

std::string to_string(AffineScale::Mode m) {
    switch (m) {
        case AffineScale::Mode::full: return "full";
        case AffineScale::Mode::fixed: return "fixed";
        case AffineScale::Mode::quantile: return "quantile";
    }
    return "full";
}

AffineScale::Mode scale_mode_from_string(const std::string& s) {
    if (s == "full") return AffineScale::Mode::full;
    if (s == "fixed") return AffineScale::Mode::fixed;
    if (s == "quantile") return AffineScale::Mode::quantile;
    throw ConfigError("unknown scale mode '" + s + "'");
}

std::pair<double, double> resolve_scale_window(const std::vector<NodeSequence>& sequences,
                                               const AffineScale& scale) {
    if (scale.mode == AffineScale::Mode::fixed) return {scale.min, scale.max};
    std::vector<double> values;
    for (const auto& s : sequences)
        values.insert(values.end(), s.values.begin(), s.values.end());
    if (values.empty()) throw EmptyInput("resolve_scale_window: no values");
    if (scale.mode == AffineScale::Mode::full) {
        auto [lo, hi] = std::minmax_element(values.begin(), values.end());
        return {*lo, *hi};
    }
    if (!(scale.qlo >= 0.0 && scale.qlo < scale.qhi && scale.qhi <= 1.0))
        throw ConfigError("quantile scale window requires 0 <= qlo < qhi <= 1");
    std::sort(values.begin(), values.end());
    auto interp = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const auto i = static_cast<std::size_t>(pos);
        if (i + 1 >= values.size()) return values.back();
        const double frac = pos - static_cast<double>(i);
        return values[i] + frac * (values[i + 1] - values[i]);
    };
    return {interp(scale.qlo), interp(scale.qhi)};
}

int DriveWaveform::samples_per_node() const {
    return static_cast<int>(std::llround(node_duration * sample_rate));
}

std::int64_t DriveWaveform::gap_samples() const {
    return std::llround(gap_duration * sample_rate);
}

MaskMatrix build_mask(std::uint64_t seed, int n_nodes, int n_features,
                      MaskDistribution distribution) {
    if (n_nodes < 1) throw InvalidDimension("build_mask: n_nodes must be >= 1, got " + std::to_string(n_nodes));
    if (n_features < 1)
        throw InvalidDimension("build_mask: n_features must be >= 1, got " + std::to_string(n_features));
    MaskMatrix mask;
    mask.seed = seed;
    mask.distribution = distribution;
    mask.entries.resize(n_nodes, n_features);
    Rng rng(seed);
    // Row-major draw order so the first node's weights come first.
    for (int i = 0; i < n_nodes; ++i) {
        for (int j = 0; j < n_features; ++j) {
            double v = 0.0;
            switch (distribution) {
                case MaskDistribution::uniform01: v = rng.uniform01(); break;
                case MaskDistribution::uniform_pm1: v = rng.uniform(-1.0, 1.0); break;
                case MaskDistribution::bernoulli01: v = rng.uniform01() < 0.5 ? 0.0 : 1.0; break;
            }
            mask.entries(i, j) = v;
        }
    }
    return mask;
}

NodeSequence mask_datapoint(const MaskMatrix& mask, const FeatureVector& features) {
    if (mask.n_features() != 4)
        throw DimensionMismatch("mask_datapoint: mask has " + std::to_string(mask.n_features()) +
                                " columns, expected 4");
    const int n = mask.n_nodes();
    NodeSequence seq;
    seq.values.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < 4; ++j) acc += mask.entries(i, j) * features[j];
        seq.values[static_cast<std::size_t>(i)] = acc;
    }
    return seq;
}

namespace {

std::int64_t exact_sample_count(double duration, double sample_rate, const char* what) {
    const double raw = duration * sample_rate;
    const double rounded = std::round(raw);
    if (std::abs(raw - rounded) > 1e-6 * std::max(1.0, std::abs(raw)))
        throw ConfigError(std::string(what) + ": duration times sample_rate must be an integer, got " +
                          std::to_string(raw));
    return static_cast<std::int64_t>(rounded);
}

}  // namespace

DriveWaveform synthesize_waveform(const std::vector<NodeSequence>& sequences,
                                  const std::vector<int>& point_ids, double theta,
                                  double sample_rate, double gap, const AffineScale& scale) {
    if (sequences.empty()) throw EmptyInput("synthesize_waveform: no sequences");
    if (point_ids.size() != sequences.size())
        throw DimensionMismatch("synthesize_waveform: " + std::to_string(sequences.size()) +
                                " sequences but " + std::to_string(point_ids.size()) + " point ids");
    if (!(theta > 0.0) || !(sample_rate > 0.0))
        throw ConfigError("synthesize_waveform: theta and sample_rate must be positive");
    if (gap < 0.0) throw ConfigError("synthesize_waveform: gap must be >= 0");

    const std::size_t n_nodes = sequences.front().values.size();
    if (n_nodes == 0) throw EmptyInput("synthesize_waveform: empty node sequence");
    for (std::size_t p = 0; p < sequences.size(); ++p) {
        if (sequences[p].values.size() != n_nodes)
            throw DimensionMismatch("synthesize_waveform: sequence " + std::to_string(p) + " has " +
                                    std::to_string(sequences[p].values.size()) + " nodes, expected " +
                                    std::to_string(n_nodes));
    }

    const std::int64_t spn = exact_sample_count(theta, sample_rate, "theta");
    if (spn < 1) throw ConfigError("synthesize_waveform: theta shorter than one sample");
    const std::int64_t gap_samples = exact_sample_count(gap, sample_rate, "gap");

    const auto [lo, hi] = resolve_scale_window(sequences, scale);
    const double span = hi - lo;
    const bool degenerate = !(span > 0.0);

    DriveWaveform wf;
    wf.sample_rate = sample_rate;
    wf.node_duration = theta;
    wf.gap_duration = gap;
    wf.n_nodes = static_cast<int>(n_nodes);
    wf.scale_min = lo;
    wf.scale_max = hi;
    const std::size_t n_points = sequences.size();
    const std::int64_t seg_len = spn * static_cast<std::int64_t>(n_nodes);
    const std::int64_t total =
        static_cast<std::int64_t>(n_points) * seg_len + static_cast<std::int64_t>(n_points - 1) * gap_samples;
    wf.samples.assign(static_cast<std::size_t>(total), 0.0);
    wf.layout.segments.reserve(n_points);

    std::int64_t cursor = 0;
    for (std::size_t p = 0; p < n_points; ++p) {
        WaveformLayout::Segment seg;
        seg.point_id = point_ids[p];
        seg.start_sample = cursor;
        for (std::size_t i = 0; i < n_nodes; ++i) {
            // Degenerate all-equal input maps to mid-range.
            double level = degenerate ? 0.5 : (sequences[p].values[i] - lo) / span;
            // Fixed and quantile windows saturate: values outside pin to the
            // nearest end. A full window covers all values, so the clamp
            // would be a no-op there.
            if (scale.mode != AffineScale::Mode::full) level = std::clamp(level, 0.0, 1.0);
            for (std::int64_t k = 0; k < spn; ++k)
                wf.samples[static_cast<std::size_t>(cursor++)] = level;
        }
        seg.end_sample = cursor;
        wf.layout.segments.push_back(seg);
        if (p + 1 < n_points) cursor += gap_samples;  // zero modulation, no trailing gap
    }
    return wf;
}

NodeSequence reslice_segment(const DriveWaveform& wf, std::size_t segment_index) {
    if (segment_index >= wf.layout.segments.size())
        throw DimensionMismatch("reslice_segment: segment index out of range");
    const auto& seg = wf.layout.segments[segment_index];
    const int spn = wf.samples_per_node();
    NodeSequence seq;
    seq.values.reserve(static_cast<std::size_t>(wf.n_nodes));
    const double span = wf.scale_max - wf.scale_min;
    for (std::int64_t s = seg.start_sample; s < seg.end_sample; s += spn) {
        const double level = wf.samples[static_cast<std::size_t>(s)];
        seq.values.push_back(span > 0.0 ? wf.scale_min + level * span : level);
    }
    return seq;
}

}  // namespace vsnn
