#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "vsnn/errors.hpp"
#include "vsnn/pipeline.hpp"
#include "vsnn/rational.hpp"
#include "vsnn/rng.hpp"

using namespace vsnn;

namespace {

std::vector<NodeSequence> seqs(std::initializer_list<std::vector<double>> rows) {
    std::vector<NodeSequence> out;
    for (const auto& r : rows) out.push_back({r});
    return out;
}

// Rank-interpolated quantile, written independently of the library.
double quantile_oracle(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= values.size()) return values.back();
    return values[i] + (pos - static_cast<double>(i)) * (values[i + 1] - values[i]);
}

}  // namespace

TEST_CASE("feature vector indexing and sanity bounds") {
    const FeatureVector f{5.1, 3.5, 1.4, 0.2};
    CHECK(f[0] == 5.1);
    CHECK(f[1] == 3.5);
    CHECK(f[2] == 1.4);
    CHECK(f[3] == 0.2);
    CHECK(f.in_range());
    CHECK_FALSE(FeatureVector{0.0, 3.5, 1.4, 0.2}.in_range());
    CHECK_FALSE(FeatureVector{5.1, 3.5, 10.0, 0.2}.in_range());
}

TEST_CASE("mask generation is seed-reproducible per distribution") {
    for (const auto dist : {MaskDistribution::uniform01, MaskDistribution::uniform_pm1,
                            MaskDistribution::bernoulli01}) {
        const MaskMatrix a = build_mask(7, 32, 4, dist);
        const MaskMatrix b = build_mask(7, 32, 4, dist);
        const MaskMatrix c = build_mask(8, 32, 4, dist);
        CHECK(a.n_nodes() == 32);
        CHECK(a.n_features() == 4);
        CHECK(a.entries == b.entries);
        CHECK(a.entries != c.entries);
        CHECK(a.distribution == dist);

        for (int i = 0; i < a.n_nodes(); ++i)
            for (int j = 0; j < 4; ++j) {
                const double v = a.entries(i, j);
                switch (dist) {
                    case MaskDistribution::uniform01:
                        CHECK(v >= 0.0);
                        CHECK(v < 1.0);
                        break;
                    case MaskDistribution::uniform_pm1:
                        CHECK(v >= -1.0);
                        CHECK(v < 1.0);
                        break;
                    case MaskDistribution::bernoulli01:
                        CHECK((v == 0.0 || v == 1.0));
                        break;
                }
            }
    }
    // uniform_pm1 actually reaches into the negative half.
    const MaskMatrix m = build_mask(3, 64, 4, MaskDistribution::uniform_pm1);
    CHECK(m.entries.minCoeff() < 0.0);
    CHECK(m.entries.maxCoeff() > 0.0);
}

TEST_CASE("mask distribution names round-trip") {
    for (const auto dist : {MaskDistribution::uniform01, MaskDistribution::uniform_pm1,
                            MaskDistribution::bernoulli01})
        CHECK(mask_distribution_from_string(to_string(dist)) == dist);
    CHECK_THROWS_AS(mask_distribution_from_string("gaussian"), ConfigError);
    CHECK_THROWS_AS(build_mask(1, 0, 4), InvalidDimension);
    CHECK_THROWS_AS(build_mask(1, 4, 0), InvalidDimension);
}

TEST_CASE("mask application equals the explicit dot product") {
    const MaskMatrix mask = build_mask(11, 8, 4, MaskDistribution::uniform_pm1);
    const FeatureVector f{6.3, 2.9, 5.6, 1.8};
    const NodeSequence seq = mask_datapoint(mask, f);
    REQUIRE(seq.values.size() == 8);
    for (int i = 0; i < 8; ++i) {
        double expect = 0.0;
        for (int j = 0; j < 4; ++j) expect += mask.entries(i, j) * f[j];
        CHECK(seq.values[static_cast<std::size_t>(i)] == doctest::Approx(expect).epsilon(1e-14));
    }

    MaskMatrix bad = build_mask(11, 8, 3, MaskDistribution::uniform01);
    CHECK_THROWS_AS(mask_datapoint(bad, f), DimensionMismatch);
}

TEST_CASE("waveform layout arithmetic and hold property") {
    // 3 points x 4 nodes, theta 250 ps at 12 GS/s (3 samples per node),
    // 2 ns gaps (24 samples), no trailing gap.
    const auto sequences = seqs({{0.0, 1.0, 2.0, 3.0}, {3.0, 2.0, 1.0, 0.0}, {1.5, 1.5, 0.0, 3.0}});
    const DriveWaveform wf =
        synthesize_waveform(sequences, {10, 20, 30}, 250.0e-12, 12.0e9, 2.0e-9);

    CHECK(wf.samples_per_node() == 3);
    CHECK(wf.gap_samples() == 24);
    CHECK(wf.n_nodes == 4);
    REQUIRE(wf.layout.segments.size() == 3);
    CHECK(wf.samples.size() == 3 * 12 + 2 * 24);
    CHECK(wf.duration() == doctest::Approx(84.0 / 12.0e9));

    const std::int64_t starts[3] = {0, 36, 72};
    for (std::size_t p = 0; p < 3; ++p) {
        CHECK(wf.layout.segments[p].start_sample == starts[p]);
        CHECK(wf.layout.segments[p].end_sample == starts[p] + 12);
    }
    CHECK(wf.layout.segments[0].point_id == 10);
    CHECK(wf.layout.segments[2].point_id == 30);

    // Full-mode window spans the global extrema: 0 -> 0, 3 -> 1.
    CHECK(wf.scale_min == 0.0);
    CHECK(wf.scale_max == 3.0);
    for (std::size_t p = 0; p < 3; ++p)
        for (int node = 0; node < 4; ++node) {
            const double expect = sequences[p].values[static_cast<std::size_t>(node)] / 3.0;
            for (int k = 0; k < 3; ++k) {
                const auto idx = static_cast<std::size_t>(starts[p] + node * 3 + k);
                CHECK(wf.samples[idx] == doctest::Approx(expect).epsilon(1e-14));
            }
        }
    // Gaps carry zero modulation.
    for (std::int64_t g : {12, 35, 48, 71})
        CHECK(wf.samples[static_cast<std::size_t>(g)] == 0.0);
}

TEST_CASE("fixed scale window saturates outside its range") {
    AffineScale scale;
    scale.mode = AffineScale::Mode::fixed;
    scale.min = 2.0;
    scale.max = 6.0;
    const DriveWaveform wf =
        synthesize_waveform(seqs({{0.0, 2.0, 4.0, 6.0, 8.0}}), {0}, 1.0e-10, 10.0e9, 0.0, scale);
    CHECK(wf.samples[0] == 0.0);   // below the window pins to 0
    CHECK(wf.samples[1] == 0.0);   // window edge
    CHECK(wf.samples[2] == 0.5);   // mid-window
    CHECK(wf.samples[3] == 1.0);   // window edge
    CHECK(wf.samples[4] == 1.0);   // above the window pins to 1
    CHECK(wf.scale_min == 2.0);
    CHECK(wf.scale_max == 6.0);
}

TEST_CASE("quantile scale window matches rank interpolation") {
    Rng rng(314);
    std::vector<double> values;
    for (int i = 0; i < 257; ++i) values.push_back(rng.uniform(-5.0, 9.0));
    std::vector<NodeSequence> sequences;
    // Split the same multiset over several ragged-ordered sequences.
    sequences.push_back({std::vector<double>(values.begin(), values.begin() + 100)});
    sequences.push_back({std::vector<double>(values.begin() + 100, values.begin() + 160)});
    sequences.push_back({std::vector<double>(values.begin() + 160, values.end())});
    // All sequences must share one length for synthesis, but the window
    // resolver accepts ragged input directly.
    for (const auto q : {std::pair{0.0, 1.0}, std::pair{0.25, 0.75}, std::pair{0.55, 0.90}}) {
        AffineScale scale;
        scale.mode = AffineScale::Mode::quantile;
        scale.qlo = q.first;
        scale.qhi = q.second;
        const auto [lo, hi] = resolve_scale_window(sequences, scale);
        CHECK(lo == doctest::Approx(quantile_oracle(values, q.first)).epsilon(1e-12));
        CHECK(hi == doctest::Approx(quantile_oracle(values, q.second)).epsilon(1e-12));
    }
}

TEST_CASE("quantile synthesis equals fixed synthesis at the resolved window") {
    Rng rng(99);
    std::vector<NodeSequence> sequences;
    for (int p = 0; p < 6; ++p) {
        NodeSequence s;
        for (int i = 0; i < 16; ++i) s.values.push_back(rng.uniform(-2.0, 7.0));
        sequences.push_back(s);
    }
    AffineScale quant;
    quant.mode = AffineScale::Mode::quantile;
    quant.qlo = 0.55;
    quant.qhi = 0.90;
    const auto [lo, hi] = resolve_scale_window(sequences, quant);

    AffineScale fixed;
    fixed.mode = AffineScale::Mode::fixed;
    fixed.min = lo;
    fixed.max = hi;

    const std::vector<int> ids = {0, 1, 2, 3, 4, 5};
    const DriveWaveform a = synthesize_waveform(sequences, ids, 2.5e-10, 12.0e9, 2.0e-9, quant);
    const DriveWaveform b = synthesize_waveform(sequences, ids, 2.5e-10, 12.0e9, 2.0e-9, fixed);
    CHECK(a.samples == b.samples);
    CHECK(a.scale_min == b.scale_min);
    CHECK(a.scale_max == b.scale_max);
    // The saturating window pins a nonzero share of samples to the rails.
    const auto pinned = std::count_if(a.samples.begin(), a.samples.end(),
                                      [](double v) { return v == 0.0 || v == 1.0; });
    CHECK(pinned > 0);
}

TEST_CASE("degenerate all-equal input maps to mid-range") {
    const DriveWaveform wf = synthesize_waveform(seqs({{5.0, 5.0}, {5.0, 5.0}}), {0, 1},
                                                 1.0e-10, 10.0e9, 0.0);
    for (double v : wf.samples) CHECK(v == 0.5);
}

TEST_CASE("scale window error paths") {
    AffineScale quant;
    quant.mode = AffineScale::Mode::quantile;
    CHECK_THROWS_AS(resolve_scale_window({}, quant), EmptyInput);
    quant.qlo = 0.9;
    quant.qhi = 0.2;
    CHECK_THROWS_AS(resolve_scale_window(seqs({{1.0, 2.0}}), quant), ConfigError);
    quant.qlo = -0.1;
    quant.qhi = 0.5;
    CHECK_THROWS_AS(resolve_scale_window(seqs({{1.0, 2.0}}), quant), ConfigError);
    CHECK_THROWS_AS(scale_mode_from_string("adaptive"), ConfigError);
    for (const auto mode :
         {AffineScale::Mode::full, AffineScale::Mode::fixed, AffineScale::Mode::quantile})
        CHECK(scale_mode_from_string(to_string(mode)) == mode);
}

TEST_CASE("synthesis rejects malformed input") {
    CHECK_THROWS_AS(synthesize_waveform({}, {}, 1e-10, 1e10, 0.0), EmptyInput);
    CHECK_THROWS_AS(synthesize_waveform(seqs({{}}), {0}, 1e-10, 1e10, 0.0), EmptyInput);
    CHECK_THROWS_AS(synthesize_waveform(seqs({{1.0}, {1.0, 2.0}}), {0, 1}, 1e-10, 1e10, 0.0),
                    DimensionMismatch);
    CHECK_THROWS_AS(synthesize_waveform(seqs({{1.0}}), {0, 1}, 1e-10, 1e10, 0.0),
                    DimensionMismatch);
    // theta of 250 ps at 10 GS/s is 2.5 samples: not representable.
    CHECK_THROWS_AS(synthesize_waveform(seqs({{1.0, 2.0}}), {0}, 2.5e-10, 10.0e9, 0.0),
                    ConfigError);
    CHECK_THROWS_AS(synthesize_waveform(seqs({{1.0, 2.0}}), {0}, 2.5e-10, 12.0e9, 1.0e-10),
                    ConfigError);  // gap of 1.2 samples
    CHECK_THROWS_AS(synthesize_waveform(seqs({{1.0, 2.0}}), {0}, -1.0e-10, 12.0e9, 0.0),
                    ConfigError);
    CHECK_THROWS_AS(synthesize_waveform(seqs({{1.0, 2.0}}), {0}, 2.5e-10, 12.0e9, -1.0e-9),
                    ConfigError);
}

TEST_CASE("reslice inverts the hold and the affine map") {
    const auto sequences = seqs({{0.5, 1.5, 4.5}, {2.5, 0.5, 3.5}});
    const DriveWaveform wf = synthesize_waveform(sequences, {0, 1}, 2.5e-10, 12.0e9, 2.0e-9);
    for (std::size_t p = 0; p < 2; ++p) {
        const NodeSequence back = reslice_segment(wf, p);
        REQUIRE(back.values.size() == 3);
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(back.values[i] == doctest::Approx(sequences[p].values[i]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(reslice_segment(wf, 2), DimensionMismatch);

    // Values outside a saturating window come back pinned to its edges.
    AffineScale clamp;
    clamp.mode = AffineScale::Mode::fixed;
    clamp.min = 1.0;
    clamp.max = 4.0;
    const DriveWaveform cw = synthesize_waveform(sequences, {0, 1}, 2.5e-10, 12.0e9, 0.0, clamp);
    const NodeSequence back = reslice_segment(cw, 0);
    CHECK(back.values[0] == doctest::Approx(1.0));  // 0.5 pinned up to the window floor
    CHECK(back.values[2] == doctest::Approx(4.0));  // 4.5 pinned down to the ceiling
}

TEST_CASE("rational ratio approximation for commensurate periods") {
    const Rational half = approximate_ratio(0.5, "test");
    CHECK(half.num == 1);
    CHECK(half.den == 2);
    const Rational three = approximate_ratio(3.0, "test");
    CHECK(three.num == 3);
    CHECK(three.den == 1);
    const Rational fine = approximate_ratio(1.0e-4, "test");
    CHECK(fine.num == 1);
    CHECK(fine.den == 10000);

    CHECK(half.floor_mul(5) == 2);
    CHECK(half.ceil_mul(5) == 3);
    CHECK(three.floor_mul(4) == 12);

    CHECK_THROWS_AS(approximate_ratio(0.0, "test"), ConfigError);
    CHECK_THROWS_AS(approximate_ratio(-1.0, "test"), ConfigError);
}
