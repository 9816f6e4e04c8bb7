// Benchmark and equivalence check: every OpenMP kernel against its serial
// reference implementation. Exits non-zero if any pair of results differs.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "vsnn/config.hpp"
#include "vsnn/detector.hpp"
#include "vsnn/harness.hpp"
#include "vsnn/rng.hpp"

namespace {

template <typename F>
double time_ms(F&& body) {
    const auto start = std::chrono::steady_clock::now();
    body();
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count();
}

bool report(const char* name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-28s %10.1f ms %10.1f ms %9.2fx   %s\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms, identical ? "identical" : "MISMATCH");
    return identical;
}

}  // namespace

int main(int argc, char** argv) {
    int threads = 0;
    int n_points_per_class = 8;
    CLI::App app{"Serial-versus-threaded benchmark for the simulation kernels"};
    app.add_option("--threads", threads, "Worker thread count (0 = library default)");
    app.add_option("--points", n_points_per_class, "Flowers per class in the laser benchmark")
        ->capture_default_str();
    CLI11_PARSE(app, argc, argv);
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both columns run serially\n");
#endif

    try {
        vsnn::Config config = vsnn::default_config();
        config.pipeline.n_nodes = 64;

        const vsnn::IrisDataset full = vsnn::load_iris("");
        vsnn::IrisDataset subset;
        for (int cls = 0; cls < 3; ++cls)
            for (int i = 0; i < n_points_per_class; ++i) {
                subset.points.push_back(full.points[static_cast<std::size_t>(50 * cls + i)]);
                subset.labels.push_back(full.labels[static_cast<std::size_t>(50 * cls + i)]);
            }

        const vsnn::MaskMatrix mask = vsnn::experiment_mask(config);
        std::vector<vsnn::NodeSequence> sequences;
        std::vector<int> ids;
        for (int i = 0; i < subset.n_points(); ++i) {
            sequences.push_back(
                vsnn::mask_datapoint(mask, subset.points[static_cast<std::size_t>(i)]));
            ids.push_back(i);
        }
        const vsnn::DriveWaveform drive = vsnn::synthesize_waveform(
            sequences, ids, config.pipeline.node_duration, config.pipeline.sample_rate,
            config.pipeline.gap_duration, config.pipeline.scale);

        vsnn::SimulateOptions opts;
        opts.dt = config.simulation.dt;
        opts.trace_sample_period = config.simulation.trace_sample_period;
        opts.mapping = config.drive;

        std::printf("%-28s %13s %13s %10s\n", "kernel", "serial", "threaded", "speedup");
        bool all_identical = true;

        vsnn::IntensityTrace trace_serial, trace_parallel;
        const double laser_serial = time_ms(
            [&] { trace_serial = vsnn::simulate_per_point_serial(config.laser, drive, opts); });
        const double laser_parallel =
            time_ms([&] { trace_parallel = vsnn::simulate_per_point(config.laser, drive, opts); });
        all_identical &= report("laser (per-point RK4)", laser_serial, laser_parallel,
                                trace_serial.samples == trace_parallel.samples);

        const double threshold = vsnn::auto_threshold(trace_serial);
        vsnn::SpikeRaster raster_serial, raster_parallel;
        const double bin_serial = time_ms([&] {
            for (int i = 0; i < 200; ++i)
                raster_serial = vsnn::bin_and_threshold_serial(trace_serial, drive, threshold);
        });
        const double bin_parallel = time_ms([&] {
            for (int i = 0; i < 200; ++i)
                raster_parallel = vsnn::bin_and_threshold(trace_serial, drive, threshold);
        });
        all_identical &= report("detector (binning x200)", bin_serial, bin_parallel,
                                raster_serial.states == raster_parallel.states);

        // Bigger synthetic raster so the pairwise distance kernel has work.
        vsnn::SpikeRaster big;
        big.n_points = 150;
        big.n_nodes = 1024;
        big.states.resize(static_cast<std::size_t>(big.n_points) *
                          static_cast<std::size_t>(big.n_nodes));
        vsnn::Rng rng(7);
        for (auto& s : big.states) s = static_cast<std::uint8_t>(rng.below(2));
        std::vector<int> labels;
        for (int cls = 1; cls <= 3; ++cls) labels.insert(labels.end(), 50, cls);

        vsnn::DistanceReport dist_serial, dist_parallel;
        const double dist_serial_ms = time_ms([&] {
            for (int i = 0; i < 20; ++i)
                dist_serial = vsnn::raster_distance_report_serial(big, labels);
        });
        const double dist_parallel_ms = time_ms([&] {
            for (int i = 0; i < 20; ++i) dist_parallel = vsnn::raster_distance_report(big, labels);
        });
        bool dist_same = true;
        for (int a = 0; a < 3; ++a) {
            dist_same &= dist_serial.intra[static_cast<std::size_t>(a)] ==
                         dist_parallel.intra[static_cast<std::size_t>(a)];
            for (int b = 0; b < 3; ++b)
                dist_same &=
                    dist_serial.inter[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] ==
                    dist_parallel.inter[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        }
        all_identical &=
            report("raster distances (x20)", dist_serial_ms, dist_parallel_ms, dist_same);

        if (!all_identical) {
            std::fprintf(stderr, "serial and threaded results differ\n");
            return 1;
        }
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
