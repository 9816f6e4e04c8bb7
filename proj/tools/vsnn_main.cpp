// vsnn: photonic spiking-network simulator CLI.
//
// Subcommands: init-config, calibrate, run, sweep, export-raster,
// simulate-trace. Exit codes: 0 success, 1 usage/config/runtime error,
// 2 calibration found no excitable operating point.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "vsnn/config.hpp"
#include "vsnn/detector.hpp"
#include "vsnn/harness.hpp"
#include "vsnn/io.hpp"
#include "vsnn/laser.hpp"
#include "vsnn/svg.hpp"

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 0;
    bool plot = false;
};

std::string fmt(double v) {
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "%.6g", v);
    return buffer;
}

vsnn::Config load_effective_config(const GlobalArgs& args) {
    vsnn::Config config =
        args.config_path.empty() ? vsnn::default_config() : vsnn::load_config(args.config_path);
    if (args.seed_given) config.experiment.seed = args.seed;
    config.validate();
    return config;
}

std::string out_path(const GlobalArgs& args, const std::string& name) {
    std::filesystem::create_directories(args.out_dir);
    return (std::filesystem::path(args.out_dir) / name).string();
}

void apply_threads(const GlobalArgs& args) {
#ifdef _OPENMP
    if (args.threads > 0) omp_set_num_threads(args.threads);
#else
    (void)args;
#endif
}

// Training-size grids: comma-separated entries, each "n" or "lo:hi[:step]".
std::vector<int> parse_sizes(const std::string& text) {
    std::vector<int> sizes;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t comma = text.find(',', start);
        if (comma == std::string::npos) comma = text.size();
        const std::string token = text.substr(start, comma - start);
        start = comma + 1;
        if (token.empty()) throw vsnn::InvalidSize("empty entry in size list '" + text + "'");
        int lo = 0, hi = 0, step = 1;
        const int fields = std::sscanf(token.c_str(), "%d:%d:%d", &lo, &hi, &step);
        if (fields < 1 || step < 1)
            throw vsnn::InvalidSize("cannot parse size entry '" + token + "'");
        if (fields == 1) hi = lo;
        for (int s = lo; s <= hi; s += step) sizes.push_back(s);
    }
    if (sizes.empty()) throw vsnn::InvalidSize("size list '" + text + "' is empty");
    return sizes;
}

void print_confusion(const vsnn::ConfusionMatrix& confusion) {
    std::cout << "confusion (rows = true class):\n";
    std::printf("  %-12s%12s%12s%12s\n", "", "setosa", "versicolor", "virginica");
    for (std::size_t row = 0; row < 3; ++row)
        std::printf("  %-12s%12d%12d%12d\n", std::string(vsnn::kSpeciesNames[row]).c_str(),
                    confusion.counts[row][0], confusion.counts[row][1],
                    confusion.counts[row][2]);
}

int cmd_init_config(const GlobalArgs& args) {
    const std::string path =
        args.config_path.empty() ? "vsnn_config.json" : args.config_path;
    vsnn::write_config_template(path);
    std::cout << "wrote documented default config to " << path << "\n";
    return 0;
}

int cmd_calibrate(const GlobalArgs& args) {
    vsnn::Config config = load_effective_config(args);
    std::cout << "scanning " << config.calibration.grid.injection_amplitudes.size() << " x "
              << config.calibration.grid.detunings.size()
              << " operating-point grid (this integrates the laser, allow a few seconds)...\n";
    const vsnn::CalibrationResult result = vsnn::calibrate_operating_point(
        config.laser, config.calibration.grid, config.calibration.settings);

    for (const auto& probe : result.probes)
        std::cout << "  A=" << fmt(probe.injection_amplitude)
                  << " detuning=" << fmt(probe.detuning / 1.0e9) << " GHz: "
                  << (probe.excitable ? "excitable, p*=" + fmt(probe.perturbation_threshold)
                                      : "rejected (" + probe.reason + ")")
                  << "\n";

    config.laser = result.params;
    config.drive.depth = result.suggested_modulation_depth;
    config.detector.threshold = result.suggested_threshold;
    config.calibration.calibrated = true;
    config.calibration.diagnostics.perturbation_threshold = result.perturbation_threshold;
    config.calibration.diagnostics.locked_intensity = result.locked_intensity;
    config.calibration.diagnostics.spike_peak = result.spike_peak;
    config.calibration.diagnostics.spike_fwhm = result.spike_fwhm;
    config.calibration.diagnostics.refractory_window = result.refractory_window;
    config.calibration.diagnostics.margin = result.margin;

    const std::string path = out_path(args, "calibrated_config.json");
    vsnn::save_config(config, path);

    std::cout << "selected A=" << fmt(result.params.injection_amplitude)
              << ", detuning=" << fmt(result.params.detuning / 1.0e9) << " GHz\n"
              << "  perturbation threshold p* = " << fmt(result.perturbation_threshold)
              << " (fraction of the injection amplitude)\n"
              << "  locked power " << fmt(result.locked_intensity) << ", spike peak "
              << fmt(result.spike_peak) << ", FWHM " << fmt(result.spike_fwhm * 1.0e12)
              << " ps, refractory window " << fmt(result.refractory_window * 1.0e12) << " ps\n"
              << "  suggested modulation depth " << fmt(result.suggested_modulation_depth)
              << ", detector threshold " << fmt(result.suggested_threshold) << "\n"
              << "wrote " << path << "\n";
    return 0;
}

int cmd_run(const GlobalArgs& args, const std::string& command_line) {
    const vsnn::Config config = load_effective_config(args);
    const vsnn::IrisDataset dataset = vsnn::load_iris(config.experiment.iris_path);
    const vsnn::ExperimentReport report = vsnn::run_experiment(config, dataset);

    vsnn::RunManifest manifest;
    manifest.config = config;
    manifest.command = command_line;
    const auto emit = [&](const std::string& name, auto&& writer) {
        const std::string path = out_path(args, name);
        writer(path);
        manifest.artifacts[name] = path;
    };
    emit("raster.csv", [&](const std::string& p) { vsnn::write_raster_csv(p, report.raster); });
    emit("weights.csv",
         [&](const std::string& p) { vsnn::write_weights_csv(p, report.weights); });
    emit("confusion.csv",
         [&](const std::string& p) { vsnn::write_confusion_csv(p, report.confusion); });
    emit("report.json",
         [&](const std::string& p) { vsnn::write_report_json(p, report, dataset); });
    if (args.plot)
        emit("raster.svg", [&](const std::string& p) {
            vsnn::write_raster_svg(p, report.raster, dataset.labels);
        });
    vsnn::write_manifest(out_path(args, "manifest.json"), manifest);

    std::cout << "simulated " << dataset.n_points() << " points x " << config.pipeline.n_nodes
              << " nodes (" << fmt(report.waveform_duration * 1.0e6) << " us of drive), seed "
              << report.seed << "\n"
              << "threshold " << fmt(report.threshold)
              << (report.threshold_was_auto ? " (auto)" : " (configured)") << "\n"
              << "test accuracy " << fmt(report.accuracy) << " ("
              << report.confusion.diagonal() << "/" << report.confusion.total() << ")\n";
    print_confusion(report.confusion);
    std::cout << "artifacts in " << args.out_dir << "\n";
    return 0;
}

int cmd_sweep(const GlobalArgs& args, const std::string& sizes_text, int runs,
              const std::string& command_line) {
    const vsnn::Config config = load_effective_config(args);
    const vsnn::IrisDataset dataset = vsnn::load_iris(config.experiment.iris_path);
    const std::vector<int> sizes = parse_sizes(sizes_text);
    const vsnn::ErrorCurve curve = vsnn::sweep_training_size(config, dataset, sizes, runs);

    vsnn::RunManifest manifest;
    manifest.config = config;
    manifest.command = command_line;
    const std::string csv_path = out_path(args, "error_curve.csv");
    vsnn::write_error_curve_csv(csv_path, curve);
    manifest.artifacts["error_curve.csv"] = csv_path;
    if (args.plot) {
        const std::string svg_path = out_path(args, "error_curve.svg");
        vsnn::write_error_curve_svg(svg_path, curve);
        manifest.artifacts["error_curve.svg"] = svg_path;
    }
    vsnn::write_manifest(out_path(args, "manifest.json"), manifest);

    std::cout << "sweep over " << sizes.size() << " training sizes, " << runs << " runs\n";
    std::cout << "mean test error by training points per class:\n";
    for (std::size_t i = 0; i < sizes.size(); ++i)
        std::cout << "  " << sizes[i] << ": " << fmt(curve.mean_error[i]) << "\n";
    std::cout << "artifacts in " << args.out_dir << "\n";
    return 0;
}

int cmd_export_raster(const GlobalArgs& args, const std::string& command_line) {
    const vsnn::Config config = load_effective_config(args);
    const vsnn::IrisDataset dataset = vsnn::load_iris(config.experiment.iris_path);
    const vsnn::RasterBundle bundle = vsnn::simulate_raster(config, dataset);

    vsnn::RunManifest manifest;
    manifest.config = config;
    manifest.command = command_line;
    const std::string csv_path = out_path(args, "raster.csv");
    vsnn::write_raster_csv(csv_path, bundle.raster);
    manifest.artifacts["raster.csv"] = csv_path;
    if (args.plot) {
        const std::string svg_path = out_path(args, "raster.svg");
        vsnn::write_raster_svg(svg_path, bundle.raster, dataset.labels);
        manifest.artifacts["raster.svg"] = svg_path;
    }
    vsnn::write_manifest(out_path(args, "manifest.json"), manifest);

    std::size_t spiking = 0;
    for (std::uint8_t s : bundle.raster.states) spiking += s;
    std::cout << "raster " << bundle.raster.n_points << " x " << bundle.raster.n_nodes
              << ", threshold " << fmt(bundle.threshold)
              << (bundle.threshold_was_auto ? " (auto)" : " (configured)") << ", spike density "
              << fmt(static_cast<double>(spiking) /
                     static_cast<double>(bundle.raster.states.size()))
              << "\nartifacts in " << args.out_dir << "\n";
    return 0;
}

int cmd_simulate_trace(const GlobalArgs& args, int point_index,
                       const std::string& command_line) {
    const vsnn::Config config = load_effective_config(args);
    const vsnn::IrisDataset dataset = vsnn::load_iris(config.experiment.iris_path);
    const vsnn::DriveWaveform waveform =
        vsnn::single_point_waveform(config, dataset, point_index);

    vsnn::SimulateOptions opts;
    opts.dt = config.simulation.dt;
    opts.trace_sample_period = config.simulation.trace_sample_period;
    opts.mapping = config.drive;
    opts.readout = config.simulation.readout;
    const vsnn::IntensityTrace trace = vsnn::simulate(config.laser, waveform, opts);

    vsnn::RunManifest manifest;
    manifest.config = config;
    manifest.command = command_line;
    const auto emit = [&](const std::string& name, auto&& writer) {
        const std::string path = out_path(args, name);
        writer(path);
        manifest.artifacts[name] = path;
    };
    emit("trace.csv", [&](const std::string& p) { vsnn::write_trace_csv(p, trace); });
    emit("waveform.csv",
         [&](const std::string& p) { vsnn::write_waveform_csv(p, waveform); });
    emit("waveform_meta.json",
         [&](const std::string& p) { vsnn::write_waveform_sidecar(p, waveform); });
    vsnn::write_manifest(out_path(args, "manifest.json"), manifest);

    const double threshold = config.detector.threshold > 0.0
                                 ? config.detector.threshold
                                 : vsnn::auto_threshold(trace, config.detector.iqr_factor);
    const vsnn::SpikeStats stats = vsnn::spike_statistics(
        trace, threshold, config.calibration.settings.spike_merge_time);
    std::cout << "point " << point_index << " ("
              << vsnn::kSpeciesNames[static_cast<std::size_t>(
                     dataset.labels[static_cast<std::size_t>(point_index)] - 1)]
              << "): " << trace.samples.size() << " trace samples over "
              << fmt(waveform.duration() * 1.0e9) << " ns\n"
              << stats.spike_count << " spikes above threshold " << fmt(threshold);
    if (!stats.widths.empty()) {
        double mean_width = 0.0;
        for (double w : stats.widths) mean_width += w;
        mean_width /= static_cast<double>(stats.widths.size());
        std::cout << ", mean FWHM " << fmt(mean_width * 1.0e12) << " ps";
    }
    std::cout << "\nartifacts in " << args.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    GlobalArgs args;
    std::string sizes_text = "1:49";
    int runs = 10;
    int point_index = 0;

    CLI::App app{"Simulator of a GHz-rate photonic spiking neural network built on a single "
                 "optically injected VCSEL"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--config", args.config_path,
                   "Config file (JSON); omit to use built-in defaults");
    app.add_option("--out", args.out_dir, "Output directory for artifacts")
        ->capture_default_str();
    CLI::Option* seed_opt =
        app.add_option("--seed", args.seed, "Override experiment.seed from the config");
    app.add_option("--threads", args.threads, "Worker thread count (0 = library default)");
    app.add_flag("--plot", args.plot, "Also write SVG plots");

    CLI::App* init = app.add_subcommand(
        "init-config", "Write a documented default config (to --config, or vsnn_config.json)");
    CLI::App* calibrate = app.add_subcommand(
        "calibrate", "Search the configured grid for an excitable operating point and write a "
                     "calibrated config copy");
    CLI::App* run =
        app.add_subcommand("run", "Full experiment: simulate, train readout, evaluate");
    CLI::App* sweep =
        app.add_subcommand("sweep", "Error versus training-set size over repeated splits");
    sweep->add_option("--sizes", sizes_text,
                      "Training points per class: comma list of n or lo:hi[:step]")
        ->capture_default_str();
    sweep->add_option("--runs", runs, "Number of repeated runs")->capture_default_str();
    CLI::App* export_raster =
        app.add_subcommand("export-raster", "Simulate and export the spike raster only");
    CLI::App* simulate_trace = app.add_subcommand(
        "simulate-trace", "Simulate one data point and export its power trace and drive "
                          "waveform (with replay metadata)");
    simulate_trace->add_option("--point", point_index, "Dataset point index")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    args.seed_given = seed_opt->count() > 0;
    apply_threads(args);

    std::string command_line;
    for (int i = 0; i < argc; ++i) {
        if (i) command_line += ' ';
        command_line += argv[i];
    }

    try {
        if (init->parsed()) return cmd_init_config(args);
        if (calibrate->parsed()) return cmd_calibrate(args);
        if (run->parsed()) return cmd_run(args, command_line);
        if (sweep->parsed()) return cmd_sweep(args, sizes_text, runs, command_line);
        if (export_raster->parsed()) return cmd_export_raster(args, command_line);
        if (simulate_trace->parsed()) return cmd_simulate_trace(args, point_index, command_line);
    } catch (const vsnn::NoExcitablePointFound& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
