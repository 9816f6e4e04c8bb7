#include "vsnn/config.hpp"

#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "vsnn/errors.hpp"

namespace vsnn {

using Json = nlohmann::ordered_json;

std::string to_string(SimulationMode m) {
    return m == SimulationMode::continuous ? "continuous" : "per_point";
}

SimulationMode simulation_mode_from_string(const std::string& s) {
    if (s == "continuous") return SimulationMode::continuous;
    if (s == "per_point") return SimulationMode::per_point;
    throw ConfigError("unknown simulation mode '" + s + "' (continuous|per_point)");
}

void Config::validate() const {
    laser.validate();
    if (!(drive.depth >= 0.0 && drive.depth <= 1.0))
        throw ConfigError("drive.modulation_depth must lie in [0, 1]");
    if (!(simulation.dt > 0.0 && simulation.dt <= kMaxStep))
        throw ConfigError("simulation.dt must lie in (0, " + std::to_string(kMaxStep) + "]");
    if (!(simulation.trace_sample_period >= simulation.dt))
        throw ConfigError("simulation.trace_sample_period must be >= simulation.dt");
    if (pipeline.n_nodes < 1) throw ConfigError("pipeline.n_nodes must be at least 1");
    if (!(pipeline.node_duration > 0.0)) throw ConfigError("pipeline.node_duration must be positive");
    if (!(pipeline.sample_rate > 0.0)) throw ConfigError("pipeline.sample_rate must be positive");
    if (pipeline.gap_duration < 0.0) throw ConfigError("pipeline.gap_duration must be >= 0");
    if (pipeline.scale.mode == AffineScale::Mode::fixed &&
        !(pipeline.scale.max > pipeline.scale.min))
        throw ConfigError("pipeline.scale_max must exceed scale_min for a fixed window");
    if (pipeline.scale.mode == AffineScale::Mode::quantile &&
        !(pipeline.scale.qlo >= 0.0 && pipeline.scale.qlo < pipeline.scale.qhi &&
          pipeline.scale.qhi <= 1.0))
        throw ConfigError("pipeline scale quantiles require 0 <= scale_qlo < scale_qhi <= 1");
    if (!(detector.iqr_factor > 0.0)) throw ConfigError("detector.iqr_factor must be positive");
    if (experiment.train_per_class < 1 || experiment.train_per_class > 49)
        throw ConfigError("experiment.train_per_class must lie in [1, 49]");
}

Config default_config() {
    Config c;
    // Operating point the bundled grid selects; cmd_calibrate re-derives it.
    c.laser.injection_amplitude = 0.024;
    c.laser.detuning = -2.0e9;
    c.drive.depth = 1.0;
    c.calibration.grid.injection_amplitudes = {0.023, 0.024, 0.025, 0.026, 0.028};
    c.calibration.grid.detunings = {-2.0e9, -2.5e9, -3.0e9};
    return c;
}

namespace {

// Tracks one JSON object during parsing: typed getters with full key paths
// in error messages, unknown-key detection at scope exit.
class Section {
  public:
    Section(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    const Json& raw(const std::string& key) {
        seen_.insert(key);
        if (!node_.contains(key)) throw ConfigError(path_ + "." + key + ": missing");
        return node_.at(key);
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        if (!node_.contains(key)) return;  // keep the default
        const Json& v = raw(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError("");
                out = v.get<bool>();
            } else if constexpr (std::is_same_v<T, int>) {
                if (!v.is_number_integer()) throw ConfigError("");
                out = v.get<int>();
            } else if constexpr (std::is_same_v<T, std::uint64_t>) {
                if (!v.is_number_integer()) throw ConfigError("");
                if (!v.is_number_unsigned() && v.get<std::int64_t>() < 0) throw ConfigError("");
                out = v.get<std::uint64_t>();
            } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError("");
                out = v.get<double>();
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError("");
                out = v.get<std::string>();
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
                if (!v.is_array()) throw ConfigError("");
                out.clear();
                for (const auto& e : v) {
                    if (!e.is_number()) throw ConfigError("");
                    out.push_back(e.get<double>());
                }
            }
        } catch (const Json::exception&) {
            throw ConfigError(path_ + "." + key + ": wrong type");
        } catch (const ConfigError&) {
            throw ConfigError(path_ + "." + key + ": wrong type");
        }
    }

    // Enum-style string field parsed through a converter.
    template <typename T, typename F>
    void get_enum(const std::string& key, T& out, F&& from_string) {
        if (!node_.contains(key)) return;
        std::string s;
        get(key, s);
        try {
            out = from_string(s);
        } catch (const ConfigError& e) {
            throw ConfigError(path_ + "." + key + ": " + e.what());
        }
    }

    Section child(const std::string& key) {
        seen_.insert(key);
        if (!node_.contains(key)) throw ConfigError(path_ + "." + key + ": missing");
        return Section(node_.at(key), path_ + "." + key);
    }

    bool has_child(const std::string& key) const { return node_.contains(key); }

    // Every key must have been read (or start with '_').
    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            (void)value;
            if (!key.empty() && key.front() == '_') continue;
            if (!seen_.contains(key)) throw ConfigError(path_ + "." + key + ": unknown key");
        }
    }

  private:
    const Json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

void parse_optional_section(Section& root, const std::string& name,
                            const std::function<void(Section&)>& fill) {
    if (!root.has_child(name)) return;
    Section s = root.child(name);
    fill(s);
    s.finish();
}

Json laser_to_json(const LaserParams& p) {
    Json j;
    j["model"] = to_string(p.model);
    j["field_decay_rate"] = p.field_decay_rate;
    j["carrier_decay_rate"] = p.carrier_decay_rate;
    j["linewidth_enhancement"] = p.linewidth_enhancement;
    j["spin_relaxation_rate"] = p.spin_relaxation_rate;
    j["birefringence_rate"] = p.birefringence_rate;
    j["dichroism_rate"] = p.dichroism_rate;
    j["bias_pump"] = p.bias_pump;
    j["injection_amplitude"] = p.injection_amplitude;
    j["detuning"] = p.detuning;
    j["noise_strength"] = p.noise_strength;
    return j;
}

Json settings_to_json(const CalibrationSettings& s) {
    Json j;
    j["dt"] = s.dt;
    j["trace_sample_period"] = s.trace_sample_period;
    j["quiet_time"] = s.quiet_time;
    j["settle_time"] = s.settle_time;
    j["reference_drop"] = s.reference_drop;
    j["reference_duration"] = s.reference_duration;
    j["spike_rel_threshold"] = s.spike_rel_threshold;
    j["spike_merge_time"] = s.spike_merge_time;
    j["fwhm_min"] = s.fwhm_min;
    j["fwhm_max"] = s.fwhm_max;
    j["refractory_interval"] = s.refractory_interval;
    j["recovery_interval"] = s.recovery_interval;
    j["readout"] = to_string(s.readout);
    return j;
}

Json config_to_json(const Config& c) {
    Json j;
    j["laser"] = laser_to_json(c.laser);

    Json drive;
    drive["modulation_depth"] = c.drive.depth;
    drive["sense"] = to_string(c.drive.sense);
    j["drive"] = drive;

    Json sim;
    sim["dt"] = c.simulation.dt;
    sim["trace_sample_period"] = c.simulation.trace_sample_period;
    sim["readout"] = to_string(c.simulation.readout);
    j["simulation"] = sim;

    Json pipe;
    pipe["n_nodes"] = c.pipeline.n_nodes;
    pipe["node_duration"] = c.pipeline.node_duration;
    pipe["sample_rate"] = c.pipeline.sample_rate;
    pipe["gap_duration"] = c.pipeline.gap_duration;
    pipe["mask_distribution"] = to_string(c.pipeline.mask_distribution);
    pipe["scale_mode"] = to_string(c.pipeline.scale.mode);
    pipe["scale_min"] = c.pipeline.scale.min;
    pipe["scale_max"] = c.pipeline.scale.max;
    pipe["scale_qlo"] = c.pipeline.scale.qlo;
    pipe["scale_qhi"] = c.pipeline.scale.qhi;
    j["pipeline"] = pipe;

    Json det;
    det["threshold"] = c.detector.threshold;
    det["iqr_factor"] = c.detector.iqr_factor;
    det["latency_offset"] = c.detector.latency_offset;
    j["detector"] = det;

    Json exp;
    exp["train_per_class"] = c.experiment.train_per_class;
    exp["seed"] = c.experiment.seed;
    exp["simulation_mode"] = to_string(c.experiment.simulation_mode);
    exp["iris_path"] = c.experiment.iris_path;
    exp["resimulate_per_size"] = c.experiment.resimulate_per_size;
    j["experiment"] = exp;

    Json cal;
    cal["calibrated"] = c.calibration.calibrated;
    Json grid;
    grid["injection_amplitudes"] = c.calibration.grid.injection_amplitudes;
    grid["detunings"] = c.calibration.grid.detunings;
    cal["grid"] = grid;
    cal["settings"] = settings_to_json(c.calibration.settings);
    const CalibrationDiagnostics& d = c.calibration.diagnostics;
    Json diag;
    diag["perturbation_threshold"] = d.perturbation_threshold;
    diag["locked_intensity"] = d.locked_intensity;
    diag["spike_peak"] = d.spike_peak;
    diag["spike_fwhm"] = d.spike_fwhm;
    diag["refractory_window"] = d.refractory_window;
    diag["margin"] = d.margin;
    cal["diagnostics"] = diag;
    j["calibration"] = cal;
    return j;
}

Config config_from_json(const Json& j, const std::string& source) {
    Config c = default_config();
    Section root(j, source);

    parse_optional_section(root, "laser", [&](Section& s) {
        s.get_enum("model", c.laser.model, neuron_model_from_string);
        s.get("field_decay_rate", c.laser.field_decay_rate);
        s.get("carrier_decay_rate", c.laser.carrier_decay_rate);
        s.get("linewidth_enhancement", c.laser.linewidth_enhancement);
        s.get("spin_relaxation_rate", c.laser.spin_relaxation_rate);
        s.get("birefringence_rate", c.laser.birefringence_rate);
        s.get("dichroism_rate", c.laser.dichroism_rate);
        s.get("bias_pump", c.laser.bias_pump);
        s.get("injection_amplitude", c.laser.injection_amplitude);
        s.get("detuning", c.laser.detuning);
        s.get("noise_strength", c.laser.noise_strength);
    });
    parse_optional_section(root, "drive", [&](Section& s) {
        s.get("modulation_depth", c.drive.depth);
        s.get_enum("sense", c.drive.sense, modulation_sense_from_string);
    });
    parse_optional_section(root, "simulation", [&](Section& s) {
        s.get("dt", c.simulation.dt);
        s.get("trace_sample_period", c.simulation.trace_sample_period);
        s.get_enum("readout", c.simulation.readout, readout_mode_from_string);
    });
    parse_optional_section(root, "pipeline", [&](Section& s) {
        s.get("n_nodes", c.pipeline.n_nodes);
        s.get("node_duration", c.pipeline.node_duration);
        s.get("sample_rate", c.pipeline.sample_rate);
        s.get("gap_duration", c.pipeline.gap_duration);
        s.get_enum("mask_distribution", c.pipeline.mask_distribution,
                   mask_distribution_from_string);
        s.get_enum("scale_mode", c.pipeline.scale.mode, scale_mode_from_string);
        s.get("scale_min", c.pipeline.scale.min);
        s.get("scale_max", c.pipeline.scale.max);
        s.get("scale_qlo", c.pipeline.scale.qlo);
        s.get("scale_qhi", c.pipeline.scale.qhi);
    });
    parse_optional_section(root, "detector", [&](Section& s) {
        s.get("threshold", c.detector.threshold);
        s.get("iqr_factor", c.detector.iqr_factor);
        s.get("latency_offset", c.detector.latency_offset);
    });
    parse_optional_section(root, "experiment", [&](Section& s) {
        s.get("train_per_class", c.experiment.train_per_class);
        s.get("seed", c.experiment.seed);
        s.get_enum("simulation_mode", c.experiment.simulation_mode, simulation_mode_from_string);
        s.get("iris_path", c.experiment.iris_path);
        s.get("resimulate_per_size", c.experiment.resimulate_per_size);
    });
    if (root.has_child("calibration")) {
        Section s = root.child("calibration");
        s.get("calibrated", c.calibration.calibrated);
        if (s.has_child("grid")) {
            Section g = s.child("grid");
            g.get("injection_amplitudes", c.calibration.grid.injection_amplitudes);
            g.get("detunings", c.calibration.grid.detunings);
            g.finish();
        }
        if (s.has_child("settings")) {
            Section t = s.child("settings");
            CalibrationSettings& cs = c.calibration.settings;
            t.get("dt", cs.dt);
            t.get("trace_sample_period", cs.trace_sample_period);
            t.get("quiet_time", cs.quiet_time);
            t.get("settle_time", cs.settle_time);
            t.get("reference_drop", cs.reference_drop);
            t.get("reference_duration", cs.reference_duration);
            t.get("spike_rel_threshold", cs.spike_rel_threshold);
            t.get("spike_merge_time", cs.spike_merge_time);
            t.get("fwhm_min", cs.fwhm_min);
            t.get("fwhm_max", cs.fwhm_max);
            t.get("refractory_interval", cs.refractory_interval);
            t.get("recovery_interval", cs.recovery_interval);
            t.get_enum("readout", cs.readout, readout_mode_from_string);
            t.finish();
        }
        if (s.has_child("diagnostics")) {
            Section d = s.child("diagnostics");
            CalibrationDiagnostics& cd = c.calibration.diagnostics;
            d.get("perturbation_threshold", cd.perturbation_threshold);
            d.get("locked_intensity", cd.locked_intensity);
            d.get("spike_peak", cd.spike_peak);
            d.get("spike_fwhm", cd.spike_fwhm);
            d.get("refractory_window", cd.refractory_window);
            d.get("margin", cd.margin);
            d.finish();
        }
        s.finish();
    }
    root.finish();
    c.validate();
    return c;
}

}  // namespace

std::string config_to_json_text(const Config& config) {
    return config_to_json(config).dump(2) + "\n";
}

Config config_from_json_text(const std::string& text, const std::string& source_name) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::exception& e) {
        throw ConfigError(source_name + ": " + e.what());
    }
    return config_from_json(j, source_name);
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json_text(buf.str(), path);
}

void save_config(const Config& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config file '" + path + "'");
    out << config_to_json_text(config);
    if (!out) throw IoError("failed writing config file '" + path + "'");
}

void write_config_template(const std::string& path) {
    Json j = config_to_json(default_config());
    j["laser"]["_doc"] =
        "Device rates in 1/s (birefringence_rate in rad/s), pump normalized to 1 at threshold, "
        "detuning in Hz relative to the subsidiary-mode resonance; model: spin_flip|surrogate.";
    j["drive"]["_doc"] =
        "How normalized drive levels modulate the injected field: sense=drop fires spikes on "
        "power drops of depth modulation_depth (set by calibrate).";
    j["simulation"]["_doc"] =
        "Integrator step dt and output sampling period in seconds; readout: subsidiary|total "
        "optical power.";
    j["pipeline"]["_doc"] =
        "Virtual-node count and timing: node_duration (theta) and gap_duration in seconds, "
        "sample_rate in samples/s; mask_distribution: uniform01|uniform_pm1|bernoulli01; "
        "scale_mode full spans all masked values, fixed saturates outside [scale_min, "
        "scale_max], quantile saturates outside the [scale_qlo, scale_qhi] quantiles.";
    j["detector"]["_doc"] =
        "Spike threshold in trace power units (<= 0 selects the automatic midpoint rule with "
        "iqr_factor as the spikeless fallback); latency_offset shifts all bins, seconds.";
    j["experiment"]["_doc"] =
        "train_per_class in [1, 49]; simulation_mode: per_point|continuous; empty iris_path "
        "uses the bundled dataset; seed drives every random stream.";
    j["calibration"]["_doc"] =
        "Operating-point search grid and probe settings for the calibrate command; calibrated "
        "flips to true once an excitable point has been verified and copied into laser/drive.";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config template '" + path + "'");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing config template '" + path + "'");
}

}  // namespace vsnn
