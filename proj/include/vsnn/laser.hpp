#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "vsnn/errors.hpp"
#include "vsnn/pipeline.hpp"

namespace vsnn {

using Complex = std::complex<double>;

// Which dynamical model backs the neuron. spin_flip is the full
// two-polarization VCSEL rate-equation model; surrogate is a two-variable
// slow-fast excitable model with the same drive and trace interface, kept
// for fast smoke runs. Downstream code never looks past IntensityTrace.
enum class NeuronModel { spin_flip, surrogate };

std::string to_string(NeuronModel m);
NeuronModel neuron_model_from_string(const std::string& s);

// Which optical power the trace reports.
enum class ReadoutMode { subsidiary, total };

std::string to_string(ReadoutMode m);
ReadoutMode readout_mode_from_string(const std::string& s);

// Device and operating-point parameters. All rates are 1/s, detuning in Hz,
// pump normalized to 1 at threshold. At the default operating point the
// spin dynamics select the x polarization: the free-running device lases in
// x and the y (subsidiary) mode, sitting a birefringence splitting above
// it, receives the injection.
struct LaserParams {
    double field_decay_rate = 3.0e11;        // kappa
    double carrier_decay_rate = 1.0e9;       // gamma
    double linewidth_enhancement = 3.0;      // alpha
    double spin_relaxation_rate = 5.0e10;    // gamma_s
    double birefringence_rate = 1.884955592153876e11;  // gamma_p [rad/s], 2*pi*30 GHz
    double dichroism_rate = 1.0e8;           // gamma_a
    double bias_pump = 2.9;                  // mu
    double injection_amplitude = 0.05;       // normalized field units
    // Master frequency minus the subsidiary-mode resonance. Negative means
    // the master is red-detuned from the subsidiary mode.
    double detuning = -2.0e9;                // Hz
    double noise_strength = 0.0;             // Langevin field noise, 0 = off
    NeuronModel model = NeuronModel::spin_flip;

    void validate() const;  // throws ConfigError on non-positive rates etc.

    // Subsidiary-mode resonance in the free-running frame [rad/s].
    double subsidiary_resonance() const;
    // Injection (master) angular frequency in the free-running frame [rad/s].
    double injection_frame_rate() const;
};

// Instantaneous dynamical state. For the surrogate model carrier_inversion
// and spin_imbalance hold its two variables (v, w) and field_y mirrors the
// mapped output amplitude.
struct LaserState {
    Complex field_x{0.0, 0.0};
    Complex field_y{0.0, 0.0};
    double carrier_inversion = 0.0;
    double spin_imbalance = 0.0;
    double time = 0.0;  // seconds

    bool finite() const;
};

// Time derivative of LaserState under the model equations.
struct LaserDeriv {
    Complex field_x{0.0, 0.0};
    Complex field_y{0.0, 0.0};
    double carrier_inversion = 0.0;
    double spin_imbalance = 0.0;
};

// Model right-hand side, exposed so steady-state residuals can be checked
// directly against the equations. drive is the injected field amplitude.
LaserDeriv model_rhs(const LaserState& state, const LaserParams& params, Complex drive);

double intensity(const LaserState& state, ReadoutMode mode);

// Uniformly sampled optical power trace.
struct IntensityTrace {
    std::vector<double> samples;   // power, arbitrary units
    double sample_period = 0.0;    // seconds
    double start_time = 0.0;       // seconds

    double time_at(std::size_t i) const { return start_time + sample_period * static_cast<double>(i); }
};

// Maximum stable step for the fixed-step integrator.
inline constexpr double kMaxStep = 0.5e-12;

// One fixed-step 4th-order step. Deterministic; noise is handled by
// simulate() as a seeded post-step increment.
LaserState step(const LaserState& state, const LaserParams& params, Complex drive_sample,
                double dt);

// How normalized drive levels map onto the injected field amplitude.
// sense=drop: E_inj = A * (1 - depth * u); sense=rise: E_inj = A * (1 - depth + depth * u).
// Gaps (u = 0) always sit at the locked quiescent amplitude for sense=drop.
enum class ModulationSense { drop, rise };

std::string to_string(ModulationSense s);
ModulationSense modulation_sense_from_string(const std::string& s);

struct DriveMapping {
    double depth = 1.0;  // in [0, 1]
    ModulationSense sense = ModulationSense::drop;

    Complex amplitude(double level, double injection_amplitude) const;
};

struct SimulateOptions {
    double dt = 1.0e-13;                   // seconds
    double trace_sample_period = 2.0e-12;  // seconds; >= dt, integer multiple of dt
    DriveMapping mapping{};
    ReadoutMode readout = ReadoutMode::subsidiary;
    std::uint64_t seed = 0;                // noise stream seed (used when noise_strength > 0)
};

// One continuous integration over the full drive duration, starting from the
// injection-locked equilibrium, downsampled to trace_sample_period.
IntensityTrace simulate(const LaserParams& params, const DriveWaveform& drive,
                        const SimulateOptions& opts);

// Per-data-point mode: every layout segment (plus its trailing gap) is
// integrated independently from the injection-locked equilibrium. Requires
// segment boundaries aligned to both dt and the trace grid. The _serial
// variant is the reference implementation; the unqualified one fans segments
// out across OpenMP threads and must produce bit-identical samples.
IntensityTrace simulate_per_point(const LaserParams& params, const DriveWaveform& drive,
                                  const SimulateOptions& opts);
IntensityTrace simulate_per_point_serial(const LaserParams& params, const DriveWaveform& drive,
                                         const SimulateOptions& opts);

enum class SteadyMethod { root_finding, integration };

struct SteadyState {
    LaserState state;
    SteadyMethod method = SteadyMethod::integration;
    double residual = 0.0;  // max-norm of the model right-hand side at the result
};

struct SteadyStateOptions {
    double dt = 1.0e-13;
    double max_time = 5.0e-7;       // integration budget, seconds
    double newton_tolerance = 1.0e-10;
    double settle_tolerance = 1.0e-9;  // relative intensity change per ns
};

// Fixed point (or constant-intensity rotating-wave state for zero drive)
// under a constant drive amplitude.
SteadyState steady_state(const LaserParams& params, Complex drive_level,
                         const SteadyStateOptions& opts = {});

// Operating-point search grid.
struct SearchGrid {
    std::vector<double> injection_amplitudes;
    std::vector<double> detunings;  // Hz
};

struct CalibrationSettings {
    double dt = 1.0e-13;
    double trace_sample_period = 2.0e-12;
    double quiet_time = 1.0e-7;          // lock check duration (after settle)
    double settle_time = 2.0e-8;
    double reference_drop = 0.8;         // reference perturbation depth (fraction of A);
                                         // deep enough to clear thresholds past mid-range
    double reference_duration = 2.5e-10; // seconds
    double spike_rel_threshold = 0.4;    // spike = excursion above (1 + this) * locked level
    double spike_merge_time = 4.0e-10;   // excursions closer than this are one event
                                         // (folds in the relaxation ringing after a spike)
    double fwhm_min = 50.0e-12;
    double fwhm_max = 300.0e-12;
    double refractory_interval = 5.0e-10;
    double recovery_interval = 5.0e-9;
    ReadoutMode readout = ReadoutMode::subsidiary;
};

// Outcome of probing one grid point; kept for diagnostics.
struct CalibrationProbe {
    double injection_amplitude = 0.0;
    double detuning = 0.0;
    bool locks = false;
    bool excitable = false;
    double perturbation_threshold = 0.0;  // p*, fraction of A
    double spike_fwhm = 0.0;              // seconds
    std::string reason;                   // why the point was rejected, empty if accepted
};

struct CalibrationResult {
    LaserParams params;                   // input params with amplitude/detuning set
    double perturbation_threshold = 0.0;  // p* at the chosen point
    double locked_intensity = 0.0;
    double spike_peak = 0.0;              // peak power of the reference spike
    double spike_fwhm = 0.0;              // seconds
    double refractory_window = 0.0;       // shortest separation giving two distinct spikes
    double margin = 0.0;                  // relative amplitude margin to the locking boundary
    double suggested_modulation_depth = 0.0;
    double suggested_threshold = 0.0;     // power midway between lock level and spike peak
    std::vector<CalibrationProbe> probes;
};

// Scans the grid for an excitable operating point: locks when quiet, fires
// exactly one spike for the reference perturbation, all-or-nothing around
// the measured threshold, spike width and refractory behaviour in band.
CalibrationResult calibrate_operating_point(const LaserParams& params, const SearchGrid& grid,
                                            const CalibrationSettings& settings = {});

}  // namespace vsnn
