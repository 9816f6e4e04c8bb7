#include "vsnn/laser.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>

#include "vsnn/rational.hpp"
#include "vsnn/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vsnn {

std::string to_string(NeuronModel m) {
    return m == NeuronModel::spin_flip ? "spin_flip" : "surrogate";
}

NeuronModel neuron_model_from_string(const std::string& s) {
    if (s == "spin_flip") return NeuronModel::spin_flip;
    if (s == "surrogate") return NeuronModel::surrogate;
    throw ConfigError("unknown neuron model '" + s + "'");
}

std::string to_string(ReadoutMode m) {
    return m == ReadoutMode::subsidiary ? "subsidiary" : "total";
}

ReadoutMode readout_mode_from_string(const std::string& s) {
    if (s == "subsidiary") return ReadoutMode::subsidiary;
    if (s == "total") return ReadoutMode::total;
    throw ConfigError("unknown readout mode '" + s + "'");
}

std::string to_string(ModulationSense s) {
    return s == ModulationSense::drop ? "drop" : "rise";
}

ModulationSense modulation_sense_from_string(const std::string& s) {
    if (s == "drop") return ModulationSense::drop;
    if (s == "rise") return ModulationSense::rise;
    throw ConfigError("unknown modulation sense '" + s + "'");
}

void LaserParams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw ConfigError(std::string("laser parameter ") + name + " must be positive and finite");
    };
    positive(field_decay_rate, "field_decay_rate");
    positive(carrier_decay_rate, "carrier_decay_rate");
    positive(spin_relaxation_rate, "spin_relaxation_rate");
    positive(birefringence_rate, "birefringence_rate");
    positive(dichroism_rate, "dichroism_rate");
    positive(bias_pump, "bias_pump");
    if (!(linewidth_enhancement >= 0.0) || !std::isfinite(linewidth_enhancement))
        throw ConfigError("laser parameter linewidth_enhancement must be >= 0 and finite");
    if (!(injection_amplitude >= 0.0) || !std::isfinite(injection_amplitude))
        throw ConfigError("laser parameter injection_amplitude must be >= 0 and finite");
    if (!std::isfinite(detuning)) throw ConfigError("laser parameter detuning must be finite");
    if (!(noise_strength >= 0.0) || !std::isfinite(noise_strength))
        throw ConfigError("laser parameter noise_strength must be >= 0 and finite");
    if (dichroism_rate >= field_decay_rate)
        throw ConfigError("laser parameter dichroism_rate must be below field_decay_rate");
    if (model == NeuronModel::surrogate && !(injection_amplitude > 0.0))
        throw ConfigError("surrogate model requires injection_amplitude > 0");
}

double LaserParams::subsidiary_resonance() const {
    return linewidth_enhancement * dichroism_rate + birefringence_rate;
}

double LaserParams::injection_frame_rate() const {
    return subsidiary_resonance() + 2.0 * M_PI * detuning;
}

bool LaserState::finite() const {
    return std::isfinite(field_x.real()) && std::isfinite(field_x.imag()) &&
           std::isfinite(field_y.real()) && std::isfinite(field_y.imag()) &&
           std::isfinite(carrier_inversion) && std::isfinite(spin_imbalance) &&
           std::isfinite(time);
}

Complex DriveMapping::amplitude(double level, double injection_amplitude) const {
    const double a = sense == ModulationSense::drop
                         ? injection_amplitude * (1.0 - depth * level)
                         : injection_amplitude * (1.0 - depth * (1.0 - level));
    return Complex(a, 0.0);
}

namespace {

// Surrogate model constants (slow-fast excitable pair with an algebraic
// power read-out; rest output is exactly kSurLockPower).
constexpr double kSurTauV = 2.5e-11;
constexpr double kSurTauW = 7.0e-10;
constexpr double kSurA = 0.7;
constexpr double kSurB = 0.8;
constexpr double kSurBias = 0.2;
constexpr double kSurGain = 1.3;
constexpr double kSurOutGain = 2.0;
constexpr double kSurOutOffset = -0.3;
constexpr double kSurLockPower = 1.0;

// Deterministic seed applied to the suppressed polarization at the start of
// every run so cross-gain dynamics are not frozen by an exact zero.
constexpr double kPolarizationSeed = 1.0e-9;

constexpr std::uint64_t kNoiseStreamTag = 0x6e6f697365ULL;  // noise stream id

struct S6 {
    double xr, xi, yr, yi, cn, sm;
};

struct Pre {
    double k, ka, ga, gp, w, g, gs, mu;
    double inv_tau_v, inv_tau_w;
    double inj;  // nominal injection amplitude, surrogate drive normalization
};

Pre precompute(const LaserParams& p) {
    Pre c{};
    c.k = p.field_decay_rate;
    c.ka = p.field_decay_rate * p.linewidth_enhancement;
    c.ga = p.dichroism_rate;
    c.gp = p.birefringence_rate;
    c.w = p.injection_frame_rate();
    c.g = p.carrier_decay_rate;
    c.gs = p.spin_relaxation_rate;
    c.mu = p.bias_pump;
    c.inv_tau_v = 1.0 / kSurTauV;
    c.inv_tau_w = 1.0 / kSurTauW;
    c.inj = p.injection_amplitude;
    return c;
}

inline S6 rhs_spin_flip(const S6& s, const Pre& c, double edr, double edi) {
    const double nm1 = s.cn - 1.0;
    const double gxr = nm1 * s.xr - s.sm * s.yi;
    const double gxi = nm1 * s.xi + s.sm * s.yr;
    const double gyr = nm1 * s.yr + s.sm * s.xi;
    const double gyi = nm1 * s.yi - s.sm * s.xr;
    S6 d;
    d.xr = c.k * gxr - c.ka * gxi - c.ga * s.xr + c.gp * s.xi + c.w * s.xi;
    d.xi = c.k * gxi + c.ka * gxr - c.ga * s.xi - c.gp * s.xr - c.w * s.xr;
    d.yr = c.k * gyr - c.ka * gyi + c.ga * s.yr - c.gp * s.yi + c.w * s.yi + c.k * edr;
    d.yi = c.k * gyi + c.ka * gyr + c.ga * s.yi + c.gp * s.yr - c.w * s.yr + c.k * edi;
    const double ix = s.xr * s.xr + s.xi * s.xi;
    const double iy = s.yr * s.yr + s.yi * s.yi;
    const double xt = -2.0 * (s.yi * s.xr - s.yr * s.xi);
    d.cn = -c.g * (s.cn * (1.0 + ix + iy) - c.mu + s.sm * xt);
    d.sm = -c.gs * s.sm - c.g * (s.sm * (ix + iy) + s.cn * xt);
    return d;
}

inline double surrogate_input(const Pre& c, double edr, double edi) {
    const double mag = std::sqrt(edr * edr + edi * edi);
    const double u_eff = 1.0 - mag / c.inj;
    return kSurBias + kSurGain * u_eff;
}

inline S6 rhs_surrogate(const S6& s, const Pre& c, double edr, double edi) {
    const double input = surrogate_input(c, edr, edi);
    S6 d{};
    d.cn = (s.cn - s.cn * s.cn * s.cn / 3.0 - s.sm + input) * c.inv_tau_v;
    d.sm = (s.cn + kSurA - kSurB * s.sm) * c.inv_tau_w;
    return d;
}

inline double surrogate_power(double v) {
    const double e = std::max(0.0, v + kSurOutOffset);
    return kSurLockPower * (1.0 + kSurOutGain * e * e);
}

template <int MODEL>
inline S6 rhs_any(const S6& s, const Pre& c, double edr, double edi) {
    if constexpr (MODEL == 0)
        return rhs_spin_flip(s, c, edr, edi);
    else
        return rhs_surrogate(s, c, edr, edi);
}

inline S6 axpy(const S6& a, double h, const S6& b) {
    return {a.xr + h * b.xr, a.xi + h * b.xi, a.yr + h * b.yr,
            a.yi + h * b.yi, a.cn + h * b.cn, a.sm + h * b.sm};
}

template <int MODEL>
inline void rk4_step(S6& s, const Pre& c, double dt, double edr, double edi) {
    const double h2 = 0.5 * dt;
    const S6 k1 = rhs_any<MODEL>(s, c, edr, edi);
    const S6 k2 = rhs_any<MODEL>(axpy(s, h2, k1), c, edr, edi);
    const S6 k3 = rhs_any<MODEL>(axpy(s, h2, k2), c, edr, edi);
    const S6 k4 = rhs_any<MODEL>(axpy(s, dt, k3), c, edr, edi);
    const double h6 = dt / 6.0;
    s.xr += h6 * (k1.xr + 2.0 * (k2.xr + k3.xr) + k4.xr);
    s.xi += h6 * (k1.xi + 2.0 * (k2.xi + k3.xi) + k4.xi);
    s.yr += h6 * (k1.yr + 2.0 * (k2.yr + k3.yr) + k4.yr);
    s.yi += h6 * (k1.yi + 2.0 * (k2.yi + k3.yi) + k4.yi);
    s.cn += h6 * (k1.cn + 2.0 * (k2.cn + k3.cn) + k4.cn);
    s.sm += h6 * (k1.sm + 2.0 * (k2.sm + k3.sm) + k4.sm);
}

template <int MODEL>
inline double power_of(const S6& s, ReadoutMode mode) {
    if constexpr (MODEL == 1) return surrogate_power(s.cn);
    const double iy = s.yr * s.yr + s.yi * s.yi;
    if (mode == ReadoutMode::subsidiary) return iy;
    return s.xr * s.xr + s.xi * s.xi + iy;
}

inline bool state_healthy(const S6& s) {
    return std::isfinite(s.xr) && std::isfinite(s.xi) && std::isfinite(s.yr) &&
           std::isfinite(s.yi) && std::isfinite(s.cn) && std::isfinite(s.sm) &&
           std::abs(s.cn) < 1.0e6 &&
           s.xr * s.xr + s.xi * s.xi + s.yr * s.yr + s.yi * s.yi < 1.0e12;
}

// A suppressed polarization decays exponentially forever; once it is far
// below anything observable, snap it to exact zero so the arithmetic never
// enters the subnormal range (which is both slow and irrelevant here).
inline void flush_tiny(S6& s) {
    if (s.xr * s.xr + s.xi * s.xi < 1.0e-100) s.xr = s.xi = 0.0;
    if (s.yr * s.yr + s.yi * s.yi < 1.0e-100) s.yr = s.yi = 0.0;
    if (std::abs(s.sm) < 1.0e-50) s.sm = 0.0;
}

[[noreturn]] void throw_unhealthy(std::int64_t k, double dt) {
    throw NonFiniteState("laser state became non-finite or unbounded near t = " +
                         std::to_string(static_cast<double>(k) * dt) + " s");
}

// A run is a maximal stretch of steps sharing one held drive value.
struct Run {
    double edr, edi;
    std::int64_t n;
};

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

// Steps covered by drive samples [s_begin, s_end) when step k sees sample
// floor(k * num / den); runs with identical mapped amplitude are merged.
std::vector<Run> build_runs(const std::vector<double>& levels, std::int64_t s_begin,
                            std::int64_t s_end, const Rational& ratio, const DriveMapping& map,
                            double inj) {
    std::vector<Run> runs;
    runs.reserve(static_cast<std::size_t>(s_end - s_begin));
    std::int64_t prev = ceil_div(s_begin * ratio.den, ratio.num);
    for (std::int64_t s = s_begin; s < s_end; ++s) {
        const std::int64_t next = ceil_div((s + 1) * ratio.den, ratio.num);
        const std::int64_t n = next - prev;
        prev = next;
        if (n == 0) continue;
        const Complex ed = map.amplitude(levels[static_cast<std::size_t>(s)], inj);
        if (!runs.empty() && runs.back().edr == ed.real() && runs.back().edi == ed.imag())
            runs.back().n += n;
        else
            runs.push_back({ed.real(), ed.imag(), n});
    }
    return runs;
}

// Integrates the run list starting at global step k0, capturing the power at
// every step index divisible by stride and not beyond k_last_cap into
// cap_base[k / stride]. Health is checked at every capture and every 8192
// steps. Noise, when enabled, is a post-step Euler-Maruyama increment.
template <int MODEL>
void run_kernel(S6& s, const Pre& c, const std::vector<Run>& runs, double dt,
                std::int64_t k0, std::int64_t stride, std::int64_t k_last_cap, double* cap_base,
                ReadoutMode mode, Rng* noise, double sigma) {
    std::int64_t k = k0;
    std::int64_t next_cap = cap_base ? k0 : std::numeric_limits<std::int64_t>::max();
    std::int64_t next_check = k0 + 8192;
    auto boundary = [&](std::int64_t kk) {
        if (kk == next_cap) {
            if (kk <= k_last_cap) {
                if (!state_healthy(s)) throw_unhealthy(kk, dt);
                cap_base[kk / stride] = power_of<MODEL>(s, mode);
            }
            next_cap += stride;
            flush_tiny(s);
        }
        if (kk >= next_check) {
            if (!state_healthy(s)) throw_unhealthy(kk, dt);
            flush_tiny(s);
            next_check = kk + 8192;
        }
    };
    for (const Run& r : runs) {
        for (std::int64_t i = 0; i < r.n; ++i) {
            boundary(k);
            rk4_step<MODEL>(s, c, dt, r.edr, r.edi);
            if (noise) {
                if constexpr (MODEL == 0) {
                    s.xr += sigma * noise->normal();
                    s.xi += sigma * noise->normal();
                    s.yr += sigma * noise->normal();
                    s.yi += sigma * noise->normal();
                } else {
                    s.cn += sigma * noise->normal();
                }
            }
            ++k;
        }
    }
    boundary(k);
    if (!state_healthy(s)) throw_unhealthy(k, dt);
}

void dispatch_kernel(NeuronModel model, S6& s, const Pre& c, const std::vector<Run>& runs,
                     double dt, std::int64_t k0, std::int64_t stride, std::int64_t k_last_cap,
                     double* cap_base, ReadoutMode mode, Rng* noise, double sigma) {
    if (model == NeuronModel::spin_flip)
        run_kernel<0>(s, c, runs, dt, k0, stride, k_last_cap, cap_base, mode, noise, sigma);
    else
        run_kernel<1>(s, c, runs, dt, k0, stride, k_last_cap, cap_base, mode, noise, sigma);
}

S6 to_s6(const LaserState& st) {
    return {st.field_x.real(), st.field_x.imag(), st.field_y.real(),
            st.field_y.imag(), st.carrier_inversion, st.spin_imbalance};
}

LaserState from_s6(const S6& s, double time, NeuronModel model) {
    LaserState st;
    st.field_x = Complex(s.xr, s.xi);
    st.field_y = model == NeuronModel::surrogate ? Complex(std::sqrt(surrogate_power(s.cn)), 0.0)
                                                 : Complex(s.yr, s.yi);
    st.carrier_inversion = s.cn;
    st.spin_imbalance = s.sm;
    st.time = time;
    return st;
}

double rhs_max_norm(const LaserDeriv& d) {
    return std::max({std::abs(d.field_x.real()), std::abs(d.field_x.imag()),
                     std::abs(d.field_y.real()), std::abs(d.field_y.imag()),
                     std::abs(d.carrier_inversion), std::abs(d.spin_imbalance)});
}

void check_step_options(double dt, double trace_period, std::int64_t& stride) {
    if (!(dt > 0.0) || dt > kMaxStep)
        throw ConfigError("dt must be in (0, " + std::to_string(kMaxStep) + "] s");
    if (!(trace_period >= dt))
        throw ConfigError("trace_sample_period must be >= dt");
    const Rational r = approximate_ratio(trace_period / dt, "trace_sample_period / dt");
    if (r.den != 1)
        throw ConfigError("trace_sample_period must be an integer multiple of dt");
    stride = r.num;
}

}  // namespace

LaserDeriv model_rhs(const LaserState& state, const LaserParams& params, Complex drive) {
    params.validate();
    const Pre c = precompute(params);
    const S6 s = to_s6(state);
    const S6 d = params.model == NeuronModel::spin_flip
                     ? rhs_spin_flip(s, c, drive.real(), drive.imag())
                     : rhs_surrogate(s, c, drive.real(), drive.imag());
    LaserDeriv out;
    out.field_x = Complex(d.xr, d.xi);
    out.field_y = params.model == NeuronModel::surrogate ? Complex(0.0, 0.0) : Complex(d.yr, d.yi);
    out.carrier_inversion = d.cn;
    out.spin_imbalance = d.sm;
    return out;
}

double intensity(const LaserState& state, ReadoutMode mode) {
    const double iy = std::norm(state.field_y);
    if (mode == ReadoutMode::subsidiary) return iy;
    return std::norm(state.field_x) + iy;
}

LaserState step(const LaserState& state, const LaserParams& params, Complex drive_sample,
                double dt) {
    params.validate();
    if (!(dt > 0.0) || dt > kMaxStep)
        throw ConfigError("step: dt must be in (0, " + std::to_string(kMaxStep) + "] s");
    const Pre c = precompute(params);
    S6 s = to_s6(state);
    if (params.model == NeuronModel::spin_flip)
        rk4_step<0>(s, c, dt, drive_sample.real(), drive_sample.imag());
    else
        rk4_step<1>(s, c, dt, drive_sample.real(), drive_sample.imag());
    if (!state_healthy(s))
        throw NonFiniteState("laser state became non-finite or unbounded near t = " +
                             std::to_string(state.time + dt) + " s");
    flush_tiny(s);
    return from_s6(s, state.time + dt, params.model);
}

namespace {

// Constant-drive integration used by the steady-state solver and the
// calibration probes; no trace capture, cheap health checks.
template <int MODEL>
void integrate_const(S6& s, const Pre& c, double dt, std::int64_t n, double edr, double edi) {
    for (std::int64_t i = 0; i < n; ++i) {
        rk4_step<MODEL>(s, c, dt, edr, edi);
        if ((i & 8191) == 0) {
            if (!state_healthy(s)) throw_unhealthy(i, dt);
            flush_tiny(s);
        }
    }
    if (!state_healthy(s)) throw_unhealthy(n, dt);
}

void integrate_const_any(NeuronModel m, S6& s, const Pre& c, double dt, std::int64_t n,
                         double edr, double edi) {
    if (m == NeuronModel::spin_flip)
        integrate_const<0>(s, c, dt, n, edr, edi);
    else
        integrate_const<1>(s, c, dt, n, edr, edi);
}

// Locked-branch carrier equation for the reduced fixed-point solve: with the
// dominant polarization off and no spin imbalance, the subsidiary field is
// E_y = -kappa E_d / D(N) and the carrier must satisfy
// N (1 + |E_y|^2) = mu.
Complex locked_field(const Pre& c, double n_val, Complex ed) {
    const Complex dnm(c.k * (n_val - 1.0) + c.ga, c.ka * (n_val - 1.0) + c.gp - c.w);
    return -c.k * ed / dnm;
}

double locked_gap(const Pre& c, double n_val, Complex ed) {
    return n_val * (1.0 + std::norm(locked_field(c, n_val, ed))) - c.mu;
}

}  // namespace

SteadyState steady_state(const LaserParams& params, Complex drive_level,
                         const SteadyStateOptions& opts) {
    params.validate();
    if (!(opts.dt > 0.0) || opts.dt > kMaxStep)
        throw ConfigError("steady_state: dt must be in (0, " + std::to_string(kMaxStep) + "] s");
    const Pre c = precompute(params);

    if (params.model == NeuronModel::surrogate) {
        // The rest point solves a strictly decreasing cubic; bisection is
        // exact enough and Newton polishing tightens the tail.
        const double input = surrogate_input(c, drive_level.real(), drive_level.imag());
        auto f = [&](double v) { return v - v * v * v / 3.0 - (v + kSurA) / kSurB + input; };
        double lo = -4.0, hi = 4.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (f(mid) > 0.0 ? lo : hi) = mid;
        }
        double v = 0.5 * (lo + hi);
        for (int i = 0; i < 8; ++i) {
            const double fp = 1.0 - v * v - 1.0 / kSurB;
            v -= f(v) / fp;
        }
        S6 s{0.0, 0.0, 0.0, 0.0, v, (v + kSurA) / kSurB};
        SteadyState out;
        out.state = from_s6(s, 0.0, params.model);
        out.method = SteadyMethod::root_finding;
        out.residual = rhs_max_norm(model_rhs(out.state, params, drive_level));
        return out;
    }

    // Integrate from a cold start until the windowed mean intensity settles.
    const std::int64_t window = std::max<std::int64_t>(1000, std::llround(1.0e-9 / opts.dt));
    const std::int64_t max_windows =
        std::max<std::int64_t>(1, std::llround(opts.max_time / (static_cast<double>(window) * opts.dt)));
    S6 s{1.0e-3, 0.0, 1.0e-3, 0.0, 1.0, 0.0};
    const double edr = drive_level.real(), edi = drive_level.imag();
    double prev_mean = -1.0;
    int settled = 0;
    bool converged = false;
    for (std::int64_t wdx = 0; wdx < max_windows; ++wdx) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < window; ++i) {
            rk4_step<0>(s, c, opts.dt, edr, edi);
            acc += s.xr * s.xr + s.xi * s.xi + s.yr * s.yr + s.yi * s.yi;
        }
        if (!state_healthy(s)) throw_unhealthy((wdx + 1) * window, opts.dt);
        flush_tiny(s);
        const double mean = acc / static_cast<double>(window);
        if (prev_mean >= 0.0 &&
            std::abs(mean - prev_mean) <= opts.settle_tolerance * std::max(mean, 1.0e-12)) {
            if (++settled >= 3 && wdx >= 10) {
                converged = true;
                break;
            }
        } else {
            settled = 0;
        }
        prev_mean = mean;
    }
    if (!converged)
        throw NoConvergence("steady_state: intensity did not settle within " +
                            std::to_string(opts.max_time) + " s");

    SteadyState out;
    out.state = from_s6(s, 0.0, params.model);
    out.method = SteadyMethod::integration;

    const double ix = s.xr * s.xr + s.xi * s.xi;
    const double iy = s.yr * s.yr + s.yi * s.yi;
    const bool injected = std::norm(drive_level) > 0.0;
    if (injected && ix <= 1.0e-9 * std::max(iy, 1.0e-30)) {
        // Polish on the locked branch: 1-D Newton on the carrier.
        double n_val = s.cn;
        bool ok = false;
        for (int i = 0; i < 60; ++i) {
            const double gval = locked_gap(c, n_val, drive_level);
            if (std::abs(gval) < 1.0e-12 * std::max(1.0, c.mu)) {
                ok = true;
                break;
            }
            const double h = std::max(1.0e-12, 1.0e-8 * std::abs(n_val));
            const double d =
                (locked_gap(c, n_val + h, drive_level) - locked_gap(c, n_val - h, drive_level)) /
                (2.0 * h);
            if (!(std::abs(d) > 0.0)) break;
            const double next = n_val - gval / d;
            if (!std::isfinite(next) || next <= 0.0 || next > c.mu + 1.0) break;
            n_val = next;
        }
        if (ok) {
            const Complex ey = locked_field(c, n_val, drive_level);
            S6 fixed{0.0, 0.0, ey.real(), ey.imag(), n_val, 0.0};
            out.state = from_s6(fixed, 0.0, params.model);
            out.method = SteadyMethod::root_finding;
        }
    }
    out.residual = rhs_max_norm(model_rhs(out.state, params, drive_level));
    return out;
}

namespace {

struct SimPlan {
    Rational ratio;          // dt * sample_rate
    std::int64_t stride = 0; // trace samples every this many steps
    std::int64_t total_steps = 0;
    std::int64_t trace_len = 0;
};

SimPlan make_plan(const DriveWaveform& drive, const SimulateOptions& opts) {
    if (drive.samples.empty()) throw EmptyDrive("simulate: drive waveform has no samples");
    if (!(drive.sample_rate > 0.0)) throw ConfigError("simulate: drive sample_rate must be positive");
    SimPlan plan;
    check_step_options(opts.dt, opts.trace_sample_period, plan.stride);
    plan.ratio = approximate_ratio(opts.dt * drive.sample_rate, "dt * sample_rate");
    const auto n_samples = static_cast<std::int64_t>(drive.samples.size());
    plan.total_steps = ceil_div(n_samples * plan.ratio.den, plan.ratio.num);
    plan.trace_len = plan.total_steps / plan.stride + 1;
    return plan;
}

S6 locked_start(const LaserParams& params, const SimulateOptions& opts) {
    const Complex quiescent = opts.mapping.amplitude(0.0, params.injection_amplitude);
    SteadyStateOptions sopts;
    sopts.dt = opts.dt;
    S6 s = to_s6(steady_state(params, quiescent, sopts).state);
    s.xr += kPolarizationSeed;
    return s;
}

}  // namespace

IntensityTrace simulate(const LaserParams& params, const DriveWaveform& drive,
                        const SimulateOptions& opts) {
    params.validate();
    const SimPlan plan = make_plan(drive, opts);
    S6 s = locked_start(params, opts);
    const Pre c = precompute(params);
    const auto runs = build_runs(drive.samples, 0, static_cast<std::int64_t>(drive.samples.size()),
                                 plan.ratio, opts.mapping, params.injection_amplitude);
    IntensityTrace trace;
    trace.sample_period = opts.trace_sample_period;
    trace.start_time = 0.0;
    trace.samples.assign(static_cast<std::size_t>(plan.trace_len), 0.0);
    Rng noise_rng(mix_seed(opts.seed, kNoiseStreamTag));
    Rng* noise = params.noise_strength > 0.0 ? &noise_rng : nullptr;
    const double sigma = std::sqrt(2.0 * params.noise_strength * opts.dt);
    dispatch_kernel(params.model, s, c, runs, opts.dt, 0, plan.stride, plan.total_steps,
                    trace.samples.data(), opts.readout, noise, sigma);
    return trace;
}

namespace {

IntensityTrace simulate_per_point_impl(const LaserParams& params, const DriveWaveform& drive,
                                       const SimulateOptions& opts, bool parallel) {
    params.validate();
    const SimPlan plan = make_plan(drive, opts);
    const auto& segments = drive.layout.segments;
    if (segments.empty()) throw LayoutMismatch("per-point simulation needs layout segments");
    if (segments.front().start_sample != 0)
        throw LayoutMismatch("per-point simulation requires the first segment to start at sample 0");

    const auto n_samples = static_cast<std::int64_t>(drive.samples.size());
    const std::size_t n_seg = segments.size();
    std::vector<std::int64_t> seg_start_step(n_seg + 1);
    for (std::size_t p = 0; p < n_seg; ++p) {
        const std::int64_t s0 = segments[p].start_sample;
        if (s0 < 0 || segments[p].end_sample > n_samples)
            throw LayoutMismatch("layout segment outside the drive waveform");
        if ((s0 * plan.ratio.den) % plan.ratio.num != 0)
            throw ConfigError(
                "per-point simulation requires segment starts on integrator steps; adjust dt or "
                "the gap duration");
        const std::int64_t k0 = s0 * plan.ratio.den / plan.ratio.num;
        if (k0 % plan.stride != 0)
            throw ConfigError(
                "per-point simulation requires segment starts on the trace grid; adjust "
                "trace_sample_period or the gap duration");
        seg_start_step[p] = k0;
    }
    seg_start_step[n_seg] = plan.total_steps;

    const S6 eq = locked_start(params, opts);
    const Pre c = precompute(params);
    IntensityTrace trace;
    trace.sample_period = opts.trace_sample_period;
    trace.start_time = 0.0;
    trace.samples.assign(static_cast<std::size_t>(plan.trace_len), 0.0);

    const bool noisy = params.noise_strength > 0.0;
    const double sigma = std::sqrt(2.0 * params.noise_strength * opts.dt);
    const std::uint64_t noise_root = mix_seed(opts.seed, kNoiseStreamTag);

    std::atomic<bool> failed{false};
    std::exception_ptr first_error;

    auto run_segment = [&](std::size_t p) {
        const std::int64_t s_lo = segments[p].start_sample;
        const std::int64_t s_hi = p + 1 < n_seg ? segments[p + 1].start_sample : n_samples;
        const auto runs =
            build_runs(drive.samples, s_lo, s_hi, plan.ratio, opts.mapping, params.injection_amplitude);
        S6 s = eq;
        Rng rng(mix_seed(noise_root, static_cast<std::uint64_t>(p)));
        // Interior tasks stop capturing just before the next segment's start;
        // the final task also records the terminal sample.
        const std::int64_t k_last_cap =
            p + 1 < n_seg ? seg_start_step[p + 1] - 1 : plan.total_steps;
        dispatch_kernel(params.model, s, c, runs, opts.dt, seg_start_step[p], plan.stride,
                        k_last_cap, trace.samples.data(), opts.readout, noisy ? &rng : nullptr,
                        sigma);
    };

    if (parallel) {
#pragma omp parallel for schedule(static)
        for (std::int64_t p = 0; p < static_cast<std::int64_t>(n_seg); ++p) {
            if (failed.load(std::memory_order_relaxed)) continue;
            try {
                run_segment(static_cast<std::size_t>(p));
            } catch (...) {
#pragma omp critical
                {
                    if (!failed.exchange(true)) first_error = std::current_exception();
                }
            }
        }
    } else {
        for (std::size_t p = 0; p < n_seg; ++p) run_segment(p);
    }
    if (first_error) std::rethrow_exception(first_error);
    return trace;
}

}  // namespace

IntensityTrace simulate_per_point(const LaserParams& params, const DriveWaveform& drive,
                                  const SimulateOptions& opts) {
    return simulate_per_point_impl(params, drive, opts, true);
}

IntensityTrace simulate_per_point_serial(const LaserParams& params, const DriveWaveform& drive,
                                         const SimulateOptions& opts) {
    return simulate_per_point_impl(params, drive, opts, false);
}

namespace {

struct SpikeMark {
    std::int64_t peak_index;
    double peak;
    std::int64_t last_index;  // end of the last excursion folded into this event
};

// Spike events in a sampled power trace.  An excursion starts above `enter`
// and runs until the trace falls below `exit` (hysteresis); excursions whose
// gap is shorter than `merge` samples are folded into one event, so the
// relaxation ringing trailing a spike does not count as extra spikes.  Each
// event is reported by its highest sample.
std::vector<SpikeMark> find_spikes(const std::vector<double>& trace, double enter, double exit,
                                   std::int64_t merge) {
    std::vector<SpikeMark> spikes;
    bool inside = false;
    std::int64_t start = 0;
    SpikeMark cur{0, 0.0, 0};
    auto emit = [&](std::int64_t end) {
        cur.last_index = end;
        if (!spikes.empty() && start - spikes.back().last_index < merge) {
            if (cur.peak > spikes.back().peak) {
                spikes.back().peak = cur.peak;
                spikes.back().peak_index = cur.peak_index;
            }
            spikes.back().last_index = end;
        } else {
            spikes.push_back(cur);
        }
    };
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(trace.size()); ++i) {
        const double v = trace[static_cast<std::size_t>(i)];
        if (!inside) {
            if (v > enter) {
                inside = true;
                start = i;
                cur = {i, v, i};
            }
        } else if (v > cur.peak) {
            cur.peak = v;
            cur.peak_index = i;
        }
        if (inside && v < exit) {
            inside = false;
            emit(i);
        }
    }
    if (inside) emit(static_cast<std::int64_t>(trace.size()) - 1);
    return spikes;
}

// Full width at half maximum above the given baseline, linearly
// interpolated; negative when a flank never crosses the half level.
double fwhm_at(const std::vector<double>& trace, double sample_period, std::int64_t peak_index,
               double baseline) {
    const double peak = trace[static_cast<std::size_t>(peak_index)];
    const double half = baseline + 0.5 * (peak - baseline);
    std::int64_t left = peak_index;
    while (left > 0 && trace[static_cast<std::size_t>(left)] > half) --left;
    if (trace[static_cast<std::size_t>(left)] > half) return -1.0;
    std::int64_t right = peak_index;
    const auto n = static_cast<std::int64_t>(trace.size());
    while (right + 1 < n && trace[static_cast<std::size_t>(right)] > half) ++right;
    if (trace[static_cast<std::size_t>(right)] > half) return -1.0;
    auto cross = [&](std::int64_t below, std::int64_t above) {
        const double a = trace[static_cast<std::size_t>(below)];
        const double b = trace[static_cast<std::size_t>(above)];
        const double f = b == a ? 0.0 : (half - a) / (b - a);
        return static_cast<double>(below) + f * static_cast<double>(above - below);
    };
    const double t_left = cross(left, left + 1);
    const double t_right = cross(right, right - 1);
    return (t_right - t_left) * sample_period;
}

struct ProbeContext {
    Pre c;
    NeuronModel model;
    double dt;
    std::int64_t stride;
    double trace_period;
    ReadoutMode readout;
    double amp;       // grid injection amplitude
    double lock_power;
    double enter, exit;  // spike detection levels
    std::int64_t merge;  // event merge window in trace samples
    S6 snapshot;         // settled quiescent state
};

// Simulates drop pulses of the given depths/start offsets from the settled
// snapshot and returns the trace; offsets and durations are in steps.
struct PulseSpec {
    double depth;
    std::int64_t start, duration;
};

std::vector<double> probe_trace(const ProbeContext& ctx, const std::vector<PulseSpec>& pulses,
                                std::int64_t total_steps) {
    std::vector<Run> runs;
    std::int64_t cursor = 0;
    for (const PulseSpec& p : pulses) {
        if (p.start > cursor) runs.push_back({ctx.amp, 0.0, p.start - cursor});
        runs.push_back({ctx.amp * (1.0 - p.depth), 0.0, p.duration});
        cursor = p.start + p.duration;
    }
    if (total_steps > cursor) runs.push_back({ctx.amp, 0.0, total_steps - cursor});
    S6 s = ctx.snapshot;
    std::vector<double> trace(static_cast<std::size_t>(total_steps / ctx.stride + 1), 0.0);
    dispatch_kernel(ctx.model, s, ctx.c, runs, ctx.dt, 0, ctx.stride, total_steps, trace.data(),
                    ctx.readout, nullptr, 0.0);
    return trace;
}

std::vector<SpikeMark> probe_spikes(const ProbeContext& ctx, const std::vector<PulseSpec>& pulses,
                                    std::int64_t total_steps) {
    const auto trace = probe_trace(ctx, pulses, total_steps);
    return find_spikes(trace, ctx.enter, ctx.exit, ctx.merge);
}

}  // namespace

CalibrationResult calibrate_operating_point(const LaserParams& params, const SearchGrid& grid,
                                            const CalibrationSettings& settings) {
    params.validate();
    if (grid.injection_amplitudes.empty() || grid.detunings.empty())
        throw ConfigError("calibration grid must have at least one amplitude and one detuning");
    std::int64_t stride = 0;
    check_step_options(settings.dt, settings.trace_sample_period, stride);

    const double dt = settings.dt;
    const auto steps_of = [dt](double seconds) {
        return std::max<std::int64_t>(1, std::llround(seconds / dt));
    };
    const std::int64_t settle_steps = steps_of(settings.settle_time);
    const std::int64_t quiet_steps = steps_of(settings.quiet_time);
    const std::int64_t pulse_steps = steps_of(settings.reference_duration);
    const std::int64_t window_steps = steps_of(settings.recovery_interval);
    const std::int64_t refractory_steps = steps_of(settings.refractory_interval);
    const std::int64_t recovery_steps = steps_of(settings.recovery_interval);
    const std::int64_t merge_samples = std::max<std::int64_t>(
        1, std::llround(settings.spike_merge_time / settings.trace_sample_period));

    const std::size_t n_amp = grid.injection_amplitudes.size();
    const std::size_t n_det = grid.detunings.size();
    std::vector<CalibrationProbe> probes(n_amp * n_det);

    std::atomic<bool> failed{false};
    std::exception_ptr first_error;

    auto probe_point = [&](std::size_t idx) {
        const double amp = grid.injection_amplitudes[idx / n_det];
        const double det = grid.detunings[idx % n_det];
        CalibrationProbe& probe = probes[idx];
        probe.injection_amplitude = amp;
        probe.detuning = det;

        LaserParams p = params;
        p.injection_amplitude = amp;
        p.detuning = det;

        SteadyState eq;
        try {
            SteadyStateOptions sopts;
            sopts.dt = dt;
            eq = steady_state(p, Complex(amp, 0.0), sopts);
        } catch (const NoConvergence&) {
            probe.reason = "no settled state under quiescent injection";
            return;
        } catch (const NonFiniteState&) {
            probe.reason = "diverged under quiescent injection";
            return;
        }
        if (eq.method != SteadyMethod::root_finding) {
            probe.reason = "does not injection-lock (free-running emission survives)";
            return;
        }
        const double lock_power = intensity(eq.state, settings.readout);
        if (!(lock_power > 1.0e-12)) {
            probe.reason = "locked output power is negligible";
            return;
        }

        ProbeContext ctx;
        ctx.c = precompute(p);
        ctx.model = p.model;
        ctx.dt = dt;
        ctx.stride = stride;
        ctx.trace_period = settings.trace_sample_period;
        ctx.readout = settings.readout;
        ctx.amp = amp;
        ctx.lock_power = lock_power;
        ctx.enter = lock_power * (1.0 + settings.spike_rel_threshold);
        ctx.exit = lock_power + 0.5 * (ctx.enter - lock_power);
        ctx.merge = merge_samples;

        try {
            // Settle with both polarizations nudged so a linearly unstable
            // lock reveals itself here rather than mid-experiment.
            S6 s = to_s6(eq.state);
            s.xr += kPolarizationSeed;
            s.yi += kPolarizationSeed;
            integrate_const_any(ctx.model, s, ctx.c, dt, settle_steps, amp, 0.0);
            ctx.snapshot = s;
            const double settled_power =
                ctx.model == NeuronModel::surrogate ? surrogate_power(s.cn)
                                                    : power_of<0>(s, settings.readout);
            if (std::abs(settled_power - lock_power) > 0.05 * lock_power) {
                probe.reason = "quiescent state drifts away from the locked branch";
                return;
            }

            const auto quiet = probe_spikes(ctx, {}, quiet_steps);
            if (!quiet.empty()) {
                probe.reason = "fires spontaneously while quiet";
                return;
            }
            probe.locks = true;

            auto spikes_for_drop = [&](double depth, std::int64_t window) {
                return probe_spikes(ctx, {{depth, 0, pulse_steps}}, pulse_steps + window);
            };

            if (spikes_for_drop(1.0, window_steps).empty()) {
                probe.reason = "no spike even for a full-depth drop";
                return;
            }
            double lo = 0.0, hi = 1.0;
            for (int i = 0; i < 18; ++i) {
                const double mid = 0.5 * (lo + hi);
                (spikes_for_drop(mid, window_steps).empty() ? lo : hi) = mid;
            }
            const double p_star = hi;
            probe.perturbation_threshold = p_star;

            if (1.2 * p_star > 1.0) {
                probe.reason = "perturbation threshold too close to a full drop";
                return;
            }
            if (!spikes_for_drop(0.8 * p_star, window_steps).empty()) {
                probe.reason = "sub-threshold perturbation still fires";
                return;
            }
            const auto supra = spikes_for_drop(1.2 * p_star, 2 * window_steps);
            if (supra.size() != 1) {
                probe.reason = "supra-threshold perturbation fires " +
                               std::to_string(supra.size()) + " spikes instead of one";
                return;
            }
            const auto supra_trace = probe_trace(ctx, {{1.2 * p_star, 0, pulse_steps}},
                                                 pulse_steps + 2 * window_steps);
            probe.spike_fwhm = fwhm_at(supra_trace, settings.trace_sample_period,
                                       supra[0].peak_index, lock_power);
            if (probe.spike_fwhm < settings.fwhm_min || probe.spike_fwhm > settings.fwhm_max) {
                probe.reason = "spike width out of band";
                return;
            }

            const auto reference = spikes_for_drop(settings.reference_drop, window_steps);
            if (reference.size() != 1) {
                probe.reason = "reference perturbation fires " + std::to_string(reference.size()) +
                               " spikes instead of one";
                return;
            }

            // Inside the refractory window the second pulse must not add a
            // distinct full spike; it may merge into the first event or
            // annul the response outright.
            const std::vector<PulseSpec> pair_close = {{1.2 * p_star, 0, pulse_steps},
                                                       {1.2 * p_star, refractory_steps, pulse_steps}};
            if (probe_spikes(ctx, pair_close, refractory_steps + pulse_steps + window_steps).size() >
                1) {
                probe.reason = "second pulse inside the refractory interval is not suppressed";
                return;
            }
            const std::vector<PulseSpec> pair_far = {{1.2 * p_star, 0, pulse_steps},
                                                     {1.2 * p_star, recovery_steps, pulse_steps}};
            if (probe_spikes(ctx, pair_far, recovery_steps + pulse_steps + window_steps).size() !=
                2) {
                probe.reason = "no second spike after the recovery interval";
                return;
            }
        } catch (const NonFiniteState&) {
            probe.reason = "diverged during probing";
            return;
        }
        probe.excitable = true;
    };

#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(probes.size()); ++i) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            probe_point(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical
            {
                if (!failed.exchange(true)) first_error = std::current_exception();
            }
        }
    }
    if (first_error) std::rethrow_exception(first_error);

    // Prefer a threshold near the middle of the drive range, then stronger
    // injection for robustness.
    std::size_t best = probes.size();
    for (std::size_t i = 0; i < probes.size(); ++i) {
        if (!probes[i].excitable) continue;
        if (best == probes.size()) {
            best = i;
            continue;
        }
        const double a = std::abs(probes[i].perturbation_threshold - 0.5);
        const double b = std::abs(probes[best].perturbation_threshold - 0.5);
        if (a < b - 1.0e-12 ||
            (std::abs(a - b) <= 1.0e-12 &&
             probes[i].injection_amplitude > probes[best].injection_amplitude))
            best = i;
    }
    if (best == probes.size()) {
        std::string why = "no grid point passed the excitability screen;";
        for (const auto& pr : probes)
            if (!pr.reason.empty()) {
                why += " first failure: amplitude " + std::to_string(pr.injection_amplitude) +
                       ", detuning " + std::to_string(pr.detuning) + ": " + pr.reason;
                break;
            }
        throw NoExcitablePointFound(why);
    }

    const CalibrationProbe& win = probes[best];
    LaserParams chosen = params;
    chosen.injection_amplitude = win.injection_amplitude;
    chosen.detuning = win.detuning;

    // Re-derive the winner's context for the summary numbers.
    SteadyStateOptions sopts;
    sopts.dt = dt;
    const SteadyState eq = steady_state(chosen, Complex(win.injection_amplitude, 0.0), sopts);
    ProbeContext ctx;
    ctx.c = precompute(chosen);
    ctx.model = chosen.model;
    ctx.dt = dt;
    ctx.stride = stride;
    ctx.trace_period = settings.trace_sample_period;
    ctx.readout = settings.readout;
    ctx.amp = win.injection_amplitude;
    ctx.lock_power = intensity(eq.state, settings.readout);
    ctx.enter = ctx.lock_power * (1.0 + settings.spike_rel_threshold);
    ctx.exit = ctx.lock_power + 0.5 * (ctx.enter - ctx.lock_power);
    ctx.merge = merge_samples;
    {
        S6 s = to_s6(eq.state);
        s.xr += kPolarizationSeed;
        s.yi += kPolarizationSeed;
        integrate_const_any(ctx.model, s, ctx.c, dt, settle_steps, ctx.amp, 0.0);
        ctx.snapshot = s;
    }
    const auto supra_trace = probe_trace(ctx, {{1.2 * win.perturbation_threshold, 0, pulse_steps}},
                                         pulse_steps + 2 * window_steps);
    const auto supra = find_spikes(supra_trace, ctx.enter, ctx.exit, ctx.merge);

    // Measured refractory window: the shortest pulse separation at which the
    // second pulse produces a distinct second spike event.
    auto distinct_pair = [&](std::int64_t sep) {
        const std::vector<PulseSpec> pair = {{1.2 * win.perturbation_threshold, 0, pulse_steps},
                                             {1.2 * win.perturbation_threshold, sep, pulse_steps}};
        return probe_spikes(ctx, pair, sep + pulse_steps + window_steps).size() >= 2;
    };
    std::int64_t sep_lo = refractory_steps, sep_hi = recovery_steps;
    for (int i = 0; i < 12 && sep_hi - sep_lo > 1; ++i) {
        const std::int64_t mid = sep_lo + (sep_hi - sep_lo) / 2;
        (distinct_pair(mid) ? sep_hi : sep_lo) = mid;
    }

    CalibrationResult result;
    result.params = chosen;
    result.perturbation_threshold = win.perturbation_threshold;
    result.locked_intensity = ctx.lock_power;
    result.spike_peak = supra.empty() ? 0.0 : supra[0].peak;
    result.spike_fwhm = win.spike_fwhm;
    result.refractory_window = static_cast<double>(sep_hi) * dt;
    result.suggested_modulation_depth = std::min(1.0, 2.0 * win.perturbation_threshold);
    result.suggested_threshold = 0.5 * (result.locked_intensity + result.spike_peak);
    result.probes = std::move(probes);

    // Amplitude margin to the locking boundary: bisect the smallest
    // amplitude that still injection-locks at the chosen detuning.
    double lo = 0.0, hi = win.injection_amplitude;
    for (int i = 0; i < 12; ++i) {
        const double mid = 0.5 * (lo + hi);
        bool locks_there = false;
        if (mid > 0.0) {
            LaserParams q = chosen;
            q.injection_amplitude = mid;
            try {
                locks_there = steady_state(q, Complex(mid, 0.0), sopts).method ==
                              SteadyMethod::root_finding;
            } catch (const Error&) {
                locks_there = false;
            }
        }
        (locks_there ? hi : lo) = mid;
    }
    result.margin = (win.injection_amplitude - hi) / win.injection_amplitude;
    return result;
}

}  // namespace vsnn
