#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "simclock/random.hpp"

namespace simclock {

// Cycle-to-cycle microwave detuning: constant over one interrogation, redrawn
// every loading cycle. mw_phase_jitter_std adds a per-shot phase offset to the
// accumulated Ramsey phase (oscillator phase noise integrated over the
// interrogation, roughly independent of T on these timescales).
struct DetuningModel {
    double mean_detuning = 0.0;      // Hz
    double std_per_cycle = 0.0;      // Hz
    double mw_phase_jitter_std = 0.0;  // rad per shot
};

// Ramsey fringe contrast h(T): either a Gaussian-in-T parametric decay from
// inhomogeneous trap light shifts, or a measured table interpolated linearly.
struct ContrastModel {
    enum class Mode { parametric, table };
    Mode mode = Mode::parametric;
    double tau_inh = 248e-6;                       // seconds
    std::vector<std::pair<double, double>> table;  // (T seconds, h), ascending T
};

// Exponential loss of correlation between successive probe readouts of the
// same sample, from atomic motion through the probe beam profile.
struct CorrelationModel {
    bool enabled = false;
    double tau_decay = 670e-6;  // seconds
    double fit_amplitude = 0.0;  // B of the xi(t2) fit; an output, not an input
};

// Slow drifts of experimental parameters across loading cycles. The AR(1)
// drifts modulate pulse area and trap-shift detuning; phi_drift_per_cycle is
// a deterministic ramp on the measured phase used to exercise drift
// rejection.
struct DriftModel {
    double pulse_area_drift_std = 0.0;       // fractional
    double trap_intensity_drift_std = 0.0;   // fractional
    double drift_correlation_time = 100.0;   // seconds
    double trap_light_shift_hz = -1700.0;    // detuning per unit fractional intensity change
    double phi_drift_per_cycle = 0.0;        // rad per cycle, systematic
};

struct NoiseModels {
    DetuningModel detuning;
    ContrastModel contrast;
    CorrelationModel correlation;
    DriftModel drift;
};

struct CycleNoise {
    double detuning = 0.0;          // Hz, this cycle
    double delta_chi = 0.0;         // per-cycle imbalance (when configured per cycle)
    double pulse_area_scale = 1.0;  // multiplicative pulse-area drift
    double trap_shift = 0.0;        // fractional trap-intensity drift
    double phi_offset = 0.0;        // systematic phase offset, rad
};

inline double fringe_contrast(double t, const ContrastModel& model) {
    if (t < 0.0) throw std::domain_error("fringe_contrast: negative time");
    if (model.mode == ContrastModel::Mode::parametric) {
        return std::exp(-t * t / (2.0 * model.tau_inh * model.tau_inh));
    }
    const auto& tab = model.table;
    if (tab.empty()) throw std::domain_error("fringe_contrast: empty table");
    if (t < tab.front().first || t > tab.back().first)
        throw std::out_of_range("fringe_contrast: T outside table range");
    auto hi = std::lower_bound(tab.begin(), tab.end(), t,
                               [](const auto& p, double v) { return p.first < v; });
    if (hi->first == t) return hi->second;
    auto lo = hi - 1;
    const double u = (t - lo->first) / (hi->first - lo->first);
    return lo->second + u * (hi->second - lo->second);
}

// Two-column text file: T_seconds h, comments with '#'.
inline ContrastModel load_contrast_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_contrast_table: cannot open " + path);
    ContrastModel m;
    m.mode = ContrastModel::Mode::table;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double t, h;
        if (ls >> t >> h) m.table.emplace_back(t, h);
    }
    if (m.table.size() < 2) throw std::runtime_error("load_contrast_table: need >= 2 rows");
    for (size_t i = 1; i < m.table.size(); ++i)
        if (m.table[i].first <= m.table[i - 1].first)
            throw std::runtime_error("load_contrast_table: T not ascending");
    return m;
}

// Stationary Gaussian AR(1): marginal variance prior_var at every time,
// cov(t_i, t_j) = prior_var * exp(-|t_i - t_j| / tau_decay). Built
// sequentially so arbitrary (sorted) time grids are order-consistent.
inline std::vector<double> latent_jz_process(double prior_var, const std::vector<double>& times,
                                             const CorrelationModel& model, RandomStream& rng) {
    if (model.tau_decay <= 0.0) throw std::domain_error("latent_jz_process: tau_decay <= 0");
    std::vector<double> out;
    out.reserve(times.size());
    const double sigma = std::sqrt(prior_var);
    double prev_t = 0.0;
    for (size_t i = 0; i < times.size(); ++i) {
        if (i == 0) {
            out.push_back(sigma * rng.normal());
        } else {
            if (times[i] < prev_t)
                throw std::domain_error("latent_jz_process: times not ascending");
            const double rho =
                model.enabled ? std::exp(-(times[i] - prev_t) / model.tau_decay) : 1.0;
            out.push_back(rho * out.back() +
                          std::sqrt(std::max(0.0, 1.0 - rho * rho)) * sigma * rng.normal());
        }
        prev_t = times[i];
    }
    return out;
}

// Per-cycle noise realization. AR(1) drifts need the previous cycle's value,
// so campaigns materialize the whole drift track in one sequential pre-pass.
inline CycleNoise sample_cycle_noise(const NoiseModels& models, long cycle_index,
                                     const CycleNoise* previous, double cycle_time,
                                     RandomStream& rng) {
    CycleNoise n;
    n.detuning = rng.normal(models.detuning.mean_detuning, models.detuning.std_per_cycle);
    const double rho = (models.drift.drift_correlation_time > 0.0)
                           ? std::exp(-cycle_time / models.drift.drift_correlation_time)
                           : 0.0;
    const double innov = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    const double prev_area = previous ? (previous->pulse_area_scale - 1.0) : 0.0;
    const double prev_trap = previous ? previous->trap_shift : 0.0;
    if (models.drift.pulse_area_drift_std > 0.0) {
        n.pulse_area_scale = 1.0 + (previous ? rho * prev_area : 0.0) +
                             innov * models.drift.pulse_area_drift_std * rng.normal();
    }
    if (models.drift.trap_intensity_drift_std > 0.0) {
        n.trap_shift = (previous ? rho * prev_trap : 0.0) +
                       innov * models.drift.trap_intensity_drift_std * rng.normal();
    }
    n.phi_offset = models.drift.phi_drift_per_cycle * static_cast<double>(cycle_index);
    return n;
}

}  // namespace simclock
