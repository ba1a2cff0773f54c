#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "simclock/analysis.hpp"
#include "simclock/measurement.hpp"
#include "simclock/noise.hpp"
#include "simclock/random.hpp"
#include "simclock/sequence.hpp"
#include "simclock/spin_state.hpp"

namespace simclock {

// Campaign = the full experimental protocol: repeated loading cycles, several
// recycled experiments per cycle, reference shots with the empty
// interferometer, everything seeded for bit-exact reproducibility.
struct CampaignConfig {
    long n_cycles = 1200;
    int experiments_per_cycle = 4;
    int reference_shots = 3;
    double cycle_time = 5.0;  // seconds

    double n0_mean = 1.2e5;
    double n0_rel_std = 0.1;
    double retention = 1.0;  // atom fraction kept per recycled experiment

    Sequence sequence;  // probe/pulse timeline, already quantized by the caller
    double atom_probe_photons = 6e6;  // trailing atom-number readout; 0 disables
    double probe_duration = 10e-6;
    double event_gap = 10e-6;

    ProbeCalibration cal;
    DecoherenceModel deco;
    NoiseModels noise;

    uint64_t seed = 1;
    int workers = 1;
};

struct TrialRecord {
    long cycle = 0;
    int experiment = 0;  // -1..-k for reference shots
    OutcomeKind kind = OutcomeKind::atomic;
    double t_start = 0.0;  // seconds since campaign start
    double n_atoms_true = 0.0;
    double n_atoms_measured = 0.0;
    double phi1 = 0.0;
    double phi2 = 0.0;  // photon-weighted combination of the sub-pulses
    std::vector<double> phi2_subs;
    double phi_atom_number = 0.0;
    double latent_jz1 = 0.0;  // ground truth, diagnostics only
};

namespace detail_engine {

struct CycleData {
    CycleNoise noise;
    double n0 = 0.0;
};

inline std::vector<CycleData> cycle_prepass(const CampaignConfig& cfg) {
    std::vector<CycleData> out(cfg.n_cycles);
    RandomStream rng(derive_seed(cfg.seed, 0xC1C1E));
    for (long c = 0; c < cfg.n_cycles; ++c) {
        const CycleNoise* prev = (c > 0) ? &out[c - 1].noise : nullptr;
        out[c].noise = sample_cycle_noise(cfg.noise, c, prev, cfg.cycle_time, rng);
        if (cfg.cal.delta_chi_per_cycle && cfg.cal.var_delta_chi > 0.0)
            out[c].noise.delta_chi = rng.normal(0.0, std::sqrt(cfg.cal.var_delta_chi));
        double n0 = rng.normal(cfg.n0_mean, cfg.n0_mean * cfg.n0_rel_std);
        while (n0 <= 0.0) n0 = rng.normal(cfg.n0_mean, cfg.n0_mean * cfg.n0_rel_std);
        out[c].n0 = n0;
    }
    return out;
}

}  // namespace detail_engine

// Runs the whole campaign. Per-cycle random streams are derived from the
// master seed, so results are independent of the worker partition and
// identical seeds give identical records.
inline std::vector<TrialRecord> run_campaign(const CampaignConfig& cfg) {
    if (cfg.n_cycles < 2)
        throw std::invalid_argument("run_campaign: need >= 2 cycles for differential data");
    if (cfg.experiments_per_cycle < 1)
        throw std::invalid_argument("run_campaign: experiments_per_cycle < 1");
    if (!(cfg.retention > 0.0) || cfg.retention > 1.0)
        throw std::invalid_argument("run_campaign: retention outside (0,1]");
    if (cfg.sequence.events.empty()) throw std::invalid_argument("run_campaign: empty sequence");

    const auto cycles = detail_engine::cycle_prepass(cfg);
    const int per_cycle = cfg.experiments_per_cycle + cfg.reference_shots;
    std::vector<TrialRecord> records(static_cast<size_t>(cfg.n_cycles) * per_cycle);

    // probe used for the atom-number readout and the reference shots
    ProbePulse atom_pulse;
    atom_pulse.photons_total = cfg.atom_probe_photons;
    atom_pulse.duration = cfg.probe_duration;

    // reference shots replay the atomic probe schedule with no atoms
    std::vector<std::pair<ProbePulse, ProbeRole>> ref_pulses;
    for (const auto& ev : cfg.sequence.events)
        if (const auto* pr = std::get_if<ProbeEvent>(&ev.body))
            if (pr->role == ProbeRole::first_qnd || pr->role == ProbeRole::second_qnd)
                ref_pulses.emplace_back(pr->pulse, pr->role);

    auto simulate_range = [&](long c_begin, long c_end) {
        for (long c = c_begin; c < c_end; ++c) {
            const auto& cd = cycles[c];
            for (int k = 0; k < cfg.experiments_per_cycle; ++k) {
                RandomStream rng(derive_seed(cfg.seed, static_cast<uint64_t>(c), 2 + k));
                const double n_atoms = cd.n0 * std::pow(cfg.retention, k);
                auto res = run_sequence(make_all_down(n_atoms), cfg.sequence, cfg.noise,
                                        cfg.cal, cfg.deco, cd.noise, n_atoms, rng);
                TrialRecord rec;
                rec.cycle = c;
                rec.experiment = k;
                rec.kind = OutcomeKind::atomic;
                rec.t_start = c * cfg.cycle_time;
                rec.n_atoms_true = n_atoms;
                rec.phi1 = res.phi1 ? res.phi1->phi : 0.0;
                rec.latent_jz1 = res.latent_jz1;
                double photo_sum = 0.0, phi_acc = 0.0;
                for (const auto& o : res.phi2_subs) {
                    rec.phi2_subs.push_back(o.phi);
                    photo_sum += o.pulse.photons_total;
                    phi_acc += o.phi * o.pulse.photons_total;
                }
                rec.phi2 = (photo_sum > 0.0) ? phi_acc / photo_sum : 0.0;
                if (cfg.atom_probe_photons > 0.0) {
                    auto nm = measure_atom_number(n_atoms, atom_pulse, cfg.cal, rng);
                    rec.phi_atom_number = nm.phi;
                    rec.n_atoms_measured = nm.phi / (cfg.cal.chi);
                } else {
                    rec.n_atoms_measured = n_atoms;
                }
                records[c * per_cycle + k] = std::move(rec);
            }
            for (int j = 0; j < cfg.reference_shots; ++j) {
                RandomStream rng(derive_seed(cfg.seed, static_cast<uint64_t>(c), 1000 + j));
                TrialRecord rec;
                rec.cycle = c;
                rec.experiment = -(j + 1);
                rec.kind = OutcomeKind::empty_reference;
                rec.t_start = c * cfg.cycle_time;
                double photo_sum = 0.0, phi_acc = 0.0;
                for (const auto& [p, role] : ref_pulses) {
                    const double w = rng.normal(0.0, std::sqrt(shot_variance(p, cfg.cal)));
                    if (role == ProbeRole::first_qnd) {
                        rec.phi1 = w;
                    } else {
                        rec.phi2_subs.push_back(w);
                        photo_sum += p.photons_total;
                        phi_acc += w * p.photons_total;
                    }
                }
                rec.phi2 = (photo_sum > 0.0) ? phi_acc / photo_sum : 0.0;
                records[c * per_cycle + cfg.experiments_per_cycle + j] = std::move(rec);
            }
        }
    };

    const long workers = std::max<long>(1, std::min<long>(cfg.workers, cfg.n_cycles));
    if (workers == 1) {
        simulate_range(0, cfg.n_cycles);
    } else {
        std::vector<std::thread> pool;
        const long chunk = (cfg.n_cycles + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const long b = w * chunk;
            const long e = std::min<long>(cfg.n_cycles, b + chunk);
            if (b < e) pool.emplace_back(simulate_range, b, e);
        }
        for (auto& t : pool) t.join();
    }
    return records;
}

// ---------------------------------------------------------------------------
// estimators

// One entry of the drift-free data set: difference of two trials taken on
// independent ensembles in successive loading cycles, scaled by 1/sqrt(2) so
// variances stay calibrated to a single trial.
struct DiffSample {
    double phi1 = 0.0;
    double phi2 = 0.0;
    std::vector<double> phi2_subs;
    double n_atoms = 0.0;  // pair mean of the measured atom number
    long cycle = 0;
};

inline std::vector<DiffSample> differential_subtract(const std::vector<TrialRecord>& records) {
    // index atomic records by (cycle, experiment)
    long max_cycle = -1;
    int max_exp = 0;
    for (const auto& r : records)
        if (r.kind == OutcomeKind::atomic) {
            max_cycle = std::max(max_cycle, r.cycle);
            max_exp = std::max(max_exp, r.experiment + 1);
        }
    if (max_cycle < 1) throw std::invalid_argument("differential_subtract: need >= 2 cycles");
    std::vector<const TrialRecord*> index(static_cast<size_t>(max_cycle + 1) * max_exp, nullptr);
    for (const auto& r : records)
        if (r.kind == OutcomeKind::atomic) index[r.cycle * max_exp + r.experiment] = &r;

    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    std::vector<DiffSample> out;
    for (long c = 0; c + 1 <= max_cycle; c += 2) {
        for (int k = 0; k < max_exp; ++k) {
            const TrialRecord* a = index[c * max_exp + k];
            const TrialRecord* b = index[(c + 1) * max_exp + k];
            if (!a && !b) continue;
            if (!a || !b)
                throw std::runtime_error("differential_subtract: mismatched record sets");
            if (a->phi2_subs.size() != b->phi2_subs.size())
                throw std::runtime_error("differential_subtract: sub-pulse count mismatch");
            DiffSample d;
            d.phi1 = (a->phi1 - b->phi1) * inv_sqrt2;
            d.phi2 = (a->phi2 - b->phi2) * inv_sqrt2;
            d.phi2_subs.resize(a->phi2_subs.size());
            for (size_t i = 0; i < a->phi2_subs.size(); ++i)
                d.phi2_subs[i] = (a->phi2_subs[i] - b->phi2_subs[i]) * inv_sqrt2;
            d.n_atoms = 0.5 * (a->n_atoms_measured + b->n_atoms_measured);
            d.cycle = c;
            out.push_back(std::move(d));
        }
    }
    return out;
}

// Calibration context the estimators need to convert phase variances into
// squeezing figures.
struct EstimatorContext {
    ProbeCalibration cal;
    double photons1 = 6e6;        // first measurement
    double photons2_total = 6e6;  // total photons forming the second measurement
    double eta = 0.0;             // mean-spin shortening from the first probe
    double contrast = 1.0;        // h(T) at the interrogation time
    // when set, the shot variance measured on empty-interferometer reference
    // shots replaces the photon-number prediction
    std::optional<double> shot2_measured;
};

struct BinStats {
    double n_atoms_mean = 0.0;
    double var_phi2 = 0.0;
    double var_phi2_error = 0.0;  // 1 sigma, var * sqrt(2/(m-1))
    double conditional_variance = 0.0;
    double conditional_variance_error = 0.0;
    double zeta = 0.0;
    long count = 0;
};

struct EstimatorReport {
    long n_samples = 0;
    double n_atoms_mean = 0.0;
    double mean_phi1 = 0.0, mean_phi2 = 0.0;
    double var_phi1 = 0.0, var_phi2 = 0.0, cov_phi12 = 0.0;
    double zeta = 0.0;
    double conditional_variance = 0.0;
    bool zeta_grid_ok = false;
    double shot2 = 0.0;                 // shot variance of the combined second measurement
    double projection_css = 0.0;        // chi^2 * mean N
    double kappa_sq_calibrated = 0.0;   // chi^2 N n1 / s
    double kappa_sq_inferred = 0.0;     // cov / (var1 - cov)
    double reduction = 0.0;             // (var_cond - shot2) / projection_css
    double xi = 0.0;                    // squeezing parameter from measured variances
    double xi_corr = 0.0;               // covariance-based variant (correlation scans)
    double xi_lin = 0.0;                // 1 / ((1-eta)^2 (1+kappa^2))
    std::vector<BinStats> bins;
};

namespace detail_engine {

struct Moments {
    double mean1 = 0, mean2 = 0, var1 = 0, var2 = 0, cov = 0;
    long n = 0;
};

inline Moments moments_of(const std::vector<double>& p1, const std::vector<double>& p2) {
    Moments m;
    m.n = static_cast<long>(p1.size());
    for (size_t i = 0; i < p1.size(); ++i) {
        m.mean1 += p1[i];
        m.mean2 += p2[i];
    }
    m.mean1 /= m.n;
    m.mean2 /= m.n;
    for (size_t i = 0; i < p1.size(); ++i) {
        const double a = p1[i] - m.mean1;
        const double b = p2[i] - m.mean2;
        m.var1 += a * a;
        m.var2 += b * b;
        m.cov += a * b;
    }
    m.var1 /= (m.n - 1);
    m.var2 /= (m.n - 1);
    m.cov /= (m.n - 1);
    return m;
}

}  // namespace detail_engine

inline EstimatorReport estimate(const std::vector<double>& phi1, const std::vector<double>& phi2,
                                const std::vector<double>& n_atoms,
                                const EstimatorContext& ctx) {
    if (phi1.size() < 3 || phi1.size() != phi2.size() || phi1.size() != n_atoms.size())
        throw std::invalid_argument("estimate: need >= 3 aligned samples");
    const auto m = detail_engine::moments_of(phi1, phi2);
    if (!(m.var1 > 0.0)) throw std::runtime_error("estimate: degenerate var(phi1)");

    EstimatorReport rep;
    rep.n_samples = m.n;
    rep.mean_phi1 = m.mean1;
    rep.mean_phi2 = m.mean2;
    rep.var_phi1 = m.var1;
    rep.var_phi2 = m.var2;
    rep.cov_phi12 = m.cov;
    rep.zeta = m.cov / m.var1;
    rep.conditional_variance = m.var2 - m.cov * m.cov / m.var1;

    // zeta is the argmin of var(phi2 - z phi1): verify on a grid
    rep.zeta_grid_ok = true;
    const double span = std::max(std::abs(rep.zeta), 0.1);
    for (int g = -10; g <= 10; ++g) {
        const double z = rep.zeta + span * 0.05 * g;
        const double v = m.var2 - 2.0 * z * m.cov + z * z * m.var1;
        if (v < rep.conditional_variance * (1.0 - 1e-6)) rep.zeta_grid_ok = false;
    }

    rep.n_atoms_mean =
        std::accumulate(n_atoms.begin(), n_atoms.end(), 0.0) / n_atoms.size();
    const double chi = ctx.cal.chi;
    const double s = ctx.cal.shot_prefactor();
    rep.shot2 = ctx.shot2_measured.value_or(s / ctx.photons2_total);
    rep.projection_css = chi * chi * rep.n_atoms_mean;
    rep.kappa_sq_calibrated = chi * chi * rep.n_atoms_mean * ctx.photons1 / s;
    rep.kappa_sq_inferred =
        (m.var1 > m.cov) ? m.cov / (m.var1 - m.cov) : std::numeric_limits<double>::infinity();
    rep.reduction = (rep.conditional_variance - rep.shot2) / rep.projection_css;
    const double slope2 = (1.0 - ctx.eta) * (1.0 - ctx.eta) * ctx.contrast * ctx.contrast;
    rep.xi = rep.reduction / slope2;
    rep.xi_corr = (rep.projection_css - m.cov * m.cov / m.var1) / (rep.projection_css * slope2);
    rep.xi_lin = 1.0 / (slope2 / (ctx.contrast * ctx.contrast) * (1.0 + rep.kappa_sq_calibrated));
    return rep;
}

inline EstimatorReport estimate(const std::vector<DiffSample>& samples,
                                const EstimatorContext& ctx) {
    std::vector<double> p1, p2, n;
    p1.reserve(samples.size());
    for (const auto& d : samples) {
        p1.push_back(d.phi1);
        p2.push_back(d.phi2);
        n.push_back(d.n_atoms);
    }
    return estimate(p1, p2, n, ctx);
}

// Equal-population atom-number bins with per-bin second-measurement variance
// and conditional variance; error bars from gaussian sampling theory.
inline std::vector<BinStats> bin_by_atom_number(const std::vector<DiffSample>& samples,
                                                int n_bins = 10) {
    if (n_bins < 1) throw std::invalid_argument("bin_by_atom_number: n_bins < 1");
    if (samples.size() < static_cast<size_t>(n_bins) || samples.size() < 3)
        throw std::invalid_argument("bin_by_atom_number: fewer samples than bins");
    std::vector<size_t> order(samples.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return samples[a].n_atoms < samples[b].n_atoms; });

    std::vector<BinStats> bins;
    const size_t total = samples.size();
    for (int b = 0; b < n_bins; ++b) {
        const size_t lo = total * b / n_bins;
        const size_t hi = total * (b + 1) / n_bins;
        std::vector<double> p1, p2;
        double nsum = 0.0;
        for (size_t i = lo; i < hi; ++i) {
            p1.push_back(samples[order[i]].phi1);
            p2.push_back(samples[order[i]].phi2);
            nsum += samples[order[i]].n_atoms;
        }
        const auto m = detail_engine::moments_of(p1, p2);
        BinStats st;
        st.count = m.n;
        st.n_atoms_mean = nsum / m.n;
        st.var_phi2 = m.var2;
        st.var_phi2_error = m.var2 * std::sqrt(2.0 / (m.n - 1));
        st.zeta = (m.var1 > 0.0) ? m.cov / m.var1 : 0.0;
        st.conditional_variance = m.var2 - ((m.var1 > 0.0) ? m.cov * m.cov / m.var1 : 0.0);
        st.conditional_variance_error = st.conditional_variance * std::sqrt(2.0 / (m.n - 1));
        bins.push_back(st);
    }
    return bins;
}

// phi2 restricted to the first `pulses` sub-pulses of the second measurement
// (photon-weighted), for the pulse-count scans.
inline std::vector<DiffSample> combine_subs(const std::vector<DiffSample>& samples, int pulses) {
    std::vector<DiffSample> out = samples;
    for (auto& d : out) {
        if (d.phi2_subs.size() < static_cast<size_t>(pulses))
            throw std::invalid_argument("combine_subs: not enough sub-pulses");
        double acc = 0.0;
        for (int i = 0; i < pulses; ++i) acc += d.phi2_subs[i];
        d.phi2 = acc / pulses;
    }
    return out;
}

}  // namespace simclock
