#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "simclock/random.hpp"
#include "simclock/spin_state.hpp"

namespace simclock {

// Shot-noise prefactor convention for the dual-color interferometer.
//   eq5  : s(beta) = (beta^2+1)/(2 beta^2), beta the reference/probe
//          field-amplitude ratio of the interferometer
//   unit : s = 1, the convention under which kappa^2 and the conditional
//          variance formulas are quoted
enum class ShotPrefactor { eq5, unit };

struct ProbeCalibration {
    double chi = 1.0e-6;          // rad per atom of population difference, per photon-normalized phase
    double chi_bar_ratio = 1.0;   // coupling ratio for the atom-number probe, ~1 within 5%
    double beta = std::sqrt(13.0);
    double var_delta_chi = 0.0;   // variance of the per-shot two-color imbalance
    bool delta_chi_per_cycle = false;
    ShotPrefactor shot_prefactor_mode = ShotPrefactor::eq5;

    double shot_prefactor() const {
        if (shot_prefactor_mode == ShotPrefactor::unit) return 1.0;
        return (beta * beta + 1.0) / (2.0 * beta * beta);
    }
};

struct ProbePulse {
    double photons_total = 0.0;
    double duration = 0.0;   // seconds
    double timestamp = 0.0;  // seconds within the sequence (pulse center)
};

// eta(n) = 1 - exp(-alpha n): fractional shortening of the mean spin after a
// probe pulse of n photons. alpha is stored as a magnitude so eta stays in
// [0,1).
struct DecoherenceModel {
    double alpha = 0.0;  // per-photon scattering coefficient, >= 0
};

enum class OutcomeKind { atomic, atom_number, empty_reference };

struct PhaseOutcome {
    double phi = 0.0;  // radians
    ProbePulse pulse;
    OutcomeKind kind = OutcomeKind::atomic;
};

inline double shot_variance(const ProbePulse& pulse, const ProbeCalibration& cal) {
    if (pulse.photons_total <= 0.0)
        throw std::domain_error("shot_variance: pulse with zero photons");
    return cal.shot_prefactor() / pulse.photons_total;
}

inline double decoherence_eta(double photons, const DecoherenceModel& model) {
    if (photons < 0.0) throw std::domain_error("decoherence_eta: negative photon number");
    if (model.alpha < 0.0) throw std::domain_error("decoherence_eta: negative alpha");
    return 1.0 - std::exp(-model.alpha * photons);
}

// kappa^2 = chi^2 N n / s(beta): atomic projection noise over optical shot
// noise for a single measurement. Sets the conditional variance reduction
// 1/(1+kappa^2).
inline double kappa_squared(const ProbePulse& pulse, const ProbeCalibration& cal,
                            double n_atoms) {
    return cal.chi * cal.chi * n_atoms * pulse.photons_total / cal.shot_prefactor();
}

// One dispersive phase measurement: phi = w + chi * DeltaN + dchi * N_A with
// DeltaN = 2 Jz and w gaussian shot noise of variance s(beta)/n.
inline PhaseOutcome sample_outcome(double latent_jz, double n_atoms, const ProbePulse& pulse,
                                   const ProbeCalibration& cal, double delta_chi_sample,
                                   RandomStream& rng) {
    const double w = rng.normal(0.0, std::sqrt(shot_variance(pulse, cal)));
    PhaseOutcome out;
    out.phi = w + cal.chi * 2.0 * latent_jz + delta_chi_sample * n_atoms;
    out.pulse = pulse;
    out.kind = OutcomeKind::atomic;
    return out;
}

// Atom-number readout after pumping all atoms into one hyperfine manifold.
inline PhaseOutcome measure_atom_number(double n_atoms, const ProbePulse& pulse,
                                        const ProbeCalibration& cal, RandomStream& rng) {
    const double w = rng.normal(0.0, std::sqrt(shot_variance(pulse, cal)));
    PhaseOutcome out;
    out.phi = w + cal.chi * cal.chi_bar_ratio * n_atoms;
    out.pulse = pulse;
    out.kind = OutcomeKind::atom_number;
    return out;
}

// Conditioning of the Jz marginal on a measured phase, i.e. the scalar Kalman
// update for the observation phi = 2 chi Jz + w. The conjugate quadrature is
// inflated to the measurement-backaction floor times a configurable excess
// (fluctuating differential light shifts make the anti-squeezed quadrature
// noisier than a minimum-uncertainty state).
inline SpinMoments condition(const SpinMoments& state, const PhaseOutcome& outcome,
                             const ProbePulse& pulse, const ProbeCalibration& cal,
                             double jy_excess_factor = 10.0) {
    const double v = state.var_jz();
    if (!(v > 0.0)) throw std::domain_error("condition: non-positive prior var(Jz)");
    const double chi = cal.chi;
    // measurement noise mapped to Jz units
    const double sigma_m2 = shot_variance(pulse, cal) / (4.0 * chi * chi);
    const double gain = v / (v + sigma_m2);

    SpinMoments out = state;
    const double jz_meas = outcome.phi / (2.0 * chi);
    out.mean.z = state.mean.z + gain * (jz_meas - state.mean.z);
    // z row/column of the covariance shrinks by (1-gain)
    for (int i = 0; i < 3; ++i) {
        out.cov(2, i) *= (1.0 - gain);
        out.cov(i, 2) *= (1.0 - gain);
    }
    out.cov(2, 2) = v * sigma_m2 / (v + sigma_m2);

    const double jlen = out.mean.norm();
    const double heisenberg_floor =
        (out.cov(2, 2) > 0.0) ? (jlen / 2.0) * (jlen / 2.0) / out.cov(2, 2) : 0.0;
    out.cov(1, 1) = std::max(out.cov(1, 1), jy_excess_factor * heisenberg_floor);
    return out;
}

}  // namespace simclock
