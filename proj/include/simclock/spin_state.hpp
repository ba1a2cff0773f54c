#pragma once

#include <cmath>
#include <stdexcept>

#include "simclock/geometry.hpp"

namespace simclock {

// Gaussian-moment description of the collective pseudo-spin of N two-level
// atoms: mean Bloch vector (units of atoms, hbar = 1) and the 3x3 covariance
// of (Jx, Jy, Jz) in atoms^2. Atom number is treated as a continuous real;
// the Dicke oracle covers the discrete regime.
struct SpinMoments {
    Vec3 mean;
    Mat3 cov;

    double var_jx() const { return cov(0, 0); }
    double var_jy() const { return cov(1, 1); }
    double var_jz() const { return cov(2, 2); }
};

// Atom sample bookkeeping: one trapped cloud is reused for several
// experiments within a loading cycle.
struct AtomSample {
    double n_atoms = 0.0;
    int experiment_index = 0;  // position within the recycle chain
    long cycle_index = 0;
};

// Coherent spin state polarized along +x. Transverse variances are the
// projection noise N/4; the variance along the mean is zero at leading
// order, which is all the transverse-moment formulas consume.
inline SpinMoments make_css(double n_atoms) {
    if (n_atoms < 0.0) throw std::domain_error("make_css: negative atom number");
    SpinMoments s;
    s.mean = {n_atoms / 2.0, 0.0, 0.0};
    s.cov = Mat3::diag(0.0, n_atoms / 4.0, n_atoms / 4.0);
    return s;
}

// Pseudo-spin state with every atom in the lower clock level: mean along -z,
// projection noise in the two transverse components.
inline SpinMoments make_all_down(double n_atoms) {
    if (n_atoms < 0.0) throw std::domain_error("make_all_down: negative atom number");
    SpinMoments s;
    s.mean = {0.0, 0.0, -n_atoms / 2.0};
    s.cov = Mat3::diag(n_atoms / 4.0, n_atoms / 4.0, 0.0);
    return s;
}

inline SpinMoments rotate(const SpinMoments& state, const Vec3& axis, double angle) {
    if (std::abs(axis.norm() - 1.0) > 1e-12)
        throw std::domain_error("rotate: axis must be unit length");
    const Mat3 r = rotation_matrix(axis, angle);
    SpinMoments out;
    out.mean = r.apply(state.mean);
    out.cov = r.sandwich(state.cov);
    return out;
}

// Deterministic shortening of the mean spin vector from photon scattering.
// The covariance is untouched: scattering redistributes population within
// hyperfine manifolds without adding partition noise to Jz.
inline SpinMoments apply_contrast(const SpinMoments& state, double factor) {
    if (factor < 0.0 || factor > 1.0)
        throw std::domain_error("apply_contrast: factor outside [0,1]");
    SpinMoments out = state;
    out.mean = state.mean * factor;
    return out;
}

// Wineland squeezing parameter xi = N * var(Jz) / |<J>|^2. Values below one
// witness entanglement and quantify the metrological gain.
inline double squeezing_parameter(const SpinMoments& state, double n_atoms) {
    const double j = state.mean.norm();
    if (j <= 0.0) throw std::domain_error("squeezing_parameter: zero mean spin");
    return state.var_jz() * n_atoms / (j * j);
}

// |<J>| can never exceed N/2; used by validity checks in tests and the engine.
inline bool mean_length_valid(const SpinMoments& state, double n_atoms,
                              double rel_tol = 1e-9) {
    return state.mean.norm() <= n_atoms / 2.0 + rel_tol * n_atoms;
}

}  // namespace simclock
