#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "simclock/geometry.hpp"
#include "simclock/measurement.hpp"
#include "simclock/random.hpp"
#include "simclock/spin_state.hpp"

// Exact small-N quantum simulation on the symmetric (Dicke) subspace. A dense
// amplitude vector over the Jz eigenbasis m = -j..j is plenty for a test
// oracle; N is capped at 2000.
namespace simclock::oracle {

using cplx = std::complex<double>;

struct DickeState {
    int n_atoms = 0;               // N; j = N/2
    std::vector<cplx> amplitudes;  // index k corresponds to m = k - j

    double j() const { return n_atoms / 2.0; }
    int dim() const { return n_atoms + 1; }
    double m_of(int k) const { return static_cast<double>(k) - j(); }
};

inline double norm_squared(const DickeState& s) {
    double n = 0.0;
    for (const auto& a : s.amplitudes) n += std::norm(a);
    return n;
}

inline void normalize(DickeState& s) {
    const double n = std::sqrt(norm_squared(s));
    if (!(n > 0.0)) throw std::runtime_error("dicke: zero-norm state");
    for (auto& a : s.amplitudes) a /= n;
}

// Symmetric binomial superposition: the coherent spin state along +x.
inline DickeState dicke_css(int n) {
    if (n < 1 || n > 2000) throw std::domain_error("dicke_css: N out of [1, 2000]");
    DickeState s;
    s.n_atoms = n;
    s.amplitudes.resize(n + 1);
    // log binomials keep N~2000 in range
    for (int k = 0; k <= n; ++k) {
        const double log_binom = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                                 std::lgamma(n - k + 1.0);
        s.amplitudes[k] = std::exp(0.5 * (log_binom - n * std::log(2.0)));
    }
    normalize(s);
    return s;
}

namespace detail {

// ladder factor sqrt(j(j+1) - m(m+1)) raising m -> m+1
inline double raise_factor(double j, double m) {
    return std::sqrt(std::max(0.0, j * (j + 1.0) - m * (m + 1.0)));
}

inline void apply_jz(const DickeState& s, std::vector<cplx>& out) {
    out.assign(s.dim(), cplx{});
    for (int k = 0; k < s.dim(); ++k) out[k] = s.m_of(k) * s.amplitudes[k];
}

inline void apply_jx(const DickeState& s, std::vector<cplx>& out) {
    const double j = s.j();
    out.assign(s.dim(), cplx{});
    for (int k = 0; k < s.dim(); ++k) {
        const double m = s.m_of(k);
        if (k + 1 < s.dim()) out[k + 1] += 0.5 * raise_factor(j, m) * s.amplitudes[k];
        if (k - 1 >= 0) out[k - 1] += 0.5 * raise_factor(j, m - 1.0) * s.amplitudes[k];
    }
}

inline void apply_jy(const DickeState& s, std::vector<cplx>& out) {
    const double j = s.j();
    const cplx half_over_i{0.0, -0.5};  // 1/(2i)
    out.assign(s.dim(), cplx{});
    for (int k = 0; k < s.dim(); ++k) {
        const double m = s.m_of(k);
        if (k + 1 < s.dim()) out[k + 1] += half_over_i * raise_factor(j, m) * s.amplitudes[k];
        if (k - 1 >= 0) out[k - 1] -= half_over_i * raise_factor(j, m - 1.0) * s.amplitudes[k];
    }
}

// y = H x with H = nx Jx + ny Jy + nz Jz (tridiagonal in the Dicke basis)
inline void apply_generator(const Vec3& n, double j, const std::vector<cplx>& x,
                            std::vector<cplx>& y) {
    const int dim = static_cast<int>(x.size());
    const cplx cp{0.5 * n.x, -0.5 * n.y};  // coefficient on the raising part
    const cplx cm{0.5 * n.x, 0.5 * n.y};   // coefficient on the lowering part
    for (int k = 0; k < dim; ++k) {
        const double m = static_cast<double>(k) - j;
        cplx v = n.z * m * x[k];
        if (k > 0) v += cp * raise_factor(j, m - 1.0) * x[k - 1];
        if (k + 1 < dim) v += cm * raise_factor(j, m) * x[k + 1];
        y[k] = v;
    }
}

}  // namespace detail

// exp(-i angle (axis . J)) |state>, evaluated by scaled Taylor steps of the
// tridiagonal generator. Unitary to machine precision for the N range the
// oracle serves.
inline DickeState dicke_rotate(const DickeState& state, const Vec3& axis, double angle) {
    if (std::abs(axis.norm() - 1.0) > 1e-12)
        throw std::domain_error("dicke_rotate: axis must be unit length");
    DickeState out = state;
    if (angle == 0.0) return out;
    const double j = state.j();

    // pure z rotations are diagonal
    if (std::abs(axis.x) < 1e-300 && std::abs(axis.y) < 1e-300) {
        const double sgn = axis.z;
        for (int k = 0; k < out.dim(); ++k) {
            const double m = out.m_of(k);
            out.amplitudes[k] *= std::exp(cplx{0.0, -angle * sgn * m});
        }
        return out;
    }

    const double norm_bound = std::abs(angle) * (j + 1.0);
    int steps = 1;
    while (norm_bound / steps > 0.5) steps *= 2;
    const double theta = angle / steps;

    std::vector<cplx> term(out.dim()), tmp(out.dim());
    for (int s = 0; s < steps; ++s) {
        // psi <- exp(-i theta H) psi via Taylor series
        std::vector<cplx> acc = out.amplitudes;
        term = out.amplitudes;
        for (int order = 1; order < 64; ++order) {
            detail::apply_generator(axis, j, term, tmp);
            const cplx factor = cplx{0.0, -theta} / static_cast<double>(order);
            double mag = 0.0;
            for (int k = 0; k < out.dim(); ++k) {
                term[k] = factor * tmp[k];
                acc[k] += term[k];
                mag += std::norm(term[k]);
            }
            if (mag < 1e-34) break;
        }
        out.amplitudes = acc;
    }
    normalize(out);  // remove residual truncation drift
    return out;
}

// Exact first and (symmetrized) second moments of (Jx, Jy, Jz).
inline std::pair<Vec3, Mat3> dicke_moments(const DickeState& state) {
    std::vector<cplx> ox, oy, oz;
    detail::apply_jx(state, ox);
    detail::apply_jy(state, oy);
    detail::apply_jz(state, oz);
    auto inner = [&](const std::vector<cplx>& a, const std::vector<cplx>& b) {
        cplx s{};
        for (size_t k = 0; k < a.size(); ++k) s += std::conj(a[k]) * b[k];
        return s;
    };
    const std::vector<cplx>& psi = state.amplitudes;
    Vec3 mean{inner(psi, ox).real(), inner(psi, oy).real(), inner(psi, oz).real()};
    const std::vector<cplx>* ops[3] = {&ox, &oy, &oz};
    double m[3] = {mean.x, mean.y, mean.z};
    Mat3 cov;
    for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) {
            // symmetrized: Re<A psi | B psi> since A,B are Hermitian
            const double second = inner(*ops[a], *ops[b]).real();
            cov(a, b) = cov(b, a) = second - m[a] * m[b];
        }
    return {mean, cov};
}

// Gaussian Kraus update for the dispersive measurement phi = 2 chi m + w.
// Returns the sampled outcome and the conditioned state.
inline std::pair<double, DickeState> dicke_weak_measure(const DickeState& state,
                                                        const ProbePulse& pulse,
                                                        const ProbeCalibration& cal,
                                                        RandomStream& rng) {
    const double sigma2 = shot_variance(pulse, cal);
    if (!(sigma2 > 0.0)) throw std::domain_error("dicke_weak_measure: zero shot variance");
    // outcome density is the |c_m|^2 mixture of Gaussians: sample m then phi
    double u = rng.uniform();
    int pick = state.dim() - 1;
    double acc = 0.0;
    for (int k = 0; k < state.dim(); ++k) {
        acc += std::norm(state.amplitudes[k]);
        if (u <= acc) {
            pick = k;
            break;
        }
    }
    const double phi = rng.normal(2.0 * cal.chi * state.m_of(pick), std::sqrt(sigma2));

    DickeState post = state;
    for (int k = 0; k < post.dim(); ++k) {
        const double d = phi - 2.0 * cal.chi * post.m_of(k);
        post.amplitudes[k] *= std::exp(-d * d / (4.0 * sigma2));
    }
    normalize(post);
    return {phi, post};
}

// Posterior var(Jz) for a given outcome (deterministic Kraus update).
inline double posterior_var_jz(const DickeState& state, double phi, double chi, double sigma2) {
    double w_sum = 0.0, m1 = 0.0, m2 = 0.0;
    // subtract the max exponent for stability
    double best = -1e300;
    for (int k = 0; k < state.dim(); ++k) {
        const double d = phi - 2.0 * chi * state.m_of(k);
        const double e = -d * d / (2.0 * sigma2);
        if (e > best) best = e;
    }
    for (int k = 0; k < state.dim(); ++k) {
        const double d = phi - 2.0 * chi * state.m_of(k);
        const double w = std::norm(state.amplitudes[k]) * std::exp(-d * d / (2.0 * sigma2) - best);
        const double m = state.m_of(k);
        w_sum += w;
        m1 += w * m;
        m2 += w * m * m;
    }
    m1 /= w_sum;
    m2 /= w_sum;
    return m2 - m1 * m1;
}

// Outcome-averaged posterior var(Jz), integrated over the exact outcome
// density on a fine grid. Deterministic counterpart of averaging
// dicke_weak_measure posteriors over many draws.
inline double mean_posterior_var_jz(const DickeState& state, double chi, double sigma2,
                                    int grid_points = 4001) {
    const double j = state.j();
    const double span = 2.0 * chi * j + 8.0 * std::sqrt(sigma2 + chi * chi * state.n_atoms);
    const double lo = -span, hi = span;
    const double dphi = (hi - lo) / (grid_points - 1);
    double p_total = 0.0, acc = 0.0;
    for (int i = 0; i < grid_points; ++i) {
        const double phi = lo + i * dphi;
        double p = 0.0;
        for (int k = 0; k < state.dim(); ++k) {
            const double d = phi - 2.0 * chi * state.m_of(k);
            p += std::norm(state.amplitudes[k]) *
                 std::exp(-d * d / (2.0 * sigma2)) / std::sqrt(2.0 * M_PI * sigma2);
        }
        const double w = (i == 0 || i == grid_points - 1) ? 0.5 : 1.0;  // trapezoid
        p_total += w * p * dphi;
        acc += w * p * posterior_var_jz(state, phi, chi, sigma2) * dphi;
    }
    return acc / p_total;
}

}  // namespace simclock::oracle
