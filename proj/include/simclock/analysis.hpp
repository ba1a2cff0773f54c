#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace simclock::analysis {

struct FitResult {
    std::vector<double> coefficients;
    std::vector<std::vector<double>> covariance;  // of the coefficients
    double residual_norm = 0.0;                   // sqrt(weighted SSR)
    int iterations = 0;
    bool converged = true;
};

// Nonlinear fits that fail to converge throw this, carrying the best iterate.
struct FitError : std::runtime_error {
    FitResult best;
    FitError(const std::string& what, FitResult b) : std::runtime_error(what), best(std::move(b)) {}
};

inline double to_db(double ratio) {
    if (!(ratio > 0.0)) throw std::domain_error("to_db: ratio must be positive");
    return 10.0 * std::log10(ratio);
}

inline double from_db(double db) { return std::pow(10.0, db / 10.0); }

namespace detail {

// Solves the n x n system A x = b in place by Gauss elimination with partial
// pivoting; small n only.
inline std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const size_t n = b.size();
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-300)
            throw std::runtime_error("fit: rank-deficient design matrix");
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (size_t i = n; i-- > 0;) {
        double s = b[i];
        for (size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
        x[i] = s / a[i][i];
    }
    return x;
}

inline std::vector<std::vector<double>> invert(std::vector<std::vector<double>> a) {
    const size_t n = a.size();
    std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i) {
        std::vector<double> e(n, 0.0);
        e[i] = 1.0;
        auto col = solve(a, e);
        for (size_t r = 0; r < n; ++r) inv[r][i] = col[r];
    }
    return inv;
}

}  // namespace detail

// Weighted polynomial least squares y = sum_k c_k x^k of given order.
inline FitResult weighted_polynomial_fit(const std::vector<double>& x,
                                         const std::vector<double>& y,
                                         const std::vector<double>& w, int order) {
    const size_t n = x.size();
    const int p = order + 1;
    if (n < static_cast<size_t>(p)) throw std::invalid_argument("polynomial fit: too few points");
    std::vector<std::vector<double>> ata(p, std::vector<double>(p, 0.0));
    std::vector<double> atb(p, 0.0);
    for (size_t i = 0; i < n; ++i) {
        double powx[8];
        powx[0] = 1.0;
        for (int k = 1; k < p; ++k) powx[k] = powx[k - 1] * x[i];
        for (int r = 0; r < p; ++r) {
            atb[r] += w[i] * powx[r] * y[i];
            for (int c = 0; c < p; ++c) ata[r][c] += w[i] * powx[r] * powx[c];
        }
    }
    FitResult res;
    res.coefficients = detail::solve(ata, atb);
    res.covariance = detail::invert(ata);
    double ssr = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double fit = 0.0, px = 1.0;
        for (int k = 0; k < p; ++k) {
            fit += res.coefficients[k] * px;
            px *= x[i];
        }
        ssr += w[i] * (y[i] - fit) * (y[i] - fit);
    }
    res.residual_norm = std::sqrt(ssr);
    return res;
}

struct BinPoint {
    double n_atoms = 0.0;
    double variance = 0.0;
    double variance_error = 0.0;  // one-sigma error of the variance estimate
};

// var(phi) = a0 + a1 N + a2 N^2 over atom-number bins: a0 is the optical shot
// noise, a1 N the projection-noise slope, a2 N^2 the classical part.
inline FitResult quadratic_variance_fit(const std::vector<BinPoint>& bins) {
    if (bins.size() < 3) throw std::invalid_argument("quadratic_variance_fit: need >= 3 bins");
    std::vector<double> x, y, w;
    for (const auto& b : bins) {
        x.push_back(b.n_atoms);
        y.push_back(b.variance);
        const double e = (b.variance_error > 0.0) ? b.variance_error : 1.0;
        w.push_back(1.0 / (e * e));
    }
    return weighted_polynomial_fit(x, y, w, 2);
}

// xi(t2) = 1 - B exp(-t2/tau), fitted by damped Gauss-Newton. The initial
// guess comes from log-linearizing 1 - xi.
inline FitResult exp_approach_fit(const std::vector<double>& t2, const std::vector<double>& xi,
                                  int max_iterations = 200, double step_tol = 1e-8) {
    const size_t n = t2.size();
    if (n < 3) throw std::invalid_argument("exp_approach_fit: need >= 3 points");
    for (double v : xi)
        if (!std::isfinite(v)) throw std::invalid_argument("exp_approach_fit: non-finite xi");

    // log-linearization on points with xi < 1
    std::vector<double> lx, ly;
    for (size_t i = 0; i < n; ++i)
        if (xi[i] < 1.0) {
            lx.push_back(t2[i]);
            ly.push_back(std::log(1.0 - xi[i]));
        }
    FitResult best;
    if (lx.size() < 2) throw FitError("exp_approach_fit: no decaying branch", best);
    std::vector<double> lw(lx.size(), 1.0);
    auto lin = weighted_polynomial_fit(lx, ly, lw, 1);
    double b = std::exp(lin.coefficients[0]);
    double tau = (lin.coefficients[1] < 0.0) ? -1.0 / lin.coefficients[1]
                                             : (lx.back() - lx.front());
    if (!(tau > 0.0) || !std::isfinite(tau)) tau = lx.back() - lx.front();

    auto ssr_of = [&](double bb, double tt) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double r = xi[i] - (1.0 - bb * std::exp(-t2[i] / tt));
            s += r * r;
        }
        return s;
    };

    double ssr = ssr_of(b, tau);
    int it = 0;
    bool converged = false;
    for (; it < max_iterations; ++it) {
        // residuals r_i = xi_i - model, jacobian wrt (B, tau)
        double jtj[2][2] = {{0, 0}, {0, 0}};
        double jtr[2] = {0, 0};
        for (size_t i = 0; i < n; ++i) {
            const double e = std::exp(-t2[i] / tau);
            const double r = xi[i] - (1.0 - b * e);
            const double db = e;                               // dr/dB
            const double dtau = b * e * t2[i] / (tau * tau);   // dr/dtau
            jtj[0][0] += db * db;
            jtj[0][1] += db * dtau;
            jtj[1][1] += dtau * dtau;
            jtr[0] += db * r;
            jtr[1] += dtau * r;
        }
        jtj[1][0] = jtj[0][1];
        const double det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[0][1];
        if (std::abs(det) < 1e-300) break;
        double step_b = -(jtj[1][1] * jtr[0] - jtj[0][1] * jtr[1]) / det;
        double step_t = -(jtj[0][0] * jtr[1] - jtj[0][1] * jtr[0]) / det;

        // damped step: halve until the residual improves
        double lambda = 1.0;
        double nb = b, nt = tau, nssr = ssr;
        for (int h = 0; h < 30; ++h) {
            const double cb = b + lambda * step_b;
            const double ct = tau + lambda * step_t;
            if (ct > 0.0) {
                const double s = ssr_of(cb, ct);
                if (s < ssr) {
                    nb = cb;
                    nt = ct;
                    nssr = s;
                    break;
                }
            }
            lambda *= 0.5;
        }
        const double rel_step = std::abs(nb - b) / std::max(1e-12, std::abs(b)) +
                                std::abs(nt - tau) / std::max(1e-12, std::abs(tau));
        b = nb;
        tau = nt;
        ssr = nssr;
        if (rel_step < step_tol) {
            converged = true;
            break;
        }
    }

    best.coefficients = {b, tau};
    best.residual_norm = std::sqrt(ssr);
    best.iterations = it;
    best.converged = converged;
    if (!converged) throw FitError("exp_approach_fit: no convergence", best);
    return best;
}

// One-parameter weighted fit var_classical(T) = c T^2; the detuning spread is
// sqrt(c)/(2 pi) in Hz.
inline FitResult classical_vs_t_fit(const std::vector<double>& T, const std::vector<double>& var,
                                    const std::vector<double>& sigma = {}) {
    if (T.size() < 2) throw std::invalid_argument("classical_vs_t_fit: need >= 2 points");
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < T.size(); ++i) {
        const double s = sigma.empty() ? 1.0 : sigma[i];
        const double w = 1.0 / (s * s);
        const double t2 = T[i] * T[i];
        num += w * t2 * var[i];
        den += w * t2 * t2;
    }
    FitResult res;
    const double c = num / den;
    if (c < 0.0) throw std::runtime_error("classical_vs_t_fit: negative coefficient");
    res.coefficients = {c, std::sqrt(c) / (2.0 * M_PI)};  // [c, sqrt(var Delta) in Hz]
    res.covariance = {{1.0 / den, 0.0}, {0.0, 0.0}};
    double ssr = 0.0;
    for (size_t i = 0; i < T.size(); ++i) {
        const double s = sigma.empty() ? 1.0 : sigma[i];
        const double r = (var[i] - c * T[i] * T[i]) / s;
        ssr += r * r;
    }
    res.residual_norm = std::sqrt(ssr);
    return res;
}

// Normalization of optical phases to atomic phase units via the Ramsey slope
// A(T) = chi (1-eta) h(T) N.
struct PhaseNormalization {
    double chi = 0.0;
    double eta = 0.0;
    double contrast = 1.0;  // h(T)
    double n_atoms = 0.0;

    double slope() const { return chi * (1.0 - eta) * contrast * n_atoms; }
};

inline double normalize_phase(double phi, const PhaseNormalization& norm) {
    const double a = norm.slope();
    if (!(a > 0.0)) throw std::domain_error("normalize_phase: non-positive Ramsey slope");
    return phi / a;
}

// One row of the clock noise budget, all entries in normalized-phase
// variance units (rad^2 of atomic phase).
struct BudgetPoint {
    double T = 0.0;
    double shot = 0.0;
    double projection = 0.0;             // unconditioned projection noise
    double projection_conditional = 0.0; // after conditioning on the first probe
    double classical = 0.0;
    double total = 0.0;                  // var(tilde phi_2)
    double conditional_total = 0.0;      // var(tilde phi_21)
};

// Smallest T at which `values` crosses the projection-noise limit 1/N from
// below, located by bisection on the linear interpolant. none if the curve
// never crosses inside the grid.
inline std::optional<double> wineland_crossing(const std::vector<double>& T,
                                               const std::vector<double>& values,
                                               double n_atoms) {
    if (T.size() != values.size() || T.size() < 2)
        throw std::invalid_argument("wineland_crossing: bad grid");
    const double threshold = 1.0 / n_atoms;
    for (size_t i = 0; i < T.size(); ++i) {
        if (values[i] == threshold) return T[i];
        if (i + 1 < T.size() && (values[i] - threshold) * (values[i + 1] - threshold) < 0.0) {
            double lo = T[i], hi = T[i + 1];
            auto interp = [&](double t) {
                const double u = (t - T[i]) / (T[i + 1] - T[i]);
                return values[i] + u * (values[i + 1] - values[i]) - threshold;
            };
            const double flo = interp(lo);
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                if ((interp(mid) > 0) == (flo > 0))
                    lo = mid;
                else
                    hi = mid;
            }
            return 0.5 * (lo + hi);
        }
    }
    return std::nullopt;
}

// Fringe fit <Jz>(theta) = a cos(theta) + b sin(theta), reported as amplitude
// and phase offset relative to the sequence readout quadrature (which sits
// 90 degrees from the preparation pulse axis, so an ideal balanced scan
// reports zero offset).
struct FringeFit {
    double amplitude = 0.0;
    double phase_offset = 0.0;  // radians, deviation from the readout quadrature
};

inline FringeFit fit_fringe(const std::vector<double>& theta, const std::vector<double>& mean_jz) {
    if (theta.size() != mean_jz.size() || theta.size() < 3)
        throw std::invalid_argument("fit_fringe: need >= 3 points");
    double cc = 0, ss = 0, cs = 0, yc = 0, ys = 0;
    for (size_t i = 0; i < theta.size(); ++i) {
        const double c = std::cos(theta[i]), s = std::sin(theta[i]);
        cc += c * c;
        ss += s * s;
        cs += c * s;
        yc += mean_jz[i] * c;
        ys += mean_jz[i] * s;
    }
    const double det = cc * ss - cs * cs;
    if (std::abs(det) < 1e-300) throw std::runtime_error("fit_fringe: degenerate scan");
    const double a = (yc * ss - ys * cs) / det;
    const double b = (ys * cc - yc * cs) / det;
    FringeFit f;
    f.amplitude = std::hypot(a, b);
    // signal = A sin(theta - phi_acc) = A cos(theta - pi/2 - phi_acc)
    double off = std::atan2(b, a) - M_PI / 2.0;
    while (off > M_PI) off -= 2.0 * M_PI;
    while (off < -M_PI) off += 2.0 * M_PI;
    f.phase_offset = off;
    return f;
}

}  // namespace simclock::analysis
