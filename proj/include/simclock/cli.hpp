#pragma once

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "simclock/analysis.hpp"
#include "simclock/config.hpp"
#include "simclock/engine.hpp"
#include "simclock/io.hpp"
#include "simclock/oracle.hpp"
#include "simclock/presets.hpp"

namespace simclock::cli {

namespace fs = std::filesystem;
using config::RunSettings;
using io::json;
using presets::Preset;

struct RunOptions {
    std::string preset;
    std::string config_path;            // optional
    std::vector<std::string> overrides; // --set key=value
    std::optional<uint64_t> seed;
    std::optional<long> workers;
    std::string out_dir;
    bool force = false;
};

inline RunSettings resolve_settings(Preset preset, const RunOptions& opt) {
    RunSettings s = presets::defaults(preset);
    if (!opt.config_path.empty()) config::apply_config_file(s, opt.config_path);
    for (const auto& kv : opt.overrides) config::apply_override(s, kv);
    if (opt.seed) s.seed = *opt.seed;
    if (opt.workers) s.workers = *opt.workers;
    return s;
}

namespace detail_cli {

// variance of phi1 / combined phi2 over the reference (empty interferometer)
// shots, the zero-phase calibration data
inline std::pair<double, double> reference_variances(const std::vector<TrialRecord>& records) {
    std::vector<double> p1, p2;
    for (const auto& r : records)
        if (r.kind == OutcomeKind::empty_reference) {
            p1.push_back(r.phi1);
            p2.push_back(r.phi2);
        }
    if (p1.size() < 3) return {0.0, 0.0};
    auto var = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= v.size();
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return s / (v.size() - 1);
    };
    return {var(p1), var(p2)};
}

}  // namespace detail_cli

// ---------------------------------------------------------------------------
// preset pipelines; each returns the summary json and optionally writes its
// data products into `out`

inline json run_squeeze_scan(const RunSettings& s, const fs::path* out) {
    CampaignConfig cfg = presets::campaign_of(s);
    cfg.sequence = presets::squeezing_sequence_of(s);
    const auto records = run_campaign(cfg);
    const auto diffs = differential_subtract(records);
    EstimatorContext ctx = presets::estimator_context_of(s, 0.0);
    const auto [ref1, ref2] = detail_cli::reference_variances(records);
    if (s.subtract_reference && ref2 > 0.0) ctx.shot2_measured = ref2;
    auto rep = estimate(diffs, ctx);
    rep.bins = bin_by_atom_number(diffs, 10);

    std::vector<analysis::BinPoint> pts;
    for (const auto& b : rep.bins)
        pts.push_back({b.n_atoms_mean, b.var_phi2, b.var_phi2_error});
    const auto quad = analysis::quadratic_variance_fit(pts);

    json j;
    j["report"] = io::report_json(rep);
    j["reference_var_phi1"] = ref1;
    j["reference_var_phi2"] = ref2;
    j["quadratic_fit"] = {
        {"a0", quad.coefficients[0]},
        {"a1", quad.coefficients[1]},
        {"a2", quad.coefficients[2]},
        {"a0_sigma", std::sqrt(quad.covariance[0][0])},
        {"a1_sigma", std::sqrt(quad.covariance[1][1])},
        {"a2_sigma", std::sqrt(quad.covariance[2][2])},
        {"chi_squared_expected", s.chi * s.chi},
    };
    if (out) {
        if (s.emit_records) io::write_text(*out / "records.csv", io::records_csv(records));
        io::write_text(*out / "bins.csv", io::bins_csv(rep.bins));
        io::write_text(*out / "sequence.txt", to_text(cfg.sequence));
    }
    return j;
}

inline json run_pulse_count_scan(const RunSettings& s, const fs::path* out) {
    CampaignConfig cfg = presets::campaign_of(s);
    cfg.sequence = presets::squeezing_sequence_of(s);
    const auto records = run_campaign(cfg);
    const auto diffs = differential_subtract(records);
    EstimatorContext ctx = presets::estimator_context_of(s, 0.0);

    std::vector<double> t2s, xi_corr, xi_cond;
    std::vector<std::vector<double>> rows;
    for (long k = 1; k <= s.pulses2; ++k) {
        auto combined = combine_subs(diffs, static_cast<int>(k));
        EstimatorContext ck = ctx;
        ck.photons2_total = s.photons2_pulse * k;
        const auto rep = estimate(combined, ck);
        const double t2 = k * (s.probe_duration + s.gap) - s.gap;
        t2s.push_back(t2);
        xi_corr.push_back(rep.xi_corr);
        xi_cond.push_back(rep.xi);
        rows.push_back({static_cast<double>(k), t2, rep.xi_corr, rep.xi});
    }
    const auto fit = analysis::exp_approach_fit(t2s, xi_corr);

    json j;
    j["xi_vs_t2"] = json::array();
    for (size_t i = 0; i < t2s.size(); ++i)
        j["xi_vs_t2"].push_back({{"pulses", i + 1},
                                 {"t2", t2s[i]},
                                 {"xi_corr", xi_corr[i]},
                                 {"xi_cond", xi_cond[i]}});
    j["exp_fit"] = {{"B", fit.coefficients[0]},
                    {"tau_decay", fit.coefficients[1]},
                    {"tau_decay_injected", s.tau_decay},
                    {"iterations", fit.iterations},
                    {"residual_norm", fit.residual_norm}};
    if (out) {
        if (s.emit_records) io::write_text(*out / "records.csv", io::records_csv(records));
        io::write_text(*out / "xi_t2.csv",
                       io::table_csv({"pulses", "t2", "xi_corr", "xi_cond"}, rows));
        io::write_text(*out / "sequence.txt", to_text(cfg.sequence));
    }
    return j;
}

// theta2 grid shared by the fringe presets
inline std::vector<double> theta_grid(long points) {
    std::vector<double> th;
    for (long i = 0; i < points; ++i) th.push_back(2.0 * M_PI * i / points);
    return th;
}

// mean Jz (inferred from the readout phase) for a sequence at each theta2
inline std::vector<double> fringe_scan_means(const RunSettings& s, bool with_qnd,
                                             bool probe_in_ramsey, double T,
                                             uint64_t seed_salt, double* n_mean_out) {
    const auto thetas = theta_grid(s.theta_points);
    std::vector<double> means;
    double n_sum = 0.0;
    long n_cnt = 0;
    for (size_t i = 0; i < thetas.size(); ++i) {
        RunSettings sp = s;
        sp.cycles = std::max<long>(2, s.trials_per_point / s.experiments_per_cycle);
        sp.seed = derive_seed(s.seed, seed_salt, i);
        CampaignConfig cfg = presets::campaign_of(sp);
        cfg.sequence = probe_in_ramsey
                           ? presets::probe_in_ramsey_sequence_of(sp, with_qnd, thetas[i])
                           : presets::ear_sequence_of(sp, T, with_qnd, thetas[i]);
        const auto records = run_campaign(cfg);
        double acc = 0.0;
        long cnt = 0;
        for (const auto& r : records)
            if (r.kind == OutcomeKind::atomic) {
                acc += r.phi2;
                n_sum += r.n_atoms_measured;
                ++cnt;
            }
        n_cnt += cnt;
        means.push_back(acc / cnt / (2.0 * s.chi));  // phase -> Jz units
    }
    if (n_mean_out) *n_mean_out = n_sum / n_cnt;
    return means;
}

inline json run_decoherence_fringe(const RunSettings& s, const fs::path* out) {
    const auto thetas = theta_grid(s.theta_points);
    double n_mean = 0.0;
    const auto means_plain = fringe_scan_means(s, false, true, 0.0, 0xF1, &n_mean);
    const auto means_qnd = fringe_scan_means(s, true, true, 0.0, 0xF2, nullptr);
    const auto fit_plain = analysis::fit_fringe(thetas, means_plain);
    const auto fit_qnd = analysis::fit_fringe(thetas, means_qnd);

    const double eta_est = 1.0 - fit_qnd.amplitude / fit_plain.amplitude;
    const double alpha_est = -std::log(1.0 - eta_est) / s.qnd_photons;
    json j;
    j["fringe_amplitude_plain"] = fit_plain.amplitude;
    j["fringe_amplitude_qnd"] = fit_qnd.amplitude;
    j["fringe_phase_deg_plain"] = fit_plain.phase_offset * 180.0 / M_PI;
    j["fringe_phase_deg_qnd"] = fit_qnd.phase_offset * 180.0 / M_PI;
    j["phase_match_deg"] = (fit_qnd.phase_offset - fit_plain.phase_offset) * 180.0 / M_PI;
    j["eta_estimated"] = eta_est;
    j["eta_model"] = 1.0 - std::exp(-s.alpha * s.qnd_photons);
    j["alpha_estimated"] = alpha_est;
    j["qnd_photons"] = s.qnd_photons;
    if (out) {
        std::vector<std::vector<double>> rows;
        for (size_t i = 0; i < thetas.size(); ++i)
            rows.push_back({thetas[i], means_plain[i], means_qnd[i]});
        io::write_text(*out / "fringe.csv",
                       io::table_csv({"theta2", "jz_mean_plain", "jz_mean_qnd"}, rows));
    }
    return j;
}

inline json run_fringe_decay(const RunSettings& s, const fs::path* out) {
    const auto t_values = config::parse_list(s.t_list, config::KeyKind::duration, "scan.t_list");
    if (t_values.size() < 2) throw std::runtime_error("fringe-decay: scan.t_list too short");
    NoiseModels nm = presets::noise_of(s);
    const auto thetas = theta_grid(s.theta_points);

    json j;
    j["h_of_t"] = json::array();
    std::vector<std::vector<double>> rows;
    for (size_t ti = 0; ti < t_values.size(); ++ti) {
        double n_mean = 0.0;
        const auto means = fringe_scan_means(s, false, false, t_values[ti], 0xA0 + ti, &n_mean);
        const auto fit = analysis::fit_fringe(thetas, means);
        const double h_est = 2.0 * fit.amplitude / n_mean;
        const double h_model = fringe_contrast(t_values[ti], nm.contrast);
        j["h_of_t"].push_back({{"T", t_values[ti]},
                               {"h_estimated", h_est},
                               {"h_model", h_model},
                               {"phase_offset_deg", fit.phase_offset * 180.0 / M_PI}});
        rows.push_back({t_values[ti], h_est, h_model});
    }
    j["tau_inh"] = s.tau_inh;
    if (out) io::write_text(*out / "h_of_t.csv", io::table_csv({"T", "h_estimated", "h_model"}, rows));
    return j;
}

inline json run_clock_squeeze(const RunSettings& s, const fs::path* out) {
    auto one = [&](const RunSettings& rs) {
        CampaignConfig cfg = presets::campaign_of(rs);
        cfg.sequence = presets::ear_sequence_of(rs, rs.interrogation_time, true, rs.theta2);
        const auto records = run_campaign(cfg);
        const auto diffs = differential_subtract(records);
        EstimatorContext ctx = presets::estimator_context_of(rs, rs.interrogation_time);
        return std::make_pair(estimate(diffs, ctx), records);
    };

    auto [rep, records] = one(s);
    RunSettings quiet = s;  // classical noise zeroed
    quiet.mw_phase_jitter = 0.0;
    quiet.detuning_std = 0.0;
    auto [rep_nc, records_nc] = one(quiet);

    json j;
    j["T"] = s.interrogation_time;
    j["report"] = io::report_json(rep);
    j["report_no_classical"] = io::report_json(rep_nc);
    j["xi_db"] = io::round_db(analysis::to_db(rep.xi));
    j["xi_no_classical_db"] = io::round_db(analysis::to_db(rep_nc.xi));
    j["xi_lin_db"] = io::round_db(analysis::to_db(rep.xi_lin));
    j["var_ratio_phi2_phi1"] = rep.var_phi2 / rep.var_phi1;
    if (out) {
        if (s.emit_records) io::write_text(*out / "records.csv", io::records_csv(records));
        io::write_text(*out / "sequence.txt",
                       to_text(presets::ear_sequence_of(s, s.interrogation_time, true,
                                                        s.theta2)));
    }
    return j;
}

inline json run_clock_noise_budget(const RunSettings& s, const fs::path* out) {
    std::vector<double> t_grid;
    for (double t = s.scan_t_min; t <= s.scan_t_max + 1e-12; t += s.scan_t_step)
        t_grid.push_back(t);
    if (t_grid.size() < 2) throw std::runtime_error("clock-noise-budget: empty T grid");

    NoiseModels nm = presets::noise_of(s);
    std::vector<analysis::BudgetPoint> budget;
    std::vector<double> cls_var, cls_sigma, cond_totals;
    double n_mean_global = 0.0;

    for (size_t ti = 0; ti < t_grid.size(); ++ti) {
        RunSettings sp = s;
        sp.seed = derive_seed(s.seed, 0xB0, ti);
        CampaignConfig cfg = presets::campaign_of(sp);
        cfg.sequence = presets::ear_sequence_of(sp, t_grid[ti], true, sp.theta2);
        const auto records = run_campaign(cfg);
        const auto diffs = differential_subtract(records);
        EstimatorContext ctx = presets::estimator_context_of(sp, t_grid[ti]);
        const auto rep = estimate(diffs, ctx);
        n_mean_global += rep.n_atoms_mean / t_grid.size();

        const analysis::PhaseNormalization norm{s.chi, ctx.eta, ctx.contrast, rep.n_atoms_mean};
        const double a2 = norm.slope() * norm.slope();
        analysis::BudgetPoint p;
        p.T = t_grid[ti];
        p.shot = rep.shot2 / a2;
        p.projection = rep.projection_css / a2;
        p.projection_conditional = rep.projection_css / (1.0 + rep.kappa_sq_calibrated) / a2;
        p.total = rep.var_phi2 / a2;
        p.conditional_total = rep.conditional_variance / a2;
        p.classical = std::max(0.0, p.conditional_total - p.shot - p.projection_conditional);
        budget.push_back(p);
        cls_var.push_back(p.classical);
        cls_sigma.push_back(rep.conditional_variance * std::sqrt(2.0 / (rep.n_samples - 1)) / a2);
        cond_totals.push_back(p.conditional_total);
    }

    const auto cfit = analysis::classical_vs_t_fit(t_grid, cls_var, cls_sigma);

    // idealized curve: shot + conditionally reduced projection noise, no
    // classical term, on a fine grid through the same normalization
    const double chi = s.chi;
    const double eta = 1.0 - std::exp(-s.alpha * s.photons1);
    const double shot2 = presets::calibration_of(s).shot_prefactor() /
                         (s.photons2_pulse * s.pulses2);
    const double p_css = chi * chi * n_mean_global;
    const double kappa2 = p_css * s.photons1 / presets::calibration_of(s).shot_prefactor();
    std::vector<double> t_fine, ideal_fine;
    for (double t = t_grid.front(); t <= t_grid.back(); t += 1e-6) {
        const double h = fringe_contrast(t, nm.contrast);
        const double a = chi * (1.0 - eta) * h * n_mean_global;
        t_fine.push_back(t);
        ideal_fine.push_back((shot2 + p_css / (1.0 + kappa2)) / (a * a));
    }
    const auto crossing_ideal = analysis::wineland_crossing(t_fine, ideal_fine, n_mean_global);
    const auto crossing_measured =
        analysis::wineland_crossing(t_grid, cond_totals, n_mean_global);

    json j;
    j["n_atoms_mean"] = n_mean_global;
    j["classical_fit"] = {{"c", cfit.coefficients[0]},
                          {"sqrt_var_detuning_hz", cfit.coefficients[1]},
                          {"sqrt_var_detuning_injected_hz", s.detuning_std}};
    j["wineland_crossing_idealized"] =
        crossing_ideal ? json(*crossing_ideal) : json(nullptr);
    j["wineland_crossing_measured"] =
        crossing_measured ? json(*crossing_measured) : json(nullptr);
    j["budget"] = json::array();
    for (const auto& p : budget)
        j["budget"].push_back({{"T", p.T},
                               {"shot", p.shot},
                               {"projection", p.projection},
                               {"projection_conditional", p.projection_conditional},
                               {"classical", p.classical},
                               {"total", p.total},
                               {"conditional_total", p.conditional_total}});
    if (out) io::write_text(*out / "budget.csv", io::budget_csv(budget));
    return j;
}

inline json run_oracle_check(const RunSettings& s, const fs::path* out) {
    const auto n_list = config::parse_list(s.oracle_n, config::KeyKind::real, "scan.oracle_n");
    const auto k_list =
        config::parse_list(s.oracle_kappa_sq, config::KeyKind::real, "scan.oracle_kappa_sq");
    json j;
    j["posterior_checks"] = json::array();
    bool all_ok = true;
    std::vector<std::vector<double>> rows;
    for (double k2 : k_list) {
        double prev_err = -1.0;
        bool shrinking = true;
        for (double nd : n_list) {
            const int n = static_cast<int>(nd);
            const auto css = oracle::dicke_css(n);
            const double sigma2 = 1.0;
            const double chi = std::sqrt(k2 * sigma2 / n);
            const double gauss = (n / 4.0) / (1.0 + k2);
            const double exact = oracle::mean_posterior_var_jz(css, chi, sigma2);
            const double rel = std::abs(exact - gauss) / exact;
            if (prev_err >= 0.0 && rel > prev_err) shrinking = false;
            prev_err = rel;
            const bool ok = rel < 0.05;
            all_ok = all_ok && ok;
            j["posterior_checks"].push_back({{"n_atoms", n},
                                             {"kappa_sq", k2},
                                             {"gaussian_posterior_var", gauss},
                                             {"oracle_posterior_var", exact},
                                             {"relative_error", rel},
                                             {"pass", ok}});
            rows.push_back({static_cast<double>(n), k2, gauss, exact, rel, ok ? 1.0 : 0.0});
        }
        j["error_shrinks_with_n_" + std::to_string(k2)] = shrinking;
        all_ok = all_ok && shrinking;
    }

    // noiseless entanglement-assisted Ramsey on the exact state: final <Jz>
    // must equal (N/2) sin(2 pi Delta T)
    {
        const int n = 100;
        const double delta = 313.0, T = 47e-6;
        const double phase = 2.0 * M_PI * delta * T;
        auto psi = oracle::dicke_css(n);  // state after the preparation pulse
        psi = oracle::dicke_rotate(psi, Vec3{1, 0, 0}, -M_PI / 2.0);
        psi = oracle::dicke_rotate(psi, Vec3{0, 0, 1}, phase);
        psi = oracle::dicke_rotate(psi, Vec3{-1, 0, 0}, -M_PI / 2.0);
        const auto [mean, cov] = oracle::dicke_moments(psi);
        const double expect = (n / 2.0) * std::sin(phase);
        const double resid = std::abs(mean.z - expect) / (n / 2.0);
        j["ear_mean_jz_residual"] = resid;
        j["ear_pass"] = resid < 1e-10;
        all_ok = all_ok && (resid < 1e-10);
    }
    j["all_pass"] = all_ok;
    if (out)
        io::write_text(*out / "oracle_table.csv",
                       io::table_csv({"n_atoms", "kappa_sq", "gaussian_var", "oracle_var",
                                      "relative_error", "pass"},
                                     rows));
    return j;
}

// ---------------------------------------------------------------------------

inline json run_preset(Preset preset, const RunSettings& s, const fs::path* out) {
    switch (preset) {
        case Preset::squeeze_scan: return run_squeeze_scan(s, out);
        case Preset::pulse_count_scan: return run_pulse_count_scan(s, out);
        case Preset::decoherence_fringe: return run_decoherence_fringe(s, out);
        case Preset::fringe_decay: return run_fringe_decay(s, out);
        case Preset::clock_squeeze: return run_clock_squeeze(s, out);
        case Preset::clock_noise_budget: return run_clock_noise_budget(s, out);
        case Preset::oracle_check: return run_oracle_check(s, out);
    }
    throw std::runtime_error("unhandled preset");
}

inline int run(const RunOptions& opt, std::ostream& err = std::cerr) {
    try {
        const Preset preset = presets::preset_from_name(opt.preset);
        const RunSettings s = resolve_settings(preset, opt);
        fs::path out_dir;
        const fs::path* outp = nullptr;
        if (!opt.out_dir.empty()) {
            out_dir = opt.out_dir;
            if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !opt.force)
                throw std::runtime_error("output directory " + out_dir.string() +
                                         " is not empty (use --force)");
            fs::create_directories(out_dir);
            io::write_text(out_dir / "resolved_config.ini", config::resolve_text(s));
            outp = &out_dir;
        }
        json summary = run_preset(preset, s, outp);
        summary["schema_version"] = 1;
        summary["preset"] = opt.preset;
        summary["seed"] = s.seed;
        if (outp)
            io::write_text(out_dir / "summary.json", summary.dump(2) + "\n");
        else
            std::cout << summary.dump(2) << std::endl;
        return 0;
    } catch (const std::exception& e) {
        json jerr;
        jerr["error"] = e.what();
        err << jerr.dump() << std::endl;
        return 1;
    }
}

}  // namespace simclock::cli
