#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "simclock/analysis.hpp"
#include "simclock/engine.hpp"

namespace simclock::io {

using nlohmann::json;

// Shortest round-trip decimal. CSV consumers get full precision.
inline std::string fmt(double v) { return detail::fmt_double(v); }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

inline std::string records_csv(const std::vector<TrialRecord>& records) {
    size_t max_subs = 0;
    for (const auto& r : records) max_subs = std::max(max_subs, r.phi2_subs.size());
    std::string s =
        "cycle,experiment,kind,t_start,n_atoms_true,n_atoms_measured,phi1,phi2,"
        "phi_atom_number,latent_jz1";
    for (size_t i = 0; i < max_subs; ++i) s += ",phi2_sub_" + std::to_string(i);
    s += "\n";
    for (const auto& r : records) {
        s += std::to_string(r.cycle) + "," + std::to_string(r.experiment) + ",";
        s += (r.kind == OutcomeKind::atomic
                  ? "atomic"
                  : (r.kind == OutcomeKind::empty_reference ? "reference" : "atom_number"));
        s += "," + fmt(r.t_start) + "," + fmt(r.n_atoms_true) + "," + fmt(r.n_atoms_measured);
        s += "," + fmt(r.phi1) + "," + fmt(r.phi2) + "," + fmt(r.phi_atom_number);
        s += "," + fmt(r.latent_jz1);
        for (size_t i = 0; i < max_subs; ++i)
            s += "," + (i < r.phi2_subs.size() ? fmt(r.phi2_subs[i]) : std::string());
        s += "\n";
    }
    return s;
}

inline std::string bins_csv(const std::vector<BinStats>& bins) {
    std::string s =
        "n_atoms_mean,count,var_phi2,var_phi2_error,conditional_variance,"
        "conditional_variance_error,zeta\n";
    for (const auto& b : bins) {
        s += fmt(b.n_atoms_mean) + "," + std::to_string(b.count) + "," + fmt(b.var_phi2) + "," +
             fmt(b.var_phi2_error) + "," + fmt(b.conditional_variance) + "," +
             fmt(b.conditional_variance_error) + "," + fmt(b.zeta) + "\n";
    }
    return s;
}

inline std::string budget_csv(const std::vector<analysis::BudgetPoint>& points) {
    std::string s = "T,shot,projection,projection_conditional,classical,total,conditional_total\n";
    for (const auto& p : points) {
        s += fmt(p.T) + "," + fmt(p.shot) + "," + fmt(p.projection) + "," +
             fmt(p.projection_conditional) + "," + fmt(p.classical) + "," + fmt(p.total) + "," +
             fmt(p.conditional_total) + "\n";
    }
    return s;
}

// generic small table
inline std::string table_csv(const std::vector<std::string>& header,
                             const std::vector<std::vector<double>>& rows) {
    std::string s;
    for (size_t i = 0; i < header.size(); ++i) s += (i ? "," : "") + header[i];
    s += "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + fmt(row[i]);
        s += "\n";
    }
    return s;
}

// dB values are quoted to 0.01 dB in summaries
inline double round_db(double db) { return std::round(db * 100.0) / 100.0; }

inline json report_json(const EstimatorReport& rep) {
    json j;
    j["n_samples"] = rep.n_samples;
    j["n_atoms_mean"] = rep.n_atoms_mean;
    j["var_phi1"] = rep.var_phi1;
    j["var_phi2"] = rep.var_phi2;
    j["cov_phi12"] = rep.cov_phi12;
    j["zeta"] = rep.zeta;
    j["zeta_grid_ok"] = rep.zeta_grid_ok;
    j["conditional_variance"] = rep.conditional_variance;
    j["shot2"] = rep.shot2;
    j["projection_css"] = rep.projection_css;
    j["kappa_sq_calibrated"] = rep.kappa_sq_calibrated;
    j["kappa_sq_inferred"] = rep.kappa_sq_inferred;
    j["reduction"] = rep.reduction;
    j["reduction_db"] = round_db(analysis::to_db(rep.reduction));
    j["xi"] = rep.xi;
    j["xi_db"] = round_db(analysis::to_db(rep.xi));
    j["xi_corr"] = rep.xi_corr;
    j["xi_lin"] = rep.xi_lin;
    j["xi_lin_db"] = round_db(analysis::to_db(rep.xi_lin));
    return j;
}

}  // namespace simclock::io
