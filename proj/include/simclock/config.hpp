#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace simclock::config {

// All tunables of a run, flat with dotted key names. Values with physical
// units must carry a unit suffix in files and overrides; this catches the
// classic seconds-vs-microseconds slip at parse time.
struct RunSettings {
    // campaign
    long cycles = 1200;
    long experiments_per_cycle = 4;
    long reference_shots = 3;
    double cycle_time = 5.0;  // s
    long workers = 1;
    uint64_t seed = 1;

    // atoms
    double n0_mean = 1.2e5;
    double n0_rel_std = 0.1;
    double retention = 1.0;

    // probes
    double photons1 = 6e6;
    double photons2_pulse = 6e6;
    long pulses2 = 2;
    double probe_duration = 10e-6;  // s
    double gap = 10e-6;             // s
    double photons_atom_number = 6e6;

    // calibration
    double chi = 1.4907119849998597e-06;
    double chi_bar_ratio = 1.0;
    double beta = 3.605551275463989;  // sqrt(13)
    double delta_chi_std = 0.0;
    bool delta_chi_per_cycle = false;
    std::string shot_prefactor = "unit";  // unit | eq5

    // decoherence
    double alpha = 0.0;

    // noise
    double detuning_mean = 0.0;  // Hz
    double detuning_std = 0.0;   // Hz
    double mw_phase_jitter = 0.0;  // rad
    bool correlation_decay = false;
    double tau_decay = 670e-6;  // s
    std::string contrast = "parametric";  // parametric | table
    double tau_inh = 248e-6;              // s
    std::string contrast_table;           // path, table mode
    double pulse_area_drift_std = 0.0;
    double trap_intensity_drift_std = 0.0;
    double drift_correlation_time = 100.0;  // s
    double trap_light_shift = -1700.0;      // Hz per fractional intensity
    double phi_drift_per_cycle = 0.0;       // rad

    // sequence
    double interrogation_time = 10e-6;  // s
    double mw_duration = 7e-6;          // s
    double theta2 = M_PI;               // rad
    bool quantize = true;
    double time_step = 4e-9;                   // s
    double phase_step = 2.0 * M_PI / 65536.0;  // rad

    // scans
    double scan_t_min = 10e-6;   // s
    double scan_t_max = 310e-6;  // s
    double scan_t_step = 20e-6;  // s
    long theta_points = 24;
    long trials_per_point = 200;
    double qnd_photons = 5.9e6;
    std::string t_list;  // comma-separated durations for fringe-decay
    std::string oracle_n = "100,400";
    std::string oracle_kappa_sq = "0.5,1.6,4";

    // output
    bool emit_records = true;
    bool subtract_reference = false;
};

enum class KeyKind { integer, real, duration, frequency, angle, boolean, text };

namespace detail {

inline double parse_with_units(const std::string& raw, KeyKind kind, const std::string& key) {
    static const std::vector<std::pair<std::string, double>> duration_units = {
        {"ns", 1e-9}, {"us", 1e-6}, {"ms", 1e-3}, {"s", 1.0}};
    static const std::vector<std::pair<std::string, double>> frequency_units = {
        {"GHz", 1e9}, {"MHz", 1e6}, {"kHz", 1e3}, {"Hz", 1.0}};
    static const std::vector<std::pair<std::string, double>> angle_units = {
        {"deg", M_PI / 180.0}, {"rad", 1.0}};

    const std::vector<std::pair<std::string, double>>* units = nullptr;
    const char* what = "";
    switch (kind) {
        case KeyKind::duration: units = &duration_units; what = "duration (ns/us/ms/s)"; break;
        case KeyKind::frequency: units = &frequency_units; what = "frequency (Hz/kHz/MHz/GHz)"; break;
        case KeyKind::angle: units = &angle_units; what = "angle (rad/deg)"; break;
        default: break;
    }
    if (!units) {
        size_t pos = 0;
        const double v = std::stod(raw, &pos);
        if (pos != raw.size())
            throw std::runtime_error("config: trailing characters in value of '" + key + "'");
        return v;
    }
    for (const auto& [suffix, scale] : *units) {
        if (raw.size() > suffix.size() &&
            raw.compare(raw.size() - suffix.size(), suffix.size(), suffix) == 0) {
            const std::string num = raw.substr(0, raw.size() - suffix.size());
            size_t pos = 0;
            const double v = std::stod(num, &pos);
            if (pos != num.size())
                throw std::runtime_error("config: bad number in value of '" + key + "'");
            return v * scale;
        }
    }
    throw std::runtime_error("config: value of '" + key + "' needs a " + std::string(what) +
                             " unit suffix, got '" + raw + "'");
}

inline bool parse_bool(const std::string& raw, const std::string& key) {
    if (raw == "true" || raw == "on" || raw == "1") return true;
    if (raw == "false" || raw == "off" || raw == "0") return false;
    throw std::runtime_error("config: value of '" + key + "' must be a boolean");
}

}  // namespace detail

struct KeySpec {
    KeyKind kind;
    std::function<void(RunSettings&, const std::string&)> set;
    std::function<std::string(const RunSettings&)> get;
};

inline const std::map<std::string, KeySpec>& key_registry() {
    static const std::map<std::string, KeySpec> reg = [] {
        std::map<std::string, KeySpec> r;
        auto fmt = [](double v) {
            std::ostringstream os;
            os.precision(17);
            os << v;
            return os.str();
        };
        auto add_int = [&](const std::string& k, long RunSettings::* f) {
            r[k] = {KeyKind::integer,
                    [f, k](RunSettings& s, const std::string& v) {
                        s.*f = std::stol(v);
                    },
                    [f](const RunSettings& s) { return std::to_string(s.*f); }};
        };
        auto add_real = [&](const std::string& k, double RunSettings::* f) {
            r[k] = {KeyKind::real,
                    [f, k](RunSettings& s, const std::string& v) {
                        s.*f = detail::parse_with_units(v, KeyKind::real, k);
                    },
                    [f, fmt](const RunSettings& s) { return fmt(s.*f); }};
        };
        auto add_unit = [&](const std::string& k, double RunSettings::* f, KeyKind kind,
                            const char* suffix) {
            r[k] = {kind,
                    [f, k, kind](RunSettings& s, const std::string& v) {
                        s.*f = detail::parse_with_units(v, kind, k);
                    },
                    [f, fmt, suffix](const RunSettings& s) { return fmt(s.*f) + suffix; }};
        };
        auto add_bool = [&](const std::string& k, bool RunSettings::* f) {
            r[k] = {KeyKind::boolean,
                    [f, k](RunSettings& s, const std::string& v) {
                        s.*f = detail::parse_bool(v, k);
                    },
                    [f](const RunSettings& s) { return (s.*f) ? "true" : "false"; }};
        };
        auto add_text = [&](const std::string& k, std::string RunSettings::* f) {
            r[k] = {KeyKind::text,
                    [f](RunSettings& s, const std::string& v) { s.*f = v; },
                    [f](const RunSettings& s) { return s.*f; }};
        };

        add_int("campaign.cycles", &RunSettings::cycles);
        add_int("campaign.experiments_per_cycle", &RunSettings::experiments_per_cycle);
        add_int("campaign.reference_shots", &RunSettings::reference_shots);
        add_unit("campaign.cycle_time", &RunSettings::cycle_time, KeyKind::duration, "s");
        add_int("campaign.workers", &RunSettings::workers);
        r["campaign.seed"] = {KeyKind::integer,
                              [](RunSettings& s, const std::string& v) {
                                  s.seed = std::stoull(v);
                              },
                              [](const RunSettings& s) { return std::to_string(s.seed); }};

        add_real("atoms.n0_mean", &RunSettings::n0_mean);
        add_real("atoms.n0_rel_std", &RunSettings::n0_rel_std);
        add_real("atoms.retention", &RunSettings::retention);

        add_real("probe.photons1", &RunSettings::photons1);
        add_real("probe.photons2_pulse", &RunSettings::photons2_pulse);
        add_int("probe.pulses2", &RunSettings::pulses2);
        add_unit("probe.duration", &RunSettings::probe_duration, KeyKind::duration, "s");
        add_unit("probe.gap", &RunSettings::gap, KeyKind::duration, "s");
        add_real("probe.photons_atom_number", &RunSettings::photons_atom_number);

        add_real("cal.chi", &RunSettings::chi);
        add_real("cal.chi_bar_ratio", &RunSettings::chi_bar_ratio);
        add_real("cal.beta", &RunSettings::beta);
        add_real("cal.delta_chi_std", &RunSettings::delta_chi_std);
        add_bool("cal.delta_chi_per_cycle", &RunSettings::delta_chi_per_cycle);
        add_text("cal.shot_prefactor", &RunSettings::shot_prefactor);

        add_real("decoherence.alpha", &RunSettings::alpha);

        add_unit("noise.detuning_mean", &RunSettings::detuning_mean, KeyKind::frequency, "Hz");
        add_unit("noise.detuning_std", &RunSettings::detuning_std, KeyKind::frequency, "Hz");
        add_unit("noise.mw_phase_jitter", &RunSettings::mw_phase_jitter, KeyKind::angle, "rad");
        add_bool("noise.correlation_decay", &RunSettings::correlation_decay);
        add_unit("noise.tau_decay", &RunSettings::tau_decay, KeyKind::duration, "s");
        add_text("noise.contrast", &RunSettings::contrast);
        add_unit("noise.tau_inh", &RunSettings::tau_inh, KeyKind::duration, "s");
        add_text("noise.contrast_table", &RunSettings::contrast_table);
        add_real("noise.pulse_area_drift_std", &RunSettings::pulse_area_drift_std);
        add_real("noise.trap_intensity_drift_std", &RunSettings::trap_intensity_drift_std);
        add_unit("noise.drift_correlation_time", &RunSettings::drift_correlation_time,
                 KeyKind::duration, "s");
        add_unit("noise.trap_light_shift", &RunSettings::trap_light_shift, KeyKind::frequency,
                 "Hz");
        add_unit("noise.phi_drift_per_cycle", &RunSettings::phi_drift_per_cycle, KeyKind::angle,
                 "rad");

        add_unit("sequence.interrogation_time", &RunSettings::interrogation_time,
                 KeyKind::duration, "s");
        add_unit("sequence.mw_duration", &RunSettings::mw_duration, KeyKind::duration, "s");
        add_unit("sequence.theta2", &RunSettings::theta2, KeyKind::angle, "rad");
        add_bool("sequence.quantize", &RunSettings::quantize);
        add_unit("sequence.time_step", &RunSettings::time_step, KeyKind::duration, "s");
        add_unit("sequence.phase_step", &RunSettings::phase_step, KeyKind::angle, "rad");

        add_unit("scan.t_min", &RunSettings::scan_t_min, KeyKind::duration, "s");
        add_unit("scan.t_max", &RunSettings::scan_t_max, KeyKind::duration, "s");
        add_unit("scan.t_step", &RunSettings::scan_t_step, KeyKind::duration, "s");
        add_int("scan.theta_points", &RunSettings::theta_points);
        add_int("scan.trials_per_point", &RunSettings::trials_per_point);
        add_real("scan.qnd_photons", &RunSettings::qnd_photons);
        add_text("scan.t_list", &RunSettings::t_list);
        add_text("scan.oracle_n", &RunSettings::oracle_n);
        add_text("scan.oracle_kappa_sq", &RunSettings::oracle_kappa_sq);

        add_bool("output.emit_records", &RunSettings::emit_records);
        add_bool("output.subtract_reference", &RunSettings::subtract_reference);
        return r;
    }();
    return reg;
}

inline void set_key(RunSettings& s, const std::string& key, const std::string& value) {
    const auto& reg = key_registry();
    auto it = reg.find(key);
    if (it == reg.end()) throw std::runtime_error("config: unknown key '" + key + "'");
    it->second.set(s, value);
}

namespace detail {
inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}
}  // namespace detail

// INI-style: [section] headers prefix the keys of following lines.
inline void apply_config_text(RunSettings& s, const std::string& text) {
    std::istringstream in(text);
    std::string line, section;
    while (std::getline(in, line)) {
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: expected key = value, got '" + line + "'");
        std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
        set_key(s, key, value);
    }
}

inline void apply_config_file(RunSettings& s, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot read file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    apply_config_text(s, buf.str());
}

// key=value pairs from --set
inline void apply_override(RunSettings& s, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
        throw std::runtime_error("config: override must be key=value, got '" + kv + "'");
    set_key(s, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
}

// Canonical echo of every key; the output is itself a loadable config.
inline std::string resolve_text(const RunSettings& s) {
    std::string out = "# resolved configuration (canonical units)\n";
    for (const auto& [key, spec] : key_registry()) out += key + " = " + spec.get(s) + "\n";
    return out;
}

inline std::vector<double> parse_list(const std::string& csv, KeyKind kind,
                                      const std::string& key) {
    std::vector<double> out;
    std::istringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = detail::trim(item);
        if (!item.empty()) out.push_back(detail::parse_with_units(item, kind, key));
    }
    return out;
}

}  // namespace simclock::config
