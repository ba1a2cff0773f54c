#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "simclock/measurement.hpp"
#include "simclock/noise.hpp"
#include "simclock/spin_state.hpp"

namespace simclock {

// A microwave pulse is an instantaneous rotation of nominal area about the
// in-plane axis (cos phase, sin phase, 0); the stored duration only occupies
// timeline. Convention: a pulse of phase theta rotates by -area about that
// axis, so a 90-degree-phase pi/2 pulse takes the all-down state onto +x and
// three pulses (90, 0, 180 degrees) around an interrogation interval realize
// the ideal Ramsey response <Jz> = (1-eta) (N/2) sin(2 pi Delta T).
struct MwPulse {
    double area = M_PI / 2.0;  // radians, in (0, 2pi]
    double phase = 0.0;        // radians
    double duration = 7e-6;    // seconds
    double detuning = 0.0;     // Hz; metadata, pulses act as ideal rotations
};

enum class ProbeRole { first_qnd, second_qnd, atom_number, reference };

struct ProbeEvent {
    ProbePulse pulse;
    ProbeRole role = ProbeRole::first_qnd;
};

// Free evolution for the interrogation time: z-rotation by 2 pi Delta T plus
// fringe-contrast decay of the transverse mean.
struct WaitEvent {
    double duration = 0.0;  // seconds
};

struct SequenceEvent {
    double start_time = 0.0;  // seconds
    std::variant<MwPulse, ProbeEvent, WaitEvent> body;
};

struct Sequence {
    std::vector<SequenceEvent> events;
};

struct QuantizationRule {
    double time_step = 4e-9;                 // seconds
    double phase_step = 2.0 * M_PI / 65536;  // radians
};

// ---------------------------------------------------------------------------
// construction

// Sequential timeline assembly. Gaps between hardware events are dead time:
// they space timestamps (which the readout-correlation model consumes) but
// apply no evolution; interrogation intervals are explicit Wait events.
class SequenceBuilder {
  public:
    explicit SequenceBuilder(double gap = 10e-6) : gap_(gap) {}

    SequenceBuilder& mw(double area, double phase, double duration) {
        if (!(area > 0.0) || area > 2.0 * M_PI)
            throw std::domain_error("sequence: pulse area outside (0, 2pi]");
        if (!(duration > 0.0)) throw std::domain_error("sequence: non-positive duration");
        advance_gap();
        seq_.events.push_back({cursor_, MwPulse{area, phase, duration, 0.0}});
        cursor_ += duration;
        return *this;
    }

    SequenceBuilder& probe(ProbePulse pulse, ProbeRole role) {
        if (pulse.photons_total > 0.0 && !(pulse.duration > 0.0))
            throw std::domain_error("sequence: probe with photons needs duration > 0");
        advance_gap();
        pulse.timestamp = cursor_ + pulse.duration / 2.0;
        seq_.events.push_back({cursor_, ProbeEvent{pulse, role}});
        cursor_ += pulse.duration;
        return *this;
    }

    SequenceBuilder& wait(double duration) {
        if (!(duration > 0.0)) throw std::domain_error("sequence: non-positive wait");
        // interrogation starts immediately after the preceding pulse
        seq_.events.push_back({cursor_, WaitEvent{duration}});
        cursor_ += duration;
        next_gapless_ = true;  // the closing pulse follows without dead time
        return *this;
    }

    Sequence take() { return std::move(seq_); }

  private:
    void advance_gap() {
        if (!seq_.events.empty() && !next_gapless_) cursor_ += gap_;
        next_gapless_ = false;
    }

    Sequence seq_;
    double cursor_ = 0.0;
    double gap_;
    bool next_gapless_ = false;
};

// CSS preparation pulse, one QND probe, then the pulses forming the second
// measurement separated by `gap`.
inline Sequence build_squeezing_sequence(const ProbePulse& probe1,
                                         const std::vector<ProbePulse>& probe2_pulses,
                                         double gap, double mw_duration = 7e-6) {
    if (probe2_pulses.empty())
        throw std::domain_error("build_squeezing_sequence: empty second-measurement list");
    SequenceBuilder b(gap);
    b.mw(M_PI / 2.0, M_PI / 2.0, mw_duration);
    b.probe(probe1, ProbeRole::first_qnd);
    for (const auto& p : probe2_pulses) b.probe(p, ProbeRole::second_qnd);
    return b.take();
}

// Entanglement-assisted Ramsey: preparation pulse (phase 90 deg), optional
// squeezing probe, phase-converting pulse (0 deg), interrogation T, closing
// pulse (default 180 deg), readout probe(s).
inline Sequence build_ear_sequence(double T, const std::optional<ProbePulse>& probe1,
                                   const std::vector<ProbePulse>& probe2_pulses,
                                   double theta2 = M_PI, double gap = 10e-6,
                                   double mw_duration = 7e-6) {
    if (!(T > 0.0)) throw std::domain_error("build_ear_sequence: T must be > 0");
    if (probe2_pulses.empty())
        throw std::domain_error("build_ear_sequence: empty readout list");
    SequenceBuilder b(gap);
    b.mw(M_PI / 2.0, M_PI / 2.0, mw_duration);
    if (probe1) b.probe(*probe1, ProbeRole::first_qnd);
    b.mw(M_PI / 2.0, 0.0, mw_duration);
    b.wait(T);
    b.mw(M_PI / 2.0, theta2, mw_duration);
    for (const auto& p : probe2_pulses) b.probe(p, ProbeRole::second_qnd);
    return b.take();
}

inline Sequence build_ear_sequence(double T, const ProbePulse& probe1,
                                   const ProbePulse& probe2) {
    return build_ear_sequence(T, std::optional<ProbePulse>(probe1),
                              std::vector<ProbePulse>{probe2});
}

// ---------------------------------------------------------------------------
// quantization

inline double quantize_to_step(double value, double step) {
    return std::round(value / step) * step;
}

inline Sequence quantize(const Sequence& seq, const QuantizationRule& rule) {
    if (!(rule.time_step > 0.0) || !(rule.phase_step > 0.0))
        throw std::domain_error("quantize: steps must be positive");
    Sequence out = seq;
    for (auto& ev : out.events) {
        ev.start_time = quantize_to_step(ev.start_time, rule.time_step);
        if (auto* mw = std::get_if<MwPulse>(&ev.body)) {
            mw->duration = quantize_to_step(mw->duration, rule.time_step);
            mw->phase = quantize_to_step(mw->phase, rule.phase_step);
            if (mw->duration <= 0.0)
                throw std::domain_error("quantize: pulse duration rounded to zero");
        } else if (auto* pr = std::get_if<ProbeEvent>(&ev.body)) {
            pr->pulse.duration = quantize_to_step(pr->pulse.duration, rule.time_step);
            pr->pulse.timestamp = quantize_to_step(pr->pulse.timestamp, rule.time_step);
            if (pr->pulse.photons_total > 0.0 && pr->pulse.duration <= 0.0)
                throw std::domain_error("quantize: probe duration rounded to zero");
        } else if (auto* w = std::get_if<WaitEvent>(&ev.body)) {
            w->duration = quantize_to_step(w->duration, rule.time_step);
            if (w->duration <= 0.0)
                throw std::domain_error("quantize: wait duration rounded to zero");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// text serialization (one event per line, SI units)

namespace detail {
inline std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}
}  // namespace detail

inline const char* probe_role_name(ProbeRole r) {
    switch (r) {
        case ProbeRole::first_qnd: return "first_qnd";
        case ProbeRole::second_qnd: return "second_qnd";
        case ProbeRole::atom_number: return "atom_number";
        case ProbeRole::reference: return "reference";
    }
    return "?";
}

inline ProbeRole probe_role_from_name(const std::string& s) {
    if (s == "first_qnd") return ProbeRole::first_qnd;
    if (s == "second_qnd") return ProbeRole::second_qnd;
    if (s == "atom_number") return ProbeRole::atom_number;
    if (s == "reference") return ProbeRole::reference;
    throw std::runtime_error("unknown probe role: " + s);
}

inline std::string to_text(const Sequence& seq) {
    using detail::fmt_double;
    std::ostringstream os;
    for (const auto& ev : seq.events) {
        if (const auto* mw = std::get_if<MwPulse>(&ev.body)) {
            os << "mw t=" << fmt_double(ev.start_time) << " duration=" << fmt_double(mw->duration)
               << " area=" << fmt_double(mw->area) << " phase=" << fmt_double(mw->phase)
               << " detuning=" << fmt_double(mw->detuning) << "\n";
        } else if (const auto* pr = std::get_if<ProbeEvent>(&ev.body)) {
            os << "probe t=" << fmt_double(ev.start_time)
               << " duration=" << fmt_double(pr->pulse.duration)
               << " photons=" << fmt_double(pr->pulse.photons_total)
               << " role=" << probe_role_name(pr->role) << "\n";
        } else if (const auto* w = std::get_if<WaitEvent>(&ev.body)) {
            os << "wait t=" << fmt_double(ev.start_time)
               << " duration=" << fmt_double(w->duration) << "\n";
        }
    }
    return os.str();
}

inline Sequence sequence_from_text(const std::string& text) {
    Sequence seq;
    std::istringstream is(text);
    std::string line;
    auto field = [](const std::string& l, const std::string& key) -> std::string {
        const std::string pat = key + "=";
        auto pos = l.find(pat);
        if (pos == std::string::npos)
            throw std::runtime_error("sequence_from_text: missing field " + key);
        pos += pat.size();
        auto end = l.find(' ', pos);
        return l.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    };
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        SequenceEvent ev;
        ev.start_time = std::stod(field(line, "t"));
        if (line.rfind("mw", 0) == 0) {
            MwPulse mw;
            mw.duration = std::stod(field(line, "duration"));
            mw.area = std::stod(field(line, "area"));
            mw.phase = std::stod(field(line, "phase"));
            mw.detuning = std::stod(field(line, "detuning"));
            ev.body = mw;
        } else if (line.rfind("probe", 0) == 0) {
            ProbeEvent pr;
            pr.pulse.duration = std::stod(field(line, "duration"));
            pr.pulse.photons_total = std::stod(field(line, "photons"));
            pr.pulse.timestamp = ev.start_time + pr.pulse.duration / 2.0;
            pr.role = probe_role_from_name(field(line, "role"));
            ev.body = pr;
        } else if (line.rfind("wait", 0) == 0) {
            ev.body = WaitEvent{std::stod(field(line, "duration"))};
        } else {
            throw std::runtime_error("sequence_from_text: bad line: " + line);
        }
        seq.events.push_back(ev);
    }
    return seq;
}

// ---------------------------------------------------------------------------
// execution

struct SequenceRunOptions {
    bool deterministic = false;  // mean path only: no shot noise, no latent draws
    double jy_excess_factor = 10.0;
};

struct SequenceRunResult {
    std::optional<PhaseOutcome> phi1;
    std::vector<PhaseOutcome> phi2_subs;
    std::optional<PhaseOutcome> atom_number;
    SpinMoments state;        // conditioned per-trial state (Bloch picture)
    Vec3 generative_mean;     // unconditioned mean path (sets ensemble statistics)
    double latent_jz1 = 0.0;  // Jz value read by the first probe, diagnostics only
    std::vector<double> latent_jz2;
    double accumulated_phase = 0.0;  // realized Ramsey phase, diagnostics
};

// Executes a sequence against a spin sample. Probe outcomes are generated
// from the unconditioned mean path plus a stationary latent fluctuation
// process read at the probe timestamps; the conditioned state is tracked in
// parallel for per-trial predictions and never feeds back into outcomes.
inline SequenceRunResult run_sequence(const SpinMoments& initial, const Sequence& seq,
                                      const NoiseModels& noise, const ProbeCalibration& cal,
                                      const DecoherenceModel& deco, const CycleNoise& cycle,
                                      double n_atoms, RandomStream& rng,
                                      const SequenceRunOptions& opt = {}) {
    // structural check: atomic probes need a preceding preparation pulse
    bool saw_mw = false;
    std::vector<double> probe_times;
    for (const auto& ev : seq.events) {
        if (std::holds_alternative<MwPulse>(ev.body)) saw_mw = true;
        if (const auto* pr = std::get_if<ProbeEvent>(&ev.body)) {
            if ((pr->role == ProbeRole::first_qnd || pr->role == ProbeRole::second_qnd) &&
                !saw_mw)
                throw std::runtime_error("run_sequence: atomic probe before any mw pulse");
            probe_times.push_back(pr->pulse.timestamp);
        }
        if (!probe_times.empty() && probe_times.size() >= 2 &&
            probe_times.back() < probe_times[probe_times.size() - 2])
            throw std::runtime_error("run_sequence: probe timestamps not increasing");
    }

    // unit-variance latent fluctuation track at probe timestamps
    std::vector<double> latent_unit(probe_times.size(), 0.0);
    if (!opt.deterministic)
        latent_unit = latent_jz_process(1.0, probe_times, noise.correlation, rng);

    SequenceRunResult res;
    res.state = initial;
    SpinMoments gen = initial;  // unconditioned path
    size_t probe_idx = 0;
    double interrogation_elapsed = 0.0;
    double contrast_so_far = 1.0;
    const double detuning_hz = cycle.detuning + cycle.trap_shift * noise.drift.trap_light_shift_hz;

    for (const auto& ev : seq.events) {
        if (const auto* mw = std::get_if<MwPulse>(&ev.body)) {
            const Vec3 axis{std::cos(mw->phase), std::sin(mw->phase), 0.0};
            const double angle = -mw->area * cycle.pulse_area_scale;
            gen = rotate(gen, axis, angle);
            res.state = rotate(res.state, axis, angle);
        } else if (const auto* w = std::get_if<WaitEvent>(&ev.body)) {
            double phase = 2.0 * M_PI * detuning_hz * w->duration;
            if (!opt.deterministic && noise.detuning.mw_phase_jitter_std > 0.0)
                phase += rng.normal(0.0, noise.detuning.mw_phase_jitter_std);
            res.accumulated_phase += phase;
            const Vec3 zhat{0.0, 0.0, 1.0};
            gen = rotate(gen, zhat, phase);
            res.state = rotate(res.state, zhat, phase);
            // inhomogeneous dephasing depends on total interrogation time,
            // so contrast composes through the ratio of h values
            interrogation_elapsed += w->duration;
            const double h_new = fringe_contrast(interrogation_elapsed, noise.contrast);
            const double ratio = (contrast_so_far > 0.0) ? h_new / contrast_so_far : 0.0;
            contrast_so_far = h_new;
            gen.mean.x *= ratio;
            gen.mean.y *= ratio;
            res.state.mean.x *= ratio;
            res.state.mean.y *= ratio;
        } else if (const auto* pr = std::get_if<ProbeEvent>(&ev.body)) {
            const ProbePulse& pulse = pr->pulse;
            if (pr->role == ProbeRole::atom_number) {
                if (opt.deterministic) {
                    PhaseOutcome o;
                    o.phi = cal.chi * cal.chi_bar_ratio * n_atoms;
                    o.pulse = pulse;
                    o.kind = OutcomeKind::atom_number;
                    res.atom_number = o;
                } else {
                    res.atom_number = measure_atom_number(n_atoms, pulse, cal, rng);
                }
                ++probe_idx;
                continue;
            }
            // atomic probe: unconditioned mean plus latent fluctuation scaled
            // to the current Jz variance
            const double sigma_z = std::sqrt(std::max(0.0, gen.var_jz()));
            const double fluct = latent_unit[probe_idx] * sigma_z;
            const double jz_read = gen.mean.z + fluct;
            double dchi = 0.0;
            if (!opt.deterministic) {
                if (cal.delta_chi_per_cycle)
                    dchi = cycle.delta_chi;
                else if (cal.var_delta_chi > 0.0)
                    dchi = rng.normal(0.0, std::sqrt(cal.var_delta_chi));
            }
            PhaseOutcome o;
            if (opt.deterministic) {
                o.phi = cal.chi * 2.0 * jz_read + dchi * n_atoms;
                o.pulse = pulse;
                o.kind = OutcomeKind::atomic;
            } else {
                o = sample_outcome(jz_read, n_atoms, pulse, cal, dchi, rng);
            }
            o.phi += cycle.phi_offset;
            if (pr->role == ProbeRole::first_qnd) {
                res.phi1 = o;
                res.latent_jz1 = jz_read;
            } else {
                res.phi2_subs.push_back(o);
                res.latent_jz2.push_back(jz_read);
            }
            // probe backaction on the tracked state, then scattering contrast;
            // a zero-variance readout quadrature carries nothing to condition
            if (res.state.var_jz() > 0.0)
                res.state = condition(res.state, o, pulse, cal, opt.jy_excess_factor);
            // scattering destroys coherence but conserves the population
            // difference: only the transverse mean shortens, Jz passes through
            const double keep = 1.0 - decoherence_eta(pulse.photons_total, deco);
            gen.mean.x *= keep;
            gen.mean.y *= keep;
            res.state.mean.x *= keep;
            res.state.mean.y *= keep;
            ++probe_idx;
        }
    }
    res.generative_mean = gen.mean;
    return res;
}

}  // namespace simclock
