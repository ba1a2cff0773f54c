#include <doctest.h>

#include <cmath>

#include "simclock/config.hpp"
#include "simclock/presets.hpp"

using namespace simclock;
using config::RunSettings;

TEST_CASE("unit suffixes are required and honored") {
    RunSettings s;
    config::set_key(s, "sequence.interrogation_time", "10us");
    CHECK(s.interrogation_time == doctest::Approx(10e-6));
    config::set_key(s, "sequence.interrogation_time", "4ns");
    CHECK(s.interrogation_time == doctest::Approx(4e-9));
    config::set_key(s, "noise.detuning_std", "7.5Hz");
    CHECK(s.detuning_std == doctest::Approx(7.5));
    config::set_key(s, "sequence.theta2", "180deg");
    CHECK(s.theta2 == doctest::Approx(M_PI));

    CHECK_THROWS_WITH_AS(config::set_key(s, "sequence.interrogation_time", "10"),
                         doctest::Contains("unit suffix"), std::runtime_error);
    CHECK_THROWS_AS(config::set_key(s, "noise.detuning_std", "7.5"), std::runtime_error);
}

TEST_CASE("unknown keys are hard errors naming the key") {
    RunSettings s;
    CHECK_THROWS_WITH_AS(config::set_key(s, "campain.cycles", "10"),
                         doctest::Contains("campain.cycles"), std::runtime_error);
}

TEST_CASE("config text with sections and layering") {
    RunSettings s;
    config::apply_config_text(s,
                              "[campaign]\n"
                              "cycles = 77\n"
                              "# a comment\n"
                              "[noise]\n"
                              "detuning_std = 3Hz\n");
    CHECK(s.cycles == 77);
    CHECK(s.detuning_std == doctest::Approx(3.0));

    // later overrides win
    config::apply_override(s, "campaign.cycles=10");
    CHECK(s.cycles == 10);

    CHECK_THROWS_AS(config::apply_override(s, "campaign.cycles"), std::runtime_error);
}

TEST_CASE("resolved config echo is itself loadable and stable") {
    auto s = presets::defaults(presets::Preset::clock_squeeze);
    const auto text = config::resolve_text(s);
    RunSettings t;
    config::apply_config_text(t, text);
    CHECK(config::resolve_text(t) == text);
    CHECK(t.chi == s.chi);
    CHECK(t.interrogation_time == s.interrogation_time);
    CHECK(t.mw_phase_jitter == s.mw_phase_jitter);
}

TEST_CASE("preset defaults carry the published run parameters") {
    auto s = presets::defaults(presets::Preset::squeeze_scan);
    CHECK(s.cycles == 1200);
    CHECK(s.experiments_per_cycle == 4);
    CHECK(s.photons1 == doctest::Approx(6e6));
    CHECK(s.probe_duration == doctest::Approx(10e-6));
    CHECK(s.n0_mean == doctest::Approx(1.2e5));
    // eta(photons1) = 14%
    CHECK(1.0 - std::exp(-s.alpha * s.photons1) == doctest::Approx(0.14).epsilon(1e-9));
    // kappa^2(chi, N, n1) = 1.6
    CHECK(s.chi * s.chi * 1.2e5 * 6e6 == doctest::Approx(1.6).epsilon(1e-9));

    auto c = presets::defaults(presets::Preset::clock_squeeze);
    CHECK(c.n0_mean == doctest::Approx(9e4));
    CHECK(c.interrogation_time == doctest::Approx(10e-6));
    CHECK(1.0 - std::exp(-c.alpha * c.photons1) == doctest::Approx(0.135).epsilon(1e-9));
    CHECK(c.chi * c.chi * 9e4 * 7.1e6 == doctest::Approx(1.22).epsilon(1e-9));

    auto b = presets::defaults(presets::Preset::clock_noise_budget);
    CHECK(b.detuning_std == doctest::Approx(7.5));
    CHECK(b.pulses2 == 4);
}

TEST_CASE("duration lists") {
    auto xs = config::parse_list("10us, 60us,110us", config::KeyKind::duration, "scan.t_list");
    REQUIRE(xs.size() == 3);
    CHECK(xs[0] == doctest::Approx(10e-6));
    CHECK(xs[2] == doctest::Approx(110e-6));
}
