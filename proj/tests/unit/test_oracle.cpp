#include <doctest.h>

#include <cmath>

#include "simclock/oracle.hpp"

using namespace simclock;
using namespace simclock::oracle;

TEST_CASE("coherent state amplitudes and moments") {
    auto one = dicke_css(1);
    CHECK(one.amplitudes[0].real() == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(one.amplitudes[1].real() == doctest::Approx(1.0 / std::sqrt(2.0)));

    auto two = dicke_css(2);
    CHECK(two.amplitudes[0].real() == doctest::Approx(0.5));
    CHECK(two.amplitudes[1].real() == doctest::Approx(std::sqrt(2.0) / 2.0));
    CHECK(two.amplitudes[2].real() == doctest::Approx(0.5));

    auto big = dicke_css(100);
    auto [mean, cov] = dicke_moments(big);
    CHECK(mean.x == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(mean.y == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(mean.z == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cov(2, 2) == doctest::Approx(25.0).epsilon(1e-12));
    CHECK(cov(1, 1) == doctest::Approx(25.0).epsilon(1e-12));
    CHECK(norm_squared(big) == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(dicke_css(0), std::domain_error);
    CHECK_THROWS_AS(dicke_css(2001), std::domain_error);

    auto four = dicke_css(4);
    auto [m4, c4] = dicke_moments(four);
    CHECK(m4.x == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("rotations") {
    SUBCASE("full turn returns the state (integer j)") {
        auto psi = dicke_css(10);
        auto back = dicke_rotate(psi, Vec3{0.36, 0.48, 0.8}, 2.0 * M_PI);
        cplx overlap{};
        for (int k = 0; k < psi.dim(); ++k)
            overlap += std::conj(psi.amplitudes[k]) * back.amplitudes[k];
        CHECK(std::abs(overlap) == doctest::Approx(1.0).epsilon(1e-10));
    }

    SUBCASE("pi/2 about y maps the top Jz eigenstate onto +x") {
        DickeState top;
        top.n_atoms = 20;
        top.amplitudes.assign(21, cplx{});
        top.amplitudes[20] = 1.0;  // m = +j
        auto rotated = dicke_rotate(top, Vec3{0, 1, 0}, M_PI / 2);
        auto [mean, cov] = dicke_moments(rotated);
        CHECK(mean.x == doctest::Approx(10.0).epsilon(1e-10));
        CHECK(std::abs(mean.z) < 1e-10);
    }

    SUBCASE("jz eigenstate has zero var(Jz)") {
        DickeState top;
        top.n_atoms = 8;
        top.amplitudes.assign(9, cplx{});
        top.amplitudes[2] = 1.0;
        auto [mean, cov] = dicke_moments(top);
        CHECK(mean.z == doctest::Approx(-2.0));
        CHECK(cov(2, 2) == doctest::Approx(0.0));
    }

    SUBCASE("moments transform like the gaussian model for a CSS") {
        const int n = 400;
        auto psi = dicke_css(n);
        auto gauss = make_css(static_cast<double>(n));
        RandomStream rng(17);
        for (int trial = 0; trial < 4; ++trial) {
            Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
            axis = axis * (1.0 / axis.norm());
            const double angle = rng.uniform() * 2 * M_PI;
            psi = dicke_rotate(psi, axis, angle);
            gauss = rotate(gauss, axis, angle);
            auto [mean, cov] = dicke_moments(psi);
            CHECK(mean.x == doctest::Approx(gauss.mean.x).epsilon(1e-9));
            CHECK(mean.y == doctest::Approx(gauss.mean.y).epsilon(1e-9));
            CHECK(mean.z == doctest::Approx(gauss.mean.z).epsilon(1e-9));
            for (int a = 1; a < 3; ++a)
                CHECK(std::abs(cov(a, a) - gauss.cov(a, a)) < 1e-6 * n);
            CHECK(norm_squared(psi) == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("weak measurement") {
    ProbeCalibration cal;
    cal.shot_prefactor_mode = ShotPrefactor::unit;

    SUBCASE("huge shot noise leaves the state untouched") {
        auto psi = dicke_css(60);
        cal.chi = 1e-6;
        ProbePulse weak;
        weak.photons_total = 1e-6;  // shot variance 1e6
        weak.duration = 1e-5;
        RandomStream rng(3);
        auto [phi, post] = dicke_weak_measure(psi, weak, cal, rng);
        auto [m0, c0] = dicke_moments(psi);
        auto [m1, c1] = dicke_moments(post);
        CHECK(c1(2, 2) == doctest::Approx(c0(2, 2)).epsilon(1e-4));
    }

    SUBCASE("vanishing shot noise projects onto one level") {
        auto psi = dicke_css(30);
        cal.chi = 1.0;
        ProbePulse strong;
        strong.photons_total = 1e12;
        strong.duration = 1e-5;
        RandomStream rng(4);
        auto [phi, post] = dicke_weak_measure(psi, strong, cal, rng);
        auto [m1, c1] = dicke_moments(post);
        CHECK(c1(2, 2) < 1e-6);
    }

    SUBCASE("outcome variance is 4 chi^2 var(Jz) + shot") {
        const int n = 100;
        auto psi = dicke_css(n);
        const double kappa2 = 1.6;
        const double sigma2 = 1e-7;
        cal.chi = std::sqrt(kappa2 * sigma2 / n);
        ProbePulse pulse;
        pulse.photons_total = 1.0 / sigma2;
        pulse.duration = 1e-5;
        RandomStream rng(5);
        double s = 0, s2 = 0;
        const int draws = 40000;
        for (int i = 0; i < draws; ++i) {
            auto [phi, post] = dicke_weak_measure(psi, pulse, cal, rng);
            s += phi;
            s2 += phi * phi;
        }
        const double var = s2 / draws - (s / draws) * (s / draws);
        CHECK(var ==
              doctest::Approx(4 * cal.chi * cal.chi * (n / 4.0) + sigma2).epsilon(0.03));
    }

    SUBCASE("gaussian-model error shrinks as N grows") {
        const double kappa2 = 1.6;
        double prev = 1e9;
        for (int n : {100, 400, 1000}) {
            const auto css = dicke_css(n);
            const double chi = std::sqrt(kappa2 / n);
            const double gauss = (n / 4.0) / (1.0 + kappa2);
            const double exact = mean_posterior_var_jz(css, chi, 1.0);
            const double rel = std::abs(exact - gauss) / exact;
            CHECK(rel < 0.05);
            CHECK(rel < prev);
            prev = rel;
        }
    }

    SUBCASE("monte carlo and quadrature posterior variances agree") {
        const int n = 100;
        auto psi = dicke_css(n);
        const double kappa2 = 1.6;
        const double sigma2 = 1.0;
        const double chi = std::sqrt(kappa2 * sigma2 / n);
        cal.chi = chi;
        ProbePulse pulse;
        pulse.photons_total = 1.0;  // unit shot variance
        pulse.duration = 1e-5;
        RandomStream rng(6);
        double acc = 0;
        const int draws = 10000;
        for (int i = 0; i < draws; ++i) {
            auto [phi, post] = dicke_weak_measure(psi, pulse, cal, rng);
            auto [m1, c1] = dicke_moments(post);
            acc += c1(2, 2);
        }
        const double mc = acc / draws;
        const double quad = mean_posterior_var_jz(psi, chi, sigma2);
        CHECK(mc == doctest::Approx(quad).epsilon(0.02));
        // close to the gaussian prediction prior/(1+kappa^2)
        CHECK(quad == doctest::Approx((n / 4.0) / (1.0 + kappa2)).epsilon(0.05));
    }
}
