#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qregress/bath.hpp"
#include "qregress/quadrature.hpp"

using namespace qregress;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Plain midpoint-rule reference used as an independent check on the adaptive
// integrator. Deliberately naive.
double brute_pv(const std::function<double(double)>& f, double pole, double lo, double hi,
                int n) {
    // symmetric pairing about the pole inside the overlap window, plain sums outside
    const double h = std::min(pole - lo, hi - pole);
    double sum = 0.0;
    const double dx = h / n;
    for (int i = 0; i < n; ++i) {
        const double d = (i + 0.5) * dx;
        sum += (f(pole - d) - f(pole + d)) / d * dx;
    }
    auto plain = [&](double a, double b) {
        if (b <= a) return 0.0;
        const int m = 200000;
        double s = 0.0;
        const double w = (b - a) / m;
        for (int i = 0; i < m; ++i) {
            const double x = a + (i + 0.5) * w;
            s += f(x) / (pole - x) * w;
        }
        return s;
    };
    return sum + plain(lo, pole - h) + plain(pole + h, hi);
}

} // namespace

TEST_CASE("occupation closed-form values") {
    CHECK(occupation(0.0, 1.0, Statistics::fermion) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(occupation(std::log(2.0), 1.0, Statistics::fermion) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(occupation(-1.0, 1.0, Statistics::boson) ==
          doctest::Approx(1.0 / (std::exp(-1.0) - 1.0)).epsilon(1e-14));
    CHECK_THROWS_AS(occupation(0.0, 1.0, Statistics::boson), DomainError);
    CHECK_THROWS_AS(occupation(1.0, -1.0, Statistics::fermion), DomainError);
}

TEST_CASE("occupation overflow-safe branches") {
    CHECK(occupation(1000.0, 1.0, Statistics::fermion) == doctest::Approx(0.0).epsilon(1e-300));
    CHECK(std::isfinite(occupation(-1000.0, 1.0, Statistics::fermion)));
    CHECK(occupation(-1000.0, 1.0, Statistics::fermion) == doctest::Approx(1.0));
    CHECK(occupation(1000.0, 1.0, Statistics::boson) >= 0.0);
    // n(-Omega) = -(1 + n(Omega)) for bosons
    for (double w : {0.3, 1.0, 4.0, 17.0}) {
        const double n = occupation(w, 1.3, Statistics::boson);
        CHECK(occupation(-w, 1.3, Statistics::boson) == doctest::Approx(-(1.0 + n)).epsilon(1e-12));
    }
}

TEST_CASE("statistics identity 1 - eta n = e^{beta Omega} n") {
    for (Statistics st : {Statistics::fermion, Statistics::boson}) {
        const double eta = eta_of(st);
        for (double beta : {0.25, 1.0, 4.0}) {
            for (double w : {-3.0, -0.7, 0.2, 1.0, 9.0}) {
                const double n = occupation(w, beta, st);
                const double lhs = 1.0 - eta * n;
                const double rhs = std::exp(beta * w) * n;
                CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("stat_weight matches occupation and its complement") {
    for (Statistics st : {Statistics::fermion, Statistics::boson}) {
        for (double x : {-20.0, -1.0, 0.5, 3.0, 40.0}) {
            CHECK(stat_weight(x, 0.0, st) ==
                  doctest::Approx(occupation(x, 1.0, st)).epsilon(1e-13));
            const double comp = 1.0 - eta_of(st) * occupation(x, 1.0, st);
            CHECK(stat_weight(x, 1.0, st) == doctest::Approx(comp).epsilon(1e-13));
        }
    }
    // fractional a stays finite deep in both tails
    CHECK(std::isfinite(stat_weight(700.0, 0.5, Statistics::boson)));
    CHECK(std::isfinite(stat_weight(-700.0, 0.5, Statistics::fermion)));
}

TEST_CASE("spectral density shapes") {
    auto flat = SpectralDensity::flat(0.2, 50.0);
    CHECK(flat(0.0) == 0.2);
    CHECK(flat(49.9) == 0.2);
    CHECK(flat(50.1) == 0.0);

    auto rq = SpectralDensity::rational_quartic(0.1);
    CHECK(rq(0.0) == 0.0);
    CHECK(rq(1.0) == doctest::Approx(2.0 * kPi * 0.1 * 0.5).epsilon(1e-14));
    CHECK(rq(2.0) == rq(-2.0));

    auto tab = SpectralDensity::tabulated({{0.0, 0.0}, {1.0, 1.0}, {2.0, 0.0}});
    CHECK(tab(0.5) == doctest::Approx(0.5));
    CHECK(tab(1.5) == doctest::Approx(0.5));
    CHECK(tab(3.0) == 0.0);
    CHECK_THROWS_AS(SpectralDensity::tabulated({{1.0, 1.0}}), DomainError);
    CHECK_THROWS_AS(SpectralDensity::flat(-1.0, 1.0), DomainError);
}

TEST_CASE("weighted_occupation") {
    auto rq = SpectralDensity::rational_quartic(0.1);
    CHECK(weighted_occupation(rq, 0.0, 1.0, Statistics::boson) == 0.0);
    CHECK(weighted_occupation(rq, 1.0, 1.0, Statistics::boson) ==
          doctest::Approx(2.0 * kPi * 0.1 * 0.5 / (std::exp(1.0) - 1.0)).epsilon(1e-12));
    auto flat = SpectralDensity::flat(0.2, 50.0);
    CHECK(weighted_occupation(flat, 1.0, 2.0, Statistics::fermion) ==
          doctest::Approx(0.2 / (std::exp(2.0) + 1.0)).epsilon(1e-12));
    // bosonic small-Omega series continuity
    const double a = weighted_occupation(rq, 1e-5 / 1.0 - 1e-9, 1.0, Statistics::boson);
    const double b = weighted_occupation(rq, 1e-5 / 1.0 + 1e-9, 1.0, Statistics::boson);
    CHECK(a == doctest::Approx(b).epsilon(1e-6));
    // flat density touching Omega=0 is rejected for bosons
    CHECK_THROWS_AS(weighted_occupation(flat, 1.0, 1.0, Statistics::boson), DomainError);
}

TEST_CASE("integrate_adaptive basics") {
    QuadratureSpec spec;
    auto one = [](double) -> cd { return 1.0; };
    CHECK(integrate_adaptive(one, 0.0, 2.0, spec).value.real() == doctest::Approx(2.0));
    auto gauss = [](double x) -> cd { return std::exp(-x * x); };
    CHECK(integrate_adaptive(gauss, -10.0, 10.0, spec).value.real() ==
          doctest::Approx(std::sqrt(kPi)).epsilon(1e-10));
    // reversal flips sign
    CHECK(integrate_adaptive(gauss, 10.0, -10.0, spec).value.real() ==
          doctest::Approx(-std::sqrt(kPi)).epsilon(1e-10));
}

TEST_CASE("cauchy_principal_value against brute-force reference") {
    QuadratureSpec spec;
    spec.omega_max = 50.0;

    auto f = [](double w) { return 0.1 * w * w / (1.0 + w * w * w * w); };
    const double got = cauchy_principal_value(f, 1.0, spec);
    const double ref = brute_pv(f, 1.0, -50.0, 50.0, 400000);
    CHECK(got == doctest::Approx(ref).epsilon(1e-6));

    // linearity and antisymmetry in f
    auto f2 = [&](double w) { return -2.0 * f(w); };
    CHECK(cauchy_principal_value(f2, 1.0, spec) == doctest::Approx(-2.0 * got).epsilon(1e-9));

    // constant f over a symmetric window about the pole: exact zero up to tails
    QuadratureSpec sym = spec;
    auto cf = [](double) { return 1.0; };
    const double v = cauchy_principal_value(cf, 0.0, sym);
    CHECK(std::abs(v) < 1e-9);

    CHECK_THROWS_AS(cauchy_principal_value(cf, 60.0, spec), DomainError);
}

TEST_CASE("lamb_shift") {
    QuadratureSpec spec;
    CHECK(lamb_shift(SpectralDensity::zero(), 1.0, spec) == 1.0);
    CHECK(lamb_shift(SpectralDensity::flat(0.2, 50.0), 1.0, spec) == 1.0);
    auto rq = SpectralDensity::rational_quartic(0.1);
    auto f = [&](double w) { return rq(w) / (2.0 * kPi); };
    const double ref = 1.0 + brute_pv(f, 1.0, -50.0, 50.0, 400000);
    CHECK(lamb_shift(rq, 1.0, spec) == doctest::Approx(ref).epsilon(1e-6));
}

TEST_CASE("spin_boson_frequency_shift") {
    QuadratureSpec spec;
    CHECK(spin_boson_frequency_shift(SpectralDensity::zero(), 1.0, 1.0, spec) == 1.0);
    auto rq = SpectralDensity::rational_quartic(0.1);
    // beta -> infinity reduces to lamb_shift (F -> 0 for Omega>0, -J for Omega<0;
    // compare against a brute-force reference of the full expression instead)
    const double beta = 1.0;
    auto f1 = [&](double w) { return rq(w) / (2.0 * kPi); };
    auto f2 = [&](double w) { return weighted_occupation(rq, w, beta, Statistics::boson) / kPi; };
    const double ref =
        1.0 + brute_pv(f1, 1.0, -50.0, 50.0, 400000) + brute_pv(f2, 1.0, -50.0, 50.0, 400000);
    CHECK(spin_boson_frequency_shift(rq, beta, 1.0, spec) == doctest::Approx(ref).epsilon(1e-6));
}

TEST_CASE("fourier_integral Lorentzian residue oracle") {
    QuadratureSpec spec;
    spec.omega_max = 4000.0; // Lorentzian tails decay only as 1/Omega^2
    spec.abs_tol = 1e-5;
    spec.max_panels = 60000;
    const double G = 0.3, w0 = 1.1;
    auto lorentz = [&](double w) -> cd {
        const double d = w - w0;
        return G / (d * d + G * G / 4.0);
    };
    // tau = 0: unit-normalized
    CHECK(fourier_integral(lorentz, 0.0, spec).value.real() == doctest::Approx(1.0).epsilon(1e-4));
    // tau = 3: residue closed form e^{i w0 tau} e^{-G tau / 2}
    const cd got = fourier_integral(lorentz, 3.0, spec).value;
    const cd want = std::exp(cd{0.0, w0 * 3.0}) * std::exp(-G * 1.5);
    CHECK(std::abs(got - want) < 2e-4);

    auto zero = [](double) -> cd { return 0.0; };
    CHECK(std::abs(fourier_integral(zero, 1.0, spec).value) == 0.0);

    auto slow = [](double w) -> cd { return 1.0 / (1.0 + std::abs(w)); };
    QuadratureSpec tight = spec;
    tight.abs_tol = 1e-9;
    CHECK_THROWS_AS(fourier_integral(slow, 1.0, tight), DecayError);
}

TEST_CASE("fourier_integral conjugation for real g") {
    QuadratureSpec spec;
    spec.omega_max = 200.0;
    spec.abs_tol = 1e-7;
    auto g = [](double w) -> cd {
        const double d = w - 0.7;
        return 0.5 * std::exp(-w * w / 900.0) / (d * d + 0.25);
    };
    for (double tau : {0.4, 2.0, 7.3}) {
        QuadResult p = fourier_integral(g, tau, spec);
        QuadResult m = fourier_integral(g, -tau, spec);
        CHECK(std::abs(m.value - std::conj(p.value)) < 2.0 * (p.error + m.error) + 1e-12);
    }
}

TEST_CASE("quadrature refinement keeps converged results inside error bars") {
    QuadratureSpec coarse;
    coarse.omega_max = 100.0;
    coarse.abs_tol = 1e-6;
    coarse.rel_tol = 1e-6;
    QuadratureSpec fine = coarse;
    fine.rel_tol = 1e-10;
    fine.abs_tol = 1e-10;
    auto g = [](double w) -> cd {
        const double d = w - 1.0;
        return 0.2 * std::exp(-w * w / 400.0) / (d * d + 0.01);
    };
    QuadResult a = fourier_integral(g, 1.5, coarse);
    QuadResult b = fourier_integral(g, 1.5, fine);
    CHECK(std::abs(a.value - b.value) <= a.error + b.error + 1e-12);
    CHECK(b.error <= a.error + 1e-15);
}

TEST_CASE("FourierGrid matches adaptive evaluation across tau") {
    QuadratureSpec spec;
    spec.omega_max = 150.0;
    spec.abs_tol = 1e-7;
    auto g = [](double w) -> cd {
        const double d = w - 1.0;
        return 0.3 * std::exp(-w * w / 800.0) / (d * d + 0.09 / 4.0);
    };
    FourierGrid grid(g, 10.0, spec);
    for (double tau : {0.0, 0.5, 3.0, 10.0, -4.0}) {
        QuadResult a = grid.eval(tau);
        QuadResult b = fourier_integral(g, tau, spec);
        CHECK(std::abs(a.value - b.value) < 1e-6);
    }
}

TEST_CASE("FourierGrid analytic continuation inserts e^{-c Omega}") {
    QuadratureSpec spec;
    spec.omega_max = 50.0;
    spec.abs_tol = 1e-7;
    auto g = [](double w) -> cd {
        const double d = w - 1.0;
        return 0.3 * std::exp(-w * w / 64.0) / (d * d + 1.0);
    };
    const double c = 0.35;
    auto gshift = [&](double w) -> cd { return std::exp(-c * w) * g(w); };
    FourierGrid grid(g, 5.0, spec);
    FourierGrid grid2(gshift, 5.0, spec);
    for (double tau : {0.0, 1.2, 5.0}) {
        CHECK(std::abs(grid.eval_continued(tau, c).value - grid2.eval(tau).value) < 1e-6);
    }
}

TEST_CASE("QuadratureSpec validation") {
    QuadratureSpec s;
    CHECK_NOTHROW(s.validate());
    s.omega_max = -1.0;
    CHECK_THROWS_AS(s.validate(), DomainError);
    s = QuadratureSpec{};
    s.max_panels = 2;
    CHECK_THROWS_AS(s.validate(), DomainError);
    QuadratureSpec m = QuadratureSpec::for_model(1.0, 0.01);
    CHECK(m.omega_max == doctest::Approx(5000.0));
}
