#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qregress/analysis.hpp"

using namespace qregress;

namespace {

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = a + (b - a) * i / (n - 1);
    return g;
}

QuadratureSpec band_quad() {
    QuadratureSpec q;
    q.omega_max = 20.0;
    return q;
}

BFParams flat_fermion() {
    return {1.0, 2.0, Statistics::fermion, SpectralDensity::flat(0.2, 10.0), band_quad()};
}

BFParams rq_boson(double delta) {
    QuadratureSpec q;
    q.omega_max = 200.0; // rational-quartic tails cross abs_tol around 150
    return {1.0, 1.0, Statistics::boson, SpectralDensity::rational_quartic(delta), q};
}

BFParams band_boson() {
    return {1.0, 1.0, Statistics::boson,
            SpectralDensity::tabulated({{0.2, 0.0}, {0.9, 0.15}, {3.0, 0.0}}), band_quad()};
}

} // namespace

TEST_CASE("zero shift reproduces the plain correlators") {
    BFParams p = flat_fermion();
    std::vector<double> tau = {0.0, 0.7, 2.5};
    Correlator mq = mqrt_two_point_eq(p, TwoPointKind::a_dag_a, tau);
    Correlator sq = sqrt_two_point_eq(p, TwoPointKind::a_dag_a, tau);
    Correlator nn = mqrt_nn_eq(p, tau);
    for (std::size_t i = 0; i < tau.size(); ++i) {
        CHECK(std::abs(analytic_continuation_eval(p, Method::mqrt, TwoPointKind::a_dag_a, tau[i],
                                                  0.0) -
                       mq.values[i]) < 1e-8);
        CHECK(std::abs(analytic_continuation_eval(p, Method::sqrt, TwoPointKind::a_dag_a, tau[i],
                                                  0.0) -
                       sq.values[i]) < 1e-8);
        CHECK(std::abs(analytic_continuation_nn(p, Method::mqrt, tau[i], 0.0) - nn.values[i]) <
              1e-7);
    }
}

TEST_CASE("one thermal shift maps the pair onto each other") {
    BFParams p = flat_fermion();
    std::vector<double> tau = {0.0, 1.3, 4.0};
    Correlator mq = mqrt_two_point_eq(p, TwoPointKind::a_dag_a, tau);
    for (std::size_t i = 0; i < tau.size(); ++i) {
        const cd cont =
            analytic_continuation_eval(p, Method::mqrt, TwoPointKind::a_a_dag, tau[i], 1.0);
        CHECK(std::abs(cont - mq.values[i]) < 1e-8);
    }
}

TEST_CASE("shift exponents add") {
    BFParams p = flat_fermion();
    for (double tau : {0.0, 0.9, 2.2}) {
        // shifting a_a_dag twice lands on the same integrand as shifting the
        // already-shifted (= a_dag_a) form once
        const cd twice =
            analytic_continuation_eval(p, Method::mqrt, TwoPointKind::a_a_dag, tau, 2.0);
        const cd once =
            analytic_continuation_eval(p, Method::mqrt, TwoPointKind::a_dag_a, tau, 1.0);
        CHECK(std::abs(twice - once) <= 1e-12 * std::abs(once));
    }
}

TEST_CASE("two-point KMS residuals separate the methods") {
    BFParams p = flat_fermion();
    std::vector<double> tau = linspace(0.0, 10.0, 101);
    KMSReport mq = kms_residual(p, Method::mqrt, KMSPair::a_pair, tau);
    KMSReport ex = kms_residual(p, Method::exact, KMSPair::a_pair, tau);
    KMSReport sq = kms_residual(p, Method::sqrt, KMSPair::a_pair, tau);
    CHECK(mq.residual <= 10.0 * p.quad.rel_tol);
    CHECK(ex.residual <= 10.0 * p.quad.rel_tol);
    CHECK(sq.residual > 0.01);
    CHECK(mq.residual <= sq.residual);
    CHECK(mq.method == "mqrt");
    CHECK(sq.pair == "a_dag_a/a_a_dag");
    CHECK(mq.beta == doctest::Approx(2.0));
    CHECK(mq.tau_digest == sq.tau_digest);
}

TEST_CASE("number-correlator KMS holds for mqrt and fails for sqrt") {
    BFParams p = rq_boson(0.1); // gamma = pi delta = 0.1 pi
    std::vector<double> tau = linspace(0.0, 10.0, 101);
    KMSReport mq = kms_residual(p, Method::mqrt, KMSPair::nn_pair, tau);
    KMSReport sq = kms_residual(p, Method::sqrt, KMSPair::nn_pair, tau);
    CHECK(mq.residual <= 10.0 * p.quad.rel_tol);
    CHECK(sq.residual >= 100.0 * std::max(mq.residual, 1e-12));
    CHECK_THROWS_AS(kms_residual(p, Method::exact, KMSPair::nn_pair, tau),
                    UnsupportedContinuation);
}

TEST_CASE("nn continuation agrees with the residual identity") {
    BFParams p = rq_boson(0.1);
    std::vector<double> tau = {0.5, 2.0};
    Correlator nn = mqrt_nn_eq(p, tau);
    for (std::size_t i = 0; i < tau.size(); ++i) {
        const cd cont = analytic_continuation_nn(p, Method::mqrt, -tau[i], -1.0);
        CHECK(std::abs(cont - nn.values[i]) < 1e-6);
    }
}

TEST_CASE("spin-boson KMS residuals") {
    QuadratureSpec q;
    q.omega_max = 200.0;
    SBParams p{1.0, 2.0, SpectralDensity::rational_quartic(0.1), q};
    std::vector<double> tau = linspace(0.0, 8.0, 81);
    KMSReport mq = kms_residual(p, Method::mqrt, tau);
    KMSReport sq = kms_residual(p, Method::sqrt, tau);
    CHECK(mq.residual <= 10.0 * q.rel_tol);
    CHECK(sq.residual > 100.0 * std::max(mq.residual, 1e-12));
    CHECK(mq.pair == "plus_minus/minus_plus");
    CHECK_THROWS_AS(kms_residual(p, Method::exact, tau), UnsupportedContinuation);
}

TEST_CASE("all four three-point relations hold") {
    BFParams p = band_boson();
    std::vector<double> g1 = linspace(0.0, 3.0, 5);
    std::vector<double> g2 = linspace(0.0, 2.0, 5);
    auto reports = three_point_kms_check(p, g1, g2);
    REQUIRE(reports.size() == 4);
    for (const auto& rep : reports) {
        CHECK(rep.residual <= 10.0 * p.quad.rel_tol);
        CHECK(rep.method == "mqrt");
        CHECK(rep.beta == doctest::Approx(1.0));
    }
    CHECK(reports[0].pair == "three_point_relation_1");
}

TEST_CASE("deviation metric axioms") {
    std::vector<double> tau = linspace(0.0, 2.0, 21);
    Correlator a, b;
    a.tau = b.tau = tau;
    for (double t : tau) {
        a.values.push_back(cd{std::cos(t), std::sin(t)});
        b.values.push_back(cd{std::cos(t) + 0.3, std::sin(t)});
    }
    a.err.assign(tau.size(), 0.0);
    b.err = a.err;

    CHECK(deviation_metric(a, a, 2.0) == 0.0);
    CHECK(deviation_metric(a, b, 2.0) == doctest::Approx(0.3));
    CHECK(deviation_metric(a, b, 2.0) == doctest::Approx(deviation_metric(b, a, 2.0)));

    Correlator c = a;
    for (auto& v : c.values) v += cd{0.1, -0.2};
    const double dab = deviation_metric(a, b, 2.0);
    const double dbc = deviation_metric(b, c, 2.0);
    const double dac = deviation_metric(a, c, 2.0);
    CHECK(dac <= dab + dbc + 1e-12);

    Correlator shifted = b;
    shifted.tau[3] += 1e-6;
    CHECK_THROWS_AS(deviation_metric(a, shifted, 2.0), GridMismatch);
    CHECK_THROWS_AS(deviation_metric(a, b, 5.0), GridMismatch);
}

TEST_CASE("sweep emits row-major cells with the mqrt advantage") {
    std::vector<double> T = {1.0, 2.0};
    std::vector<double> delta = {0.1, 0.2};
    SweepTable table = sweep_d(Statistics::fermion, T, delta, sweep_quadrature(), 201);
    REQUIRE(table.rows.size() == 4);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const SweepRow& row = table.rows[i];
        CHECK(row.T == T[i / 2]);
        CHECK(row.delta == delta[i % 2]);
        CHECK(row.tau_f == doctest::Approx(1.0 / row.delta));
        CHECK(row.error.empty());
        CHECK(std::isfinite(row.D_mqrt));
        CHECK(row.D_mqrt > 0.0);
        CHECK(row.D_mqrt <= row.D_sqrt);
    }
}

TEST_CASE("default sweep grids") {
    auto T = default_temperature_grid();
    auto d = default_delta_grid();
    REQUIRE(T.size() == 8);
    REQUIRE(d.size() == 8);
    CHECK(T.front() == doctest::Approx(0.5));
    CHECK(T.back() == doctest::Approx(4.0));
    CHECK(d.front() == doctest::Approx(0.02));
    CHECK(d.back() == doctest::Approx(0.2));
}
