#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "qregress/engine.hpp"

using namespace qregress;

namespace {

Matrix ladder(int d) {
    Matrix a = Matrix::Zero(d, d);
    for (int n = 0; n + 1 < d; ++n) a(n, n + 1) = std::sqrt(n + 1.0);
    return a;
}

Matrix number_op(int d) {
    Matrix N = Matrix::Zero(d, d);
    for (int n = 0; n < d; ++n) N(n, n) = n;
    return N;
}

Matrix thermal_state(const Matrix& H, double beta) {
    Matrix rho = (-beta * H).exp();
    return rho / rho.trace();
}

Matrix random_hermitian(int d, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> nd;
    Matrix X(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) X(i, j) = cd{nd(rng), nd(rng)};
    return (X + X.adjoint()).eval() / 2.0;
}

Matrix random_matrix(int d, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> nd;
    Matrix X(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) X(i, j) = cd{nd(rng), nd(rng)};
    return X;
}

QuadratureSpec engine_quad() {
    QuadratureSpec q;
    q.omega_max = 200.0;
    q.max_panels = 60000;
    q.rel_tol = 1e-7;
    return q;
}

SystemSpec spin_boson_spec(double delta = 0.05, double beta = 1.0) {
    SystemSpec s{Matrix(), Matrix(), SpectralDensity::rational_quartic(delta), beta,
                 engine_quad(), ""};
    s.H = Matrix::Zero(2, 2);
    s.H(0, 0) = -0.5;
    s.H(1, 1) = 0.5;
    s.S = Matrix::Zero(2, 2);
    s.S(0, 1) = 1.0; // sigma_minus in the {ground, excited} basis
    return s;
}

SystemSpec boson_spec(int d, double delta, double beta) {
    SystemSpec s{Matrix(), Matrix(), SpectralDensity::rational_quartic(delta), beta,
                 engine_quad(), "truncated oscillator"};
    s.H = number_op(d);
    s.S = ladder(d);
    return s;
}

SpectralDensity positive_band() {
    return SpectralDensity::tabulated({{0.2, 0.0}, {1.0, 0.15}, {3.0, 0.0}});
}

} // namespace

TEST_CASE("bohr_decompose basics") {
    Matrix H = random_hermitian(3, 11);
    BohrDecomposition id = bohr_decompose(H, Matrix::Identity(3, 3));
    CHECK(id.components.size() == 1);
    CHECK(id.components[0].omega == doctest::Approx(0.0));

    SystemSpec sb = spin_boson_spec();
    BohrDecomposition lower = bohr_decompose(sb.H, sb.S);
    REQUIRE(lower.components.size() == 1);
    CHECK(lower.components[0].omega == doctest::Approx(1.0));
}

TEST_CASE("bohr_decompose reconstruction and exponential identity") {
    Matrix H = random_hermitian(3, 21);
    Matrix X = random_matrix(3, 22);
    BohrDecomposition dec = bohr_decompose(H, X);
    CHECK((dec.reconstruct() - X).norm() < 1e-10);
    for (double t : {0.3, 1.7}) {
        const Matrix lhs =
            ((cd{0.0, -1.0} * t) * H).exp() * X * ((cd{0.0, 1.0} * t) * H).exp();
        Matrix rhs = Matrix::Zero(3, 3);
        for (const auto& c : dec.components) rhs += std::exp(cd{0.0, c.omega * t}) * c.X;
        CHECK((lhs - rhs).norm() < 1e-10);
    }
}

TEST_CASE("zero-coupling generator is purely Hamiltonian") {
    SystemSpec s = spin_boson_spec();
    s.J = SpectralDensity::zero();
    AdjointGenerator gen = build_adjoint_generator(s);
    for (int i = 0; i < gen.eigvals.size(); ++i) CHECK(std::abs(gen.eigvals(i).real()) < 1e-12);
    // identity is a fixed point, sigma_+ rotates with a pure phase
    Matrix I2 = Matrix::Identity(2, 2);
    CHECK((evolve_one_point(gen, I2, 2.3) - I2).norm() < 1e-10);
}

TEST_CASE("spin-boson one-point rate matches the closed form") {
    SystemSpec s = spin_boson_spec();
    AdjointGenerator gen = build_adjoint_generator(s);
    SBParams p{1.0, s.beta, s.J, s.quad};
    const ComplexRate g = sb_complex_rate(p);

    const Matrix sp = s.S.adjoint();
    const Matrix evolved = evolve_one_point(gen, sp, 1.0);
    const Matrix want = std::exp(-g.value) * sp;
    CHECK((evolved - want).norm() < 1e-8);
}

TEST_CASE("truncated boson one-point rate matches the closed form") {
    SystemSpec s = boson_spec(14, 0.1, 2.0);
    AdjointGenerator gen = build_adjoint_generator(s);
    BFParams p{1.0, s.beta, Statistics::boson, s.J, s.quad};
    const ComplexRate g = complex_rate(p);
    const Matrix a = s.S;
    const Matrix evolved = evolve_one_point(gen, a, 1.0);
    const Matrix want = std::exp(-std::conj(g.value)) * a;
    // truncation leakage enters at the Fock edge and decays fast toward n = 0
    CHECK((evolved - want).topLeftCorner(5, 5).norm() < 1e-10);
    CHECK(std::abs(evolved(9, 10) - want(9, 10)) > 1e-6);
}

TEST_CASE("identity fixed point and Hermiticity preservation") {
    SystemSpec s = boson_spec(6, 0.1, 1.0);
    AdjointGenerator gen = build_adjoint_generator(s);
    const Matrix I6 = Matrix::Identity(6, 6);
    for (double t : {0.5, 3.0}) CHECK((evolve_one_point(gen, I6, t) - I6).norm() < 1e-9);
    Matrix X = random_hermitian(6, 31);
    Matrix Xt = evolve_one_point(gen, X, 0.8);
    CHECK((Xt - Xt.adjoint()).norm() < 1e-9 * X.norm());
}

TEST_CASE("generator duality with the Schrodinger picture") {
    SystemSpec s{random_hermitian(3, 41), random_matrix(3, 42), positive_band(), 1.0,
                 engine_quad(), ""};
    AdjointGenerator gen = build_adjoint_generator(s);

    // build the Schrodinger-picture generator from the same channels
    const int d = 3, dd = 9;
    auto kron = [](const Matrix& A, const Matrix& B) {
        Matrix K(A.rows() * B.rows(), A.cols() * B.cols());
        for (int i = 0; i < A.rows(); ++i)
            for (int j = 0; j < A.cols(); ++j)
                K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
        return K;
    };
    auto lmul = [&](const Matrix& A) { return kron(Matrix::Identity(d, d), A); };
    auto rmul = [&](const Matrix& B) { return kron(B.transpose().eval(), Matrix::Identity(d, d)); };
    const Matrix Heff = s.H + gen.lamb_shift_H;
    Matrix Ls = cd{0.0, -1.0} * (lmul(Heff) - rmul(Heff));
    for (const auto& ch : gen.rates) {
        const Matrix L = ch.L;
        const Matrix LdL = L.adjoint() * L;
        Ls += ch.rate * (kron(L.conjugate().eval(), L) - 0.5 * (lmul(LdL) + rmul(LdL)));
    }

    Matrix rho = thermal_state(s.H, 1.0);
    Matrix X = random_matrix(3, 43);
    const double t = 0.7;
    const Matrix Xt = evolve_one_point(gen, X, t);
    Eigen::VectorXcd vr = Eigen::Map<const Eigen::VectorXcd>(rho.data(), dd);
    Eigen::VectorXcd rt = (Ls * t).exp() * vr;
    Matrix rho_t = Eigen::Map<const Matrix>(rt.data(), d, d);
    const cd lhs = (rho * Xt).trace();
    const cd rhs = (rho_t * X).trace();
    CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(lhs)));
}

TEST_CASE("equal-time two-point operator") {
    SystemSpec s = spin_boson_spec();
    AdjointGenerator gen = build_adjoint_generator(s);
    const Matrix sp = s.S.adjoint();

    // zero coupling: plain product
    SystemSpec s0 = s;
    s0.J = SpectralDensity::zero();
    AdjointGenerator gen0 = build_adjoint_generator(s0);
    const Matrix W0 = equal_time_two_point(s0, gen0, sp, s.S, 1.3);
    CHECK((W0 - sp * s.S).norm() < 1e-10);

    // long-time limit matches the closed-form equilibrium weight
    const double inf = std::numeric_limits<double>::infinity();
    const Matrix W = equal_time_two_point(s, gen, sp, s.S, inf);
    SBParams p{1.0, s.beta, s.J, s.quad};
    Correlator eq = sb_mqrt_eq(p, SBKind::plus_minus, {0.0});
    const Matrix rho = thermal_state(s.H, s.beta);
    CHECK(std::abs((rho * W).trace() - eq.values[0]) < 1e-7);
}

TEST_CASE("equal-time occupation for the truncated oscillator") {
    SystemSpec s = boson_spec(12, 0.1, 2.0);
    AdjointGenerator gen = build_adjoint_generator(s);
    const double inf = std::numeric_limits<double>::infinity();
    const Matrix W = equal_time_two_point(s, gen, s.S.adjoint().eval(), s.S, inf);
    BFParams p{1.0, s.beta, Statistics::boson, s.J, s.quad};
    const Matrix rho = thermal_state(s.H, s.beta);
    CHECK(std::abs((rho * W).trace() - eq_occupation(p)) < 1e-4);
}

TEST_CASE("correction terms match the closed forms") {
    const double inf = std::numeric_limits<double>::infinity();

    SystemSpec s = spin_boson_spec();
    AdjointGenerator gen = build_adjoint_generator(s);
    SBParams p{1.0, s.beta, s.J, s.quad};
    const ComplexRate g = sb_complex_rate(p);
    const Matrix sz = (Matrix(2, 2) << -1, 0, 0, 1).finished();

    for (double tau : {0.0, 0.7, 2.5}) {
        auto [c1, c2] = correction_terms(s, gen, s.S.adjoint().eval(), s.S, inf, tau);
        CHECK(c2.norm() < 1e-12);
        auto integrand = [&](double w) -> cd {
            const double F = weighted_occupation(s.J, w, s.beta, Statistics::boson);
            return F / (std::conj(g.value) - cd{0.0, w});
        };
        QuadratureSpec loose = s.quad;
        loose.abs_tol = 1e-7;
        const cd scalar = fourier_integral(integrand, tau, loose).value;
        const Matrix want = scalar * (sz * sz); // [s+, s-][s+, s-]
        CHECK((c1 - want).norm() < 1e-6);
    }

    // zero coupling: both terms vanish
    SystemSpec s0 = s;
    s0.J = SpectralDensity::zero();
    AdjointGenerator gen0 = build_adjoint_generator(s0);
    auto [z1, z2] = correction_terms(s0, gen0, s.S.adjoint().eval(), s.S, inf, 1.0);
    CHECK(z1.norm() == 0.0);
    CHECK(z2.norm() == 0.0);
}

TEST_CASE("engine regression correlators reproduce the spin-boson forms") {
    const double inf = std::numeric_limits<double>::infinity();
    SystemSpec s = spin_boson_spec();
    AdjointGenerator gen = build_adjoint_generator(s);
    const Matrix rho = Matrix::Identity(2, 2) / 2.0;
    std::vector<double> tau(101);
    for (int i = 0; i < 101; ++i) tau[i] = 0.1 * i;

    SBParams p{1.0, s.beta, s.J, s.quad};
    Correlator want_s = sb_sqrt_eq(p, SBKind::plus_minus, tau);
    Correlator got_s = sqrt_correlator(s, gen, s.S.adjoint().eval(), s.S, rho, inf, tau);
    double m0 = std::abs(want_s.values[0]);
    for (std::size_t i = 0; i < tau.size(); ++i)
        CHECK(std::abs(got_s.values[i] - want_s.values[i]) < 1e-6 * m0);

    Correlator want_m = sb_mqrt_eq(p, SBKind::plus_minus, tau);
    Correlator got_m = mqrt_correlator(s, gen, s.S.adjoint().eval(), s.S, rho, inf, tau);
    for (std::size_t i = 0; i < tau.size(); ++i)
        CHECK(std::abs(got_m.values[i] - want_m.values[i]) < 1e-6 * m0);

    // strong-Markov wiring: corrections off reduces to the regression rule
    Correlator got_r = mqrt_correlator(s, gen, s.S.adjoint().eval(), s.S, rho, inf, tau, false);
    for (std::size_t i = 0; i < tau.size(); ++i)
        CHECK(std::abs(got_r.values[i] - got_s.values[i]) < 1e-8 * std::max(1.0, m0));
}

TEST_CASE("truncated oscillator engine matches the closed-form correlator") {
    const double inf = std::numeric_limits<double>::infinity();
    SystemSpec s = boson_spec(12, 0.1, 2.0);
    AdjointGenerator gen = build_adjoint_generator(s);
    const Matrix rho = thermal_state(s.H, s.beta);
    std::vector<double> tau(51);
    for (int i = 0; i < 51; ++i) tau[i] = 0.1 * i;

    BFParams p{1.0, s.beta, Statistics::boson, s.J, s.quad};
    Correlator want = mqrt_two_point_eq(p, TwoPointKind::a_dag_a, tau);
    Correlator got = mqrt_correlator(s, gen, s.S.adjoint().eval(), s.S, rho, inf, tau);
    const double m0 = std::abs(want.values[0]);
    for (std::size_t i = 0; i < tau.size(); ++i)
        CHECK(std::abs(got.values[i] - want.values[i]) < 1e-4 * std::max(1.0, m0));
}

TEST_CASE("integration step halving converges at fourth order") {
    const double inf = std::numeric_limits<double>::infinity();
    SystemSpec s = spin_boson_spec(0.1, 1.0);
    s.quad.rel_tol = 3e-3; // coarse grids are allowed here; we measure the error order
    AdjointGenerator gen = build_adjoint_generator(s);
    const Matrix rho = Matrix::Identity(2, 2) / 2.0;

    // the reported err field is |value(h) - value(h/2)| ~ C h^4
    Correlator coarse = mqrt_correlator(s, gen, s.S.adjoint().eval(), s.S, rho, inf, {0.0, 0.8});
    Correlator fine =
        mqrt_correlator(s, gen, s.S.adjoint().eval(), s.S, rho, inf, {0.0, 0.4, 0.8});
    const double e1 = coarse.err[1];
    const double e2 = fine.err[2];
    CHECK(e2 > 0.0);
    const double ratio = e1 / e2;
    CHECK(ratio > 8.0);
    CHECK(ratio < 32.0);
}

TEST_CASE("spec validation") {
    SystemSpec s = spin_boson_spec();
    s.H(0, 1) = 0.3; // breaks Hermiticity
    CHECK_THROWS_AS(s.validate(), UnsupportedSpec);

    SystemSpec big = boson_spec(70, 0.1, 1.0);
    CHECK_THROWS_AS(big.validate(), UnsupportedSpec);

    // a bosonic density that stays finite at Omega = 0 is rejected outright
    SystemSpec zf{Matrix::Zero(2, 2), Matrix::Identity(2, 2),
                  SpectralDensity::tabulated({{-1.0, 0.1}, {1.0, 0.1}}), 1.0, engine_quad(), ""};
    zf.H(0, 0) = -0.5;
    zf.H(1, 1) = 0.5;
    zf.S = Matrix::Identity(2, 2);
    CHECK_THROWS_AS(build_adjoint_generator(zf), DomainError);
}
