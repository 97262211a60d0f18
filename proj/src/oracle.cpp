#include "qregress/oracle.hpp"

#include <lapacke.h>

#include <cmath>
#include <limits>

namespace qregress {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// The oracle only probes the bath through near-resonant response; weight the
// density by a steeply decaying response profile when judging whether a
// window captures enough of it (far-off-resonant weight is second order in
// both the detuning denominator and the coupling).
double window_weight(const SpectralDensity& J, double omega, double beta, Statistics stat) {
    const double j = J(omega);
    if (j == 0.0) return 0.0;
    const double f = std::abs(weighted_occupation(J, omega, beta, stat));
    const double damp = 1.0 + omega * omega;
    return (j + f) / (damp * damp * damp);
}

double sampled_mass(const SpectralDensity& J, double lo, double hi, int n, double beta,
                    Statistics stat) {
    if (hi <= lo) return 0.0;
    const double dw = (hi - lo) / n;
    double mass = 0.0;
    for (int k = 0; k < n; ++k) {
        const double w = lo + (k + 0.5) * dw;
        if (std::abs(w) < 1e-12) continue;
        mass += window_weight(J, w, beta, stat) * dw;
    }
    return mass;
}

void eig_sym(Eigen::MatrixXd& a, Eigen::VectorXd& w) {
    const lapack_int n = static_cast<lapack_int>(a.rows());
    w.resize(n);
    const lapack_int info =
        LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, a.data(), n, w.data());
    if (info != 0)
        throw ConvergenceError("symmetric eigensolver failed, info = " + std::to_string(info));
}

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& B) {
    Eigen::MatrixXcd K(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return K;
}

} // namespace

DiscretizedBath discretize(const SpectralDensity& J, int N, std::pair<double, double> window,
                           double beta, Statistics stat) {
    if (N < 1) throw DomainError("discretize: N must be positive");
    const auto [lo, hi] = window;
    if (!(hi > lo)) throw DomainError("discretize: empty window");
    if (!(beta > 0.0)) throw DomainError("discretize: beta must be positive");

    const double span = hi - lo;
    const double inside = sampled_mass(J, lo, hi, 8000, beta, stat);
    const double outside = sampled_mass(J, hi, hi + 4.0 * span, 4000, beta, stat) +
                           sampled_mass(J, lo - 4.0 * span, lo, 4000, beta, stat);
    if (inside <= 0.0) throw WindowError("discretize: window misses the density support");
    if (outside > 1e-6 * (inside + outside))
        throw WindowError("discretize: weighted density mass outside window exceeds 1e-6");

    DiscretizedBath bath;
    bath.N = N;
    bath.window = window;
    bath.delta_omega = span / N;
    bath.omega.resize(N);
    bath.alpha.resize(N);
    for (int k = 0; k < N; ++k) {
        const double w = lo + (k + 0.5) * bath.delta_omega;
        bath.omega[k] = w;
        bath.alpha[k] = std::sqrt(std::max(J(w), 0.0) * bath.delta_omega / (2.0 * M_PI));
    }
    return bath;
}

OracleSystem::OracleSystem(const DiscretizedBath& bath, double omega0, Statistics stat,
                           double beta, double n0)
    : stat_(stat), beta_(beta), delta_omega_(bath.delta_omega) {
    if (!(beta > 0.0)) throw DomainError("oracle: beta must be positive");
    if (stat == Statistics::fermion && (n0 < 0.0 || n0 > 1.0))
        throw DomainError("oracle: fermionic occupation must lie in [0, 1]");

    const int m = bath.N + 1;
    h_ = Eigen::MatrixXd::Zero(m, m);
    h_(0, 0) = omega0;
    n_.resize(m);
    n_[0] = n0;
    for (int k = 0; k < bath.N; ++k) {
        h_(k + 1, k + 1) = bath.omega[k];
        h_(0, k + 1) = h_(k + 1, 0) = bath.alpha[k];
        // negative-frequency bosonic modes carry the formal analytic weight;
        // they are required for densities with symmetric support
        n_[k + 1] = occupation(bath.omega[k], beta, stat);
    }
    evecs_ = h_;
    eig_sym(evecs_, evals_);
}

double OracleSystem::recurrence_time() const {
    if (modes() <= 1 || delta_omega_ <= 0.0) return kInf;
    return 0.5 * 2.0 * M_PI / delta_omega_;
}

Eigen::VectorXcd OracleSystem::propagator_row(double t) const {
    auto it = row_cache_.find(t);
    if (it != row_cache_.end()) return it->second;
    const Eigen::VectorXcd phased =
        (cd{0.0, -t} * evals_.array().cast<cd>()).exp() *
        evecs_.row(0).transpose().array().cast<cd>();
    Eigen::VectorXcd row = evecs_.cast<cd>() * phased;
    if (row_cache_.size() > 8192) row_cache_.clear();
    row_cache_.emplace(t, row);
    return row;
}

cd OracleSystem::g_occ(double t1, double t2) const {
    const Eigen::VectorXcd u1 = propagator_row(t1);
    const Eigen::VectorXcd u2 = propagator_row(t2);
    cd out = 0.0;
    for (int j = 0; j < modes(); ++j) out += std::conj(u1(j)) * u2(j) * n_[j];
    return out;
}

cd OracleSystem::g_comp(double t1, double t2) const {
    const double eta = eta_of(stat_);
    const Eigen::VectorXcd u1 = propagator_row(t1);
    const Eigen::VectorXcd u2 = propagator_row(t2);
    cd out = 0.0;
    for (int j = 0; j < modes(); ++j) out += u1(j) * std::conj(u2(j)) * (1.0 - eta * n_[j]);
    return out;
}

namespace {

void guard_times(const OracleSystem& sys, double tmax) {
    if (tmax >= sys.recurrence_time())
        throw RecurrenceError("oracle: evolution time reaches the discretization recurrence");
}

} // namespace

cd two_point_exact(const OracleSystem& sys, double t, double tau, TwoPointKind kind) {
    if (t < 0.0) throw DomainError("two_point_exact: t must be nonnegative");
    guard_times(sys, std::max(t, t + tau));
    if (kind == TwoPointKind::a_dag_a) return sys.g_occ(t + tau, t);
    return sys.g_comp(t + tau, t);
}

cd nn_exact(const OracleSystem& sys, double t, double tau) {
    if (t < 0.0) throw DomainError("nn_exact: t must be nonnegative");
    guard_times(sys, std::max(t, t + tau));
    const double T = t + tau;
    return sys.g_occ(T, T) * sys.g_occ(t, t) + sys.g_occ(T, t) * sys.g_comp(T, t);
}

cd three_point_exact(const OracleSystem& sys, double t, double tau1, double tau2,
                     ThreePointOrdering ordering) {
    if (t < 0.0) throw DomainError("three_point_exact: t must be nonnegative");
    const double y = t + tau2;
    const double x = t + tau1 + tau2;
    guard_times(sys, std::max({t, y, x}));
    // both orderings reduce to two non-vanishing pairings; the crossings are
    // nested, so fermionic signs stay positive
    if (ordering == ThreePointOrdering::N_right)
        return sys.g_occ(x, y) * sys.g_occ(t, t) + sys.g_occ(x, t) * sys.g_comp(y, t);
    return sys.g_occ(t, t) * sys.g_occ(x, y) + sys.g_occ(t, y) * sys.g_comp(t, x);
}

DenseEdReference::DenseEdReference(const OracleSystem& sys, int boson_truncation) {
    const int modes = sys.modes();
    const int nbath = modes - 1;
    const bool fermionic = sys.stat() == Statistics::fermion;
    int trunc = 2;
    if (!fermionic) {
        trunc = boson_truncation > 0 ? boson_truncation : 6;
        if (nbath > 4) throw SizeError("dense reference: at most 4 bosonic bath modes");
        if (trunc < 2 || trunc > 6)
            throw SizeError("dense reference: bosonic truncation must lie in [2, 6]");
    } else if (nbath > 8) {
        throw SizeError("dense reference: at most 8 fermionic bath modes");
    }

    // single-mode building blocks
    Eigen::MatrixXcd lower = Eigen::MatrixXcd::Zero(trunc, trunc);
    for (int n = 0; n + 1 < trunc; ++n) lower(n, n + 1) = fermionic ? 1.0 : std::sqrt(n + 1.0);
    const Eigen::MatrixXcd ident = Eigen::MatrixXcd::Identity(trunc, trunc);
    Eigen::MatrixXcd parity = ident;
    if (fermionic) parity(1, 1) = -1.0;

    auto mode_op = [&](int which, const Eigen::MatrixXcd& op, bool jw_string) {
        Eigen::MatrixXcd full = Eigen::MatrixXcd::Identity(1, 1);
        for (int j = 0; j < modes; ++j) {
            if (j < which && jw_string)
                full = kron(full, parity);
            else if (j == which)
                full = kron(full, op);
            else
                full = kron(full, ident);
        }
        return full;
    };

    std::vector<Eigen::MatrixXcd> a(modes);
    for (int j = 0; j < modes; ++j) a[j] = mode_op(j, lower, fermionic);
    a0_ = a[0];

    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(a0_.rows(), a0_.cols());
    for (int j = 0; j < modes; ++j) H += sys.h()(j, j) * (a[j].adjoint() * a[j]);
    for (int k = 1; k < modes; ++k) {
        const double alpha = sys.h()(0, k);
        if (alpha == 0.0) continue;
        H += alpha * (a[0].adjoint() * a[k] + a[k].adjoint() * a[0]);
    }

    // factorized start: every mode diagonal with its stated mean occupation
    rho_ = Eigen::MatrixXcd::Identity(1, 1);
    for (int j = 0; j < modes; ++j) {
        const double n = sys.occupations()[j];
        Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(trunc, trunc);
        if (fermionic) {
            d(0, 0) = 1.0 - n;
            d(1, 1) = n;
        } else {
            if (n < 0.0)
                throw DomainError("dense reference: negative bosonic occupation has no state");
            const double x = n / (1.0 + n);
            double norm = 0.0;
            for (int m = 0; m < trunc; ++m) {
                d(m, m) = std::pow(x, m);
                norm += d(m, m).real();
            }
            d /= norm;
        }
        rho_ = kron(rho_, d);
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
    if (es.info() != Eigen::Success)
        throw ConvergenceError("dense reference: eigendecomposition failed");
    evecs_ = es.eigenvectors();
    evals_ = es.eigenvalues();
}

Eigen::MatrixXcd DenseEdReference::heisenberg(const Eigen::MatrixXcd& X, double t) const {
    const Eigen::VectorXcd ph = (cd{0.0, -t} * evals_.array().cast<cd>()).exp();
    const Eigen::MatrixXcd U = evecs_ * ph.asDiagonal() * evecs_.adjoint();
    return U.adjoint() * X * U;
}

cd DenseEdReference::two_point(double t, double tau, TwoPointKind kind) const {
    const Eigen::MatrixXcd late = heisenberg(a0_, t + tau);
    const Eigen::MatrixXcd early = heisenberg(a0_, t);
    if (kind == TwoPointKind::a_dag_a) return (rho_ * late.adjoint() * early).trace();
    return (rho_ * late * early.adjoint()).trace();
}

cd DenseEdReference::nn(double t, double tau) const {
    const Eigen::MatrixXcd N0 = a0_.adjoint() * a0_;
    return (rho_ * heisenberg(N0, t + tau) * heisenberg(N0, t)).trace();
}

cd DenseEdReference::three_point(double t, double tau1, double tau2,
                                 ThreePointOrdering ordering) const {
    const Eigen::MatrixXcd N0 = a0_.adjoint() * a0_;
    const Eigen::MatrixXcd pair =
        heisenberg(a0_, t + tau1 + tau2).adjoint() * heisenberg(a0_, t + tau2);
    if (ordering == ThreePointOrdering::N_right)
        return (rho_ * pair * heisenberg(N0, t)).trace();
    return (rho_ * heisenberg(N0, t) * pair).trace();
}

} // namespace qregress
