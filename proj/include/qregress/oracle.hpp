#pragma once

#include <Eigen/Dense>
#include <map>
#include <utility>

#include "qregress/models.hpp"

namespace qregress {

// Star discretization of a bath density: J(Omega) = 2 pi sum_k alpha_k^2
// delta(Omega - Omega_k) in the continuum limit, on a uniform frequency grid.
struct DiscretizedBath {
    int N = 0;
    std::vector<double> omega;
    std::vector<double> alpha;
    std::pair<double, double> window{0.0, 0.0};
    double delta_omega = 0.0;
};

// beta and stat enter only through the window adequacy check, which weights
// the density by the thermal occupation it will be sampled with.
DiscretizedBath discretize(const SpectralDensity& J, int N, std::pair<double, double> window,
                           double beta, Statistics stat);

// One system mode linearly coupled to the discretized bath: a quadratic,
// number-conserving Hamiltonian solved exactly through its (N+1)-dimensional
// single-particle matrix. Bath modes start thermal, the system mode starts
// diagonal with occupation n0.
class OracleSystem {
  public:
    OracleSystem(const DiscretizedBath& bath, double omega0, Statistics stat, double beta,
                 double n0);

    Statistics stat() const { return stat_; }
    double beta() const { return beta_; }
    int modes() const { return static_cast<int>(h_.rows()); }
    const Eigen::MatrixXd& h() const { return h_; }
    const std::vector<double>& occupations() const { return n_; }

    // latest usable evolution time before the discrete bath echoes back
    double recurrence_time() const;

    // row 0 of exp(-i h t): the system-mode component of the propagator
    Eigen::VectorXcd propagator_row(double t) const;

    // <a0^dag(t1) a0(t2)> and <a0(t1) a0^dag(t2)>
    cd g_occ(double t1, double t2) const;
    cd g_comp(double t1, double t2) const;

  private:
    Statistics stat_;
    double beta_;
    double delta_omega_;
    Eigen::MatrixXd h_;
    std::vector<double> n_;
    Eigen::MatrixXd evecs_;
    Eigen::VectorXd evals_;
    mutable std::map<double, Eigen::VectorXcd> row_cache_;
};

cd two_point_exact(const OracleSystem& sys, double t, double tau, TwoPointKind kind);
cd nn_exact(const OracleSystem& sys, double t, double tau);
cd three_point_exact(const OracleSystem& sys, double t, double tau1, double tau2,
                     ThreePointOrdering ordering);

// Brute-force many-body check of the Wick reductions above: full Hilbert
// space, exact thermal state, Heisenberg operators by matrix exponentiation.
// Fermions up to 8 bath modes; bosons up to 4 bath modes with a small
// per-mode Fock truncation.
class DenseEdReference {
  public:
    DenseEdReference(const OracleSystem& sys, int boson_truncation = 0);

    cd two_point(double t, double tau, TwoPointKind kind) const;
    cd nn(double t, double tau) const;
    cd three_point(double t, double tau1, double tau2, ThreePointOrdering ordering) const;

  private:
    Eigen::MatrixXcd heisenberg(const Eigen::MatrixXcd& X, double t) const;

    Eigen::MatrixXcd a0_;
    Eigen::MatrixXcd rho_;
    Eigen::MatrixXcd evecs_;
    Eigen::VectorXd evals_;
};

} // namespace qregress
