#pragma once

#include <Eigen/Dense>
#include <optional>

#include "qregress/models.hpp"

namespace qregress {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// Finite-dimensional system H coupled to a bosonic bath through one operator S
// (excitation-conserving coupling S b_k^dag + S^dag b_k).
struct SystemSpec {
    Matrix H;
    Matrix S;
    SpectralDensity J;
    double beta;
    QuadratureSpec quad;
    std::string fock_truncation_note;

    int dim() const { return static_cast<int>(H.rows()); }
    void validate() const;
};

struct BohrComponent {
    double omega; // E_b - E_a for the |a><b| block
    Matrix X;
};

// e^{-iHt} X e^{iHt} = sum_omega e^{i omega t} X_omega
struct BohrDecomposition {
    std::vector<BohrComponent> components;
    bool degeneracy_warning = false;

    Matrix reconstruct() const;
};

BohrDecomposition bohr_decompose(const Matrix& H, const Matrix& X, double grouping_tol = 1e-9);

struct RateChannel {
    double omega;
    double rate;
    Matrix L;
};

// Heisenberg-picture generator dX/dt = i[H + H_LS, X] + dissipator, stored as
// a d^2 x d^2 matrix on column-major vectorized operators, with its
// eigendecomposition cached.
struct AdjointGenerator {
    int dim = 0;
    Matrix M;
    Matrix lamb_shift_H;
    std::vector<RateChannel> rates;

    // eigendecomposition of the generator in balanced coordinates: rotate by
    // the H eigenbasis (ubasis), then rescale by the diagonal thermal weight
    // (bal). Both are exact similarities kept factored for conditioning.
    Matrix eigvecs;
    Vector eigvals;
    Matrix ubasis;
    Vector bal;
    Eigen::PartialPivLU<Matrix> vlu;
    bool eig_ok = false;

    // M-eigencomponents of X: X = sum_s parts[s].X with M-eigenvalue lambda.
    struct Component {
        cd lambda;
        Matrix X;
    };
    std::vector<Component> decompose(const Matrix& X, double drop_tol = 1e-12) const;
};

AdjointGenerator build_adjoint_generator(const SystemSpec& spec);

Matrix evolve_one_point(const AdjointGenerator& gen, const Matrix& X0, double t);

// Equal-time reduced two-point operator [A(t)O(t)]_S to second order in the
// coupling: A_S(t) O_S(t) plus the double-time bath-contraction integral.
// t may be infinity (requires the contributing sectors to be damped).
Matrix equal_time_two_point(const SystemSpec& spec, const AdjointGenerator& gen, const Matrix& A,
                            const Matrix& O, double t);

// The two non-homogeneous driving terms of the modified regression equation
// at separation tau (weak-Markov half-line form; matrices in system space).
std::pair<Matrix, Matrix> correction_terms(const SystemSpec& spec, const AdjointGenerator& gen,
                                           const Matrix& A, const Matrix& O, double t, double tau);

// <A(t+tau) O(t)> by the standard regression rule: each M-eigencomponent of A
// carries a pure e^{lambda tau} envelope on its equal-time operator.
Correlator sqrt_correlator(const SystemSpec& spec, const AdjointGenerator& gen, const Matrix& A,
                           const Matrix& O, const Matrix& rho, double t,
                           const std::vector<double>& tau);

// <A(t+tau) O(t)> including the non-homogeneous corrections, integrated in tau
// with fixed-step RK4 (h = min grid spacing / 4, verified by step halving).
Correlator mqrt_correlator(const SystemSpec& spec, const AdjointGenerator& gen, const Matrix& A,
                           const Matrix& O, const Matrix& rho, double t,
                           const std::vector<double>& tau, bool include_corrections = true);

} // namespace qregress
