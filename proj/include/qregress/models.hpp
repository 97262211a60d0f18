#pragma once

#include <complex>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "qregress/bath.hpp"
#include "qregress/quadrature.hpp"

namespace qregress {

// Complex-valued function sampled on a tau grid, with method/model metadata.
struct Correlator {
    std::vector<double> tau;
    std::vector<cd> values;
    std::vector<double> err;
    std::string model;
    std::string method;
    std::string kind;
    std::string params_digest;
};

// G = -i omega0' + gamma/2 for the boson/fermion model; the spin-boson
// variant carries the thermally enhanced real part gamma(1/2 + n(omega0)).
struct ComplexRate {
    cd value;
    double omega0_prime;
    double gamma;
};

struct BFParams {
    double omega0;
    double beta;
    Statistics stat;
    SpectralDensity J;
    QuadratureSpec quad;

    void validate() const;
    std::string digest() const;
};

struct SBParams {
    double omega0;
    double beta;
    SpectralDensity J; // bosonic bath
    QuadratureSpec quad;

    void validate() const;
    std::string digest() const;
};

enum class TwoPointKind { a_dag_a, a_a_dag };
enum class SBKind { plus_minus, minus_plus };
enum class ThreePointOrdering { N_right, N_left };

ComplexRate complex_rate(const BFParams& p);
ComplexRate sb_complex_rate(const SBParams& p);

// <a^dag a> in the long-time limit (Lorentzian-weighted occupation integral).
double eq_occupation(const BFParams& p);

// e^{-gamma t} n0 + transient Lorentzian integral; n0 at t=0, eq value as t->inf.
double finite_time_occupation(const BFParams& p, double n0, double t);

Correlator sqrt_two_point_eq(const BFParams& p, TwoPointKind kind, const std::vector<double>& tau);
Correlator mqrt_two_point_eq(const BFParams& p, TwoPointKind kind, const std::vector<double>& tau);
Correlator mqrt_two_point_finite(const BFParams& p, double n0, double t,
                                 const std::vector<double>& tau);
Correlator mqrt_nn_eq(const BFParams& p, const std::vector<double>& tau);
Correlator sqrt_nn_eq(const BFParams& p, const std::vector<double>& tau);
Correlator exact_two_point_eq(const BFParams& p, TwoPointKind kind, const std::vector<double>& tau);

Correlator sb_mqrt_eq(const SBParams& p, SBKind kind, const std::vector<double>& tau);
Correlator sb_sqrt_eq(const SBParams& p, SBKind kind, const std::vector<double>& tau);

// Bosonic three-point equilibrium correlators:
// N_right = <a^dag(t+tau1+tau2) a(t+tau2) N(t)>, N_left = <N(t) a^dag(...) a(...)>.
cd three_point_mqrt_eq(const BFParams& p, double tau1, double tau2, ThreePointOrdering ordering);

// Same correlator with complex time differences (imaginary parts are the
// integrand-level analytic continuation used by the KMS checks).
// u = t1 - t2, v = t1 - t3, w = t2 - t3 with t1, t2, t3 the operator times.
cd three_point_mqrt_continued(const BFParams& p, ThreePointOrdering ordering, cd u, cd v, cd w);

// Batch form of the above: the frequency grids are built once and shared
// across evaluations. An imaginary part Im c of a time difference folds into
// the thermal weight as an index shift a -> a - Im c / beta, so each distinct
// shift costs one extra cached grid.
class ThreePointEvaluator {
public:
    ThreePointEvaluator(const BFParams& p, double tau_max);

    QuadResult eval(ThreePointOrdering ordering, cd u, cd v, cd w) const;

private:
    QuadResult part(double a_base, cd c) const;
    const FourierGrid& grid_for(double a) const;

    BFParams p_;
    double tau_max_;
    double n0w_;
    double half_rate_;
    double center_;
    mutable std::map<double, FourierGrid> grids_;
};

// Cached principal-value frequency shift Sigma(Omega) on a uniform node grid
// (linear interpolation between nodes). Reused across temperatures in sweeps.
// Two resolutions: a dense core where resonances live (the equilibrium
// integrands vary on the scale of the linewidth there) and a coarse outer
// grid for the smooth far tails.
class SigmaTable {
public:
    SigmaTable(const SpectralDensity& J, const QuadratureSpec& quad, int nodes = 4001);
    double operator()(double omega) const;

private:
    double core_lo_ = 0.0, core_dx_ = 0.0;
    std::vector<double> core_;
    double outer_lo_ = 0.0, outer_dx_ = 0.0;
    std::vector<double> outer_;
};

// exact_two_point_eq with a caller-provided Sigma cache.
Correlator exact_two_point_eq(const BFParams& p, TwoPointKind kind, const std::vector<double>& tau,
                              const std::shared_ptr<const SigmaTable>& sigma);

} // namespace qregress
