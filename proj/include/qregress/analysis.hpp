#pragma once

#include <string>
#include <vector>

#include "qregress/models.hpp"

namespace qregress {

enum class Method { sqrt, mqrt, exact };

const char* method_name(Method m);

// Result of one KMS check: residual = max over the tau grid of
// |C1(tau) - C2(tau + i beta)| normalized by max |C1|.
struct KMSReport {
    double residual = 0.0;
    double err = 0.0; // quadrature error estimate, same normalization
    std::string method;
    std::string pair;
    std::string tau_digest;
    double beta = 0.0;
};

enum class KMSPair { a_pair, nn_pair };

// C(tau + i beta s) for the equilibrium correlators, by exact continuation at
// integrand level: the e^{-beta s Omega} factor is folded into the thermal
// weight index and explicit e^{+-i omega0 tau} prefactors pick up
// e^{-+ beta s omega0}. No numerical continuation is involved.
// An optional shared Sigma cache speeds up repeated exact-method calls.
cd analytic_continuation_eval(const BFParams& p, Method method, TwoPointKind kind, double tau,
                              double s,
                              const std::shared_ptr<const SigmaTable>& sigma = nullptr);
cd analytic_continuation_nn(const BFParams& p, Method method, double tau, double s);
cd analytic_continuation_eval(const SBParams& p, Method method, SBKind kind, double tau, double s);

KMSReport kms_residual(const BFParams& p, Method method, KMSPair pair,
                       const std::vector<double>& tau_grid);
KMSReport kms_residual(const SBParams& p, Method method, const std::vector<double>& tau_grid);

// The four imaginary-shift relations linking the two operator orderings of
// the three-point correlator, checked on the product of the two grids.
std::vector<KMSReport> three_point_kms_check(const BFParams& p,
                                             const std::vector<double>& tau1_grid,
                                             const std::vector<double>& tau2_grid);

// D = (1/tau_f) int_0^tau_f [|Re ref - Re c| + |Im ref - Im c|], trapezoidal
// on the correlators' common grid. GridMismatch when the grids differ or do
// not cover [0, tau_f].
double deviation_metric(const Correlator& c, const Correlator& ref, double tau_f);

struct SweepRow {
    double T = 0.0;
    double delta = 0.0;
    double D_mqrt = 0.0;
    double D_sqrt = 0.0;
    double tau_f = 0.0;
    std::string error; // empty on success; D fields are NaN on failure
};

struct SweepTable {
    std::vector<double> T_grid;
    std::vector<double> delta_grid;
    std::vector<SweepRow> rows; // row-major: T outer, delta inner
};

std::vector<double> default_temperature_grid(); // 8 points on [0.5, 4]
std::vector<double> default_delta_grid();       // 8 points on [0.02, 0.2]

// Wide frequency window and panel budget sized for the slowly decaying
// rational-quartic tails and tau_f up to 1/min(delta).
QuadratureSpec sweep_quadrature();

// For each (T, delta): omega0 = 1, beta = 1/T, J = rational_quartic(delta),
// D(mqrt vs exact) and D(sqrt vs exact) over [0, tau_f = 1/delta] on a
// uniform grid of tau_points samples. Failed cells record the error message
// and continue.
SweepTable sweep_d(Statistics stat, const std::vector<double>& T_grid,
                   const std::vector<double>& delta_grid, const QuadratureSpec& quad,
                   int tau_points = 201);

} // namespace qregress
