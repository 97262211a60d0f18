#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "qregress/errors.hpp"

namespace qregress {

using cd = std::complex<double>;

// Controls for the frequency-domain integrals. All integrals over the real
// line are truncated to [-omega_max, omega_max]; integrands with an
// oscillatory factor e^{i Omega tau} are resolved with panels no wider than
// min_panel_width_factor * pi / |tau|.
struct QuadratureSpec {
    double omega_max = 50.0;
    double rel_tol = 1e-8;
    double abs_tol = 1e-9;
    int max_panels = 12000;
    double min_panel_width_factor = 0.5;

    void validate() const;

    // omega_max = 50 * max(omega0, 1, 1/beta)
    static QuadratureSpec for_model(double omega0, double beta);
};

struct QuadResult {
    cd value{0.0, 0.0};
    double error = 0.0;
};

// Adaptive Gauss-Kronrod 15-point integration of f over [a, b].
// Initial panels are no wider than max_width; the worst panel is split until
// the summed error estimate meets max(abs_tol, rel_tol*|value|).
QuadResult integrate_adaptive(const std::function<cd(double)>& f, double a, double b,
                              const QuadratureSpec& spec,
                              double max_width = 0.0 /* 0 -> no cap */);

// P int_{-omega_max}^{omega_max} f(Omega) / (pole - Omega) dOmega.
// Symmetric subtraction around the pole; regular tails by adaptive panels.
double cauchy_principal_value(const std::function<double(double)>& f, double pole,
                              const QuadratureSpec& spec);

// int_{-omega_max}^{omega_max} dOmega/2pi e^{i Omega tau} g(Omega).
// Throws DecayError when |g| sampled near +-omega_max exceeds abs_tol.
QuadResult fourier_integral(const std::function<cd(double)>& g, double tau,
                            const QuadratureSpec& spec);

// Fixed node set for evaluating int dOmega/2pi e^{i Omega tau} g(Omega) at
// many tau values sharing one integrand. The panel layout is refined once,
// for the most oscillatory |tau| <= tau_max, then reused.
class FourierGrid {
public:
    FourierGrid(const std::function<cd(double)>& g, double tau_max,
                const QuadratureSpec& spec);

    QuadResult eval(double tau) const;

    // e^{i Omega tau_re} * e^{-beta_shift * Omega} phase, for integrand-level
    // analytic continuation: evaluates int dOmega/2pi e^{i Omega tau_re}
    // e^{-c Omega} g(Omega).
    QuadResult eval_continued(double tau_re, double exp_shift) const;

    // eval at tau0 + j*dtau for j = 0..count-1, sharing one phase table per
    // node (recurrence instead of count exponentials per node).
    std::vector<QuadResult> eval_uniform(double tau0, double dtau, int count) const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    std::vector<double> nodes_;
    std::vector<double> wk_;  // Kronrod weight * panel scale
    std::vector<double> wg_;  // Gauss weight (0 on pure-Kronrod nodes)
    std::vector<cd> gvals_;
};

} // namespace qregress
