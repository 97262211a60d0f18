#pragma once

#include <utility>
#include <vector>

#include "qregress/errors.hpp"
#include "qregress/quadrature.hpp"

namespace qregress {

// eta = +1 fermions, -1 bosons
enum class Statistics : int { fermion = +1, boson = -1 };

inline double eta_of(Statistics s) { return static_cast<double>(static_cast<int>(s)); }

// Bath coupling density J(Omega). Nonnegative inside its support, 0 outside.
class SpectralDensity {
public:
    enum class Kind { flat, rational_quartic, tabulated, zero };

    // Gamma on [-W, W]. Treated as a wide flat band: the principal-value
    // frequency shift is taken in the wide-band limit (exactly zero), W only
    // truncates the occupied-weight integrals.
    static SpectralDensity flat(double gamma, double half_width);

    // 2 pi delta Omega^2 / (1 + Omega^4)
    static SpectralDensity rational_quartic(double delta);

    // sorted (Omega, J) pairs, linear interpolation, 0 outside
    static SpectralDensity tabulated(std::vector<std::pair<double, double>> pts);

    static SpectralDensity zero();

    double operator()(double omega) const;
    std::pair<double, double> support() const;
    Kind kind() const { return kind_; }
    bool is_zero() const { return kind_ == Kind::zero; }
    bool wide_band() const { return kind_ == Kind::flat; }

    double flat_gamma() const { return a_; }
    double flat_half_width() const { return b_; }
    double rq_delta() const { return a_; }

private:
    SpectralDensity(Kind k, double a, double b) : kind_(k), a_(a), b_(b) {}
    Kind kind_;
    double a_ = 0.0, b_ = 0.0;
    std::vector<std::pair<double, double>> table_;
};

// n_eta(Omega) = 1 / (e^{beta Omega} + eta), overflow-safe.
// DomainError at the bosonic Omega = 0 pole.
double occupation(double omega, double beta, Statistics st);

// e^{a x} / (e^x + eta) with x = beta*Omega, evaluated with stable branches.
// a = 0 gives n_eta; a = 1 gives 1 - eta n_eta; intermediate a arises from
// integrand-level analytic continuation.
double stat_weight(double x, double a, Statistics st);

// F_eta(Omega) = J(Omega) n_eta(Omega); finite at Omega = 0 for bosonic J
// vanishing at least linearly there.
double weighted_occupation(const SpectralDensity& J, double omega, double beta, Statistics st);

// J(Omega) * e^{a x} / (e^x + eta), x = beta Omega, with the bosonic small-x
// series so densities with J ~ Omega^2 stay finite through 0. a = 0 gives
// J n_eta, a = 1 gives J (1 - eta n_eta); other a values arise when the
// e^{-beta s Omega} factor of an analytic continuation is folded in.
double thermal_weight(const SpectralDensity& J, double omega, double beta, Statistics st,
                      double a);

// DomainError unless J(Omega)/Omega stays bounded on a probe neighborhood of 0
// (required for bosonic baths whose support touches Omega = 0).
void validate_bosonic_density(const SpectralDensity& J);

// omega0' = omega0 + P int dOmega/2pi J(Omega)/(omega0 - Omega).
// Flat densities use the wide-band limit (zero shift).
double lamb_shift(const SpectralDensity& J, double omega0, const QuadratureSpec& spec);

// Spin-boson shift: adds P int dOmega/pi F(Omega)/(omega0 - Omega) on top of
// the bare lamb_shift term (bosonic bath).
double spin_boson_frequency_shift(const SpectralDensity& J, double beta, double omega0,
                                  const QuadratureSpec& spec);

} // namespace qregress
