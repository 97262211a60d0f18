#include "qregress/bath.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qregress {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

SpectralDensity SpectralDensity::flat(double gamma, double half_width) {
    if (!(gamma > 0.0) || !(half_width > 0.0))
        throw DomainError("SpectralDensity::flat: Gamma and W must be positive");
    return SpectralDensity(Kind::flat, gamma, half_width);
}

SpectralDensity SpectralDensity::rational_quartic(double delta) {
    if (!(delta > 0.0)) throw DomainError("SpectralDensity::rational_quartic: delta must be positive");
    return SpectralDensity(Kind::rational_quartic, delta, 0.0);
}

SpectralDensity SpectralDensity::tabulated(std::vector<std::pair<double, double>> pts) {
    if (pts.size() < 2) throw DomainError("SpectralDensity::tabulated: need at least two points");
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i > 0 && !(pts[i].first > pts[i - 1].first))
            throw DomainError("SpectralDensity::tabulated: Omega grid must be strictly increasing");
        if (pts[i].second < 0.0 || !std::isfinite(pts[i].second))
            throw DomainError("SpectralDensity::tabulated: J values must be finite and nonnegative");
    }
    SpectralDensity d(Kind::tabulated, 0.0, 0.0);
    d.table_ = std::move(pts);
    return d;
}

SpectralDensity SpectralDensity::zero() { return SpectralDensity(Kind::zero, 0.0, 0.0); }

double SpectralDensity::operator()(double omega) const {
    switch (kind_) {
        case Kind::flat:
            return (omega >= -b_ && omega <= b_) ? a_ : 0.0;
        case Kind::rational_quartic: {
            const double w2 = omega * omega;
            return 2.0 * kPi * a_ * w2 / (1.0 + w2 * w2);
        }
        case Kind::tabulated: {
            if (omega <= table_.front().first || omega >= table_.back().first) {
                if (omega == table_.front().first) return table_.front().second;
                if (omega == table_.back().first) return table_.back().second;
                return 0.0;
            }
            auto it = std::upper_bound(table_.begin(), table_.end(), omega,
                                       [](double w, const std::pair<double, double>& p) {
                                           return w < p.first;
                                       });
            const auto& hi = *it;
            const auto& lo = *(it - 1);
            const double t = (omega - lo.first) / (hi.first - lo.first);
            return lo.second + t * (hi.second - lo.second);
        }
        case Kind::zero:
            return 0.0;
    }
    return 0.0;
}

std::pair<double, double> SpectralDensity::support() const {
    switch (kind_) {
        case Kind::flat:
            return {-b_, b_};
        case Kind::rational_quartic:
            return {-std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity()};
        case Kind::tabulated:
            return {table_.front().first, table_.back().first};
        case Kind::zero:
            return {0.0, 0.0};
    }
    return {0.0, 0.0};
}

double occupation(double omega, double beta, Statistics st) {
    if (!(beta > 0.0)) throw DomainError("occupation: beta must be positive");
    const double x = beta * omega;
    if (st == Statistics::boson) {
        if (omega == 0.0) throw DomainError("occupation: bosonic pole at Omega = 0");
        if (x > 36.0) return std::exp(-x) / (1.0 - std::exp(-x));
        return 1.0 / std::expm1(x);
    }
    // fermion
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return e / (1.0 + e);
    }
    return 1.0 / (std::exp(x) + 1.0);
}

double stat_weight(double x, double a, Statistics st) {
    const double eta = eta_of(st);
    if (st == Statistics::boson && x == 0.0)
        throw DomainError("stat_weight: bosonic pole at x = 0");
    if (x >= 0.0) {
        // e^{(a-1)x} / (1 + eta e^{-x})
        const double num = std::exp((a - 1.0) * x);
        return num / (1.0 + eta * std::exp(-x));
    }
    const double num = std::exp(a * x);
    if (st == Statistics::boson) return num / std::expm1(x);
    return num / (std::exp(x) + 1.0);
}

void validate_bosonic_density(const SpectralDensity& J) {
    auto [lo, hi] = J.support();
    if (J.is_zero()) return;
    if (lo > 0.0 || hi < 0.0) return; // support excludes Omega = 0
    double prev = 0.0;
    for (double w : {1e-3, 1e-4, 1e-5, 1e-6}) {
        const double ratio = std::max(std::abs(J(w) / w), std::abs(J(-w) / w));
        if (!std::isfinite(ratio) || (prev > 0.0 && ratio > 2.0 * prev + 1e-12))
            throw DomainError("bosonic spectral density must vanish at least linearly at Omega = 0");
        prev = std::max(prev, ratio);
    }
    if (J(0.0) != 0.0)
        throw DomainError("bosonic spectral density must vanish at Omega = 0");
}

double weighted_occupation(const SpectralDensity& J, double omega, double beta, Statistics st) {
    if (st == Statistics::boson) validate_bosonic_density(J);
    const double x = beta * omega;
    if (st == Statistics::boson && std::abs(x) < 1e-5) {
        // n(Omega) = 1/(beta Omega) - 1/2 + beta Omega / 12 + O(x^3)
        if (omega == 0.0) return 0.0; // J ~ Omega^2 kills the pole
        return J(omega) * (1.0 / x - 0.5 + x / 12.0);
    }
    return J(omega) * occupation(omega, beta, st);
}

double thermal_weight(const SpectralDensity& J, double omega, double beta, Statistics st,
                      double a) {
    const double jw = J(omega);
    if (jw == 0.0) return 0.0;
    const double x = beta * omega;
    if (st == Statistics::boson && std::abs(x) < 1e-5)
        return jw * (1.0 / x - 0.5 + x / 12.0) * std::exp(a * x);
    return jw * stat_weight(x, a, st);
}

double lamb_shift(const SpectralDensity& J, double omega0, const QuadratureSpec& spec) {
    if (J.is_zero()) return omega0;
    if (J.wide_band()) return omega0; // flat band: shift vanishes in the wide-band limit
    auto f = [&](double w) { return J(w) / (2.0 * kPi); };
    return omega0 + cauchy_principal_value(f, omega0, spec);
}

double spin_boson_frequency_shift(const SpectralDensity& J, double beta, double omega0,
                                  const QuadratureSpec& spec) {
    if (J.is_zero()) return omega0;
    validate_bosonic_density(J);
    double shift = 0.0;
    if (!J.wide_band()) {
        auto f = [&](double w) { return J(w) / (2.0 * kPi); };
        shift += cauchy_principal_value(f, omega0, spec);
    }
    // thermal term carries the 1/pi measure
    auto ft = [&](double w) { return weighted_occupation(J, w, beta, Statistics::boson) / kPi; };
    shift += cauchy_principal_value(ft, omega0, spec);
    return omega0 + shift;
}

} // namespace qregress
