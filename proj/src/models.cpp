#include "qregress/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>

namespace qregress {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fnv_digest(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void check_tau_grid(const std::vector<double>& tau) {
    if (tau.empty()) throw DomainError("tau grid must be nonempty");
    for (std::size_t i = 0; i < tau.size(); ++i) {
        if (!std::isfinite(tau[i])) throw DomainError("tau grid must be finite");
        if (i > 0 && !(tau[i] > tau[i - 1]))
            throw DomainError("tau grid must be strictly increasing");
    }
}

double tau_absmax(const std::vector<double>& tau) {
    return std::max(std::abs(tau.front()), std::abs(tau.back()));
}

std::string kind_name(TwoPointKind k) { return k == TwoPointKind::a_dag_a ? "a_dag_a" : "a_a_dag"; }
std::string kind_name(SBKind k) { return k == SBKind::plus_minus ? "plus_minus" : "minus_plus"; }

// true when the grid is evenly spaced, enabling the shared-phase batch eval
bool uniform_spacing(const std::vector<double>& tau, double& t0, double& dt) {
    if (tau.size() < 3) return false;
    t0 = tau.front();
    dt = tau[1] - tau[0];
    for (std::size_t i = 2; i < tau.size(); ++i)
        if (std::abs(tau[i] - tau[i - 1] - dt) > 1e-12 * std::max(1.0, std::abs(dt))) return false;
    return true;
}

void fill_from_grid(Correlator& c, const FourierGrid& grid) {
    double t0 = 0.0, dt = 0.0;
    if (uniform_spacing(c.tau, t0, dt)) {
        auto batch = grid.eval_uniform(t0, dt, static_cast<int>(c.tau.size()));
        for (std::size_t i = 0; i < c.tau.size(); ++i) {
            c.values[i] = batch[i].value;
            c.err[i] = batch[i].error;
        }
        return;
    }
    for (std::size_t i = 0; i < c.tau.size(); ++i) {
        QuadResult q = grid.eval(c.tau[i]);
        c.values[i] = q.value;
        c.err[i] = q.error;
    }
}

Correlator make_correlator(const std::vector<double>& tau, std::string model, std::string method,
                           std::string kind, std::string digest) {
    Correlator c;
    c.tau = tau;
    c.values.resize(tau.size());
    c.err.resize(tau.size(), 0.0);
    c.model = std::move(model);
    c.method = std::move(method);
    c.kind = std::move(kind);
    c.params_digest = std::move(digest);
    return c;
}

} // namespace

void BFParams::validate() const {
    if (!(beta > 0.0)) throw DomainError("BFParams: beta must be positive");
    quad.validate();
    if (stat == Statistics::boson) validate_bosonic_density(J);
    if (J(omega0) < 0.0) throw DomainError("BFParams: J(omega0) must be nonnegative");
}

std::string BFParams::digest() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "bf|%.17g|%.17g|%d|%d|%.17g|%.17g|%.17g", omega0, beta,
                  static_cast<int>(stat), static_cast<int>(J.kind()), J(omega0), quad.omega_max,
                  quad.rel_tol);
    return fnv_digest(buf);
}

void SBParams::validate() const {
    if (!(beta > 0.0)) throw DomainError("SBParams: beta must be positive");
    quad.validate();
    validate_bosonic_density(J);
}

std::string SBParams::digest() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "sb|%.17g|%.17g|%d|%.17g|%.17g|%.17g", omega0, beta,
                  static_cast<int>(J.kind()), J(omega0), quad.omega_max, quad.rel_tol);
    return fnv_digest(buf);
}

ComplexRate complex_rate(const BFParams& p) {
    p.validate();
    const double w0p = lamb_shift(p.J, p.omega0, p.quad);
    const double gamma = p.J(p.omega0);
    return {cd{gamma / 2.0, -w0p}, w0p, gamma};
}

ComplexRate sb_complex_rate(const SBParams& p) {
    p.validate();
    const double w0p = p.J.is_zero() ? p.omega0
                                     : spin_boson_frequency_shift(p.J, p.beta, p.omega0, p.quad);
    const double gamma = p.J(p.omega0);
    double re = gamma / 2.0;
    if (gamma > 0.0) re += gamma * occupation(p.omega0, p.beta, Statistics::boson);
    return {cd{re, -w0p}, w0p, gamma};
}

namespace {

// 1 / ((gamma/2)^2 + (Omega - omega0')^2) for the boson/fermion model,
// 1 / ((Re Gtilde)^2 + (Omega - omega0')^2) for the spin-boson model.
struct LorentzKernel {
    double half_rate;
    double center;
    double operator()(double w) const {
        const double d = w - center;
        return 1.0 / (half_rate * half_rate + d * d);
    }
};

LorentzKernel bf_kernel(const BFParams& p, const ComplexRate& r) {
    if (!(r.gamma > 0.0)) throw DomainError("correlator requires gamma = J(omega0) > 0");
    return {r.gamma / 2.0, r.omega0_prime};
}

} // namespace

double eq_occupation(const BFParams& p) {
    const ComplexRate r = complex_rate(p);
    const LorentzKernel L = bf_kernel(p, r);
    auto g = [&](double w) -> cd { return thermal_weight(p.J, w, p.beta, p.stat, 0.0) * L(w); };
    return fourier_integral(g, 0.0, p.quad).value.real();
}

double finite_time_occupation(const BFParams& p, double n0, double t) {
    if (t < 0.0) throw DomainError("finite_time_occupation: t must be nonnegative");
    const ComplexRate r = complex_rate(p);
    const LorentzKernel L = bf_kernel(p, r);
    const cd G = r.value;
    auto g = [&](double w) -> cd {
        const cd damp = 1.0 - std::exp(-(G + cd{0.0, w}) * t);
        return std::norm(damp) * thermal_weight(p.J, w, p.beta, p.stat, 0.0) * L(w);
    };
    return std::exp(-r.gamma * t) * n0 + fourier_integral(g, 0.0, p.quad).value.real();
}

Correlator mqrt_two_point_eq(const BFParams& p, TwoPointKind kind, const std::vector<double>& tau) {
    check_tau_grid(tau);
    const ComplexRate r = complex_rate(p);
    const LorentzKernel L = bf_kernel(p, r);
    const double a = (kind == TwoPointKind::a_dag_a) ? 0.0 : 1.0;
    auto g = [&](double w) -> cd { return thermal_weight(p.J, w, p.beta, p.stat, a) * L(w); };
    FourierGrid grid(g, tau_absmax(tau), p.quad);
    Correlator c = make_correlator(tau, "bf", "mqrt", kind_name(kind), p.digest());
    fill_from_grid(c, grid);
    return c;
}

Correlator sqrt_two_point_eq(const BFParams& p, TwoPointKind kind, const std::vector<double>& tau) {
    check_tau_grid(tau);
    const ComplexRate r = complex_rate(p);
    const LorentzKernel L = bf_kernel(p, r);
    const double a = (kind == TwoPointKind::a_dag_a) ? 0.0 : 1.0;
    auto g = [&](double w) -> cd { return thermal_weight(p.J, w, p.beta, p.stat, a) * L(w); };
    QuadResult w0 = fourier_integral(g, 0.0, p.quad);
    const cd slope{-r.gamma / 2.0, r.omega0_prime}; // e^{(i omega0' - gamma/2) tau}
    Correlator c = make_correlator(tau, "bf", "sqrt", kind_name(kind), p.digest());
    for (std::size_t i = 0; i < tau.size(); ++i) {
        c.values[i] = w0.value.real() * std::exp(slope * tau[i]);
        c.err[i] = w0.error;
    }
    return c;
}

Correlator mqrt_two_point_finite(const BFParams& p, double n0, double t,
                                 const std::vector<double>& tau) {
    check_tau_grid(tau);
    if (t < 0.0) throw DomainError("mqrt_two_point_finite: t must be nonnegative");
    const ComplexRate r = complex_rate(p);
    const double nt = finite_time_occupation(p, n0, t);
    const double neq = eq_occupation(p);
    Correlator eq = mqrt_two_point_eq(p, TwoPointKind::a_dag_a, tau);
    Correlator c = make_correlator(tau, "bf", "mqrt_finite", "a_dag_a", p.digest());
    for (std::size_t i = 0; i < tau.size(); ++i) {
        c.values[i] = std::exp(-r.value * tau[i]) * (nt - neq) + eq.values[i];
        c.err[i] = eq.err[i];
    }
    return c;
}

namespace {

struct NNParts {
    double n0w;      // n_eta(omega0)
    double comp0w;   // 1 - eta n_eta(omega0)
    double base;     // int dOmega/2pi F L  (the phase-free first bracket term)
    FourierGrid g_occ;   // F_eta(Omega) L(Omega)
    FourierGrid g_comp;  // (J - eta F) L
};

NNParts nn_parts(const BFParams& p, const ComplexRate& r, double taumax) {
    const LorentzKernel L = bf_kernel(p, r);
    auto gn = [&](double w) -> cd { return thermal_weight(p.J, w, p.beta, p.stat, 0.0) * L(w); };
    auto gc = [&](double w) -> cd { return thermal_weight(p.J, w, p.beta, p.stat, 1.0) * L(w); };
    FourierGrid grid_n(gn, taumax, p.quad);
    FourierGrid grid_c(gc, taumax, p.quad);
    const double n0w = occupation(p.omega0, p.beta, p.stat);
    const double comp0w = 1.0 - eta_of(p.stat) * n0w;
    const double base = grid_n.eval(0.0).value.real();
    return {n0w, comp0w, base, std::move(grid_n), std::move(grid_c)};
}

} // namespace

Correlator mqrt_nn_eq(const BFParams& p, const std::vector<double>& tau) {
    check_tau_grid(tau);
    const ComplexRate r = complex_rate(p);
    NNParts parts = nn_parts(p, r, tau_absmax(tau));
    Correlator c = make_correlator(tau, "bf", "mqrt", "nn", p.digest());
    for (std::size_t i = 0; i < tau.size(); ++i) {
        const double tv = tau[i];
        const cd ph = std::exp(cd{0.0, p.omega0 * tv});
        QuadResult t2 = parts.g_comp.eval(-tv);
        QuadResult t3 = parts.g_occ.eval(tv);
        c.values[i] = parts.n0w * parts.base + parts.n0w * ph * t2.value +
                      parts.comp0w * std::conj(ph) * t3.value;
        c.err[i] = t2.error + t3.error;
    }
    return c;
}

Correlator sqrt_nn_eq(const BFParams& p, const std::vector<double>& tau) {
    check_tau_grid(tau);
    const ComplexRate r = complex_rate(p);
    NNParts parts = nn_parts(p, r, tau_absmax(tau));
    const double R = parts.n0w * parts.base;
    // <NN>_inf from the mqrt value at tau = 0 (consistent O(lambda^2) weight)
    const cd nn_inf = parts.n0w * parts.base + parts.n0w * parts.g_comp.eval(0.0).value +
                      parts.comp0w * parts.g_occ.eval(0.0).value;
    Correlator c = make_correlator(tau, "bf", "sqrt", "nn", p.digest());
    for (std::size_t i = 0; i < tau.size(); ++i) {
        c.values[i] = (nn_inf - R) * std::exp(-r.gamma * tau[i]) + R;
        c.err[i] = 0.0;
    }
    return c;
}

SigmaTable::SigmaTable(const SpectralDensity& J, const QuadratureSpec& quad, int nodes) {
    if (nodes < 3) throw DomainError("SigmaTable: need at least 3 nodes");
    const double L = quad.omega_max;
    if (J.wide_band() || J.is_zero()) {
        core_lo_ = outer_lo_ = -L;
        core_dx_ = outer_dx_ = 2.0 * L / (nodes - 1);
        core_.assign(nodes, 0.0);
        outer_.assign(nodes, 0.0);
        return;
    }

    // shared density samples; the pole is removed by subtraction, so every
    // node reuses the same regular midpoint sum
    const int m = 1 << 15;
    const double dw = 2.0 * L / m;
    std::vector<double> js(m);
    for (int k = 0; k < m; ++k) js[k] = J(-L + (k + 0.5) * dw);

    auto pv_at = [&](double om) {
        const double j0 = J(om);
        double s = 0.0;
        for (int k = 0; k < m; ++k) {
            const double w = -L + (k + 0.5) * dw;
            const double d = om - w;
            if (std::abs(d) < 0.25 * dw) {
                // node sits on a sample: use the local slope instead
                const int kp = std::min(k + 1, m - 1), km = std::max(k - 1, 0);
                s -= (js[kp] - js[km]) / 2.0;
            } else {
                s += (js[k] - j0) / d * dw;
            }
        }
        s += j0 * std::log((L + om) / (L - om));
        return s / (2.0 * kPi);
    };

    // dense core, cell-centered
    const double C = std::min(20.0, L);
    const int cn = 16001;
    core_dx_ = 2.0 * C / cn;
    core_lo_ = -C + 0.5 * core_dx_;
    core_.resize(cn);
    for (int i = 0; i < cn; ++i) core_[i] = pv_at(core_lo_ + i * core_dx_);

    // coarse outer grid over the full range
    outer_dx_ = 2.0 * L / nodes;
    outer_lo_ = -L + 0.5 * outer_dx_;
    outer_.resize(nodes);
    for (int i = 0; i < nodes; ++i) outer_[i] = pv_at(outer_lo_ + i * outer_dx_);
}

namespace {

double interp_uniform(const std::vector<double>& v, double lo, double dx, double x) {
    const double u = (x - lo) / dx;
    if (u <= 0.0) return v.front();
    if (u >= static_cast<double>(v.size() - 1)) return v.back();
    const std::size_t i = static_cast<std::size_t>(u);
    const double t = u - static_cast<double>(i);
    return v[i] + t * (v[i + 1] - v[i]);
}

} // namespace

double SigmaTable::operator()(double omega) const {
    if (omega >= core_lo_ && omega <= core_lo_ + core_dx_ * (core_.size() - 1))
        return interp_uniform(core_, core_lo_, core_dx_, omega);
    return interp_uniform(outer_, outer_lo_, outer_dx_, omega);
}

Correlator exact_two_point_eq(const BFParams& p, TwoPointKind kind, const std::vector<double>& tau,
                              const std::shared_ptr<const SigmaTable>& sigma) {
    check_tau_grid(tau);
    p.validate();
    if (p.J.is_zero()) throw DomainError("exact_two_point_eq: J must be nonzero");
    const double a = (kind == TwoPointKind::a_dag_a) ? 0.0 : 1.0;
    auto g = [&](double w) -> cd {
        const double jw = p.J(w);
        if (jw == 0.0) return 0.0;
        const double d = w - p.omega0 - (*sigma)(w);
        const double denom = d * d + jw * jw / 4.0;
        return thermal_weight(p.J, w, p.beta, p.stat, a) / denom;
    };
    FourierGrid grid(g, tau_absmax(tau), p.quad);
    Correlator c = make_correlator(tau, "bf", "exact", kind_name(kind), p.digest());
    fill_from_grid(c, grid);
    return c;
}

Correlator exact_two_point_eq(const BFParams& p, TwoPointKind kind,
                              const std::vector<double>& tau) {
    auto sigma = std::make_shared<const SigmaTable>(p.J, p.quad);
    return exact_two_point_eq(p, kind, tau, sigma);
}

Correlator sb_mqrt_eq(const SBParams& p, SBKind kind, const std::vector<double>& tau) {
    check_tau_grid(tau);
    const ComplexRate r = sb_complex_rate(p);
    if (!(r.value.real() > 0.0)) throw DomainError("sb_mqrt_eq requires Re Gtilde > 0");
    const LorentzKernel L{r.value.real(), r.omega0_prime};
    const double a = (kind == SBKind::plus_minus) ? 0.0 : 1.0;
    auto g = [&](double w) -> cd {
        return thermal_weight(p.J, w, p.beta, Statistics::boson, a) * L(w);
    };
    FourierGrid grid(g, tau_absmax(tau), p.quad);
    Correlator c = make_correlator(tau, "spinboson", "mqrt", kind_name(kind), p.digest());
    fill_from_grid(c, grid);
    return c;
}

Correlator sb_sqrt_eq(const SBParams& p, SBKind kind, const std::vector<double>& tau) {
    check_tau_grid(tau);
    const ComplexRate r = sb_complex_rate(p);
    if (!(r.value.real() > 0.0)) throw DomainError("sb_sqrt_eq requires Re Gtilde > 0");
    const LorentzKernel L{r.value.real(), r.omega0_prime};
    const double a = (kind == SBKind::plus_minus) ? 0.0 : 1.0;
    auto g = [&](double w) -> cd {
        return thermal_weight(p.J, w, p.beta, Statistics::boson, a) * L(w);
    };
    QuadResult w0 = fourier_integral(g, 0.0, p.quad);
    Correlator c = make_correlator(tau, "spinboson", "sqrt", kind_name(kind), p.digest());
    for (std::size_t i = 0; i < tau.size(); ++i) {
        c.values[i] = w0.value.real() * std::exp(-r.value * tau[i]);
        c.err[i] = w0.error;
    }
    return c;
}

ThreePointEvaluator::ThreePointEvaluator(const BFParams& p, double tau_max)
    : p_(p), tau_max_(std::max(std::abs(tau_max), 1e-3)) {
    p_.validate();
    if (p_.stat != Statistics::boson)
        throw DomainError("three-point correlators are implemented for bosonic statistics");
    const ComplexRate r = complex_rate(p_);
    const LorentzKernel L = bf_kernel(p_, r);
    half_rate_ = L.half_rate;
    center_ = L.center;
    n0w_ = occupation(p_.omega0, p_.beta, Statistics::boson);
}

const FourierGrid& ThreePointEvaluator::grid_for(double a) const {
    auto it = grids_.find(a);
    if (it != grids_.end()) return it->second;
    const LorentzKernel L{half_rate_, center_};
    auto g = [this, a, L](double wq) -> cd {
        return thermal_weight(p_.J, wq, p_.beta, Statistics::boson, a) * L(wq);
    };
    return grids_.try_emplace(a, g, tau_max_, p_.quad).first->second;
}

// int dOmega/2pi e^{i Omega c} weight_a(Omega) L(Omega); Im c folds into the
// weight index so the sampled integrand stays in the thermal family
QuadResult ThreePointEvaluator::part(double a_base, cd c) const {
    const double a = a_base - c.imag() / p_.beta;
    return grid_for(a).eval(c.real());
}

QuadResult ThreePointEvaluator::eval(ThreePointOrdering ordering, cd u, cd v, cd w) const {
    const cd iw0{0.0, p_.omega0};
    QuadResult t1 = part(0.0, u);
    QuadResult t2, t3;
    cd c2, c3;
    if (ordering == ThreePointOrdering::N_right) {
        t2 = part(1.0, -w);
        c2 = n0w_ * std::exp(iw0 * v);
        t3 = part(0.0, v);
        c3 = (1.0 + n0w_) * std::exp(-iw0 * w);
    } else {
        t2 = part(0.0, -w);
        c2 = (1.0 + n0w_) * std::exp(iw0 * v);
        t3 = part(1.0, v);
        c3 = n0w_ * std::exp(-iw0 * w);
    }
    QuadResult out;
    out.value = n0w_ * t1.value + c2 * t2.value + c3 * t3.value;
    out.error = n0w_ * t1.error + std::abs(c2) * t2.error + std::abs(c3) * t3.error;
    return out;
}

cd three_point_mqrt_continued(const BFParams& p, ThreePointOrdering ordering, cd u, cd v, cd w) {
    const double taumax = std::max({std::abs(u.real()), std::abs(v.real()), std::abs(w.real())});
    return ThreePointEvaluator(p, taumax).eval(ordering, u, v, w).value;
}

cd three_point_mqrt_eq(const BFParams& p, double tau1, double tau2, ThreePointOrdering ordering) {
    return three_point_mqrt_continued(p, ordering, cd{tau1, 0.0}, cd{tau1 + tau2, 0.0},
                                      cd{tau2, 0.0});
}

} // namespace qregress
