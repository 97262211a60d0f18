#include "qregress/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>

namespace qregress {

namespace {

void check_grid(const std::vector<double>& tau) {
    if (tau.empty()) throw DomainError("tau grid must be nonempty");
    for (std::size_t i = 0; i < tau.size(); ++i) {
        if (!std::isfinite(tau[i])) throw DomainError("tau grid must be finite");
        if (i > 0 && !(tau[i] > tau[i - 1]))
            throw DomainError("tau grid must be strictly increasing");
    }
}

std::string grid_digest(const std::vector<double>& tau) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](double x) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(x));
        std::memcpy(&bits, &x, sizeof(bits));
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    for (double t : tau) mix(t);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct Kernel {
    double half_rate;
    double center;
    double operator()(double w) const {
        const double d = w - center;
        return 1.0 / (half_rate * half_rate + d * d);
    }
};

// the exact density-of-states kernel; empty sigma means Lorentzian
struct ExactKernel {
    const BFParams* p;
    std::shared_ptr<const SigmaTable> sigma;
    double operator()(double w) const {
        const double jw = p->J(w);
        if (jw == 0.0) return 0.0;
        const double d = w - p->omega0 - (*sigma)(w);
        return 1.0 / (d * d + jw * jw / 4.0);
    }
};

double kind_index(TwoPointKind kind) { return kind == TwoPointKind::a_dag_a ? 0.0 : 1.0; }
double kind_index(SBKind kind) { return kind == SBKind::plus_minus ? 0.0 : 1.0; }

const char* kind_label(TwoPointKind k) { return k == TwoPointKind::a_dag_a ? "a_dag_a" : "a_a_dag"; }

KMSReport assemble(const std::vector<cd>& c1, const std::vector<cd>& c2,
                   const std::vector<double>& errs, Method method, std::string pair,
                   const std::vector<double>& tau, double beta) {
    double maxc1 = 0.0, maxdiff = 0.0, maxerr = 0.0;
    for (std::size_t i = 0; i < c1.size(); ++i) {
        maxc1 = std::max(maxc1, std::abs(c1[i]));
        maxdiff = std::max(maxdiff, std::abs(c1[i] - c2[i]));
        maxerr = std::max(maxerr, errs[i]);
    }
    KMSReport rep;
    if (maxc1 > 0.0) {
        rep.residual = maxdiff / maxc1;
        rep.err = maxerr / maxc1;
    }
    rep.method = method_name(method);
    rep.pair = std::move(pair);
    rep.tau_digest = grid_digest(tau);
    rep.beta = beta;
    return rep;
}

} // namespace

const char* method_name(Method m) {
    switch (m) {
        case Method::sqrt: return "sqrt";
        case Method::mqrt: return "mqrt";
        case Method::exact: return "exact";
    }
    return "";
}

cd analytic_continuation_eval(const BFParams& p, Method method, TwoPointKind kind, double tau,
                              double s, const std::shared_ptr<const SigmaTable>& sigma) {
    p.validate();
    const ComplexRate r = complex_rate(p);
    if (!(r.gamma > 0.0)) throw DomainError("continuation requires gamma = J(omega0) > 0");
    const double a = kind_index(kind);

    if (method == Method::sqrt) {
        // the envelope is entire: continue it directly, the weight is tau-free
        const Kernel L{r.gamma / 2.0, r.omega0_prime};
        auto g = [&](double w) -> cd { return thermal_weight(p.J, w, p.beta, p.stat, a) * L(w); };
        const double W = fourier_integral(g, 0.0, p.quad).value.real();
        const cd slope{-r.gamma / 2.0, r.omega0_prime};
        return W * std::exp(slope * cd{tau, p.beta * s});
    }

    std::function<double(double)> K;
    if (method == Method::mqrt) {
        K = Kernel{r.gamma / 2.0, r.omega0_prime};
    } else {
        if (p.J.is_zero()) throw DomainError("exact continuation: J must be nonzero");
        auto sig = sigma ? sigma : std::make_shared<const SigmaTable>(p.J, p.quad);
        K = ExactKernel{&p, sig};
    }
    auto g = [&](double w) -> cd { return thermal_weight(p.J, w, p.beta, p.stat, a - s) * K(w); };
    return fourier_integral(g, tau, p.quad).value;
}

cd analytic_continuation_nn(const BFParams& p, Method method, double tau, double s) {
    p.validate();
    if (method == Method::exact)
        throw UnsupportedContinuation("no integrand form for an exact number correlator");
    const ComplexRate r = complex_rate(p);
    if (!(r.gamma > 0.0)) throw DomainError("continuation requires gamma = J(omega0) > 0");
    const Kernel L{r.gamma / 2.0, r.omega0_prime};
    const double n0 = occupation(p.omega0, p.beta, p.stat);
    const double c0 = 1.0 - eta_of(p.stat) * n0;
    auto gw = [&](double a) {
        return [&p, a, L](double w) -> cd {
            return thermal_weight(p.J, w, p.beta, p.stat, a) * L(w);
        };
    };
    const double base = fourier_integral(gw(0.0), 0.0, p.quad).value.real();

    if (method == Method::sqrt) {
        const cd nninf = n0 * base + n0 * fourier_integral(gw(1.0), 0.0, p.quad).value +
                         c0 * base;
        const double R = n0 * base;
        const cd taup{tau, p.beta * s};
        return (nninf - R) * std::exp(-r.gamma * taup) + R;
    }
    // mqrt at tau' = tau + i beta s: phase prefactors continue with omega0,
    // the Omega integrals through the weight index
    const cd ph = std::exp(cd{-p.omega0 * p.beta * s, p.omega0 * tau});
    const cd phm = std::exp(cd{p.omega0 * p.beta * s, -p.omega0 * tau});
    const cd gc_term = fourier_integral(gw(1.0 + s), -tau, p.quad).value;
    const cd gn_term = fourier_integral(gw(-s), tau, p.quad).value;
    return n0 * base + n0 * ph * gc_term + c0 * phm * gn_term;
}

cd analytic_continuation_eval(const SBParams& p, Method method, SBKind kind, double tau,
                              double s) {
    p.validate();
    if (method == Method::exact)
        throw UnsupportedContinuation("no exact closed form for the spin-boson correlators");
    const ComplexRate r = sb_complex_rate(p);
    if (!(r.value.real() > 0.0)) throw DomainError("continuation requires Re Gtilde > 0");
    const Kernel L{r.value.real(), r.omega0_prime};
    const double a = kind_index(kind);
    if (method == Method::sqrt) {
        auto g = [&](double w) -> cd {
            return thermal_weight(p.J, w, p.beta, Statistics::boson, a) * L(w);
        };
        const double W = fourier_integral(g, 0.0, p.quad).value.real();
        return W * std::exp(-r.value * cd{tau, p.beta * s});
    }
    auto g = [&](double w) -> cd {
        return thermal_weight(p.J, w, p.beta, Statistics::boson, a - s) * L(w);
    };
    return fourier_integral(g, tau, p.quad).value;
}

namespace {

// C1(tau) and C2(tau + i beta) for the (a_dag_a, a_a_dag) pair with a shared
// kernel; the continued a_a_dag weight index is 1 - 1 = 0
KMSReport pair_residual(const BFParams& p, Method method, const std::function<double(double)>& K,
                        const std::vector<double>& tau) {
    const double taumax = std::max(std::abs(tau.front()), std::abs(tau.back()));
    auto gw = [&](double a) {
        return [&p, a, &K](double w) -> cd { return thermal_weight(p.J, w, p.beta, p.stat, a) * K(w); };
    };
    std::vector<cd> c1(tau.size()), c2(tau.size());
    std::vector<double> errs(tau.size());

    if (method == Method::sqrt) {
        const ComplexRate r = complex_rate(p);
        QuadResult w1 = fourier_integral(gw(0.0), 0.0, p.quad);
        QuadResult w2 = fourier_integral(gw(1.0), 0.0, p.quad);
        const cd slope{-r.gamma / 2.0, r.omega0_prime};
        for (std::size_t i = 0; i < tau.size(); ++i) {
            const cd e1 = std::exp(slope * tau[i]);
            const cd e2 = std::exp(slope * cd{tau[i], p.beta});
            c1[i] = w1.value.real() * e1;
            c2[i] = w2.value.real() * e2;
            errs[i] = w1.error * std::abs(e1) + w2.error * std::abs(e2);
        }
    } else {
        FourierGrid g1(gw(0.0), taumax, p.quad);
        FourierGrid g2(gw(1.0 - 1.0), taumax, p.quad);
        for (std::size_t i = 0; i < tau.size(); ++i) {
            QuadResult q1 = g1.eval(tau[i]);
            QuadResult q2 = g2.eval(tau[i]);
            c1[i] = q1.value;
            c2[i] = q2.value;
            errs[i] = q1.error + q2.error;
        }
    }
    return assemble(c1, c2, errs, method, "a_dag_a/a_a_dag", tau, p.beta);
}

// number-correlator KMS: C(tau) against the same correlator continued to
// -tau - i beta
KMSReport nn_residual(const BFParams& p, Method method, const std::vector<double>& tau) {
    if (method == Method::exact)
        throw UnsupportedContinuation("no integrand form for an exact number correlator");
    const ComplexRate r = complex_rate(p);
    const Kernel L{r.gamma / 2.0, r.omega0_prime};
    const double taumax = std::max(std::abs(tau.front()), std::abs(tau.back()));
    auto gw = [&](double a) {
        return [&p, a, L](double w) -> cd {
            return thermal_weight(p.J, w, p.beta, p.stat, a) * L(w);
        };
    };
    const double n0 = occupation(p.omega0, p.beta, p.stat);
    const double c0 = 1.0 - eta_of(p.stat) * n0;
    const double up = std::exp(p.beta * p.omega0);
    const double down = std::exp(-p.beta * p.omega0);
    FourierGrid gn(gw(0.0), taumax, p.quad);
    FourierGrid gc(gw(1.0), taumax, p.quad);
    const double base = gn.eval(0.0).value.real();

    std::vector<cd> c1(tau.size()), c2(tau.size());
    std::vector<double> errs(tau.size());
    if (method == Method::sqrt) {
        const cd nninf = n0 * base + n0 * gc.eval(0.0).value + c0 * base;
        const double R = n0 * base;
        for (std::size_t i = 0; i < tau.size(); ++i) {
            c1[i] = (nninf - R) * std::exp(-r.gamma * tau[i]) + R;
            c2[i] = (nninf - R) * std::exp(-r.gamma * cd{-tau[i], -p.beta}) + R;
            errs[i] = 0.0;
        }
    } else {
        for (std::size_t i = 0; i < tau.size(); ++i) {
            const double t = tau[i];
            const cd ph = std::exp(cd{0.0, p.omega0 * t});
            QuadResult qc = gc.eval(-t);
            QuadResult qn = gn.eval(t);
            c1[i] = n0 * base + n0 * ph * qc.value + c0 * std::conj(ph) * qn.value;
            // at tau' = -tau - i beta the two oscillating terms swap roles:
            // each continued weight lands back on the other grid
            c2[i] = n0 * base + n0 * up * std::conj(ph) * qn.value +
                    c0 * down * ph * qc.value;
            errs[i] = (n0 + c0 * down) * qc.error + (c0 + n0 * up) * qn.error;
        }
    }
    return assemble(c1, c2, errs, method, "nn/nn", tau, p.beta);
}

} // namespace

KMSReport kms_residual(const BFParams& p, Method method, KMSPair pair,
                       const std::vector<double>& tau_grid) {
    check_grid(tau_grid);
    p.validate();
    const ComplexRate r = complex_rate(p);
    if (!(r.gamma > 0.0)) throw DomainError("kms_residual requires gamma = J(omega0) > 0");
    if (pair == KMSPair::nn_pair) return nn_residual(p, method, tau_grid);
    if (method == Method::exact) {
        auto sigma = std::make_shared<const SigmaTable>(p.J, p.quad);
        return pair_residual(p, method, ExactKernel{&p, sigma}, tau_grid);
    }
    return pair_residual(p, method, Kernel{r.gamma / 2.0, r.omega0_prime}, tau_grid);
}

KMSReport kms_residual(const SBParams& p, Method method, const std::vector<double>& tau_grid) {
    check_grid(tau_grid);
    p.validate();
    if (method == Method::exact)
        throw UnsupportedContinuation("no exact closed form for the spin-boson correlators");
    const ComplexRate r = sb_complex_rate(p);
    if (!(r.value.real() > 0.0)) throw DomainError("kms_residual requires Re Gtilde > 0");
    const Kernel L{r.value.real(), r.omega0_prime};
    const double taumax = std::max(std::abs(tau_grid.front()), std::abs(tau_grid.back()));
    auto gw = [&](double a) {
        return [&p, a, L](double w) -> cd {
            return thermal_weight(p.J, w, p.beta, Statistics::boson, a) * L(w);
        };
    };
    std::vector<cd> c1(tau_grid.size()), c2(tau_grid.size());
    std::vector<double> errs(tau_grid.size());
    if (method == Method::sqrt) {
        QuadResult w1 = fourier_integral(gw(0.0), 0.0, p.quad);
        QuadResult w2 = fourier_integral(gw(1.0), 0.0, p.quad);
        for (std::size_t i = 0; i < tau_grid.size(); ++i) {
            const cd e1 = std::exp(-r.value * tau_grid[i]);
            const cd e2 = std::exp(-r.value * cd{tau_grid[i], p.beta});
            c1[i] = w1.value.real() * e1;
            c2[i] = w2.value.real() * e2;
            errs[i] = w1.error * std::abs(e1) + w2.error * std::abs(e2);
        }
    } else {
        FourierGrid g1(gw(0.0), taumax, p.quad);
        FourierGrid g2(gw(1.0 - 1.0), taumax, p.quad);
        for (std::size_t i = 0; i < tau_grid.size(); ++i) {
            QuadResult q1 = g1.eval(tau_grid[i]);
            QuadResult q2 = g2.eval(tau_grid[i]);
            c1[i] = q1.value;
            c2[i] = q2.value;
            errs[i] = q1.error + q2.error;
        }
    }
    return assemble(c1, c2, errs, method, "plus_minus/minus_plus", tau_grid, p.beta);
}

std::vector<KMSReport> three_point_kms_check(const BFParams& p,
                                             const std::vector<double>& tau1_grid,
                                             const std::vector<double>& tau2_grid) {
    check_grid(tau1_grid);
    check_grid(tau2_grid);
    const double t1max = std::max(std::abs(tau1_grid.front()), std::abs(tau1_grid.back()));
    const double t2max = std::max(std::abs(tau2_grid.front()), std::abs(tau2_grid.back()));
    ThreePointEvaluator ev(p, t1max + t2max);
    const cd ib{0.0, p.beta};

    struct Accum {
        double maxl = 0.0, maxdiff = 0.0, maxerr = 0.0;
    };
    Accum acc[4];
    for (double t1 : tau1_grid) {
        for (double t2 : tau2_grid) {
            const cd u{t1, 0.0}, v{t1 + t2, 0.0}, w{t2, 0.0};
            // LHS shifts one or both of a^dag, a downward; RHS moves N instead
            const QuadResult lhs[4] = {
                ev.eval(ThreePointOrdering::N_right, u, v, w),
                ev.eval(ThreePointOrdering::N_right, u + ib, v, w - ib),
                ev.eval(ThreePointOrdering::N_right, u - ib, v - ib, w),
                ev.eval(ThreePointOrdering::N_right, u, v - ib, w - ib),
            };
            const QuadResult rhs[4] = {
                ev.eval(ThreePointOrdering::N_left, u, v + ib, w + ib),
                ev.eval(ThreePointOrdering::N_left, u + ib, v + ib, w),
                ev.eval(ThreePointOrdering::N_left, u - ib, v, w + ib),
                ev.eval(ThreePointOrdering::N_left, u, v, w),
            };
            for (int k = 0; k < 4; ++k) {
                acc[k].maxl = std::max(acc[k].maxl, std::abs(lhs[k].value));
                acc[k].maxdiff = std::max(acc[k].maxdiff, std::abs(lhs[k].value - rhs[k].value));
                acc[k].maxerr = std::max(acc[k].maxerr, lhs[k].error + rhs[k].error);
            }
        }
    }

    std::vector<double> both = tau1_grid;
    both.insert(both.end(), tau2_grid.begin(), tau2_grid.end());
    const std::string digest = grid_digest(both);
    std::vector<KMSReport> out(4);
    for (int k = 0; k < 4; ++k) {
        if (acc[k].maxl > 0.0) {
            out[k].residual = acc[k].maxdiff / acc[k].maxl;
            out[k].err = acc[k].maxerr / acc[k].maxl;
        }
        out[k].method = "mqrt";
        out[k].pair = "three_point_relation_" + std::to_string(k + 1);
        out[k].tau_digest = digest;
        out[k].beta = p.beta;
    }
    return out;
}

double deviation_metric(const Correlator& c, const Correlator& ref, double tau_f) {
    if (!(tau_f > 0.0)) throw DomainError("deviation_metric: tau_f must be positive");
    if (c.tau.size() != ref.tau.size() || c.tau.size() < 2)
        throw GridMismatch("deviation_metric: correlators must share a grid of >= 2 points");
    for (std::size_t i = 0; i < c.tau.size(); ++i)
        if (c.tau[i] != ref.tau[i])
            throw GridMismatch("deviation_metric: correlators must share a grid");
    const auto& tau = c.tau;
    if (tau.front() > 1e-12 || tau.back() < tau_f * (1.0 - 1e-12))
        throw GridMismatch("deviation_metric: grid must cover [0, tau_f]");

    auto dist = [&](std::size_t i) {
        const cd d = ref.values[i] - c.values[i];
        return std::abs(d.real()) + std::abs(d.imag());
    };
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < tau.size(); ++i) {
        double a = tau[i], b = tau[i + 1];
        if (b <= 0.0 || a >= tau_f) continue;
        double fa = dist(i), fb = dist(i + 1);
        // clip the interval to [0, tau_f], interpolating the integrand
        if (a < 0.0) {
            fa = fa + (0.0 - a) / (b - a) * (fb - fa);
            a = 0.0;
        }
        if (b > tau_f) {
            fb = dist(i) + (tau_f - tau[i]) / (tau[i + 1] - tau[i]) * (dist(i + 1) - dist(i));
            b = tau_f;
        }
        acc += 0.5 * (fa + fb) * (b - a);
    }
    return acc / tau_f;
}

std::vector<double> default_temperature_grid() {
    std::vector<double> g(8);
    for (int i = 0; i < 8; ++i) g[i] = 0.5 + (4.0 - 0.5) * i / 7.0;
    return g;
}

std::vector<double> default_delta_grid() {
    std::vector<double> g(8);
    for (int i = 0; i < 8; ++i) g[i] = 0.02 + (0.2 - 0.02) * i / 7.0;
    return g;
}

QuadratureSpec sweep_quadrature() {
    QuadratureSpec q;
    q.omega_max = 200.0;
    q.max_panels = 40000;
    q.rel_tol = 1e-7;
    return q;
}

SweepTable sweep_d(Statistics stat, const std::vector<double>& T_grid,
                   const std::vector<double>& delta_grid, const QuadratureSpec& quad,
                   int tau_points) {
    if (T_grid.empty() || delta_grid.empty()) throw DomainError("sweep_d: grids must be nonempty");
    if (tau_points < 2) throw DomainError("sweep_d: need at least 2 tau points");
    SweepTable table;
    table.T_grid = T_grid;
    table.delta_grid = delta_grid;
    std::map<double, std::shared_ptr<const SigmaTable>> sigma_cache;

    for (double T : T_grid) {
        for (double delta : delta_grid) {
            SweepRow row;
            row.T = T;
            row.delta = delta;
            row.tau_f = 1.0 / delta;
            try {
                if (!(T > 0.0) || !(delta > 0.0))
                    throw DomainError("sweep_d: T and delta must be positive");
                BFParams p{1.0, 1.0 / T, stat, SpectralDensity::rational_quartic(delta), quad};
                std::vector<double> tau(tau_points);
                for (int i = 0; i < tau_points; ++i)
                    tau[i] = row.tau_f * i / (tau_points - 1);
                auto it = sigma_cache.find(delta);
                if (it == sigma_cache.end())
                    it = sigma_cache.emplace(delta,
                                             std::make_shared<const SigmaTable>(p.J, quad)).first;
                Correlator ex = exact_two_point_eq(p, TwoPointKind::a_dag_a, tau, it->second);
                Correlator mq = mqrt_two_point_eq(p, TwoPointKind::a_dag_a, tau);
                Correlator sq = sqrt_two_point_eq(p, TwoPointKind::a_dag_a, tau);
                row.D_mqrt = deviation_metric(mq, ex, row.tau_f);
                row.D_sqrt = deviation_metric(sq, ex, row.tau_f);
            } catch (const std::exception& e) {
                row.D_mqrt = row.D_sqrt = std::nan("");
                row.error = e.what();
            }
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

} // namespace qregress
