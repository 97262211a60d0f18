#include "qregress/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace qregress {

namespace {

// Gauss-Kronrod 15/7 abscissae and weights on [-1, 1].
constexpr int kGK = 15;
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct Panel {
    double a, b;
    cd value;
    double err;
};

Panel gk15(const std::function<cd(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    cd resk = kWgk[7] * f(c);
    cd resg = kWg[3] * f(c);
    for (int j = 0; j < 7; ++j) {
        const cd f1 = f(c - h * kXgk[j]);
        const cd f2 = f(c + h * kXgk[j]);
        resk += kWgk[j] * (f1 + f2);
        if (j % 2 == 1) resg += kWg[j / 2] * (f1 + f2);
    }
    Panel p;
    p.a = a;
    p.b = b;
    p.value = resk * h;
    p.err = std::abs(resk - resg) * h;
    return p;
}

struct PanelWorse {
    bool operator()(const Panel& x, const Panel& y) const { return x.err < y.err; }
};

} // namespace

void QuadratureSpec::validate() const {
    if (!(omega_max > 0.0)) throw DomainError("QuadratureSpec: omega_max must be positive");
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
        throw DomainError("QuadratureSpec: tolerances must be positive");
    if (max_panels < 4) throw DomainError("QuadratureSpec: max_panels must be >= 4");
    if (!(min_panel_width_factor > 0.0))
        throw DomainError("QuadratureSpec: min_panel_width_factor must be positive");
}

QuadratureSpec QuadratureSpec::for_model(double omega0, double beta) {
    QuadratureSpec q;
    q.omega_max = 50.0 * std::max({std::abs(omega0), 1.0, 1.0 / beta});
    return q;
}

QuadResult integrate_adaptive(const std::function<cd(double)>& f, double a, double b,
                              const QuadratureSpec& spec, double max_width) {
    spec.validate();
    if (a == b) return {cd{0.0, 0.0}, 0.0};
    if (b < a) {
        QuadResult r = integrate_adaptive(f, b, a, spec, max_width);
        r.value = -r.value;
        return r;
    }

    const double span = b - a;
    int n0 = 4;
    if (max_width > 0.0) n0 = std::max(n0, static_cast<int>(std::ceil(span / max_width)));
    if (n0 > spec.max_panels)
        throw ConvergenceError("integrate_adaptive: oscillation-resolving panel count exceeds max_panels");

    std::priority_queue<Panel, std::vector<Panel>, PanelWorse> heap;
    cd total{0.0, 0.0};
    double toterr = 0.0;
    for (int i = 0; i < n0; ++i) {
        Panel p = gk15(f, a + span * i / n0, a + span * (i + 1) / n0);
        total += p.value;
        toterr += p.err;
        heap.push(p);
    }

    int n = n0;
    while (true) {
        const double tol = std::max(spec.abs_tol, spec.rel_tol * std::abs(total));
        if (toterr <= tol) break;
        if (n >= spec.max_panels)
            throw ConvergenceError("integrate_adaptive: error estimate " + std::to_string(toterr) +
                                   " above tolerance at max_panels");
        Panel worst = heap.top();
        heap.pop();
        total -= worst.value;
        toterr -= worst.err;
        const double mid = 0.5 * (worst.a + worst.b);
        Panel l = gk15(f, worst.a, mid);
        Panel r = gk15(f, mid, worst.b);
        total += l.value + r.value;
        toterr += l.err + r.err;
        heap.push(l);
        heap.push(r);
        ++n;
    }
    return {total, toterr};
}

double cauchy_principal_value(const std::function<double(double)>& f, double pole,
                              const QuadratureSpec& spec) {
    spec.validate();
    const double lo = -spec.omega_max;
    const double hi = spec.omega_max;
    if (!(pole > lo && pole < hi))
        throw DomainError("cauchy_principal_value: pole outside (-omega_max, omega_max)");

    const double scale = std::max(1.0, std::abs(pole));
    const double fp = f(pole);
    const double h = std::min(pole - lo, hi - pole);

    // On the symmetric window the f(pole)/(pole-Omega) part integrates to zero
    // exactly; the subtracted integrand has a removable singularity.
    auto subtracted = [&](double w) -> cd {
        const double d = pole - w;
        if (std::abs(d) < 1e-12 * scale) {
            const double eps = 1e-7 * scale;
            return cd{-(f(pole + eps) - f(pole - eps)) / (2.0 * eps), 0.0};
        }
        return cd{(f(w) - fp) / d, 0.0};
    };

    QuadResult left = integrate_adaptive(subtracted, pole - h, pole, spec);
    QuadResult right = integrate_adaptive(subtracted, pole, pole + h, spec);
    double result = left.value.real() + right.value.real();

    auto regular = [&](double w) -> cd { return cd{f(w) / (pole - w), 0.0}; };
    if (pole - h > lo) result += integrate_adaptive(regular, lo, pole - h, spec).value.real();
    if (pole + h < hi) result += integrate_adaptive(regular, pole + h, hi, spec).value.real();
    return result;
}

namespace {

void check_tail_decay(const std::function<cd(double)>& g, const QuadratureSpec& spec) {
    for (double s : {-1.0, -0.97, 0.97, 1.0}) {
        const double w = s * spec.omega_max;
        if (std::abs(g(w)) > spec.abs_tol)
            throw DecayError("fourier_integral: |g| = " + std::to_string(std::abs(g(w))) +
                             " above abs_tol near omega_max; widen omega_max");
    }
}

} // namespace

QuadResult fourier_integral(const std::function<cd(double)>& g, double tau,
                            const QuadratureSpec& spec) {
    spec.validate();
    if (!std::isfinite(tau)) throw DomainError("fourier_integral: tau must be finite");
    check_tail_decay(g, spec);

    const double pi = 3.14159265358979323846;
    double max_width = 0.0;
    if (std::abs(tau) > 1e-12)
        max_width = spec.min_panel_width_factor * pi / std::abs(tau);
    auto f = [&](double w) -> cd { return std::exp(cd{0.0, w * tau}) * g(w); };
    QuadResult r = integrate_adaptive(f, -spec.omega_max, spec.omega_max, spec, max_width);
    r.value /= 2.0 * pi;
    r.error /= 2.0 * pi;
    return r;
}

FourierGrid::FourierGrid(const std::function<cd(double)>& g, double tau_max,
                         const QuadratureSpec& spec) {
    spec.validate();
    const double pi = 3.14159265358979323846;
    const double span = 2.0 * spec.omega_max;
    double cap = span / 64.0;
    if (std::abs(tau_max) > 1e-12)
        cap = std::min(cap, spec.min_panel_width_factor * pi / std::abs(tau_max));
    int n = static_cast<int>(std::ceil(span / cap));
    if (n > spec.max_panels)
        throw ConvergenceError("FourierGrid: panel count exceeds max_panels");

    // Refine panel edges against the worst-case oscillation until the
    // Kronrod-Gauss discrepancy meets tolerance.
    std::vector<double> edges(n + 1);
    for (int i = 0; i <= n; ++i) edges[i] = -spec.omega_max + span * i / n;
    auto worst_f = [&](double w) -> cd { return std::exp(cd{0.0, w * tau_max}) * g(w); };
    for (int pass = 0; pass < 30; ++pass) {
        cd total{0.0, 0.0};
        double toterr = 0.0;
        std::vector<double> errs(edges.size() - 1);
        for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
            Panel p = gk15(worst_f, edges[i], edges[i + 1]);
            total += p.value;
            errs[i] = p.err;
            toterr += p.err;
        }
        const double tol = std::max(spec.abs_tol, spec.rel_tol * std::abs(total));
        if (toterr <= tol) break;
        if (static_cast<int>(edges.size()) - 1 >= spec.max_panels)
            throw ConvergenceError("FourierGrid: error above tolerance at max_panels");
        // split the worst third of panels
        std::vector<double> sorted = errs;
        std::sort(sorted.begin(), sorted.end());
        const double cut = sorted[sorted.size() * 2 / 3];
        std::vector<double> next;
        next.push_back(edges.front());
        for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
            if (errs[i] >= cut && errs[i] > tol / errs.size())
                next.push_back(0.5 * (edges[i] + edges[i + 1]));
            next.push_back(edges[i + 1]);
        }
        edges.swap(next);
    }

    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const double c = 0.5 * (edges[i] + edges[i + 1]);
        const double h = 0.5 * (edges[i + 1] - edges[i]);
        auto push = [&](double x, double wk, double wg) {
            nodes_.push_back(x);
            wk_.push_back(wk * h);
            wg_.push_back(wg * h);
        };
        push(c, kWgk[7], kWg[3]);
        for (int j = 0; j < 7; ++j) {
            const double wg = (j % 2 == 1) ? kWg[j / 2] : 0.0;
            push(c - h * kXgk[j], kWgk[j], wg);
            push(c + h * kXgk[j], kWgk[j], wg);
        }
    }
    gvals_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) gvals_[i] = g(nodes_[i]);
}

QuadResult FourierGrid::eval(double tau) const { return eval_continued(tau, 0.0); }

std::vector<QuadResult> FourierGrid::eval_uniform(double tau0, double dtau, int count) const {
    const double pi = 3.14159265358979323846;
    const std::size_t m = nodes_.size();
    std::vector<cd> ph(m), step(m);
    for (std::size_t i = 0; i < m; ++i) {
        ph[i] = std::exp(cd{0.0, nodes_[i] * tau0}) * gvals_[i];
        step[i] = std::exp(cd{0.0, nodes_[i] * dtau});
    }
    std::vector<QuadResult> out(std::max(count, 0));
    for (int j = 0; j < count; ++j) {
        cd sk{0.0, 0.0}, sg{0.0, 0.0};
        for (std::size_t i = 0; i < m; ++i) {
            sk += wk_[i] * ph[i];
            sg += wg_[i] * ph[i];
            ph[i] *= step[i];
        }
        out[j] = {sk / (2.0 * pi), std::abs(sk - sg) / (2.0 * pi)};
    }
    return out;
}

QuadResult FourierGrid::eval_continued(double tau_re, double exp_shift) const {
    const double pi = 3.14159265358979323846;
    cd sk{0.0, 0.0}, sg{0.0, 0.0};
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const double w = nodes_[i];
        cd ph = std::exp(cd{-exp_shift * w, w * tau_re});
        const cd v = ph * gvals_[i];
        sk += wk_[i] * v;
        sg += wg_[i] * v;
    }
    return {sk / (2.0 * pi), std::abs(sk - sg) / (2.0 * pi)};
}

} // namespace qregress
