#include "qregress/engine.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <functional>
#include <map>
#include <memory>
#include <unordered_map>
#include <unsupported/Eigen/MatrixFunctions>

#include <lapacke.h>

namespace qregress {

namespace {

constexpr double kPi = 3.14159265358979323846;

Vector vec(const Matrix& X) { return Eigen::Map<const Vector>(X.data(), X.size()); }

Matrix unvec(const Vector& v, int d) { return Eigen::Map<const Matrix>(v.data(), d, d); }

Matrix kron(const Matrix& A, const Matrix& B) {
    Matrix K(A.rows() * B.rows(), A.cols() * B.cols());
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j)
            K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return K;
}

// superoperator for X -> AXB on column-major vectorized operators
Matrix sandwich(const Matrix& A, const Matrix& B) { return kron(B.transpose(), A); }

bool is_inf(double t) { return std::isinf(t); }

// (e^{z t} - 1)/z, with the t -> infinity limit -1/z for Re z < 0.
cd ramp(cd z, double t) {
    if (is_inf(t)) {
        if (z.real() >= -1e-14) throw UnsupportedCorrelator("undamped sector at t = infinity");
        return -1.0 / z;
    }
    if (std::abs(z) * t < 1e-8) return t * (1.0 + 0.5 * z * t);
    return (std::exp(z * t) - 1.0) / z;
}

bool dense_eig(const Matrix& M, Matrix& V, Vector& vals) {
    const lapack_int n = static_cast<lapack_int>(M.rows());
    Matrix A = M;
    V.resize(n, n);
    vals.resize(n);
    const lapack_int info = LAPACKE_zgeev(
        LAPACK_COL_MAJOR, 'N', 'V', n, reinterpret_cast<lapack_complex_double*>(A.data()), n,
        reinterpret_cast<lapack_complex_double*>(vals.data()), nullptr, n,
        reinterpret_cast<lapack_complex_double*>(V.data()), n);
    return info == 0;
}

double bath_F(const SystemSpec& spec, double w) {
    return weighted_occupation(spec.J, w, spec.beta, Statistics::boson);
}

double bath_JF(const SystemSpec& spec, double w) { return spec.J(w) + bath_F(spec, w); }

} // namespace

void SystemSpec::validate() const {
    const int d = dim();
    if (d < 2) throw UnsupportedSpec("SystemSpec: dim must be >= 2");
    if (d * d > 4096) throw UnsupportedSpec("SystemSpec: d^2 exceeds 4096");
    if (H.rows() != H.cols() || S.rows() != d || S.cols() != d)
        throw UnsupportedSpec("SystemSpec: H and S must be square of equal size");
    const double scale = std::max(1.0, H.norm());
    if ((H - H.adjoint()).norm() > 1e-12 * scale)
        throw UnsupportedSpec("SystemSpec: H must be Hermitian");
    if (!(beta > 0.0)) throw UnsupportedSpec("SystemSpec: beta must be positive");
    quad.validate();
    if (!J.is_zero()) validate_bosonic_density(J);
}

Matrix BohrDecomposition::reconstruct() const {
    if (components.empty()) return Matrix();
    Matrix X = Matrix::Zero(components[0].X.rows(), components[0].X.cols());
    for (const auto& c : components) X += c.X;
    return X;
}

BohrDecomposition bohr_decompose(const Matrix& H, const Matrix& X, double grouping_tol) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    if (es.info() != Eigen::Success) throw UnsupportedSpec("bohr_decompose: eigensolver failed");
    const Eigen::VectorXd E = es.eigenvalues();
    const Matrix U = es.eigenvectors();
    const int d = static_cast<int>(E.size());
    const double span = std::max(E(d - 1) - E(0), 1e-300);
    const double tol = grouping_tol * span;

    BohrDecomposition out;
    for (int i = 1; i < d; ++i)
        if (E(i) - E(i - 1) > tol && E(i) - E(i - 1) < 10.0 * tol) out.degeneracy_warning = true;

    const Matrix Xp = U.adjoint() * X * U; // X in the energy eigenbasis
    std::map<long long, std::pair<double, Matrix>> groups;
    for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
            if (std::abs(Xp(a, b)) < 1e-300) continue;
            const double omega = E(b) - E(a);
            const long long key = llround(omega / std::max(tol, 1e-14));
            auto it = groups.find(key);
            if (it == groups.end())
                it = groups.emplace(key, std::make_pair(omega, Matrix::Zero(d, d).eval())).first;
            it->second.second(a, b) += Xp(a, b);
        }
    }
    for (auto& [key, g] : groups) {
        BohrComponent c;
        c.omega = g.first;
        c.X = U * g.second * U.adjoint();
        if (c.X.norm() > 1e-13 * std::max(1.0, X.norm())) out.components.push_back(std::move(c));
    }
    std::sort(out.components.begin(), out.components.end(),
              [](const BohrComponent& a, const BohrComponent& b) { return a.omega < b.omega; });
    return out;
}

AdjointGenerator build_adjoint_generator(const SystemSpec& spec) {
    spec.validate();
    const int d = spec.dim();
    const int dd = d * d;

    AdjointGenerator gen;
    gen.dim = d;
    gen.lamb_shift_H = Matrix::Zero(d, d);
    Matrix Mdis = Matrix::Zero(dd, dd);

    BohrDecomposition sdec = bohr_decompose(spec.H, spec.S);
    const Matrix I = Matrix::Identity(d, d);
    for (const auto& comp : sdec.components) {
        const double w = comp.omega;
        if (std::abs(w) < 1e-12 * std::max(1.0, spec.H.norm())) {
            if (spec.J(0.0) != 0.0)
                throw UnsupportedSpec("coupling operator has a zero-frequency component with "
                                      "nonvanishing spectral density");
            continue;
        }
        if (spec.J.is_zero()) continue;
        const double F = bath_F(spec, w);
        const double rate_down = spec.J(w) + F; // J (1 + n)
        const double rate_up = F;               // J n
        const Matrix& L = comp.X;
        const Matrix Ld = L.adjoint();
        auto add_channel = [&](const Matrix& A, double rate) {
            // rate * (A^dag X A - 1/2 {A^dag A, X})
            const Matrix Ad = A.adjoint();
            const Matrix AdA = Ad * A;
            Mdis += rate * (sandwich(Ad, A) - 0.5 * (sandwich(AdA, I) + sandwich(I, AdA)));
        };
        add_channel(L, rate_down);
        add_channel(Ld, rate_up);
        gen.rates.push_back({w, rate_down, L});
        gen.rates.push_back({-w, rate_up, Ld});

        auto fdown = [&](double omega) { return bath_JF(spec, omega) / (2.0 * kPi); };
        auto fup = [&](double omega) { return bath_F(spec, omega) / (2.0 * kPi); };
        const double shift_down = cauchy_principal_value(fdown, w, spec.quad);
        const double shift_up = cauchy_principal_value(fup, w, spec.quad);
        gen.lamb_shift_H += shift_down * (Ld * L) - shift_up * (L * Ld);
    }

    const Matrix Heff = spec.H + gen.lamb_shift_H;
    gen.M = cd{0.0, 1.0} * (sandwich(Heff, I) - sandwich(I, Heff)) + Mdis;

    // The raw generator has exponentially ill-conditioned eigenvectors at
    // large dimension (thermally graded sectors). Two exact similarities fix
    // the conditioning: rotate into the eigenbasis of H, where the KMS weight
    // is diagonal, and rescale by its fourth root. For a secular generator
    // the result is normal, so its eigenvector basis is well conditioned.
    Eigen::SelfAdjointEigenSolver<Matrix> hes(spec.H);
    gen.ubasis = hes.eigenvectors();
    const Eigen::VectorXd E = hes.eigenvalues();
    const double Emin = E.minCoeff();
    gen.bal.resize(dd);
    for (int c = 0; c < d; ++c)
        for (int r = 0; r < d; ++r) {
            const double expo =
                std::min(300.0, 0.25 * spec.beta * (E(r) + E(c) - 2.0 * Emin));
            gen.bal(r + d * c) = std::exp(expo);
        }
    const Matrix T = sandwich(Matrix(gen.ubasis.adjoint()), gen.ubasis);     // X -> U^dag X U
    const Matrix Tinv = sandwich(gen.ubasis, Matrix(gen.ubasis.adjoint())); // X -> U X U^dag
    Matrix Mb = T * gen.M * Tinv;
    for (int i = 0; i < dd; ++i)
        for (int j = 0; j < dd; ++j) Mb(i, j) *= gen.bal(j).real() / gen.bal(i).real();

    // the balanced generator usually decouples into sparsity blocks
    // (coherence sectors); eigendecomposing per block is faster and avoids
    // mixing disconnected sectors through roundoff
    const double cut = 1e-14 * Mb.cwiseAbs().maxCoeff();
    std::vector<int> parent(dd);
    for (int i = 0; i < dd; ++i) parent[i] = i;
    std::function<int(int)> find = [&](int i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (int i = 0; i < dd; ++i)
        for (int j = i + 1; j < dd; ++j)
            if (std::abs(Mb(i, j)) > cut || std::abs(Mb(j, i)) > cut) parent[find(j)] = find(i);
    std::map<int, std::vector<int>> blocks;
    for (int i = 0; i < dd; ++i) blocks[find(i)].push_back(i);

    gen.eigvecs = Matrix::Zero(dd, dd);
    gen.eigvals.resize(dd);
    Matrix B = Matrix::Zero(dd, dd); // block-masked balanced generator
    bool solved = true;
    int col = 0;
    for (const auto& [root, members] : blocks) {
        const int m = static_cast<int>(members.size());
        Matrix sub(m, m);
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < m; ++c) {
                sub(r, c) = Mb(members[r], members[c]);
                B(members[r], members[c]) = sub(r, c);
            }
        Matrix V;
        Vector vals;
        if (!dense_eig(sub, V, vals)) {
            solved = false;
            break;
        }
        for (int k = 0; k < m; ++k) {
            gen.eigvals(col + k) = vals(k);
            for (int r = 0; r < m; ++r) gen.eigvecs(members[r], col + k) = V(r, k);
        }
        col += m;
    }

    if (solved) {
        gen.vlu = Eigen::PartialPivLU<Matrix>(gen.eigvecs);
        // the accuracy check lives in balanced coordinates, where the
        // eigenvector basis is well conditioned
        const Matrix R =
            gen.eigvecs * gen.eigvals.asDiagonal() * gen.vlu.solve(Matrix::Identity(dd, dd));
        gen.eig_ok = (R - B).norm() <= 1e-8 * std::max(1.0, B.norm());
    }
    return gen;
}

std::vector<AdjointGenerator::Component> AdjointGenerator::decompose(const Matrix& X,
                                                                     double drop_tol) const {
    if (!eig_ok)
        throw UnsupportedCorrelator("generator eigendecomposition unavailable for sector split");
    const Matrix Xb = ubasis.adjoint() * X * ubasis;
    const Vector c = vlu.solve((vec(Xb).array() / bal.array()).matrix());
    std::vector<Component> out;
    const double scale = std::max(1e-300, X.norm());
    for (int s = 0; s < c.size(); ++s) {
        const Vector column = (bal.array() * eigvecs.col(s).array()).matrix();
        if (std::abs(c(s)) * column.norm() <= drop_tol * scale) continue;
        const Matrix comp = ubasis * unvec(c(s) * column, dim) * ubasis.adjoint();
        out.push_back({eigvals(s), comp});
    }
    return out;
}

Matrix evolve_one_point(const AdjointGenerator& gen, const Matrix& X0, double t) {
    if (t < 0.0) throw DomainError("evolve_one_point: t must be nonnegative");
    if (gen.eig_ok) {
        const Matrix Xb = gen.ubasis.adjoint() * X0 * gen.ubasis;
        Vector c = gen.vlu.solve((vec(Xb).array() / gen.bal.array()).matrix());
        for (int s = 0; s < c.size(); ++s) c(s) *= std::exp(gen.eigvals(s) * t);
        const Matrix Yb =
            unvec((gen.bal.array() * (gen.eigvecs * c).array()).matrix(), gen.dim);
        return gen.ubasis * Yb * gen.ubasis.adjoint();
    }
    const Matrix E = (gen.M * t).exp(); // scaling-and-squaring fallback
    return unvec(E * vec(X0), gen.dim);
}

Matrix equal_time_two_point(const SystemSpec& spec, const AdjointGenerator& gen, const Matrix& A,
                            const Matrix& O, double t) {
    const int d = spec.dim();
    const double scale2 =
        std::max({1.0, A.norm(), O.norm()}) * std::max(1.0, spec.S.norm());

    auto acomp = gen.decompose(A);
    auto ocomp = gen.decompose(O);

    auto limit_factor = [](cd lam) -> cd {
        if (lam.real() < -1e-14) return 0.0;
        if (std::abs(lam) <= 1e-12) return 1.0;
        throw UnsupportedCorrelator("oscillatory sector has no t = infinity limit");
    };

    Matrix result = Matrix::Zero(d, d);
    for (const auto& as : acomp) {
        for (const auto& os : ocomp) {
            if (is_inf(t)) {
                if (as.X.norm() * os.X.norm() <= 1e-13 * scale2) continue;
                const cd f = limit_factor(as.lambda) * limit_factor(os.lambda);
                if (std::abs(f) > 0.0) result += f * (as.X * os.X);
            } else {
                result += std::exp((as.lambda + os.lambda) * t) * (as.X * os.X);
            }
        }
    }

    if (!spec.J.is_zero()) {
        const Matrix S = spec.S;
        const Matrix Sd = S.adjoint();
        for (const auto& as : acomp) {
            const Matrix K1f = as.X * S - S * as.X;   // [A_s, S]
            const Matrix K1c = as.X * Sd - Sd * as.X; // [A_s, S^dag]
            const bool use_f = K1f.norm() > 1e-13 * scale2;
            const bool use_c = K1c.norm() > 1e-13 * scale2;
            if (!use_f && !use_c) continue;
            for (const auto& os : ocomp) {
                const Matrix K2f = Sd * os.X - os.X * Sd; // [S^dag, O_r]
                const Matrix K2c = S * os.X - os.X * S;   // [S, O_r]
                if (use_f && K2f.norm() > 1e-13 * scale2) {
                    auto g = [&](double w) -> cd {
                        const double F = bath_F(spec, w);
                        if (F == 0.0) return 0.0;
                        return F * ramp(as.lambda - cd{0.0, w}, t) *
                               ramp(os.lambda + cd{0.0, w}, t);
                    };
                    const cd q =
                        integrate_adaptive(g, -spec.quad.omega_max, spec.quad.omega_max, spec.quad)
                            .value /
                        (2.0 * kPi);
                    result += q * (K1f * K2f);
                }
                if (use_c && K2c.norm() > 1e-13 * scale2) {
                    auto g = [&](double w) -> cd {
                        const double JF = bath_JF(spec, w);
                        if (JF == 0.0) return 0.0;
                        return JF * ramp(as.lambda + cd{0.0, w}, t) *
                               ramp(os.lambda - cd{0.0, w}, t);
                    };
                    const cd q =
                        integrate_adaptive(g, -spec.quad.omega_max, spec.quad.omega_max, spec.quad)
                            .value /
                        (2.0 * kPi);
                    result += q * (K1c * K2c);
                }
            }
        }
    }
    return result;
}

namespace {

// Shared cache of resolvent-weighted Fourier grids, keyed by the sector
// resolvent parameter z and the bath-weight kind.
class GridPool {
public:
    GridPool(const SystemSpec& spec, double tau_max) : spec_(spec), tau_max_(tau_max) {}

    std::size_t get(cd z, bool first_kind) {
        for (std::size_t i = 0; i < entries_.size(); ++i)
            if (std::abs(entries_[i]->z - z) < 1e-12 && entries_[i]->first == first_kind) return i;
        auto e = std::make_unique<Entry>();
        e->z = z;
        e->first = first_kind;
        const SystemSpec& spec = spec_;
        std::function<cd(double)> g;
        if (first_kind) {
            g = [&spec, z](double w) -> cd {
                const double F = bath_F(spec, w);
                if (F == 0.0) return 0.0;
                return F / (-z - cd{0.0, w});
            };
        } else {
            g = [&spec, z](double w) -> cd {
                const double JF = bath_JF(spec, w);
                if (JF == 0.0) return 0.0;
                return JF / (-z + cd{0.0, w});
            };
        }
        e->grid = std::make_unique<FourierGrid>(g, tau_max_, spec_.quad);
        entries_.push_back(std::move(e));
        return entries_.size() - 1;
    }

    // first kind carries e^{+i Omega tau}, second kind e^{-i Omega tau}
    cd eval(std::size_t idx, double tau) {
        Entry& e = *entries_[idx];
        auto it = e.cache.find(tau);
        if (it != e.cache.end()) return it->second;
        const cd v = e.grid->eval(e.first ? tau : -tau).value;
        e.cache.emplace(tau, v);
        return v;
    }

private:
    struct Entry {
        cd z;
        bool first;
        std::unique_ptr<FourierGrid> grid;
        std::unordered_map<double, cd> cache;
    };
    const SystemSpec& spec_;
    double tau_max_;
    std::vector<std::unique_ptr<Entry>> entries_;
};

// Term list for the two non-homogeneous driving terms of one A-component.
// With a state supplied, terms are reduced to their traces against it.
class CorrectionEvaluator {
public:
    CorrectionEvaluator(const SystemSpec& spec, const AdjointGenerator& gen, const Matrix& A,
                        const Matrix& O, double t, GridPool& pool, const Matrix* rho = nullptr)
        : dim_(spec.dim()), pool_(&pool) {
        if (spec.J.is_zero()) return;
        const double scale2 =
            std::max({1.0, A.norm(), O.norm()}) * std::max(1.0, spec.S.norm());

        BohrDecomposition adec = bohr_decompose(spec.H, A);
        BohrDecomposition sdec = bohr_decompose(spec.H, spec.S);
        BohrDecomposition odec = bohr_decompose(spec.H, O);
        const double ftol = 1e-9 * std::max(1.0, spec.H.norm());

        struct OSector {
            double omega_l;
            cd lambda;
            Matrix X;
        };
        std::vector<OSector> osec;
        for (const auto& ol : odec.components)
            for (const auto& c : gen.decompose(ol.X)) osec.push_back({ol.omega, c.lambda, c.X});

        auto add_terms = [&](bool first_kind) {
            for (const auto& aj : adec.components) {
                for (const auto& sm : sdec.components) {
                    const Matrix Sm = first_kind ? sm.X : Matrix(sm.X.adjoint());
                    const Matrix KA = aj.X * Sm - Sm * aj.X;
                    if (KA.norm() <= 1e-13 * scale2) continue;
                    const double p1 =
                        first_kind ? -(aj.omega + sm.omega) : -(aj.omega - sm.omega);
                    for (const auto& sn : sdec.components) {
                        const Matrix Sn = first_kind ? Matrix(sn.X.adjoint()) : sn.X;
                        for (const auto& ol : osec) {
                            const Matrix KO = Sn * ol.X - ol.X * Sn;
                            if (KO.norm() <= 1e-13 * scale2) continue;
                            const double wln = first_kind ? ol.omega_l - sn.omega
                                                          : ol.omega_l + sn.omega;
                            if (is_inf(t) && std::abs(p1 - wln) > ftol) continue;
                            Matrix coeff = KA * KO;
                            cd weight{0.0, 0.0};
                            if (rho) {
                                weight = (*rho * coeff).trace();
                                if (std::abs(weight) <= 1e-15 * scale2 * scale2) continue;
                            }
                            if (ol.lambda.real() >= -1e-14)
                                throw UnsupportedCorrelator(
                                    "stationary sector resolvent in correction term");
                            Term term;
                            term.first_kind = first_kind;
                            term.tau_freq = p1;
                            term.t_phase =
                                is_inf(t) ? cd{1.0, 0.0} : std::exp(cd{0.0, (p1 - wln) * t});
                            term.grid = pool.get(ol.lambda + cd{0.0, wln}, first_kind);
                            if (rho)
                                term.weight = weight;
                            else
                                term.coeff = std::move(coeff);
                            terms_.push_back(std::move(term));
                        }
                    }
                }
            }
        };
        add_terms(true);
        add_terms(false);
    }

    std::pair<Matrix, Matrix> eval(double tau) const {
        Matrix c1 = Matrix::Zero(dim_, dim_);
        Matrix c2 = Matrix::Zero(dim_, dim_);
        for (const auto& term : terms_) {
            const cd ph = std::exp(cd{0.0, term.tau_freq * tau}) * term.t_phase *
                          pool_->eval(term.grid, tau);
            (term.first_kind ? c1 : c2) += ph * term.coeff;
        }
        return {c1, c2};
    }

    cd eval_traced(double tau) const {
        cd sum{0.0, 0.0};
        for (const auto& term : terms_)
            sum += term.weight * std::exp(cd{0.0, term.tau_freq * tau}) * term.t_phase *
                   pool_->eval(term.grid, tau);
        return sum;
    }

    bool empty() const { return terms_.empty(); }

private:
    struct Term {
        bool first_kind = true;
        Matrix coeff;
        cd weight{0.0, 0.0};
        double tau_freq = 0.0;
        cd t_phase{1.0, 0.0};
        std::size_t grid = 0;
    };
    int dim_;
    GridPool* pool_;
    std::vector<Term> terms_;
};

} // namespace

std::pair<Matrix, Matrix> correction_terms(const SystemSpec& spec, const AdjointGenerator& gen,
                                           const Matrix& A, const Matrix& O, double t,
                                           double tau) {
    GridPool pool(spec, std::max(std::abs(tau), 1e-3));
    CorrectionEvaluator ev(spec, gen, A, O, t, pool);
    return ev.eval(tau);
}

Correlator sqrt_correlator(const SystemSpec& spec, const AdjointGenerator& gen, const Matrix& A,
                           const Matrix& O, const Matrix& rho, double t,
                           const std::vector<double>& tau) {
    Correlator out;
    out.tau = tau;
    out.values.resize(tau.size(), cd{0.0, 0.0});
    out.err.resize(tau.size(), 0.0);
    out.model = "engine";
    out.method = "sqrt";
    for (const auto& as : gen.decompose(A)) {
        const Matrix W = equal_time_two_point(spec, gen, as.X, O, t);
        const cd w0 = (rho * W).trace();
        if (std::abs(w0) == 0.0) continue;
        for (std::size_t i = 0; i < tau.size(); ++i)
            out.values[i] += std::exp(as.lambda * tau[i]) * w0;
    }
    return out;
}

Correlator mqrt_correlator(const SystemSpec& spec, const AdjointGenerator& gen, const Matrix& A,
                           const Matrix& O, const Matrix& rho, double t,
                           const std::vector<double>& tau, bool include_corrections) {
    if (tau.empty() || std::abs(tau.front()) > 1e-14)
        throw DomainError("mqrt_correlator: tau grid must start at 0");
    for (std::size_t i = 1; i < tau.size(); ++i)
        if (!(tau[i] > tau[i - 1])) throw DomainError("mqrt_correlator: tau grid must increase");

    double hmin = tau.size() > 1 ? tau[1] - tau[0] : 1.0;
    for (std::size_t i = 1; i + 1 < tau.size(); ++i) hmin = std::min(hmin, tau[i + 1] - tau[i]);
    const double h0 = hmin / 4.0;

    GridPool pool(spec, tau.back());
    struct Track {
        cd lambda;
        cd y0;
        std::unique_ptr<CorrectionEvaluator> corr;
    };
    std::vector<Track> tracks;
    for (const auto& as : gen.decompose(A)) {
        Track tr;
        tr.lambda = as.lambda;
        tr.y0 = (rho * equal_time_two_point(spec, gen, as.X, O, t)).trace();
        if (include_corrections) {
            tr.corr = std::make_unique<CorrectionEvaluator>(spec, gen, as.X, O, t, pool, &rho);
            if (tr.corr->empty()) tr.corr.reset();
        }
        if (std::abs(tr.y0) == 0.0 && !tr.corr) continue;
        tracks.push_back(std::move(tr));
    }

    // Each track obeys the scalar equation y' = lambda y + tr(rho C(tau)); the
    // trace commutes with the linear regression equation, so the observable is
    // integrated directly.
    auto run = [&](double h) {
        std::vector<cd> values(tau.size(), cd{0.0, 0.0});
        for (auto& tr : tracks) {
            auto drive = [&](double x) -> cd {
                return tr.corr ? tr.corr->eval_traced(x) : cd{0.0, 0.0};
            };
            cd y = tr.y0;
            double x = tau.front();
            values[0] += y;
            for (std::size_t i = 1; i < tau.size(); ++i) {
                const double span = tau[i] - x;
                const int n = std::max(1, static_cast<int>(std::ceil(span / h - 1e-9)));
                const double hh = span / n;
                for (int k = 0; k < n; ++k) {
                    const cd k1 = tr.lambda * y + drive(x);
                    const cd k2 = tr.lambda * (y + 0.5 * hh * k1) + drive(x + 0.5 * hh);
                    const cd k3 = tr.lambda * (y + 0.5 * hh * k2) + drive(x + 0.5 * hh);
                    const cd k4 = tr.lambda * (y + hh * k3) + drive(x + hh);
                    y += (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                    x += hh;
                }
                values[i] += y;
            }
        }
        return values;
    };

    std::vector<cd> coarse = run(h0);
    std::vector<cd> fine = run(h0 / 2.0);
    double vmax = 0.0;
    for (const cd& v : fine) vmax = std::max(vmax, std::abs(v));
    Correlator out;
    out.tau = tau;
    out.values = fine;
    out.err.resize(tau.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < tau.size(); ++i) {
        out.err[i] = std::abs(fine[i] - coarse[i]);
        worst = std::max(worst, out.err[i]);
    }
    if (vmax > 0.0 && worst > spec.quad.rel_tol * vmax)
        throw StepSizeError("integration not converged: halving the step moved results by " +
                            std::to_string(worst / vmax) + " relative");
    out.model = "engine";
    out.method = include_corrections ? "mqrt" : "sqrt";
    return out;
}

} // namespace qregress
