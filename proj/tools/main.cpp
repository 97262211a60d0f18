#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>

#include "qregress/analysis.hpp"
#include "qregress/engine.hpp"
#include "qregress/oracle.hpp"

using json = nlohmann::json;
using namespace qregress;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// exit-code contract: 0 success, 1 numerical failure, 2 configuration error
int classify(const std::exception& e) {
    if (dynamic_cast<const ConvergenceError*>(&e) || dynamic_cast<const DecayError*>(&e) ||
        dynamic_cast<const StepSizeError*>(&e) || dynamic_cast<const RecurrenceError*>(&e))
        return 1;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
        dynamic_cast<const UnsupportedSpec*>(&e) || dynamic_cast<const UnsupportedCorrelator*>(&e) ||
        dynamic_cast<const UnsupportedContinuation*>(&e) ||
        dynamic_cast<const GridMismatch*>(&e) || dynamic_cast<const SizeError*>(&e) ||
        dynamic_cast<const WindowError*>(&e) || dynamic_cast<const json::exception*>(&e))
        return 2;
    return 1;
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j = json::parse(in);
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    return j;
}

double require_number(const json& cfg, const std::string& key) {
    if (!cfg.contains(key) || !cfg[key].is_number())
        throw ConfigError("config requires numeric key '" + key + "'");
    return cfg[key].get<double>();
}

std::string get_string(const json& cfg, const std::string& key, const std::string& fallback) {
    if (!cfg.contains(key)) return fallback;
    if (!cfg[key].is_string()) throw ConfigError("config key '" + key + "' must be a string");
    return cfg[key].get<std::string>();
}

double beta_from(const json& cfg) {
    const bool has_T = cfg.contains("T"), has_beta = cfg.contains("beta");
    if (has_T == has_beta) throw ConfigError("config requires exactly one of 'T' and 'beta'");
    if (has_beta) return require_number(cfg, "beta");
    const double T = require_number(cfg, "T");
    if (!(T > 0.0)) throw ConfigError("'T' must be positive");
    return 1.0 / T;
}

SpectralDensity density_from(const json& cfg) {
    if (!cfg.contains("density")) throw ConfigError("config requires a 'density' object");
    const json& d = cfg["density"];
    const std::string type = get_string(d, "type", "");
    if (type == "flat")
        return SpectralDensity::flat(require_number(d, "gamma"), require_number(d, "half_width"));
    if (type == "rational_quartic")
        return SpectralDensity::rational_quartic(require_number(d, "delta"));
    if (type == "tabulated") {
        if (!d.contains("points") || !d["points"].is_array())
            throw ConfigError("tabulated density requires a 'points' array");
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : d["points"]) {
            if (!p.is_array() || p.size() != 2)
                throw ConfigError("tabulated density points must be [Omega, J] pairs");
            pts.emplace_back(p[0].get<double>(), p[1].get<double>());
        }
        return SpectralDensity::tabulated(std::move(pts));
    }
    if (type == "zero") return SpectralDensity::zero();
    throw ConfigError("density type must be flat, rational_quartic, tabulated, or zero");
}

QuadratureSpec quad_from(const json& cfg, const QuadratureSpec& base) {
    QuadratureSpec q = base;
    if (!cfg.contains("quad")) return q;
    const json& j = cfg["quad"];
    if (j.contains("omega_max")) q.omega_max = j["omega_max"].get<double>();
    if (j.contains("rel_tol")) q.rel_tol = j["rel_tol"].get<double>();
    if (j.contains("abs_tol")) q.abs_tol = j["abs_tol"].get<double>();
    if (j.contains("max_panels")) q.max_panels = j["max_panels"].get<int>();
    if (j.contains("min_panel_width_factor"))
        q.min_panel_width_factor = j["min_panel_width_factor"].get<double>();
    return q;
}

std::vector<double> grid_from(const json& cfg, const std::string& key) {
    if (!cfg.contains(key)) throw ConfigError("config requires a '" + key + "' range object");
    const json& j = cfg[key];
    const double lo = require_number(j, "min");
    const double hi = require_number(j, "max");
    if (!j.contains("points")) throw ConfigError("'" + key + "' requires 'points'");
    const int n = j["points"].get<int>();
    if (n < 2) throw ConfigError("'" + key + "' needs at least 2 points");
    if (!(hi > lo)) throw ConfigError("'" + key + "' needs max > min");
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
    return g;
}

Matrix matrix_from(const json& j, const std::string& name) {
    if (!j.is_array() || j.empty()) throw ConfigError("matrix '" + name + "' must be a nonempty array of rows");
    const std::size_t rows = j.size();
    Matrix m(rows, rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const json& row = j[r];
        if (!row.is_array() || row.size() != rows)
            throw ConfigError("matrix '" + name + "' must be square, rows of [re, im] pairs");
        for (std::size_t c = 0; c < rows; ++c) {
            const json& e = row[c];
            if (!e.is_array() || e.size() != 2)
                throw ConfigError("matrix '" + name + "' entries must be [re, im] pairs");
            m(r, c) = cd{e[0].get<double>(), e[1].get<double>()};
        }
    }
    return m;
}

std::string output_from(const json& cfg) {
    const std::string out = get_string(cfg, "output", "");
    if (out.empty()) throw ConfigError("config requires an 'output' path");
    return out;
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file: " + path);
    out << body;
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12e", x);
    return buf;
}

void write_sidecar(const std::string& csv_path, const json& effective, const std::string& command,
                   const std::string& digest) {
    json side = effective;
    side["command"] = command;
    if (!digest.empty()) side["params_digest"] = digest;
    write_file(csv_path + ".json", side.dump(2) + "\n");
}

void write_correlator_csv(const std::string& path, const Correlator& c) {
    std::string body = "tau,re,im,err_estimate\n";
    for (std::size_t i = 0; i < c.tau.size(); ++i)
        body += fmt(c.tau[i]) + "," + fmt(c.values[i].real()) + "," + fmt(c.values[i].imag()) +
                "," + fmt(c.err[i]) + "\n";
    write_file(path, body);
}

Method method_from(const json& cfg) {
    const std::string m = get_string(cfg, "method", "mqrt");
    if (m == "sqrt") return Method::sqrt;
    if (m == "mqrt") return Method::mqrt;
    if (m == "exact") return Method::exact;
    throw ConfigError("method must be sqrt, mqrt, or exact");
}

Statistics stat_from_model(const std::string& model) {
    if (model == "boson") return Statistics::boson;
    if (model == "fermion") return Statistics::fermion;
    throw ConfigError("model must be boson or fermion for this command");
}

BFParams bf_params(const json& cfg) {
    return {cfg.contains("omega0") ? require_number(cfg, "omega0") : 1.0, beta_from(cfg),
            stat_from_model(get_string(cfg, "model", "")), density_from(cfg),
            quad_from(cfg, QuadratureSpec{})};
}

int cmd_correlate(const json& cfg) {
    const std::string model = get_string(cfg, "model", "");
    const std::string kind = get_string(cfg, "kind", "a_dag_a");
    const std::string out = output_from(cfg);
    std::vector<double> tau = grid_from(cfg, "tau");
    Correlator c;
    std::string digest;

    if (model == "spinboson") {
        SBParams p{cfg.contains("omega0") ? require_number(cfg, "omega0") : 1.0, beta_from(cfg),
                   density_from(cfg), quad_from(cfg, QuadratureSpec{})};
        SBKind k;
        if (kind == "plus_minus") k = SBKind::plus_minus;
        else if (kind == "minus_plus") k = SBKind::minus_plus;
        else throw ConfigError("spinboson kind must be plus_minus or minus_plus");
        const Method m = method_from(cfg);
        if (m == Method::exact) throw ConfigError("spinboson has no exact method");
        c = (m == Method::mqrt) ? sb_mqrt_eq(p, k, tau) : sb_sqrt_eq(p, k, tau);
        digest = p.digest();
    } else {
        BFParams p = bf_params(cfg);
        const Method m = method_from(cfg);
        digest = p.digest();
        const bool finite_t = cfg.contains("t") && !cfg["t"].is_string();
        if (finite_t) {
            if (m != Method::mqrt || kind != "a_dag_a")
                throw ConfigError("finite t supports only method mqrt with kind a_dag_a");
            const double n0 = cfg.contains("n0") ? require_number(cfg, "n0") : 0.0;
            c = mqrt_two_point_finite(p, n0, require_number(cfg, "t"), tau);
        } else if (kind == "nn") {
            if (m == Method::exact) throw ConfigError("no exact closed form for the nn correlator");
            c = (m == Method::mqrt) ? mqrt_nn_eq(p, tau) : sqrt_nn_eq(p, tau);
        } else {
            TwoPointKind k;
            if (kind == "a_dag_a") k = TwoPointKind::a_dag_a;
            else if (kind == "a_a_dag") k = TwoPointKind::a_a_dag;
            else throw ConfigError("kind must be a_dag_a, a_a_dag, or nn");
            if (m == Method::mqrt) c = mqrt_two_point_eq(p, k, tau);
            else if (m == Method::sqrt) c = sqrt_two_point_eq(p, k, tau);
            else c = exact_two_point_eq(p, k, tau);
        }
    }
    write_correlator_csv(out, c);
    json side = cfg;
    side["method_used"] = c.method;
    side["kind_used"] = c.kind;
    write_sidecar(out, side, "correlate", digest);
    return 0;
}

int cmd_kms(const json& cfg) {
    const std::string model = get_string(cfg, "model", "");
    const std::string kind = get_string(cfg, "kind", "a_dag_a");
    const std::string out = output_from(cfg);
    std::vector<double> tau = grid_from(cfg, "tau");
    const Method m = method_from(cfg);

    KMSReport rep;
    if (model == "spinboson") {
        SBParams p{cfg.contains("omega0") ? require_number(cfg, "omega0") : 1.0, beta_from(cfg),
                   density_from(cfg), quad_from(cfg, QuadratureSpec{})};
        rep = kms_residual(p, m, tau);
    } else {
        BFParams p = bf_params(cfg);
        rep = kms_residual(p, m, kind == "nn" ? KMSPair::nn_pair : KMSPair::a_pair, tau);
    }
    const double threshold = 10.0 * quad_from(cfg, QuadratureSpec{}).rel_tol;
    json report = {{"method", rep.method},
                   {"pair", rep.pair},
                   {"residual", rep.residual},
                   {"error_estimate", rep.err},
                   {"pass_threshold", threshold},
                   {"beta", rep.beta},
                   {"tau_digest", rep.tau_digest}};
    write_file(out, report.dump(2) + "\n");
    write_sidecar(out, cfg, "kms", "");
    return 0; // a violation is a finding, not an error
}

int cmd_sweep(const json& cfg) {
    const Statistics stat = stat_from_model(get_string(cfg, "model", ""));
    const std::string out = output_from(cfg);
    std::vector<double> T = cfg.contains("T_grid")
                                ? cfg["T_grid"].get<std::vector<double>>()
                                : default_temperature_grid();
    std::vector<double> delta = cfg.contains("delta_grid")
                                    ? cfg["delta_grid"].get<std::vector<double>>()
                                    : default_delta_grid();
    const int tau_points = cfg.contains("tau_points") ? cfg["tau_points"].get<int>() : 201;
    SweepTable table = sweep_d(stat, T, delta, quad_from(cfg, sweep_quadrature()), tau_points);

    std::string body = "T,delta,D_mqrt,D_sqrt,tau_f\n";
    bool all_ok = true;
    for (const SweepRow& row : table.rows) {
        body += fmt(row.T) + "," + fmt(row.delta) + "," + fmt(row.D_mqrt) + "," +
                fmt(row.D_sqrt) + "," + fmt(row.tau_f) + "\n";
        if (!row.error.empty()) {
            all_ok = false;
            std::fprintf(stderr, "cell (T=%g, delta=%g) failed: %s\n", row.T, row.delta,
                         row.error.c_str());
        }
    }
    write_file(out, body);
    write_sidecar(out, cfg, "sweep", "");
    return all_ok ? 0 : 1;
}

int cmd_oracle(const json& cfg) {
    const Statistics stat = stat_from_model(get_string(cfg, "model", ""));
    const std::string kind = get_string(cfg, "kind", "a_dag_a");
    const std::string out = output_from(cfg);
    std::vector<double> tau = grid_from(cfg, "tau");
    const double beta = beta_from(cfg);
    const double omega0 = cfg.contains("omega0") ? require_number(cfg, "omega0") : 1.0;
    const double n0 = cfg.contains("n0") ? require_number(cfg, "n0") : 0.0;
    const double t = require_number(cfg, "t");
    if (!cfg.contains("N")) throw ConfigError("oracle requires 'N'");
    const int N = cfg["N"].get<int>();
    if (!cfg.contains("window") || !cfg["window"].is_array() || cfg["window"].size() != 2)
        throw ConfigError("oracle requires 'window' as [lo, hi]");
    const std::pair<double, double> window{cfg["window"][0].get<double>(),
                                           cfg["window"][1].get<double>()};

    DiscretizedBath bath = discretize(density_from(cfg), N, window, beta, stat);
    OracleSystem sys(bath, omega0, stat, beta, n0);
    const double guard = sys.recurrence_time();
    double latest = t;
    for (double tk : tau) latest = std::max(latest, t + std::abs(tk));
    if (latest >= guard)
        throw ConfigError("requested times reach the recurrence guard at " + std::to_string(guard));

    std::string body = "tau,re,im,err_estimate,N,recurrence_guard\n";
    for (double tk : tau) {
        cd v;
        if (kind == "nn") v = nn_exact(sys, t, tk);
        else if (kind == "a_dag_a") v = two_point_exact(sys, t, tk, TwoPointKind::a_dag_a);
        else if (kind == "a_a_dag") v = two_point_exact(sys, t, tk, TwoPointKind::a_a_dag);
        else throw ConfigError("oracle kind must be a_dag_a, a_a_dag, or nn");
        body += fmt(tk) + "," + fmt(v.real()) + "," + fmt(v.imag()) + "," + fmt(0.0) + "," +
                std::to_string(N) + "," + fmt(guard) + "\n";
    }
    write_file(out, body);
    write_sidecar(out, cfg, "oracle", "");
    return 0;
}

int cmd_engine(const json& cfg) {
    const std::string out = output_from(cfg);
    std::vector<double> tau = grid_from(cfg, "tau");
    json mats = cfg;
    if (cfg.contains("matrices_file")) {
        std::ifstream in(cfg["matrices_file"].get<std::string>());
        if (!in) throw ConfigError("cannot open matrices file");
        mats = json::parse(in);
    }
    if (!mats.contains("H") || !mats.contains("S"))
        throw ConfigError("engine requires 'H' and 'S' matrices");
    SystemSpec spec{matrix_from(mats["H"], "H"), matrix_from(mats["S"], "S"), density_from(cfg),
                    beta_from(cfg), quad_from(cfg, QuadratureSpec{}), ""};
    spec.validate();

    const int d = spec.dim();
    Matrix A = mats.contains("A") ? matrix_from(mats["A"], "A") : Matrix(spec.S.adjoint());
    Matrix O = mats.contains("O") ? matrix_from(mats["O"], "O") : spec.S;
    Matrix rho = mats.contains("rho") ? matrix_from(mats["rho"], "rho")
                                      : Matrix(Matrix::Identity(d, d) / static_cast<double>(d));

    double t = std::numeric_limits<double>::infinity();
    if (cfg.contains("t") && !cfg["t"].is_string()) t = require_number(cfg, "t");

    AdjointGenerator gen = build_adjoint_generator(spec);
    const Method m = method_from(cfg);
    Correlator c;
    if (m == Method::sqrt) c = sqrt_correlator(spec, gen, A, O, rho, t, tau);
    else if (m == Method::mqrt) c = mqrt_correlator(spec, gen, A, O, rho, t, tau);
    else throw ConfigError("engine methods are sqrt and mqrt");
    write_correlator_csv(out, c);
    write_sidecar(out, cfg, "engine", "");
    return 0;
}

int cmd_threepoint(const json& cfg, bool with_kms) {
    if (get_string(cfg, "model", "boson") != "boson")
        throw ConfigError("threepoint requires the boson model");
    const std::string out = output_from(cfg);
    std::vector<double> tau1 = grid_from(cfg, "tau1");
    std::vector<double> tau2 = grid_from(cfg, "tau2");
    BFParams p{cfg.contains("omega0") ? require_number(cfg, "omega0") : 1.0, beta_from(cfg),
               Statistics::boson, density_from(cfg), quad_from(cfg, QuadratureSpec{})};
    const std::string ord = get_string(cfg, "ordering", "N_right");
    if (ord != "N_right" && ord != "N_left")
        throw ConfigError("ordering must be N_right or N_left");
    const ThreePointOrdering ordering =
        ord == "N_right" ? ThreePointOrdering::N_right : ThreePointOrdering::N_left;

    ThreePointEvaluator ev(p, std::abs(tau1.back()) + std::abs(tau2.back()));
    std::string body = "tau1,tau2,re,im\n";
    for (double t1 : tau1)
        for (double t2 : tau2) {
            const cd v = ev.eval(ordering, cd{t1, 0.0}, cd{t1 + t2, 0.0}, cd{t2, 0.0}).value;
            body += fmt(t1) + "," + fmt(t2) + "," + fmt(v.real()) + "," + fmt(v.imag()) + "\n";
        }
    write_file(out, body);

    if (with_kms) {
        auto reports = three_point_kms_check(p, tau1, tau2);
        json jr = json::array();
        for (const auto& rep : reports)
            jr.push_back({{"pair", rep.pair},
                          {"residual", rep.residual},
                          {"error_estimate", rep.err},
                          {"pass_threshold", 10.0 * p.quad.rel_tol}});
        write_file(out + ".kms.json", jr.dump(2) + "\n");
    }
    write_sidecar(out, cfg, "threepoint", p.digest());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"regression-theorem correlator toolkit"};
    app.require_subcommand(1);

    std::string config_path, output, model, method, kind, ordering, t_str;
    std::optional<double> omega0, T, beta, n0, tmin, tmax, delta, gamma, half_width;
    std::optional<int> tau_points, N;
    bool kms_flag = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON configuration file");
        sub->add_option("--output", output, "output path (overrides config)");
        sub->add_option("--model", model, "boson | fermion | spinboson | custom");
        sub->add_option("--method", method, "sqrt | mqrt | exact");
        sub->add_option("--kind", kind, "correlator selector");
        sub->add_option("--omega0", omega0, "system frequency");
        sub->add_option("--T", T, "temperature");
        sub->add_option("--beta", beta, "inverse temperature");
        sub->add_option("--t", t_str, "waiting time, number or 'inf'");
        sub->add_option("--n0", n0, "initial occupation");
        sub->add_option("--tau-min", tmin, "tau grid start");
        sub->add_option("--tau-max", tmax, "tau grid end");
        sub->add_option("--tau-points", tau_points, "tau grid size");
        sub->add_option("--delta", delta, "rational-quartic density scale");
        sub->add_option("--gamma", gamma, "flat density height");
        sub->add_option("--half-width", half_width, "flat density half width");
        return sub;
    };

    auto* correlate = add_common(app.add_subcommand("correlate", "two-point correlator CSV"));
    auto* kms = add_common(app.add_subcommand("kms", "KMS residual report"));
    auto* sweep = add_common(app.add_subcommand("sweep", "deviation-metric sweep CSV"));
    auto* oracle = add_common(app.add_subcommand("oracle", "discretized-bath reference CSV"));
    oracle->add_option("--N", N, "bath mode count");
    auto* engine = add_common(app.add_subcommand("engine", "matrix-input correlator CSV"));
    auto* threepoint = add_common(app.add_subcommand("threepoint", "three-point correlator CSV"));
    threepoint->add_option("--ordering", ordering, "N_right | N_left");
    threepoint->add_flag("--kms", kms_flag, "also emit the four-relation residual JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (const char* env = std::getenv("QREGRESS_THREADS")) {
        const int n = std::atoi(env);
        if (n < 1) {
            std::fprintf(stderr, "QREGRESS_THREADS must be a positive integer\n");
            return 2;
        }
    }

    try {
        json cfg = load_config(config_path);
        // flags take precedence over config-file keys
        if (!output.empty()) cfg["output"] = output;
        if (!model.empty()) cfg["model"] = model;
        if (!method.empty()) cfg["method"] = method;
        if (!kind.empty()) cfg["kind"] = kind;
        if (!ordering.empty()) cfg["ordering"] = ordering;
        if (omega0) cfg["omega0"] = *omega0;
        if (T) { cfg["T"] = *T; cfg.erase("beta"); }
        if (beta) { cfg["beta"] = *beta; if (T) throw ConfigError("pass only one of --T/--beta"); cfg.erase("T"); }
        if (n0) cfg["n0"] = *n0;
        if (N) cfg["N"] = *N;
        if (!t_str.empty()) {
            if (t_str == "inf") cfg["t"] = "inf";
            else cfg["t"] = std::stod(t_str);
        }
        if (tmin || tmax || tau_points) {
            json& tj = cfg["tau"];
            if (tmin) tj["min"] = *tmin;
            if (tmax) tj["max"] = *tmax;
            if (tau_points) tj["points"] = *tau_points;
        }
        if (delta) cfg["density"] = {{"type", "rational_quartic"}, {"delta", *delta}};
        if (gamma) {
            cfg["density"] = {{"type", "flat"},
                              {"gamma", *gamma},
                              {"half_width", half_width ? *half_width : 10.0}};
        }

        if (correlate->parsed()) return cmd_correlate(cfg);
        if (kms->parsed()) return cmd_kms(cfg);
        if (sweep->parsed()) return cmd_sweep(cfg);
        if (oracle->parsed()) return cmd_oracle(cfg);
        if (engine->parsed()) return cmd_engine(cfg);
        if (threepoint->parsed()) return cmd_threepoint(cfg, kms_flag);
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return classify(e);
    }
}
