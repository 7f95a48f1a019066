#include "minphase/cli.hpp"

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "minphase/certify.hpp"
#include "minphase/expr.hpp"
#include "minphase/gains.hpp"
#include "minphase/jets.hpp"
#include "minphase/linear.hpp"
#include "minphase/phi.hpp"
#include "minphase/relative_degree.hpp"
#include "minphase/signals.hpp"
#include "minphase/simulate.hpp"
#include "minphase/system.hpp"

namespace minphase {
namespace {

constexpr const char* kSchema = "1";

json matrix_json(const Eigen::MatrixXd& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(row);
    }
    return rows;
}

json vector_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

json complex_list_json(const std::vector<std::complex<double>>& zs) {
    json arr = json::array();
    for (const auto& z : zs) arr.push_back(json{{"re", z.real()}, {"im", z.imag()}});
    return arr;
}

// Options shared by most subcommands; each subcommand registers only the ones
// it understands.
struct CommonOpts {
    std::string corpus;
    std::string file;
    std::string out_path;
    std::string csv_path;
    unsigned long long seed = 0;
    bool seed_given = false;
    double dt = 1e-3;
    double horizon = 10.0;
    int order = -1;
    double box = 0.0;
    bool uniform = false;
};

SystemModel resolve_model(const CommonOpts& c) {
    if (!c.corpus.empty() && !c.file.empty())
        throw ModelError("give either --corpus or --file, not both");
    if (!c.corpus.empty()) return builtin(c.corpus).model;
    if (!c.file.empty()) return load_model(c.file);
    throw ModelError("a model is required: --corpus <key> or --file <path>");
}

// For linear commands a corpus key may carry exact matrices; a file may hold
// either a matrix block file or a model description.
LinearSystem resolve_linear(const CommonOpts& c) {
    if (!c.corpus.empty() && !c.file.empty())
        throw ModelError("give either --corpus or --file, not both");
    if (!c.corpus.empty()) {
        const CorpusEntry entry = builtin(c.corpus);
        if (entry.linear) {
            LinearSystem sys;
            sys.name = entry.model.name;
            sys.A = entry.linear->A;
            sys.B = entry.linear->B;
            sys.C = entry.linear->C;
            return sys;
        }
        return linear_from_model(entry.model);
    }
    if (!c.file.empty()) {
        try {
            return read_linear(c.file);
        } catch (const std::exception&) {
            return linear_from_model(load_model(c.file));
        }
    }
    throw ModelError("a linear system is required: --corpus <key> or --file <path>");
}

int emit(const json& rep, const CommonOpts& c, std::ostream& out, int code) {
    const std::string text = rep.dump(2);
    if (!c.out_path.empty()) {
        std::ofstream f(c.out_path);
        if (!f) throw ModelError("cannot write report to " + c.out_path);
        f << text << "\n";
    }
    out << text << "\n";
    return code;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw ModelError("cannot write " + path);
    f << text;
}

std::string trajectory_csv(const Trajectory& traj, const SystemModel& model) {
    std::ostringstream os;
    os.precision(17);
    os << "t";
    for (int i = 0; i < model.n; ++i) os << ",x" << (i + 1);
    for (int j = 0; j < model.m; ++j) os << ",u" << (j + 1);
    os << "\n";
    for (int k = 0; k < traj.nodes(); ++k) {
        os << traj.t[k];
        for (int i = 0; i < model.n; ++i) os << "," << traj.x(i, k);
        for (int j = 0; j < model.m; ++j) os << "," << (traj.u.empty() ? 0.0 : traj.u[0](j, k));
        os << "\n";
    }
    return os.str();
}

Eigen::VectorXd parse_state(const std::string& text, int n) {
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
    if (text.empty()) return x0;
    std::stringstream ss(text);
    std::string item;
    int i = 0;
    while (std::getline(ss, item, ',')) {
        if (i >= n) throw ModelError("--x0 has more entries than states");
        x0[i++] = std::stod(item);
    }
    if (i != n) throw ModelError("--x0 needs exactly " + std::to_string(n) + " entries");
    return x0;
}

std::vector<SignalPtr> resolve_inputs(const std::string& spec, int m) {
    std::vector<SignalPtr> signals;
    if (spec.empty()) {
        for (int j = 0; j < m; ++j) signals.push_back(constant_signal(0.0));
        return signals;
    }
    std::string text = spec;
    if (!spec.empty() && spec.front() != '{' && spec.front() != '[') {
        std::ifstream f(spec);
        if (!f) throw ModelError("cannot read input descriptor file " + spec);
        std::ostringstream buf;
        buf << f.rdbuf();
        text = buf.str();
    }
    const json doc = json::parse(text);
    if (doc.is_object()) {
        signals.push_back(signal_from_json(doc));
    } else if (doc.is_array()) {
        for (const auto& item : doc) signals.push_back(signal_from_json(item));
    } else {
        throw ModelError("--input must be a descriptor object or array");
    }
    if (static_cast<int>(signals.size()) > m)
        throw ModelError("more input descriptors than input channels");
    while (static_cast<int>(signals.size()) < m) signals.push_back(constant_signal(0.0));
    return signals;
}

json signal_descriptors(const std::vector<SignalPtr>& signals) {
    json arr = json::array();
    for (const auto& s : signals) arr.push_back(s->descriptor());
    return arr;
}

json report_head(const std::string& command, const CommonOpts& c) {
    json rep;
    rep["schema"] = kSchema;
    rep["command"] = command;
    if (!c.corpus.empty()) rep["corpus"] = c.corpus;
    if (!c.file.empty()) rep["file"] = c.file;
    return rep;
}

// ---------------------------------------------------------------------------
// Subcommand bodies.  Each returns the process exit code (0 established /
// clean, 1 refuted / not established, 2 reserved for usage errors upstream).

int cmd_corpus_list(const CommonOpts& c, std::ostream& out) {
    json rep = report_head("corpus-list", c);
    json entries = json::array();
    for (const auto& key : corpus_keys()) {
        const CorpusEntry entry = builtin(key);
        json e;
        e["key"] = key;
        e["states"] = entry.model.n;
        e["inputs"] = entry.model.m;
        e["outputs"] = entry.model.l();
        e["linear_data"] = entry.linear.has_value();
        e["blurb"] = entry.blurb;
        entries.push_back(e);
    }
    rep["entries"] = entries;
    return emit(rep, c, out, 0);
}

int cmd_validate(const CommonOpts& c, std::ostream& out) {
    const SystemModel model = resolve_model(c);
    const ValidationReport v = validate(model);
    const AffineDecomposition dec = affine_decompose(model, c.seed_given ? c.seed : 0);
    json rep = report_head("validate", c);
    rep["model"] = model.name;
    rep["states"] = model.n;
    rep["inputs"] = model.m;
    rep["outputs"] = model.l();
    rep["clean"] = v.clean;
    rep["violations"] = v.violations;
    rep["parameters"] = v.parameters;
    rep["control_affine"] = dec.affine;
    if (!dec.affine) rep["affine_obstruction"] = dec.obstruction;
    rep["probabilistic"] = dec.probabilistic;
    return emit(rep, c, out, v.clean ? 0 : 1);
}

int cmd_reldeg(const CommonOpts& c, std::ostream& out) {
    const SystemModel model = resolve_model(c);
    RelDegOptions opts;
    if (c.seed_given) opts.seed = c.seed;
    if (c.order >= 1) opts.max_order = std::min(c.order, kMaxJetOrder);
    if (c.box > 0.0) opts.state_box = c.box;

    json rep = report_head("reldeg", c);
    rep["model"] = model.name;
    rep["seed"] = opts.seed;
    bool all_uniform = true;
    bool any_prob = false;
    json outputs = json::array();
    std::vector<RelDegVerdict> verdicts;
    for (int i = 0; i < model.l(); ++i) {
        const RelDegVerdict v = relative_degree(model, i, opts);
        verdicts.push_back(v);
        all_uniform = all_uniform && v.uniform;
        any_prob = any_prob || v.probabilistic;
        json o;
        o["output"] = i + 1;
        if (v.r)
            o["r"] = *v.r;
        else
            o["r"] = nullptr;
        o["uniform"] = v.uniform;
        json conds = json::array();
        conds.push_back(json{{"name", "derivatives below r are input-free"},
                             {"pass", !v.input_free_orders.empty() || v.r.value_or(0) <= 1}});
        conds.push_back(json{{"name", "every output reaches the input jet"}, {"pass", v.found_all}});
        conds.push_back(json{{"name", "unbounded growth in the input"}, {"pass", v.growth_ok}});
        conds.push_back(json{{"name", "nonzero at the origin"}, {"pass", v.origin_ok}});
        o["conditions"] = conds;
        o["input_free_orders"] = v.input_free_orders;
        o["detail"] = v.detail;
        outputs.push_back(o);
    }
    rep["outputs"] = outputs;
    rep["uniform_relative_degree"] = all_uniform;

    // Cross-check through the control-affine ladder when it applies.
    const AffineDecomposition dec = affine_decompose(model, opts.seed);
    if (dec.affine && model.m == 1 && model.l() == 1) {
        const RelDegVerdict av = relative_degree_affine(model, dec, 0, opts);
        json a;
        a["uniform"] = av.uniform;
        if (av.r)
            a["r"] = *av.r;
        else
            a["r"] = nullptr;
        a["agrees"] =
            av.uniform == verdicts[0].uniform && av.r.value_or(-1) == verdicts[0].r.value_or(-1);
        if (av.decoupling) a["decoupling"] = av.decoupling->str();
        rep["affine_check"] = a;
        any_prob = any_prob || av.probabilistic;
    }
    rep["probabilistic"] = any_prob;
    return emit(rep, c, out, all_uniform ? 0 : 1);
}

int cmd_zeros(const CommonOpts& c, std::ostream& out) {
    const LinearSystem sys = resolve_linear(c);
    const LinearRelDeg ld = linear_relative_degree(sys);
    const MinimumPhaseVerdict mp = minimum_phase_verdict(sys);

    json rep = report_head("zeros", c);
    rep["model"] = sys.name;
    rep["states"] = sys.n();
    if (ld.r)
        rep["r"] = *ld.r;
    else
        rep["r"] = nullptr;
    rep["input_coefficient"] = ld.g;
    rep["zeros"] = complex_list_json(mp.zeros);
    rep["minimum_phase"] = mp.minimum_phase;
    if (mp.zeros.empty()) {
        rep["stability_margin"] = nullptr;
    } else {
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& z : mp.zeros) worst = std::max(worst, z.real());
        rep["stability_margin"] = -worst;
    }
    rep["lambda"] = mp.lambda;
    rep["kappa"] = mp.kappa;
    rep["mu"] = mp.mu;
    if (mp.minimum_phase && ld.r) {
        const ReconstructionCertificate cert = reconstruction_certificate(sys);
        json cj;
        cj["beta_coeff"] = cert.beta_coeff;
        cj["lambda"] = cert.lambda;
        cj["gamma_slope"] = cert.gamma_slope;
        cj["jet_map_rows"] = static_cast<int>(cert.M.rows());
        cj["jet_map_cols"] = static_cast<int>(cert.M.cols());
        rep["certificate"] = cj;
    }
    rep["detail"] = mp.detail;
    return emit(rep, c, out, mp.minimum_phase ? 0 : 1);
}

int cmd_normalform(const CommonOpts& c, std::ostream& out) {
    const LinearSystem sys = resolve_linear(c);
    const NormalForm nf = normal_form(sys);
    json rep = report_head("normalform", c);
    rep["model"] = sys.name;
    rep["r"] = nf.r;
    rep["input_coefficient"] = nf.g;
    rep["T"] = matrix_json(nf.T);
    rep["T_inv"] = matrix_json(nf.T_inv);
    rep["P"] = matrix_json(nf.P);
    rep["Q"] = matrix_json(nf.Q);
    if (nf.Q.rows() > 0) {
        Eigen::EigenSolver<Eigen::MatrixXd> es(nf.Q);
        std::vector<std::complex<double>> eigs;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
            eigs.push_back(es.eigenvalues()[i]);
        rep["internal_eigenvalues"] = complex_list_json(eigs);
    } else {
        rep["internal_eigenvalues"] = json::array();
    }
    return emit(rep, c, out, 0);
}

int cmd_simulate(const CommonOpts& c, const std::string& x0_text, const std::string& input_spec,
                 std::ostream& out) {
    const SystemModel model = resolve_model(c);
    const Eigen::VectorXd x0 = parse_state(x0_text, model.n);
    const std::vector<SignalPtr> signals = resolve_inputs(input_spec, model.m);

    IntegrateOptions opts;
    opts.dt = c.dt;
    opts.horizon = c.horizon;
    opts.max_input_deriv = c.order >= 1 ? c.order - 1 : 0;
    const Trajectory traj = integrate(model, x0, signals, opts);

    json rep = report_head("simulate", c);
    rep["model"] = model.name;
    rep["x0"] = vector_json(x0);
    rep["inputs"] = signal_descriptors(signals);
    rep["dt"] = opts.dt;
    rep["horizon"] = opts.horizon;
    switch (traj.status) {
        case TrajStatus::Completed: rep["status"] = "completed"; break;
        case TrajStatus::Escaped: rep["status"] = "escaped"; break;
        case TrajStatus::StiffRejected: rep["status"] = "rejected"; break;
    }
    rep["end_time"] = traj.t.empty() ? 0.0 : traj.t.back();
    rep["nodes"] = traj.nodes();
    if (traj.nodes() > 0) {
        rep["x_final"] = vector_json(traj.x.col(traj.nodes() - 1));
        double sup_x = 0.0;
        for (int k = 0; k < traj.nodes(); ++k) sup_x = std::max(sup_x, traj.x.col(k).norm());
        rep["sup_state_norm"] = sup_x;
        Bindings b;
        for (int i = 0; i < model.n; ++i)
            b[Var::state(i + 1)] = traj.x(i, traj.nodes() - 1);
        json yf = json::array();
        for (const auto& h : model.h) yf.push_back(evaluate(h, b));
        rep["y_final"] = yf;
    }
    if (!c.csv_path.empty()) {
        write_text_file(c.csv_path, trajectory_csv(traj, model));
        rep["csv"] = c.csv_path;
    }
    return emit(rep, c, out, 0);
}

int cmd_jets(const CommonOpts& c, const std::string& x0_text, std::ostream& out) {
    const SystemModel model = resolve_model(c);
    const int order = std::min(c.order >= 0 ? c.order : 3, kMaxJetOrder);
    const JetTable table = compute_jets(model, order);

    json rep = report_head("jets", c);
    rep["model"] = model.name;
    rep["max_order"] = order;
    json outputs = json::array();
    for (int i = 0; i < model.l(); ++i) {
        json levels = json::array();
        for (int k = 0; k <= order; ++k) {
            const Expr& e = table.at(i, k);
            const Dependence dep = dependence(e);
            json lvl;
            lvl["order"] = k;
            lvl["expr"] = e.str();
            json st = json::array();
            for (int s : dep.states) st.push_back("x" + std::to_string(s));
            json in = json::array();
            for (const auto& [ch, d] : dep.inputs) {
                std::string name = "u" + std::to_string(ch);
                for (int q = 0; q < d; ++q) name += "'";
                in.push_back(name);
            }
            lvl["states"] = st;
            lvl["inputs"] = in;
            levels.push_back(lvl);
        }
        outputs.push_back(json{{"output", i + 1}, {"jets", levels}});
    }
    rep["outputs"] = outputs;

    if (!c.csv_path.empty()) {
        const Eigen::VectorXd x0 = parse_state(x0_text, model.n);
        std::vector<SignalPtr> signals;
        for (int j = 0; j < model.m; ++j) signals.push_back(constant_signal(0.0));
        IntegrateOptions opts;
        opts.dt = c.dt;
        opts.horizon = c.horizon;
        opts.max_input_deriv = std::max(0, order - 1);
        const Trajectory traj = integrate(model, x0, signals, opts);
        const JetSamples samples = jet_along_trajectory(table, 0, model, traj);
        write_text_file(c.csv_path, jet_samples_csv(samples));
        rep["csv"] = c.csv_path;
    }
    return emit(rep, c, out, 0);
}

ClassK polynomial_gain(double lin, double quad, double cube) {
    std::optional<ClassK> acc;
    auto add = [&](const ClassK& k) { acc = acc ? sum(*acc, k) : k; };
    if (lin > 0.0) add(ClassK::linear(lin));
    if (quad > 0.0) add(ClassK::power(quad, 2));
    if (cube > 0.0) add(ClassK::power(cube, 3));
    if (!acc) throw GainError("gain must have at least one positive coefficient");
    return *acc;
}

int cmd_certify(const CommonOpts& c, const std::string& property, int runs, double beta_scale,
                double beta_rate, double gamma_lin, double gamma_quad, double gamma_cube,
                std::ostream& out) {
    const SystemModel model = resolve_model(c);
    const int order = c.order >= 0 ? c.order : 0;

    BoundSpec spec;
    if (property == "detectability") {
        spec.quantity = Quantity::State;
        spec.beta = ClassKL::exp_decay(ClassK::linear(beta_scale > 0 ? beta_scale : 1.0),
                                       beta_rate > 0 ? beta_rate : 1.0);
        spec.gamma = polynomial_gain(gamma_lin < 0 ? 1.0 : gamma_lin,
                                     gamma_quad < 0 ? 1.0 : gamma_quad,
                                     gamma_cube < 0 ? 0.0 : gamma_cube);
    } else if (property == "stability") {
        spec.quantity = Quantity::InputState;
        spec.beta = ClassKL::exp_decay(ClassK::linear(beta_scale > 0 ? beta_scale : 3.0),
                                       beta_rate > 0 ? beta_rate : 1.0);
        spec.gamma = polynomial_gain(gamma_lin < 0 ? 4.0 : gamma_lin,
                                     gamma_quad < 0 ? 3.0 : gamma_quad,
                                     gamma_cube < 0 ? 0.0 : gamma_cube);
    } else {
        throw ModelError("unknown --property (use detectability or stability)");
    }
    spec.jet_order = order;
    spec.restart_windows = c.uniform;

    EnsembleSpec es;
    es.trajectories = runs > 0 ? runs : 24;
    es.horizon = c.horizon;
    es.dt = c.dt;
    if (c.box > 0.0) es.x0_radius = c.box;
    es.include_switching = true;
    if (c.seed_given) es.seed = c.seed;

    const Ensemble ens = build_ensemble(model, order, es);
    const CertifyResult res = certify(ens, spec);

    json rep = report_head("certify", c);
    rep["model"] = model.name;
    rep["property"] = property;
    rep["jet_order"] = order;
    rep["beta"] = spec.beta.str();
    rep["gamma"] = spec.gamma.str();
    rep["restart_windows"] = spec.restart_windows;
    rep["runs"] = es.trajectories;
    rep["seed"] = es.seed;
    rep["verdict"] = res.verdict == Verdict::Holds      ? "holds"
                     : res.verdict == Verdict::Violated ? "violated"
                                                        : "vacuous";
    rep["margin"] = res.margin;
    rep["checks"] = res.checks;
    rep["runs_used"] = res.runs_used;
    if (res.worst_run >= 0) {
        json w;
        w["run"] = res.worst_run;
        w["label"] = ens.labels.at(res.worst_run);
        w["time"] = res.worst_time;
        w["window_start"] = res.worst_window;
        w["lhs"] = res.worst_lhs;
        w["rhs"] = res.worst_rhs;
        rep["worst"] = w;
    }
    rep["probabilistic"] = true;
    rep["detail"] = res.detail;
    return emit(rep, c, out, res.verdict == Verdict::Holds ? 0 : 1);
}

int cmd_falsify(const CommonOpts& c, int budget, double threshold, std::ostream& out) {
    const SystemModel model = resolve_model(c);
    FalsifyOptions opts;
    opts.jet_order = c.order >= 0 ? c.order : 1;
    if (threshold > 0.0) opts.score_threshold = threshold;
    if (c.seed_given) opts.seed = c.seed;
    opts.dt = c.dt;
    if (c.box > 0.0) opts.x0_radius = c.box;
    if (budget > 0) {
        // Simulations per perturbation pair: outputs x channels x magnitudes x signs.
        const int sweep = static_cast<int>(
            (opts.magnitudes.empty() ? default_magnitude_sweep() : opts.magnitudes).size());
        const int per = std::max(1, model.l() * model.m * sweep * 2);
        opts.perturbations = std::max(1, budget / per);
    }

    const FalsifyResult res = falsify(model, opts);
    json rep = report_head("falsify", c);
    rep["model"] = model.name;
    rep["jet_order"] = opts.jet_order;
    rep["threshold"] = opts.score_threshold;
    rep["seed"] = opts.seed;
    rep["found"] = res.found;
    rep["best_score"] = res.best_score;
    rep["output"] = res.output + 1;
    rep["channel"] = res.channel;
    rep["input_magnitude"] = res.input_magnitude;
    rep["sup_jet"] = res.sup_jet;
    rep["horizon"] = res.horizon;
    rep["x0"] = vector_json(res.x0);
    rep["input_derivs"] = res.input_derivs;
    rep["probabilistic"] = true;
    rep["detail"] = res.detail;
    return emit(rep, c, out, res.found ? 1 : 0);
}

int cmd_lyapunov(const CommonOpts& c, const std::string& v_text, double alpha_coeff,
                 int alpha_pow, double chi_coeff, int chi_pow, int samples, std::ostream& out) {
    const SystemModel model = resolve_model(c);
    DissipationSpec spec;
    if (v_text == "bump-storage") {
        PhiFunction phi{PhiSpec{}};
        spec.V = Expr::external(phi.storage_smooth_fn(), Expr::state(1));
    } else if (!v_text.empty()) {
        spec.V = parse_expr(v_text);
    } else {
        throw ModelError("--v is required (an expression in x1..xn, or bump-storage)");
    }
    spec.alpha = ClassK::power(alpha_coeff, alpha_pow);
    spec.chi = ClassK::power(chi_coeff, chi_pow);
    spec.jet_order = c.order >= 0 ? c.order : 0;
    if (c.box > 0.0) spec.state_box = c.box;
    if (samples > 0) spec.samples = samples;
    if (c.seed_given) spec.seed = c.seed;

    const DissipationReport res = dissipation_check(model, spec);
    json rep = report_head("lyapunov", c);
    rep["model"] = model.name;
    rep["V"] = spec.V.str();
    rep["alpha"] = spec.alpha.str();
    rep["chi"] = spec.chi.str();
    rep["jet_order"] = spec.jet_order;
    rep["samples"] = res.checked;
    rep["seed"] = spec.seed;
    rep["holds"] = res.holds;
    rep["margin"] = res.margin;
    rep["worst_lhs"] = res.worst_lhs;
    rep["worst_rhs"] = res.worst_rhs;
    json worst;
    for (const auto& [var, val] : res.worst) worst[var.str()] = val;
    rep["worst_point"] = worst;
    rep["probabilistic"] = true;
    rep["detail"] = res.detail;
    return emit(rep, c, out, res.holds ? 0 : 1);
}

int cmd_gains(const CommonOpts& c, const std::string& family, std::ostream& out) {
    json rep = report_head("gains", c);
    rep["family"] = family;
    bool pass = true;
    auto check_k = [&](const ClassK& k) {
        const bool ok = k.validate(100.0, 400);
        pass = pass && ok;
        return json{{"formula", k.str()}, {"class_k", ok}};
    };
    auto check_kl = [&](const ClassKL& b) {
        const bool ok = b.validate(100.0, 20.0, 48);
        pass = pass && ok;
        return json{{"formula", b.str()}, {"class_kl", ok}};
    };

    if (family == "overall") {
        const OverallGains og = output_input_gains(ClassK::identity(), ClassK::identity(),
                                                   ClassKL(), ClassK::identity());
        rep["beta"] = check_kl(og.beta);
        rep["gamma"] = check_k(og.gamma);
    } else if (family == "cascade") {
        const CascadeGains cg =
            cascade_gains(ClassKL(), ClassK::identity(), ClassKL(), ClassK::identity(),
                          ClassK::identity(), ClassK::identity(), ClassK::identity());
        rep["beta_drive"] = check_kl(cg.beta_drive);
        rep["beta_driven"] = check_kl(cg.beta_driven);
        rep["gamma_out"] = check_k(cg.gamma_out);
        rep["gamma_jet"] = check_k(cg.gamma_jet);
    } else if (family == "lift") {
        const LiftedGains lg = order_reduction_gains(EstimateFamily{});
        rep["beta1"] = check_kl(lg.beta1);
        rep["beta2"] = check_kl(lg.beta2);
        rep["gamma0"] = check_k(lg.gamma0);
        rep["gamma_top"] = check_k(lg.gamma_top);
        rep["beta1_refined"] = check_kl(lg.beta1_refined);
        rep["beta2_refined"] = check_kl(lg.beta2_refined);
        rep["gamma0_refined"] = check_k(lg.gamma0_refined);
        rep["gamma_top_refined"] = check_k(lg.gamma_top_refined);
        rep["refinement_conservative"] =
            json{{"beta1", lg.beta1_refined_conservative},
                 {"gamma0", lg.gamma0_refined_conservative},
                 {"gamma_top", lg.gamma_top_refined_conservative}};
    } else {
        throw GainError("unknown --family (use overall, cascade, or lift)");
    }
    rep["validation"] = json{{"s_max", 100.0}, {"t_max", 20.0}, {"pass", pass}};
    return emit(rep, c, out, pass ? 0 : 1);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"symbolic-numeric analysis of relative degree, zero dynamics, and "
                 "gain certificates for nonlinear control models",
                 "minphase"};
    app.require_subcommand(0, 1);

    CommonOpts c;
    int exit_code = 0;

    auto add_model_opts = [&](CLI::App* sub) {
        sub->add_option("--corpus", c.corpus, "built-in model key (see corpus-list)");
        sub->add_option("--file", c.file, "model or matrix file path");
        sub->add_option("--out", c.out_path, "also write the JSON report to this path");
    };
    auto add_seed = [&](CLI::App* sub) {
        sub->add_option("--seed", c.seed, "seed for randomized probes")
            ->each([&](const std::string&) { c.seed_given = true; });
    };

    // --- corpus-list
    auto* sc_list = app.add_subcommand("corpus-list", "list built-in models");
    sc_list->add_option("--out", c.out_path, "also write the JSON report to this path");
    sc_list->callback([&] { exit_code = cmd_corpus_list(c, out); });

    // --- validate
    auto* sc_validate = app.add_subcommand("validate", "structural checks on a model");
    add_model_opts(sc_validate);
    add_seed(sc_validate);
    sc_validate->callback([&] { exit_code = cmd_validate(c, out); });

    // --- reldeg
    auto* sc_reldeg =
        app.add_subcommand("reldeg", "decide uniform relative degree (exit 1 when absent)");
    add_model_opts(sc_reldeg);
    add_seed(sc_reldeg);
    sc_reldeg->add_option("--order,-N", c.order, "maximum derivative order scanned");
    sc_reldeg->add_option("--box", c.box, "state box half-width for growth probes");
    sc_reldeg->callback([&] { exit_code = cmd_reldeg(c, out); });

    // --- zeros
    auto* sc_zeros = app.add_subcommand(
        "zeros", "invariant zeros and minimum-phase verdict of a linear system");
    add_model_opts(sc_zeros);
    sc_zeros->callback([&] { exit_code = cmd_zeros(c, out); });

    // --- normalform
    auto* sc_nf = app.add_subcommand(
        "normalform", "coordinate change to output-chain plus internal dynamics");
    add_model_opts(sc_nf);
    sc_nf->callback([&] { exit_code = cmd_normalform(c, out); });

    // --- simulate
    auto* sc_sim = app.add_subcommand("simulate", "integrate a model and export a trajectory");
    add_model_opts(sc_sim);
    std::string x0_text;
    std::string input_spec;
    sc_sim->add_option("--x0", x0_text, "comma-separated initial state (default zeros)");
    sc_sim->add_option("--input", input_spec, "input descriptor JSON (inline or file)");
    sc_sim->add_option("--dt", c.dt, "integration step");
    sc_sim->add_option("--horizon,-T", c.horizon, "final time");
    sc_sim->add_option("--csv", c.csv_path, "write trajectory CSV to this path");
    sc_sim->callback([&] { exit_code = cmd_simulate(c, x0_text, input_spec, out); });

    // --- jets
    auto* sc_jets =
        app.add_subcommand("jets", "symbolic output derivatives and their dependences");
    add_model_opts(sc_jets);
    sc_jets->add_option("--order,-N", c.order, "highest derivative order (default 3)");
    sc_jets->add_option("--x0", x0_text, "start state for the sampled trajectory");
    sc_jets->add_option("--dt", c.dt, "integration step for the sampled trajectory");
    sc_jets->add_option("--horizon,-T", c.horizon, "final time for the sampled trajectory");
    sc_jets->add_option("--csv", c.csv_path, "write numeric jet samples CSV to this path");
    sc_jets->callback([&] { exit_code = cmd_jets(c, x0_text, out); });

    // --- certify
    auto* sc_cert = app.add_subcommand(
        "certify", "check a decay-plus-gain bound on a simulated ensemble (exit 1 if violated)");
    add_model_opts(sc_cert);
    add_seed(sc_cert);
    std::string property = "detectability";
    int runs = 0;
    double beta_scale = -1.0, beta_rate = -1.0;
    double gamma_lin = -1.0, gamma_quad = -1.0, gamma_cube = -1.0;
    sc_cert->add_option("--property", property, "detectability (state bound) or stability");
    sc_cert->add_option("--order,-N", c.order, "output jet order entering the gain term");
    sc_cert->add_option("--runs", runs, "ensemble size (default 24)");
    sc_cert->add_option("--horizon,-T", c.horizon, "simulation horizon");
    sc_cert->add_option("--dt", c.dt, "integration step");
    sc_cert->add_option("--box", c.box, "initial state radius");
    sc_cert->add_option("--beta-scale", beta_scale, "transient coefficient");
    sc_cert->add_option("--beta-rate", beta_rate, "transient decay rate");
    sc_cert->add_option("--gamma-lin", gamma_lin, "linear gain coefficient");
    sc_cert->add_option("--gamma-quad", gamma_quad, "quadratic gain coefficient");
    sc_cert->add_option("--gamma-cube", gamma_cube, "cubic gain coefficient");
    sc_cert->add_flag("--uniform", c.uniform, "also check restarts from interior times");
    sc_cert->callback([&] {
        exit_code = cmd_certify(c, property, runs, beta_scale, beta_rate, gamma_lin, gamma_quad,
                                gamma_cube, out);
    });

    // --- falsify
    auto* sc_fals = app.add_subcommand(
        "falsify", "search for large inputs hidden from the output jet (exit 1 when found)");
    add_model_opts(sc_fals);
    add_seed(sc_fals);
    int budget = 0;
    double threshold = -1.0;
    sc_fals->add_option("--order,-N", c.order, "output jet order the bound may read (default 1)");
    sc_fals->add_option("--budget", budget, "total simulation budget");
    sc_fals->add_option("--threshold", threshold, "score needed to declare a witness");
    sc_fals->add_option("--dt", c.dt, "integration step");
    sc_fals->add_option("--box", c.box, "perturbed start radius");
    sc_fals->callback([&] { exit_code = cmd_falsify(c, budget, threshold, out); });

    // --- lyapunov
    auto* sc_lyap = app.add_subcommand(
        "lyapunov", "sampled dissipation check dV/dx.f <= -alpha(|x|) + chi(|y jet|)");
    add_model_opts(sc_lyap);
    add_seed(sc_lyap);
    std::string v_text;
    double alpha_coeff = 1.0, chi_coeff = 2.0;
    int alpha_pow = 2, chi_pow = 2, samples = 0;
    sc_lyap->add_option("--v", v_text, "storage function expression, or bump-storage");
    sc_lyap->add_option("--alpha-coeff", alpha_coeff, "alpha(s) coefficient");
    sc_lyap->add_option("--alpha-pow", alpha_pow, "alpha(s) exponent");
    sc_lyap->add_option("--chi-coeff", chi_coeff, "chi(s) coefficient");
    sc_lyap->add_option("--chi-pow", chi_pow, "chi(s) exponent");
    sc_lyap->add_option("--order,-N", c.order, "output jet order fed to chi (default 0)");
    sc_lyap->add_option("--box", c.box, "state box half-width");
    sc_lyap->add_option("--samples", samples, "sample count (default 4000)");
    sc_lyap->callback([&] {
        exit_code = cmd_lyapunov(c, v_text, alpha_coeff, alpha_pow, chi_coeff, chi_pow, samples,
                                 out);
    });

    // --- gains
    auto* sc_gains = app.add_subcommand(
        "gains", "compose and validate the certificate gain families");
    std::string family = "overall";
    sc_gains->add_option("--family", family, "overall, cascade, or lift");
    sc_gains->add_option("--out", c.out_path, "also write the JSON report to this path");
    sc_gains->callback([&] { exit_code = cmd_gains(c, family, out); });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
        if (app.get_subcommands().empty()) {
            out << app.help();
            return 0;
        }
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
            out << app.help();
            return 0;
        }
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return exit_code;
}

}  // namespace minphase
