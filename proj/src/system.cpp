#include "minphase/system.hpp"

#include <fstream>
#include <regex>
#include <sstream>

#include "minphase/phi.hpp"

namespace minphase {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& s) {
    std::size_t p = s.find('#');
    return p == std::string::npos ? s : s.substr(0, p);
}

[[noreturn]] void fail(int line, const std::string& msg) {
    throw ModelError("model line " + std::to_string(line) + ": " + msg);
}

Expr parse_rhs(const std::string& text, int line) {
    try {
        return parse_expr(text);
    } catch (const ParseError& e) {
        fail(line, std::string(e.what()) + " (column " + std::to_string(e.column) + ")");
    }
}

}  // namespace

SystemModel parse_model(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    SystemModel model;
    int seen_states = 0;
    int seen_outputs = 0;
    enum class Stage { Header, States, Inputs, Equations } stage = Stage::Header;
    static const std::regex state_lhs(R"(^x(\d+)'$)");
    static const std::regex output_lhs(R"(^y(\d+)$)");

    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;

        if (stage == Stage::Header) {
            std::istringstream ls(line);
            std::string kw;
            ls >> kw >> model.name;
            if (kw != "system" || model.name.empty()) fail(line_no, "expected 'system <name>'");
            stage = Stage::States;
            continue;
        }
        if (stage == Stage::States) {
            std::istringstream ls(line);
            std::string kw;
            ls >> kw >> model.n;
            if (kw != "states" || model.n < 1) fail(line_no, "expected 'states <n>' with n >= 1");
            stage = Stage::Inputs;
            continue;
        }
        if (stage == Stage::Inputs) {
            std::istringstream ls(line);
            std::string kw;
            ls >> kw >> model.m;
            if (kw != "inputs" || model.m < 0) fail(line_no, "expected 'inputs <m>'");
            stage = Stage::Equations;
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(line_no, "expected an '=' assignment");
        const std::string lhs = trim(line.substr(0, eq));
        const std::string rhs = trim(line.substr(eq + 1));
        std::smatch m;
        if (std::regex_match(lhs, m, state_lhs)) {
            const int idx = std::stoi(m[1]);
            if (seen_outputs > 0) fail(line_no, "state equations must precede outputs");
            if (idx != seen_states + 1)
                fail(line_no, "state equations must appear in order (expected x" +
                                  std::to_string(seen_states + 1) + "')");
            model.f.push_back(parse_rhs(rhs, line_no));
            ++seen_states;
        } else if (std::regex_match(lhs, m, output_lhs)) {
            const int idx = std::stoi(m[1]);
            if (seen_states != model.n)
                fail(line_no, "expected " + std::to_string(model.n) + " state equations first");
            if (idx != seen_outputs + 1)
                fail(line_no, "output equations must appear in order (expected y" +
                                  std::to_string(seen_outputs + 1) + ")");
            model.h.push_back(parse_rhs(rhs, line_no));
            ++seen_outputs;
        } else {
            fail(line_no, "left side must be x<i>' or y<i>, got '" + lhs + "'");
        }
    }
    if (stage != Stage::Equations) fail(line_no, "incomplete header");
    if (seen_states != model.n) fail(line_no, "missing state equations");
    if (seen_outputs == 0) fail(line_no, "at least one output equation required");
    return model;
}

SystemModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open model file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

std::string format_model(const SystemModel& model) {
    std::ostringstream out;
    out << "system " << model.name << "\n";
    out << "states " << model.n << "\n";
    out << "inputs " << model.m << "\n";
    for (int i = 0; i < model.n; ++i) out << "x" << (i + 1) << "' = " << model.f[i].str() << "\n";
    for (int i = 0; i < model.l(); ++i) out << "y" << (i + 1) << " = " << model.h[i].str() << "\n";
    return out.str();
}

ValidationReport validate(const SystemModel& model) {
    ValidationReport rep;
    auto violation = [&](const std::string& msg) {
        rep.clean = false;
        rep.violations.push_back(msg);
    };
    if (model.n < 1) violation("state dimension must be >= 1");
    if (model.m < 0) violation("input dimension must be >= 0");
    if (static_cast<int>(model.f.size()) != model.n)
        violation("expected " + std::to_string(model.n) + " state equations, got " +
                  std::to_string(model.f.size()));
    if (model.h.empty()) violation("at least one output required");

    std::set<std::string> params;
    auto scan = [&](const Expr& e, const std::string& where, bool inputs_ok) {
        for (const Var& v : free_variables(e)) {
            switch (v.kind) {
                case VarKind::State:
                    if (v.index < 1 || v.index > model.n)
                        violation(where + ": state x" + std::to_string(v.index) +
                                  " out of range");
                    break;
                case VarKind::Input:
                    if (!inputs_ok)
                        violation(where + ": output maps may not read inputs (u" +
                                  std::to_string(v.index) + ")");
                    else if (v.index < 1 || v.index > model.m)
                        violation(where + ": input u" + std::to_string(v.index) +
                                  " out of range");
                    else if (v.deriv != 0)
                        violation(where + ": dynamics may not read input derivatives");
                    break;
                case VarKind::Param: params.insert(v.name); break;
            }
        }
    };
    for (std::size_t i = 0; i < model.f.size(); ++i)
        scan(model.f[i], "x" + std::to_string(i + 1) + "'", true);
    for (std::size_t i = 0; i < model.h.size(); ++i)
        scan(model.h[i], "y" + std::to_string(i + 1), false);
    rep.parameters.assign(params.begin(), params.end());
    return rep;
}

AffineDecomposition affine_decompose(const SystemModel& model, std::uint64_t seed) {
    AffineDecomposition dec;
    dec.affine = true;
    dec.g.assign(model.m, std::vector<Expr>(model.n, Expr::constant(0.0)));
    for (int j = 0; j < model.m && dec.affine; ++j) {
        for (int i = 0; i < model.n; ++i) {
            Expr gji = simplify(differentiate(model.f[i], Var::input(j + 1)));
            for (int k = 0; k < model.m; ++k) {
                ZeroVerdict second =
                    is_identically_zero(differentiate(gji, Var::input(k + 1)), 32, seed);
                dec.probabilistic = dec.probabilistic || second.probabilistic;
                if (second.outcome == ZeroOutcome::Nonzero) {
                    dec.affine = false;
                    dec.obstruction = "x" + std::to_string(i + 1) + "' is not affine in u" +
                                      std::to_string(j + 1) + " (second partial wrt u" +
                                      std::to_string(k + 1) + " is nonzero)";
                    break;
                }
                if (second.outcome == ZeroOutcome::Unknown) {
                    dec.affine = false;
                    dec.obstruction = "could not decide affineness of x" + std::to_string(i + 1) +
                                      "' in u" + std::to_string(j + 1);
                    break;
                }
            }
            if (!dec.affine) break;
            dec.g[j][i] = gji;
        }
    }
    if (!dec.affine) return dec;

    dec.f0.reserve(model.n);
    for (int i = 0; i < model.n; ++i) {
        Expr drift = model.f[i];
        for (int j = 0; j < model.m; ++j)
            drift = substitute(drift, Var::input(j + 1), Expr::constant(0.0));
        dec.f0.push_back(simplify(drift));
    }

    dec.verified = true;
    for (int i = 0; i < model.n; ++i) {
        Expr recomposed = dec.f0[i];
        for (int j = 0; j < model.m; ++j)
            recomposed = recomposed + dec.g[j][i] * Expr::input(j + 1);
        ZeroVerdict residual = is_identically_zero(model.f[i] - recomposed, 48, seed);
        dec.probabilistic = dec.probabilistic || residual.probabilistic;
        if (residual.outcome != ZeroOutcome::Zero) {
            dec.verified = false;
            dec.affine = false;
            dec.obstruction = "recomposition residual nonzero for x" + std::to_string(i + 1) + "'";
            break;
        }
    }
    return dec;
}

namespace {

const PhiFunction& shared_phi() {
    static const PhiFunction phi;
    return phi;
}

CorpusEntry entry_from_text(const std::string& text, const std::string& blurb) {
    CorpusEntry e;
    e.model = parse_model(text);
    e.blurb = blurb;
    return e;
}

CorpusEntry normal_form_default() {
    // Chain of three integrators closed by a bilinear drift term, with a
    // one-dimensional internal state that is input-to-state stable in x1.
    const Expr x1 = Expr::state(1);
    const Expr x4 = Expr::state(4);
    CorpusEntry e;
    e.model = make_normal_form_model(3, x1 * x4, Expr::constant(1.0),
                                     {-x4 + x1 * x1});
    e.model.name = "normal_form_r";
    e.blurb = "output chain of length three over a stable internal state";
    return e;
}

CorpusEntry make_example1(const std::string& key, double c0, double c1, const std::string& blurb) {
    Eigen::MatrixXd A(3, 3);
    A << 0, 1, 0, 0, 0, 1, -6, -11, -6;
    Eigen::MatrixXd B(3, 1);
    B << 0, 0, 1;
    Eigen::MatrixXd C(1, 3);
    C << c0, c1, 0;
    CorpusEntry e = make_linear_model(key, A, B, C);
    e.blurb = blurb;
    return e;
}

}  // namespace

std::vector<std::string> corpus_keys() {
    return {"eq25",     "cascade",  "example1_linear",  "example1_nmp", "double_integrator",
            "integrator", "sigma1", "example6_cascade", "ysq",          "yatan",
            "example4", "example5", "normal_form_r",    "bump_chain"};
}

CorpusEntry builtin(const std::string& key) {
    if (key == "eq25")
        return entry_from_text(
            "system eq25\nstates 2\ninputs 1\n"
            "x1' = u1\nx2' = -x2 + u1^2\ny1 = x1\n",
            "integrator output, squared input feeding a hidden stable lag");
    if (key == "cascade")
        return entry_from_text(
            "system cascade\nstates 3\ninputs 1\n"
            "x1' = -x1 + u1\nx2' = x1\nx3' = -x3 + x1^2\ny1 = x2\n",
            "first-order lag driving the eq25 block through its input");
    if (key == "sigma1") {
        // Drift-only scalar system whose output gain collapses on a train of
        // narrowing bumps: zero-detectable, but only barely (see example6_cascade).
        const PhiFunction& phi = shared_phi();
        SystemModel model;
        model.name = "sigma1";
        model.n = 1;
        model.m = 0;
        model.f.push_back(Expr::constant(1.0));
        model.h.push_back(Expr::external(phi.h1_smooth_fn(), Expr::state(1)));
        CorpusEntry e;
        e.model = model;
        e.blurb = "unit-rate drift observed through the bump-train output map";
        return e;
    }
    if (key == "example6_cascade") {
        // sigma1 feeding an integrator: the integrated output stays below the
        // bump train's absolute integral while the drifting state is unbounded.
        const PhiFunction& phi = shared_phi();
        SystemModel model;
        model.name = "example6_cascade";
        model.n = 2;
        model.m = 0;
        model.f.push_back(Expr::constant(1.0));
        model.f.push_back(Expr::external(phi.h1_smooth_fn(), Expr::state(1)));
        model.h.push_back(Expr::state(2));
        CorpusEntry e;
        e.model = model;
        e.blurb = "bump-train output integrated: bounded output, unbounded state";
        return e;
    }
    if (key == "integrator")
        return entry_from_text("system integrator\nstates 1\ninputs 1\nx1' = u1\ny1 = x1\n",
                               "single integrator, full-state output");
    if (key == "double_integrator")
        return entry_from_text(
            "system double_integrator\nstates 2\ninputs 1\n"
            "x1' = x2\nx2' = u1\ny1 = x1\n",
            "double integrator, position output");
    if (key == "ysq")
        return entry_from_text("system ysq\nstates 1\ninputs 1\nx1' = u1^2\ny1 = x1\n",
                               "output derivative equals the squared input");
    if (key == "yatan")
        return entry_from_text("system yatan\nstates 1\ninputs 1\nx1' = atan(u1)\ny1 = x1\n",
                               "output derivative saturates: atan of the input");
    if (key == "example4")
        return entry_from_text(
            "system example4\nstates 4\ninputs 2\n"
            "x1' = u1\nx2' = x3 + u1^2\nx3' = u2\nx4' = -x4 + x1^3\n"
            "y1 = x1\ny2 = x2\n",
            "two-input two-output system whose second input surfaces only in "
            "second output derivatives");
    if (key == "example5")
        return entry_from_text(
            "system example5\nstates 4\ninputs 2\n"
            "x1' = u1\nx2' = x3 + x2*u2\nx3' = u2\nx4' = -x4 + x1^3\n"
            "y1 = x1\ny2 = x2\n",
            "like example4 but the second input rides on a state that can vanish");
    if (key == "normal_form_r")
        return normal_form_default();
    if (key == "example1_linear")
        return make_example1("example1_linear", 4.0, 1.0,
                             "stable 3rd-order companion system, zero at -4");
    if (key == "example1_nmp")
        return make_example1("example1_nmp", -1.0, 1.0,
                             "stable 3rd-order companion system, zero at +1");
    if (key == "bump_chain") {
        const PhiFunction& phi = shared_phi();
        SystemModel model;
        model.name = "bump_chain";
        model.n = 1;
        model.m = 1;
        Expr x1 = Expr::state(1);
        model.f.push_back(-x1 + Expr::external(phi.as_smooth_fn(), x1) * Expr::input(1));
        model.h.push_back(x1);
        CorpusEntry e;
        e.model = model;
        e.blurb = "stable lag whose input gain is a narrow bump train in the state";
        return e;
    }
    throw ModelError("unknown corpus key: " + key);
}

CorpusEntry make_linear_model(const std::string& name, const Eigen::MatrixXd& A,
                              const Eigen::MatrixXd& B, const Eigen::MatrixXd& C) {
    const int n = static_cast<int>(A.rows());
    if (A.cols() != n || B.rows() != n || C.cols() != n)
        throw ModelError("make_linear_model: inconsistent matrix dimensions");
    SystemModel model;
    model.name = name;
    model.n = n;
    model.m = static_cast<int>(B.cols());
    auto linear_comb = [&](const Eigen::RowVectorXd& state_row,
                           const Eigen::RowVectorXd& input_row) {
        Expr acc = Expr::constant(0.0);
        for (int j = 0; j < state_row.size(); ++j)
            if (state_row[j] != 0.0)
                acc = acc + Expr::constant(state_row[j]) * Expr::state(j + 1);
        for (int j = 0; j < input_row.size(); ++j)
            if (input_row[j] != 0.0)
                acc = acc + Expr::constant(input_row[j]) * Expr::input(j + 1);
        return simplify(acc);
    };
    for (int i = 0; i < n; ++i) model.f.push_back(linear_comb(A.row(i), B.row(i)));
    for (int i = 0; i < C.rows(); ++i)
        model.h.push_back(linear_comb(C.row(i), Eigen::RowVectorXd::Zero(0)));
    CorpusEntry e;
    e.model = model;
    e.linear = LinearData{A, B, C};
    return e;
}

SystemModel make_normal_form_model(int r, const Expr& drift, const Expr& gain,
                                   const std::vector<Expr>& internal) {
    if (r < 1) throw ModelError("make_normal_form_model: r must be >= 1");
    SystemModel model;
    model.name = "normal_form_r" + std::to_string(r);
    model.n = r + static_cast<int>(internal.size());
    model.m = 1;
    for (int i = 1; i < r; ++i) model.f.push_back(Expr::state(i + 1));
    model.f.push_back(simplify(drift + gain * Expr::input(1)));
    for (const Expr& qi : internal) model.f.push_back(qi);
    model.h.push_back(Expr::state(1));
    return model;
}

}  // namespace minphase
