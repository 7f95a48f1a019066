#include "minphase/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

namespace minphase {

namespace {

constexpr double kDivGuard = 1e-12;

std::string format_double(double v) {
    // Shortest representation that round-trips.
    std::ostringstream os;
    for (int prec = 1; prec <= 17; ++prec) {
        os.str("");
        os.precision(prec);
        os << v;
        if (std::stod(os.str()) == v) break;
    }
    return os.str();
}

}  // namespace

std::string Var::str() const {
    switch (kind) {
        case VarKind::State:
            return "x" + std::to_string(index);
        case VarKind::Input: {
            std::string s = "u" + std::to_string(index);
            s.append(static_cast<std::size_t>(deriv), '\'');
            return s;
        }
        case VarKind::Param:
            return name;
    }
    return "?";
}

std::shared_ptr<const ExprNode> Expr::constant_node(double c) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Constant;
    n->value = c;
    return n;
}

Expr Expr::constant(double c) { return Expr(constant_node(c)); }

Expr Expr::variable(const Var& v) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Variable;
    n->var = v;
    return Expr(std::move(n));
}

Expr Expr::unary(UnOp op, const Expr& a) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Unary;
    n->un = op;
    n->a = a.ptr();
    return Expr(std::move(n));
}

Expr Expr::binary(BinOp op, const Expr& a, const Expr& b) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Binary;
    n->bin = op;
    n->a = a.ptr();
    n->b = b.ptr();
    return Expr(std::move(n));
}

Expr Expr::pow(const Expr& base, int exponent) {
    if (exponent < 0) throw std::invalid_argument("pow: exponent must be non-negative");
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Pow;
    n->a = base.ptr();
    n->exponent = exponent;
    return Expr(std::move(n));
}

Expr Expr::external(std::shared_ptr<const SmoothFn> fn, const Expr& arg, int deriv) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::External;
    n->fn = std::move(fn);
    n->fn_deriv = deriv;
    n->a = arg.ptr();
    return Expr(std::move(n));
}

bool Expr::is_constant(double c) const {
    return is_constant() && node_->value == c;
}

// ---------------------------------------------------------------------------
// Printing

namespace {

// Precedence levels: additive 1, multiplicative 2, power 3, atom 4.
void print_node(std::ostringstream& os, const ExprNode& n, int parent_prec);

void print_child(std::ostringstream& os, const ExprNode& n, int prec, bool parens_on_equal) {
    int own;
    switch (n.kind) {
        case ExprNode::Kind::Constant:
            own = (n.value < 0) ? 1 : 4;
            break;
        case ExprNode::Kind::Variable:
        case ExprNode::Kind::External:
            own = 4;
            break;
        case ExprNode::Kind::Pow:
            own = 3;
            break;
        case ExprNode::Kind::Unary:
            own = (n.un == UnOp::Neg) ? 1 : 4;
            break;
        case ExprNode::Kind::Binary:
            own = (n.bin == BinOp::Add || n.bin == BinOp::Sub) ? 1 : 2;
            break;
        default:
            own = 4;
    }
    bool parens = own < prec || (own == prec && parens_on_equal);
    if (parens) os << '(';
    print_node(os, n, parens ? 0 : prec);
    if (parens) os << ')';
}

const char* un_name(UnOp op) {
    switch (op) {
        case UnOp::Neg: return "-";
        case UnOp::Sin: return "sin";
        case UnOp::Cos: return "cos";
        case UnOp::Exp: return "exp";
        case UnOp::Atan: return "atan";
        case UnOp::Tanh: return "tanh";
    }
    return "?";
}

void print_node(std::ostringstream& os, const ExprNode& n, int) {
    switch (n.kind) {
        case ExprNode::Kind::Constant:
            os << format_double(n.value);
            break;
        case ExprNode::Kind::Variable:
            os << n.var.str();
            break;
        case ExprNode::Kind::Unary:
            if (n.un == UnOp::Neg) {
                os << '-';
                print_child(os, *n.a, 2, false);
            } else {
                os << un_name(n.un) << '(';
                print_node(os, *n.a, 0);
                os << ')';
            }
            break;
        case ExprNode::Kind::Binary: {
            const char sym = n.bin == BinOp::Add ? '+' : n.bin == BinOp::Sub ? '-'
                           : n.bin == BinOp::Mul ? '*' : '/';
            int prec = (n.bin == BinOp::Add || n.bin == BinOp::Sub) ? 1 : 2;
            print_child(os, *n.a, prec, false);
            os << sym;
            // Right operand of '-' and '/' needs parens at equal precedence.
            print_child(os, *n.b, prec, n.bin == BinOp::Sub || n.bin == BinOp::Div);
            break;
        }
        case ExprNode::Kind::Pow:
            print_child(os, *n.a, 4, true);
            os << '^' << n.exponent;
            break;
        case ExprNode::Kind::External:
            os << n.fn->name;
            os << std::string(static_cast<std::size_t>(n.fn_deriv), '\'');
            os << '(';
            print_node(os, *n.a, 0);
            os << ')';
            break;
    }
}

}  // namespace

std::string Expr::str() const {
    std::ostringstream os;
    print_node(os, *node_, 0);
    return os.str();
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Parser {
    const std::string& text;
    std::size_t pos = 0;
    int line = 1, col = 1;

    explicit Parser(const std::string& t) : text(t) {}

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg + " at line " + std::to_string(line) + ", column " +
                             std::to_string(col),
                         line, col);
    }

    void skip_ws() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) advance();
    }

    void advance() {
        if (text[pos] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            advance();
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }

    Expr parse() {
        Expr e = expr();
        skip_ws();
        if (pos != text.size()) fail("unexpected trailing input");
        return e;
    }

    Expr expr() {
        Expr e = term();
        for (;;) {
            if (eat('+')) e = e + term();
            else if (eat('-')) e = e - term();
            else return e;
        }
    }

    Expr term() {
        Expr e = factor();
        for (;;) {
            if (eat('*')) e = e * factor();
            else if (eat('/')) e = e / factor();
            else return e;
        }
    }

    Expr factor() {
        Expr e = base();
        if (eat('^')) {
            skip_ws();
            if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos])))
                fail("expected unsigned integer exponent");
            int v = 0;
            while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
                v = v * 10 + (text[pos] - '0');
                if (v > 64) fail("exponent too large");
                advance();
            }
            return Expr::pow(e, v);
        }
        return e;
    }

    Expr base() {
        skip_ws();
        if (pos >= text.size()) fail("unexpected end of expression");
        char c = text[pos];
        if (c == '-') {
            advance();
            return -base();
        }
        if (c == '(') {
            advance();
            Expr e = expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return ident();
        fail(std::string("unexpected character '") + c + "'");
    }

    Expr number() {
        std::size_t start = pos;
        while (pos < text.size() &&
               (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.'))
            advance();
        // Exponent suffix like 1e-3.
        if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
            std::size_t save = pos;
            advance();
            if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) advance();
            if (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
                while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos])))
                    advance();
            } else {
                pos = save;  // not an exponent; leave 'e' for identifier handling
            }
        }
        double v = 0;
        auto sv = text.substr(start, pos - start);
        std::size_t used = 0;
        try {
            v = std::stod(sv, &used);
        } catch (const std::exception&) {
            fail("bad number '" + sv + "'");
        }
        if (used != sv.size()) fail("bad number '" + sv + "'");
        return Expr::constant(v);
    }

    Expr ident() {
        std::size_t start = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos]))))
            advance();
        std::string name = text.substr(start, pos - start);
        static const char* funcs[] = {"sin", "cos", "exp", "atan", "tanh"};
        for (const char* f : funcs) {
            if (name == f) {
                if (!eat('(')) fail("expected '(' after function " + name);
                Expr arg = expr();
                if (!eat(')')) fail("expected ')'");
                if (name == "sin") return sin(arg);
                if (name == "cos") return cos(arg);
                if (name == "exp") return exp(arg);
                if (name == "atan") return atan(arg);
                return tanh(arg);
            }
        }
        auto classify = [&]() -> std::optional<Var> {
            if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'u')) {
                bool digits = std::all_of(name.begin() + 1, name.end(), [](char ch) {
                    return std::isdigit(static_cast<unsigned char>(ch));
                });
                if (digits) {
                    int idx = std::stoi(name.substr(1));
                    if (idx < 1) return std::nullopt;
                    return name[0] == 'x' ? Var::state(idx) : Var::input(idx);
                }
            }
            bool letters = std::all_of(name.begin(), name.end(), [](char ch) {
                return std::isalpha(static_cast<unsigned char>(ch));
            });
            if (letters) return Var::param(name);
            return std::nullopt;
        };
        auto v = classify();
        if (!v) fail("unknown identifier '" + name + "'");
        return Expr::variable(*v);
    }
};

}  // namespace

Expr parse_expr(const std::string& text) {
    Parser p(text);
    return p.parse();
}

// ---------------------------------------------------------------------------
// Evaluation

double evaluate(const Expr& e, const Bindings& b) {
    const ExprNode& n = e.node();
    switch (n.kind) {
        case ExprNode::Kind::Constant:
            return n.value;
        case ExprNode::Kind::Variable: {
            auto it = b.find(n.var);
            if (it == b.end()) throw EvalError("unbound variable " + n.var.str());
            return it->second;
        }
        case ExprNode::Kind::Unary: {
            double a = evaluate(Expr(n.a), b);
            switch (n.un) {
                case UnOp::Neg: return -a;
                case UnOp::Sin: return std::sin(a);
                case UnOp::Cos: return std::cos(a);
                case UnOp::Exp: return std::exp(a);
                case UnOp::Atan: return std::atan(a);
                case UnOp::Tanh: return std::tanh(a);
            }
            throw EvalError("bad unary op");
        }
        case ExprNode::Kind::Binary: {
            double a = evaluate(Expr(n.a), b);
            double v = evaluate(Expr(n.b), b);
            switch (n.bin) {
                case BinOp::Add: return a + v;
                case BinOp::Sub: return a - v;
                case BinOp::Mul: return a * v;
                case BinOp::Div:
                    if (std::abs(v) < kDivGuard)
                        throw DomainError("division by value below guard threshold");
                    return a / v;
            }
            throw EvalError("bad binary op");
        }
        case ExprNode::Kind::Pow: {
            double a = evaluate(Expr(n.a), b);
            double r = 1.0;
            for (int i = 0; i < n.exponent; ++i) r *= a;
            return r;
        }
        case ExprNode::Kind::External:
            return n.fn->eval(evaluate(Expr(n.a), b), n.fn_deriv);
    }
    throw EvalError("bad node");
}

// ---------------------------------------------------------------------------
// Differentiation

Expr differentiate(const Expr& e, const Var& v) {
    const ExprNode& n = e.node();
    switch (n.kind) {
        case ExprNode::Kind::Constant:
            return Expr::constant(0.0);
        case ExprNode::Kind::Variable:
            return Expr::constant(n.var == v ? 1.0 : 0.0);
        case ExprNode::Kind::Unary: {
            Expr a(n.a);
            Expr da = differentiate(a, v);
            switch (n.un) {
                case UnOp::Neg: return -da;
                case UnOp::Sin: return cos(a) * da;
                case UnOp::Cos: return -(sin(a) * da);
                case UnOp::Exp: return exp(a) * da;
                case UnOp::Atan:
                    return da / (Expr::constant(1.0) + Expr::pow(a, 2));
                case UnOp::Tanh:
                    return (Expr::constant(1.0) - Expr::pow(tanh(a), 2)) * da;
            }
            throw EvalError("bad unary op");
        }
        case ExprNode::Kind::Binary: {
            Expr a(n.a), b(n.b);
            Expr da = differentiate(a, v), db = differentiate(b, v);
            switch (n.bin) {
                case BinOp::Add: return da + db;
                case BinOp::Sub: return da - db;
                case BinOp::Mul: return da * b + a * db;
                case BinOp::Div:
                    return (da * b - a * db) / Expr::pow(b, 2);
            }
            throw EvalError("bad binary op");
        }
        case ExprNode::Kind::Pow: {
            if (n.exponent == 0) return Expr::constant(0.0);
            Expr a(n.a);
            Expr da = differentiate(a, v);
            if (n.exponent == 1) return da;
            return Expr::constant(n.exponent) * Expr::pow(a, n.exponent - 1) * da;
        }
        case ExprNode::Kind::External: {
            Expr a(n.a);
            Expr da = differentiate(a, v);
            return Expr::external(n.fn, a, n.fn_deriv + 1) * da;
        }
    }
    throw EvalError("bad node");
}

Expr substitute(const Expr& e, const Var& v, const Expr& r) {
    const ExprNode& n = e.node();
    switch (n.kind) {
        case ExprNode::Kind::Constant:
            return e;
        case ExprNode::Kind::Variable:
            return n.var == v ? r : e;
        case ExprNode::Kind::Unary:
            return Expr::unary(n.un, substitute(Expr(n.a), v, r));
        case ExprNode::Kind::Binary:
            return Expr::binary(n.bin, substitute(Expr(n.a), v, r), substitute(Expr(n.b), v, r));
        case ExprNode::Kind::Pow:
            return Expr::pow(substitute(Expr(n.a), v, r), n.exponent);
        case ExprNode::Kind::External:
            return Expr::external(n.fn, substitute(Expr(n.a), v, r), n.fn_deriv);
    }
    throw EvalError("bad node");
}

// ---------------------------------------------------------------------------
// Simplification

namespace {

bool all_constant_children(const ExprNode& n) {
    auto is_const = [](const std::shared_ptr<const ExprNode>& p) {
        return !p || p->kind == ExprNode::Kind::Constant;
    };
    return is_const(n.a) && is_const(n.b);
}

// Splits a (already simplified) term into coefficient times base.
std::pair<double, Expr> split_coefficient(const Expr& e) {
    const ExprNode& n = e.node();
    if (n.kind == ExprNode::Kind::Unary && n.un == UnOp::Neg) {
        auto [c, base] = split_coefficient(Expr(n.a));
        return {-c, base};
    }
    if (n.kind == ExprNode::Kind::Binary && n.bin == BinOp::Mul &&
        n.a->kind == ExprNode::Kind::Constant) {
        return {n.a->value, Expr(n.b)};
    }
    return {1.0, e};
}

void flatten_additive(const Expr& e, double sign, std::vector<std::pair<double, Expr>>& terms,
                      double& constant) {
    const ExprNode& n = e.node();
    if (n.kind == ExprNode::Kind::Constant) {
        constant += sign * n.value;
        return;
    }
    if (n.kind == ExprNode::Kind::Binary && (n.bin == BinOp::Add || n.bin == BinOp::Sub)) {
        flatten_additive(Expr(n.a), sign, terms, constant);
        flatten_additive(Expr(n.b), n.bin == BinOp::Add ? sign : -sign, terms, constant);
        return;
    }
    if (n.kind == ExprNode::Kind::Unary && n.un == UnOp::Neg) {
        flatten_additive(Expr(n.a), -sign, terms, constant);
        return;
    }
    auto [c, base] = split_coefficient(e);
    terms.emplace_back(sign * c, base);
}

Expr make_term(double coeff, const Expr& base) {
    if (coeff == 1.0) return base;
    if (coeff == -1.0) return -base;
    return Expr::constant(coeff) * base;
}

Expr rebuild_sum(std::vector<std::pair<double, Expr>>& terms, double constant) {
    // Deterministic order: sort by printed base.
    std::stable_sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
        return a.second.str() < b.second.str();
    });
    // Merge equal bases.
    std::vector<std::pair<double, Expr>> merged;
    for (auto& [c, base] : terms) {
        if (!merged.empty() && merged.back().second.str() == base.str())
            merged.back().first += c;
        else
            merged.emplace_back(c, base);
    }
    double scale = std::abs(constant);
    for (auto& [c, _] : merged) scale += std::abs(c);
    Expr out = Expr::constant(0.0);
    bool have = false;
    for (auto& [c, base] : merged) {
        if (std::abs(c) <= 1e-14 * (scale + 1.0)) continue;
        if (!have) {
            out = make_term(c, base);
            have = true;
        } else if (c >= 0) {
            out = out + make_term(c, base);
        } else {
            out = out - make_term(-c, base);
        }
    }
    if (std::abs(constant) > 1e-14 * (scale + 1.0)) {
        if (!have) return Expr::constant(constant);
        out = constant >= 0 ? out + Expr::constant(constant)
                            : out - Expr::constant(-constant);
    } else if (!have) {
        return Expr::constant(0.0);
    }
    return out;
}

Expr simplify_node(const Expr& e);

Expr simplify_mul(const Expr& a, const Expr& b) {
    if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
    if (a.is_constant(1.0)) return b;
    if (b.is_constant(1.0)) return a;
    if (a.is_constant() && b.is_constant()) return Expr::constant(a.node().value * b.node().value);
    // Canonical form: constant coefficient on the left, folded through nested products.
    auto [ca, ba] = split_coefficient(a);
    auto [cb, bb] = split_coefficient(b);
    double c = ca * cb;
    Expr prod = ba.is_constant(1.0) ? bb : (bb.is_constant(1.0) ? ba : ba * bb);
    if (c == 1.0) return prod;
    if (c == 0.0) return Expr::constant(0.0);
    if (prod.is_constant()) return Expr::constant(c * prod.node().value);
    return Expr::constant(c) * prod;
}

Expr simplify_node(const Expr& e) {
    const ExprNode& n = e.node();
    switch (n.kind) {
        case ExprNode::Kind::Constant:
        case ExprNode::Kind::Variable:
            return e;
        case ExprNode::Kind::Unary: {
            Expr a = simplify_node(Expr(n.a));
            if (n.un == UnOp::Neg) {
                if (a.is_constant()) return Expr::constant(-a.node().value);
                const ExprNode& an = a.node();
                if (an.kind == ExprNode::Kind::Unary && an.un == UnOp::Neg) return Expr(an.a);
                // Fold the sign into additive structure for canonical collection.
                std::vector<std::pair<double, Expr>> terms;
                double constant = 0.0;
                flatten_additive(a, -1.0, terms, constant);
                return rebuild_sum(terms, constant);
            }
            if (a.is_constant()) {
                Bindings empty;
                return Expr::constant(evaluate(Expr::unary(n.un, a), empty));
            }
            return Expr::unary(n.un, a);
        }
        case ExprNode::Kind::Binary: {
            Expr a = simplify_node(Expr(n.a));
            Expr b = simplify_node(Expr(n.b));
            switch (n.bin) {
                case BinOp::Add:
                case BinOp::Sub: {
                    std::vector<std::pair<double, Expr>> terms;
                    double constant = 0.0;
                    flatten_additive(a, 1.0, terms, constant);
                    flatten_additive(b, n.bin == BinOp::Add ? 1.0 : -1.0, terms, constant);
                    return rebuild_sum(terms, constant);
                }
                case BinOp::Mul:
                    return simplify_mul(a, b);
                case BinOp::Div: {
                    if (a.is_constant(0.0)) return Expr::constant(0.0);
                    if (b.is_constant(1.0)) return a;
                    if (b.is_constant() && std::abs(b.node().value) >= kDivGuard) {
                        if (a.is_constant())
                            return Expr::constant(a.node().value / b.node().value);
                        return simplify_mul(Expr::constant(1.0 / b.node().value), a);
                    }
                    return a / b;
                }
            }
            throw EvalError("bad binary op");
        }
        case ExprNode::Kind::Pow: {
            Expr a = simplify_node(Expr(n.a));
            if (n.exponent == 0) return Expr::constant(1.0);
            if (n.exponent == 1) return a;
            if (a.is_constant()) {
                double r = 1.0;
                for (int i = 0; i < n.exponent; ++i) r *= a.node().value;
                return Expr::constant(r);
            }
            return Expr::pow(a, n.exponent);
        }
        case ExprNode::Kind::External: {
            Expr a = simplify_node(Expr(n.a));
            return Expr::external(n.fn, a, n.fn_deriv);
        }
    }
    throw EvalError("bad node");
}

}  // namespace

Expr simplify(const Expr& e) { return simplify_node(e); }

std::set<Var> free_variables(const Expr& e) {
    std::set<Var> out;
    std::function<void(const ExprNode&)> walk = [&](const ExprNode& n) {
        if (n.kind == ExprNode::Kind::Variable) out.insert(n.var);
        if (n.a) walk(*n.a);
        if (n.b) walk(*n.b);
    };
    walk(e.node());
    return out;
}

double uniform_draw(std::uint64_t raw, double lo, double hi) {
    double u = static_cast<double>(raw >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
}

ZeroVerdict is_identically_zero(const Expr& e, int trials, std::uint64_t seed) {
    Expr s = simplify(e);
    ZeroVerdict v;
    if (s.is_constant()) {
        v.outcome = std::abs(s.node().value) <= 1e-9 ? ZeroOutcome::Zero : ZeroOutcome::Nonzero;
        v.probabilistic = false;
        if (v.outcome == ZeroOutcome::Nonzero) {
            v.witness = Bindings{};
            v.witness_value = s.node().value;
        }
        return v;
    }
    auto vars = free_variables(s);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    int successes = 0;
    for (int t = 0; t < trials; ++t) {
        Bindings b;
        for (const Var& var : vars) b[var] = uniform_draw(rng(), -10.0, 10.0);
        try {
            double val = evaluate(s, b);
            if (!std::isfinite(val)) continue;
            ++successes;
            if (std::abs(val) > 1e-9) {
                v.outcome = ZeroOutcome::Nonzero;
                v.probabilistic = true;
                v.witness = b;
                v.witness_value = val;
                return v;
            }
        } catch (const DomainError&) {
            continue;
        }
    }
    if (successes == 0) {
        v.outcome = ZeroOutcome::Unknown;
        v.probabilistic = true;
        return v;
    }
    v.outcome = ZeroOutcome::Zero;
    v.probabilistic = true;
    return v;
}

// ---------------------------------------------------------------------------
// Compiled evaluation

CompiledExpr CompiledExpr::compile(const Expr& e, const std::vector<Var>& layout) {
    CompiledExpr c;
    std::map<Var, int> slots;
    for (std::size_t i = 0; i < layout.size(); ++i) slots[layout[i]] = static_cast<int>(i);
    std::function<void(const ExprNode&)> emit = [&](const ExprNode& n) {
        switch (n.kind) {
            case ExprNode::Kind::Constant:
                c.code_.push_back({Instr::Op::PushConst, n.value, 0, {}, {}, 0, nullptr, 0});
                break;
            case ExprNode::Kind::Variable: {
                auto it = slots.find(n.var);
                if (it == slots.end())
                    throw EvalError("variable " + n.var.str() + " missing from layout");
                c.code_.push_back({Instr::Op::PushVar, 0.0, it->second, {}, {}, 0, nullptr, 0});
                break;
            }
            case ExprNode::Kind::Unary:
                emit(*n.a);
                c.code_.push_back({Instr::Op::Un, 0.0, 0, n.un, {}, 0, nullptr, 0});
                break;
            case ExprNode::Kind::Binary:
                emit(*n.a);
                emit(*n.b);
                c.code_.push_back({Instr::Op::Bin, 0.0, 0, {}, n.bin, 0, nullptr, 0});
                break;
            case ExprNode::Kind::Pow:
                emit(*n.a);
                c.code_.push_back({Instr::Op::Pow, 0.0, 0, {}, {}, n.exponent, nullptr, 0});
                break;
            case ExprNode::Kind::External:
                emit(*n.a);
                c.code_.push_back({Instr::Op::Ext, 0.0, 0, {}, {}, 0, n.fn.get(), n.fn_deriv});
                break;
        }
    };
    emit(e.node());
    return c;
}

double CompiledExpr::eval(const double* slots) const {
    auto& st = stack_;
    st.clear();
    for (const Instr& in : code_) {
        switch (in.op) {
            case Instr::Op::PushConst:
                st.push_back(in.value);
                break;
            case Instr::Op::PushVar:
                st.push_back(slots[in.slot]);
                break;
            case Instr::Op::Un: {
                double& a = st.back();
                switch (in.un) {
                    case UnOp::Neg: a = -a; break;
                    case UnOp::Sin: a = std::sin(a); break;
                    case UnOp::Cos: a = std::cos(a); break;
                    case UnOp::Exp: a = std::exp(a); break;
                    case UnOp::Atan: a = std::atan(a); break;
                    case UnOp::Tanh: a = std::tanh(a); break;
                }
                break;
            }
            case Instr::Op::Bin: {
                double b = st.back();
                st.pop_back();
                double& a = st.back();
                switch (in.bin) {
                    case BinOp::Add: a += b; break;
                    case BinOp::Sub: a -= b; break;
                    case BinOp::Mul: a *= b; break;
                    case BinOp::Div:
                        if (std::abs(b) < kDivGuard)
                            throw DomainError("division by value below guard threshold");
                        a /= b;
                        break;
                }
                break;
            }
            case Instr::Op::Pow: {
                double& a = st.back();
                double r = 1.0;
                for (int i = 0; i < in.exponent; ++i) r *= a;
                a = r;
                break;
            }
            case Instr::Op::Ext: {
                double& a = st.back();
                a = in.fn->eval(a, in.fn_deriv);
                break;
            }
        }
    }
    return st.back();
}

}  // namespace minphase
