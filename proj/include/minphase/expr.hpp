#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace minphase {

struct ParseError : std::runtime_error {
    int line, column;
    ParseError(const std::string& msg, int line_, int col_)
        : std::runtime_error(msg), line(line_), column(col_) {}
};

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a value leaves the domain of an operation (division by ~0,
// external-function derivative order not available, ...).  Distinct from
// EvalError so probabilistic zero testing can skip bad sample points.
struct DomainError : EvalError {
    using EvalError::EvalError;
};

enum class VarKind { State, Input, Param };

// A variable: state x<i>, input derivative u<j>^(d) (d=0 is the input itself),
// or a named scalar parameter.
struct Var {
    VarKind kind = VarKind::Param;
    int index = 0;  // 1-based for states/inputs
    int deriv = 0;  // input derivative order, 0 for states/params
    std::string name;

    static Var state(int i) { return {VarKind::State, i, 0, {}}; }
    static Var input(int j, int d = 0) { return {VarKind::Input, j, d, {}}; }
    static Var param(std::string n) { return {VarKind::Param, 0, 0, std::move(n)}; }

    friend bool operator==(const Var& a, const Var& b) {
        return a.kind == b.kind && a.index == b.index && a.deriv == b.deriv && a.name == b.name;
    }
    friend bool operator<(const Var& a, const Var& b) {
        if (a.kind != b.kind) return a.kind < b.kind;
        if (a.index != b.index) return a.index < b.index;
        if (a.deriv != b.deriv) return a.deriv < b.deriv;
        return a.name < b.name;
    }
    std::string str() const;
};

// A scalar smooth function supplied from outside the expression grammar
// (piecewise-analytic constructions, tabulated potentials).  eval must return
// the k-th derivative at s; orders above max_deriv should throw DomainError.
struct SmoothFn {
    std::string name;
    int max_deriv = 1;
    std::function<double(double s, int k)> eval;
};

enum class UnOp { Neg, Sin, Cos, Exp, Atan, Tanh };
enum class BinOp { Add, Sub, Mul, Div };

class Expr;
using Bindings = std::map<Var, double>;

struct ExprNode {
    enum class Kind { Constant, Variable, Unary, Binary, Pow, External } kind;
    double value = 0.0;          // Constant
    Var var;                     // Variable
    UnOp un{};                   // Unary
    BinOp bin{};                 // Binary
    std::shared_ptr<const ExprNode> a, b;
    int exponent = 0;            // Pow
    std::shared_ptr<const SmoothFn> fn;  // External
    int fn_deriv = 0;            // External: which derivative of fn
};

// Immutable expression tree with value semantics on a shared node.
class Expr {
public:
    Expr() : node_(constant_node(0.0)) {}
    explicit Expr(std::shared_ptr<const ExprNode> n) : node_(std::move(n)) {}

    static Expr constant(double c);
    static Expr variable(const Var& v);
    static Expr state(int i) { return variable(Var::state(i)); }
    static Expr input(int j, int d = 0) { return variable(Var::input(j, d)); }
    static Expr param(const std::string& n) { return variable(Var::param(n)); }
    static Expr unary(UnOp op, const Expr& a);
    static Expr binary(BinOp op, const Expr& a, const Expr& b);
    static Expr pow(const Expr& base, int exponent);
    static Expr external(std::shared_ptr<const SmoothFn> fn, const Expr& arg, int deriv = 0);

    const ExprNode& node() const { return *node_; }
    std::shared_ptr<const ExprNode> ptr() const { return node_; }

    bool is_constant() const { return node_->kind == ExprNode::Kind::Constant; }
    bool is_constant(double c) const;

    std::string str() const;

    friend Expr operator+(const Expr& a, const Expr& b) { return binary(BinOp::Add, a, b); }
    friend Expr operator-(const Expr& a, const Expr& b) { return binary(BinOp::Sub, a, b); }
    friend Expr operator*(const Expr& a, const Expr& b) { return binary(BinOp::Mul, a, b); }
    friend Expr operator/(const Expr& a, const Expr& b) { return binary(BinOp::Div, a, b); }
    friend Expr operator-(const Expr& a) { return unary(UnOp::Neg, a); }

private:
    static std::shared_ptr<const ExprNode> constant_node(double c);
    std::shared_ptr<const ExprNode> node_;
};

inline Expr sin(const Expr& e) { return Expr::unary(UnOp::Sin, e); }
inline Expr cos(const Expr& e) { return Expr::unary(UnOp::Cos, e); }
inline Expr exp(const Expr& e) { return Expr::unary(UnOp::Exp, e); }
inline Expr atan(const Expr& e) { return Expr::unary(UnOp::Atan, e); }
inline Expr tanh(const Expr& e) { return Expr::unary(UnOp::Tanh, e); }

// Parses the scalar expression grammar:
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := base ('^' unsigned-int)?
//   base   := number | ident | func '(' expr ')' | '(' expr ')' | '-' base
// idents x<digits> are states, u<digits> inputs, all-letter names parameters
// (function names sin, cos, exp, atan, tanh are reserved).
Expr parse_expr(const std::string& text);

double evaluate(const Expr& e, const Bindings& b);

// Partial derivative with respect to one variable.
Expr differentiate(const Expr& e, const Var& v);

// Replaces every occurrence of variable v by the expression r.
Expr substitute(const Expr& e, const Var& v, const Expr& r);

// Value-preserving normalization: constant folding, neutral-element removal,
// collection of like additive terms.  Idempotent.
Expr simplify(const Expr& e);

std::set<Var> free_variables(const Expr& e);

enum class ZeroOutcome { Zero, Nonzero, Unknown };

struct ZeroVerdict {
    ZeroOutcome outcome = ZeroOutcome::Unknown;
    bool probabilistic = false;       // true when decided by sampling
    std::optional<Bindings> witness;  // a point where |value| > threshold
    double witness_value = 0.0;
};

// Decides whether e is identically zero: symbolically when simplify collapses
// it, otherwise by sampling `trials` points uniform in [-10,10]^dim with the
// seeded generator.  |value| > 1e-9 at any sample is a nonzero witness;
// Unknown only if every sample hits a domain failure.
ZeroVerdict is_identically_zero(const Expr& e, int trials = 32, std::uint64_t seed = 0);

// Flat postfix program for fast repeated evaluation with a fixed variable
// layout.  Same semantics as evaluate(), including the division guard.
class CompiledExpr {
public:
    CompiledExpr() = default;
    static CompiledExpr compile(const Expr& e, const std::vector<Var>& layout);
    double eval(const double* slots) const;
    double eval(const std::vector<double>& slots) const { return eval(slots.data()); }

private:
    struct Instr {
        enum class Op { PushConst, PushVar, Un, Bin, Pow, Ext } op;
        double value = 0.0;
        int slot = 0;
        UnOp un{};
        BinOp bin{};
        int exponent = 0;
        const SmoothFn* fn = nullptr;
        int fn_deriv = 0;
    };
    std::vector<Instr> code_;
    mutable std::vector<double> stack_;
};

// Deterministic uniform double in [lo, hi) from a 64-bit generator draw.
double uniform_draw(std::uint64_t raw, double lo, double hi);

}  // namespace minphase
