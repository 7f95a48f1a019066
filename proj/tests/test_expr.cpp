#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "minphase/expr.hpp"
#include "minphase/phi.hpp"

using namespace minphase;

namespace {

// Expressions exercising every node kind and a few deep combinations.
const std::vector<std::string> kSamples = {
    "x1",
    "u1",
    "3.5",
    "-x2",
    "x1 + x2",
    "x1 - 2*x2",
    "x1*x2*x3",
    "x1 / (1 + x2^2)",
    "x1^3",
    "sin(x1)",
    "cos(x1*x2)",
    "exp(-x1^2)",
    "atan(u1)",
    "tanh(x1 - u1)",
    "x1^2 * sin(x2) + exp(x3) / (2 + cos(x1))",
    "-x4 + x1^3",
    "x3 + x2*u2",
    "u1^2 - u2^2 + u1*u2",
};

Bindings random_point(const Expr& e, std::mt19937_64& rng, double box = 2.0) {
    Bindings b;
    for (const Var& v : free_variables(e)) b[v] = uniform_draw(rng(), -box, box);
    return b;
}

}  // namespace

TEST_CASE("parse/print round trip preserves values") {
    std::mt19937_64 rng(101);
    for (const auto& text : kSamples) {
        const Expr e = parse_expr(text);
        const Expr round = parse_expr(e.str());
        for (int k = 0; k < 20; ++k) {
            Bindings b = random_point(e, rng);
            const double v1 = evaluate(e, b);
            const double v2 = evaluate(round, b);
            CAPTURE(text);
            CHECK(v1 == doctest::Approx(v2).epsilon(1e-12));
        }
    }
}

TEST_CASE("evaluate matches hand values") {
    Bindings b;
    b[Var::state(1)] = 0.5;
    b[Var::state(2)] = -1.25;
    b[Var::input(1)] = 2.0;
    CHECK(evaluate(parse_expr("x1 + 2*x2"), b) == doctest::Approx(-2.0));
    CHECK(evaluate(parse_expr("x1^2 - x2^2"), b) == doctest::Approx(0.25 - 1.5625));
    CHECK(evaluate(parse_expr("sin(x1)*cos(x2)"), b) ==
          doctest::Approx(std::sin(0.5) * std::cos(-1.25)));
    CHECK(evaluate(parse_expr("exp(x1)/u1"), b) == doctest::Approx(std::exp(0.5) / 2.0));
    CHECK(evaluate(parse_expr("atan(u1) + tanh(x1)"), b) ==
          doctest::Approx(std::atan(2.0) + std::tanh(0.5)));
    CHECK_THROWS_AS(evaluate(parse_expr("x1"), Bindings{}), EvalError);
    CHECK_THROWS_AS(evaluate(parse_expr("1/(x1-0.5)"), b), EvalError);
}

TEST_CASE("parse rejects malformed input") {
    CHECK_THROWS_AS(parse_expr(""), ParseError);
    CHECK_THROWS_AS(parse_expr("x1 +"), ParseError);
    CHECK_THROWS_AS(parse_expr("(x1"), ParseError);
    CHECK_THROWS_AS(parse_expr("x1 ^ x2"), ParseError);  // exponents are integer literals
    CHECK_THROWS_AS(parse_expr("foo(x1)"), ParseError);  // unknown function
    CHECK_THROWS_AS(parse_expr("3..1"), ParseError);
}

TEST_CASE("differentiate agrees with central finite differences") {
    std::mt19937_64 rng(202);
    const double step = 1e-5;
    for (const auto& text : kSamples) {
        const Expr e = parse_expr(text);
        for (const Var& v : free_variables(e)) {
            const Expr d = differentiate(e, v);
            int checked = 0;
            for (int k = 0; k < 50 && checked < 20; ++k) {
                Bindings b = random_point(e, rng);
                double exact = 0.0, lo = 0.0, hi = 0.0;
                try {
                    exact = evaluate(d, b);
                    Bindings bl = b, bh = b;
                    bl[v] -= step;
                    bh[v] += step;
                    lo = evaluate(e, bl);
                    hi = evaluate(e, bh);
                } catch (const EvalError&) {
                    continue;  // wandered onto a pole; try another point
                }
                const double fd = (hi - lo) / (2 * step);
                const double tol = std::max(1e-6, 1e-6 * std::abs(exact));
                CAPTURE(text);
                CAPTURE(v.str());
                CHECK(std::abs(exact - fd) <= tol);
                ++checked;
            }
            CHECK(checked > 0);
        }
    }
}

TEST_CASE("differentiate treats unrelated variables as constants") {
    const Expr e = parse_expr("x1^2 * u1");
    const Expr d = simplify(differentiate(e, Var::state(2)));
    CHECK(d.is_constant(0.0));
}

TEST_CASE("simplify preserves values and is idempotent") {
    std::mt19937_64 rng(303);
    for (const auto& text : kSamples) {
        const Expr e = parse_expr(text);
        const Expr s = simplify(e);
        const Expr ss = simplify(s);
        CHECK(s.str() == ss.str());
        for (int k = 0; k < 20; ++k) {
            Bindings b = random_point(e, rng);
            double v1, v2;
            try {
                v1 = evaluate(e, b);
                v2 = evaluate(s, b);
            } catch (const EvalError&) {
                continue;
            }
            CAPTURE(text);
            CHECK(v1 == doctest::Approx(v2).epsilon(1e-12));
        }
    }
}

TEST_CASE("simplify folds constants and neutral elements") {
    CHECK(simplify(parse_expr("0 + x1")).str() == "x1");
    CHECK(simplify(parse_expr("x1 * 1")).str() == "x1");
    CHECK(simplify(parse_expr("x1 * 0")).is_constant(0.0));
    CHECK(simplify(parse_expr("2 * 3 + 1")).is_constant(7.0));
    CHECK(simplify(parse_expr("x1 - x1")).is_constant(0.0));
    CHECK(simplify(parse_expr("x1^1")).str() == "x1");
    CHECK(simplify(parse_expr("x1^0")).is_constant(1.0));
}

TEST_CASE("substitute replaces variables structurally") {
    const Expr e = parse_expr("x1^2 + x2");
    const Expr r = parse_expr("u1 + 1");
    const Expr sub = substitute(e, Var::state(1), r);
    Bindings b;
    b[Var::input(1)] = 2.0;
    b[Var::state(2)] = -4.0;
    CHECK(evaluate(sub, b) == doctest::Approx(9.0 - 4.0));
    // No stray occurrence of the replaced variable remains.
    CHECK(free_variables(sub).count(Var::state(1)) == 0);
}

TEST_CASE("free_variables reports exactly the used slots") {
    const Expr e = parse_expr("x1 * u2 + sin(x3)");
    const auto vars = free_variables(e);
    CHECK(vars.size() == 3);
    CHECK(vars.count(Var::state(1)) == 1);
    CHECK(vars.count(Var::state(3)) == 1);
    CHECK(vars.count(Var::input(2)) == 1);
    CHECK(vars.count(Var::state(2)) == 0);
}

TEST_CASE("is_identically_zero separates zero from small-but-nonzero") {
    // Collapses symbolically.
    const ZeroVerdict z1 = is_identically_zero(simplify(parse_expr("x1 - x1")));
    CHECK(z1.outcome == ZeroOutcome::Zero);

    // Pythagorean identity only vanishes numerically, never structurally.
    const Expr pyth = parse_expr("sin(x1)^2 + cos(x1)^2 - 1");
    const ZeroVerdict z2 = is_identically_zero(pyth, 64, 9);
    CHECK(z2.outcome == ZeroOutcome::Zero);
    CHECK(z2.probabilistic);

    const ZeroVerdict z3 = is_identically_zero(parse_expr("x1 * 1e-6"), 64, 9);
    CHECK(z3.outcome == ZeroOutcome::Nonzero);
    CHECK(z3.witness.has_value());
    CHECK(std::abs(z3.witness_value) > 1e-9);
}

TEST_CASE("compiled expressions match tree evaluation") {
    std::mt19937_64 rng(404);
    for (const auto& text : kSamples) {
        const Expr e = parse_expr(text);
        const auto vars = free_variables(e);
        const std::vector<Var> layout(vars.begin(), vars.end());
        const CompiledExpr ce = CompiledExpr::compile(e, layout);
        for (int k = 0; k < 20; ++k) {
            std::vector<double> slots(layout.size());
            Bindings b;
            for (std::size_t i = 0; i < layout.size(); ++i) {
                slots[i] = uniform_draw(rng(), -2.0, 2.0);
                b[layout[i]] = slots[i];
            }
            double tree;
            try {
                tree = evaluate(e, b);
            } catch (const EvalError&) {
                continue;
            }
            CAPTURE(text);
            CHECK(ce.eval(slots) == doctest::Approx(tree).epsilon(1e-14));
        }
    }
}

TEST_CASE("external smooth functions differentiate through the chain rule") {
    PhiFunction phi{PhiSpec{}};
    const Expr arg = parse_expr("x1^2 + 1");  // keeps the argument off the kinks
    const Expr e = Expr::external(phi.as_smooth_fn(), arg);
    const Expr d = differentiate(e, Var::state(1));

    std::mt19937_64 rng(505);
    const double step = 1e-6;
    int checked = 0;
    for (int k = 0; k < 40; ++k) {
        Bindings b;
        b[Var::state(1)] = uniform_draw(rng(), 0.3, 1.2);
        const double exact = evaluate(d, b);
        Bindings bl = b, bh = b;
        bl[Var::state(1)] -= step;
        bh[Var::state(1)] += step;
        const double fd = (evaluate(e, bh) - evaluate(e, bl)) / (2 * step);
        CHECK(std::abs(exact - fd) <= std::max(1e-4, 1e-4 * std::abs(exact)));
        ++checked;
    }
    CHECK(checked == 40);

    // Asking for derivatives beyond the declared order is a domain error.
    const Expr over = Expr::external(phi.as_smooth_fn(), arg, 3);
    Bindings b;
    b[Var::state(1)] = 0.5;
    CHECK_THROWS_AS(evaluate(over, b), DomainError);
}

TEST_CASE("uniform_draw spans the requested interval deterministically") {
    std::mt19937_64 a(7), b(7);
    for (int k = 0; k < 100; ++k) {
        const double va = uniform_draw(a(), -3.0, 5.0);
        const double vb = uniform_draw(b(), -3.0, 5.0);
        CHECK(va == vb);
        CHECK(va >= -3.0);
        CHECK(va < 5.0);
    }
}
