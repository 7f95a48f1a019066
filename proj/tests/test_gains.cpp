#include <doctest.h>

#include <cmath>
#include <random>

#include "minphase/expr.hpp"
#include "minphase/gains.hpp"

using namespace minphase;

namespace {

const double kSGrid[] = {0.0, 0.3, 1.0, 2.5, 7.0, 40.0};
const double kTGrid[] = {0.0, 0.1, 1.0, 4.0, 15.0};

}  // namespace

TEST_CASE("comparison-function atoms evaluate to their closed forms") {
    CHECK(ClassK::identity()(3.25) == doctest::Approx(3.25));
    CHECK(ClassK::linear(3.0)(2.0) == doctest::Approx(6.0));
    CHECK(ClassK::power(2.0, 3.0)(2.0) == doctest::Approx(16.0));
    CHECK(ClassK::power(1.0, 0.5)(9.0) == doctest::Approx(3.0));
    // Negative arguments clamp to zero so composites stay well defined.
    CHECK(ClassK::linear(3.0)(-5.0) == doctest::Approx(0.0));

    const ClassKL b;  // s * e^{-t}
    for (double s : kSGrid)
        for (double t : kTGrid) CHECK(b(s, t) == doctest::Approx(s * std::exp(-t)).epsilon(1e-14));
    CHECK(b(2.0, -1.0) == doctest::Approx(2.0));  // negative time clamps too

    const ClassKL d = ClassKL::exp_decay(ClassK::power(2.0, 2.0), 0.5);
    for (double s : kSGrid)
        for (double t : kTGrid)
            CHECK(d(s, t) == doctest::Approx(2.0 * s * s * std::exp(-0.5 * t)).epsilon(1e-14));

    CHECK(ClassKL::zero()(5.0, 1.0) == 0.0);
}

TEST_CASE("combinators act pointwise: compose, sum, scale, stretch") {
    const ClassK sq = ClassK::power(1.0, 2.0);
    const ClassK lin3 = ClassK::linear(3.0);
    for (double s : kSGrid) {
        CAPTURE(s);
        CHECK(compose(sq, lin3)(s) == doctest::Approx(9.0 * s * s).epsilon(1e-13));
        CHECK(sum(sq, lin3)(s) == doctest::Approx(s * s + 3.0 * s).epsilon(1e-13));
        CHECK(scale(5.0, sq)(s) == doctest::Approx(5.0 * s * s).epsilon(1e-13));
        CHECK(stretch(sq, 2.0)(s) == doctest::Approx(4.0 * s * s).epsilon(1e-13));
    }
}

TEST_CASE("time-dependent combinators act pointwise") {
    const ClassKL b;  // s * e^{-t}
    const ClassK lin2 = ClassK::linear(2.0);
    for (double s : kSGrid) {
        for (double t : kTGrid) {
            CAPTURE(s);
            CAPTURE(t);
            const double base = s * std::exp(-t);
            CHECK(compose_outer(lin2, b)(s, t) == doctest::Approx(2.0 * base).epsilon(1e-13));
            CHECK(compose_inner(b, lin2)(s, t) == doctest::Approx(2.0 * base).epsilon(1e-13));
            CHECK(kl_sum(b, b)(s, t) == doctest::Approx(2.0 * base).epsilon(1e-13));
            CHECK(time_scale(b, 3.0)(s, t) ==
                  doctest::Approx(s * std::exp(-3.0 * t)).epsilon(1e-13));
            // Nesting feeds the inner value back in at the same time.
            CHECK(kl_nest(b, b)(s, t) == doctest::Approx(s * std::exp(-2.0 * t)).epsilon(1e-13));
        }
        CHECK(freeze_time(b, 2.0)(s) == doctest::Approx(s * std::exp(-2.0)).epsilon(1e-13));
    }
}

TEST_CASE("tabulated gains interpolate, extrapolate with the final slope, and reject bad knots") {
    const ClassK tab = ClassK::tabulated({0.0, 1.0, 2.0}, {0.0, 1.0, 3.0});
    CHECK(tab(0.5) == doctest::Approx(0.5));
    CHECK(tab(1.5) == doctest::Approx(2.0));
    CHECK(tab(2.0) == doctest::Approx(3.0));
    CHECK(tab(4.0) == doctest::Approx(7.0));  // slope 2 past the last knot
    CHECK(tab.validate());

    CHECK_THROWS_AS(ClassK::tabulated({0.0, 1.0}, {0.0}), GainError);
    CHECK_THROWS_AS(ClassK::tabulated({0.5, 1.0}, {0.0, 1.0}), GainError);
    CHECK_THROWS_AS(ClassK::tabulated({0.0, 1.0, 2.0}, {0.0, 2.0, 1.0}), GainError);
    CHECK_THROWS_AS(ClassK::tabulated({0.0, 2.0, 1.0}, {0.0, 1.0, 2.0}), GainError);
}

TEST_CASE("constructors reject degenerate parameters") {
    CHECK_THROWS_AS(ClassK::linear(0.0), GainError);
    CHECK_THROWS_AS(ClassK::linear(-2.0), GainError);
    CHECK_THROWS_AS(ClassK::power(0.0, 1.0), GainError);
    CHECK_THROWS_AS(ClassK::power(1.0, 0.0), GainError);
    CHECK_THROWS_AS(scale(0.0, ClassK::identity()), GainError);
    CHECK_THROWS_AS(stretch(ClassK::identity(), -1.0), GainError);
    CHECK_THROWS_AS(ClassKL::exp_decay(ClassK::identity(), 0.0), GainError);
    CHECK_THROWS_AS(time_scale(ClassKL(), 0.0), GainError);
    CHECK_THROWS_AS(freeze_time(ClassKL(), -0.5), GainError);
}

TEST_CASE("validation accepts genuine comparison functions and rejects flat ones") {
    CHECK(ClassK::identity().validate());
    CHECK(ClassK::power(0.3, 2.0).validate());
    CHECK(sum(ClassK::linear(2.0), ClassK::power(1.0, 3.0)).validate());
    CHECK(ClassKL().validate());
    CHECK(ClassKL::exp_decay(ClassK::power(1.0, 2.0), 0.25).validate());

    // The zero map is nonincreasing in t but not strictly increasing in s.
    CHECK(!ClassKL::zero().validate());
    CHECK(!freeze_time(ClassKL::zero(), 1.0).validate());
}

TEST_CASE("printed forms name the structure") {
    CHECK(ClassK::linear(3.0).str() == "3*s");
    CHECK(ClassK::power(2.0, 3.0).str() == "2*s^3");
    CHECK(ClassKL().str() == "s*e^(-1*t)");
    const std::string composite = compose(ClassK::linear(2.0), ClassK::power(1.0, 2.0)).str();
    CHECK(composite.find("2*") != std::string::npos);
    CHECK(composite.find("s^2") != std::string::npos);
    CHECK(freeze_time(ClassKL(), 2.0).str().find("2") != std::string::npos);
}

TEST_CASE("relaxed sum splits arguments: chi(a+b) <= relaxed(a) + relaxed(b)") {
    const ClassK chi = ClassK::power(1.0, 3.0);  // convex, so not subadditive itself
    const ClassK relaxed = relax_sum(chi);
    CHECK(relaxed(4.0) == doctest::Approx(512.0));  // chi(2*4)
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const double a = uniform_draw(rng(), 0.0, 30.0);
        const double b = uniform_draw(rng(), 0.0, 30.0);
        CAPTURE(a);
        CAPTURE(b);
        CHECK(chi(a + b) <= relaxed(a) + relaxed(b) + 1e-9);
    }
}

TEST_CASE("joint transient/gain assembly reproduces its closed form") {
    // rho1 = rho2 = id, state transient s*e^{-t}, state gain s + s^2:
    //   beta(s,t) = 2 s e^{-t} + s e^{-t} = 3 s e^{-t}
    //   gamma(s)  = 2(s + s^2) + s + (s + s^2) = 4 s + 3 s^2
    const ClassK id = ClassK::identity();
    const ClassK gamma_bar = sum(id, ClassK::power(1.0, 2.0));
    const OverallGains joint = output_input_gains(id, id, ClassKL(), gamma_bar);
    for (double s : kSGrid) {
        for (double t : kTGrid)
            CHECK(joint.beta(s, t) == doctest::Approx(3.0 * s * std::exp(-t)).epsilon(1e-12));
        CHECK(joint.gamma(s) == doctest::Approx(4.0 * s + 3.0 * s * s).epsilon(1e-12));
    }
    CHECK(joint.beta.validate());
    CHECK(joint.gamma.validate());

    // Nonlinear reconstruction bound: rho1 = s^2 turns the transient into
    // 4 (s e^{-t})^2 + s e^{-t} and the gain into 4 g(s)^2 + s + g(s).
    const ClassK rho_sq = ClassK::power(1.0, 2.0);
    const OverallGains bent = output_input_gains(rho_sq, id, ClassKL(), gamma_bar);
    for (double s : kSGrid) {
        const double g = s + s * s;
        for (double t : kTGrid) {
            const double base = s * std::exp(-t);
            CHECK(bent.beta(s, t) == doctest::Approx(4.0 * base * base + base).epsilon(1e-12));
        }
        CHECK(bent.gamma(s) == doctest::Approx(4.0 * g * g + s + g).epsilon(1e-12));
    }
}

TEST_CASE("serial interconnection terms with identity data reduce to linear maps") {
    const ClassK id = ClassK::identity();
    const CascadeGains cg = cascade_gains(ClassKL(), id, ClassKL(), id, id, id, id);
    for (double s : kSGrid) {
        CAPTURE(s);
        for (double t : kTGrid) {
            CAPTURE(t);
            // Half-rate nesting of s e^{-t} with factor 3 recovers 3 s e^{-t}.
            CHECK(cg.beta_drive(s, t) == doctest::Approx(3.0 * s * std::exp(-t)).epsilon(1e-12));
            // 54 s e^{-t/2} through the start-up coupling plus 6 s e^{-t/2}.
            CHECK(cg.beta_driven(s, t) ==
                  doctest::Approx(60.0 * s * std::exp(-0.5 * t)).epsilon(1e-12));
        }
        CHECK(cg.gamma_out(s) == doctest::Approx(4.0 * s).epsilon(1e-12));
        CHECK(cg.gamma_jet(s) == doctest::Approx(90.0 * s).epsilon(1e-12));
    }
    CHECK(cg.beta_drive.validate());
    CHECK(cg.beta_driven.validate());
    CHECK(cg.gamma_out.validate());
    CHECK(cg.gamma_jet.validate());
}

TEST_CASE("order-reduction estimates: explicit first stage, flagged second stage") {
    EstimateFamily in;
    in.beta1 = ClassKL();
    in.beta2 = ClassKL();
    in.beta3 = ClassKL();
    in.gamma1 = ClassK::identity();
    in.gamma2 = ClassK::identity();
    in.gamma3 = ClassK::identity();
    in.gamma4 = ClassK::identity();
    in.rho1 = ClassK::identity();
    const LiftedGains out = order_reduction_gains(in);

    for (double s : kSGrid) {
        CAPTURE(s);
        for (double t : kTGrid) {
            CAPTURE(t);
            CHECK(out.beta1(s, t) == doctest::Approx(28.0 * s * std::exp(-0.5 * t)).epsilon(1e-12));
            CHECK(out.beta2(s, t) == doctest::Approx(3.0 * s * std::exp(-t)).epsilon(1e-12));
            // 72 s e^{-t/2} via the coupling term plus 16 * 2 s e^{-t/2}.
            CHECK(out.beta2_refined(s, t) ==
                  doctest::Approx(104.0 * s * std::exp(-0.5 * t)).epsilon(1e-12));
        }
        CHECK(out.gamma0(s) == doctest::Approx(28.0 * s).epsilon(1e-12));
        CHECK(out.gamma_top(s) == doctest::Approx(8.0 * s).epsilon(1e-12));
    }

    // The three completions assembled with extra slack are flagged as such and
    // still validate as comparison functions.
    CHECK(out.beta1_refined_conservative);
    CHECK(out.gamma0_refined_conservative);
    CHECK(out.gamma_top_refined_conservative);
    CHECK(out.beta1_refined.validate());
    CHECK(out.gamma0_refined.validate());
    CHECK(out.gamma_top_refined.validate());
    CHECK(out.beta2_refined.validate());
}

TEST_CASE("sampled envelope majorises the function at its own grid and validates") {
    const auto f = [](double s) { return std::sin(s); };
    const int samples = 512;
    const double s_max = 10.0;
    const ClassK env = envelope_from_function(f, s_max, samples);
    CHECK(env.validate());
    for (int i = 0; i < samples; ++i) {
        const double s = s_max * i / (samples - 1);
        CAPTURE(s);
        CHECK(env(s) >= std::abs(f(s)) - 1e-12);
    }
    // The running maximum saturates at 1 once the first crest is passed.
    CHECK(env(s_max) == doctest::Approx(1.0).epsilon(1e-4));

    CHECK_THROWS_AS(envelope_from_function([](double) { return 1.0; }, 1.0), GainError);
    CHECK_THROWS_AS(envelope_from_function([](double s) { return s; }, -1.0), GainError);
}
