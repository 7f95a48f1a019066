#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "minphase/signals.hpp"

using namespace minphase;

namespace {

// Central finite difference of the signal's own lower derivative.
double fd(const SmoothSignal& s, double t, int deriv, double h = 1e-6) {
    return (s.value(t + h, deriv - 1) - s.value(t - h, deriv - 1)) / (2 * h);
}

}  // namespace

TEST_CASE("polynomial signal differentiates exactly") {
    PolynomialSignal p({1.0, 2.0, 3.0, -0.5});  // 1 + 2t + 3t^2 - t^3/2
    CHECK(p.value(0.0, 0) == doctest::Approx(1.0));
    CHECK(p.value(2.0, 0) == doctest::Approx(1 + 4 + 12 - 4));
    CHECK(p.value(2.0, 1) == doctest::Approx(2 + 12 - 6));
    CHECK(p.value(2.0, 2) == doctest::Approx(6 - 6));
    CHECK(p.value(2.0, 3) == doctest::Approx(-3.0));
    CHECK(p.value(2.0, 4) == doctest::Approx(0.0));
    CHECK(p.smoothness() == SmoothSignal::kInfinitelySmooth);
}

TEST_CASE("sinusoid signal matches finite differences to high order") {
    SinusoidSignal s({{1.5, 2.0, 0.3}, {-0.7, 0.9, 1.1}});
    for (int deriv = 1; deriv <= 4; ++deriv)
        for (double t : {0.0, 0.4, 1.7, 3.9})
            CHECK(s.value(t, deriv) == doctest::Approx(fd(s, t, deriv)).epsilon(1e-5));
    CHECK(s.smoothness() == SmoothSignal::kInfinitelySmooth);
}

TEST_CASE("exponentially damped cosine matches finite differences") {
    ExpCosSignal s(2.0, -0.4, 3.0, 0.25);
    CHECK(s.value(0.0, 0) == doctest::Approx(2.0 * std::cos(0.25)));
    for (int deriv = 1; deriv <= 4; ++deriv)
        for (double t : {0.0, 0.5, 2.2})
            CHECK(s.value(t, deriv) == doctest::Approx(fd(s, t, deriv)).epsilon(1e-5));
}

TEST_CASE("piecewise constant signal steps at the listed times") {
    PiecewiseConstantSignal s({1.0, 3.0}, {0.5, -2.0, 4.0});
    CHECK(s.value(0.0, 0) == doctest::Approx(0.5));
    CHECK(s.value(0.999, 0) == doctest::Approx(0.5));
    CHECK(s.value(1.001, 0) == doctest::Approx(-2.0));
    CHECK(s.value(2.999, 0) == doctest::Approx(-2.0));
    CHECK(s.value(3.001, 0) == doctest::Approx(4.0));
    CHECK(s.smoothness() == 0);
    CHECK_THROWS_AS(s.value(0.5, 1), DomainError);
    CHECK_THROWS(PiecewiseConstantSignal({2.0, 1.0}, {0, 0, 0}));
    CHECK_THROWS(PiecewiseConstantSignal({1.0}, {0}));
}

TEST_CASE("switching signal follows the halving dwell schedule") {
    SwitchingSignal s;
    // Unit dwell on the first two intervals.
    CHECK(s.value(0.5, 0) == 1.0);
    CHECK(s.value(1.5, 0) == -1.0);
    // Dwell 1/2 on [2,3): +1, -1.
    CHECK(s.value(2.25, 0) == 1.0);
    CHECK(s.value(2.75, 0) == -1.0);
    // Dwell 1/4 on [3,4): +1 -1 +1 -1.
    CHECK(s.value(3.1, 0) == 1.0);
    CHECK(s.value(3.3, 0) == -1.0);
    CHECK(s.value(3.6, 0) == 1.0);
    CHECK(s.value(3.9, 0) == -1.0);
    // Every unit interval holds an even number of segments, so each mean is 0:
    // averaging the signal over [k, k+1) vanishes once the dwell divides 1.
    for (int k = 2; k <= 9; ++k) {
        double acc = 0.0;
        const int steps = 1 << 12;
        for (int i = 0; i < steps; ++i) acc += s.value(k + (i + 0.5) / steps, 0);
        CHECK(std::abs(acc / steps) < 1e-12);
    }
    // Dwell never drops below the configured floor.
    SwitchingSignal floored(3);  // floor 1/8
    int flips = 0;
    double prev = floored.value(20.0, 0);
    const int probes = 800;
    for (int i = 1; i <= probes; ++i) {
        const double cur = floored.value(20.0 + i / static_cast<double>(probes), 0);
        if (cur != prev) ++flips;
        prev = cur;
    }
    CHECK(flips == 8);  // exactly 1/dwell_floor switches per unit time
    CHECK(s.smoothness() == 0);
}

TEST_CASE("constant signal is an infinitely smooth flat line") {
    SignalPtr c = constant_signal(-2.5);
    CHECK(c->value(0.0, 0) == doctest::Approx(-2.5));
    CHECK(c->value(17.3, 0) == doctest::Approx(-2.5));
    CHECK(c->value(1.0, 1) == doctest::Approx(0.0));
    CHECK(c->value(1.0, 5) == doctest::Approx(0.0));
    CHECK(c->smoothness() == SmoothSignal::kInfinitelySmooth);
}

TEST_CASE("descriptor round trip reproduces signal values") {
    std::vector<SignalPtr> originals = {
        std::make_shared<PolynomialSignal>(std::vector<double>{0.5, -1.0, 0.25}),
        std::make_shared<SinusoidSignal>(std::vector<SinusoidTerm>{{1.0, 1.3, 0.0},
                                                                   {0.2, 2.9, 0.7}}),
        std::make_shared<ExpCosSignal>(1.2, -0.3, 2.0, 0.1),
        std::make_shared<PiecewiseConstantSignal>(std::vector<double>{1.0},
                                                  std::vector<double>{1.0, -1.0}),
        std::make_shared<SwitchingSignal>(),
    };
    for (const auto& orig : originals) {
        const SignalPtr copy = signal_from_json(orig->descriptor());
        CHECK(copy->smoothness() == orig->smoothness());
        for (double t : {0.0, 0.37, 1.24, 2.9, 5.01})
            CHECK(copy->value(t, 0) == doctest::Approx(orig->value(t, 0)).epsilon(1e-14));
    }
    CHECK_THROWS(signal_from_json(json{{"type", "unheard_of"}}));
}
