#include <doctest.h>

#include <vector>

#include "minphase/relative_degree.hpp"
#include "minphase/system.hpp"

using namespace minphase;

TEST_CASE("squared input passes, saturated input fails the growth ladder") {
    // y' = u^2 grows without bound in |u|; y' = atan(u) plateaus at pi/2.
    const RelDegVerdict sq = relative_degree(builtin("ysq").model, 0);
    REQUIRE(sq.r.has_value());
    CHECK(*sq.r == 1);
    CHECK(sq.uniform);
    CHECK(sq.growth_ok);
    CHECK(sq.origin_ok);
    CHECK(sq.probabilistic);

    const RelDegVerdict at = relative_degree(builtin("yatan").model, 0);
    REQUIRE(at.r.has_value());  // the input does enter at order 1
    CHECK(!at.uniform);         // ... but the dependence saturates
    CHECK(!at.growth_ok);
    CHECK(at.origin_ok);
}

TEST_CASE("integrator chains have full-length uniform relative degree") {
    const RelDegVerdict v1 = relative_degree(builtin("integrator").model, 0);
    REQUIRE(v1.r.has_value());
    CHECK(*v1.r == 1);
    CHECK(v1.uniform);

    const RelDegVerdict v2 = relative_degree(builtin("double_integrator").model, 0);
    REQUIRE(v2.r.has_value());
    CHECK(*v2.r == 2);
    CHECK(v2.uniform);

    const RelDegVerdict v3 = relative_degree(builtin("normal_form_r").model, 0);
    REQUIRE(v3.r.has_value());
    CHECK(*v3.r == 3);
    CHECK(v3.uniform);
    CHECK(v3.input_free_orders == std::vector<int>{0, 1, 2});
}

TEST_CASE("squared-input lag system has degree one") {
    const RelDegVerdict v = relative_degree(builtin("eq25").model, 0);
    REQUIRE(v.r.has_value());
    CHECK(*v.r == 1);
    CHECK(v.uniform);
}

TEST_CASE("two-output examples fail the stacked origin probe") {
    // In both systems the direction u = (0, s) leaves every first derivative
    // at the origin equal to zero, so no input reconstruction is possible.
    for (const char* key : {"example4", "example5"}) {
        CAPTURE(key);
        const SystemModel m = builtin(key).model;
        for (int out = 0; out < m.l(); ++out) {
            const RelDegVerdict v = relative_degree(m, out);
            CHECK(!v.uniform);
            CHECK(!v.origin_ok);
        }
    }
}

TEST_CASE("no-input models cannot reach the input jet") {
    const RelDegVerdict v = relative_degree(builtin("sigma1").model, 0);
    CHECK(!v.r.has_value());
    CHECK(!v.uniform);
    CHECK(!v.found_all);
}

TEST_CASE("bump output chain is degree one despite the flat segment") {
    const RelDegVerdict v = relative_degree(builtin("bump_chain").model, 0);
    REQUIRE(v.r.has_value());
    CHECK(*v.r == 1);
}

TEST_CASE("directional-derivative ladder agrees with the general probe") {
    const SystemModel m = builtin("cascade").model;
    const AffineDecomposition dec = affine_decompose(m);
    REQUIRE(dec.affine);
    const RelDegVerdict affine = relative_degree_affine(m, dec, 0);
    const RelDegVerdict general = relative_degree(m, 0);
    REQUIRE(affine.r.has_value());
    REQUIRE(general.r.has_value());
    CHECK(*affine.r == 2);
    CHECK(*general.r == 2);
    CHECK(affine.uniform == general.uniform);
    CHECK(affine.affine_path);
    REQUIRE(affine.decoupling.has_value());
    CHECK(affine.decoupling->is_constant(1.0));
}

TEST_CASE("the affine ladder flags a dropping coefficient") {
    // y = x1, x1' = x2, x2' = x1 * u: the coefficient of u at order 2 vanishes
    // on the slice x1 = 0, so the degree is not uniform over the box.
    SystemModel m;
    m.name = "drop";
    m.n = 2;
    m.m = 1;
    m.f = {parse_expr("x2"), parse_expr("x1 * u1")};
    m.h = {parse_expr("x1")};
    const AffineDecomposition dec = affine_decompose(m);
    REQUIRE(dec.affine);
    const RelDegVerdict v = relative_degree_affine(m, dec, 0);
    CHECK(!v.uniform);
    // The general probe reaches the same conclusion through sampling.
    const RelDegVerdict g = relative_degree(m, 0);
    CHECK(!g.uniform);
}

TEST_CASE("verdicts are deterministic for a fixed seed") {
    RelDegOptions opts;
    opts.seed = 99;
    const RelDegVerdict a = relative_degree(builtin("eq25").model, 0, opts);
    const RelDegVerdict b = relative_degree(builtin("eq25").model, 0, opts);
    CHECK(a.uniform == b.uniform);
    CHECK(a.detail == b.detail);
}

TEST_CASE("output index is range checked") {
    CHECK_THROWS_AS(relative_degree(builtin("eq25").model, 2), ModelError);
    CHECK_THROWS_AS(relative_degree(builtin("eq25").model, -1), ModelError);
}
