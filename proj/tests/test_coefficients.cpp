#include <catch2/catch_amalgamated.hpp>

#include <riccati/coefficients.hpp>

#include <cmath>

using riccati::CoefficientFunction;
using riccati::CoefficientSpec;
using riccati::cx;
using riccati::MatrixC;
using riccati::SystemSpec;

TEST_CASE("constant coefficients evaluate verbatim", "[coefficients]") {
    MatrixC p(2);
    p(0, 1) = cx{1.0, -2.0};
    CoefficientSpec spec;
    spec.dim = 2;
    spec.P = CoefficientFunction::constant(p);
    spec.Q = CoefficientFunction::zero(2);
    spec.R = CoefficientFunction::zero(2);
    spec.S = CoefficientFunction::zero(2);

    const auto quad = spec.eval(3.7);
    CHECK((quad.P - p).maxAbs() == 0.0);
    CHECK(quad.Q.maxAbs() == 0.0);
    CHECK(quad.R.maxAbs() == 0.0);
    CHECK(quad.S.maxAbs() == 0.0);

    CHECK_THROWS_AS(spec.eval(-0.1), riccati::OutOfDomain);
}

TEST_CASE("builtin decay family", "[coefficients]") {
    const CoefficientSpec spec = riccati::builtin_scenario("decay_scalar");
    const auto quad = spec.eval(std::log(2.0));
    CHECK(quad.P(0, 0).real() == Catch::Approx(0.5).epsilon(1e-14));
    CHECK(quad.P(0, 0).imag() == 0.0);
    CHECK(quad.Q.maxAbs() == 0.0);

    SECTION("distinguished seeds carry the kernel mass") {
        REQUIRE(spec.sampleSeeds.size() == 2);
        CHECK(spec.sampleSeeds[0].maxAbs() == 0.0);
        CHECK(spec.sampleSeeds[1](0, 0).real() == Catch::Approx(-1.0));
    }

    SECTION("parameters rescale the family") {
        const CoefficientSpec s2 =
            riccati::builtin_scenario("decay_scalar", {{"scale", 2.0}, {"rate", 0.5}});
        CHECK(s2.eval(2.0).P(0, 0).real() == Catch::Approx(2.0 * std::exp(-1.0)));
        // kernel mass = scale/rate = 4
        CHECK(s2.sampleSeeds[1](0, 0).real() == Catch::Approx(-0.25));
    }
}

TEST_CASE("builtin quadratic and linear families", "[coefficients]") {
    const CoefficientSpec quad3 =
        riccati::builtin_scenario("pure_quadratic_constant", {{"dim", 3.0}});
    CHECK(quad3.dim == 3);
    CHECK((quad3.eval(11.0).P - MatrixC::identity(3)).maxAbs() == 0.0);

    const CoefficientSpec lin = riccati::builtin_scenario("linear_only", {{"q", 1.5}});
    CHECK(lin.eval(0.0).P.maxAbs() == 0.0);
    CHECK(lin.eval(5.0).Q(0, 0).real() == Catch::Approx(1.5));

    CHECK_THROWS_AS(riccati::builtin_scenario("no_such_family"), riccati::UnknownScenario);
    CHECK_THROWS_AS(riccati::builtin_scenario("decay_scalar", {{"typo", 1.0}}),
                    std::invalid_argument);
}

TEST_CASE("bounded support family vanishes past the cutoff", "[coefficients]") {
    const CoefficientSpec spec =
        riccati::builtin_scenario("bounded_support", {{"cutoff", 1.0}, {"scale", 3.0}});
    CHECK(spec.eval(0.0).P(0, 0).real() == Catch::Approx(3.0));
    CHECK(spec.eval(1.0).P.maxAbs() == 0.0);
    CHECK(spec.eval(25.0).P.maxAbs() == 0.0);

    // continuity approaching the cutoff
    double prev = spec.eval(0.9).P(0, 0).real();
    for (double t : {0.99, 0.999, 0.9999}) {
        const double v = spec.eval(t).P(0, 0).real();
        CHECK(v < prev);
        prev = v;
    }
    CHECK(prev < 1e-6);

    // kernel mass 8*scale*cutoff/15
    CHECK(spec.sampleSeeds[1](0, 0).real() == Catch::Approx(-15.0 / 24.0));
}

TEST_CASE("tabulated coefficients interpolate linearly", "[coefficients]") {
    MatrixC v0(1), v1(1), v2(1);
    v0(0, 0) = 1.0;
    v1(0, 0) = 3.0;
    v2(0, 0) = 2.0;
    const auto f = CoefficientFunction::table({0.0, 1.0, 3.0}, {v0, v1, v2});

    CHECK(f.eval(0.0)(0, 0).real() == 1.0);  // knots exact
    CHECK(f.eval(1.0)(0, 0).real() == 3.0);
    CHECK(f.eval(3.0)(0, 0).real() == 2.0);
    CHECK(f.eval(0.5)(0, 0).real() == Catch::Approx(2.0));
    CHECK(f.eval(2.0)(0, 0).real() == Catch::Approx(2.5));

    CHECK_THROWS_AS(f.eval(-0.5), riccati::OutOfDomain);
    CHECK_THROWS_AS(f.eval(3.5), riccati::OutOfDomain);
    CHECK(f.boundedDomain());
    CHECK(f.domainEnd() == 3.0);

    CHECK_THROWS_AS(CoefficientFunction::table({0.0, 0.0}, {v0, v1}), std::invalid_argument);
}

TEST_CASE("system reduction maps coefficients by sign", "[coefficients]") {
    MatrixC a(2), b(2), c(2), d(2);
    a(0, 1) = 2.0;
    b(0, 0) = cx{1.0, 1.0};
    c(1, 0) = -3.0;
    d(1, 1) = cx{0.0, 4.0};
    SystemSpec sys;
    sys.dim = 2;
    sys.A = CoefficientFunction::constant(a);
    sys.B = CoefficientFunction::constant(b);
    sys.C = CoefficientFunction::constant(c);
    sys.D = CoefficientFunction::constant(d);

    const CoefficientSpec spec = riccati::system_to_riccati(sys);
    const auto quad = spec.eval(2.0);
    CHECK((quad.P - b).maxAbs() == 0.0);
    CHECK((quad.Q + d).maxAbs() == 0.0);
    CHECK((quad.R - a).maxAbs() == 0.0);
    CHECK((quad.S + c).maxAbs() == 0.0);

    SECTION("mapping is exact for the canonical example") {
        SystemSpec simple;
        simple.dim = 1;
        simple.A = CoefficientFunction::zero(1);
        simple.B = CoefficientFunction::constant(MatrixC::identity(1));
        simple.C = CoefficientFunction::zero(1);
        simple.D = CoefficientFunction::zero(1);
        const CoefficientSpec s = riccati::system_to_riccati(simple);
        CHECK((s.eval(0.0).P - MatrixC::identity(1)).maxAbs() == 0.0);
        CHECK(s.eval(0.0).Q.maxAbs() == 0.0);
        CHECK(s.eval(0.0).R.maxAbs() == 0.0);
        CHECK(s.eval(0.0).S.maxAbs() == 0.0);
    }
}

TEST_CASE("coefficient evaluation is continuous in t", "[coefficients]") {
    const CoefficientSpec spec = riccati::builtin_scenario("decay_scalar", {{"dim", 2.0}});
    for (double t : {0.0, 0.5, 1.7, 4.0}) {
        const double h = 1e-7;
        const double jump = (spec.eval(t + h).P - spec.eval(t).P).maxAbs();
        CHECK(jump <= 1e-6);
    }
}
