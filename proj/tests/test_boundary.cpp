#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "diffmart/boundary.hpp"
#include "diffmart/diffusion.hpp"

using namespace diffmart;
using Catch::Matchers::WithinRel;

TEST_CASE("bessel3 inner-tail integral toward zero equals one third") {
    // inner mass m((0,y]) = (2/3) y^3 and p'(y) = y^-2, so the integrand is
    // (2/3) y and the integral over (0,1] is exactly 1/3
    ScaleSpeed ss = derive_scale_speed(catalog("bessel", {{"delta", 3.0}}));
    const ExtendedRealVerdict v =
        improper_feller_integral(ss, 1.0, Side::alpha, FellerVariant::nature);
    CHECK_FALSE(v.diverged);
    CHECK_THAT(v.value, WithinRel(1.0 / 3.0, 1e-8));
    REQUIRE(!v.partial_sums.empty());
    CHECK(v.partial_sums.front() == 0.0);
    CHECK(v.partial_sums.size() == v.truncation_points.size());
    for (std::size_t i = 1; i < v.partial_sums.size(); ++i)
        CHECK(v.partial_sums[i] >= v.partial_sums[i - 1]);
    for (std::size_t i = 1; i < v.truncation_points.size(); ++i) {
        CHECK(v.truncation_points[i] < v.truncation_points[i - 1]);
        CHECK(v.truncation_points[i] > 0.0);
    }
}

TEST_CASE("brownian outward integrals diverge") {
    ScaleSpeed ss = derive_scale_speed(catalog("brownian"));
    const ExtendedRealVerdict access =
        improper_feller_integral(ss, 0.0, Side::beta, FellerVariant::access);
    CHECK(access.diverged);
    CHECK(access.value == kInf);
    CHECK(access.partial_sums.back() > 1e11); // left through the cap
    for (std::size_t i = 1; i < access.partial_sums.size(); ++i)
        CHECK(access.partial_sums[i] >= access.partial_sums[i - 1]);

    const ExtendedRealVerdict nature =
        improper_feller_integral(ss, 0.0, Side::beta, FellerVariant::nature);
    CHECK(nature.diverged);
    CHECK(nature.value == kInf);
}

TEST_CASE("catalog boundary kinds match the analytic ground truth") {
    ScaleSpeed brown = derive_scale_speed(catalog("brownian"));
    CHECK(classify_boundary(brown, Side::alpha).kind == BoundaryKind::InaccessibleNatural);
    CHECK(classify_boundary(brown, Side::beta).kind == BoundaryKind::InaccessibleNatural);

    ScaleSpeed bes = derive_scale_speed(catalog("bessel", {{"delta", 3.0}}));
    const BoundaryClass ba = classify_boundary(bes, Side::alpha);
    CHECK(ba.kind == BoundaryKind::InaccessibleEntrance);
    CHECK(ba.access_value == kInf);
    CHECK_THAT(ba.nature_value, WithinRel(1.0 / 3.0, 1e-8));
    CHECK(classify_boundary(bes, Side::beta).kind == BoundaryKind::InaccessibleNatural);

    // the mean-reverting square-root family splits on 2 kappa theta vs sigma^2
    ScaleSpeed cir1 = derive_scale_speed(
        catalog("cir", {{"kappa", 1.0}, {"theta", 1.0}, {"sigma", 1.0}}));
    CHECK(classify_boundary(cir1, Side::alpha).kind == BoundaryKind::InaccessibleEntrance);

    ScaleSpeed cir2 = derive_scale_speed(
        catalog("cir", {{"kappa", 1.0}, {"theta", 1.0}, {"sigma", 2.0}}));
    const BoundaryClass ca = classify_boundary(cir2, Side::alpha);
    CHECK(ca.kind == BoundaryKind::Accessible);
    CHECK(std::isfinite(ca.access_value));
    CHECK(ca.access_value > 0.0);
    CHECK(std::isnan(ca.nature_value)); // not evaluated for an accessible side

    // knife edge 2 kappa theta = sigma^2 still counts as inaccessible
    ScaleSpeed cir_edge = derive_scale_speed(
        catalog("cir", {{"kappa", 1.0}, {"theta", 1.0}, {"sigma", std::sqrt(2.0)}}));
    CHECK(classify_boundary(cir_edge, Side::alpha).kind ==
          BoundaryKind::InaccessibleEntrance);
}

TEST_CASE("classification does not depend on the reference point") {
    ScaleSpeed bes = derive_scale_speed(catalog("bessel", {{"delta", 3.0}}));
    const BoundaryKind k1 = classify_boundary(bes, Side::alpha, 0.5).kind;
    const BoundaryKind k2 = classify_boundary(bes, Side::alpha, 1.0).kind;
    const BoundaryKind k3 = classify_boundary(bes, Side::alpha, 2.5).kind;
    CHECK(k1 == k2);
    CHECK(k2 == k3);

    ScaleSpeed cir2 = derive_scale_speed(
        catalog("cir", {{"kappa", 1.0}, {"theta", 1.0}, {"sigma", 2.0}}));
    CHECK(classify_boundary(cir2, Side::alpha, 0.5).kind ==
          classify_boundary(cir2, Side::alpha, 2.0).kind);
}

TEST_CASE("kind decides exactly by the two test values") {
    ScaleSpeed bes = derive_scale_speed(catalog("bessel", {{"delta", 3.0}}));
    for (Side side : {Side::alpha, Side::beta}) {
        const BoundaryClass c = classify_boundary(bes, side);
        switch (c.kind) {
            case BoundaryKind::Accessible:
                CHECK(std::isfinite(c.access_value));
                break;
            case BoundaryKind::InaccessibleNatural:
                CHECK(c.access_value == kInf);
                CHECK(c.nature_value == kInf);
                break;
            case BoundaryKind::InaccessibleEntrance:
                CHECK(c.access_value == kInf);
                CHECK(std::isfinite(c.nature_value));
                break;
        }
    }
}

TEST_CASE("coefficients outrunning the quadrature range are inconclusive") {
    // H explodes past 1e6 before the second ladder point, so there is exactly
    // one increment: not enough to settle or diverge, and it must say so
    DiffusionSpec spec;
    spec.interval = IntervalSpec{-kInf, kInf, false, false};
    spec.drift = [](double x) { return x * x * x * x * x * x * x; };
    spec.volatility = [](double) { return 1e-3; };
    spec.reference_point = 0.0;
    ScaleSpeed ss = derive_scale_speed(spec);
    CHECK_THROWS_AS(improper_feller_integral(ss, 0.0, Side::beta, FellerVariant::access),
                    InconclusiveError);
}
