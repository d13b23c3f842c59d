#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "geoverity/geometry.hpp"

using namespace geoverity;
using geometry::ConditionOutcome;
using geometry::OwdEstimate;

TEST_CASE("great_circle_km basics") {
    geo::GeoPoint origin(0.0, 0.0);
    CHECK(geo::great_circle_km(origin, origin) == 0.0);

    const double half_circumference = geo::kPi * geo::kEarthRadiusKm;
    CHECK_THAT(geo::great_circle_km(origin, geo::GeoPoint(0.0, 180.0)),
               Catch::Matchers::WithinRel(half_circumference, 1e-9));
    CHECK_THAT(geo::great_circle_km(geo::GeoPoint(90.0, 0.0), geo::GeoPoint(-90.0, 0.0)),
               Catch::Matchers::WithinRel(half_circumference, 1e-9));

    // symmetry and positivity over random pairs
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> lat(-89.0, 89.0), lon(-179.0, 179.0);
    for (int i = 0; i < 200; ++i) {
        geo::GeoPoint p(lat(rng), lon(rng)), q(lat(rng), lon(rng));
        const double d1 = geo::great_circle_km(p, q);
        const double d2 = geo::great_circle_km(q, p);
        CHECK(d1 == d2);
        CHECK(d1 >= 0.0);
    }
}

TEST_CASE("heron_area examples") {
    CHECK_THAT(*geometry::heron_area(3, 4, 5), Catch::Matchers::WithinAbs(6.0, 1e-12));
    CHECK_THAT(*geometry::heron_area(1, 1, 2), Catch::Matchers::WithinAbs(0.0, 1e-9));
    CHECK_FALSE(geometry::heron_area(1, 1, 5).has_value());
    CHECK_THAT(*geometry::heron_area(5, 5, 6), Catch::Matchers::WithinAbs(12.0, 1e-12));
    CHECK_THROWS_AS(geometry::heron_area(-1, 2, 2), std::invalid_argument);
}

TEST_CASE("heron_area permutation symmetry and quadratic scaling") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> side(0.1, 50.0);
    for (int i = 0; i < 500; ++i) {
        double s1 = side(rng), s2 = side(rng), s3 = side(rng);
        const auto a = geometry::heron_area(s1, s2, s3);
        CHECK(geometry::heron_area(s2, s1, s3) == a);
        CHECK(geometry::heron_area(s3, s2, s1) == a);
        CHECK(geometry::heron_area(s2, s3, s1) == a);
        if (a) {
            const double k = 3.25;
            const auto scaled = geometry::heron_area(k * s1, k * s2, k * s3);
            REQUIRE(scaled.has_value());
            CHECK_THAT(*scaled, Catch::Matchers::WithinRel(k * k * *a, 1e-9));
        }
    }
    CHECK_THAT(*geometry::heron_area(4, 4, 0), Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("cpv_condition worked examples") {
    const std::array<double, 3> baseline{10.0, 10.0, 10.0};
    const double d = 10.0 / std::sqrt(3.0);

    // centroid of an equilateral triangle: equality case
    const auto outer = geometry::heron_area(10, 10, 10);
    REQUIRE(outer.has_value());
    CHECK_THAT(*outer, Catch::Matchers::WithinAbs(43.30127018922193, 1e-9));
    CHECK(geometry::cpv_condition({d, d, d, true}, baseline, 0.0) == ConditionOutcome::PASS);

    // far outside
    CHECK(geometry::cpv_condition({20, 20, 20, true}, baseline, 0.0) == ConditionOutcome::FAIL);

    // looser epsilon than a passing case still passes
    CHECK(geometry::cpv_condition({d, d, d, true}, baseline, 10.0) == ConditionOutcome::PASS);
}

TEST_CASE("cpv_condition degenerate handling") {
    const std::array<double, 3> baseline{10.0, 10.0, 10.0};
    // baseline side longer than both client delays: implausibly short delays
    CHECK(geometry::cpv_condition({1, 1, 1, true}, baseline, 0.0) == ConditionOutcome::INVALID);
    // client delay exceeding baseline + partner beyond the slack: demonstrably far
    CHECK(geometry::cpv_condition({30, 5, 5, true}, baseline, 0.0) == ConditionOutcome::FAIL);
    // the same violation within the per-side slack reads as a flat sub-triangle
    // (sub-area 0), so the near-degenerate configuration still passes
    CHECK(geometry::cpv_condition({16, 5, 5, true}, baseline, 2.0) == ConditionOutcome::PASS);
    // invalid estimate never reaches the area test
    CHECK(geometry::cpv_condition({5, 5, 5, false}, baseline, 0.0) == ConditionOutcome::INVALID);
    // degenerate outer triangle
    CHECK(geometry::cpv_condition({5, 5, 5, true}, {1, 1, 5}, 0.0) == ConditionOutcome::INVALID);
}

namespace {

struct Pt {
    double x, y;
};

double dist(const Pt& a, const Pt& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// barycentric point-in-triangle oracle; returns the minimum barycentric
// coordinate so callers can skip points too close to an edge
double min_barycentric(const Pt& p, const Pt& a, const Pt& b, const Pt& c) {
    const double det = (b.y - c.y) * (a.x - c.x) + (c.x - b.x) * (a.y - c.y);
    const double l1 = ((b.y - c.y) * (p.x - c.x) + (c.x - b.x) * (p.y - c.y)) / det;
    const double l2 = ((c.y - a.y) * (p.x - c.x) + (a.x - c.x) * (p.y - c.y)) / det;
    return std::min({l1, l2, 1.0 - l1 - l2});
}

}  // namespace

TEST_CASE("cpv_condition agrees with barycentric oracle on proportional delays") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> coord(-20.0, 20.0);
    int tested = 0;
    while (tested < 1200) {
        Pt a{coord(rng), coord(rng)}, b{coord(rng), coord(rng)}, c{coord(rng), coord(rng)};
        const std::array<double, 3> baseline{dist(a, b), dist(b, c), dist(c, a)};
        auto outer = geometry::heron_area(baseline[0], baseline[1], baseline[2]);
        if (!outer || *outer < 1.0) continue;  // skip near-degenerate triangles
        for (int i = 0; i < 20 && tested < 1200; ++i) {
            Pt p{coord(rng), coord(rng)};
            const double mb = min_barycentric(p, a, b, c);
            if (std::abs(mb) < 1e-3) continue;  // too close to an edge to trust floats
            const OwdEstimate est{dist(p, a), dist(p, b), dist(p, c), true};
            const auto outcome = geometry::cpv_condition(est, baseline, 0.0);
            if (mb > 0.0)
                CHECK(outcome == ConditionOutcome::PASS);
            else
                CHECK(outcome == ConditionOutcome::FAIL);
            ++tested;
        }
    }
}

TEST_CASE("cpv_condition epsilon monotonicity") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> side(5.0, 15.0), delay(1.0, 25.0);
    for (int i = 0; i < 500; ++i) {
        const std::array<double, 3> baseline{side(rng), side(rng), side(rng)};
        if (!geometry::heron_area(baseline[0], baseline[1], baseline[2])) continue;
        const OwdEstimate est{delay(rng), delay(rng), delay(rng), true};
        std::uniform_real_distribution<double> eps(0.0, 20.0);
        double e1 = eps(rng), e2 = eps(rng);
        if (e1 > e2) std::swap(e1, e2);
        if (geometry::cpv_condition(est, baseline, e1) == ConditionOutcome::PASS)
            CHECK(geometry::cpv_condition(est, baseline, e2) == ConditionOutcome::PASS);
    }
}

TEST_CASE("circle_contains examples") {
    CHECK(geometry::circle_contains(3, 4, 5, 0));   // boundary: on the circle
    CHECK_FALSE(geometry::circle_contains(4, 4, 5, 0));
    CHECK(geometry::circle_contains(1, 1, 5, 0));   // near midpoint
}

TEST_CASE("circle_contains agrees with Euclidean point-in-circle oracle") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> coord(-10.0, 10.0);
    int tested = 0;
    while (tested < 1200) {
        Pt v1{coord(rng), coord(rng)}, v2{coord(rng), coord(rng)}, s{coord(rng), coord(rng)};
        const double d12 = dist(v1, v2);
        if (d12 < 1.0) continue;
        const Pt center{(v1.x + v2.x) / 2.0, (v1.y + v2.y) / 2.0};
        const double r = d12 / 2.0;
        const double to_center = dist(s, center);
        if (std::abs(to_center - r) < 1e-6 * r) continue;  // boundary, float ambiguity
        const bool oracle = to_center <= r;
        CHECK(geometry::circle_contains(dist(s, v1), dist(s, v2), d12, 0.0) == oracle);
        ++tested;
    }
}

TEST_CASE("TriangleSpec validation") {
    const std::array<geo::GeoPoint, 3> verts{geo::GeoPoint(0, 0), geo::GeoPoint(1, 0),
                                             geo::GeoPoint(0, 1)};
    CHECK_NOTHROW(geometry::TriangleSpec(verts, {1, 1, 1}));
    CHECK_THROWS_AS(geometry::TriangleSpec(verts, {1, 0, 1}), std::invalid_argument);
    const std::array<geo::GeoPoint, 3> collinear{geo::GeoPoint(0, 0), geo::GeoPoint(0, 1),
                                                 geo::GeoPoint(0, 2)};
    CHECK_THROWS_AS(geometry::TriangleSpec(collinear, {1, 1, 1}), std::invalid_argument);
}
