#include <doctest.h>

#include <random>

#include "circledyn/circle_geometry.hpp"
#include "circledyn/errors.hpp"

using namespace circledyn;

TEST_CASE("points reduce mod 1 idempotently") {
    CHECK(CirclePoint(1.25).x == doctest::Approx(0.25));
    CHECK(CirclePoint(-0.25).x == doctest::Approx(0.75));
    CirclePoint p(3.7);
    CHECK(CirclePoint(p.x).x == p.x);
    CHECK(CirclePoint(-1e-18).x < 1.0);
}

TEST_CASE("arc containment") {
    CHECK(arc_contains(Arc(0.1, 0.2), CirclePoint(0.2), 0.0));
    CHECK(arc_contains(Arc(0.9, 0.2), CirclePoint(0.05), 0.0));
    CHECK(arc_contains(Arc(0.1, 0.2), CirclePoint(0.3 + 1e-15), 1e-12));
    CHECK_FALSE(arc_contains(Arc(0.1, 0.2), CirclePoint(0.35), 1e-12));
    CHECK_FALSE(arc_contains(Arc(0.125, 0.25), CirclePoint(0.375), 0.0));
    CHECK(arc_contains(Arc(0.1, 0.2), CirclePoint(0.1), 0.0));
    CHECK_THROWS_AS(arc_contains(Arc(0.1, 0.2), CirclePoint(0.1), -1.0), InvalidArgument);
}

TEST_CASE("disjoint insertion") {
    ArcSet s;
    s = s.with(Arc(0.0, 0.1));
    ArcSet t = s.with(Arc(0.2, 0.1));
    CHECK(t.size() == 2);
    CHECK(t.total_length() == doctest::Approx(0.2));

    ArcSet u;
    u = u.with(Arc(0.0, 0.2));
    CHECK_THROWS_AS(u.with(Arc(0.1, 0.2)), OverlapError);
    auto hit = u.find_overlap(Arc(0.1, 0.2));
    REQUIRE(hit);
    CHECK(hit->start.x == 0.0);

    ArcSet f;
    f = f.with(Arc(0.3, 1.0));
    CHECK(f.size() == 1);
    CHECK(f.arcs()[0].full());

    // Touching arcs and wrap-around members.
    ArcSet w;
    w = w.with(Arc(0.9, 0.2));
    CHECK(w.with(Arc(0.1, 0.1)).size() == 2);
    CHECK_THROWS_AS(w.with(Arc(0.05, 0.01)), OverlapError);
    CHECK_THROWS_AS(w.with(Arc(0.5, 0.45)), OverlapError);
}

TEST_CASE("arcset stays sorted and bounded by 1") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 1), len(1e-4, 0.05);
    ArcSet s;
    for (int i = 0; i < 2000; ++i) {
        s.try_insert(Arc(u(rng), len(rng)));
        CHECK(s.total_length() <= 1.0 + 1e-12);
    }
    auto arcs = s.arcs();
    for (std::size_t i = 1; i < arcs.size(); ++i) {
        CHECK(arcs[i - 1].start.x < arcs[i].start.x);
        CHECK(arc_overlap(arcs[i - 1], arcs[i]) <= 1e-12);
    }
}

TEST_CASE("circle distance") {
    CHECK(circle_distance(CirclePoint(0.1), CirclePoint(0.9)) == doctest::Approx(0.2));
    CHECK(circle_distance(CirclePoint(0.4), CirclePoint(0.4)) == 0.0);
    CHECK(circle_distance(CirclePoint(0.0), CirclePoint(0.5)) == doctest::Approx(0.5));
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 10000; ++i) {
        CirclePoint p(u(rng)), q(u(rng)), r(u(rng));
        CHECK(circle_distance(p, q) == circle_distance(q, p));
        CHECK(circle_distance(p, r) <= circle_distance(p, q) + circle_distance(q, r) + 1e-12);
    }
}

TEST_CASE("arc overlap and nested containment") {
    CHECK(arc_overlap(Arc(0.9, 0.2), Arc(0.0, 0.05)) == doctest::Approx(0.05));
    CHECK(arc_overlap(Arc(0.1, 0.1), Arc(0.3, 0.1)) == 0.0);
    // Long arcs meeting in two pieces.
    CHECK(arc_overlap(Arc(0.0, 0.8), Arc(0.6, 0.6)) == doctest::Approx(0.4));
    CHECK(arc_contains_arc(Arc(0.9, 0.3), Arc(0.95, 0.1)));
    CHECK_FALSE(arc_contains_arc(Arc(0.9, 0.3), Arc(0.15, 0.1)));
}
