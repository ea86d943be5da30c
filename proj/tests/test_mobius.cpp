#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "circledyn/errors.hpp"
#include "circledyn/mobius.hpp"

using namespace circledyn;

namespace {
constexpr double kPi = std::numbers::pi;

// Independent evaluation on slopes: line through (cos, sin) as an angle.
double oracle_eval(double a, double b, double c, double d, double x) {
    double t = kPi * x;
    double ang = std::atan2(c * std::cos(t) + d * std::sin(t), a * std::cos(t) + b * std::sin(t));
    double y = ang / kPi;
    return y - std::floor(y);
}

double fd_derivative(const MobiusTransform& g, double x, double h = 1e-6) {
    double up = g.eval(CirclePoint(x + h)).x, dn = g.eval(CirclePoint(x - h)).x;
    double diff = up - dn;
    diff -= std::round(diff);
    return diff / (2 * h);
}

MobiusTransform random_sl2(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-2, 2);
    for (;;) {
        double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
        if (std::abs(a * d - b * c) > 0.2) return {a, b, c, d};
    }
}
}  // namespace

TEST_CASE("evaluation examples") {
    MobiusTransform id;
    CHECK(id.eval(CirclePoint(0.37)).x == doctest::Approx(0.37));
    MobiusTransform quarter(0, -1, 1, 0);
    CHECK(quarter.eval(CirclePoint(0.0)).x == doctest::Approx(0.5));
    MobiusTransform par(1, 1, 0, 1);
    CHECK(par.eval(CirclePoint(0.0)).x == 0.0);
}

TEST_CASE("canonical form and degeneracy") {
    MobiusTransform g(-2, 0, 0, -0.5);
    CHECK(g.a() == doctest::Approx(2.0));
    CHECK(g.det_sign() == 1);
    MobiusTransform h(0, 2, 2, 0);
    CHECK(h.det_sign() == -1);
    CHECK(h.b() == doctest::Approx(1.0));
    CHECK_THROWS_AS(MobiusTransform(1, 2, 2, 4), DegenerateMatrix);
    CHECK_THROWS_AS(MobiusTransform(0, 0, 0, 0), DegenerateMatrix);
}

TEST_CASE("derivative at (1:0) is 1/(a^2+c^2)") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> u(-9, 9);
    int tested = 0;
    while (tested < 200) {
        int a = u(rng), b = u(rng), c = u(rng), d = u(rng);
        int det = a * d - b * c;
        if (det != 1 && det != -1) continue;
        MobiusTransform g(a, b, c, d);
        double expect = 1.0 / (a * a + c * c);
        CHECK(std::abs(g.derivative(CirclePoint(0.0)) / expect - 1.0) <= 1e-12);
        ++tested;
    }
    MobiusTransform f(1, 1, 1, 0);
    CHECK(f.derivative(CirclePoint(0.0)) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("derivative matches finite differences and the oracle evaluation") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ux(0, 1);
    for (int i = 0; i < 500; ++i) {
        auto g = random_sl2(rng);
        double x = ux(rng);
        CHECK(circle_distance(g.eval(CirclePoint(x)),
                              CirclePoint(oracle_eval(g.a(), g.b(), g.c(), g.d(), x))) < 1e-13);
        double d = g.derivative(CirclePoint(x));
        CHECK(std::abs(std::abs(fd_derivative(g, x)) / d - 1.0) < 1e-6);
    }
}

TEST_CASE("rotations are isometries") {
    auto r = MobiusTransform::rotation(0.3);
    for (int i = 0; i < 20; ++i) {
        CirclePoint p(i / 20.0);
        CHECK(r.derivative(p) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(circle_distance(r.eval(p), CirclePoint(p.x + 0.3)) < 1e-14);
    }
}

TEST_CASE("composition, chain rule, inverse") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> ux(0, 1);
    for (int i = 0; i < 500; ++i) {
        auto g = random_sl2(rng), h = random_sl2(rng);
        CirclePoint p(ux(rng));
        auto gh = compose(g, h);
        CHECK(circle_distance(gh.eval(p), g.eval(h.eval(p))) < 1e-12);
        double chain = g.derivative(h.eval(p)) * h.derivative(p);
        CHECK(std::abs(gh.derivative(p) / chain - 1.0) < 1e-10);
        CHECK(std::abs(g.derivative(p) * g.inverse().derivative(g.eval(p)) - 1.0) < 1e-10);
        for (int k = 0; k < 100; ++k) {
            CirclePoint q(k / 100.0);
            CHECK(circle_distance(g.inverse().eval(g.eval(q)), q) < 1e-12);
        }
        CHECK(compose(g, g.inverse()).is_identity(1e-12));
    }
    MobiusTransform p(1, 1, 0, 1);
    auto p2 = compose(p, p);
    CHECK(p2.a() == 1.0);
    CHECK(p2.b() == 2.0);
    CHECK(p2.c() == 0.0);
    CHECK(p2.d() == 1.0);
}

TEST_CASE("Fibonacci powers of (1 1; 1 0)") {
    // Oracle: the recurrence F_{k+1} = F_k + F_{k-1}, F_0 = 0, F_1 = 1.
    std::vector<double> fib{0, 1};
    for (int k = 2; k < 40; ++k) fib.push_back(fib[k - 1] + fib[k - 2]);
    MobiusTransform f(1, 1, 1, 0), m;
    for (int n = 1; n < 35; ++n) {
        m = compose(f, m);
        CHECK(m.a() == fib[n + 1]);
        CHECK(m.b() == fib[n]);
        CHECK(m.c() == fib[n]);
        CHECK(m.d() == fib[n - 1]);
    }
}

TEST_CASE("classification") {
    CHECK(classify(MobiusTransform(2, 0, 0, 0.5)) == MobiusClass::Hyperbolic);
    CHECK(classify(MobiusTransform(1, 1, 0, 1)) == MobiusClass::Parabolic);
    CHECK(classify(MobiusTransform::rotation(0.2)) == MobiusClass::Elliptic);
    CHECK(classify(MobiusTransform()) == MobiusClass::Identity);
    CHECK_THROWS_AS(classify(MobiusTransform(1, 1, 1, 0)), DetMinusOne);
}

TEST_CASE("fixed points") {
    auto fp = fixed_points(MobiusTransform(2, 0, 0, 0.5));
    REQUIRE(fp.size() == 2);
    std::sort(fp.begin(), fp.end(), [](auto& l, auto& r) { return l.point.x < r.point.x; });
    CHECK(fp[0].point.x == doctest::Approx(0.0));
    CHECK(fp[0].derivative == doctest::Approx(0.25));
    CHECK(fp[1].point.x == doctest::Approx(0.5));
    CHECK(fp[1].derivative == doctest::Approx(4.0));

    auto pp = fixed_points(MobiusTransform(1, 1, 0, 1));
    REQUIRE(pp.size() == 1);
    CHECK(pp[0].point.x == 0.0);
    CHECK(pp[0].derivative == doctest::Approx(1.0).epsilon(1e-9));

    CHECK(fixed_points(MobiusTransform::rotation(0.3)).empty());
    CHECK_THROWS_AS(fixed_points(MobiusTransform()), IdentityInput);

    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
        auto g = random_sl2(rng);
        if (g.det_sign() < 0 || classify(g) != MobiusClass::Hyperbolic) continue;
        auto f = fixed_points(g);
        REQUIRE(f.size() == 2);
        CHECK(std::abs(f[0].derivative * f[1].derivative - 1.0) < 1e-9);
        for (auto& q : f) CHECK(circle_distance(g.eval(q.point), q.point) < 1e-12);
    }
}

TEST_CASE("hyperbolic constructor places fixed points") {
    auto h = MobiusTransform::hyperbolic(0.1, 0.7, 9.0);
    CHECK(circle_distance(h.eval(CirclePoint(0.1)), CirclePoint(0.1)) < 1e-13);
    CHECK(circle_distance(h.eval(CirclePoint(0.7)), CirclePoint(0.7)) < 1e-13);
    CHECK(h.derivative(CirclePoint(0.1)) == doctest::Approx(1.0 / 9.0));
    CHECK(h.derivative(CirclePoint(0.7)) == doctest::Approx(9.0));
}

TEST_CASE("perturbed rotation") {
    PerturbedRotation f(0.3, 0.05);
    auto fi = f.inverse();
    for (int i = 0; i < 100; ++i) {
        CirclePoint p(i / 100.0);
        CHECK(circle_distance(fi.eval(f.eval(p)), p) < 1e-13);
        CHECK(std::abs(f.derivative(p) * fi.derivative(f.eval(p)) - 1.0) < 1e-12);
    }
    PerturbedRotation rigid(0.3, 0.0);
    CHECK(rigid.derivative(CirclePoint(0.4)) == 1.0);
    CHECK_THROWS_AS(PerturbedRotation(0.1, 0.2), InvalidArgument);
}

TEST_CASE("rotation number") {
    CHECK(rotation_number_estimate(MobiusTransform::rotation(0.3), 1000) == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(rotation_number_estimate(MobiusTransform::rotation(0.8), 1000) == doctest::Approx(0.8).epsilon(1e-9));
    CHECK(rotation_number_estimate(PerturbedRotation(0.3, 0.0), 1000) == doctest::Approx(0.3).epsilon(1e-9));
    double par = rotation_number_estimate(MobiusTransform(1, 1, 0, 1), 1000);
    CHECK(std::min(par, 1.0 - par) <= 1e-3);
    double r6 = rotation_number_estimate(PerturbedRotation(0.3, 0.01), 1000000);
    double r7 = rotation_number_estimate(PerturbedRotation(0.3, 0.01), 10000000);
    CHECK(std::abs(r6 - r7) < 1e-5);
}
