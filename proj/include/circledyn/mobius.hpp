#pragma once

#include <cmath>
#include <variant>
#include <vector>

#include "circledyn/circle_geometry.hpp"

namespace circledyn {

// Projective action of a real 2x2 matrix on RP^1, coordinate x with angle pi*x.
class MobiusTransform {
public:
    MobiusTransform() : MobiusTransform(1, 0, 0, 1) {}
    // Rescales to |det| = 1 and fixes the sign so the first nonzero entry is positive.
    MobiusTransform(double a, double b, double c, double d);

    static MobiusTransform identity() { return {}; }
    // Rigid rotation of the circle by `shift` (in circle coordinates).
    static MobiusTransform rotation(double shift);
    // Hyperbolic map with the given attracting/repelling fixed points and
    // derivative `multiplier` > 1 at the repelling one.
    static MobiusTransform hyperbolic(double attracting, double repelling, double multiplier);

    double a() const { return a_; }
    double b() const { return b_; }
    double c() const { return c_; }
    double d() const { return d_; }
    int det_sign() const { return det_sign_; }
    double trace() const { return a_ + d_; }

    CirclePoint eval(CirclePoint p) const;
    double derivative(CirclePoint p) const;
    MobiusTransform inverse() const;
    // Continuous lift: x + displacement, valid for det = +1.
    double lift(double x) const;

    bool is_identity(double tol = 1e-12) const;

    // Closed-form coefficients of |Mv|^2 = alpha + beta cos(2 theta) + gamma sin(2 theta).
    void norm_coefficients(double& alpha, double& beta, double& gamma) const;

private:
    double a_, b_, c_, d_;
    int det_sign_;
};

// g then h applied: compose(g, h) = g o h.
MobiusTransform compose(const MobiusTransform& g, const MobiusTransform& h);

enum class MobiusClass { Identity, Hyperbolic, Parabolic, Elliptic };
MobiusClass classify(const MobiusTransform& g);

struct FixedPoint {
    CirclePoint point;
    double derivative;
};
std::vector<FixedPoint> fixed_points(const MobiusTransform& g);

// x -> x + rho + amp*sin(2 pi x); `inverted` selects the inverse map.
class PerturbedRotation {
public:
    PerturbedRotation(double rho, double amp, bool inverted = false);

    double rho() const { return rho_; }
    double amp() const { return amp_; }
    bool inverted() const { return inverted_; }

    CirclePoint eval(CirclePoint p) const;
    double derivative(CirclePoint p) const;
    PerturbedRotation inverse() const { return {rho_, amp_, !inverted_}; }
    double lift(double x) const;

private:
    double forward_lift(double x) const {
        return x + rho_ + amp_ * std::sin(kTwoPi * (x - std::floor(x)));
    }
    double forward_derivative(double x) const { return 1.0 + kTwoPi * amp_ * std::cos(kTwoPi * x); }
    double inverse_lift(double y) const;

    static constexpr double kTwoPi = 6.283185307179586476925286766559;
    double rho_, amp_;
    bool inverted_;
};

using CircleDiffeo = std::variant<MobiusTransform, PerturbedRotation>;

CirclePoint eval(const CircleDiffeo& g, CirclePoint p);
double derivative(const CircleDiffeo& g, CirclePoint p);
CircleDiffeo inverse(const CircleDiffeo& g);
double lift(const CircleDiffeo& g, double x);
// +1 orientation preserving, -1 reversing.
int orientation(const CircleDiffeo& g);

double rotation_number_estimate(const CircleDiffeo& g, long iterations);

}  // namespace circledyn
