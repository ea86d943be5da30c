#include "circledyn/mobius.hpp"

#include <cmath>
#include <numbers>

#include "circledyn/errors.hpp"

namespace circledyn {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kParabolicTol = 1e-10;
}  // namespace

MobiusTransform::MobiusTransform(double a, double b, double c, double d) {
    double det = a * d - b * c;
    double scale = std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d)});
    if (!std::isfinite(det) || scale == 0.0 || std::abs(det) <= 1e-14 * scale * scale)
        throw DegenerateMatrix("degenerate matrix (determinant 0)");
    double s = 1.0 / std::sqrt(std::abs(det));
    a_ = a * s;
    b_ = b * s;
    c_ = c * s;
    d_ = d * s;
    det_sign_ = det > 0 ? 1 : -1;
    double first = a_ != 0.0 ? a_ : (b_ != 0.0 ? b_ : (c_ != 0.0 ? c_ : d_));
    if (first < 0.0) {
        a_ = -a_;
        b_ = -b_;
        c_ = -c_;
        d_ = -d_;
    }
    // Exact zeros keep the representation canonical.
    for (double* e : {&a_, &b_, &c_, &d_})
        if (*e == 0.0) *e = 0.0;
}

MobiusTransform MobiusTransform::rotation(double shift) {
    double t = kPi * shift;
    return {std::cos(t), -std::sin(t), std::sin(t), std::cos(t)};
}

MobiusTransform MobiusTransform::hyperbolic(double attracting, double repelling, double multiplier) {
    if (!(multiplier > 1.0)) throw InvalidArgument("multiplier must exceed 1");
    double ta = kPi * attracting, tr = kPi * repelling;
    double p11 = std::cos(ta), p21 = std::sin(ta), p12 = std::cos(tr), p22 = std::sin(tr);
    double pdet = p11 * p22 - p12 * p21;
    if (std::abs(pdet) < 1e-12) throw InvalidArgument("fixed points must be distinct");
    double l = std::sqrt(multiplier), li = 1.0 / l;
    // P diag(l, 1/l) P^{-1}
    double q11 = p22 / pdet, q12 = -p12 / pdet, q21 = -p21 / pdet, q22 = p11 / pdet;
    double a = p11 * l * q11 + p12 * li * q21;
    double b = p11 * l * q12 + p12 * li * q22;
    double c = p21 * l * q11 + p22 * li * q21;
    double d = p21 * l * q12 + p22 * li * q22;
    return {a, b, c, d};
}

CirclePoint MobiusTransform::eval(CirclePoint p) const {
    double t = kPi * p.x;
    double cs = std::cos(t), sn = std::sin(t);
    if (p.x == 0.0) {
        cs = 1.0;
        sn = 0.0;
    }
    double w1 = a_ * cs + b_ * sn;
    double w2 = c_ * cs + d_ * sn;
    return CirclePoint(std::atan2(w2, w1) / kPi);
}

double MobiusTransform::derivative(CirclePoint p) const {
    double t = kPi * p.x;
    double cs = std::cos(t), sn = std::sin(t);
    if (p.x == 0.0) {
        cs = 1.0;
        sn = 0.0;
    }
    double w1 = a_ * cs + b_ * sn;
    double w2 = c_ * cs + d_ * sn;
    return 1.0 / (w1 * w1 + w2 * w2);
}

MobiusTransform MobiusTransform::inverse() const {
    // Inverse up to the determinant factor, which normalization removes.
    return {d_, -b_, -c_, a_};
}

double MobiusTransform::lift(double x) const {
    if (det_sign_ < 0) return x + forward_distance(CirclePoint(x), eval(CirclePoint(x)));
    double s = trace() >= 0.0 ? 1.0 : -1.0;
    double t = kPi * wrap_unit(x);
    double cs = std::cos(t), sn = std::sin(t);
    double w1 = s * (a_ * cs + b_ * sn);
    double w2 = s * (c_ * cs + d_ * sn);
    double delta = std::atan2(cs * w2 - sn * w1, cs * w1 + sn * w2);
    return x + delta / kPi;
}

bool MobiusTransform::is_identity(double tol) const {
    return det_sign_ > 0 && std::abs(b_) <= tol && std::abs(c_) <= tol &&
           std::abs(a_ - 1.0) <= tol && std::abs(d_ - 1.0) <= tol;
}

void MobiusTransform::norm_coefficients(double& alpha, double& beta, double& gamma) const {
    double p = a_ * a_ + c_ * c_;
    double r = b_ * b_ + d_ * d_;
    alpha = 0.5 * (p + r);
    beta = 0.5 * (p - r);
    gamma = a_ * b_ + c_ * d_;
}

MobiusTransform compose(const MobiusTransform& g, const MobiusTransform& h) {
    return {g.a() * h.a() + g.b() * h.c(), g.a() * h.b() + g.b() * h.d(),
            g.c() * h.a() + g.d() * h.c(), g.c() * h.b() + g.d() * h.d()};
}

MobiusClass classify(const MobiusTransform& g) {
    if (g.det_sign() < 0) throw DetMinusOne("trace classification undefined for det -1");
    if (g.is_identity()) return MobiusClass::Identity;
    double t = std::abs(g.trace());
    if (std::abs(t - 2.0) <= kParabolicTol) return MobiusClass::Parabolic;
    return t > 2.0 ? MobiusClass::Hyperbolic : MobiusClass::Elliptic;
}

std::vector<FixedPoint> fixed_points(const MobiusTransform& g) {
    if (g.det_sign() < 0) throw DetMinusOne("fixed points requested for det -1 matrix");
    if (g.is_identity()) throw IdentityInput("identity fixes every point");
    double tr = g.trace();
    double disc = tr * tr - 4.0;
    std::vector<double> eig;
    if (std::abs(std::abs(tr) - 2.0) <= kParabolicTol)
        eig.push_back(0.5 * tr);
    else if (disc > 0.0) {
        double s = std::sqrt(disc);
        eig.push_back(0.5 * (tr + s));
        eig.push_back(0.5 * (tr - s));
    }
    std::vector<FixedPoint> out;
    for (double l : eig) {
        double r1x = g.a() - l, r1y = g.b(), r2x = g.c(), r2y = g.d() - l;
        double n1 = r1x * r1x + r1y * r1y, n2 = r2x * r2x + r2y * r2y;
        double vx, vy;
        if (n1 >= n2) {
            vx = -r1y;
            vy = r1x;
        } else {
            vx = -r2y;
            vy = r2x;
        }
        CirclePoint p(std::atan2(vy, vx) / kPi);
        out.push_back({p, g.derivative(p)});
    }
    return out;
}

PerturbedRotation::PerturbedRotation(double rho, double amp, bool inverted)
    : rho_(rho), amp_(amp), inverted_(inverted) {
    if (!(std::abs(kTwoPi * amp) < 1.0))
        throw InvalidArgument("perturbed rotation requires |2 pi amp| < 1");
}

double PerturbedRotation::inverse_lift(double y0) const {
    double shift = std::floor(y0);
    double y = y0 - shift;
    double lo = y - rho_ - std::abs(amp_) - 1e-15, hi = y - rho_ + std::abs(amp_) + 1e-15;
    double x = y - rho_;
    for (int it = 0; it < 100; ++it) {
        double f = forward_lift(x) - y;
        if (f > 0) hi = x;
        else lo = x;
        double step = f / forward_derivative(x);
        double nx = x - step;
        if (nx <= lo || nx >= hi) nx = 0.5 * (lo + hi);
        if (std::abs(nx - x) <= 1e-16 * std::max(1.0, std::abs(x))) {
            x = nx;
            break;
        }
        x = nx;
    }
    return x + shift;
}

double PerturbedRotation::lift(double x) const { return inverted_ ? inverse_lift(x) : forward_lift(x); }

CirclePoint PerturbedRotation::eval(CirclePoint p) const { return CirclePoint(lift(p.x)); }

double PerturbedRotation::derivative(CirclePoint p) const {
    if (!inverted_) return forward_derivative(p.x);
    return 1.0 / forward_derivative(inverse_lift(p.x));
}

CirclePoint eval(const CircleDiffeo& g, CirclePoint p) {
    return std::visit([&](const auto& m) { return m.eval(p); }, g);
}

double derivative(const CircleDiffeo& g, CirclePoint p) {
    return std::visit([&](const auto& m) { return m.derivative(p); }, g);
}

CircleDiffeo inverse(const CircleDiffeo& g) {
    return std::visit([](const auto& m) -> CircleDiffeo { return m.inverse(); }, g);
}

double lift(const CircleDiffeo& g, double x) {
    return std::visit([&](const auto& m) { return m.lift(x); }, g);
}

int orientation(const CircleDiffeo& g) {
    if (auto m = std::get_if<MobiusTransform>(&g)) return m->det_sign();
    return 1;
}

double rotation_number_estimate(const CircleDiffeo& g, long iterations) {
    if (iterations < 1) throw InvalidArgument("iterations must be >= 1");
    double x = 0.0;
    for (long i = 0; i < iterations; ++i) x = lift(g, x);
    return wrap_unit(x / static_cast<double>(iterations));
}

}  // namespace circledyn
