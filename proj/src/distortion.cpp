#include "circledyn/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "circledyn/errors.hpp"

namespace circledyn {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kRelSlack = 1e-9;
constexpr double kAbsSlack = 1e-14;

bool within(double lhs, double rhs) { return lhs <= rhs * (1.0 + kRelSlack) + kAbsSlack; }

void require_proper(const Arc& I) {
    if (I.full()) throw FullCircleArc("distortion is undefined on the full circle");
}
}  // namespace

DistortionResult kappa_exact(const MobiusTransform& g, const Arc& I) {
    require_proper(I);
    double alpha, beta, gamma;
    g.norm_coefficients(alpha, beta, gamma);
    double rho = std::hypot(beta, gamma);
    double phi = std::atan2(gamma, beta);
    // |g v|^2 = alpha + rho cos(psi), psi = 2 theta - phi, theta = pi x.
    double psi0 = 2.0 * kPi * I.start.x - phi;
    double psi1 = psi0 + 2.0 * kPi * I.length;
    double d0 = 1.0 / g.derivative(I.start), d1 = 1.0 / g.derivative(I.end());
    double lo = std::min(d0, d1), hi = std::max(d0, d1);
    for (long k = static_cast<long>(std::ceil(psi0 / kPi)); k * kPi <= psi1; ++k) {
        // alpha^2 - rho^2 = det^2 = 1 avoids cancellation in alpha - rho.
        double v = (k % 2 == 0) ? alpha + rho : 1.0 / (alpha + rho);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {std::log(hi / lo), KappaMethod::ExactEndpoints, 0, I};
}

DistortionResult kappa_sampled(const CircleDiffeo& g, const Arc& I, int samples) {
    require_proper(I);
    if (samples < 2) throw InvalidArgument("kappa needs at least 2 samples");
    double lo = INFINITY, hi = -INFINITY;
    for (int i = 0; i < samples; ++i) {
        double v = std::log(derivative(g, I.at(static_cast<double>(i) / (samples - 1))));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {hi - lo, KappaMethod::Sampled, samples, I};
}

DistortionResult kappa(const CircleDiffeo& g, const Arc& I, int samples) {
    if (auto m = std::get_if<MobiusTransform>(&g)) return kappa_exact(*m, I);
    return kappa_sampled(g, I, samples);
}

DistortionResult word_kappa(const GroupSystem& sys, const ReducedWord& w, const Arc& I, int samples) {
    require_proper(I);
    if (sys.all_mobius()) return kappa_exact(word_matrix(sys, w), I);
    double lo = INFINITY, hi = -INFINITY;
    for (int i = 0; i < samples; ++i) {
        double v = std::log(word_derivative(sys, w, I.at(static_cast<double>(i) / (samples - 1))));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {hi - lo, KappaMethod::Sampled, samples, I};
}

double mobius_log_slope_max(const MobiusTransform& g) {
    // d/dx log g' = -pi * 2 rho sin(psi) / (alpha + rho cos psi), maximal at cos psi = -rho/alpha,
    // where it equals 2 pi rho / sqrt(alpha^2 - rho^2) = 2 pi rho (|det| = 1).
    double alpha, beta, gamma;
    g.norm_coefficients(alpha, beta, gamma);
    return 2.0 * kPi * std::hypot(beta, gamma);
}

namespace {
double perturbed_log_slope(const PerturbedRotation& f, double y) {
    const double tp = 2.0 * kPi;
    auto slope = [&](double x) {
        return -tp * tp * f.amp() * std::sin(tp * x) / (1.0 + tp * f.amp() * std::cos(tp * x));
    };
    if (!f.inverted()) return slope(y);
    double x = f.lift(y);
    return -slope(x) / (1.0 + tp * f.amp() * std::cos(tp * x));
}
}  // namespace

GroupConstants estimate_c_g(const GroupSystem& sys, int grid) {
    if (grid < 100) throw InvalidArgument("c_g grid must be >= 100");
    double c = 0.0;
    for (const Letter& l : sys.letters()) {
        const CircleDiffeo& g = sys.map(l);
        if (auto m = std::get_if<MobiusTransform>(&g)) {
            c = std::max(c, mobius_log_slope_max(*m));
        } else {
            const auto& f = std::get<PerturbedRotation>(g);
            for (int i = 0; i < grid; ++i)
                c = std::max(c, std::abs(perturbed_log_slope(f, static_cast<double>(i) / grid)));
        }
    }
    GroupConstants out;
    out.c_g = c;
    out.grid = grid;
    out.reach = c > 0.0 ? std::log(2.0) / (2.0 * c) : 0.5;
    return out;
}

std::vector<double> prefix_image_lengths(const GroupSystem& sys, const ReducedWord& w, const Arc& I) {
    std::vector<double> out{I.length};
    Arc cur = I;
    for (const Letter& l : w.letters()) {
        cur = diffeo_image(sys.map(l), cur);
        out.push_back(cur.length);
    }
    return out;
}

PSumCheck check_p_sum(const GroupSystem& sys, const GroupConstants& k, const ReducedWord& w, const Arc& I) {
    PSumCheck r;
    if (w.empty()) return r;
    r.lhs = word_kappa(sys, w, I).value;
    auto lens = prefix_image_lengths(sys, w, I);
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) sum += lens[i];
    r.rhs = k.c_g * sum;
    r.holds = within(r.lhs, r.rhs);
    return r;
}

BoundCheck check_bound(const GroupSystem& sys, const GroupConstants& k, const ReducedWord& w, CirclePoint x0,
                       double delta_max) {
    BoundCheck r;
    r.S = evaluate_word(sys, w, x0).intermediate_derivative_sum;
    if (k.c_g <= 0.0) {
        r.delta = delta_max;
        r.bound = std::log(2.0);
    } else {
        r.delta = std::min(std::log(2.0) / (2.0 * k.c_g * r.S), delta_max);
        r.bound = 2.0 * k.c_g * r.S * r.delta;
    }
    Arc U(x0.x - 0.5 * r.delta, r.delta);
    r.kappa_obs = word_kappa(sys, w, U).value;
    r.holds = within(r.kappa_obs, r.bound);
    return r;
}

LsumCheck check_lsum(const GroupSystem& sys, const GroupConstants& k, const ReducedWord& w, const Arc& I,
                     CirclePoint x0) {
    if (!arc_contains(I, x0)) throw PointOutsideArc("base point lies outside the arc");
    LsumCheck r;
    auto lens = prefix_image_lengths(sys, w, I);
    double deriv = 1.0, deriv_sum = 0.0, len_before = 0.0;
    CirclePoint p = x0;
    for (std::size_t i = 0; i <= w.size(); ++i) {
        double e = std::exp(k.c_g * len_before);
        double ratio = lens[i] / I.length;
        if (!(within(ratio / e, deriv) && within(deriv, ratio * e))) {
            if (r.estimates_hold) r.first_estimate_violation = static_cast<int>(i);
            r.estimates_hold = false;
        }
        deriv_sum += deriv;
        r.lhs += lens[i];
        if (i < w.size()) {
            len_before += lens[i];
            deriv *= derivative(sys.map(w[i]), p);
            p = eval(sys.map(w[i]), p);
        }
    }
    r.rhs = I.length * std::exp(k.c_g * (len_before)) * deriv_sum;
    r.holds = within(r.lhs, r.rhs);
    return r;
}

}  // namespace circledyn
