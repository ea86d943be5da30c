#pragma once

#include <optional>
#include <vector>

#include "circledyn/free_words.hpp"

namespace circledyn {

enum class KappaMethod { ExactEndpoints, Sampled };

struct DistortionResult {
    double value = 0.0;
    KappaMethod method = KappaMethod::Sampled;
    int sample_count = 0;
    Arc arc;
};

// Exact for Möbius maps; sampled on a uniform grid (endpoints included) otherwise.
DistortionResult kappa(const CircleDiffeo& g, const Arc& I, int samples = 1000);
DistortionResult kappa_exact(const MobiusTransform& g, const Arc& I);
DistortionResult kappa_sampled(const CircleDiffeo& g, const Arc& I, int samples);
// Distortion of the composed word; exact when the group is Möbius.
DistortionResult word_kappa(const GroupSystem& sys, const ReducedWord& w, const Arc& I, int samples = 2000);

// max over the circle of |d/dx log g'(x)| for a Möbius map.
double mobius_log_slope_max(const MobiusTransform& g);

struct GroupConstants {
    double c_g = 0.0;
    // Largest neighbourhood radius admissible for a unit derivative sum.
    double reach = 0.0;
    int grid = 0;
};

GroupConstants estimate_c_g(const GroupSystem& sys, int grid = 10000);

struct PSumCheck {
    double lhs = 0, rhs = 0;
    bool holds = true;
};
PSumCheck check_p_sum(const GroupSystem& sys, const GroupConstants& k, const ReducedWord& w, const Arc& I);

struct BoundCheck {
    double S = 0, delta = 0, kappa_obs = 0, bound = 0;
    bool holds = true;
};
BoundCheck check_bound(const GroupSystem& sys, const GroupConstants& k, const ReducedWord& w, CirclePoint x0,
                       double delta_max = 0.5);

struct LsumCheck {
    double lhs = 0, rhs = 0;
    bool holds = true;
    // Two-sided comparison of f_i'(x0) with |I_i|/|I| at every prefix.
    bool estimates_hold = true;
    int first_estimate_violation = -1;
};
LsumCheck check_lsum(const GroupSystem& sys, const GroupConstants& k, const ReducedWord& w, const Arc& I,
                     CirclePoint x0);

// Lengths |I_0|, ..., |I_n| of the images of I under the prefixes of w.
std::vector<double> prefix_image_lengths(const GroupSystem& sys, const ReducedWord& w, const Arc& I);

}  // namespace circledyn
