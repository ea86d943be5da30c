#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "circledyn/free_words.hpp"

namespace circledyn {

constexpr std::uint64_t kDefaultNodeBudget = 100'000'000;

struct BallSumEntry {
    int n = 0;
    double sum = 1.0;
    double max_derivative = 1.0;
    ReducedWord argmax;
};

struct BallSumSeries {
    CirclePoint x;
    std::vector<BallSumEntry> entries;
};

// S_n(x) for n = 0..n_max. Non-free groups sum over distinct elements.
BallSumSeries ball_sum(const GroupSystem& sys, CirclePoint x, int n_max,
                       std::uint64_t budget = kDefaultNodeBudget);

// (n, log(max_{B(n)} g'(x)) / n) for n = 1..n_max.
std::vector<std::pair<int, double>> lyapunov_estimate(const GroupSystem& sys, CirclePoint x, int n_max,
                                                      std::uint64_t budget = kDefaultNodeBudget);

// Least-squares slope of log S_n against n over [n_lo, n_hi].
double log_sum_slope(const BallSumSeries& series, int n_lo, int n_hi);

// Distinct group elements grouped by word length, each labelled by its
// shortlex-least word. Requires Möbius generators.
struct BallElement {
    MobiusTransform matrix;
    ReducedWord word;
};
std::vector<std::vector<BallElement>> element_spheres(const GroupSystem& sys, int n,
                                                      std::uint64_t budget = kDefaultNodeBudget);

struct MaxEntryRecord {
    int n = 0;
    double max_entry = 0.0;
    ReducedWord witness;
};
// Largest absolute matrix entry over B(n), n = 1..n_max.
std::vector<MaxEntryRecord> max_entry_series(const GroupSystem& sys, int n_max,
                                             std::uint64_t budget = kDefaultNodeBudget);

enum class NEVerdict { NECandidate, Expandable };

struct NEReport {
    CirclePoint x;
    int depth = 0;
    double max_derivative = 1.0;
    ReducedWord witness;
    NEVerdict verdict = NEVerdict::NECandidate;
};

std::vector<NEReport> ne_scan(const GroupSystem& sys, const std::vector<CirclePoint>& points, int depth,
                              double tol = 1e-9);

struct Fixer {
    ReducedWord word;
    double displacement = 0.0;
    double derivative = 1.0;
    bool parabolic_like = false;
};

struct FixerReport {
    CirclePoint x;
    std::vector<Fixer> fixers;
    std::uint64_t fixer_count = 0;
    int star_satisfied_to_depth = 0;
};

FixerReport find_fixers(const GroupSystem& sys, CirclePoint x, int depth, double fix_tol = 1e-10,
                        std::size_t max_report = 1000);

enum class Side { Right, Left };

struct ClosestReturn {
    CirclePoint x0;
    int n = 0;
    ReducedWord f_n;
    CirclePoint x_n;
    double gap = 0.0;
    Side side = Side::Right;
};

ClosestReturn closest_return(const GroupSystem& sys, CirclePoint x0, int n, Side side, double fix_tol = 1e-10);

struct ReturnDeviation {
    double c0 = 0.0;
    double c1 = 0.0;
};

// Deviation of y -> (f_n(x0 + r y) - x0) / r from the identity on [-1, 1].
ReturnDeviation rescaled_return_deviation(const GroupSystem& sys, const ClosestReturn& cr, double radius,
                                          int grid = 1001);

struct ConeSearchResult {
    std::optional<ReducedWord> word;
    double best_sum = 0.0;
    ReducedWord best_word;
    std::uint64_t nodes = 0;
};

// Best-first search over geodesics whose first applied letter is gamma for
// one whose sum over j = 1..k of the prefix derivatives exceeds target.
ConeSearchResult find_cone_geodesic(const GroupSystem& sys, CirclePoint x, Letter gamma, double target = 2.0,
                                    int max_depth = 12, std::uint64_t node_budget = 200000);

// Sum over j = 1..k of (gamma_j ... gamma_1)'(x).
double cone_sum(const GroupSystem& sys, const ReducedWord& w, CirclePoint x);

struct FamilyMember {
    Arc region;
    Letter letter;
    ReducedWord word;
};
using ConeFamily = std::vector<FamilyMember>;

struct FamilyOptions {
    double resolution = 1e-3;
    double target = 2.0;
    int max_depth = 10;
    std::uint64_t node_budget = 20000;
    // Halvings allowed when a region fails certification.
    int max_splits = 6;
};

// Samples the domain arcs (the whole circle when empty) and keeps, per
// sample region and letter, a word whose sum stays above target on the
// whole region after the distortion margin.
ConeFamily build_cone_family(const GroupSystem& sys, const std::vector<Arc>& domain,
                             const FamilyOptions& opt = {});

// Family word valid at y in cone gamma, if any.
const FamilyMember* family_lookup(const GroupSystem& sys, const ConeFamily& fam, CirclePoint y, Letter gamma,
                                  double target = 2.0);

struct TreeMember {
    ReducedWord word;
    Letter direction;
};

struct GrowingTree {
    CirclePoint x;
    int level = 0;
    // Longest family word.
    int step_length = 0;
    std::vector<TreeMember> members;
    double sum_at_x = 1.0;
};

GrowingTree grow_tree(const GroupSystem& sys, CirclePoint x, const ConeFamily& fam, int m);

struct TreeVerification {
    bool membership = true;
    bool disjoint_cones = true;
    bool sum_ok = true;
    double sum = 0.0;
    std::string detail;
    bool ok() const { return membership && disjoint_cones && sum_ok; }
};

// Re-derives the three defining conditions from the member words alone.
TreeVerification verify_growing_tree(const GroupSystem& sys, const GrowingTree& tree);

struct CascadeStep {
    int k = 0;
    double c0 = 0.0;
    double c1 = 0.0;
};

// f_{k+2} = f_k f_{k+1} f_k^-1 f_{k+1}^-1 for k = 1..K, measured on a grid of I.
std::vector<CascadeStep> commutator_cascade(const CircleDiffeo& f1, const CircleDiffeo& f2, int K, const Arc& I,
                                            int grid = 1000);

}  // namespace circledyn
