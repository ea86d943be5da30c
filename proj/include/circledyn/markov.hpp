#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "circledyn/minimal_set.hpp"

namespace circledyn {

enum class STildeStatus { Bounded, ExceedsThreshold, DepthLimited };

struct STildeOptions {
    double threshold = 1e3;
    int max_depth = 5000;
    // Branches whose derivative product falls below this are closed.
    double convergence_eps = 1e-4;
    std::uint64_t node_budget = 500000;
};

struct STildeEstimate {
    CirclePoint y;
    Letter letter;
    double value = 1.0;
    STildeStatus status = STildeStatus::DepthLimited;
    int depth = 0;
    std::uint64_t nodes = 0;
};

// Supremum of the derivative sums along geodesics at y whose first letter
// is not the inverse of gamma (identity term included).
STildeEstimate estimate_S_tilde(const GroupSystem& sys, CirclePoint y, Letter gamma, const STildeOptions& opt = {});

struct MTildeOptions {
    double resolution = 1e-2;
    STildeOptions s;
    int bisection_steps = 50;
};

struct ComponentSet {
    Letter letter;
    std::vector<Arc> components;
    double resolution = 0.0;
    double boundary_refined_to = 0.0;
    int unknown_count = 0;
    bool lambda_restricted = false;
};

// Components of the bounded-sum set of gamma. With a cover, only the cover
// arcs are classified and gaps free of the limit set do not split components.
ComponentSet compute_M_tilde(const GroupSystem& sys, Letter gamma, const MTildeOptions& opt = {},
                             const CantorCover* cover = nullptr);

struct FirstReturnSearch {
    std::vector<ReducedWord> admissible;
    std::vector<ReducedWord> returns;
    // Pairs of admissible images overlapping by more than tol.
    std::size_t overlaps = 0;
    bool returns_inside = true;
    bool returns_end_with_gamma = true;
};

FirstReturnSearch find_first_returns(const GroupSystem& sys, const Arc& I, Letter gamma, int max_len = 8,
                                     double tol = 1e-9);

struct FirstReturnPair {
    // Endpoints snapped onto the exact fixed points of the returns.
    Arc interval;
    Letter letter;
    ReducedWord g_minus, g_plus;
    double deriv_minus = 0.0, deriv_plus = 0.0;
    bool interior_fixed_point_free = false;
};

FirstReturnPair endpoint_fixers(const GroupSystem& sys, const Arc& I, Letter gamma,
                                const std::vector<ReducedWord>& returns, double snap_radius, double fix_tol = 1e-10);

// Runs the first-return search and endpoint selection, doubling max_len up
// to 16 while no endpoint fixer is found.
FirstReturnPair component_returns(const GroupSystem& sys, const Arc& I, Letter gamma, double snap_radius,
                                  int max_len = 8);

struct Cycle {
    std::vector<int> components;
    ReducedWord word;
};

struct PhiCycles {
    std::vector<int> phi_right, phi_left;
    std::vector<Cycle> right, left;
};

PhiCycles phi_cycles(const GroupSystem& sys, const std::vector<FirstReturnPair>& pairs, double tol = 1e-9);

struct MarkovInterval {
    Arc arc;
    Letter letter;
};

struct MarkovSystem {
    GroupSystem sys;
    std::vector<MarkovInterval> intervals;
    std::vector<CirclePoint> endpoints;
    std::vector<std::vector<bool>> transition;
    std::vector<FirstReturnPair> returns;
    std::vector<Arc> q_family;
    double c5 = 0.0;
    double epsilon0 = 0.0;
    int c5_levels = 0;
    bool lambda_restricted = false;
};

struct MarkovOptions {
    double tol = 1e-9;
    // C5 is the largest distortion of the first-exit maps seen for j <= c5_levels.
    int c5_levels = 4;
    bool lambda_restricted = false;
};

MarkovSystem build_markov(const GroupSystem& sys, const std::vector<FirstReturnPair>& pairs,
                          const MarkovOptions& opt = {});

struct PartitionPiece {
    Arc arc;
    // Index of the interval R^j maps this piece onto.
    int target = 0;
    // R^j on the piece as a word, first applied letter first.
    ReducedWord word;
};

struct RefinedPartition {
    int level = 0;
    std::vector<PartitionPiece> intervals;
    std::vector<CirclePoint> indeterminacy;
    double max_diameter = 0.0;
};

RefinedPartition refine_partition(const MarkovSystem& ms, int j);

struct FirstExitReport {
    int j = 0;
    double min_derivative = 0.0;
    double kappa_max = 0.0;
    double max_diameter = 0.0;
    bool certified = false;
    int grid_perturbations = 0;
};

FirstExitReport first_exit_expansion(const MarkovSystem& ms, int j, int grid = 20000);

// Largest distortion of the first-exit map over the pieces of level j.
double first_exit_kappa(const MarkovSystem& ms, int j);

struct HatEndpoints {
    CirclePoint minus, minus_star, plus, plus_star;
};

HatEndpoints hat_endpoints(const Arc& I, const CantorCover& cover);

std::string markov_to_json(const MarkovSystem& ms);

}  // namespace circledyn
