#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "circledyn/groups.hpp"

namespace circledyn {

struct CoverArc {
    Arc arc;
    // Word whose image of a seed arc gives this arc; its last letter labels the arc.
    ReducedWord word;
    Letter label;
    // Letter of the seed arc the word is applied to.
    Letter seed;
};

// Level-n approximation of the limit set: images of the seed arcs under
// reduced words of length n that do not backtrack into the seed's letter.
struct CantorCover {
    std::string group;
    int level = 0;
    // Sorted by start.
    std::vector<CoverArc> arcs;
    double total_length = 0.0;

    std::vector<Arc> arc_list() const;
    // Complementary arcs, sorted by start.
    std::vector<Arc> gaps() const;
    double max_arc_length() const;
    std::optional<std::size_t> containing(CirclePoint p, double tol = kEndpointTol) const;
};

// Throws NotSchottky unless the seeds are disjoint and each letter maps the
// three non-opposite seeds into its own seed.
void check_schottky_seeds(const GroupSystem& sys, const SeedArcs& seeds);

CantorCover schottky_cover(const GroupSystem& sys, const SeedArcs& seeds, int level);

double measure_upper_bound(const CantorCover& cover);

// Points of the limit set to within the contraction of `depth` letters:
// images of seed midpoints under random non-backtracking words.
std::vector<CirclePoint> sample_limit_points(const GroupSystem& sys, const SeedArcs& seeds, std::size_t count,
                                             std::uint64_t seed, int depth = 40);

struct Gap {
    Arc arc;
    std::optional<ReducedWord> stabilizer;
    std::optional<int> orbit_class;
};

struct StabilizerSearch {
    std::optional<ReducedWord> word;
    // Smallest max distance from a gap endpoint to the nearest fixed point
    // of a candidate (plain endpoint displacement for non-Möbius maps).
    double best_displacement = 1.0;
    ReducedWord best_word;
};

// Shortest word (shortlex) whose fixed points lie within fix_tol of both gap
// endpoints, so that it maps the gap onto itself.
StabilizerSearch gap_stabilizer(const GroupSystem& sys, const Gap& gap, int max_len, double fix_tol = 1e-9);

struct GapClassification {
    int class_count = 0;
    std::vector<Gap> representatives;
    // For every gap of the cover: index of its class.
    std::vector<int> gap_class;
    std::vector<Gap> gaps;
};

struct GapClassOptions {
    // Expansion factor required from the covering elements.
    double lambda = 0.17328679513998632;  // log 2 / 4
    int max_steps = 200;
    // Gaps shorter than this are below the cover's resolution and ignored.
    double min_gap_length = 0.0;
    double ne_radius = 0.02;
    int stabilizer_len = 6;
    int merge_len = 4;
};

// Pulls every gap back by expanding letters until it separates two seed arcs,
// then merges those seed-level gaps with short words mapping one onto another.
// Gaps within ne_radius of a non-expandable point stop early and are kept
// as their own representatives.
GapClassification classify_gap_orbits(const GroupSystem& sys, const CantorCover& cover,
                                      const std::vector<CirclePoint>& ne_points, const GapClassOptions& opt = {});

struct GapSum {
    double sum = 0.0;
    // Contribution of each sphere, index = word length.
    std::vector<double> increments;
};

GapSum gap_sum_bound(const GroupSystem& sys, CirclePoint x, const Gap& gap, int depth);

std::string cover_to_csv(const std::vector<CantorCover>& covers);
std::string gaps_to_json(const GroupSystem& sys, const GapClassification& cls);

}  // namespace circledyn
