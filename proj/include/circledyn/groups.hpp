#pragma once

#include <string>
#include <utility>
#include <vector>

#include "circledyn/free_words.hpp"

namespace circledyn {

using SeedArcs = std::vector<std::pair<Arc, Letter>>;

// Two hyperbolics with eigenvalue 4 (derivative 16 at the repeller):
// a fixes 0 (attracting) and 1/2, b fixes 1/4 (attracting) and 3/4.
GroupSystem make_schottky2();
// Ping-pong arcs of make_schottky2: a(circle minus D_A) = closure of D_a, etc.
SeedArcs schottky2_seed_arcs();

// a = (1 1; 1 2), b = (1 -1; -1 2): traces (3,3,3), commutator trace -2.
GroupSystem make_punctured_torus();

// (1 1; 1 0) and (1 0; 1 1); not free.
GroupSystem make_psl2z();

GroupSystem make_rotation_group(const std::vector<double>& shifts);

std::vector<std::string> builtin_names();
GroupSystem builtin_group(const std::string& name);

}  // namespace circledyn
