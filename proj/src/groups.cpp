#include "circledyn/groups.hpp"

#include <cmath>
#include <numbers>
#include <thread>

#include "circledyn/errors.hpp"
#include "circledyn/parallel.hpp"

namespace circledyn {

namespace {
std::atomic<unsigned> g_workers{0};
}

void set_worker_count(unsigned n) { g_workers = n; }

unsigned worker_count() {
    unsigned n = g_workers.load();
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

GroupSystem make_schottky2() {
    MobiusTransform a = MobiusTransform::hyperbolic(0.0, 0.5, 16.0);
    MobiusTransform b = MobiusTransform::hyperbolic(0.25, 0.75, 16.0);
    return GroupSystem("schottky2", {a, b}, true);
}

SeedArcs schottky2_seed_arcs() {
    const double w = std::atan(0.25) / std::numbers::pi;
    auto around = [&](double c) { return Arc(c - w, 2 * w); };
    return {{around(0.0), Letter{0, false}},
            {around(0.5), Letter{0, true}},
            {around(0.25), Letter{1, false}},
            {around(0.75), Letter{1, true}}};
}

GroupSystem make_punctured_torus() {
    return GroupSystem("punctured_torus", {MobiusTransform(1, 1, 1, 2), MobiusTransform(1, -1, -1, 2)}, true);
}

GroupSystem make_psl2z() {
    return GroupSystem("psl2z", {MobiusTransform(1, 1, 1, 0), MobiusTransform(1, 0, 1, 1)}, false);
}

GroupSystem make_rotation_group(const std::vector<double>& shifts) {
    std::vector<CircleDiffeo> gens;
    for (double s : shifts) gens.push_back(MobiusTransform::rotation(s));
    return GroupSystem("rotations", gens, true);
}

std::vector<std::string> builtin_names() { return {"schottky2", "punctured_torus", "psl2z"}; }

GroupSystem builtin_group(const std::string& name) {
    if (name == "schottky2") return make_schottky2();
    if (name == "punctured_torus") return make_punctured_torus();
    if (name == "psl2z") return make_psl2z();
    throw InvalidArgument("unknown builtin group '" + name + "'");
}

}  // namespace circledyn
