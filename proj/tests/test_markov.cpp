#include <doctest.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "circledyn/errors.hpp"
#include "circledyn/markov.hpp"

using namespace circledyn;

namespace {

const Letter a{0, false}, A{0, true}, b{1, false}, B{1, true};

Arc quadrant(double start) { return Arc(start, 0.25); }

// Torus components: M~_a = (1/4,1/2), M~_b = (1/2,3/4), M~_A = (3/4,1), M~_B = (0,1/4).
std::vector<std::pair<Arc, Letter>> torus_components() {
    return {{quadrant(0.25), a}, {quadrant(0.5), b}, {quadrant(0.75), A}, {quadrant(0.0), B}};
}

std::vector<FirstReturnPair> torus_pairs(const GroupSystem& T) {
    std::vector<FirstReturnPair> out;
    for (auto [I, l] : torus_components()) {
        auto fs = find_first_returns(T, I, l, 8);
        out.push_back(endpoint_fixers(T, I, l, fs.returns, 1e-6));
    }
    return out;
}

const MarkovSystem& torus_markov() {
    static MarkovSystem ms = build_markov(make_punctured_torus(), torus_pairs(make_punctured_torus()));
    return ms;
}

// Largest derivative-sum along reduced paths of length <= depth avoiding gamma^-1 first.
double brute_path_sum(const GroupSystem& sys, CirclePoint y, Letter gamma, int depth) {
    double best = 1.0;
    std::function<void(CirclePoint, double, double, int, int)> rec = [&](CirclePoint p, double d, double s, int last,
                                                                         int k) {
        best = std::max(best, s);
        if (k == depth) return;
        for (Letter l : sys.letters()) {
            if (k == 0 && l == gamma.inverse()) continue;
            if (last >= 0 && l == Letter::from_code(last).inverse()) continue;
            double nd = d * derivative(sys.map(l), p);
            rec(eval(sys.map(l), p), nd, s + nd, l.code(), k + 1);
        }
    };
    rec(y, 1.0, 1.0, -1, 0);
    return best;
}

bool contains_word(const std::vector<ReducedWord>& ws, const std::string& text) {
    auto w = ReducedWord::parse(text);
    return std::find(ws.begin(), ws.end(), w) != ws.end();
}

}  // namespace

TEST_CASE("S-tilde estimate against exhaustive path sums") {
    auto T = make_punctured_torus();
    CirclePoint y(0.375);
    auto est = estimate_S_tilde(T, y, a);
    CHECK(est.status == STildeStatus::Bounded);
    double brute = brute_path_sum(T, y, a, 9);
    CHECK(est.value >= brute - 1e-2);
    CHECK(est.value < 10.0);
    // y lies inside the a-component, so the cone of A is unbounded there.
    CHECK(estimate_S_tilde(T, y, A).status == STildeStatus::ExceedsThreshold);
}

TEST_CASE("S-tilde: isometries never converge") {
    auto R = make_rotation_group({0.1, std::sqrt(2.0) / 10});
    STildeOptions opt;
    opt.threshold = 50;
    CHECK(estimate_S_tilde(R, CirclePoint(0.3), a, opt).status == STildeStatus::ExceedsThreshold);
}

TEST_CASE("S-tilde: argument checks") {
    auto T = make_punctured_torus();
    STildeOptions bad;
    bad.threshold = 0.5;
    CHECK_THROWS_AS(estimate_S_tilde(T, CirclePoint(0.3), a, bad), InvalidArgument);
}

TEST_CASE("M-tilde components of the punctured torus are the quadrants") {
    auto T = make_punctured_torus();
    for (auto [I, l] : torus_components()) {
        auto cs = compute_M_tilde(T, l);
        REQUIRE(cs.components.size() == 1);
        CHECK(circle_distance(cs.components[0].start, I.start) < 1e-3);
        CHECK(circle_distance(cs.components[0].end(), I.end()) < 1e-3);
        CHECK(cs.boundary_refined_to == doctest::Approx(1e-4));
        CHECK(cs.unknown_count == 0);
    }
}

TEST_CASE("M-tilde: inconclusive grid and bad resolution") {
    auto T = make_punctured_torus();
    MTildeOptions opt;
    opt.s.node_budget = 1;
    opt.s.threshold = 1e300;
    CHECK_THROWS_AS(compute_M_tilde(T, a, opt), AllUnknown);
    MTildeOptions coarse;
    coarse.resolution = 0.1;
    CHECK_THROWS_AS(compute_M_tilde(T, a, coarse), InvalidArgument);
}

TEST_CASE("first-returns of a torus quadrant") {
    auto T = make_punctured_torus();
    auto fs = find_first_returns(T, quadrant(0.25), a, 8);
    CHECK(contains_word(fs.returns, "B A b a"));
    CHECK(contains_word(fs.returns, "b A B a"));
    CHECK(fs.overlaps == 0);
    CHECK(fs.returns_inside);
    CHECK(fs.returns_end_with_gamma);
    for (const auto& w : fs.returns) CHECK(w.last() == a);
    // Admissible words never start with the inverse letter.
    for (const auto& w : fs.admissible) CHECK_FALSE(w.first() == A);

    auto one = find_first_returns(T, quadrant(0.25), a, 1);
    REQUIRE(one.returns.size() == 1);
    CHECK(one.returns[0] == ReducedWord::parse("a"));
    CHECK_THROWS_AS(find_first_returns(T, quadrant(0.25), a, 0), InvalidArgument);
}

TEST_CASE("endpoint fixers are the two commutators with unit derivative") {
    auto T = make_punctured_torus();
    auto fs = find_first_returns(T, quadrant(0.25), a, 8);
    auto fr = endpoint_fixers(T, quadrant(0.25), a, fs.returns, 1e-6);
    CHECK(fr.g_plus == ReducedWord::parse("B A b a"));
    CHECK(fr.g_minus == ReducedWord::parse("b A B a"));
    CHECK(fr.deriv_plus == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(fr.deriv_minus == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(fr.interior_fixed_point_free);
    CHECK(circle_distance(fr.interval.start, CirclePoint(0.25)) < 1e-12);
    CHECK(circle_distance(fr.interval.end(), CirclePoint(0.5)) < 1e-12);

    // Snapping from a slightly shrunken estimate lands on the same vertices.
    auto shrunk = component_returns(T, Arc(0.2502, 0.2496), a, 1e-3);
    CHECK(circle_distance(shrunk.interval.start, CirclePoint(0.25)) < 1e-12);
    CHECK(circle_distance(shrunk.interval.end(), CirclePoint(0.5)) < 1e-12);
}

TEST_CASE("endpoint fixers: failure modes") {
    auto T = make_punctured_torus();
    CHECK_THROWS_AS(endpoint_fixers(T, quadrant(0.25), a, {}, 1e-6), NoEndpointFixer);
    CHECK_THROWS_AS(endpoint_fixers(T, quadrant(0.25), a, {ReducedWord::parse("a")}, 1e-6), NoEndpointFixer);
    // One hyperbolic fixing both ends of its axis arc: a wandering configuration.
    GroupSystem H("hyp", {MobiusTransform::hyperbolic(0.1, 0.6, 4.0)});
    CHECK_THROWS_AS(endpoint_fixers(H, Arc(0.1, 0.5), a, {ReducedWord::parse("a")}, 1e-6), WanderingConfiguration);
}

TEST_CASE("phi cycles recover g+ as the cycle word") {
    auto T = make_punctured_torus();
    auto pairs = torus_pairs(T);
    auto pc = phi_cycles(T, pairs);
    REQUIRE(pc.right.size() == 1);
    REQUIRE(pc.left.size() == 1);
    CHECK(pc.right[0].components.size() == 4);
    CHECK(pc.right[0].word == pairs[pc.right[0].components[0]].g_plus);
    CHECK(pc.left[0].word == pairs[pc.left[0].components[0]].g_minus);
    // Phi_R(I_a) is the component of the first letter of g+ = "B A b a".
    CHECK(pairs[pc.phi_right[0]].letter == B);

    auto broken = pairs;
    broken[1].g_plus = ReducedWord::parse("a b A B");
    CHECK_THROWS_AS(phi_cycles(T, broken), CycleInconsistency);
}

TEST_CASE("Markov system of the punctured torus") {
    const auto& ms = torus_markov();
    REQUIRE(ms.intervals.size() == 4);
    CHECK(ms.endpoints.size() == 4);
    // Sorted as B, a, b, A; R = gamma^-1 sends each quadrant over all but its opposite.
    std::vector<std::vector<bool>> expected = {
        {true, true, false, true}, {true, true, true, false}, {false, true, true, true}, {true, false, true, true}};
    CHECK(ms.transition == expected);
    for (std::size_t i = 0; i < 4; ++i) {
        Arc img = diffeo_image(ms.sys.map(ms.intervals[i].letter.inverse()), ms.intervals[i].arc);
        double covered = 0;
        for (std::size_t j = 0; j < 4; ++j)
            if (ms.transition[i][j]) covered += ms.intervals[j].arc.length;
        CHECK(covered == doctest::Approx(img.length).epsilon(1e-9));
    }
    CHECK(ms.q_family.size() == 12);
    CHECK(ms.c5 > 0);
    double min_q = 1;
    for (const auto& q : ms.q_family) min_q = std::min(min_q, q.length);
    CHECK(ms.epsilon0 == doctest::Approx(0.5 * min_q * std::exp(-ms.c5)));
}

TEST_CASE("build_markov: cover gaps") {
    auto T = make_punctured_torus();
    CHECK_THROWS_AS(build_markov(T, {}), CoverGap);
    auto pairs = torus_pairs(T);
    pairs.pop_back();
    CHECK_THROWS_AS(build_markov(T, pairs), CoverGap);
}

TEST_CASE("refined partitions nest and shrink") {
    const auto& ms = torus_markov();
    double prev = 1.0;
    for (int j = 0; j <= 5; ++j) {
        auto part = refine_partition(ms, j);
        CHECK(part.intervals.size() == 4 * static_cast<std::size_t>(std::pow(3, j)));
        double total = 0;
        for (const auto& p : part.intervals) {
            total += p.arc.length;
            Arc img = word_image(ms.sys, p.word, p.arc);
            const Arc& target = ms.intervals[p.target].arc;
            CHECK(circle_distance(img.start, target.start) < 1e-9);
            CHECK(circle_distance(img.end(), target.end()) < 1e-9);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(part.max_diameter < prev);
        prev = part.max_diameter;
    }
}

TEST_CASE("first-exit expansion on the torus") {
    const auto& ms = torus_markov();
    auto r1 = first_exit_expansion(ms, 1, 4000);
    auto r2 = first_exit_expansion(ms, 2, 4000);
    // Frozen from direct measurement: odd levels still contract somewhere.
    CHECK(r1.min_derivative == doctest::Approx(0.63).epsilon(0.05));
    CHECK(r2.min_derivative > 1.0);
    CHECK(r2.max_diameter < r1.max_diameter);
    CHECK(r2.kappa_max == doctest::Approx(first_exit_kappa(ms, 2)));
    // The diameter criterion is far from met at these levels.
    CHECK_FALSE(r2.certified);
    CHECK_THROWS_AS(first_exit_expansion(ms, 0), InvalidArgument);
}

TEST_CASE("limit-set restricted Markov system on the Schottky group") {
    auto S = make_schottky2();
    auto cover = schottky_cover(S, schottky2_seed_arcs(), 6);
    std::vector<FirstReturnPair> pairs;
    for (Letter l : S.letters()) {
        auto cs = compute_M_tilde(S, l, {}, &cover);
        CHECK(cs.lambda_restricted);
        REQUIRE(cs.components.size() == 1);
        // The hull of the limit set inside the seed arc of l.
        for (const auto& [seed, sl] : schottky2_seed_arcs())
            if (sl == l) CHECK(arc_contains_arc(seed, cs.components[0]));
        pairs.push_back(component_returns(S, cs.components[0], l, 10 * cs.boundary_refined_to));
        CHECK(pairs.back().g_plus.size() == 4);
    }
    auto pc = phi_cycles(S, pairs);
    CHECK(pc.right.size() == 1);
    MarkovOptions mo;
    mo.lambda_restricted = true;
    auto ms = build_markov(S, pairs, mo);
    auto rep = first_exit_expansion(ms, 5, 20000);
    CHECK(rep.min_derivative > 1.0);
    CHECK(rep.max_diameter < ms.epsilon0);
    CHECK(rep.certified);

    auto h = hat_endpoints(ms.intervals[0].arc, cover);
    // The limit set is one-sided at every component endpoint: hats sit on gap ends.
    CHECK(circle_distance(h.plus, ms.intervals[0].arc.end()) < 1e-5);
    CHECK(circle_distance(h.plus_star, ms.intervals[1].arc.start) < 1e-5);
    CHECK(circle_distance(h.minus, ms.intervals[0].arc.start) < 1e-5);
    CHECK(circle_distance(h.minus_star, ms.intervals[3].arc.end()) < 1e-5);
}

TEST_CASE("Markov JSON matches the golden file") {
    auto text = markov_to_json(torus_markov());
    std::ifstream in(std::string(CIRCLEDYN_GOLDEN_DIR) + "/torus_markov.json");
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    auto got = nlohmann::json::parse(text), want = nlohmann::json::parse(ss.str());
    std::function<void(const nlohmann::json&, const nlohmann::json&, const std::string&)> cmp =
        [&](const nlohmann::json& g, const nlohmann::json& w, const std::string& path) {
            INFO(path);
            if (w.is_number_float()) {
                REQUIRE(g.is_number());
                CHECK(g.get<double>() == doctest::Approx(w.get<double>()).epsilon(1e-9));
            } else if (w.is_structured()) {
                REQUIRE(g.size() == w.size());
                for (auto it = w.begin(); it != w.end(); ++it)
                    cmp(w.is_object() ? g.at(it.key()) : g.at(std::distance(w.begin(), it)), *it,
                        path + "/" + (w.is_object() ? it.key() : std::to_string(std::distance(w.begin(), it))));
            } else {
                CHECK(g == w);
            }
        };
    cmp(got, want, "");
    CHECK(markov_to_json(torus_markov()) == text);
}
