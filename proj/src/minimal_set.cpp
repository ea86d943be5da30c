#include "circledyn/minimal_set.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "circledyn/errors.hpp"
#include "circledyn/expansion.hpp"
#include "circledyn/parallel.hpp"

namespace circledyn {

std::vector<Arc> CantorCover::arc_list() const {
    std::vector<Arc> out;
    out.reserve(arcs.size());
    for (const auto& a : arcs) out.push_back(a.arc);
    return out;
}

std::vector<Arc> CantorCover::gaps() const {
    std::vector<Arc> out;
    const std::size_t n = arcs.size();
    for (std::size_t i = 0; i < n; ++i) {
        CirclePoint from = arcs[i].arc.end();
        CirclePoint to = arcs[(i + 1) % n].arc.start;
        double len = forward_distance(from, to);
        if (len > 0.0) out.emplace_back(from, len);
    }
    std::sort(out.begin(), out.end(), [](const Arc& a, const Arc& b) { return a.start.x < b.start.x; });
    return out;
}

double CantorCover::max_arc_length() const {
    double m = 0.0;
    for (const auto& a : arcs) m = std::max(m, a.arc.length);
    return m;
}

std::optional<std::size_t> CantorCover::containing(CirclePoint p, double tol) const {
    if (arcs.empty()) return std::nullopt;
    auto it = std::upper_bound(arcs.begin(), arcs.end(), p.x,
                               [](double x, const CoverArc& a) { return x < a.arc.start.x; });
    std::size_t k = it == arcs.begin() ? arcs.size() - 1 : static_cast<std::size_t>(it - arcs.begin()) - 1;
    for (std::size_t c : {k, (k + 1) % arcs.size(), (k + arcs.size() - 1) % arcs.size()})
        if (arc_contains(arcs[c].arc, p, tol)) return c;
    return std::nullopt;
}

void check_schottky_seeds(const GroupSystem& sys, const SeedArcs& seeds) {
    if (static_cast<int>(seeds.size()) != sys.letter_count())
        throw NotSchottky("expected one seed arc per letter, got " + std::to_string(seeds.size()));
    ArcSet set;
    for (const auto& [arc, l] : seeds)
        if (auto hit = set.try_insert(arc, 0.0))
            throw NotSchottky(std::string("seed arc of ") + l.to_char() + " overlaps another seed arc");
    for (const auto& [own, l] : seeds) {
        for (const auto& [arc, x] : seeds) {
            if (x == l.inverse()) continue;
            Arc img = diffeo_image(sys.map(l), arc);
            if (!arc_contains_arc(own, img, 1e-12))
                throw NotSchottky(std::string("letter ") + l.to_char() + " does not map the seed arc of " +
                                  x.to_char() + " into its own seed arc");
        }
    }
}

CantorCover schottky_cover(const GroupSystem& sys, const SeedArcs& seeds, int level) {
    if (level < 0) throw InvalidArgument("level must be nonnegative");
    check_schottky_seeds(sys, seeds);
    std::vector<CoverArc> cur;
    for (const auto& [arc, l] : seeds) cur.push_back({arc, ReducedWord(), l, l});
    for (int k = 0; k < level; ++k) {
        std::vector<CoverArc> next;
        next.reserve(cur.size() * 3);
        for (const auto& c : cur) {
            for (const Letter& m : sys.letters()) {
                if (m == c.label.inverse()) continue;
                CoverArc child;
                child.arc = diffeo_image(sys.map(m), c.arc);
                child.word = c.word;
                child.word.append(m);
                child.label = m;
                child.seed = c.seed;
                next.push_back(std::move(child));
            }
        }
        cur = std::move(next);
    }
    std::sort(cur.begin(), cur.end(), [](const CoverArc& a, const CoverArc& b) { return a.arc.start.x < b.arc.start.x; });
    CantorCover cover;
    cover.group = sys.label;
    cover.level = level;
    cover.arcs = std::move(cur);
    for (const auto& a : cover.arcs) cover.total_length += a.arc.length;
    return cover;
}

double measure_upper_bound(const CantorCover& cover) {
    double s = 0.0;
    for (const auto& a : cover.arcs) s += a.arc.length;
    return s;
}

std::vector<CirclePoint> sample_limit_points(const GroupSystem& sys, const SeedArcs& seeds, std::size_t count,
                                             std::uint64_t seed, int depth) {
    if (seeds.empty()) throw InvalidArgument("no seed arcs");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> letter(0, sys.letter_count() - 1);
    std::vector<CirclePoint> out;
    while (out.size() < count) {
        const auto& [arc, seed_letter] = seeds[rng() % seeds.size()];
        Letter prev = seed_letter;
        CirclePoint p = arc.midpoint();
        for (int k = 0; k < depth; ++k) {
            Letter l = Letter::from_code(letter(rng));
            if (l == prev.inverse()) {
                --k;
                continue;
            }
            p = eval(sys.map(l), p);
            prev = l;
        }
        out.push_back(p);
    }
    return out;
}

namespace {

std::vector<ReducedWord> words_of_length(const GroupSystem& sys, int len) {
    std::vector<ReducedWord> cur{ReducedWord()};
    for (int k = 0; k < len; ++k) {
        std::vector<ReducedWord> next;
        for (const auto& w : cur)
            for (const Letter& l : sys.letters()) {
                if (!w.empty() && l == w.last().inverse()) continue;
                ReducedWord c = w;
                c.append(l);
                next.push_back(std::move(c));
            }
        cur = std::move(next);
    }
    std::sort(cur.begin(), cur.end(), shortlex_less);
    return cur;
}

// Max distance from the gap endpoints to the nearest fixed points of w.
double endpoint_mismatch(const GroupSystem& sys, const ReducedWord& w, const Arc& gap) {
    CirclePoint e0 = gap.start, e1 = gap.end();
    if (sys.all_mobius()) {
        std::vector<FixedPoint> fps;
        try {
            fps = fixed_points(word_matrix(sys, w));
        } catch (const Error&) {
            return 1.0;
        }
        auto nearest = [&](CirclePoint p) {
            double d = 1.0;
            for (const auto& f : fps) d = std::min(d, circle_distance(f.point, p));
            return d;
        };
        return std::max(nearest(e0), nearest(e1));
    }
    return std::max(circle_distance(e0, apply_word(sys, w, e0)), circle_distance(e1, apply_word(sys, w, e1)));
}

}  // namespace

StabilizerSearch gap_stabilizer(const GroupSystem& sys, const Gap& gap, int max_len, double fix_tol) {
    if (max_len < 1) throw InvalidArgument("max_len must be at least 1");
    StabilizerSearch out;
    for (int len = 1; len <= max_len; ++len) {
        for (const auto& w : words_of_length(sys, len)) {
            double m = endpoint_mismatch(sys, w, gap.arc);
            if (m < out.best_displacement) {
                out.best_displacement = m;
                out.best_word = w;
            }
            if (m > fix_tol) continue;
            // With both endpoints fixed, reversing maps swap the gap and its complement.
            int sign = 1;
            for (const Letter& l : w.letters()) sign *= orientation(sys.map(l));
            if (sign > 0) {
                out.word = w;
                return out;
            }
        }
    }
    return out;
}

namespace {

struct UnionFind {
    std::vector<int> p;
    explicit UnionFind(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
    int find(int x) { return p[x] == x ? x : p[x] = find(p[x]); }
    void unite(int a, int b) { p[find(a)] = find(b); }
};

Letter arc_label(const ReducedWord& w, Letter seed) { return w.empty() ? seed : w.last(); }

}  // namespace

GapClassification classify_gap_orbits(const GroupSystem& sys, const CantorCover& cover,
                                      const std::vector<CirclePoint>& ne_points, const GapClassOptions& opt) {
    GapClassification out;
    const auto& arcs = cover.arcs;
    const std::size_t n = arcs.size();
    if (n == 0) return out;
    const double growth = std::exp(opt.lambda);

    // Exceptional gaps are keyed either by the ordered seed pair they
    // separate or, near a non-expandable point, by that point.
    std::map<std::pair<int, int>, int> seed_keys;
    std::vector<Gap> exceptional;
    auto exceptional_index = [&](std::pair<int, int> key, const Arc& arc) {
        auto [it, fresh] = seed_keys.emplace(key, static_cast<int>(exceptional.size()));
        if (fresh) exceptional.push_back(Gap{arc, std::nullopt, std::nullopt});
        return it->second;
    };

    // Neighbourhoods of distinct non-expandable points stay disjoint.
    std::vector<double> ne_radius(ne_points.size(), opt.ne_radius);
    for (std::size_t p = 0; p < ne_points.size(); ++p)
        for (std::size_t q = 0; q < ne_points.size(); ++q)
            if (p != q) ne_radius[p] = std::min(ne_radius[p], 0.5 * circle_distance(ne_points[p], ne_points[q]));

    std::vector<int> gap_exc;
    for (std::size_t i = 0; i < n; ++i) {
        const CoverArc& left = arcs[i];
        const CoverArc& right = arcs[(i + 1) % n];
        double len = forward_distance(left.arc.end(), right.arc.start);
        if (len <= 0.0 || len < opt.min_gap_length) continue;
        Arc g(left.arc.end(), len);
        Gap gap{g, std::nullopt, std::nullopt};

        ReducedWord wl = left.word, wr = right.word;
        Arc cur = g;
        int steps = 0;
        std::optional<int> exc;
        while (!exc) {
            int near_ne = -1;
            for (std::size_t p = 0; p < ne_points.size() && near_ne < 0; ++p)
                if (circle_distance(ne_points[p], cur.midpoint()) <= ne_radius[p] + 0.5 * cur.length)
                    near_ne = static_cast<int>(p);
            Letter ll = arc_label(wl, left.seed), lr = arc_label(wr, right.seed);
            if (near_ne >= 0) {
                exc = exceptional_index({-1, near_ne}, g);
                break;
            }
            if (!(ll == lr) || wl.empty() || wr.empty()) {
                // Both neighbours are now whole seed arcs or lie in different seeds.
                exc = exceptional_index({ll.code(), lr.code()}, g);
                break;
            }
            if (++steps > opt.max_steps)
                throw NoProgress("gap at " + std::to_string(g.start.x) + " not resolved after " +
                                 std::to_string(opt.max_steps) + " expansions");
            Arc next = diffeo_image(sys.map(ll.inverse()), cur);
            if (next.length < growth * cur.length)
                throw NoProgress("gap at " + std::to_string(cur.start.x) + " of length " +
                                 std::to_string(cur.length) + " grew only by " +
                                 std::to_string(next.length / cur.length));
            cur = next;
            wl.pop_back();
            wr.pop_back();
        }
        out.gaps.push_back(gap);
        gap_exc.push_back(*exc);
    }

    // The representative of a seed pair is the widest gap carrying its key.
    for (std::size_t k = 0; k < out.gaps.size(); ++k)
        if (out.gaps[k].arc.length > exceptional[gap_exc[k]].arc.length) exceptional[gap_exc[k]].arc = out.gaps[k].arc;

    // Snap the representatives to their stabilizers' fixed points, then merge
    // those carried onto one another by short words.
    const double snap = 4.0 * cover.max_arc_length() + 1e-12;
    std::vector<std::optional<Arc>> exact(exceptional.size());
    parallel_for(exceptional.size(), [&](std::size_t e) {
        auto st = gap_stabilizer(sys, exceptional[e], opt.stabilizer_len, snap);
        if (!st.word) return;
        exceptional[e].stabilizer = st.word;
        if (!sys.all_mobius()) return;
        auto fps = fixed_points(word_matrix(sys, *st.word));
        CirclePoint a = exceptional[e].arc.start, b = exceptional[e].arc.end();
        auto nearest = [&](CirclePoint p) {
            CirclePoint best = p;
            double d = 1.0;
            for (const auto& f : fps)
                if (circle_distance(f.point, p) < d) d = circle_distance(f.point, p), best = f.point;
            return best;
        };
        CirclePoint sa = nearest(a), sb = nearest(b);
        double len = forward_distance(sa, sb);
        if (len > 0.0) exact[e] = Arc(sa, len);
    });
    UnionFind uf(static_cast<int>(exceptional.size()));
    std::vector<ReducedWord> words;
    for (int len = 1; len <= opt.merge_len; ++len)
        for (auto& w : words_of_length(sys, len)) words.push_back(std::move(w));
    for (std::size_t a = 0; a < exceptional.size(); ++a) {
        if (!exact[a]) continue;
        for (const auto& w : words) {
            Arc img = word_image(sys, w, *exact[a]);
            for (std::size_t b = 0; b < exceptional.size(); ++b) {
                if (b == a || !exact[b]) continue;
                if (circle_distance(img.start, exact[b]->start) <= 1e-8 &&
                    circle_distance(img.end(), exact[b]->end()) <= 1e-8)
                    uf.unite(static_cast<int>(a), static_cast<int>(b));
            }
        }
    }
    std::map<int, int> class_of_root;
    std::vector<int> exc_class(exceptional.size());
    for (std::size_t e = 0; e < exceptional.size(); ++e) {
        int r = uf.find(static_cast<int>(e));
        auto [it, fresh] = class_of_root.emplace(r, static_cast<int>(class_of_root.size()));
        exc_class[e] = it->second;
        if (fresh) {
            Gap rep = exceptional[e];
            rep.orbit_class = it->second;
            out.representatives.push_back(rep);
        }
    }
    out.class_count = static_cast<int>(class_of_root.size());
    for (std::size_t k = 0; k < out.gaps.size(); ++k) {
        out.gap_class.push_back(exc_class[gap_exc[k]]);
        out.gaps[k].orbit_class = exc_class[gap_exc[k]];
    }
    return out;
}

GapSum gap_sum_bound(const GroupSystem& sys, CirclePoint x, const Gap& gap, int depth) {
    if (!arc_contains(gap.arc, x, 0.0)) throw InvalidArgument("point must lie in the gap");
    auto series = ball_sum(sys, x, depth);
    GapSum out;
    double prev = 0.0;
    for (const auto& e : series.entries) {
        out.increments.push_back(e.sum - prev);
        prev = e.sum;
    }
    out.sum = prev;
    return out;
}

std::string cover_to_csv(const std::vector<CantorCover>& covers) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << "level,arc_start,arc_length\n";
    for (const auto& c : covers)
        for (const auto& a : c.arcs) os << c.level << ',' << a.arc.start.x << ',' << a.arc.length << '\n';
    return os.str();
}

std::string gaps_to_json(const GroupSystem& sys, const GapClassification& cls) {
    nlohmann::ordered_json j;
    j["group"] = sys.label;
    j["class_count"] = cls.class_count;
    j["gap_count"] = cls.gaps.size();
    auto& classes = j["classes"] = nlohmann::ordered_json::array();
    for (const auto& r : cls.representatives) {
        int members = static_cast<int>(std::count(cls.gap_class.begin(), cls.gap_class.end(), *r.orbit_class));
        nlohmann::ordered_json c;
        c["class"] = *r.orbit_class;
        c["representative"] = {{"start", r.arc.start.x}, {"length", r.arc.length}};
        c["stabilizer"] = r.stabilizer ? nlohmann::ordered_json(r.stabilizer->to_string()) : nlohmann::ordered_json();
        c["members"] = members;
        classes.push_back(c);
    }
    return j.dump(2) + "\n";
}

}  // namespace circledyn
