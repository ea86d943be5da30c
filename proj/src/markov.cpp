#include "circledyn/markov.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>

#include <json.hpp>

#include "circledyn/distortion.hpp"

#include "circledyn/errors.hpp"
#include "circledyn/parallel.hpp"

namespace circledyn {

STildeEstimate estimate_S_tilde(const GroupSystem& sys, CirclePoint y, Letter gamma, const STildeOptions& opt) {
    if (!(opt.threshold > 1)) throw InvalidArgument("threshold must exceed 1");
    if (opt.max_depth < 1) throw InvalidArgument("max_depth must be at least 1");
    struct Node {
        double d, s;
        CirclePoint p;
        int depth;
        int last;  // letter code, -1 at the root
    };
    auto cmp = [](const Node& a, const Node& b) { return a.d < b.d; };
    std::priority_queue<Node, std::vector<Node>, decltype(cmp)> open(cmp);
    STildeEstimate est;
    est.y = y;
    est.letter = gamma;
    est.value = 1.0;
    open.push({1.0, 1.0, y, 0, -1});
    auto letters = sys.letters();
    const int banned_first = gamma.inverse().code();
    bool limited = false;
    std::uint64_t nodes = 1;
    while (!open.empty()) {
        Node n = open.top();
        open.pop();
        if (n.d < opt.convergence_eps) break;
        if (n.depth >= opt.max_depth) {
            limited = true;
            continue;
        }
        for (const Letter& l : letters) {
            if (n.last < 0 ? l.code() == banned_first : l.code() == (Letter::from_code(n.last).inverse().code()))
                continue;
            const CircleDiffeo& g = sys.map(l);
            double d = n.d * derivative(g, n.p);
            double s = n.s + d;
            est.value = std::max(est.value, s);
            est.depth = std::max(est.depth, n.depth + 1);
            if (s > opt.threshold) {
                est.status = STildeStatus::ExceedsThreshold;
                est.nodes = nodes;
                return est;
            }
            if (++nodes > opt.node_budget) {
                est.status = STildeStatus::DepthLimited;
                est.nodes = nodes;
                return est;
            }
            if (d >= opt.convergence_eps) open.push({d, s, eval(g, n.p), n.depth + 1, l.code()});
        }
    }
    est.nodes = nodes;
    est.status = limited ? STildeStatus::DepthLimited : STildeStatus::Bounded;
    return est;
}

namespace {

bool inside_for_bisection(const GroupSystem& sys, double x, Letter gamma, const STildeOptions& opt) {
    return estimate_S_tilde(sys, CirclePoint(x), gamma, opt).status != STildeStatus::ExceedsThreshold;
}

// Boundary between an inside point `in` and an outside point `out` (unwrapped reals).
double bisect_boundary(const GroupSystem& sys, double in, double out, Letter gamma, const MTildeOptions& opt,
                       double target) {
    for (int it = 0; it < opt.bisection_steps && std::abs(out - in) > target; ++it) {
        double mid = 0.5 * (in + out);
        if (inside_for_bisection(sys, mid, gamma, opt.s))
            in = mid;
        else
            out = mid;
    }
    return 0.5 * (in + out);
}

// Maximal cyclic runs of true entries, as (first, count).
std::vector<std::pair<std::size_t, std::size_t>> cyclic_runs(const std::vector<bool>& in) {
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    std::size_t n = in.size();
    std::size_t start = 0;
    while (start < n && in[start]) ++start;
    if (start == n) {
        if (n) runs.push_back({0, n});
        return runs;
    }
    // Begin scanning just after an outside entry so runs never wrap mid-scan.
    for (std::size_t k = 1; k <= n; ++k) {
        std::size_t i = (start + k) % n;
        if (in[i] && !in[(i + n - 1) % n]) {
            std::size_t len = 0;
            while (in[(i + len) % n]) ++len;
            runs.push_back({i, len});
        }
    }
    std::sort(runs.begin(), runs.end());
    return runs;
}

}  // namespace

ComponentSet compute_M_tilde(const GroupSystem& sys, Letter gamma, const MTildeOptions& opt, const CantorCover* cover) {
    ComponentSet cs;
    cs.letter = gamma;
    if (cover) {
        cs.lambda_restricted = true;
        const auto& arcs = cover->arcs;
        std::vector<STildeStatus> st(arcs.size());
        parallel_for(arcs.size(), [&](std::size_t i) {
            st[i] = estimate_S_tilde(sys, arcs[i].arc.midpoint(), gamma, opt.s).status;
        });
        std::vector<bool> in(arcs.size());
        std::size_t unknown = 0;
        for (std::size_t i = 0; i < arcs.size(); ++i) {
            in[i] = st[i] == STildeStatus::Bounded;
            unknown += st[i] == STildeStatus::DepthLimited;
        }
        if (!arcs.empty() && unknown == arcs.size()) throw AllUnknown("no cover arc could be classified");
        cs.unknown_count = static_cast<int>(unknown);
        cs.resolution = cs.boundary_refined_to = cover->max_arc_length();
        for (auto [first, len] : cyclic_runs(in)) {
            const Arc& a = arcs[first].arc;
            const Arc& b = arcs[(first + len - 1) % arcs.size()].arc;
            double length = len == arcs.size() ? 1.0 : forward_distance(a.start, b.end());
            if (length == 0.0) length = 1.0;
            cs.components.emplace_back(a.start, length);
        }
        return cs;
    }
    if (!(opt.resolution > 0) || opt.resolution > 1e-2) throw InvalidArgument("resolution must lie in (0, 1e-2]");
    const std::size_t n = static_cast<std::size_t>(std::ceil(1.0 / opt.resolution));
    const double h = 1.0 / n;
    cs.resolution = h;
    cs.boundary_refined_to = h / 100;
    std::vector<STildeStatus> st(n);
    parallel_for(n, [&](std::size_t i) { st[i] = estimate_S_tilde(sys, CirclePoint((i + 0.5) * h), gamma, opt.s).status; });
    std::vector<bool> in(n);
    std::size_t unknown = 0;
    for (std::size_t i = 0; i < n; ++i) {
        in[i] = st[i] == STildeStatus::Bounded;
        unknown += st[i] == STildeStatus::DepthLimited;
    }
    if (unknown == n) throw AllUnknown("every grid point was inconclusive");
    cs.unknown_count = static_cast<int>(unknown);
    auto runs = cyclic_runs(in);
    std::vector<Arc> comps(runs.size());
    parallel_for(runs.size(), [&](std::size_t r) {
        auto [first, len] = runs[r];
        if (len == n) {
            comps[r] = Arc(0.0, 1.0);
            return;
        }
        std::size_t last = first + len - 1;
        double x_first = (first + 0.5) * h, x_last = (last + 0.5) * h;
        std::size_t before = (first + n - 1) % n, after = (last + 1) % n;
        double left = st[before] == STildeStatus::ExceedsThreshold
                          ? bisect_boundary(sys, x_first, x_first - h, gamma, opt, cs.boundary_refined_to)
                          : x_first - 0.5 * h;
        double right = st[after] == STildeStatus::ExceedsThreshold
                           ? bisect_boundary(sys, x_last, x_last + h, gamma, opt, cs.boundary_refined_to)
                           : x_last + 0.5 * h;
        comps[r] = Arc(left, right - left);
    });
    cs.components = std::move(comps);
    return cs;
}

FirstReturnSearch find_first_returns(const GroupSystem& sys, const Arc& I, Letter gamma, int max_len, double tol) {
    if (max_len < 1) throw InvalidArgument("max_len must be at least 1");
    FirstReturnSearch out;
    ArcSet images;
    images.try_insert(I, tol);
    struct Item {
        ReducedWord w;
        Arc img;
    };
    std::vector<Item> frontier;
    for (const Letter& l : sys.letters())
        if (!(l == gamma.inverse())) frontier.push_back({ReducedWord({l}), diffeo_image(sys.map(l), I)});
    for (int len = 1; len <= max_len && !frontier.empty(); ++len) {
        std::vector<Item> next;
        for (auto& it : frontier) {
            if (arc_overlap(it.img, I) > tol) {
                if (!arc_contains_arc(I, it.img, tol)) out.returns_inside = false;
                if (!(it.w.last() == gamma)) out.returns_end_with_gamma = false;
                out.returns.push_back(it.w);
                continue;
            }
            if (images.try_insert(it.img, tol)) ++out.overlaps;
            out.admissible.push_back(it.w);
            if (len == max_len) continue;
            for (const Letter& l : sys.letters()) {
                if (l == it.w.last().inverse()) continue;
                ReducedWord w = it.w;
                w.append(l);
                next.push_back({std::move(w), diffeo_image(sys.map(l), it.img)});
            }
        }
        frontier = std::move(next);
    }
    return out;
}

namespace {

struct Snap {
    CirclePoint point;
    double distance = 2.0;
};

// Fixed point of w nearest to p within radius, if any.
std::optional<Snap> snap_fixed_point(const GroupSystem& sys, const ReducedWord& w, CirclePoint p, double radius) {
    std::optional<Snap> best;
    if (sys.all_mobius()) {
        std::vector<FixedPoint> fps;
        try {
            fps = fixed_points(word_matrix(sys, w));
        } catch (const IdentityInput&) {
            return std::nullopt;
        } catch (const DetMinusOne&) {
            return std::nullopt;
        }
        for (const auto& f : fps) {
            double d = circle_distance(f.point, p);
            if (d <= radius && (!best || d < best->distance)) best = Snap{f.point, d};
        }
        return best;
    }
    // Generic maps: minimise |g(q) - q| on a fine grid, then locally.
    auto disp = [&](double q) { return std::abs(signed_displacement(CirclePoint(q), apply_word(sys, w, CirclePoint(q)))); };
    const int samples = 400;
    double bq = p.x, bv = disp(p.x);
    for (int i = 0; i <= samples; ++i) {
        double q = p.x - radius + 2 * radius * i / samples;
        double v = disp(q);
        if (v < bv) bv = v, bq = q;
    }
    double lo = bq - 2 * radius / samples, hi = bq + 2 * radius / samples;
    for (int it = 0; it < 100; ++it) {
        double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
        if (disp(m1) < disp(m2))
            hi = m2;
        else
            lo = m1;
    }
    CirclePoint fp(0.5 * (lo + hi));
    return Snap{fp, circle_distance(fp, p)};
}

bool fixed_point_free_interior(const GroupSystem& sys, const ReducedWord& w, const Arc& I) {
    int sign = 0;
    for (int i = 1; i <= 1000; ++i) {
        CirclePoint q = I.at(i / 1001.0);
        double d = signed_displacement(q, apply_word(sys, w, q));
        if (d == 0.0) return false;
        int s = d > 0 ? 1 : -1;
        if (sign != 0 && s != sign) return false;
        sign = s;
    }
    return true;
}

}  // namespace

FirstReturnPair endpoint_fixers(const GroupSystem& sys, const Arc& I, Letter gamma,
                                const std::vector<ReducedWord>& returns, double snap_radius, double fix_tol) {
    if (returns.empty()) throw NoEndpointFixer("no first-returns to choose from");
    struct Choice {
        ReducedWord w;
        Snap s;
    };
    std::optional<Choice> plus, minus;
    auto better = [](const std::optional<Choice>& cur, const ReducedWord& w, const Snap& s) {
        if (!cur) return true;
        if (s.distance != cur->s.distance) return s.distance < cur->s.distance;
        return shortlex_less(w, cur->w);
    };
    for (const auto& r : returns) {
        if (auto s = snap_fixed_point(sys, r, I.end(), snap_radius); s && better(plus, r, *s)) plus = Choice{r, *s};
        if (auto s = snap_fixed_point(sys, r, I.start, snap_radius); s && better(minus, r, *s)) minus = Choice{r, *s};
    }
    auto verify = [&](const std::optional<Choice>& c, const char* side) {
        if (!c) throw NoEndpointFixer(std::string("no first-return fixes the ") + side + " endpoint");
        double disp = circle_distance(c->s.point, apply_word(sys, c->w, c->s.point));
        if (disp > fix_tol)
            throw NoEndpointFixer(std::string(side) + " endpoint fixer " + c->w.to_string() + " moves it by " +
                                  std::to_string(disp));
    };
    verify(plus, "right");
    verify(minus, "left");
    if (plus->w == minus->w)
        throw WanderingConfiguration("the same first-return " + plus->w.to_string() +
                                     " fixes both endpoints; its fundamental domains would be wandering");
    FirstReturnPair fr;
    fr.letter = gamma;
    double len = forward_distance(minus->s.point, plus->s.point);
    fr.interval = Arc(minus->s.point, len == 0.0 ? 1.0 : len);
    fr.g_plus = plus->w;
    fr.g_minus = minus->w;
    fr.deriv_plus = word_derivative(sys, fr.g_plus, plus->s.point);
    fr.deriv_minus = word_derivative(sys, fr.g_minus, minus->s.point);
    fr.interior_fixed_point_free =
        fixed_point_free_interior(sys, fr.g_plus, fr.interval) && fixed_point_free_interior(sys, fr.g_minus, fr.interval);
    return fr;
}

FirstReturnPair component_returns(const GroupSystem& sys, const Arc& I, Letter gamma, double snap_radius, int max_len) {
    for (int len = max_len;; len *= 2) {
        auto search = find_first_returns(sys, I, gamma, len, snap_radius);
        try {
            return endpoint_fixers(sys, I, gamma, search.returns, snap_radius);
        } catch (const NoEndpointFixer&) {
            if (2 * len > 16) throw;
        }
    }
}

PhiCycles phi_cycles(const GroupSystem& sys, const std::vector<FirstReturnPair>& pairs, double tol) {
    const int n = static_cast<int>(pairs.size());
    PhiCycles out;
    auto rotate = [](const ReducedWord& w) {
        std::vector<Letter> ls(w.letters().begin() + 1, w.letters().end());
        ls.push_back(w.first());
        return ReducedWord::reduce(ls);
    };
    auto build = [&](bool right) {
        std::vector<int> phi(n, -1);
        for (int i = 0; i < n; ++i) {
            const auto& p = pairs[i];
            const ReducedWord& g = right ? p.g_plus : p.g_minus;
            Letter first = g.first();
            CirclePoint end = right ? p.interval.end() : p.interval.start;
            CirclePoint img = eval(sys.map(first), end);
            for (int k = 0; k < n; ++k) {
                if (!(pairs[k].letter == first)) continue;
                CirclePoint kend = right ? pairs[k].interval.end() : pairs[k].interval.start;
                if (circle_distance(kend, img) <= tol) phi[i] = k;
            }
            if (phi[i] < 0)
                throw CycleInconsistency(std::string("no component of the ") + first.to_char() +
                                         " set shares the endpoint image of component " + std::to_string(i));
            const ReducedWord& gk = right ? pairs[phi[i]].g_plus : pairs[phi[i]].g_minus;
            if (!(gk == rotate(g)))
                throw CycleInconsistency("return of component " + std::to_string(phi[i]) + " is " + gk.to_string() +
                                         ", expected the conjugate " + rotate(g).to_string());
        }
        std::vector<Cycle> cycles;
        std::vector<bool> seen(n, false);
        for (int i = 0; i < n; ++i) {
            if (seen[i]) continue;
            Cycle c;
            std::vector<Letter> letters;
            int k = i;
            while (!seen[k]) {
                seen[k] = true;
                c.components.push_back(k);
                letters.push_back((right ? pairs[k].g_plus : pairs[k].g_minus).first());
                k = phi[k];
            }
            if (k != i) throw CycleInconsistency("component map is not a permutation");
            c.word = ReducedWord::reduce(letters);
            const ReducedWord& g = right ? pairs[i].g_plus : pairs[i].g_minus;
            if (!(c.word == g))
                throw CycleInconsistency("cycle word " + c.word.to_string() + " differs from " + g.to_string());
            cycles.push_back(std::move(c));
        }
        (right ? out.phi_right : out.phi_left) = phi;
        (right ? out.right : out.left) = std::move(cycles);
    };
    build(true);
    build(false);
    return out;
}

namespace {

struct ExitData {
    CirclePoint a_minus, a_plus;
    MobiusTransform gm, gp, gm_inv, gp_inv;
    CirclePoint q1, q2, q3, q4;
    double len;
    // Positions measured from a_minus along the interval.
    double pos(CirclePoint z) const { return forward_distance(a_minus, z); }
};

std::vector<ExitData> exit_data(const MarkovSystem& ms) {
    std::vector<ExitData> out;
    for (std::size_t i = 0; i < ms.intervals.size(); ++i) {
        const auto& fr = ms.returns[i];
        ExitData e;
        e.a_minus = ms.intervals[i].arc.start;
        e.a_plus = ms.intervals[i].arc.end();
        e.len = ms.intervals[i].arc.length;
        e.gm = word_matrix(ms.sys, fr.g_minus);
        e.gp = word_matrix(ms.sys, fr.g_plus);
        e.gm_inv = e.gm.inverse();
        e.gp_inv = e.gp.inverse();
        e.q2 = e.gm.eval(e.a_plus);
        e.q1 = e.gm.eval(e.q2);
        e.q3 = e.gp.eval(e.a_minus);
        e.q4 = e.gp.eval(e.q3);
        out.push_back(e);
    }
    return out;
}

// Calls fn(piece_arc, map_on_piece) for the first-exit pieces inside a
// partition piece, i.e. preimages under phi of the fundamental pieces.
template <class Fn>
void for_exit_pieces(const ExitData& e, const MobiusTransform& phi, int max_iter, Fn&& fn) {
    MobiusTransform phi_inv = phi.inverse();
    auto pull = [&](CirclePoint lo, CirclePoint hi) {
        CirclePoint a = phi_inv.eval(lo), b = phi_inv.eval(hi);
        double len = forward_distance(a, b);
        return Arc(a, len > 0 ? len : 1e-300);
    };
    fn(pull(e.q2, e.q3), phi);
    // Left side: (g_-^{i+2}(a+), g_-^{i+1}(a+)) is sent onto (q1, q2) by g_-^{-i}.
    CirclePoint lo = e.q1, hi = e.q2;
    MobiusTransform back = MobiusTransform::identity();
    for (int i = 0; i < max_iter; ++i) {
        Arc piece = pull(lo, hi);
        if (!fn(piece, compose(back, phi))) break;
        hi = lo;
        lo = e.gm.eval(lo);
        back = compose(back, e.gm_inv);
    }
    lo = e.q3;
    hi = e.q4;
    back = MobiusTransform::identity();
    for (int i = 0; i < max_iter; ++i) {
        Arc piece = pull(lo, hi);
        if (!fn(piece, compose(back, phi))) break;
        lo = hi;
        hi = e.gp.eval(hi);
        back = compose(back, e.gp_inv);
    }
}

struct ExitStats {
    double max_diameter = 0.0;
    double kappa_max = 0.0;
};

ExitStats exit_stats(const MarkovSystem& ms, const RefinedPartition& part, int max_iter) {
    auto data = exit_data(ms);
    std::vector<ExitStats> per(part.intervals.size());
    parallel_for(part.intervals.size(), [&](std::size_t k) {
        const auto& p = part.intervals[k];
        MobiusTransform phi = word_matrix(ms.sys, p.word);
        ExitStats st;
        for_exit_pieces(data[p.target], phi, max_iter, [&](const Arc& piece, const MobiusTransform& m) {
            st.max_diameter = std::max(st.max_diameter, piece.length);
            if (piece.length > 1e-13) st.kappa_max = std::max(st.kappa_max, kappa_exact(m, piece).value);
            return piece.length > 1e-13;
        });
        per[k] = st;
    });
    ExitStats total;
    for (auto& s : per) {
        total.max_diameter = std::max(total.max_diameter, s.max_diameter);
        total.kappa_max = std::max(total.kappa_max, s.kappa_max);
    }
    return total;
}

constexpr int kExitIterations = 400;

}  // namespace

MarkovSystem build_markov(const GroupSystem& sys, const std::vector<FirstReturnPair>& pairs, const MarkovOptions& opt) {
    if (pairs.empty()) throw CoverGap("no bounded components: nothing to partition");
    if (!sys.all_mobius()) throw InvalidArgument("Markov assembly requires Möbius generators");
    MarkovSystem ms;
    ms.sys = sys;
    ms.lambda_restricted = opt.lambda_restricted;
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pairs[a].interval.start.x < pairs[b].interval.start.x; });
    for (std::size_t i : order) {
        ms.intervals.push_back({pairs[i].interval, pairs[i].letter});
        ms.returns.push_back(pairs[i]);
    }
    const std::size_t m = ms.intervals.size();
    for (std::size_t i = 0; i < m; ++i) {
        const Arc& cur = ms.intervals[i].arc;
        const Arc& nxt = ms.intervals[(i + 1) % m].arc;
        double gap = forward_distance(cur.end(), nxt.start);
        if (gap > 0.5) gap -= 1.0;
        if (!opt.lambda_restricted && std::abs(gap) > opt.tol)
            throw CoverGap("components leave a gap of " + std::to_string(gap) + " after interval " + std::to_string(i));
        if (gap < -opt.tol) throw CoverGap("components overlap after interval " + std::to_string(i));
    }
    auto add_endpoint = [&](CirclePoint p) {
        for (auto& q : ms.endpoints)
            if (circle_distance(p, q) <= opt.tol) return;
        ms.endpoints.push_back(p);
    };
    for (auto& iv : ms.intervals) {
        add_endpoint(iv.arc.start);
        add_endpoint(iv.arc.end());
    }
    std::sort(ms.endpoints.begin(), ms.endpoints.end(), [](CirclePoint a, CirclePoint b) { return a.x < b.x; });
    auto in_n = [&](CirclePoint p) {
        for (auto& q : ms.endpoints)
            if (circle_distance(p, q) <= opt.tol) return true;
        return false;
    };
    ms.transition.assign(m, std::vector<bool>(m, false));
    for (std::size_t i = 0; i < m; ++i) {
        Arc img = diffeo_image(sys.map(ms.intervals[i].letter.inverse()), ms.intervals[i].arc);
        if (!in_n(img.start) || !in_n(img.end()))
            throw CoverGap("image of interval " + std::to_string(i) + " does not end on partition endpoints");
        double covered = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const Arc& J = ms.intervals[j].arc;
            if (arc_contains_arc(img, J, opt.tol)) {
                ms.transition[i][j] = true;
                covered += J.length;
            } else if (arc_overlap(img, J) > opt.tol) {
                throw CoverGap("image of interval " + std::to_string(i) + " cuts interval " + std::to_string(j));
            }
        }
        if (!opt.lambda_restricted && std::abs(covered - img.length) > 1e3 * opt.tol)
            throw CoverGap("image of interval " + std::to_string(i) + " is not a union of intervals");
    }
    auto data = exit_data(ms);
    double min_q = 1.0;
    for (const auto& e : data) {
        for (auto [a, b] : {std::pair{e.q1, e.q2}, std::pair{e.q2, e.q3}, std::pair{e.q3, e.q4}}) {
            Arc q = arc_between(a, b);
            ms.q_family.push_back(q);
            min_q = std::min(min_q, q.length);
        }
    }
    ms.c5_levels = opt.c5_levels;
    ms.c5 = 0.0;
    for (int j = 1; j <= opt.c5_levels; ++j) ms.c5 = std::max(ms.c5, first_exit_kappa(ms, j));
    ms.epsilon0 = 0.5 * min_q * std::exp(-ms.c5);
    return ms;
}

RefinedPartition refine_partition(const MarkovSystem& ms, int j) {
    if (j < 0) throw InvalidArgument("level must be nonnegative");
    RefinedPartition part;
    part.level = j;
    for (std::size_t i = 0; i < ms.intervals.size(); ++i)
        part.intervals.push_back({ms.intervals[i].arc, static_cast<int>(i), ReducedWord()});
    for (int level = 0; level < j; ++level) {
        std::vector<PartitionPiece> next;
        for (const auto& p : part.intervals) {
            Letter r = ms.intervals[p.target].letter.inverse();
            for (std::size_t k = 0; k < ms.intervals.size(); ++k) {
                if (!ms.transition[p.target][k]) continue;
                PartitionPiece c;
                c.target = static_cast<int>(k);
                c.word = p.word;
                c.word.append(r);
                c.arc = word_image(ms.sys, c.word.inverse(), ms.intervals[k].arc);
                next.push_back(std::move(c));
            }
        }
        part.intervals = std::move(next);
    }
    std::sort(part.intervals.begin(), part.intervals.end(),
              [](const PartitionPiece& a, const PartitionPiece& b) { return a.arc.start.x < b.arc.start.x; });
    for (const auto& p : part.intervals) {
        part.max_diameter = std::max(part.max_diameter, p.arc.length);
        part.indeterminacy.push_back(p.arc.start);
    }
    return part;
}

double first_exit_kappa(const MarkovSystem& ms, int j) {
    return exit_stats(ms, refine_partition(ms, j), kExitIterations).kappa_max;
}

FirstExitReport first_exit_expansion(const MarkovSystem& ms, int j, int grid) {
    if (j < 1) throw InvalidArgument("level must be at least 1");
    if (grid < 1) throw InvalidArgument("grid must be positive");
    FirstExitReport rep;
    rep.j = j;
    auto part = refine_partition(ms, j);
    auto stats = exit_stats(ms, part, kExitIterations);
    rep.max_diameter = stats.max_diameter;
    rep.kappa_max = stats.kappa_max;
    auto data = exit_data(ms);
    std::vector<MobiusTransform> phis(part.intervals.size());
    for (std::size_t k = 0; k < phis.size(); ++k) phis[k] = word_matrix(ms.sys, part.intervals[k].word);
    std::vector<double> starts;
    for (const auto& p : part.intervals) starts.push_back(p.arc.start.x);
    auto locate = [&](CirclePoint y) -> std::optional<std::size_t> {
        auto it = std::upper_bound(starts.begin(), starts.end(), y.x);
        std::size_t k = it == starts.begin() ? starts.size() - 1 : static_cast<std::size_t>(it - starts.begin()) - 1;
        for (std::size_t cand : {k, (k + starts.size() - 1) % starts.size()})
            if (arc_contains(part.intervals[cand].arc, y, 0.0) && !(part.intervals[cand].arc.start == y)) return cand;
        return std::nullopt;
    };
    // On limit-set restricted systems the pieces are sparse; sample inside each.
    std::vector<CirclePoint> samples;
    if (ms.lambda_restricted) {
        std::size_t per = std::max<std::size_t>(1, static_cast<std::size_t>(grid) / part.intervals.size());
        for (const auto& p : part.intervals)
            for (std::size_t s = 0; s < per; ++s) samples.push_back(p.arc.at((s + 0.5) / per));
    } else {
        for (int g = 0; g < grid; ++g) samples.emplace_back((g + 0.5) / grid);
    }
    std::vector<double> mins(samples.size(), INFINITY);
    std::vector<int> perturbed(samples.size(), 0);
    parallel_for(samples.size(), [&](std::size_t g) {
        CirclePoint y = samples[g];
        std::optional<std::size_t> k;
        for (int attempt = 0; attempt < 8; ++attempt) {
            bool near_end = false;
            for (auto& p : part.indeterminacy)
                if (circle_distance(p, y) <= 1e-12) near_end = true;
            k = near_end ? std::nullopt : locate(y);
            if (k || !near_end) break;
            perturbed[g] = 1;
            y = CirclePoint(y.x + 1e-9 * (attempt + 1));
        }
        if (!k) {
            if (perturbed[g]) throw GridHitsIndeterminacy("grid point stays on the indeterminacy set");
            return;  // outside the partition (limit-set restricted systems)
        }
        const auto& e = data[part.intervals[*k].target];
        CirclePoint z = phis[*k].eval(y);
        double d = phis[*k].derivative(y);
        for (int it = 0; it < 1000000 && e.pos(z) < e.pos(e.q1); ++it) {
            d *= e.gm_inv.derivative(z);
            z = e.gm_inv.eval(z);
        }
        for (int it = 0; it < 1000000 && e.pos(z) > e.pos(e.q4); ++it) {
            d *= e.gp_inv.derivative(z);
            z = e.gp_inv.eval(z);
        }
        mins[g] = d;
    });
    rep.min_derivative = *std::min_element(mins.begin(), mins.end());
    for (int p : perturbed) rep.grid_perturbations += p;
    rep.certified = rep.min_derivative > 1.0 && rep.max_diameter < ms.epsilon0;
    return rep;
}

HatEndpoints hat_endpoints(const Arc& I, const CantorCover& cover) {
    auto gaps = cover.gaps();
    auto gap_of = [&](CirclePoint p) -> std::optional<Arc> {
        auto idx = cover.containing(p);
        if (!idx) {
            for (const Arc& g : gaps)
                if (arc_contains(g, p)) return g;
            return std::nullopt;
        }
        const Arc& a = cover.arcs[*idx].arc;
        double rel = forward_distance(a.start, p) / a.length;
        for (const Arc& g : gaps) {
            bool after = circle_distance(g.start, a.end()) <= kEndpointTol;
            bool before = circle_distance(g.end(), a.start) <= kEndpointTol;
            // A gap much longer than the arc holding p persists in the limit,
            // so p sits at its end rather than being accumulated from both sides.
            if (g.length < 10 * a.length) continue;
            if (after && rel >= 0.5) return g;
            if (before && rel < 0.5) return g;
        }
        return std::nullopt;
    };
    HatEndpoints h;
    h.plus = h.plus_star = I.end();
    h.minus = h.minus_star = I.start;
    if (auto g = gap_of(I.end())) {
        h.plus = g->start;
        h.plus_star = g->end();
    }
    if (auto g = gap_of(I.start)) {
        h.minus = g->end();
        h.minus_star = g->start;
    }
    return h;
}

std::string markov_to_json(const MarkovSystem& ms) {
    nlohmann::ordered_json j;
    j["group"] = ms.sys.label;
    j["lambda_restricted"] = ms.lambda_restricted;
    auto& iv = j["intervals"] = nlohmann::ordered_json::array();
    for (const auto& i : ms.intervals)
        iv.push_back({{"start", i.arc.start.x}, {"length", i.arc.length}, {"letter", std::string(1, i.letter.to_char())}});
    auto& ep = j["endpoints"] = nlohmann::ordered_json::array();
    for (auto p : ms.endpoints) ep.push_back(p.x);
    auto& tr = j["transition"] = nlohmann::ordered_json::array();
    for (const auto& row : ms.transition) {
        nlohmann::ordered_json r = nlohmann::ordered_json::array();
        for (bool b : row) r.push_back(b ? 1 : 0);
        tr.push_back(r);
    }
    auto& rs = j["returns"] = nlohmann::ordered_json::array();
    for (const auto& r : ms.returns)
        rs.push_back({{"g_minus", r.g_minus.to_string()},
                      {"g_plus", r.g_plus.to_string()},
                      {"deriv_minus", r.deriv_minus},
                      {"deriv_plus", r.deriv_plus},
                      {"interior_fixed_point_free", r.interior_fixed_point_free}});
    auto& q = j["q_family"] = nlohmann::ordered_json::array();
    for (const auto& a : ms.q_family) q.push_back({{"start", a.start.x}, {"length", a.length}});
    j["c5"] = ms.c5;
    j["c5_levels"] = ms.c5_levels;
    j["epsilon0"] = ms.epsilon0;
    return j.dump(2) + "\n";
}

}  // namespace circledyn
