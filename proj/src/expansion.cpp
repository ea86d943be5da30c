#include "circledyn/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "circledyn/distortion.hpp"
#include "circledyn/errors.hpp"
#include "circledyn/parallel.hpp"

namespace circledyn {

namespace {

// Letters sorted by their text character, so appending in this order keeps
// equal-length words in shortlex order.
std::vector<Letter> text_order_letters(int rank) {
    std::vector<Letter> out;
    for (int g = 0; g < rank; ++g) out.push_back({static_cast<std::uint8_t>(g), true});
    for (int g = 0; g < rank; ++g) out.push_back({static_cast<std::uint8_t>(g), false});
    return out;
}

bool better(double d, const std::vector<Letter>& path, double best, const ReducedWord& best_word) {
    if (d != best) return d > best;
    ReducedWord w(path);
    return shortlex_less(w, best_word);
}

using MatrixKey = std::array<std::int64_t, 4>;

struct MatrixKeyHash {
    std::size_t operator()(const MatrixKey& k) const noexcept {
        std::size_t h = 1469598103934665603ull;
        for (auto v : k) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ull;
        return h;
    }
};

MatrixKey matrix_key(const MobiusTransform& m) {
    double e[4] = {m.a(), m.b(), m.c(), m.d()};
    double mx = 0;
    for (double v : e) mx = std::max(mx, std::abs(v));
    double sign = 1.0;
    for (double v : e)
        if (std::abs(v) > 1e-6 * mx) {
            sign = v < 0 ? -1.0 : 1.0;
            break;
        }
    double scale = mx > 1.0 ? 1e9 / mx : 1e9;
    MatrixKey k;
    for (int i = 0; i < 4; ++i) k[i] = std::llround(sign * e[i] * scale);
    return k;
}

struct LevelStats {
    std::vector<double> sum, maxd;
    std::vector<ReducedWord> arg;
    explicit LevelStats(int n) : sum(n + 1, 0.0), maxd(n + 1, -1.0), arg(n + 1) {}
};

void walk(const GroupSystem& sys, const std::vector<Letter>& order, CirclePoint p, double d,
          std::vector<Letter>& path, int n_max, LevelStats& st) {
    int depth = static_cast<int>(path.size());
    st.sum[depth] += d;
    if (better(d, path, st.maxd[depth], st.arg[depth])) {
        st.maxd[depth] = d;
        st.arg[depth] = ReducedWord(path);
    }
    if (depth == n_max) return;
    for (const Letter& l : order) {
        if (!path.empty() && l == path.back().inverse()) continue;
        const CircleDiffeo& g = sys.map(l);
        path.push_back(l);
        walk(sys, order, eval(g, p), d * derivative(g, p), path, n_max, st);
        path.pop_back();
    }
}

BallSumSeries series_from_levels(CirclePoint x, const std::vector<double>& level_sum,
                                 const std::vector<double>& level_max, const std::vector<ReducedWord>& level_arg) {
    BallSumSeries out;
    out.x = x;
    double s = 0, best = -1;
    ReducedWord arg;
    for (std::size_t n = 0; n < level_sum.size(); ++n) {
        s += level_sum[n];
        if (level_max[n] > best || (level_max[n] == best && shortlex_less(level_arg[n], arg))) {
            best = level_max[n];
            arg = level_arg[n];
        }
        out.entries.push_back({static_cast<int>(n), s, best, arg});
    }
    return out;
}

// Points strictly inside the circle used to tell identity maps apart.
constexpr double kProbe[4] = {0.1234567, 0.3456789, 0.6172839, 0.8641975};

bool acts_as_identity(const GroupSystem& sys, const ReducedWord& w) {
    for (double p : kProbe)
        if (circle_distance(CirclePoint(p), apply_word(sys, w, CirclePoint(p))) > 1e-12) return false;
    return true;
}

}  // namespace

BallSumSeries ball_sum(const GroupSystem& sys, CirclePoint x, int n_max, std::uint64_t budget) {
    if (n_max < 0) throw InvalidArgument("n_max must be nonnegative");
    if (!sys.free) {
        auto spheres = element_spheres(sys, n_max, budget);
        std::vector<double> ls, lm;
        std::vector<ReducedWord> la;
        for (const auto& sphere : spheres) {
            double s = 0, best = -1;
            ReducedWord arg;
            for (const auto& e : sphere) {
                double d = e.matrix.derivative(x);
                s += d;
                if (d > best) {
                    best = d;
                    arg = e.word;
                }
            }
            ls.push_back(s);
            lm.push_back(best);
            la.push_back(arg);
        }
        return series_from_levels(x, ls, lm, la);
    }
    if (ball_size(sys.rank(), n_max) > budget)
        throw BudgetExceeded("ball of radius " + std::to_string(n_max) + " exceeds node budget");
    auto order = text_order_letters(sys.rank());
    std::vector<LevelStats> parts(order.size(), LevelStats(n_max));
    if (n_max > 0) {
        parallel_for(order.size(), [&](std::size_t i) {
            std::vector<Letter> path{order[i]};
            const CircleDiffeo& g = sys.map(order[i]);
            walk(sys, order, eval(g, x), derivative(g, x), path, n_max, parts[i]);
        });
    }
    std::vector<double> ls(n_max + 1, 0.0), lm(n_max + 1, -1.0);
    std::vector<ReducedWord> la(n_max + 1);
    ls[0] = 1.0;
    lm[0] = 1.0;
    for (int n = 1; n <= n_max; ++n)
        for (const auto& part : parts) {
            ls[n] += part.sum[n];
            if (part.maxd[n] > lm[n] || (part.maxd[n] == lm[n] && shortlex_less(part.arg[n], la[n]))) {
                lm[n] = part.maxd[n];
                la[n] = part.arg[n];
            }
        }
    return series_from_levels(x, ls, lm, la);
}

std::vector<std::pair<int, double>> lyapunov_estimate(const GroupSystem& sys, CirclePoint x, int n_max,
                                                      std::uint64_t budget) {
    if (n_max < 1) throw InvalidArgument("n_max must be at least 1");
    auto series = ball_sum(sys, x, n_max, budget);
    std::vector<std::pair<int, double>> out;
    for (int n = 1; n <= n_max; ++n) out.emplace_back(n, std::log(series.entries[n].max_derivative) / n);
    return out;
}

double log_sum_slope(const BallSumSeries& series, int n_lo, int n_hi) {
    if (n_lo < 0 || n_hi <= n_lo || n_hi >= static_cast<int>(series.entries.size()))
        throw InvalidArgument("fit range outside the series");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = n_hi - n_lo + 1;
    for (int n = n_lo; n <= n_hi; ++n) {
        double y = std::log(series.entries[n].sum);
        sx += n;
        sy += y;
        sxx += double(n) * n;
        sxy += n * y;
    }
    return (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
}

std::vector<std::vector<BallElement>> element_spheres(const GroupSystem& sys, int n, std::uint64_t budget) {
    if (!sys.all_mobius()) throw InvalidArgument("element enumeration requires Möbius generators");
    auto order = text_order_letters(sys.rank());
    std::vector<MobiusTransform> letter_maps;
    for (const Letter& l : order) letter_maps.push_back(std::get<MobiusTransform>(sys.map(l)));
    std::unordered_map<MatrixKey, char, MatrixKeyHash> seen;
    std::vector<std::vector<BallElement>> spheres(1);
    spheres[0].push_back({MobiusTransform::identity(), ReducedWord()});
    seen.emplace(matrix_key(MobiusTransform::identity()), 0);
    std::uint64_t total = 1;
    for (int level = 1; level <= n; ++level) {
        std::vector<BallElement> next;
        for (const auto& e : spheres[level - 1]) {
            for (std::size_t i = 0; i < order.size(); ++i) {
                if (!e.word.empty() && order[i] == e.word.last().inverse()) continue;
                MobiusTransform m = compose(letter_maps[i], e.matrix);
                if (!seen.emplace(matrix_key(m), 0).second) continue;
                ReducedWord w = e.word;
                w.append(order[i]);
                next.push_back({m, std::move(w)});
                if (++total > budget)
                    throw BudgetExceeded("element ball exceeds node budget at radius " + std::to_string(level));
            }
        }
        spheres.push_back(std::move(next));
    }
    return spheres;
}

std::vector<MaxEntryRecord> max_entry_series(const GroupSystem& sys, int n_max, std::uint64_t budget) {
    auto spheres = element_spheres(sys, n_max, budget);
    std::vector<MaxEntryRecord> out;
    double best = 0;
    ReducedWord arg;
    for (int n = 0; n <= n_max; ++n) {
        for (const auto& e : spheres[n]) {
            double v = std::max({std::abs(e.matrix.a()), std::abs(e.matrix.b()), std::abs(e.matrix.c()),
                                 std::abs(e.matrix.d())});
            if (v > best) {
                best = v;
                arg = e.word;
            }
        }
        if (n >= 1) out.push_back({n, best, arg});
    }
    return out;
}

std::vector<NEReport> ne_scan(const GroupSystem& sys, const std::vector<CirclePoint>& points, int depth,
                              double tol) {
    if (depth < 1) throw InvalidArgument("depth must be at least 1");
    auto order = text_order_letters(sys.rank());
    std::vector<NEReport> out(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        NEReport rep;
        rep.x = points[i];
        rep.depth = depth;
        std::vector<Letter> path;
        bool done = false;
        auto rec = [&](auto&& self, CirclePoint p, double d) -> void {
            if (done) return;
            if (d > rep.max_derivative) {
                rep.max_derivative = d;
                rep.witness = ReducedWord(path);
                if (d > 1.0 + tol) {
                    done = true;
                    return;
                }
            }
            if (static_cast<int>(path.size()) == depth) return;
            for (const Letter& l : order) {
                if (!path.empty() && l == path.back().inverse()) continue;
                const CircleDiffeo& g = sys.map(l);
                path.push_back(l);
                self(self, eval(g, p), d * derivative(g, p));
                path.pop_back();
                if (done) return;
            }
        };
        rec(rec, rep.x, 1.0);
        rep.verdict = rep.max_derivative > 1.0 + tol ? NEVerdict::Expandable : NEVerdict::NECandidate;
        out[i] = std::move(rep);
    });
    return out;
}

FixerReport find_fixers(const GroupSystem& sys, CirclePoint x, int depth, double fix_tol, std::size_t max_report) {
    if (depth < 1) throw InvalidArgument("depth must be at least 1");
    FixerReport rep;
    rep.x = x;
    auto order = text_order_letters(sys.rank());
    bool mobius = sys.all_mobius();
    std::vector<Letter> path;
    auto rec = [&](auto&& self, CirclePoint p, double d, const MobiusTransform& m) -> void {
        if (!path.empty() && circle_distance(p, x) <= fix_tol) {
            ReducedWord w(path);
            bool identity = mobius ? m.is_identity(1e-9) : acts_as_identity(sys, w);
            if (!identity) {
                ++rep.fixer_count;
                if (rep.fixers.size() < max_report) {
                    Fixer f{w, circle_distance(p, x), d, false};
                    if (std::abs(d - 1.0) <= 1e-6) {
                        double lo = signed_displacement(CirclePoint(x.x - 1e-6),
                                                        apply_word(sys, w, CirclePoint(x.x - 1e-6)));
                        double hi = signed_displacement(CirclePoint(x.x + 1e-6),
                                                        apply_word(sys, w, CirclePoint(x.x + 1e-6)));
                        f.parabolic_like = std::abs(lo) > 1e-15 && std::abs(hi) > 1e-15;
                    }
                    if (f.parabolic_like) rep.star_satisfied_to_depth = depth;
                    rep.fixers.push_back(std::move(f));
                }
            }
        }
        if (static_cast<int>(path.size()) == depth) return;
        for (const Letter& l : order) {
            if (!path.empty() && l == path.back().inverse()) continue;
            const CircleDiffeo& g = sys.map(l);
            MobiusTransform next = mobius ? compose(std::get<MobiusTransform>(g), m) : m;
            path.push_back(l);
            self(self, eval(g, p), d * derivative(g, p), next);
            path.pop_back();
        }
    };
    rec(rec, x, 1.0, MobiusTransform::identity());
    return rep;
}

ClosestReturn closest_return(const GroupSystem& sys, CirclePoint x0, int n, Side side, double fix_tol) {
    if (n < 1) throw InvalidArgument("n must be at least 1");
    ClosestReturn best;
    best.x0 = x0;
    best.n = n;
    best.side = side;
    best.gap = 2.0;
    auto consider = [&](CirclePoint img, const ReducedWord& w) {
        double dist = side == Side::Right ? forward_distance(x0, img) : forward_distance(img, x0);
        if (dist <= fix_tol || dist >= 1.0 - fix_tol) return;
        bool tie = std::abs(dist - best.gap) <= 1e-15;
        if ((dist < best.gap && !tie) || (tie && shortlex_less(w, best.f_n))) {
            best.gap = dist;
            best.f_n = w;
            best.x_n = img;
        }
    };
    if (!sys.free && sys.all_mobius()) {
        auto spheres = element_spheres(sys, n);
        for (const auto& sphere : spheres)
            for (const auto& e : sphere) consider(e.matrix.eval(x0), e.word);
    } else {
        if (ball_size(sys.rank(), n) > kDefaultNodeBudget) throw BudgetExceeded("closest-return ball too large");
        auto order = text_order_letters(sys.rank());
        std::vector<Letter> path;
        auto rec = [&](auto&& self, CirclePoint p) -> void {
            if (!path.empty()) consider(p, ReducedWord(path));
            if (static_cast<int>(path.size()) == n) return;
            for (const Letter& l : order) {
                if (!path.empty() && l == path.back().inverse()) continue;
                path.push_back(l);
                self(self, eval(sys.map(l), p));
                path.pop_back();
            }
        };
        rec(rec, x0);
    }
    if (best.gap > 1.0) throw NoReturn("every image of x0 within radius " + std::to_string(n) + " coincides with x0");
    return best;
}

ReturnDeviation rescaled_return_deviation(const GroupSystem& sys, const ClosestReturn& cr, double radius,
                                          int grid) {
    if (radius <= 0) throw InvalidArgument("radius must be positive");
    if (grid < 2) throw InvalidArgument("grid must have at least two points");
    ReturnDeviation dev;
    int orient = 1;
    for (const Letter& l : cr.f_n.letters()) orient *= orientation(sys.map(l));
    for (int i = 0; i < grid; ++i) {
        double y = -1.0 + 2.0 * i / (grid - 1);
        CirclePoint p(cr.x0.x + radius * y);
        CirclePoint fp = apply_word(sys, cr.f_n, p);
        double ft = signed_displacement(cr.x0, fp) / radius;
        double dft = orient * word_derivative(sys, cr.f_n, p);
        dev.c0 = std::max(dev.c0, std::abs(ft - y));
        dev.c1 = std::max(dev.c1, std::abs(dft - 1.0));
    }
    return dev;
}

double cone_sum(const GroupSystem& sys, const ReducedWord& w, CirclePoint x) {
    double d = 1.0, s = 0.0;
    for (const Letter& l : w.letters()) {
        d *= derivative(sys.map(l), x);
        x = eval(sys.map(l), x);
        s += d;
    }
    return s;
}

ConeSearchResult find_cone_geodesic(const GroupSystem& sys, CirclePoint x, Letter gamma, double target,
                                    int max_depth, std::uint64_t node_budget) {
    if (target <= 0) throw InvalidArgument("target must be positive");
    if (max_depth < 1) throw InvalidArgument("max_depth must be at least 1");
    struct Node {
        int parent;
        Letter letter;
        int depth;
        CirclePoint p;
        double deriv, sum;
    };
    std::vector<Node> nodes;
    auto word_of = [&](int idx) {
        std::vector<Letter> ls;
        for (; idx >= 0; idx = nodes[idx].parent) ls.push_back(nodes[idx].letter);
        std::reverse(ls.begin(), ls.end());
        return ReducedWord(std::move(ls));
    };
    ConeSearchResult res;
    const CircleDiffeo& g0 = sys.map(gamma);
    double d0 = derivative(g0, x);
    nodes.push_back({-1, gamma, 1, eval(g0, x), d0, d0});
    res.best_sum = d0;
    int best_idx = 0;
    auto finish = [&](int idx, bool found) {
        res.nodes = nodes.size();
        res.best_word = word_of(best_idx);
        if (found) res.word = word_of(idx);
        return res;
    };
    if (d0 > target) return finish(0, true);
    auto order = text_order_letters(sys.rank());
    using Entry = std::pair<double, int>;
    auto cmp = [](const Entry& a, const Entry& b) { return a.first != b.first ? a.first < b.first : a.second > b.second; };
    std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> open(cmp);
    open.push({d0, 0});
    while (!open.empty()) {
        int idx = open.top().second;
        open.pop();
        if (nodes[idx].depth >= max_depth) continue;
        for (const Letter& l : order) {
            if (l == nodes[idx].letter.inverse()) continue;
            if (nodes.size() >= node_budget) return finish(-1, false);
            const Node& par = nodes[idx];
            const CircleDiffeo& g = sys.map(l);
            double d = par.deriv * derivative(g, par.p);
            Node child{idx, l, par.depth + 1, eval(g, par.p), d, par.sum + d};
            nodes.push_back(child);
            int ci = static_cast<int>(nodes.size()) - 1;
            if (child.sum > res.best_sum) {
                res.best_sum = child.sum;
                best_idx = ci;
            }
            if (child.sum > target) return finish(ci, true);
            open.push({child.sum, ci});
        }
    }
    return finish(-1, false);
}

namespace {

// Lower bound of the cone sum of w over the whole region.
double certified_cone_sum(const GroupSystem& sys, const ReducedWord& w, const Arc& region) {
    CirclePoint mid = region.midpoint();
    double d = 1.0, s = 0.0;
    CirclePoint p = mid;
    for (std::size_t j = 0; j < w.size(); ++j) {
        d *= derivative(sys.map(w[j]), p);
        p = eval(sys.map(w[j]), p);
        s += d * std::exp(-word_kappa(sys, w.prefix(j + 1), region).value);
    }
    return s;
}

void certify_region(const GroupSystem& sys, const Arc& region, Letter l, const FamilyOptions& opt, int splits,
                    ConeFamily& out) {
    auto res = find_cone_geodesic(sys, region.midpoint(), l, opt.target, opt.max_depth, opt.node_budget);
    if (!res.word) return;
    if (certified_cone_sum(sys, *res.word, region) > opt.target) {
        out.push_back({region, l, *res.word});
        return;
    }
    if (splits <= 0) return;
    double h = 0.5 * region.length;
    certify_region(sys, Arc(region.start, h), l, opt, splits - 1, out);
    certify_region(sys, Arc(region.start.x + h, h), l, opt, splits - 1, out);
}

}  // namespace

ConeFamily build_cone_family(const GroupSystem& sys, const std::vector<Arc>& domain, const FamilyOptions& opt) {
    if (opt.resolution <= 0) throw InvalidArgument("resolution must be positive");
    std::vector<Arc> base = domain.empty() ? std::vector<Arc>{Arc(0.0, 1.0)} : domain;
    std::vector<Arc> regions;
    for (const Arc& a : base) {
        int cnt = std::max(1, static_cast<int>(std::ceil(a.length / opt.resolution)));
        double len = a.length / cnt;
        for (int i = 0; i < cnt; ++i) regions.emplace_back(a.start.x + i * len, len);
    }
    auto letters = sys.letters();
    std::vector<ConeFamily> parts(regions.size());
    parallel_for(regions.size(), [&](std::size_t i) {
        for (const Letter& l : letters) certify_region(sys, regions[i], l, opt, opt.max_splits, parts[i]);
    });
    ConeFamily fam;
    for (auto& p : parts) fam.insert(fam.end(), p.begin(), p.end());
    return fam;
}

const FamilyMember* family_lookup(const GroupSystem& sys, const ConeFamily& fam, CirclePoint y, Letter gamma,
                                  double target) {
    for (const auto& m : fam) {
        if (!(m.letter == gamma) || !arc_contains(m.region, y, 1e-9)) continue;
        if (cone_sum(sys, m.word, y) > target) return &m;
    }
    return nullptr;
}

GrowingTree grow_tree(const GroupSystem& sys, CirclePoint x, const ConeFamily& fam, int m) {
    if (m < 0) throw InvalidArgument("level must be nonnegative");
    GrowingTree tree;
    tree.x = x;
    for (const auto& f : fam) tree.step_length = std::max(tree.step_length, static_cast<int>(f.word.size()));
    auto order = text_order_letters(sys.rank());
    // Any allowed letter works for the construction; one the family covers
    // at the member's image lets the next level continue.
    auto choose = [&](const ReducedWord& w, std::optional<Letter> ban1, std::optional<Letter> ban2) {
        CirclePoint y = apply_word(sys, w, x);
        std::optional<Letter> fallback;
        for (const Letter& l : order) {
            if ((ban1 && l == *ban1) || (ban2 && l == *ban2)) continue;
            if (!fallback) fallback = l;
            if (family_lookup(sys, fam, y, l)) return l;
        }
        return *fallback;
    };
    tree.members.push_back({ReducedWord(), choose(ReducedWord(), std::nullopt, std::nullopt)});
    for (int level = 1; level <= m; ++level) {
        std::vector<TreeMember> next;
        for (const auto& mem : tree.members) {
            CirclePoint y = apply_word(sys, mem.word, x);
            const FamilyMember* f = family_lookup(sys, fam, y, mem.direction);
            if (!f) {
                std::ostringstream msg;
                msg.precision(17);
                msg << "no family word at y=" << y.x << " in cone " << mem.direction.to_char() << " (level "
                    << level << ")";
                throw FamilyIncomplete(msg.str());
            }
            const auto& gb = f->word;
            std::vector<Letter> letters = mem.word.letters();
            for (std::size_t j = 0; j < gb.size(); ++j) {
                letters.push_back(gb[j]);
                ReducedWord w(letters);
                std::optional<Letter> ban2;
                if (j + 1 < gb.size()) ban2 = gb[j + 1];
                next.push_back({w, choose(w, gb[j].inverse(), ban2)});
            }
        }
        tree.members = std::move(next);
        tree.level = level;
    }
    tree.sum_at_x = 0.0;
    for (const auto& mem : tree.members) tree.sum_at_x += word_derivative(sys, mem.word, x);
    return tree;
}

TreeVerification verify_growing_tree(const GroupSystem& sys, const GrowingTree& tree) {
    TreeVerification v;
    std::ostringstream detail;
    std::size_t max_len = static_cast<std::size_t>(tree.level) * static_cast<std::size_t>(tree.step_length);
    // Tagged code sequences: members (tag 0) and cone roots g.gamma(g) (tag 1).
    std::vector<std::pair<std::vector<int>, int>> seqs;
    for (const auto& mem : tree.members) {
        std::vector<int> codes;
        for (const Letter& l : mem.word.letters()) codes.push_back(l.code());
        for (std::size_t i = 1; i < codes.size(); ++i)
            if (codes[i] == Letter::from_code(codes[i - 1]).inverse().code()) {
                v.membership = false;
                detail << "member " << mem.word.to_string() << " is not reduced; ";
            }
        if (codes.size() > max_len) {
            v.membership = false;
            detail << "member " << mem.word.to_string() << " longer than " << max_len << "; ";
        }
        seqs.push_back({codes, 0});
        if (!codes.empty() && Letter::from_code(codes.back()).inverse() == mem.direction) {
            v.disjoint_cones = false;
            detail << "direction of " << mem.word.to_string() << " cancels; ";
        }
        codes.push_back(mem.direction.code());
        seqs.push_back({codes, 1});
    }
    std::sort(seqs.begin(), seqs.end());
    for (std::size_t i = 0; i + 1 < seqs.size(); ++i) {
        const auto& a = seqs[i];
        const auto& b = seqs[i + 1];
        if (a.second == 0 && b.second == 0 && a.first == b.first) {
            v.membership = false;
            detail << "duplicate member; ";
        }
        if (a.second == 1 && a.first.size() <= b.first.size() &&
            std::equal(a.first.begin(), a.first.end(), b.first.begin())) {
            v.disjoint_cones = false;
            detail << "cone overlap at sorted position " << i << "; ";
        }
    }
    double s = 0.0;
    for (const auto& mem : tree.members) {
        CirclePoint p = tree.x;
        double d = 1.0;
        for (const Letter& l : mem.word.letters()) {
            d *= derivative(sys.map(l), p);
            p = eval(sys.map(l), p);
        }
        s += d;
    }
    v.sum = s;
    v.sum_ok = s >= std::ldexp(1.0, tree.level) * (1.0 - 1e-9);
    if (!v.sum_ok) detail << "sum " << s << " below 2^" << tree.level << "; ";
    v.detail = detail.str();
    return v;
}

std::vector<CascadeStep> commutator_cascade(const CircleDiffeo& f1, const CircleDiffeo& f2, int K, const Arc& I,
                                            int grid) {
    if (K < 1) throw InvalidArgument("K must be at least 1");
    if (grid < 2) throw InvalidArgument("grid must have at least two points");
    std::vector<CascadeStep> out;
    auto measure = [&](int k, auto&& image, auto&& deriv) {
        CascadeStep st{k, 0.0, 0.0};
        for (int i = 0; i < grid; ++i) {
            CirclePoint p = I.at(static_cast<double>(i) / (grid - 1));
            double d = deriv(p);
            if (!(d <= 1e12)) throw NumericBlowup("cascade derivative exceeded 1e12 at step " + std::to_string(k));
            st.c0 = std::max(st.c0, circle_distance(p, image(p)));
            st.c1 = std::max(st.c1, std::abs(d - 1.0));
        }
        out.push_back(st);
    };
    if (std::holds_alternative<MobiusTransform>(f1) && std::holds_alternative<MobiusTransform>(f2)) {
        std::vector<MobiusTransform> f{std::get<MobiusTransform>(f1), std::get<MobiusTransform>(f2)};
        for (int k = 1; k <= K; ++k) {
            if (k > 2) {
                const auto& u = f[k - 3];
                const auto& w = f[k - 2];
                try {
                    f.push_back(compose(compose(u, w), compose(u.inverse(), w.inverse())));
                } catch (const DegenerateMatrix&) {
                    throw NumericBlowup("cascade matrix lost precision at step " + std::to_string(k));
                }
            }
            const auto& g = f[k - 1];
            measure(k, [&](CirclePoint p) { return g.eval(p); }, [&](CirclePoint p) { return g.derivative(p); });
        }
        return out;
    }
    GroupSystem sys("cascade", {f1, f2}, false);
    std::vector<ReducedWord> words{ReducedWord::parse("a"), ReducedWord::parse("b")};
    for (int k = 1; k <= K; ++k) {
        if (k > 2) {
            const auto& u = words[k - 3];
            const auto& w = words[k - 2];
            std::vector<Letter> ls = w.inverse().letters();
            for (const auto& part : {u.inverse(), w, u}) ls.insert(ls.end(), part.letters().begin(), part.letters().end());
            words.push_back(ReducedWord::reduce(ls));
        }
        const auto& wk = words[k - 1];
        measure(k, [&](CirclePoint p) { return apply_word(sys, wk, p); },
                [&](CirclePoint p) { return word_derivative(sys, wk, p); });
    }
    return out;
}

}  // namespace circledyn
